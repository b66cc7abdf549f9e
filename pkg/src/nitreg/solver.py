"""Outer iteration: alpha schedules, primal inner solve, dual update,
discrepancy-principle stopping (plain and max-index variant), diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import inner_cg, penalties
from .inner_cg import InnerProblem, InnerSettings, InnerStats
from .operators import ForwardOp
from .penalties import Penalty
from .spaces import GridFn, duality_map, norm, zeros


@dataclass(frozen=True)
class AlphaSchedule:
    """Regularization-parameter sequence; all kinds satisfy
    sum(1/alpha_n) = inf and the bounded-ratio condition alpha_n <= c0 * alpha_{n+1}."""

    kind: str  # geometric | constant | harmonic
    alpha1: float
    q: float = 1.0  # geometric ratio, in (0, 1]

    def __post_init__(self):
        if self.kind not in ("geometric", "constant", "harmonic"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.alpha1 <= 0.0:
            raise ValueError("alpha1 must be > 0")
        if self.kind == "geometric" and not (0.0 < self.q <= 1.0):
            raise ValueError("geometric ratio q must be in (0, 1]")

    def alpha(self, n: int) -> float:
        if n < 1:
            raise ValueError("alpha is defined for n >= 1")
        if self.kind == "geometric":
            return self.alpha1 * self.q ** (n - 1)
        if self.kind == "constant":
            return self.alpha1
        return self.alpha1 / n

    @property
    def c0(self) -> float:
        if self.kind == "geometric":
            return 1.0 / self.q
        if self.kind == "constant":
            return 1.0
        return 2.0


@dataclass(frozen=True)
class StoppingRule:
    kind: str = "discrepancy"  # discrepancy | rule41
    tau: float = 1.02
    max_outer: int = 200
    atol_zero: float = 1e-10  # residual target for exact data (delta = 0)

    def __post_init__(self):
        if self.kind not in ("discrepancy", "rule41"):
            raise ValueError(f"unknown stopping kind {self.kind!r}")
        if self.tau <= 1.0:
            raise ValueError("tau must be > 1")
        if self.max_outer < 1:
            raise ValueError("max_outer must be >= 1")


@dataclass
class NitState:
    n: int
    x: GridFn
    xi: GridFn
    residual: float
    alpha: float | None = None
    inner_stats: InnerStats | None = None
    dual_gap: float = np.nan  # ||xi_n - grad Theta(x_n)||_* (diagnostic)
    theta_value: float = np.nan


@dataclass
class RunReport:
    states: list[NitState]
    n_delta: int
    terminated_by: str  # discrepancy | rule41 | max_outer
    x_out: GridFn
    delta: float
    tau: float
    threshold: float
    config: dict = field(default_factory=dict)

    @property
    def residuals(self) -> np.ndarray:
        return np.array([s.residual for s in self.states])


def step(
    op: ForwardOp,
    theta: Penalty,
    ydelta: GridFn,
    alpha_n: float,
    prev: NitState,
    settings: InnerSettings | None = None,
    r: float = 2.0,
    exact_linear: bool = False,
) -> NitState:
    """One outer step: warm-started inner minimization plus the dual update
    xi_n = xi_{n-1} - (1/alpha_n) F'(x_n)* J_r(F(x_n) - ydelta)."""
    problem = InnerProblem(op, ydelta, theta, alpha_n, prev.x, prev.xi, r)
    if exact_linear and inner_cg.is_linear_quadratic(problem):
        x_n, stats = inner_cg.minimize_linear_quadratic(problem)
    else:
        x_n, stats = inner_cg.minimize(problem, settings, x_start=prev.x)
    residual_fn = op.apply(x_n) - ydelta
    jr = duality_map(residual_fn, r)
    xi_n = prev.xi - (1.0 / alpha_n) * op.adjoint(x_n, jr)
    state = NitState(
        n=prev.n + 1,
        x=x_n,
        xi=xi_n,
        residual=norm(residual_fn),
        alpha=alpha_n,
        inner_stats=stats,
        dual_gap=norm(xi_n - penalties.gradient(theta, x_n)),
        theta_value=penalties.value(theta, x_n),
    )
    return state


def _initial_state(op, theta, ydelta, x0, xi0):
    if x0 is None:
        x0 = zeros(op.domain_space)
    if xi0 is None:
        xi0 = penalties.gradient(theta, x0)
    res0 = norm(op.apply(x0) - ydelta)
    return NitState(
        n=0, x=x0, xi=xi0, residual=res0,
        dual_gap=norm(xi0 - penalties.gradient(theta, x0)),
        theta_value=penalties.value(theta, x0),
    )


def run(
    op: ForwardOp,
    theta: Penalty,
    ydelta: GridFn,
    delta: float,
    schedule: AlphaSchedule,
    stop: StoppingRule,
    settings: InnerSettings | None = None,
    x0: GridFn | None = None,
    xi0: GridFn | None = None,
    r: float = 2.0,
    exact_linear: bool = False,
    config: dict | None = None,
) -> RunReport:
    """Run the outer iteration until the stopping rule fires.

    With the plain discrepancy rule the first iterate with residual <= tau*delta
    is returned.  With the max-index variant the iteration runs until the
    residual first drops strictly below tau*delta and the previous iterate is
    returned (index 0 if already below at the start).  For delta = 0 the
    threshold falls back to `atol_zero`.
    """
    if delta < 0.0:
        raise ValueError("delta must be >= 0")
    threshold = stop.tau * delta if delta > 0.0 else stop.atol_zero
    states = [_initial_state(op, theta, ydelta, x0, xi0)]

    terminated_by = "max_outer"
    n_delta = 0
    if stop.kind == "discrepancy":
        if states[0].residual <= threshold:
            terminated_by = "discrepancy"
        else:
            for n in range(1, stop.max_outer + 1):
                states.append(
                    step(op, theta, ydelta, schedule.alpha(n), states[-1],
                         settings, r, exact_linear)
                )
                if states[-1].residual <= threshold:
                    terminated_by = "discrepancy"
                    n_delta = n
                    break
            else:
                n_delta = int(np.argmin([s.residual for s in states]))
    else:  # rule41
        if states[0].residual <= threshold:
            terminated_by = "rule41"
        else:
            for n in range(1, stop.max_outer + 1):
                states.append(
                    step(op, theta, ydelta, schedule.alpha(n), states[-1],
                         settings, r, exact_linear)
                )
                if states[-1].residual < threshold:
                    terminated_by = "rule41"
                    n_delta = n - 1
                    break
            else:
                n_delta = int(np.argmin([s.residual for s in states]))

    report = RunReport(
        states=states,
        n_delta=n_delta,
        terminated_by=terminated_by,
        x_out=states[n_delta].x,
        delta=delta,
        tau=stop.tau,
        threshold=threshold,
        config=dict(config or {}),
    )
    return report


def diagnostics_bregman(report: RunReport, theta: Penalty, x_ref: GridFn) -> np.ndarray:
    """Series D_{xi_n} Theta(x_ref, x_n) along the stored trajectory."""
    return np.array(
        [penalties.bregman(theta, x_ref, s.x, s.xi) for s in report.states]
    )


def convergence_study(
    make_noisy,
    deltas,
    op: ForwardOp,
    theta: Penalty,
    x_dagger: GridFn,
    schedule: AlphaSchedule,
    stop: StoppingRule,
    settings: InnerSettings | None = None,
    r: float = 2.0,
    exact_linear: bool = False,
) -> list[dict]:
    """Run the method for each noise level; returns one row per delta, sorted
    by delta descending.  `make_noisy(delta)` must return the noisy data.
    Per-delta failures are recorded and the study continues."""
    rows = []
    for delta in sorted(deltas, reverse=True):
        row = {"delta": delta}
        try:
            ydelta = make_noisy(delta)
            report = run(op, theta, ydelta, delta, schedule, stop, settings,
                         r=r, exact_linear=exact_linear)
            final = report.states[report.n_delta]
            row.update(
                n_delta=report.n_delta,
                terminated_by=report.terminated_by,
                residual=final.residual,
                error=norm(report.x_out - x_dagger),
                theta_value=final.theta_value,
                bregman_to_ref=penalties.bregman(theta, x_dagger, final.x, final.xi),
            )
        except Exception as exc:  # per-delta failure, study continues
            row["error_message"] = str(exc)
        rows.append(row)
    return rows
