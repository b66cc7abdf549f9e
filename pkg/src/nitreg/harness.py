"""Experiment layer: problem construction, exact-magnitude noise synthesis,
config files, and CSV report emission."""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from . import penalties, solver
from .inner_cg import InnerSettings
from .operators import EllipticOp, ForwardOp, IntegralOp
from .penalties import Penalty
from .solver import AlphaSchedule, RunReport, StoppingRule
from .spaces import GridFn, GridSpace, norm, primal, read_csv

OUT_DIR_ENV = "NITREG_OUT_DIR"

# Config schema: section -> {key: (type, default)}.  Unknown keys are rejected.
_SCHEMA = {
    "problem": {
        "kind": (str, "integral_1d"),  # integral_1d | elliptic_2d
        "n": (int, 400),
        "nx": (int, 40),
        "ny": (int, 40),
    },
    "exact": {
        "selector": (str, "spikes_1d"),  # spikes_1d | two_inclusions_2d | zero | file
        "path": (str, ""),
    },
    "noise": {
        "delta": (float, 5e-4),
        "seed": (int, 1),
    },
    "method": {
        "r": (float, 2.0),
    },
    "schedule": {
        "kind": (str, "geometric"),
        "alpha1": (float, 0.5),
        "q": (float, 0.5),
    },
    "stopping": {
        "kind": (str, "discrepancy"),
        "tau": (float, 1.02),
        "max_outer": (int, 200),
        "atol_zero": (float, 1e-10),
    },
    "penalty": {
        "kind": (str, "quadratic"),
        "mu": (float, 1.0),
        "a": (float, 0.0),
        "b": (float, 0.0),
        "eps": (float, 1e-6),
    },
    "inner": {
        "grad_tol_rel": (float, 1e-8),
        "max_iters": (int, 2000),
        "restart_period": (int, 0),  # 0: problem dimension
        "armijo": (float, 1e-4),
        "backtrack": (float, 0.5),
        "max_backtracks": (int, 50),
    },
    "output": {
        "dir": (str, "."),
        "name": (str, "run"),
    },
    "study": {
        "deltas": (str, ""),
    },
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    problem_kind: str
    n: int
    nx: int
    ny: int
    exact_selector: str
    exact_path: str
    delta: float
    seed: int
    r: float
    schedule_kind: str
    alpha1: float
    q: float
    stopping_kind: str
    tau: float
    max_outer: int
    atol_zero: float
    penalty_kind: str
    mu: float
    a: float
    b: float
    eps: float
    grad_tol_rel: float
    max_iters: int
    restart_period: int
    armijo: float
    backtrack: float
    max_backtracks: int
    out_dir: str
    name: str
    study_deltas: tuple[float, ...] = ()

    def echo(self) -> dict:
        return asdict(self)

    def penalty(self) -> Penalty:
        return Penalty(self.penalty_kind, mu=self.mu, a=self.a, b=self.b, eps=self.eps)

    def schedule(self) -> AlphaSchedule:
        return AlphaSchedule(self.schedule_kind, self.alpha1, self.q)

    def stopping(self) -> StoppingRule:
        return StoppingRule(self.stopping_kind, self.tau, self.max_outer, self.atol_zero)

    def inner_settings(self) -> InnerSettings:
        return InnerSettings(
            grad_tol_rel=self.grad_tol_rel,
            max_iters=self.max_iters,
            restart_period=self.restart_period or None,
            armijo=self.armijo,
            backtrack=self.backtrack,
            max_backtracks=self.max_backtracks,
        )


def _config_from_mapping(raw: dict) -> ExperimentConfig:
    values = {}
    for section, keys in _SCHEMA.items():
        got = raw.get(section, {})
        for key in got:
            if key not in keys:
                raise ConfigError(f"unknown key [{section}] {key}")
        for key, (typ, default) in keys.items():
            text = got.get(key)
            try:
                values[(section, key)] = default if text is None else typ(text)
            except ValueError as exc:
                raise ConfigError(f"bad value for [{section}] {key}: {text!r}") from exc
    for section in raw:
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")

    deltas_text = values[("study", "deltas")]
    study_deltas = tuple(
        float(tok) for tok in deltas_text.replace(",", " ").split()
    )
    cfg = ExperimentConfig(
        problem_kind=values[("problem", "kind")],
        n=values[("problem", "n")],
        nx=values[("problem", "nx")],
        ny=values[("problem", "ny")],
        exact_selector=values[("exact", "selector")],
        exact_path=values[("exact", "path")],
        delta=values[("noise", "delta")],
        seed=values[("noise", "seed")],
        r=values[("method", "r")],
        schedule_kind=values[("schedule", "kind")],
        alpha1=values[("schedule", "alpha1")],
        q=values[("schedule", "q")],
        stopping_kind=values[("stopping", "kind")],
        tau=values[("stopping", "tau")],
        max_outer=values[("stopping", "max_outer")],
        atol_zero=values[("stopping", "atol_zero")],
        penalty_kind=values[("penalty", "kind")],
        mu=values[("penalty", "mu")],
        a=values[("penalty", "a")],
        b=values[("penalty", "b")],
        eps=values[("penalty", "eps")],
        grad_tol_rel=values[("inner", "grad_tol_rel")],
        max_iters=values[("inner", "max_iters")],
        restart_period=values[("inner", "restart_period")],
        armijo=values[("inner", "armijo")],
        backtrack=values[("inner", "backtrack")],
        max_backtracks=values[("inner", "max_backtracks")],
        out_dir=values[("output", "dir")],
        name=values[("output", "name")],
        study_deltas=study_deltas,
    )
    if cfg.delta < 0.0:
        raise ConfigError("[noise] delta must be >= 0")
    if cfg.problem_kind not in ("integral_1d", "elliptic_2d"):
        raise ConfigError(f"unknown problem kind {cfg.problem_kind!r}")
    return cfg


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Parse an experiment config (INI-style sections of key = value)."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    raw = {section: dict(parser[section]) for section in parser.sections()}
    for (section, key), val in (overrides or {}).items():
        raw.setdefault(section, {})[key] = str(val)
    return _config_from_mapping(raw)


def config_from_dict(raw: dict) -> ExperimentConfig:
    return _config_from_mapping({s: {k: str(v) for k, v in kv.items()}
                                 for s, kv in raw.items()})


def spikes_1d(space: GridSpace) -> GridFn:
    """Three narrow plateaus of heights 0.5 / 1 / 0.7 on a zero background."""
    t = space.axis_nodes(0)
    v = np.zeros_like(t)
    v[(t >= 0.292) & (t <= 0.300)] = 0.5
    v[(t >= 0.500) & (t <= 0.508)] = 1.0
    v[(t >= 0.700) & (t <= 0.708)] = 0.7
    return primal(space, v)


def two_inclusions_2d(space: GridSpace) -> GridFn:
    """A disc of height 1 and a rectangle of height 0.5 on a zero background."""
    x, y = space.coords()
    v = np.zeros(space.size)
    v[(x - 0.3) ** 2 + (y - 0.7) ** 2 <= 0.2**2] = 1.0
    rect = (x >= 0.6) & (x <= 0.8) & (y >= 0.2) & (y <= 0.5)
    v[rect] = 0.5
    return primal(space, v)


def exact_solution(cfg: ExperimentConfig, space: GridSpace) -> GridFn:
    sel = cfg.exact_selector
    if sel == "spikes_1d":
        return spikes_1d(space)
    if sel == "two_inclusions_2d":
        return two_inclusions_2d(space)
    if sel == "zero":
        return primal(space, np.zeros(space.size))
    if sel == "file":
        fn = read_csv(cfg.exact_path)
        if fn.space != space:
            raise ConfigError("custom exact solution lives on a different grid")
        return fn
    raise ConfigError(f"unknown exact-solution selector {sel!r}")


def make_problem(cfg: ExperimentConfig) -> tuple[ForwardOp, GridFn, GridFn]:
    """Construct (operator, exact solution, exact data y = F(x_dagger))."""
    if cfg.problem_kind == "integral_1d":
        op = IntegralOp(cfg.n)
        x_dag = exact_solution(cfg, op.domain_space)
        return op, x_dag, op.apply(x_dag)
    # elliptic_2d: state u = x + y is harmonic, so the consistent source for
    # -Lap(u) + c u = f with u = x + y is f = c_dagger * (x + y), g = x + y.
    space = GridSpace.rectangle(cfg.nx, cfg.ny)
    c_dag = exact_solution(cfg, space)
    x, y = space.coords()
    u_exact = x + y
    op = EllipticOp(cfg.nx, cfg.ny, f=c_dag.values * u_exact, g=u_exact)
    return op, c_dag, op.apply(c_dag)


def add_noise(y: GridFn, delta: float, seed: int) -> GridFn:
    """Return noisy data at exactly the requested distance from y.

    The perturbation is a seeded Gaussian direction rescaled so that
    ||y - y_noisy|| = delta in the weighted norm of y's space.
    """
    if delta < 0.0:
        raise ValueError("delta must be >= 0")
    if delta == 0.0:
        return y
    rng = np.random.default_rng(seed)
    while True:
        e = rng.standard_normal(y.space.size)
        nrm = norm(GridFn(y.space, e, y.variance))
        if nrm > 0.0:
            break
    return GridFn(y.space, y.values + delta * e / nrm, y.variance)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def write_iteration_csv(path, report: RunReport, theta: Penalty,
                        x_ref: GridFn | None) -> None:
    breg = (solver.diagnostics_bregman(report, theta, x_ref)
            if x_ref is not None else [float("nan")] * len(report.states))
    with open(path, "w") as fh:
        fh.write(f"# n_delta={report.n_delta} terminated_by={report.terminated_by} "
                 f"delta={_fmt(report.delta)} tau={_fmt(report.tau)}\n")
        fh.write("n,alpha,residual,theta_value,bregman_to_ref,inner_iters\n")
        for s, d in zip(report.states, breg):
            inner = s.inner_stats.iterations if s.inner_stats else 0
            alpha = s.alpha if s.alpha is not None else float("nan")
            fh.write(f"{s.n},{_fmt(alpha)},{_fmt(s.residual)},"
                     f"{_fmt(s.theta_value)},{_fmt(float(d))},{inner}\n")


def write_reconstruction_csv(path, x: GridFn) -> None:
    coords = x.space.coords()
    headers = ["t"] if len(coords) == 1 else ["x", "y"]
    with open(path, "w") as fh:
        fh.write(",".join(headers + ["value"]) + "\n")
        for row in zip(*coords, x.values):
            fh.write(",".join(_fmt(float(v)) for v in row) + "\n")


def write_summary_csv(path, report: RunReport, theta: Penalty,
                      x_dagger: GridFn | None) -> None:
    final = report.states[report.n_delta]
    rows = {
        "n_delta": report.n_delta,
        "terminated_by": report.terminated_by,
        "residual": final.residual,
        "l2_error": norm(report.x_out - x_dagger) if x_dagger is not None else float("nan"),
        "theta_value": final.theta_value,
    }
    with open(path, "w") as fh:
        fh.write("key,value\n")
        for k, v in rows.items():
            fh.write(f"{k},{_fmt(v)}\n")
        for k, v in report.config.items():
            fh.write(f"config.{k},{_fmt(v)}\n")


def resolve_out_dir(cfg: ExperimentConfig, out_dir: str | None = None) -> Path:
    d = out_dir or os.environ.get(OUT_DIR_ENV) or cfg.out_dir
    path = Path(d)
    path.mkdir(parents=True, exist_ok=True)
    return path


def run_experiment(cfg: ExperimentConfig, out_dir: str | None = None,
                   quiet: bool = False) -> RunReport:
    """Run a configured experiment and emit the CSV file set."""
    op, x_dag, y_exact = make_problem(cfg)
    ydelta = add_noise(y_exact, cfg.delta, cfg.seed)
    theta = cfg.penalty()
    report = solver.run(
        op, theta, ydelta, cfg.delta, cfg.schedule(), cfg.stopping(),
        cfg.inner_settings(), r=cfg.r, config=cfg.echo(),
    )
    directory = resolve_out_dir(cfg, out_dir)
    base = directory / cfg.name
    write_iteration_csv(f"{base}_iterations.csv", report, theta, x_dag)
    write_reconstruction_csv(f"{base}_reconstruction.csv", report.x_out)
    write_summary_csv(f"{base}_summary.csv", report, theta, x_dag)
    if not quiet:
        final = report.states[report.n_delta]
        print(f"{cfg.name}: n_delta={report.n_delta} "
              f"terminated_by={report.terminated_by} "
              f"residual={final.residual:.6g} "
              f"l2_error={norm(report.x_out - x_dag):.6g}")
    return report


def run_study(cfg: ExperimentConfig, out_dir: str | None = None,
              quiet: bool = False) -> list[dict]:
    """Noise-level sweep: one full run per delta, one CSV table out."""
    if not cfg.study_deltas:
        raise ConfigError("[study] deltas is empty; nothing to sweep")
    op, x_dag, y_exact = make_problem(cfg)
    rows = solver.convergence_study(
        lambda d: add_noise(y_exact, d, cfg.seed),
        cfg.study_deltas, op, cfg.penalty(), x_dag,
        cfg.schedule(), cfg.stopping(), cfg.inner_settings(), r=cfg.r,
    )
    directory = resolve_out_dir(cfg, out_dir)
    path = directory / f"{cfg.name}_study.csv"
    cols = ["delta", "n_delta", "terminated_by", "residual", "error",
            "theta_value", "bregman_to_ref", "error_message"]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row.get(c, "")) for c in cols) + "\n")
    if not quiet:
        for row in rows:
            print(row)
    return rows


def example51_config(penalty: str = "l2_l1",
                     overrides: dict | None = None) -> ExperimentConfig:
    """Built-in config for the 1-D integral-equation experiment."""
    raw = {
        "problem": {"kind": "integral_1d", "n": 400},
        "exact": {"selector": "spikes_1d"},
        "noise": {"delta": 5e-4, "seed": 1},
        "schedule": {"kind": "geometric", "alpha1": 0.5, "q": 0.5},
        "stopping": {"kind": "discrepancy", "tau": 1.02, "max_outer": 200},
        "method": {"r": 2.0},
        "inner": {"grad_tol_rel": 1e-8, "max_iters": 2000},
        "output": {"name": f"example51_{penalty}"},
        "study": {"deltas": "4e-3 2e-3 1e-3 5e-4"},
    }
    if penalty == "l2_l1":
        raw["penalty"] = {"kind": "l2_l1", "mu": 0.01, "a": 1.0, "eps": 1e-6}
    elif penalty == "quadratic":
        raw["penalty"] = {"kind": "quadratic", "mu": 1.0}
    else:
        raise ConfigError(f"unsupported example51 penalty {penalty!r}")
    for (section, key), val in (overrides or {}).items():
        raw.setdefault(section, {})[key] = val
    return config_from_dict(raw)


def example52_config(penalty: str = "l2_tv", mu: float = 0.01,
                     overrides: dict | None = None) -> ExperimentConfig:
    """Built-in config for the 2-D elliptic parameter-identification experiment."""
    raw = {
        "problem": {"kind": "elliptic_2d", "nx": 40, "ny": 40},
        "exact": {"selector": "two_inclusions_2d"},
        "noise": {"delta": 1e-4, "seed": 1},
        "schedule": {"kind": "geometric", "alpha1": 0.5, "q": 0.5},
        "stopping": {"kind": "discrepancy", "tau": 1.05, "max_outer": 200},
        "method": {"r": 2.0},
        "inner": {"grad_tol_rel": 1e-8, "max_iters": 300},
        "study": {"deltas": "1e-3 3e-4 1e-4"},
    }
    if penalty == "l2_tv":
        raw["penalty"] = {"kind": "l2_tv", "mu": mu, "b": 1.0, "eps": 1e-6}
        raw["output"] = {"name": f"example52_l2_tv_mu{mu:g}"}
    elif penalty == "quadratic":
        raw["penalty"] = {"kind": "quadratic", "mu": 1.0}
        raw["output"] = {"name": "example52_quadratic"}
    else:
        raise ConfigError(f"unsupported example52 penalty {penalty!r}")
    for (section, key), val in (overrides or {}).items():
        raw.setdefault(section, {})[key] = val
    return config_from_dict(raw)
