"""Experiment configurations, the built-in benchmark cases and run orchestration."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from handsoff.discretize import build_problem
from handsoff.plant import InitialValueProblem, PlantSpec, realize
from handsoff.solver import InfeasibleError, Regularizer, SolverOptions, solve
from handsoff.sparsity import DEFAULT_THRESHOLD, METHODS, control_metrics
from handsoff.trajectory import simulate, state_norms

logger = logging.getLogger(__name__)

REALIZATIONS = ("balanced", "canonical")
SUMMARY_COLUMNS = (
    "case_no", "method", "N", "lambda", "density", "l1", "l2", "linf",
    "max_step", "terminal_residual", "iterations", "wall_ms",
)
_SOLVER_FIELDS = ("rho", "max_iter", "eps_abs", "eps_feas", "over_relaxation", "check_every")
_METHOD_TO_KIND = {"lasso": "l1", "en": "en", "clot": "clot"}


class ConfigError(ValueError):
    """Malformed or invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    plant: PlantSpec
    T: float
    xi: tuple[float, ...]
    lam: float | None = None
    N: int = 2000
    methods: tuple[str, ...] = METHODS
    U_max: float = 1.0
    threshold: float = DEFAULT_THRESHOLD
    realization: str = "balanced"
    solver: dict = field(default_factory=dict)
    case_no: int | None = None
    name: str | None = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "T", float(self.T))
            object.__setattr__(self, "xi", tuple(float(v) for v in self.xi))
        except (TypeError, ValueError):
            raise ConfigError(f"T and x0 must be numeric, got T={self.T!r}, x0={self.xi!r}") from None
        object.__setattr__(self, "methods", tuple(self.methods))
        _validate(self)

    @property
    def label(self) -> str:
        if self.case_no is not None:
            return f"case{self.case_no}"
        return self.name or "experiment"

    def ivp(self) -> InitialValueProblem:
        ss = realize(self.plant, balance=self.realization == "balanced")
        return InitialValueProblem(ss=ss, xi=np.array(self.xi), T=self.T, U_max=self.U_max)

    def solver_options(self) -> SolverOptions:
        return SolverOptions(**self.solver)


def _validate(cfg: ExperimentConfig) -> None:
    if not (math.isfinite(cfg.T) and cfg.T > 0):
        raise ConfigError(f"T must be a positive number, got {cfg.T!r}")
    if isinstance(cfg.N, bool) or not (isinstance(cfg.N, int) and cfg.N >= 1):
        raise ConfigError(f"N must be a positive integer, got {cfg.N!r}")
    if len(cfg.xi) != cfg.plant.order:
        raise ConfigError(f"x0 has {len(cfg.xi)} entries but the plant has order {cfg.plant.order}")
    if not cfg.methods:
        raise ConfigError("at least one method is required")
    for m in cfg.methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    if cfg.lam is None:
        if any(m != "lasso" for m in cfg.methods):
            raise ConfigError("lambda is required for the en and clot methods")
    elif not cfg.lam >= 0:
        raise ConfigError(f"lambda must be nonnegative, got {cfg.lam}")
    if not cfg.U_max > 0:
        raise ConfigError(f"U_max must be positive, got {cfg.U_max}")
    if not cfg.threshold >= 0:
        raise ConfigError(f"threshold must be nonnegative, got {cfg.threshold}")
    if cfg.realization not in REALIZATIONS:
        raise ConfigError(f"realization must be one of {REALIZATIONS}, got {cfg.realization!r}")
    unknown = set(cfg.solver) - set(_SOLVER_FIELDS)
    if unknown:
        raise ConfigError(f"unknown solver option(s): {', '.join(sorted(unknown))}")
    try:
        SolverOptions(**cfg.solver)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid solver options: {exc}") from None


# ---------------------------------------------------------------------------
# built-in cases
# ---------------------------------------------------------------------------

def _pair(re: float, im: float) -> tuple[complex, complex]:
    return (complex(re, im), complex(re, -im))


_P1 = PlantSpec(poles=(0, 0, 0, 0))
_P2 = PlantSpec(poles=_pair(-0.025, 1.0))
_P3 = PlantSpec(poles=_pair(-1.0, 0.2) + _pair(0.0, 1.0), zeros=(-2.0,))
_P4 = PlantSpec(poles=_pair(-1.0, 0.2) + _pair(-0.3, 1.0))
_P5 = PlantSpec(poles=_pair(-5.0, 1.0) + _pair(-0.3, 2.0) + _pair(-1.0, 2.0 * math.sqrt(2.0)))
_P6 = PlantSpec(poles=(0, 0, 0, 0) + _pair(0.0, 1.0), zeros=(2.0,))
_P7 = PlantSpec(poles=(0, 0, 0, 0) + _pair(0.0, 1.0), zeros=(1.0, 2.0))

CASES: dict[int, ExperimentConfig] = {
    1: ExperimentConfig(_P1, T=20.0, xi=(1,) * 4, lam=1.0, case_no=1, name="P1"),
    2: ExperimentConfig(_P1, T=20.0, xi=(1,) * 4, lam=0.1, case_no=2, name="P1"),
    3: ExperimentConfig(_P2, T=20.0, xi=(1, 1), lam=0.1, case_no=3, name="P2"),
    4: ExperimentConfig(_P2, T=20.0, xi=(10, 1), lam=0.1, case_no=4, name="P2"),
    5: ExperimentConfig(_P3, T=20.0, xi=(1,) * 4, lam=0.1, case_no=5, name="P3"),
    6: ExperimentConfig(_P4, T=20.0, xi=(1,) * 4, lam=0.1, case_no=6, name="P4"),
    7: ExperimentConfig(_P5, T=20.0, xi=(1,) * 6, lam=0.1, case_no=7, name="P5"),
    8: ExperimentConfig(_P6, T=40.0, xi=(1,) * 6, lam=0.1, case_no=8, name="P6"),
    9: ExperimentConfig(_P7, T=40.0, xi=(1,) * 6, lam=0.1, case_no=9, name="P7"),
}


def builtin_case(case_no: int, **overrides) -> ExperimentConfig:
    try:
        cfg = CASES[int(case_no)]
    except (KeyError, ValueError):
        raise ConfigError(f"no built-in case {case_no!r}; cases are 1-{len(CASES)}") from None
    return replace(cfg, **overrides) if overrides else cfg


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _root_to_json(r: complex):
    return float(r.real) if r.imag == 0 else [float(r.real), float(r.imag)]


def config_to_dict(cfg: ExperimentConfig) -> dict:
    doc = {
        "plant": {
            "poles": [_root_to_json(p) for p in cfg.plant.poles],
            "zeros": [_root_to_json(z) for z in cfg.plant.zeros],
            "gain": cfg.plant.gain,
        },
        "T": cfg.T,
        "N": cfg.N,
        "x0": list(cfg.xi),
        "lambda": cfg.lam,
        "methods": list(cfg.methods),
        "U_max": cfg.U_max,
        "threshold": cfg.threshold,
        "realization": cfg.realization,
        "solver": dict(cfg.solver),
    }
    if cfg.case_no is not None:
        doc["case_no"] = cfg.case_no
    if cfg.name is not None:
        doc["name"] = cfg.name
    return doc


def _parse_roots(items, what: str, auto_conjugate: bool) -> tuple[complex, ...]:
    if not isinstance(items, list):
        raise ConfigError(f"plant.{what} must be a list")
    roots = []
    for k, item in enumerate(items):
        if isinstance(item, (int, float)) and not isinstance(item, bool):
            roots.append(complex(item, 0.0))
        elif (isinstance(item, list) and len(item) == 2
              and all(isinstance(v, (int, float)) for v in item)):
            r = complex(item[0], item[1])
            roots.append(r)
            if auto_conjugate and r.imag != 0:
                roots.append(r.conjugate())
        else:
            raise ConfigError(f"plant.{what}[{k}] must be a number or a [re, im] pair, got {item!r}")
    return tuple(roots)


def config_from_dict(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    known = {"plant", "T", "N", "x0", "lambda", "methods", "U_max", "threshold",
             "realization", "solver", "case_no", "name"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown configuration key(s): {', '.join(sorted(unknown))}")
    for key in ("plant", "T", "x0"):
        if key not in doc:
            raise ConfigError(f"missing required key {key!r}")
    plant = doc["plant"]
    if not isinstance(plant, dict) or "poles" not in plant:
        raise ConfigError("plant must be an object with a 'poles' list")
    auto = bool(plant.get("auto_conjugate", False))
    try:
        spec = PlantSpec(
            poles=_parse_roots(plant["poles"], "poles", auto),
            zeros=_parse_roots(plant.get("zeros", []), "zeros", auto),
            gain=plant.get("gain", 1.0),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid plant: {exc}") from None
    methods = doc.get("methods", list(METHODS))
    if isinstance(methods, str):
        methods = list(METHODS) if methods == "all" else [methods]
    lam = doc.get("lambda")
    try:
        return ExperimentConfig(
            plant=spec,
            T=doc["T"],
            xi=tuple(doc["x0"]),
            lam=None if lam is None else float(lam),
            N=doc.get("N", 2000),
            methods=tuple(m.lower() for m in methods),
            U_max=float(doc.get("U_max", 1.0)),
            threshold=float(doc.get("threshold", DEFAULT_THRESHOLD)),
            realization=doc.get("realization", "balanced"),
            solver=dict(doc.get("solver", {})),
            case_no=doc.get("case_no"),
            name=doc.get("name"),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError, AttributeError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None


def load_config(path) -> ExperimentConfig:
    """Read and validate a JSON experiment file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        return config_from_dict(doc)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2) + "\n")


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".12g")


@dataclass
class MethodResult:
    method: str
    u: np.ndarray
    metrics: dict
    summary: dict


def solve_method(cfg: ExperimentConfig, method: str, N: int | None = None, problem=None):
    """Solve one method of ``cfg``; returns ``(problem, solution, trajectory)``."""
    N = cfg.N if N is None else N
    if problem is None:
        problem = build_problem(cfg.ivp(), N)
    reg = Regularizer(_METHOD_TO_KIND[method], cfg.lam or 0.0, problem.h)
    sol = solve(problem, reg, cfg.solver_options())
    traj = simulate(problem.system, problem.xi, sol.u)
    return problem, sol, traj


def run_dir_name(cfg: ExperimentConfig, N: int) -> str:
    return f"{cfg.label}_N{N}"


def run_case(cfg: ExperimentConfig, out_dir, methods=None, N: int | None = None) -> Path:
    """Solve, simulate and analyze every requested method; write the results.

    Output goes to ``out_dir/<label>_N<N>/``: ``config.json``, one
    ``trajectory_<method>.csv`` and ``metrics_<method>.json`` per method and a
    ``summary.csv``. An infeasible method leaves
    ``residual_history_<method>.csv`` behind and raises ``InfeasibleError``.
    """
    N = cfg.N if N is None else int(N)
    methods = tuple(methods or cfg.methods)
    cfg = replace(cfg, N=N, methods=methods)
    run_dir = Path(out_dir) / run_dir_name(cfg, N)
    run_dir.mkdir(parents=True, exist_ok=True)
    save_config(cfg, run_dir / "config.json")

    problem = build_problem(cfg.ivp(), N)
    rows = []
    for method in methods:
        t0 = time.perf_counter()
        try:
            _, sol, traj = solve_method(cfg, method, N, problem)
        except InfeasibleError as exc:
            _write_history(run_dir / f"residual_history_{method}.csv", exc.history)
            _write_summary(run_dir / "summary.csv", rows)
            raise
        wall_ms = (time.perf_counter() - t0) * 1000.0
        metrics = control_metrics(sol.u, problem.h, cfg.threshold)
        _write_trajectory(run_dir / f"trajectory_{method}.csv", traj)
        diag = {
            **metrics.to_dict(),
            "objective": sol.objective,
            "iterations": sol.iterations,
            "converged": sol.converged,
            "status": sol.status,
            "primal_residual": sol.primal_residual,
            "dual_residual": sol.dual_residual,
            "constraint_residual": sol.terminal_residual,
            "terminal_residual": traj.terminal_residual,
        }
        (run_dir / f"metrics_{method}.json").write_text(json.dumps(diag, indent=2) + "\n")
        rows.append({
            "case_no": cfg.case_no if cfg.case_no is not None else "",
            "method": method,
            "N": N,
            "lambda": "" if cfg.lam is None else _fmt(cfg.lam),
            "density": _fmt(metrics.sparsity_density),
            "l1": _fmt(metrics.l1),
            "l2": _fmt(metrics.l2),
            "linf": _fmt(metrics.linf),
            "max_step": _fmt(metrics.max_step),
            "terminal_residual": _fmt(traj.terminal_residual),
            "iterations": sol.iterations,
            "wall_ms": f"{wall_ms:.1f}",
        })
        logger.info("%s %s N=%d: density %.4f in %d iterations",
                    cfg.label, method, N, metrics.sparsity_density, sol.iterations)
    _write_summary(run_dir / "summary.csv", rows)
    return run_dir


def _write_trajectory(path: Path, traj) -> None:
    n = traj.states.shape[1]
    norms = state_norms(traj)
    u_col = np.append(traj.control, np.nan)  # no control is applied at t = T
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "u"] + [f"x{i + 1}" for i in range(n)] + ["norm_x"])
        for m in range(len(traj.times)):
            u = "" if m == len(traj.control) else _fmt(u_col[m])
            w.writerow([_fmt(traj.times[m]), u] + [_fmt(v) for v in traj.states[m]] + [_fmt(norms[m])])


def _write_history(path: Path, history) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "primal_residual", "dual_residual"])
        for it, r, s in history:
            w.writerow([it, _fmt(r), _fmt(s)])


def _write_summary(path: Path, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def read_summary(run_dir) -> list[dict]:
    path = Path(run_dir) / "summary.csv"
    with path.open(newline="") as fh:
        return list(csv.DictReader(fh))


def emit_table(run_dirs, out_csv=None) -> tuple[list[dict], str]:
    """Merge run summaries into one CSV and a density table per grid size."""
    rows = []
    for d in run_dirs:
        rows.extend(read_summary(d))
    if out_csv is not None:
        _write_summary(Path(out_csv), rows)

    blocks = []
    grids = sorted({int(r["N"]) for r in rows})
    for N in grids:
        by_case: dict[str, dict] = {}
        for r in rows:
            if int(r["N"]) == N:
                by_case.setdefault(r["case_no"], {})[r["method"]] = float(r["density"])
        lines = [f"N = {N}", f"{'No.':>4}  {'LASSO':>8}  {'EN':>8}  {'CLOT':>8}"]
        for case in sorted(by_case, key=lambda c: (c == "", int(c) if c.isdigit() else c)):
            cells = [f"{by_case[case][m]:8.4f}" if m in by_case[case] else f"{'-':>8}" for m in METHODS]
            lines.append(f"{case or '-':>4}  " + "  ".join(cells))
        blocks.append("\n".join(lines))
    return rows, "\n\n".join(blocks)
