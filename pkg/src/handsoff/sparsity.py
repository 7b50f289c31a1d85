"""Sparsity and smoothness measures of sampled control signals."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

DEFAULT_THRESHOLD = 1e-4
METHODS = ("lasso", "en", "clot")


@dataclass(frozen=True)
class ControlMetrics:
    sparsity_density: float
    l1: float
    l2: float
    linf: float
    max_step: float
    threshold: float

    def to_dict(self) -> dict:
        return asdict(self)


def _vector(u) -> np.ndarray:
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.size == 0:
        raise ValueError("control vector is empty")
    return u


def sparsity_density(u, threshold: float = DEFAULT_THRESHOLD) -> float:
    """Fraction of samples with ``|u[m]| > threshold``."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    u = _vector(u)
    return float(np.count_nonzero(np.abs(u) > threshold)) / u.size


def discrete_norms(u, h: float) -> tuple[float, float, float]:
    """Riemann-sum L1 and L2 norms and the sup norm of a held signal."""
    u = _vector(u)
    return (float(h * np.abs(u).sum()),
            float(np.sqrt(h * (u @ u))),
            float(np.abs(u).max()))


def max_step(u) -> float:
    """Largest jump between consecutive samples."""
    u = _vector(u)
    if u.size < 2:
        return 0.0
    return float(np.abs(np.diff(u)).max())


def control_metrics(u, h: float, threshold: float = DEFAULT_THRESHOLD) -> ControlMetrics:
    l1, l2, linf = discrete_norms(u, h)
    return ControlMetrics(
        sparsity_density=sparsity_density(u, threshold),
        l1=l1, l2=l2, linf=linf,
        max_step=max_step(u),
        threshold=float(threshold),
    )


def comparison_table(cases, threshold: float = DEFAULT_THRESHOLD) -> list[dict]:
    """One row of densities per case, columns ``lasso``, ``en``, ``clot``.

    ``cases`` is an iterable of ``(case_no, {method: control})``; rows come
    back sorted by case number and methods that were not run are ``None``.
    """
    rows = []
    for case_no, controls in sorted(cases, key=lambda c: c[0]):
        row = {"case_no": case_no}
        for method in METHODS:
            u = controls.get(method)
            row[method] = None if u is None else sparsity_density(u, threshold)
        rows.append(row)
    return rows


def format_table(rows: list[dict]) -> str:
    lines = [f"{'No.':>4}  {'LASSO':>8}  {'EN':>8}  {'CLOT':>8}"]
    for row in rows:
        cells = ["{:8.4f}".format(row[m]) if row[m] is not None else f"{'-':>8}"
                 for m in METHODS]
        lines.append(f"{row['case_no']:>4}  " + "  ".join(cells))
    return "\n".join(lines)
