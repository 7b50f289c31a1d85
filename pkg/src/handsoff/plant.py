"""SISO plant descriptions and their state-space realizations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

# Roots whose imaginary part is below this (relative) size are treated as real.
_REAL_TOL = 1e-12
# Conjugate partners must agree to this relative accuracy.
_PAIR_TOL = 1e-9


def _as_roots(values: Sequence[complex]) -> tuple[complex, ...]:
    return tuple(complex(v) for v in values)


@dataclass(frozen=True)
class PlantSpec:
    """Transfer function ``gain * prod(s - z) / prod(s - p)``.

    Poles and zeros are in rad/s. Complex values must come in conjugate pairs.
    """

    poles: tuple[complex, ...]
    zeros: tuple[complex, ...] = ()
    gain: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "poles", _as_roots(self.poles))
        object.__setattr__(self, "zeros", _as_roots(self.zeros))
        object.__setattr__(self, "gain", float(self.gain))
        if len(self.zeros) >= len(self.poles):
            raise ValueError(
                f"plant must be strictly proper: {len(self.zeros)} zeros, "
                f"{len(self.poles)} poles"
            )
        # raises on unpaired complex roots
        poly_from_roots(self.poles)
        poly_from_roots(self.zeros)

    @property
    def order(self) -> int:
        return len(self.poles)

    def denominator(self) -> np.ndarray:
        return poly_from_roots(self.poles)

    def numerator(self) -> np.ndarray:
        return self.gain * poly_from_roots(self.zeros)


@dataclass(frozen=True)
class StateSpace:
    """Single-input pair ``dx/dt = A x + B u``."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        B = np.array(self.B, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ValueError(f"B has {B.shape[0]} rows, A has {A.shape[0]}")
        if A.shape[0] == 0:
            raise ValueError("empty state space")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise ValueError("A and B must be finite")
        A.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class InitialValueProblem:
    """Drive ``ss`` from ``xi`` to the origin in time ``T`` with ``|u| <= U_max``."""

    ss: StateSpace
    xi: np.ndarray
    T: float
    U_max: float = 1.0

    def __post_init__(self):
        xi = np.array(self.xi, dtype=float).reshape(-1)
        if xi.shape[0] != self.ss.n:
            raise ValueError(f"xi has length {xi.shape[0]}, expected {self.ss.n}")
        if not self.T > 0:
            raise ValueError(f"horizon T must be positive, got {self.T}")
        if not self.U_max > 0:
            raise ValueError(f"U_max must be positive, got {self.U_max}")
        xi.setflags(write=False)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "U_max", float(self.U_max))


def poly_from_roots(roots: Sequence[complex]) -> np.ndarray:
    """Monic real polynomial with the given roots, highest power first.

    Conjugate pairs are multiplied out as real quadratics so the result has no
    imaginary round-off.

    Raises
    ------
    ValueError
        If a complex root has no conjugate partner.
    """
    roots = [complex(r) for r in roots]
    real_roots = []
    upper, lower = [], []
    for r in roots:
        if abs(r.imag) <= _REAL_TOL * max(1.0, abs(r)):
            real_roots.append(r.real)
        elif r.imag > 0:
            upper.append(r)
        else:
            lower.append(r)

    factors = [np.array([1.0, -r]) for r in real_roots]
    for r in upper:
        match = None
        for k, q in enumerate(lower):
            if abs(q - r.conjugate()) <= _PAIR_TOL * max(1.0, abs(r)):
                match = k
                break
        if match is None:
            raise ValueError(f"complex root {r} has no conjugate partner")
        lower.pop(match)
        factors.append(np.array([1.0, -2.0 * r.real, r.real**2 + r.imag**2]))
    if lower:
        raise ValueError(f"complex root {lower[0]} has no conjugate partner")

    coeffs = np.array([1.0])
    for f in factors:
        coeffs = np.convolve(coeffs, f)
    return coeffs


def _companion(den: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = len(den) - 1
    A = np.zeros((n, n))
    A[0, :] = -den[1:] / den[0]
    A[1:, :-1] += np.eye(n - 1)
    B = np.zeros(n)
    B[0] = 1.0
    return A, B


def balance_scaling(M: np.ndarray, radix: float = 2.0, max_sweeps: int = 100) -> np.ndarray:
    """Diagonal scaling ``d`` such that ``diag(d)^-1 M diag(d)`` is balanced.

    Classic Parlett-Reinsch iteration on off-diagonal 1-norms with power-of-
    ``radix`` factors, so the similarity introduces no rounding. No
    permutation step is applied.
    """
    M = np.array(M, dtype=float)
    n = M.shape[0]
    d = np.ones(n)
    off = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        converged = True
        for i in range(n):
            c = np.abs(M[:, i][off[:, i]]).sum()
            r = np.abs(M[i, :][off[i, :]]).sum()
            if c == 0.0 or r == 0.0:
                continue
            s = c + r
            f = 1.0
            while c < r / radix:
                c *= radix
                r /= radix
                f *= radix
            while c >= r * radix:
                c /= radix
                r *= radix
                f /= radix
            if c + r < 0.95 * s:
                converged = False
                d[i] *= f
                M[:, i] *= f
                M[i, :] /= f
        if converged:
            break
    return d


def realize(spec: PlantSpec, balance: bool = False) -> StateSpace:
    """State-space pair for ``spec`` in controllable canonical form.

    The first row of ``A`` holds the negated denominator coefficients, the
    subdiagonal is one and ``B = e1``. Zeros never enter ``(A, B)``.

    With ``balance=True`` the canonical pair is further transformed by the
    power-of-two diagonal similarity that balances ``[[A, B], [C, 0]]``, which
    is how Matlab's ``ss(tf(num, den))`` conditions its realization. The
    numerator then influences the state scaling (but not the input/output
    behaviour).
    """
    if spec.order == 0:
        raise ValueError("plant has no poles; state space would be empty")
    den = spec.denominator()
    A, B = _companion(den)
    if balance:
        n = spec.order
        num = spec.numerator()
        C = np.zeros(n)
        C[n - len(num):] = num
        S = np.zeros((n + 1, n + 1))
        S[:n, :n] = A
        S[:n, n] = B
        S[n, :n] = C
        d = balance_scaling(S)
        d = d[:n] / d[n]
        A = A * d[None, :] / d[:, None]
        B = B / d
    return StateSpace(A, B)


def controllability_matrix(ss: StateSpace) -> np.ndarray:
    n = ss.n
    K = np.empty((n, n))
    col = ss.B.copy()
    for k in range(n):
        K[:, k] = col
        col = ss.A @ col
    return K


def controllability_rank(ss: StateSpace) -> int:
    """Numerical rank of ``[B, AB, ..., A^(n-1) B]``."""
    sv = np.linalg.svd(controllability_matrix(ss), compute_uv=False)
    if sv[0] == 0.0:
        return 0
    tol = ss.n * np.finfo(float).eps * sv[0]
    return int(np.count_nonzero(sv > tol))


def is_normal(ss: StateSpace) -> bool:
    """Controllable with a nonsingular ``A``.

    Singularity is judged by ``sigma_min(A) <= 1e-10 * sigma_max(A)``; a
    determinant test against ``||A||^n`` misjudges companion matrices with
    one large row.
    """
    if controllability_rank(ss) < ss.n:
        return False
    sv = np.linalg.svd(ss.A, compute_uv=False)
    return bool(sv[-1] > 1e-10 * sv[0])
