"""Zero-order-hold discretization and the finite-dimensional reachability data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from handsoff.plant import InitialValueProblem, StateSpace

# Pade coefficients b_0..b_m for degrees 3, 5, 7, 9, 13 and the 1-norm bounds
# below which each degree meets double-precision backward error (Higham 2005).
_PADE = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0, 960960.0,
         16380.0, 182.0, 1.0),
}
_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}


def _pade_uv(M: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    b = _PADE[m]
    ident = np.eye(M.shape[0])
    M2 = M @ M
    if m == 13:
        M4 = M2 @ M2
        M6 = M4 @ M2
        U = M @ (M6 @ (b[13] * M6 + b[11] * M4 + b[9] * M2)
                 + b[7] * M6 + b[5] * M4 + b[3] * M2 + b[1] * ident)
        V = (M6 @ (b[12] * M6 + b[10] * M4 + b[8] * M2)
             + b[6] * M6 + b[4] * M4 + b[2] * M2 + b[0] * ident)
        return U, V
    powers = [ident, M2]
    for _ in range(2, (m + 1) // 2):
        powers.append(powers[-1] @ M2)
    U = sum(b[2 * k + 1] * powers[k] for k in range(len(powers)))
    V = sum(b[2 * k] * powers[k] for k in range(len(powers)))
    return M @ U, V


def matrix_exponential(M: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a diagonal Pade core.

    The Pade degree and number of squarings follow Higham's 2005 selection
    rule on the 1-norm of ``M``.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"matrix exponential needs a square matrix, got {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    if M.size == 0:
        return M.copy()
    norm1 = np.linalg.norm(M, 1)
    for m in (3, 5, 7, 9):
        if norm1 <= _THETA[m]:
            U, V = _pade_uv(M, m)
            return np.linalg.solve(V - U, V + U)
    s = max(0, int(np.ceil(np.log2(norm1 / _THETA[13]))))
    U, V = _pade_uv(M / 2.0**s, 13)
    E = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        E = E @ E
    return E


@dataclass(frozen=True)
class DiscreteSystem:
    """Sampled pair ``x[m+1] = A_d x[m] + B_d u[m]`` with step ``h``."""

    A_d: np.ndarray
    B_d: np.ndarray
    h: float
    N: int | None = None

    @property
    def n(self) -> int:
        return self.A_d.shape[0]


@dataclass(frozen=True)
class DiscreteProblem:
    """Terminal constraint ``Phi @ u = b`` with ``|u| <= U_max``.

    Column ``m`` of ``Phi`` is ``A_d^(N-1-m) B_d`` and ``b = -A_d^N xi``.
    ``row_scale`` holds the max-abs of each row of ``Phi`` as a conditioning
    diagnostic; it is not applied to the data.
    """

    Phi: np.ndarray
    b: np.ndarray
    h: float
    N: int
    U_max: float
    system: DiscreteSystem
    xi: np.ndarray
    row_scale: np.ndarray

    @property
    def n(self) -> int:
        return self.Phi.shape[0]

    def scaled(self, factor: float) -> "DiscreteProblem":
        """Same feasible set with ``Phi`` and ``b`` multiplied by ``factor``."""
        if factor == 0:
            raise ValueError("scale factor must be nonzero")
        return DiscreteProblem(
            Phi=self.Phi * factor, b=self.b * factor, h=self.h, N=self.N,
            U_max=self.U_max, system=self.system, xi=self.xi,
            row_scale=self.row_scale * abs(factor),
        )


def zoh_discretize(ss: StateSpace, h: float, N: int | None = None) -> DiscreteSystem:
    """Exact discretization for piecewise-constant input.

    Both blocks come from one exponential of ``[[A, B], [0, 0]] * h``, which
    stays valid when ``A`` is singular.
    """
    if not h > 0:
        raise ValueError(f"step length must be positive, got {h}")
    n = ss.n
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = ss.A
    M[:n, n] = ss.B
    E = matrix_exponential(M * h)
    return DiscreteSystem(A_d=E[:n, :n].copy(), B_d=E[:n, n].copy(), h=float(h), N=N)


def build_problem(ivp: InitialValueProblem, N: int) -> DiscreteProblem:
    """Discretize ``ivp`` on ``N`` equal steps of length ``T / N``."""
    N = int(N)
    if N < 1:
        raise ValueError(f"need at least one step, got N={N}")
    ds = zoh_discretize(ivp.ss, ivp.T / N, N)
    n = ivp.ss.n
    Phi = np.empty((n, N))
    col = ds.B_d.copy()
    for m in range(N - 1, -1, -1):
        Phi[:, m] = col
        col = ds.A_d @ col
    x = ivp.xi.copy()
    for _ in range(N):
        x = ds.A_d @ x
    b = -x
    return DiscreteProblem(
        Phi=Phi, b=b, h=ds.h, N=N, U_max=ivp.U_max, system=ds,
        xi=ivp.xi.copy(), row_scale=np.abs(Phi).max(axis=1),
    )
