"""Consensus ADMM for sparse reachability problems.

The discrete problem is

    minimize    g(u)
    subject to  Phi u = b,  |u_m| <= U_max,

with ``g`` one of the L1, elastic-net or CLOT regularizers. Three copies of
``u`` carry the regularizer, the box and the affine constraint; each copy is
updated by an exact proximal map or projection and the copies are averaged.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from handsoff.discretize import DiscreteProblem

logger = logging.getLogger(__name__)

KINDS = ("l1", "en", "clot")
_ALIASES = {"lasso": "l1", "l1": "l1", "en": "en", "clot": "clot"}


class InfeasibleError(RuntimeError):
    """The terminal constraint cannot be met with ``|u| <= U_max``.

    ``history`` holds ``(iteration, primal, dual)`` residual samples and
    ``certificate`` the Farkas margin when infeasibility was proven
    (``None`` for the residual-stagnation heuristic).
    """

    def __init__(self, message, history=(), certificate=None):
        super().__init__(message)
        self.history = list(history)
        self.certificate = certificate


class RankDeficientError(ValueError):
    """``Phi`` lacks full row rank: the target is not structurally reachable."""


# ---------------------------------------------------------------------------
# proximal maps and projections
# ---------------------------------------------------------------------------

def prox_l1(v, kappa):
    """Soft threshold, the prox of ``kappa * ||.||_1``."""
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - kappa, 0.0)


def prox_en(v, kappa1, kappa2):
    """Prox of ``kappa1 * ||.||_1 + kappa2 * ||.||_2^2``."""
    if kappa2 < 0:
        raise ValueError("kappa2 must be nonnegative")
    return prox_l1(v, kappa1) / (1.0 + 2.0 * kappa2)


def prox_clot(v, kappa1, kappa2):
    """Prox of ``kappa1 * ||.||_1 + kappa2 * ||.||_2``.

    Soft threshold followed by block shrinkage of the whole vector.
    """
    if kappa2 < 0:
        raise ValueError("kappa2 must be nonnegative")
    s = prox_l1(v, kappa1)
    norm = np.linalg.norm(s)
    if norm <= kappa2:
        return np.zeros_like(s)
    return (1.0 - kappa2 / norm) * s


def project_box(v, bound):
    """Clamp every entry of ``v`` to ``[-bound, bound]``."""
    return np.clip(np.asarray(v, dtype=float), -bound, bound)


class AffineProjector:
    """Euclidean projection onto ``{z : Phi z = b}``.

    Rows of ``Phi`` are equilibrated and ``Phi^T`` is QR-factorized once, so
    each projection is two thin matrix-vector products.
    """

    def __init__(self, Phi, b):
        Phi = np.asarray(Phi, dtype=float)
        b = np.asarray(b, dtype=float).reshape(-1)
        if Phi.ndim != 2 or Phi.shape[0] != b.shape[0]:
            raise ValueError(f"Phi {Phi.shape} and b {b.shape} are incompatible")
        scale = np.linalg.norm(Phi, axis=1)
        if np.any(scale == 0):
            raise RankDeficientError("Phi has an all-zero row")
        Q, R = np.linalg.qr((Phi / scale[:, None]).T)
        diag = np.abs(np.diag(R))
        tol = max(Phi.shape) * np.finfo(float).eps * diag.max()
        if diag.min() <= tol:
            raise RankDeficientError(
                f"Phi is rank deficient (|R_ii| min {diag.min():.3e} <= {tol:.3e}); "
                "the plant is not controllable from this input"
            )
        self.Phi = Phi
        self.b = b
        self.Q = Q
        self.c = np.linalg.solve(R.T, b / scale)

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        return v - self.Q @ (self.Q.T @ v - self.c)

    def residual(self, u) -> float:
        return float(np.linalg.norm(self.Phi @ u - self.b))


def project_affine(v, Phi, b):
    """Closest point to ``v`` satisfying ``Phi z = b``."""
    return AffineProjector(Phi, b)(v)


# ---------------------------------------------------------------------------
# problem data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Regularizer:
    """Discretized control cost.

    ``l1``:   h ||u||_1
    ``en``:   h ||u||_1 + lam h ||u||_2^2
    ``clot``: h ||u||_1 + lam sqrt(h) ||u||_2
    """

    kind: str
    lam: float = 0.0
    h: float = 1.0

    def __post_init__(self):
        kind = _ALIASES.get(str(self.kind).lower())
        if kind is None:
            raise ValueError(f"unknown regularizer {self.kind!r}; expected one of {KINDS}")
        if self.lam < 0:
            raise ValueError(f"lambda must be nonnegative, got {self.lam}")
        if not self.h > 0:
            raise ValueError(f"h must be positive, got {self.h}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "h", float(self.h))

    @property
    def w1(self) -> float:
        return self.h

    @property
    def w2(self) -> float:
        if self.kind == "en":
            return self.lam * self.h
        if self.kind == "clot":
            return self.lam * np.sqrt(self.h)
        return 0.0

    def value(self, u) -> float:
        u = np.asarray(u, dtype=float)
        val = self.w1 * np.abs(u).sum()
        if self.kind == "en":
            val += self.w2 * float(u @ u)
        elif self.kind == "clot":
            val += self.w2 * np.linalg.norm(u)
        return float(val)

    def prox(self, v, t):
        """Prox of ``t * self``."""
        if self.kind == "l1":
            return prox_l1(v, t * self.w1)
        if self.kind == "en":
            return prox_en(v, t * self.w1, t * self.w2)
        return prox_clot(v, t * self.w1, t * self.w2)


@dataclass(frozen=True)
class SolverOptions:
    """ADMM settings.

    ``rho`` is the penalty on the objective normalized by its L1 weight, so
    the same value suits any step length.
    """

    rho: float = 1.0
    max_iter: int = 200_000
    eps_abs: float = 1e-8
    eps_feas: float = 1e-9
    over_relaxation: float = 1.0
    check_every: int = 10
    eps_gap: float = 1e-9
    polish_every: int = 500

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not (self.eps_abs > 0 and self.eps_feas > 0 and self.eps_gap > 0):
            raise ValueError("tolerances must be positive")
        if not 1.0 <= self.over_relaxation <= 1.8:
            raise ValueError("over_relaxation must lie in [1, 1.8]")
        if self.max_iter < 1 or self.check_every < 1 or self.polish_every < 0:
            raise ValueError("max_iter and check_every must be positive")


@dataclass
class Solution:
    u: np.ndarray
    objective: float
    iterations: int
    primal_residual: float
    dual_residual: float
    terminal_residual: float
    converged: bool
    status: str = "optimal"
    duality_gap: float | None = None
    polished: bool = False
    history: list = field(default_factory=list, repr=False)
    duals: np.ndarray | None = field(default=None, repr=False)


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------

def _restore_feasibility(u, proj: AffineProjector, bound, rounds=5):
    """Fix ``Phi u = b`` by moving only coordinates strictly inside the box."""
    u = np.clip(u, -bound, bound)
    for _ in range(rounds):
        r = proj.b - proj.Phi @ u
        if not np.any(r):
            break
        free = np.abs(u) < bound * (1.0 - 1e-9)
        if free.sum() < proj.Phi.shape[0]:
            break
        Pf = proj.Phi[:, free]
        scale = np.linalg.norm(Pf, axis=1)
        scale[scale == 0] = 1.0
        delta, *_ = np.linalg.lstsq(Pf / scale[:, None], r / scale, rcond=None)
        u = u.copy()
        u[free] += delta
        u = np.clip(u, -bound, bound)
    return u


def _dual_value(w, proj: AffineProjector, reg: Regularizer, bound) -> float:
    """Lagrange dual function at multiplier ``Phi^T nu = Q w`` (L1 and EN only).

    Every value is a lower bound on the optimal objective.
    """
    a = proj.Q @ w
    if reg.kind == "l1":
        inner = -bound * np.maximum(np.abs(a) - reg.w1, 0.0).sum()
    else:
        u = np.clip(-np.sign(a) * np.maximum(np.abs(a) - reg.w1, 0.0) / (2.0 * reg.w2),
                    -bound, bound)
        inner = (reg.w1 * np.abs(u) + reg.w2 * u * u + a * u).sum()
    return float(inner - w @ proj.c)


def _active_sets(u_est, a_est, w1, bound, n):
    """Candidate ``(upper, lower, zero)`` masks for an L1 solution.

    Guesses come from thresholding the primal estimate and from the
    switching function ``a = Phi^T nu`` (saturated where ``|a| > w1``,
    zero where ``|a| < w1``).
    """
    for delta in (1e-6, 1e-5, 1e-4, 1e-3):
        delta *= bound
        yield u_est >= bound - delta, u_est <= -bound + delta, np.abs(u_est) <= delta
    margin = np.abs(a_est) - w1
    for tau in (1e-6, 1e-4, 1e-3, 1e-2):
        tau *= w1
        hot = margin > tau
        yield hot & (a_est < 0), hot & (a_est > 0), margin < -tau
    closest = np.zeros(len(margin), dtype=bool)
    closest[np.argsort(np.abs(margin))[:n]] = True
    hot = ~closest & (margin > 0)
    yield hot & (a_est < 0), hot & (a_est > 0), ~closest & (margin <= 0)


def _polish_l1(u_est, w_est, proj: AffineProjector, reg: Regularizer, bound, feas_tol, gap_tol):
    """Exact bang-off-bang solution from a guessed active set.

    Samples guessed at +-bound or 0 are fixed there, the remaining ones are
    solved from the terminal constraint and the multiplier is refit so that
    those samples are stationary. Returns ``(u, gap)`` for the first guess
    whose duality gap closes, else ``None``.
    """
    Q = proj.Q
    a_est = Q @ w_est
    for upper, lower, zero in _active_sets(u_est, a_est, reg.w1, bound, Q.shape[1]):
        free = ~(upper | lower | zero)
        u = np.zeros_like(u_est)
        u[upper] = bound
        u[lower] = -bound
        if free.any():
            QF = Q[free]
            rhs = proj.c - Q[~free].T @ u[~free]
            u[free], *_ = np.linalg.lstsq(QF.T, rhs, rcond=None)
            if np.abs(u[free]).max() > bound:
                continue
            target = -reg.w1 * np.sign(u[free])
            corr, *_ = np.linalg.lstsq(QF, target - QF @ w_est, rcond=None)
            w = w_est + corr
        else:
            w = w_est
        if proj.residual(u) > feas_tol:
            continue
        gap = reg.value(u) - _dual_value(w, proj, reg, bound)
        if gap <= gap_tol:
            return u, gap
    return None


def _farkas_margin(w, proj: AffineProjector, bound) -> float:
    """Positive iff direction ``Q w`` proves the constraint set empty.

    Any feasible ``u`` satisfies ``(Q w)^T u = w^T c`` and so
    ``|w^T c| <= bound * ||Q w||_1``.
    """
    lhs = abs(float(w @ proj.c))
    rhs = bound * float(np.abs(proj.Q @ w).sum())
    return lhs - rhs * (1.0 + 1e-9) - 1e-14 * max(lhs, 1.0)


def solve(problem: DiscreteProblem, reg: Regularizer, opts: SolverOptions | None = None,
          warm_start: Solution | None = None) -> Solution:
    """Minimize ``reg`` over the discrete feasible set of ``problem``.

    Raises
    ------
    InfeasibleError
        When the box and the terminal constraint do not intersect.
    RankDeficientError
        When ``Phi`` is not of full row rank.
    """
    opts = opts or SolverOptions()
    Phi, b, bound = problem.Phi, problem.b, problem.U_max
    n, N = Phi.shape
    proj = AffineProjector(Phi, b)
    feas_tol = opts.eps_feas * (1.0 + np.linalg.norm(b))

    if not np.any(b):
        u = np.zeros(N)
        return Solution(u=u, objective=0.0, iterations=0, primal_residual=0.0,
                        dual_residual=0.0, terminal_residual=proj.residual(u),
                        converged=True)

    scale = reg.w1 if reg.w1 > 0 else 1.0
    rho_eff = opts.rho * scale
    t = 1.0 / rho_eff
    alpha = opts.over_relaxation
    tol = opts.eps_abs * np.sqrt(N)

    z = np.zeros((3, N))
    y = np.zeros((3, N))
    u = np.zeros(N)
    if warm_start is not None and warm_start.u.shape == (N,):
        u = warm_start.u.copy()
        if warm_start.duals is not None and warm_start.duals.shape == (3, N):
            y = warm_start.duals.copy()

    history = []
    y_aff_ref = y[2].copy()
    cert_every = 100 * opts.check_every
    r_norm = s_norm = np.inf
    status = "max_iter"
    polished = None
    it = 0
    for it in range(1, opts.max_iter + 1):
        z[0] = reg.prox(u - y[0], t)
        np.clip(u - y[1], -bound, bound, out=z[1])
        z[2] = proj(u - y[2])
        if alpha != 1.0:
            z *= alpha
            z += (1.0 - alpha) * u
        u_old = u
        u = (z.sum(axis=0) + y.sum(axis=0)) / 3.0
        y += z
        y -= u

        if it % opts.check_every:
            continue
        r_norm = float(np.sqrt(((z - u) ** 2).sum()))
        s_norm = float(opts.rho * np.sqrt(3.0) * np.linalg.norm(u - u_old))
        history.append((it, r_norm, s_norm))
        if r_norm <= tol and s_norm <= tol:
            cand = _restore_feasibility(z[1], proj, bound)
            if proj.residual(cand) <= feas_tol:
                status = "optimal"
                break
        if (reg.kind == "l1" and opts.polish_every
                and it % opts.polish_every == 0 and r_norm < 1e-2 * np.sqrt(N)):
            w_est = -rho_eff * (proj.Q.T @ y[2])
            gap_tol = opts.eps_gap * (1.0 + abs(reg.value(z[1])))
            polished = _polish_l1(z[1], w_est, proj, reg, bound, feas_tol, gap_tol)
            if polished is not None:
                status = "optimal"
                break
        if it % cert_every == 0:
            w = proj.Q.T @ (y[2] - y_aff_ref)
            y_aff_ref = y[2].copy()
            margin = _farkas_margin(w, proj, bound)
            if margin > 0:
                raise InfeasibleError(
                    f"no control with |u| <= {bound} reaches the origin "
                    f"(Farkas margin {margin:.3e} at iteration {it})",
                    history=history, certificate=margin,
                )

    gap = None
    if polished is not None:
        u_final, gap = polished
    else:
        u_final = _restore_feasibility(z[1], proj, bound)
        if reg.kind == "l1" or (reg.kind == "en" and reg.w2 > 0):
            w_est = -rho_eff * (proj.Q.T @ y[2])
            gap = reg.value(u_final) - _dual_value(w_est, proj, reg, bound)
    terminal = proj.residual(u_final)
    if status != "optimal":
        split = float(np.linalg.norm(z[1] - z[2]))
        logger.warning("ADMM stopped at max_iter=%d (primal %.3e, dual %.3e, box/affine gap %.3e)",
                       opts.max_iter, r_norm, s_norm, split)
        if split > 1e-6 * np.sqrt(N) and terminal > feas_tol:
            raise InfeasibleError(
                f"box and terminal constraint stay {split:.3e} apart after "
                f"{opts.max_iter} iterations",
                history=history,
            )
    return Solution(
        u=u_final,
        objective=reg.value(u_final),
        iterations=it,
        primal_residual=r_norm,
        dual_residual=s_norm,
        terminal_residual=terminal,
        converged=status == "optimal",
        status=status,
        duality_gap=gap,
        polished=polished is not None,
        history=history,
        duals=y.copy(),
    )
