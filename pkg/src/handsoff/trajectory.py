"""Step-by-step simulation of the sampled plant under a computed control."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from handsoff.discretize import DiscreteSystem, zoh_discretize
from handsoff.plant import StateSpace


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    control: np.ndarray
    terminal_residual: float

    @property
    def h(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0


def simulate(ds: DiscreteSystem, xi, u) -> Trajectory:
    """Run ``x[m+1] = A_d x[m] + B_d u[m]`` from ``x[0] = xi``."""
    xi = np.asarray(xi, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    if xi.shape[0] != ds.n:
        raise ValueError(f"xi has length {xi.shape[0]}, system order is {ds.n}")
    if ds.N is not None and u.shape[0] != ds.N:
        raise ValueError(f"control has {u.shape[0]} samples, expected N={ds.N}")
    N = u.shape[0]
    states = np.empty((N + 1, ds.n))
    states[0] = xi
    x = xi
    for m in range(N):
        x = ds.A_d @ x + ds.B_d * u[m]
        states[m + 1] = x
    times = np.arange(N + 1) * ds.h
    return Trajectory(times=times, states=states, control=u.copy(),
                      terminal_residual=float(np.linalg.norm(states[-1])))


def state_norms(traj: Trajectory) -> np.ndarray:
    """Euclidean norm of the state at each sample."""
    return np.linalg.norm(traj.states, axis=1)


def refined_terminal_state(ss: StateSpace, xi, u, h: float, substeps: int = 10) -> np.ndarray:
    """Terminal state with each hold interval split into ``substeps`` exact steps.

    Diagnostic only: for piecewise-constant input it must agree with the
    coarse recursion up to rounding.
    """
    fine = zoh_discretize(ss, h / substeps)
    x = np.asarray(xi, dtype=float).copy()
    for um in np.asarray(u, dtype=float):
        for _ in range(substeps):
            x = fine.A_d @ x + fine.B_d * um
    return x
