"""Individual-dynamics LQ differential game over the stacked convoy
state z = [positions (2m), 1, velocities (2m)].

Each vehicle penalizes its own formation error and control effort, which
couples the players through m interdependent (asymmetric) Riccati
differential equations.  Unique open-loop equilibrium controls exist iff
the game-level solvability matrix is invertible; this module builds that
matrix, integrates the coupled equations backward, and rolls out the
equilibrium trajectory.  It is the cross-check oracle for the relative
formulation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from . import numerics
from .convoy_graph import ConvoyGraph, CostMatrices, build_cost_matrices
from .errors import DomainError, SolvabilityError

SINGULAR_RCOND = 1e-10


@dataclass(frozen=True)
class StackedSystem:
    """Stacked double-integrator convoy dynamics with one homogeneous
    coordinate: A is nilpotent of index 2 and each input matrix places an
    identity block at its vehicle's acceleration slot."""

    m: int
    A: np.ndarray
    B: Tuple[np.ndarray, ...]
    R: Tuple[np.ndarray, ...]
    S: Tuple[np.ndarray, ...]

    @property
    def dim(self) -> int:
        return 4 * self.m + 1


@dataclass(frozen=True)
class CoupledGame:
    """Assembled game: stacked system plus per-vehicle cost matrices."""

    graph: ConvoyGraph
    system: StackedSystem
    costs: Tuple[CostMatrices, ...]
    t_f: float


def assemble_game(graph: ConvoyGraph, r, t_f: float) -> CoupledGame:
    """Build the stacked system and every vehicle's cost matrices.

    r may be a positive scalar (R_ii = r I_2 for every vehicle), one
    scalar per vehicle, or a sequence of 2-by-2 positive definite
    matrices.
    """
    if not (np.isfinite(t_f) and t_f > 0):
        raise DomainError("horizon t_f must be strictly positive")
    m = graph.m
    r_mats = _control_weights(r, m)
    dim = 4 * m + 1
    a = np.zeros((dim, dim))
    a[:2 * m, 2 * m + 1:] = np.eye(2 * m)
    bs = []
    ss = []
    for i in range(m):
        b = np.zeros((dim, 2))
        b[2 * m + 1 + 2 * i: 2 * m + 3 + 2 * i, :] = np.eye(2)
        bs.append(b)
        ss.append(b @ numerics.solve(r_mats[i], b.T))
    system = StackedSystem(m=m, A=a, B=tuple(bs), R=tuple(r_mats), S=tuple(ss))
    costs = tuple(build_cost_matrices(graph, vid) for vid in graph.vehicles)
    return CoupledGame(graph=graph, system=system, costs=costs, t_f=float(t_f))


def _control_weights(r, m: int) -> List[np.ndarray]:
    arr = np.asarray(r, dtype=float)
    if arr.ndim == 0:
        mats = [float(arr) * np.eye(2) for _ in range(m)]
    elif arr.ndim == 1 and arr.shape == (m,):
        mats = [float(v) * np.eye(2) for v in arr]
    elif arr.shape == (m, 2, 2):
        mats = [arr[i].copy() for i in range(m)]
    else:
        raise DomainError(f"r must be scalar, length {m}, or {m} 2x2 matrices")
    for i, mat in enumerate(mats):
        if np.abs(mat - mat.T).max() > 1e-12 or np.any(np.linalg.eigvalsh(mat) <= 0):
            raise DomainError(f"control weight of vehicle {i} must be symmetric positive definite")
    return mats


def stacked_state(graph: ConvoyGraph, positions, velocities) -> np.ndarray:
    """Stack per-vehicle positions and velocities with the constant
    coordinate into the game state vector."""
    q = np.asarray(positions, dtype=float).reshape(graph.m, 2)
    v = np.asarray(velocities, dtype=float).reshape(graph.m, 2)
    return np.concatenate([q.ravel(), [1.0], v.ravel()])


def game_hamiltonian(game: CoupledGame) -> np.ndarray:
    """Game-level state-costate flow generator: first block row
    [-A, S_1 ... S_m], then per-vehicle costate rows [Q_i, A^T]."""
    dim = game.system.dim
    m = game.system.m
    big = np.zeros(((m + 1) * dim, (m + 1) * dim))
    big[:dim, :dim] = -game.system.A
    for i in range(m):
        lo = (i + 1) * dim
        hi = lo + dim
        big[:dim, lo:hi] = game.system.S[i]
        big[lo:hi, :dim] = game.costs[i].Q
        big[lo:hi, lo:hi] = game.system.A.T
    return big


@dataclass(frozen=True)
class GameSolvability:
    """Game-level solvability matrix with its invertibility verdict."""

    H: np.ndarray
    rcond: float
    nonsingular: bool


def game_solvability(game: CoupledGame, *, t: float = None) -> GameSolvability:
    """Solvability matrix at horizon t (default t_f): the top block row
    of the exponential flow applied to the stacked terminal weights."""
    s = game.t_f if t is None else float(t)
    dim = game.system.dim
    big = game_hamiltonian(game)
    e = numerics.expm(s * big)
    h = e[:dim, :dim].copy()
    for i in range(game.system.m):
        lo = (i + 1) * dim
        h += e[:dim, lo:lo + dim] @ game.costs[i].Qf
    svals = np.linalg.svd(h, compute_uv=False)
    rcond = float(svals[-1] / max(svals[0], 1e-300))
    return GameSolvability(H=h, rcond=rcond, nonsingular=rcond > SINGULAR_RCOND)


@dataclass(frozen=True)
class CoupledRiccatiSolution:
    """Backward solution of the m coupled Riccati equations, sampled on
    an increasing grid over [0, t_f]; values[k][i] is vehicle i's
    (generally asymmetric) solution at times[k]."""

    times: np.ndarray
    values: np.ndarray
    steps: int
    rejected: int

    @property
    def initial(self) -> np.ndarray:
        return self.values[0]

    def at(self, t: float) -> np.ndarray:
        ts = self.times
        if t <= ts[0]:
            return self.values[0]
        if t >= ts[-1]:
            return self.values[-1]
        k = int(np.searchsorted(ts, t) - 1)
        w = (t - ts[k]) / (ts[k + 1] - ts[k])
        return (1 - w) * self.values[k] + w * self.values[k + 1]


def coupled_riccati_rhs(game: CoupledGame, ps: np.ndarray) -> np.ndarray:
    """Stacked time derivative of the coupled Riccati family."""
    a = game.system.A
    s_total = np.zeros_like(a)
    for j in range(game.system.m):
        s_total += game.system.S[j] @ ps[j]
    out = np.empty_like(ps)
    for i in range(game.system.m):
        out[i] = -(ps[i] @ a + a.T @ ps[i] - ps[i] @ s_total + game.costs[i].Q)
    return out


def solve_coupled_riccati(game: CoupledGame, *, rtol: float = 1e-10,
                          atol: float = 1e-10,
                          num_samples: int = 601) -> CoupledRiccatiSolution:
    """Backward adaptive integration of the m coupled equations as one
    stacked system from the terminal weights.  Requires a nonsingular
    game-level solvability verdict."""
    verdict = game_solvability(game)
    if not verdict.nonsingular:
        raise SolvabilityError(
            f"game-level solvability matrix is singular (rcond ~ {verdict.rcond:.3e}); "
            "the coupled Riccati equations have no unique solution")
    m = game.system.m
    dim = game.system.dim
    terminal = np.stack([c.Qf for c in game.costs])

    def rhs(t, y):
        return coupled_riccati_rhs(game, y.reshape(m, dim, dim)).ravel()

    grid = np.linspace(0.0, game.t_f, num_samples)
    sol = numerics.integrate(rhs, terminal.ravel(), (game.t_f, 0.0),
                             rtol=rtol, atol=atol, t_eval=grid[::-1])
    values = sol.states.reshape(-1, m, dim, dim)[::-1].copy()
    return CoupledRiccatiSolution(times=grid, values=values,
                                  steps=sol.steps, rejected=sol.rejected)


def closed_form_coupled_riccati(game: CoupledGame, t: float) -> np.ndarray:
    """Exponential-flow reference for the coupled family at time t:
    P_i(t) = G_i(s) H(s)^{-1} with s = t_f - t; independent of the
    adaptive integration path."""
    s = game.t_f - t
    dim = game.system.dim
    m = game.system.m
    e = numerics.expm(s * game_hamiltonian(game))
    stack = np.vstack([np.eye(dim)] + [c.Qf for c in game.costs])
    h = e[:dim, :] @ stack
    out = np.empty((m, dim, dim))
    for i in range(m):
        gi = e[(i + 1) * dim:(i + 2) * dim, :] @ stack
        out[i] = numerics.solve(h.T, gi.T).T
    return out


@dataclass(frozen=True)
class GameTrajectory:
    """Equilibrium rollout: stacked states and per-vehicle controls."""

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray


def nash_open_loop(game: CoupledGame, riccati: CoupledRiccatiSolution,
                   z0, *, num_samples: int = 201) -> GameTrajectory:
    """Integrate the closed-loop stacked dynamics
    z' = (A - sum_j S_j P_j(t)) z and recover each vehicle's equilibrium
    control u_i = -R_ii^{-1} B_i^T P_i(t) z."""
    z0 = np.asarray(z0, dtype=float).ravel()
    dim = game.system.dim
    if z0.size != dim:
        raise DomainError(f"z0 must have length {dim}")
    m = game.system.m

    def rhs(t, z):
        ps = riccati.at(t)
        dz = game.system.A @ z
        for j in range(m):
            dz -= game.system.S[j] @ (ps[j] @ z)
        return dz

    grid = np.linspace(0.0, game.t_f, num_samples)
    sol = numerics.integrate(rhs, z0, (0.0, game.t_f), t_eval=grid)
    controls = np.empty((grid.size, m, 2))
    for k, (t, z) in enumerate(zip(sol.times, sol.states)):
        ps = riccati.at(t)
        for i in range(m):
            controls[k, i] = -numerics.solve(
                game.system.R[i], game.system.B[i].T @ (ps[i] @ z))
    return GameTrajectory(times=sol.times, states=sol.states, controls=controls)


def formation_error_along(game: CoupledGame, trajectory: GameTrajectory,
                          vehicle: int) -> np.ndarray:
    """Running formation error z^T Q_i z of one vehicle along a rollout."""
    q = game.costs[vehicle].Q
    return np.einsum("ti,ij,tj->t", trajectory.states, q, trajectory.states)
