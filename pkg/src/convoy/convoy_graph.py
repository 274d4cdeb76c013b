"""Communication graph of the convoy and the quadratic cost matrices of
the individual-dynamics game.

Vehicles are vertices identified by integer ids; edges are ordered pairs
(i, j) carrying a running weight mu, a terminal weight omega, and a
desired planar displacement d between the two vehicles.  The incidence
matrix is signed so that -D^T maps stacked positions to the per-edge
differences q_i - q_j.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np

from .errors import DimensionError, DomainError
from . import numerics


@dataclass(frozen=True)
class ConvoyGraph:
    """Directed, weighted convoy communication graph.

    vehicles: vertex ids in fixed order (defines row order of matrices).
    edges: ordered (i, j) id pairs, i != j, unique and not mutually
    reversed; the edge order defines the column order of matrices and the
    index of every per-edge quantity.
    mu / omega: positive running / terminal weights per edge.
    offsets: desired displacement d_ij per edge, in meters.
    """

    vehicles: Tuple[int, ...]
    edges: Tuple[Tuple[int, int], ...]
    mu: Tuple[float, ...]
    omega: Tuple[float, ...]
    offsets: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        if len(self.vehicles) == 0:
            raise DomainError("graph needs at least one vehicle")
        if len(set(self.vehicles)) != len(self.vehicles):
            raise DomainError("vehicle ids must be unique")
        n = len(self.edges)
        if not (len(self.mu) == len(self.omega) == len(self.offsets) == n):
            raise DimensionError("edges, mu, omega and offsets must have equal length")
        ids = set(self.vehicles)
        seen = set()
        for i, j in self.edges:
            if i == j:
                raise DomainError(f"self-loop on vehicle {i}")
            if i not in ids or j not in ids:
                raise DomainError(f"edge ({i}, {j}) references an unknown vehicle")
            if (i, j) in seen or (j, i) in seen:
                raise DomainError(f"duplicate or reversed edge ({i}, {j})")
            seen.add((i, j))
        for k, (m, w) in enumerate(zip(self.mu, self.omega)):
            if not (m > 0 and np.isfinite(m)):
                raise DomainError(f"edge {k}: mu must be strictly positive")
            if not (w > 0 and np.isfinite(w)):
                raise DomainError(f"edge {k}: omega must be strictly positive")
        for k, d in enumerate(self.offsets):
            if len(d) != 2 or not np.all(np.isfinite(d)):
                raise DomainError(f"edge {k}: offset must be a finite 2-vector")
        if not self._connected_ignoring_directions():
            raise DomainError("graph must be connected when edge directions are ignored")

    def _connected_ignoring_directions(self) -> bool:
        if len(self.vehicles) == 1:
            return True
        adjacency = {v: set() for v in self.vehicles}
        for i, j in self.edges:
            adjacency[i].add(j)
            adjacency[j].add(i)
        seen = {self.vehicles[0]}
        stack = [self.vehicles[0]]
        while stack:
            for nb in adjacency[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return len(seen) == len(self.vehicles)

    @property
    def m(self) -> int:
        return len(self.vehicles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def index(self, vehicle_id: int) -> int:
        try:
            return self.vehicles.index(vehicle_id)
        except ValueError:
            raise DomainError(f"unknown vehicle id {vehicle_id}") from None

    def out_edges(self, vehicle_id: int) -> Tuple[int, ...]:
        """Edge indices whose first endpoint is the given vehicle (the
        vehicle's neighbor set in its own cost)."""
        self.index(vehicle_id)
        return tuple(k for k, (i, _) in enumerate(self.edges) if i == vehicle_id)

    def stacked_offsets(self) -> np.ndarray:
        """All d_ij stacked edge-ordered into a 2n vector."""
        return np.asarray(self.offsets, dtype=float).ravel()


def incidence(graph: ConvoyGraph) -> np.ndarray:
    """Signed incidence matrix D (m-by-n): edge k = (i, j) puts -1 at row
    of i and +1 at row of j, so -D^T maps stacked positions to q_i - q_j."""
    d = np.zeros((graph.m, graph.n_edges))
    for k, (i, j) in enumerate(graph.edges):
        d[graph.index(i), k] = -1.0
        d[graph.index(j), k] = 1.0
    return d


def laplacian(d: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Weighted graph Laplacian L = D W D^T for a diagonal nonnegative W."""
    d = np.asarray(d, dtype=float)
    w = np.asarray(w, dtype=float)
    if w.ndim == 1:
        w = np.diag(w)
    if w.shape[0] != w.shape[1] or w.shape[0] != d.shape[1]:
        raise DimensionError("weight matrix must be square with one row per edge")
    off = w - np.diag(np.diag(w))
    if np.any(np.abs(off) > 0):
        raise DomainError("weight matrix must be diagonal")
    if np.any(np.diag(w) < 0):
        raise DomainError("edge weights must be nonnegative")
    return d @ w @ d.T


def is_connected(graph: ConvoyGraph) -> bool:
    """Connectivity check via the incidence rank: rank(D) == m - 1."""
    if graph.m == 1:
        return True
    return int(np.linalg.matrix_rank(incidence(graph))) == graph.m - 1


@dataclass(frozen=True)
class CostMatrices:
    """Per-vehicle quadratic cost data for the stacked state
    z = [positions (2m), constant 1, velocities (2m)].

    Q penalizes the running formation error of the vehicle's outgoing
    edges; Qf the terminal error.  W / Wf are the diagonal edge-weight
    selections, D the incidence matrix and d the stacked offsets.
    """

    Q: np.ndarray
    Qf: np.ndarray
    D: np.ndarray
    W: np.ndarray
    Wf: np.ndarray
    d: np.ndarray


def _assemble_q(d_mat: np.ndarray, w_sel: np.ndarray, d_vec: np.ndarray) -> np.ndarray:
    """Quadratic form on z reproducing
    sum_k mu_k (||q_i - q_j - d_k||^2 + ||v_i - v_j||^2) over selected edges."""
    m = d_mat.shape[0]
    lap = laplacian(d_mat, w_sel)
    lap2 = np.kron(lap, np.eye(2))
    dw2 = np.kron(d_mat @ w_sel, np.eye(2))
    dim = 4 * m + 1
    q = np.zeros((dim, dim))
    q[:2 * m, :2 * m] = lap2
    # Cross term between positions and the constant coordinate.  The sign
    # follows from expanding ||q_i - q_j - d||^2 with the incidence
    # convention -D^T q = stacked (q_i - q_j).
    q[:2 * m, 2 * m] = dw2 @ d_vec
    q[2 * m, :2 * m] = (dw2 @ d_vec).T
    q[2 * m, 2 * m] = d_vec @ np.kron(w_sel, np.eye(2)) @ d_vec
    q[2 * m + 1:, 2 * m + 1:] = lap2
    return q


def build_cost_matrices(graph: ConvoyGraph, vehicle_id: int) -> CostMatrices:
    """Running and terminal cost matrices of one vehicle; edge (i, j)
    contributes to vehicle i only."""
    graph.index(vehicle_id)
    n = graph.n_edges
    sel = graph.out_edges(vehicle_id)
    w = np.zeros((n, n))
    wf = np.zeros((n, n))
    for k in sel:
        w[k, k] = graph.mu[k]
        wf[k, k] = graph.omega[k]
    d_mat = incidence(graph)
    d_vec = graph.stacked_offsets()
    return CostMatrices(
        Q=_assemble_q(d_mat, w, d_vec),
        Qf=_assemble_q(d_mat, wf, d_vec),
        D=d_mat,
        W=w,
        Wf=wf,
        d=d_vec,
    )


def formation_error(graph: ConvoyGraph, vehicle_id: int,
                    positions: np.ndarray, velocities: np.ndarray) -> float:
    """Direct summation of the vehicle's weighted formation error; the
    independent reference for the quadratic-form construction."""
    total = 0.0
    pos = np.asarray(positions, dtype=float).reshape(graph.m, 2)
    vel = np.asarray(velocities, dtype=float).reshape(graph.m, 2)
    for k in graph.out_edges(vehicle_id):
        i, j = graph.edges[k]
        dq = pos[graph.index(i)] - pos[graph.index(j)] - np.asarray(graph.offsets[k])
        dv = vel[graph.index(i)] - vel[graph.index(j)]
        total += graph.mu[k] * (dq @ dq + dv @ dv)
    return total
