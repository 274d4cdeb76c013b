"""Relative-dynamics optimal control of the convoy.

The per-edge relative states x_k = q_i - q_j - d_ij turn the coupled
multi-vehicle game into n decoupled planar LQ problems sharing one state
space.  Everything here works on the reduced 2n-dimensional system (one
scalar per edge position / velocity); planar quantities are recovered by
Kronecker-lifting with I_2.

The module provides
  * problem construction from a convoy graph,
  * the closed-form eigenvalues of the state-costate flow generator and
    the verification of its spectrum / Jordan defectiveness,
  * the solvability matrix in closed form and via the matrix exponential,
  * its eigendecomposition-based closed-form inverse,
  * the backward Riccati solver and the open-loop optimal trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import numerics
from .convoy_graph import ConvoyGraph
from .errors import (
    DegenerateParameterError,
    DomainError,
    LemmaViolationError,
    SolvabilityError,
)

# Reciprocal-condition threshold below which a solvability matrix is
# declared singular; matches the linear-solve pivot policy.
SINGULAR_RCOND = 1e-10

_DEGENERATE_TOL = 1e-9


@dataclass(frozen=True)
class RelativeGameProblem:
    """Reduced relative-dynamics LQ data, edge-ordered.

    mu / omega are the running / terminal error weights, r the control
    weights, t_f the horizon.  The reduced drift is the n-fold double
    integrator; input column i selects edge i's velocity coordinate.
    """

    mu: np.ndarray
    omega: np.ndarray
    r: np.ndarray
    t_f: float

    def __post_init__(self):
        for name in ("mu", "omega", "r"):
            v = getattr(self, name)
            if v.ndim != 1 or v.size == 0:
                raise DomainError(f"{name} must be a nonempty vector (one entry per edge)")
            if not np.all(np.isfinite(v)) or np.any(v <= 0):
                raise DomainError(f"{name} entries must be strictly positive")
        if self.mu.shape != self.omega.shape or self.mu.shape != self.r.shape:
            raise DomainError("mu, omega and r must have one entry per edge")
        if not (np.isfinite(self.t_f) and self.t_f > 0):
            raise DomainError("horizon t_f must be strictly positive")

    @property
    def n(self) -> int:
        return int(self.mu.size)

    @property
    def drift(self) -> np.ndarray:
        """Reduced drift: upper-right identity block, zero elsewhere."""
        n = self.n
        a = np.zeros((2 * n, 2 * n))
        a[:n, n:] = np.eye(n)
        return a

    def input_column(self, i: int) -> np.ndarray:
        """Reduced input column for edge i (unit entry at its velocity)."""
        b = np.zeros((2 * self.n, 1))
        b[self.n + i, 0] = 1.0
        return b

    def control_quadratic(self, i: int) -> np.ndarray:
        """S_i = (1/r_i) B_i B_i^T."""
        b = self.input_column(i)
        return (b @ b.T) / self.r[i]

    def running_weight(self, i: int) -> np.ndarray:
        """Reduced running weight selecting mu_i on edge i's position and
        velocity coordinates."""
        w = np.zeros((self.n, self.n))
        w[i, i] = self.mu[i]
        return np.kron(np.eye(2), w)

    def terminal_weight(self, i: int) -> np.ndarray:
        w = np.zeros((self.n, self.n))
        w[i, i] = self.omega[i]
        return np.kron(np.eye(2), w)


def build_relative_problem(graph: ConvoyGraph, r, t_f: float) -> RelativeGameProblem:
    """Edge-ordered relative problem from the convoy graph; r may be a
    scalar applied to every edge or one weight per edge."""
    n = graph.n_edges
    if n == 0:
        raise DomainError("relative problem needs at least one edge")
    r_arr = np.asarray(r, dtype=float)
    if r_arr.ndim == 0:
        r_arr = np.full(n, float(r_arr))
    if r_arr.shape != (n,):
        raise DomainError(f"r must be scalar or length {n}, got shape {r_arr.shape}")
    return RelativeGameProblem(
        mu=np.asarray(graph.mu, dtype=float),
        omega=np.asarray(graph.omega, dtype=float),
        r=r_arr.copy(),
        t_f=float(t_f),
    )


# ---------------------------------------------------------------------------
# Eigenstructure of the state-costate flow generator
# ---------------------------------------------------------------------------

def eigenvalue_branches(problem: RelativeGameProblem) -> Tuple[np.ndarray, np.ndarray]:
    """Both principal square-root branches of the per-edge quartic
    lam^4 - (mu/r) lam^2 + mu/r = 0.

    The '+' branch is the closed-form eigenvalue; the '-' branch equals
    its conjugate when mu < 4r and is a second real root otherwise.
    """
    mu, r = problem.mu, problem.r
    disc = np.sqrt((mu * mu - 4 * mu * r).astype(complex))
    lam_plus = np.sqrt((mu + disc) / (2 * r))
    lam_minus = np.sqrt((mu - disc) / (2 * r))
    return lam_plus, lam_minus


def closed_form_eigenvalues(problem: RelativeGameProblem) -> np.ndarray:
    """Closed-form per-edge eigenvalue (principal branch)."""
    return eigenvalue_branches(problem)[0]


def hamiltonian_matrix(problem: RelativeGameProblem) -> np.ndarray:
    """Reduced state-costate flow generator, a 2n(n+1) square matrix:
    first block row [-A, S_1 ... S_n], then one costate row [W_i, A^T]
    per edge."""
    n = problem.n
    a = problem.drift
    dim = 2 * n * (n + 1)
    m = np.zeros((dim, dim))
    m[:2 * n, :2 * n] = -a
    for i in range(n):
        lo = 2 * n * (i + 1)
        hi = lo + 2 * n
        m[:2 * n, lo:hi] = problem.control_quadratic(i)
        m[lo:hi, :2 * n] = problem.running_weight(i)
        m[lo:hi, lo:hi] = a.T
    return m


def planar_hamiltonian(problem: RelativeGameProblem) -> np.ndarray:
    """Planar flow generator: the reduced one Kronecker-lifted by I_2."""
    return numerics.kron(hamiltonian_matrix(problem), np.eye(2))


def _varpi_squared(mu: float, r: float, lam: complex) -> complex:
    denom = mu / r - lam ** 4
    if abs(denom) < _DEGENERATE_TOL * max(1.0, mu / r):
        raise DegenerateParameterError(
            f"mu/r = {mu / r:.6g} makes lam^4 = mu/r (weights on the degenerate"
            " boundary mu = 4r)")
    return 0.5 * lam ** 3 / denom


def hamiltonian_eigenpair(problem: RelativeGameProblem, edge: int,
                          lam: complex) -> Tuple[np.ndarray, np.ndarray]:
    """Closed-form right and left eigenvectors of the flow generator for
    a nonzero eigenvalue of the given edge, normalized so w @ v = 1."""
    n = problem.n
    mu = float(problem.mu[edge])
    r = float(problem.r[edge])
    varpi = np.sqrt(_varpi_squared(mu, r, lam))
    sigma = np.zeros(n, dtype=complex)
    sigma[edge] = varpi

    dim = 2 * n * (n + 1)
    v = np.zeros(dim, dtype=complex)
    w = np.zeros(dim, dtype=complex)
    v[:n] = sigma
    v[n:2 * n] = -lam * sigma
    lo = 2 * n * (edge + 1)
    v[lo:lo + n] = (mu / lam) * sigma
    v[lo + n:lo + 2 * n] = (1.0 / lam ** 2 - 1.0) * mu * sigma

    w[:n] = (mu / (r * lam) - lam) * sigma
    w[n:2 * n] = sigma
    w[lo:lo + n] = sigma / (r * lam ** 2)
    w[lo + n:lo + 2 * n] = sigma / (r * lam)
    return v, w


@dataclass(frozen=True)
class SpectrumReport:
    """Numerical confirmation of the closed-form spectrum."""

    expected: np.ndarray
    computed: np.ndarray
    matched: bool
    nullity_expected: int
    nullity_computed: int
    eigenvector_residual: float


def expected_spectrum(problem: RelativeGameProblem) -> np.ndarray:
    """Eigenvalue multiset of the flow generator: 2n(n-1) zeros plus the
    four branch values of every edge."""
    n = problem.n
    lam_p, lam_m = eigenvalue_branches(problem)
    vals = [np.zeros(2 * n * (n - 1), dtype=complex)]
    vals.append(lam_p)
    vals.append(lam_m)
    vals.append(-lam_p)
    vals.append(-lam_m)
    return np.concatenate(vals)


def spectrum_check(problem: RelativeGameProblem) -> SpectrumReport:
    """Assemble the flow generator, compare its numerical spectrum and
    null-space dimension with the closed forms, and verify the
    closed-form eigenvectors.  Raises LemmaViolationError on mismatch
    (never expected; indicates a build bug)."""
    n = problem.n
    if n > 6:
        raise DomainError("spectrum check supports n <= 6 (desk scale)")
    m = hamiltonian_matrix(problem)
    computed = numerics.eig(m).values
    expected = expected_spectrum(problem)
    matched = numerics.match_multisets(computed, expected)

    nullity_computed = numerics.nullity(m)
    nullity_expected = n * (n - 1)

    lam_p, lam_m = eigenvalue_branches(problem)
    scale = np.linalg.norm(m)
    worst = 0.0
    for i in range(n):
        for lam in (lam_p[i], -lam_p[i], lam_m[i], -lam_m[i]):
            v, w = hamiltonian_eigenpair(problem, i, lam)
            worst = max(worst,
                        np.linalg.norm(m @ v - lam * v) / scale,
                        np.linalg.norm(w @ m - lam * w) / scale,
                        abs(w @ v - 1.0))
    report = SpectrumReport(expected=expected, computed=computed, matched=matched,
                            nullity_expected=nullity_expected,
                            nullity_computed=nullity_computed,
                            eigenvector_residual=float(worst))
    if not matched or nullity_computed != nullity_expected or worst > 1e-8:
        raise LemmaViolationError(
            f"flow-generator structure check failed: matched={matched}, "
            f"nullity {nullity_computed} vs {nullity_expected}, "
            f"eigenvector residual {worst:.3e}")
    return report


# ---------------------------------------------------------------------------
# Solvability matrix: closed form, exponential oracle, closed-form inverse
# ---------------------------------------------------------------------------

def _element_row(mu: float, om: float, r: float, t_f: float, lam: complex) -> np.ndarray:
    """One branch's contribution to the four diagonal elements of the
    solvability matrix (position/velocity in- and out-couplings)."""
    pre = 1.0 / (mu / r - lam ** 4)
    ep = np.exp(t_f * lam)
    em = np.exp(-t_f * lam)
    h_pp = pre * (ep * (om / r * lam + mu / r * lam ** 2 - lam ** 4)
                  - em * (om / r * lam - mu / r * lam ** 2 + lam ** 4))
    h_pv = pre * (ep * (lam ** 3 + om / r * lam ** 2)
                  - em * (lam ** 3 - om / r * lam ** 2))
    h_vp = pre * (ep * (-om / r * lam ** 2 - mu / r * lam ** 3 + lam ** 5)
                  - em * (om / r * lam ** 2 - mu / r * lam ** 3 + lam ** 5))
    h_vv = pre * (ep * (-om / r * lam ** 3 - lam ** 4)
                  - em * (-om / r * lam ** 3 + lam ** 4))
    return np.array([h_pp, h_pv, h_vp, h_vv])


def solvability_elements(problem: RelativeGameProblem) -> np.ndarray:
    """Closed-form diagonals (h_pp, h_pv, h_vp, h_vv) of the solvability
    matrix, shape (4, n).  Averaging the two quartic branches reproduces
    the conjugate-pair real-part form when the branches are conjugate and
    stays exact when both are real."""
    lam_p, lam_m = eigenvalue_branches(problem)
    out = np.empty((4, problem.n))
    for i in range(problem.n):
        mu, om, r = float(problem.mu[i]), float(problem.omega[i]), float(problem.r[i])
        denom = mu / r - lam_p[i] ** 4
        if abs(denom) < _DEGENERATE_TOL * max(1.0, mu / r):
            raise DegenerateParameterError(
                f"edge {i}: weights sit on the degenerate boundary mu = 4r",
                edge=i)
        row = 0.5 * (_element_row(mu, om, r, problem.t_f, lam_p[i])
                     + _element_row(mu, om, r, problem.t_f, lam_m[i]))
        if np.abs(row.imag).max() > 1e-10 * max(1.0, np.abs(row.real).max()):
            raise LemmaViolationError(
                f"edge {i}: closed-form solvability elements are not real "
                f"(imaginary residue {np.abs(row.imag).max():.3e})")
        out[:, i] = row.real
    return out


def solvability_matrix_closed_form(problem: RelativeGameProblem) -> np.ndarray:
    """Closed-form solvability matrix [[diag h_pp, diag h_pv],
    [diag h_vp, diag h_vv]], real, 2n square."""
    h_pp, h_pv, h_vp, h_vv = solvability_elements(problem)
    return np.block([[np.diag(h_pp), np.diag(h_pv)],
                     [np.diag(h_vp), np.diag(h_vv)]])


def solvability_matrix_expm(problem: RelativeGameProblem) -> np.ndarray:
    """Exponential-oracle solvability matrix: the top block row of
    e^{t_f M} applied to the stacked terminal weights."""
    n = problem.n
    m = hamiltonian_matrix(problem)
    e = numerics.expm(problem.t_f * m)
    right = [np.eye(2 * n)]
    for i in range(n):
        right.append(problem.terminal_weight(i))
    return e[:2 * n, :] @ np.vstack(right)


def planar_solvability_matrix(problem: RelativeGameProblem) -> np.ndarray:
    """Planar solvability matrix: the reduced one lifted by I_2."""
    return numerics.kron(solvability_matrix_closed_form(problem), np.eye(2))


def block_eigenvalues(elements: np.ndarray) -> np.ndarray:
    """Eigenvalues of the solvability matrix from its 2-by-2 edge blocks:
    '+' roots at indices 0..n-1, '-' roots at n..2n-1."""
    h_pp, h_pv, h_vp, h_vv = elements
    tr = h_pp + h_vv
    det = h_pp * h_vv - h_pv * h_vp
    disc = np.sqrt((tr * tr - 4 * det).astype(complex))
    return np.concatenate([(tr + disc) / 2, (tr - disc) / 2])


def _block_eigenvectors(h_pp, h_pv, h_vp, h_vv, delta, plus_branch, tol):
    """Right/left eigenvector 2-vectors of one edge block for one root.

    The '+' branch prefers the first-row/first-column parametrization
    (1, -(h_pp-d)/h_pv), the '-' branch the second one
    (1, -h_vp/(h_vv-d)); whenever the preferred denominator vanishes the
    alternate form of the same eigenline is used instead.
    """
    if abs(h_pv) <= tol and abs(h_vp) <= tol:
        # decoupled block: plain basis vectors
        if abs(h_pp - delta) <= abs(h_vv - delta):
            u = np.array([1.0 + 0j, 0.0 + 0j])
        else:
            u = np.array([0.0 + 0j, 1.0 + 0j])
        return u, u.copy()

    def right_first():
        return np.array([1.0 + 0j, -(h_pp - delta) / h_pv])

    def right_second():
        return np.array([1.0 + 0j, -h_vp / (h_vv - delta)])

    def left_first():
        return np.array([1.0 + 0j, -(h_pp - delta) / h_vp])

    def left_second():
        return np.array([1.0 + 0j, -h_pv / (h_vv - delta)])

    first_ok = abs(h_pv) > tol and abs(h_vp) > tol
    second_ok = abs(h_vv - delta) > tol
    if not first_ok and not second_ok:
        raise DegenerateParameterError(
            "edge block eigenvector is degenerate (both parametrizations fail)")
    use_first = (first_ok if plus_branch else not second_ok)
    if use_first:
        return right_first(), left_first()
    return right_second(), left_second()


@dataclass(frozen=True)
class SolvabilityReport:
    """Everything the solvability verdict rests on: closed-form
    eigenvalues, the closed-form and exponential solvability matrices,
    the block eigenstructure and the closed-form inverse."""

    lambdas: np.ndarray
    lambdas_minus: np.ndarray
    varpi: np.ndarray
    elements: np.ndarray
    H_closed: np.ndarray
    H_oracle: np.ndarray
    discrepancy: float
    deltas: np.ndarray
    right_vectors: np.ndarray
    left_vectors: np.ndarray
    H_inverse: Optional[np.ndarray]
    nonsingular: bool
    rcond: float


def invert_solvability_matrix(elements: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Closed-form inverse via the sparse two-entry eigenvectors of the
    edge blocks: returns (H_inverse, deltas, right_vectors, left_vectors)
    with left/right normalized to a unit mutual product.

    Raises SolvabilityError when some block eigenvalue vanishes and
    DegenerateParameterError when an edge block is defective.
    """
    h_pp, h_pv, h_vp, h_vv = elements
    n = h_pp.size
    deltas = block_eigenvalues(elements)
    scale = max(float(np.abs(elements).max()), 1e-300)
    if np.min(np.abs(deltas)) <= SINGULAR_RCOND * scale:
        raise SolvabilityError(
            "solvability matrix has a (numerically) zero eigenvalue; "
            "parameters are degenerate")
    tol = 1e-12 * scale
    phi = np.zeros((2 * n, 2 * n), dtype=complex)
    psi = np.zeros((2 * n, 2 * n), dtype=complex)
    for i in range(n):
        for branch, idx in ((True, i), (False, n + i)):
            delta = deltas[idx]
            u, w = _block_eigenvectors(h_pp[i], h_pv[i], h_vp[i], h_vv[i],
                                       delta, branch, tol)
            s = u @ w
            if abs(s) < 1e-12 * max(1.0, abs(u @ u), abs(w @ w)):
                raise DegenerateParameterError(
                    f"edge {i}: solvability block is defective "
                    "(left/right eigenvectors are orthogonal)", edge=i)
            y = np.sqrt(1.0 / s)
            phi[i, idx] = y * u[0]
            phi[n + i, idx] = y * u[1]
            psi[idx, i] = y * w[0]
            psi[idx, n + i] = y * w[1]
    h_inv = (phi / deltas) @ psi
    residue = float(np.abs(h_inv.imag).max())
    if residue > 1e-8 * max(1.0, np.abs(h_inv.real).max()):
        raise LemmaViolationError(
            f"closed-form inverse has imaginary residue {residue:.3e}")
    return h_inv.real, deltas, phi, psi


def solvability_report(problem: RelativeGameProblem) -> SolvabilityReport:
    """Full solvability analysis of the relative problem."""
    lam_p, lam_m = eigenvalue_branches(problem)
    varpi = np.array([
        np.sqrt(_varpi_squared(float(problem.mu[i]), float(problem.r[i]), lam_p[i]))
        for i in range(problem.n)
    ])
    elements = solvability_elements(problem)
    h_closed = solvability_matrix_closed_form(problem)
    h_oracle = solvability_matrix_expm(problem)
    discrepancy = float(np.abs(h_closed - h_oracle).max())

    deltas = block_eigenvalues(elements)
    scale = max(float(np.abs(deltas).max()), 1e-300)
    rcond = float(np.abs(deltas).min() / scale)
    nonsingular = rcond > SINGULAR_RCOND

    h_inverse = None
    right = np.zeros((2 * problem.n, 2 * problem.n), dtype=complex)
    left = np.zeros_like(right)
    if nonsingular:
        h_inverse, deltas, right, left = invert_solvability_matrix(elements)
        check = float(np.abs(h_closed @ h_inverse - np.eye(2 * problem.n)).max())
        if check > 1e-8:
            raise LemmaViolationError(
                f"closed-form inverse check failed: ||H H^-1 - I|| = {check:.3e}")
    return SolvabilityReport(
        lambdas=lam_p, lambdas_minus=lam_m, varpi=varpi, elements=elements,
        H_closed=h_closed, H_oracle=h_oracle, discrepancy=discrepancy,
        deltas=deltas, right_vectors=right, left_vectors=left,
        H_inverse=h_inverse, nonsingular=nonsingular, rcond=rcond,
    )


# ---------------------------------------------------------------------------
# Riccati solutions and the open-loop optimal trajectory
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RiccatiSolution:
    """Backward Riccati solution for one edge on the reduced state.

    times increase from 0 to t_f; values[k] is the symmetric reduced
    solution at times[k].  The planar solution is values (x) I_2.
    """

    edge: int
    times: np.ndarray
    values: np.ndarray
    steps: int
    rejected: int

    @property
    def initial(self) -> np.ndarray:
        """Solution at t = 0, the receding-horizon gain source."""
        return self.values[0]

    @property
    def terminal(self) -> np.ndarray:
        return self.values[-1]

    def at(self, t: float) -> np.ndarray:
        """Linear interpolation between stored samples."""
        ts = self.times
        if t <= ts[0]:
            return self.values[0]
        if t >= ts[-1]:
            return self.values[-1]
        k = int(np.searchsorted(ts, t) - 1)
        w = (t - ts[k]) / (ts[k + 1] - ts[k])
        return (1 - w) * self.values[k] + w * self.values[k + 1]

    def planar(self, k: int) -> np.ndarray:
        """Planar (I_2-lifted) solution at sample index k."""
        return np.kron(self.values[k], np.eye(2))


def riccati_rhs(problem: RelativeGameProblem, edge: int, p: np.ndarray) -> np.ndarray:
    """Time derivative of the reduced Riccati solution for one edge."""
    a = problem.drift
    s = problem.control_quadratic(edge)
    w = problem.running_weight(edge)
    return -(p @ a + a.T @ p - p @ s @ p + w)


def solve_relative_riccati(problem: RelativeGameProblem, *,
                           rtol: float = 1e-11, atol: float = 1e-11,
                           num_samples: int = 2001) -> List[RiccatiSolution]:
    """Backward adaptive integration of every edge's Riccati equation
    from the terminal weight, with symmetry enforced by projection after
    every accepted step.  Requires a nonsingular solvability verdict."""
    report = solvability_report(problem)
    if not report.nonsingular:
        raise SolvabilityError(
            f"solvability matrix is singular (rcond ~ {report.rcond:.3e}); "
            "the Riccati terminal-value problem has no unique solution")
    n = problem.n
    dim = 2 * n
    grid = np.linspace(0.0, problem.t_f, num_samples)
    solutions = []
    for i in range(n):
        def rhs(t, y, i=i):
            p = y.reshape(dim, dim)
            return riccati_rhs(problem, i, p).ravel()

        def symmetrize(y):
            p = y.reshape(dim, dim)
            return (0.5 * (p + p.T)).ravel()

        sol = numerics.integrate(rhs, problem.terminal_weight(i).ravel(),
                                 (problem.t_f, 0.0), rtol=rtol, atol=atol,
                                 t_eval=grid[::-1], project=symmetrize)
        values = sol.states.reshape(-1, dim, dim)[::-1].copy()
        solutions.append(RiccatiSolution(edge=i, times=grid, values=values,
                                         steps=sol.steps, rejected=sol.rejected))
    return solutions


def closed_form_riccati(problem: RelativeGameProblem, edge: int, t: float) -> np.ndarray:
    """Exponential-flow reference for one edge's Riccati solution at time
    t; independent of the adaptive integration path."""
    n = problem.n
    a = problem.drift
    flow = np.zeros((4 * n, 4 * n))
    flow[:2 * n, :2 * n] = -a
    flow[:2 * n, 2 * n:] = problem.control_quadratic(edge)
    flow[2 * n:, :2 * n] = problem.running_weight(edge)
    flow[2 * n:, 2 * n:] = a.T
    e = numerics.expm((problem.t_f - t) * flow)
    wf = problem.terminal_weight(edge)
    top = e[:2 * n, :2 * n] + e[:2 * n, 2 * n:] @ wf
    bottom = e[2 * n:, :2 * n] + e[2 * n:, 2 * n:] @ wf
    return numerics.solve(top.T, bottom.T).T


@dataclass(frozen=True)
class RelativeTrajectory:
    """Forward trajectory of the planar relative system under a control
    law: states are the stacked planar relative coordinates, controls the
    per-edge planar accelerations."""

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray


def open_loop_gain(problem: RelativeGameProblem, solutions: Sequence[RiccatiSolution],
                   t: float) -> np.ndarray:
    """Reduced gain rows at time t: row i maps the reduced state to edge
    i's control through -(1/r_i) B_i^T P_i(t)."""
    rows = [sol.at(t)[problem.n + sol.edge, :] / problem.r[sol.edge]
            for sol in solutions]
    return np.vstack(rows)


def open_loop_control(problem: RelativeGameProblem,
                      solutions: Sequence[RiccatiSolution],
                      x0, *, num_samples: int = 201) -> RelativeTrajectory:
    """Integrate the planar relative dynamics under the optimal law
    e_i = -(1/r_i)(B_i^T P_i(t) (x) I_2) x over [0, t_f]."""
    n = problem.n
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size != 4 * n:
        raise DomainError(f"x0 must have length {4 * n}")
    a_planar = np.kron(problem.drift, np.eye(2))

    def controls_at(t, x):
        gain = open_loop_gain(problem, solutions, t)  # (n, 2n)
        return -np.kron(gain, np.eye(2)) @ x          # (2n,) per-edge planar

    def rhs(t, x):
        e = controls_at(t, x)
        dx = a_planar @ x
        dx[2 * n:] += e
        return dx

    grid = np.linspace(0.0, problem.t_f, num_samples)
    sol = numerics.integrate(rhs, x0, (0.0, problem.t_f), t_eval=grid)
    controls = np.array([controls_at(t, x) for t, x in zip(sol.times, sol.states)])
    return RelativeTrajectory(times=sol.times, states=sol.states,
                              controls=controls.reshape(-1, n, 2))


def trajectory_cost(problem: RelativeGameProblem, edge: int,
                    trajectory: RelativeTrajectory) -> float:
    """Finite-horizon cost of one edge along a trajectory (terminal plus
    running error and own-control effort, trapezoid quadrature)."""
    n = problem.n
    w_run = np.kron(problem.running_weight(edge), np.eye(2))
    w_term = np.kron(problem.terminal_weight(edge), np.eye(2))
    states = trajectory.states
    controls = trajectory.controls[:, edge, :]
    running = np.einsum("ti,ij,tj->t", states, w_run, states)
    running += problem.r[edge] * np.einsum("tk,tk->t", controls, controls)
    cost = float(np.trapz(running, trajectory.times))
    xf = states[-1]
    return cost + float(xf @ w_term @ xf)
