"""Dense small-matrix kernel: Kronecker algebra, matrix exponential,
eigendecomposition, linear solves, and an adaptive embedded Runge-Kutta
integrator.

Matrices are plain 2-D numpy arrays (real or complex); every operation
validates finiteness on entry so NaN/Inf never propagate silently.  All
functions are pure and all returned objects are safe to share across
threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    DimensionError,
    DomainError,
    EigenConvergenceError,
    IntegrationError,
    NumericError,
    SingularMatrixError,
)

# Default tolerances: two orders tighter than anything asserted downstream.
DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-9
EIG_RESIDUAL_CAP = 1e-8
PIVOT_RTOL = 1e-12
CLUSTER_RADIUS = 1e-6

# 1-norm bound under which a single degree-13 Pade evaluation of expm is
# accurate to machine precision.
_PADE13_THETA = 5.371920351148152

_PADE13_COEFFS = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
)


def _as_matrix(x, name="matrix") -> np.ndarray:
    a = np.asarray(x)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2 or a.size == 0:
        raise DimensionError(f"{name} must be a nonempty 2-D array, got shape {np.shape(x)}")
    if not np.issubdtype(a.dtype, np.number):
        raise DomainError(f"{name} must be numeric, got dtype {a.dtype}")
    a = a.astype(np.complex128 if np.iscomplexobj(a) else np.float64, copy=False)
    if not np.all(np.isfinite(a.view(np.float64) if a.dtype == np.complex128 else a)):
        raise NumericError(f"{name} contains non-finite entries")
    return a


def _require_square(a: np.ndarray, name="matrix") -> np.ndarray:
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")
    return a


def kron(x, y) -> np.ndarray:
    """Kronecker product: block (u, v) of the result is x[u, v] * y."""
    a = _as_matrix(x, "x")
    b = _as_matrix(y, "y")
    return np.kron(a, b)


def kron_sum(x, y) -> np.ndarray:
    """Kronecker sum of square x (n-by-n) and y (m-by-m):
    (I_m (x) x) + (y (x) I_n), an mn-by-mn matrix."""
    a = _require_square(_as_matrix(x, "x"), "x")
    b = _require_square(_as_matrix(y, "y"), "y")
    n, m = a.shape[0], b.shape[0]
    return np.kron(np.eye(m), a) + np.kron(b, np.eye(n))


def expm(x) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring with a degree-13 Pade
    kernel; the argument is scaled until its 1-norm is below 5.37."""
    a = _require_square(_as_matrix(x, "x"), "x")
    n = a.shape[0]
    norm1 = np.linalg.norm(a, 1)
    squarings = 0
    if norm1 > _PADE13_THETA:
        squarings = int(math.ceil(math.log2(norm1 / _PADE13_THETA)))
        a = a / (2.0 ** squarings)

    b = _PADE13_COEFFS
    ident = np.eye(n, dtype=a.dtype)
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a4 @ a2
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
             + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
    v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
         + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident)
    try:
        f = np.linalg.solve(v - u, u + v)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - requires exotic input
        raise NumericError(f"Pade denominator is singular: {exc}") from exc
    for _ in range(squarings):
        f = f @ f
    if not np.all(np.isfinite(f.view(np.float64) if f.dtype == np.complex128 else f)):
        raise NumericError("matrix exponential overflowed the representable range")
    return f


@dataclass(frozen=True)
class EigenDecomposition:
    """Full spectrum of a square matrix.

    values are sorted by real part descending, then imaginary part
    descending; right_vectors holds unit right eigenvectors as columns
    aligned with values; left_vectors (optional) holds rows w with
    w @ X = lam * w.  convergence_residual is the largest relative
    eigenpair residual ||X v - lam v|| / ||X||.
    """

    values: np.ndarray
    right_vectors: np.ndarray
    left_vectors: Optional[np.ndarray]
    convergence_residual: float


def eig(x, *, left: bool = False, residual_cap: float = EIG_RESIDUAL_CAP) -> EigenDecomposition:
    """Eigendecomposition via shifted QR iteration (LAPACK geev)."""
    a = _require_square(_as_matrix(x, "x"), "x")
    if a.shape[0] > 200:
        raise DimensionError(f"eig supports dimension <= 200, got {a.shape[0]}")
    try:
        if left:
            values, vl, vr = scipy.linalg.eig(a, left=True, right=True)
        else:
            values, vr = scipy.linalg.eig(a)
            vl = None
    except np.linalg.LinAlgError as exc:
        raise EigenConvergenceError(f"QR iteration failed to converge: {exc}") from exc

    order = np.lexsort((-values.imag, -values.real))
    values = values[order]
    vr = vr[:, order]
    rows = None
    if vl is not None:
        # LAPACK's left vectors satisfy v^H X = lam v^H.
        rows = vl[:, order].conj().T

    scale = max(np.linalg.norm(a), 1e-300)
    residual = float(max(
        np.linalg.norm(a @ vr[:, i] - values[i] * vr[:, i]) / scale
        for i in range(a.shape[0])
    ))
    if rows is not None:
        residual = max(residual, float(max(
            np.linalg.norm(rows[i] @ a - values[i] * rows[i]) / scale
            for i in range(a.shape[0])
        )))
    if residual > residual_cap:
        raise EigenConvergenceError(
            f"eigenpair residual {residual:.3e} exceeds cap {residual_cap:.3e}",
            residual=residual,
        )
    return EigenDecomposition(values=values, right_vectors=vr,
                              left_vectors=rows, convergence_residual=residual)


def solve(a, b) -> np.ndarray:
    """Solve a @ x = b for square nonsingular a (LU with partial pivoting).

    Raises SingularMatrixError, carrying a reciprocal condition estimate,
    when the smallest pivot falls below PIVOT_RTOL * ||a||_1.
    """
    am = _require_square(_as_matrix(a, "a"), "a")
    bm = np.asarray(b)
    b2 = _as_matrix(bm if bm.ndim == 2 else bm.reshape(-1, 1), "b")
    if b2.shape[0] != am.shape[0]:
        raise DimensionError(f"b has {b2.shape[0]} rows, expected {am.shape[0]}")
    lu, piv = scipy.linalg.lu_factor(am, check_finite=False)
    pivots = np.abs(np.diag(lu))
    norm_a = np.linalg.norm(am, 1)
    if pivots.min() <= PIVOT_RTOL * max(norm_a, 1e-300):
        rcond = float(pivots.min() / max(pivots.max(), 1e-300))
        raise SingularMatrixError(
            f"matrix is singular to working precision (rcond ~ {rcond:.3e})",
            rcond=rcond,
        )
    x = scipy.linalg.lu_solve((lu, piv), b2, check_finite=False)
    return x if bm.ndim == 2 else x.ravel()


def pinv(a) -> np.ndarray:
    """Moore-Penrose pseudoinverse via SVD; any shape accepted."""
    am = _as_matrix(a, "a")
    return np.linalg.pinv(am, rcond=PIVOT_RTOL)


def nullity(a, *, tol: Optional[float] = None) -> int:
    """Dimension of the null space, from the SVD rank."""
    am = _as_matrix(a, "a")
    return int(min(am.shape) - np.linalg.matrix_rank(am, tol=tol))


def match_multisets(found: Sequence[complex], expected: Sequence[complex],
                    radius: float = CLUSTER_RADIUS) -> bool:
    """True when two complex multisets agree pairwise within ``radius``.

    Uses optimal assignment so near-coincident clusters cannot be
    mismatched by greedy pairing.
    """
    fa = np.asarray(found, dtype=complex)
    ea = np.asarray(expected, dtype=complex)
    if fa.shape != ea.shape:
        return False
    from scipy.optimize import linear_sum_assignment

    cost = np.abs(fa[:, None] - ea[None, :])
    rows, cols = linear_sum_assignment(cost)
    return bool(np.all(cost[rows, cols] <= radius))


# ---------------------------------------------------------------------------
# Adaptive embedded Runge-Kutta 5(4), Dormand-Prince coefficients, with a
# quartic dense-output interpolant for sampling between accepted steps.
# ---------------------------------------------------------------------------

_RK_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_RK_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_RK_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# Difference between the 5th- and embedded 4th-order weights.
_RK_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920,
                  -17253 / 339200, 22 / 525, -1 / 40])
# Dense-output polynomial coefficients (theta, theta^2, theta^3, theta^4).
_RK_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])


@dataclass(frozen=True)
class OdeSolution:
    """Sampled solution of an initial value problem.

    times run monotonically from the requested span start to its end
    (decreasing for backward spans); states holds one flattened state per
    sample.  steps / rejected count accepted and rejected attempts.
    """

    times: np.ndarray
    states: np.ndarray
    steps: int
    rejected: int
    nfev: int


def _error_norm(err, y0, y1, atol, rtol):
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def _initial_step(f, t0, y0, f0, direction, atol, rtol):
    scale = atol + rtol * np.abs(y0)
    d0 = float(np.sqrt(np.mean((y0 / scale) ** 2)))
    d1 = float(np.sqrt(np.mean((f0 / scale) ** 2)))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + h0 * direction * f0
    f1 = f(t0 + h0 * direction, y1)
    d2 = float(np.sqrt(np.mean(((f1 - f0) / scale) ** 2))) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1)


def integrate(f: Callable[[float, np.ndarray], np.ndarray],
              x0,
              span,
              *,
              rtol: float = DEFAULT_RTOL,
              atol: float = DEFAULT_ATOL,
              t_eval=None,
              max_steps: int = 200_000,
              project: Optional[Callable[[np.ndarray], np.ndarray]] = None,
              ) -> OdeSolution:
    """Integrate dx/dt = f(t, x) over span = (t_a, t_b) with adaptive
    embedded RK5(4) stepping.

    Backward spans (t_b < t_a) are handled by stepping with negative h.
    t_eval, when given, must be monotone in the span direction and lie
    inside the span; samples are produced by the dense interpolant.
    project, when given, maps the flat state back onto an invariant
    manifold after every accepted step and at every emitted sample.
    """
    t0, t1 = float(span[0]), float(span[1])
    if t0 == t1:
        raise DomainError("integration span must have distinct endpoints")
    y = np.asarray(x0, dtype=float).ravel().copy()
    if y.size == 0 or not np.all(np.isfinite(y)):
        raise DomainError("initial state must be nonempty and finite")
    direction = 1.0 if t1 > t0 else -1.0

    if t_eval is None:
        eval_times = None
    else:
        eval_times = np.asarray(t_eval, dtype=float)
        if eval_times.ndim != 1 or eval_times.size == 0:
            raise DomainError("t_eval must be a nonempty 1-D sequence")
        if np.any(np.diff(eval_times) * direction < 0):
            raise DomainError("t_eval must be monotone in the span direction")
        lo, hi = min(t0, t1), max(t0, t1)
        eps = 1e-12 * max(1.0, abs(lo), abs(hi))
        if eval_times.min() < lo - eps or eval_times.max() > hi + eps:
            raise DomainError("t_eval must lie within the span")

    nfev = 0

    def rhs(t, state):
        nonlocal nfev
        nfev += 1
        dy = np.asarray(f(t, state), dtype=float).ravel()
        if dy.shape != state.shape:
            raise DimensionError("derivative shape does not match state shape")
        return dy

    if project is not None:
        y = np.asarray(project(y), dtype=float).ravel()

    t = t0
    k = np.empty((7, y.size))
    k[0] = rhs(t, y)
    h = min(_initial_step(rhs, t, y, k[0], direction, atol, rtol), abs(t1 - t0))
    nfev += 1  # extra evaluation inside the step-size heuristic

    out_t = [t0] if eval_times is None else []
    out_y = [y.copy()] if eval_times is None else []
    next_eval = 0
    if eval_times is not None:
        while next_eval < eval_times.size and abs(eval_times[next_eval] - t0) <= 1e-12 * max(1.0, abs(t0)):
            out_t.append(t0)
            out_y.append(y.copy())
            next_eval += 1

    steps = 0
    rejected = 0
    while (t - t1) * direction < 0:
        if steps + rejected >= max_steps:
            raise IntegrationError(
                f"step cap {max_steps} exhausted at t = {t:.6g}", last_time=t)
        h = min(h, abs(t1 - t))
        hmin = 16 * np.finfo(float).eps * max(abs(t), abs(t1), 1.0)
        if h < hmin:
            raise IntegrationError(
                f"step size underflow near t = {t:.6g} (stiffness suspected)",
                last_time=t)
        hs = h * direction

        for i in range(1, 7):
            yi = y + hs * sum(aij * k[j] for j, aij in enumerate(_RK_A[i]))
            k[i] = rhs(t + _RK_C[i] * hs, yi)
        y_new = y + hs * (_RK_B[:6] @ k[:6])
        # k[6] already holds f at (t + h, y_new): stage 7 coefficients
        # equal the propagating weights.
        err = _error_norm(hs * (_RK_E @ k), y, y_new, atol, rtol)

        if err > 1.0:
            rejected += 1
            h *= max(0.2, 0.9 * err ** -0.2)
            continue

        t_new = t + hs
        if abs(t_new - t1) < hmin:
            t_new = t1
        if eval_times is not None:
            q = k.T @ _RK_P  # dense-output coefficients for this step
            while next_eval < eval_times.size and (eval_times[next_eval] - t_new) * direction <= 1e-12 * max(1.0, abs(t_new)):
                theta = (eval_times[next_eval] - t) / hs
                p = np.array([theta, theta ** 2, theta ** 3, theta ** 4])
                y_s = y + hs * (q @ p)
                if project is not None:
                    y_s = np.asarray(project(y_s), dtype=float).ravel()
                out_t.append(eval_times[next_eval])
                out_y.append(y_s)
                next_eval += 1

        if project is not None:
            y_new = np.asarray(project(y_new), dtype=float).ravel()
            k_next = rhs(t_new, y_new)
        else:
            k_next = k[6].copy()  # FSAL
        if not np.all(np.isfinite(y_new)):
            raise IntegrationError(
                f"state became non-finite at t = {t_new:.6g}", last_time=t)
        t, y = t_new, y_new
        k[0] = k_next
        steps += 1
        if eval_times is None:
            out_t.append(t)
            out_y.append(y.copy())
        h *= min(10.0, max(0.2, 0.9 * err ** -0.2 if err > 1e-300 else 10.0))

    if eval_times is not None and next_eval < eval_times.size:
        # span endpoint reached within rounding; flush remaining samples at t1
        while next_eval < eval_times.size:
            out_t.append(eval_times[next_eval])
            out_y.append(y.copy())
            next_eval += 1

    return OdeSolution(times=np.asarray(out_t), states=np.asarray(out_y),
                       steps=steps, rejected=rejected, nfev=nfev)
