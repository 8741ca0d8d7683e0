"""Dense linear-algebra and integration primitives used by every other module.

Conventions
-----------
* Rank decisions everywhere use one global relative singular-value cutoff
  ``SV_CUTOFF`` (1e-10), overridable per call.
* ODE integration is fixed-step classical RK4 on a uniform ``TimeGrid``;
  the accumulated error is estimated by step halving and reported on the
  returned trajectory.
* No complex arithmetic here; frequency-domain code builds complex values
  from real solves in the kyp module.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .validation import as_square, as_symmetric, require_finite, symmetrize

__all__ = [
    "SV_CUTOFF",
    "TimeGrid",
    "TrajectoryGrid",
    "sym_eig",
    "sqrtm_psd",
    "pinv",
    "matrix_rank",
    "expm",
    "ode_solve",
    "trapz",
    "cumtrapz",
    "central_diff4",
]

# Singular values below SV_CUTOFF * sigma_max count as zero, package-wide.
SV_CUTOFF = 1e-10


@dataclass(frozen=True)
class TimeGrid:
    """Uniform sampling of [t0, t1] with samples at t0 + k*(t1-t0)/steps."""

    t0: float
    t1: float
    steps: int

    def __post_init__(self):
        if not (np.isfinite(self.t0) and np.isfinite(self.t1)):
            raise ValueError("grid endpoints must be finite")
        if not self.t1 > self.t0:
            raise ValueError("grid requires t1 > t0")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError("steps must be a positive integer")
        object.__setattr__(self, "steps", int(self.steps))

    @property
    def h(self) -> float:
        return (self.t1 - self.t0) / self.steps

    def times(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(self.steps + 1)


@dataclass
class TrajectoryGrid:
    """Samples of a time-dependent quantity on a TimeGrid.

    ``values`` has shape (steps+1, ...): one leading entry per grid sample.
    ``local_error`` is the step-halving estimate from ode_solve, when known.
    """

    grid: TimeGrid
    values: np.ndarray
    local_error: float | None = field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[0] != self.grid.steps + 1:
            raise ValueError(
                f"values must have {self.grid.steps + 1} samples, "
                f"got {self.values.shape[0]}"
            )
        require_finite("trajectory values", self.values)


def sym_eig(S):
    """Eigendecomposition of a symmetric matrix.

    Returns (eigenvalues ascending, eigenvectors as columns); the input is
    symmetrized exactly before factorization so S = V diag(w) V^T within
    roundoff.
    """
    S = as_symmetric("S", S)
    w, V = np.linalg.eigh(S)
    return w, V


def sqrtm_psd(S, tol=None):
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues in [-tol, 0) are clamped to zero; anything below -tol is an
    error.  Default tol = 1e-8 * (1 + ||S||_F).
    """
    S = as_symmetric("S", S)
    if tol is None:
        tol = 1e-8 * (1.0 + np.linalg.norm(S))
    w, V = np.linalg.eigh(S)
    if w.size and w[0] < -tol:
        raise ValueError(f"matrix is not PSD: min eigenvalue {w[0]:.3e} < -{tol:.3e}")
    w = np.clip(w, 0.0, None)
    return symmetrize((V * np.sqrt(w)) @ V.T)


def pinv(M, cutoff=None):
    """Moore-Penrose pseudoinverse; singular values < cutoff*sigma_max are zero."""
    M = np.asarray(M, dtype=float)
    require_finite("M", M)
    if cutoff is None:
        cutoff = SV_CUTOFF
    return np.linalg.pinv(M, rcond=cutoff)


def matrix_rank(M, cutoff=None, abs_cutoff=None):
    """Numerical rank: count of singular values above the threshold.

    The threshold is max(cutoff * sigma_max(M), abs_cutoff); ``abs_cutoff``
    lets callers judge rank against an external scale (e.g. the largest
    singular value along a whole trajectory) instead of each matrix's own.
    """
    M = np.asarray(M, dtype=float)
    require_finite("M", M)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if cutoff is None:
        cutoff = SV_CUTOFF
    thresh = cutoff * s[0]
    if abs_cutoff is not None:
        thresh = max(thresh, abs_cutoff)
    return int(np.count_nonzero(s > thresh))


def expm(M):
    """Matrix exponential (scaling and squaring)."""
    M = as_square("M", M)
    return scipy.linalg.expm(M)


def _rk4_path(f, x0, t0, h, steps):
    x = np.asarray(x0, dtype=float)
    out = np.empty((steps + 1,) + x.shape)
    out[0] = x
    t = t0
    for k in range(steps):
        k1 = f(t, x)
        k2 = f(t + 0.5 * h, x + (0.5 * h) * k1)
        k3 = f(t + 0.5 * h, x + (0.5 * h) * k2)
        k4 = f(t + h, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise ValueError(f"non-finite state encountered at t = {t + h:.6g}")
        t = t0 + (k + 1) * h
        out[k + 1] = x
    return out


def ode_solve(f, x0, grid: TimeGrid, error_estimate=True) -> TrajectoryGrid:
    """Integrate x' = f(t, x) with classical fixed-step RK4 on the grid.

    f may return any fixed array shape (vector or matrix states).  When
    ``error_estimate`` is set, the integration is repeated at half the step
    and the max-norm deviation at shared samples is reported as
    ``local_error``.
    """
    x0 = np.asarray(x0, dtype=float)
    require_finite("x0", x0)
    path = _rk4_path(f, x0, grid.t0, grid.h, grid.steps)
    err = None
    if error_estimate:
        fine = _rk4_path(f, x0, grid.t0, 0.5 * grid.h, 2 * grid.steps)
        err = float(np.max(np.abs(path - fine[::2])))
    return TrajectoryGrid(grid, path, local_error=err)


def trapz(samples: TrajectoryGrid) -> float:
    """Composite trapezoid integral of a sampled scalar trajectory."""
    v = np.asarray(samples.values, dtype=float)
    if v.ndim != 1:
        raise ValueError("trapz expects scalar samples")
    if v.shape[0] < 2:
        raise ValueError("trapz needs at least 2 samples")
    return float(np.trapezoid(v, dx=samples.grid.h))


def cumtrapz(values, h):
    """Running trapezoid integral; entry k is the integral up to sample k."""
    v = np.asarray(values, dtype=float)
    out = np.zeros_like(v)
    np.cumsum(0.5 * h * (v[1:] + v[:-1]), out=out[1:])
    return out


def sample_interpolator(grid: TimeGrid, values):
    """Linear interpolant through samples on a TimeGrid.

    values has shape (steps+1, ...); the returned callable evaluates at any
    t in [t0, t1] (clamped at the ends) and returns an array of the
    trailing shape.
    """
    v = np.asarray(values, dtype=float)
    if v.shape[0] != grid.steps + 1:
        raise ValueError("values do not match the grid")
    h = grid.h

    def u(t):
        s = (t - grid.t0) / h
        k = int(np.floor(s))
        if k < 0:
            return v[0].copy()
        if k >= grid.steps:
            return v[-1].copy()
        frac = s - k
        return (1.0 - frac) * v[k] + frac * v[k + 1]

    return u


def central_diff4(values, h):
    """Fourth-order central differences of a sampled path.

    values has shape (N+1, ...); returns derivatives at the interior samples
    2..N-2 (shape (N-3, ...)).  Needs N >= 4.
    """
    v = np.asarray(values, dtype=float)
    if v.shape[0] < 5:
        raise ValueError("need at least 5 samples for the 5-point stencil")
    return (v[:-4] - 8.0 * v[1:-3] + 8.0 * v[3:-1] - v[4:]) / (12.0 * h)
