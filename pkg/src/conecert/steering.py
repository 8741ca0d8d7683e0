"""Controllability and minimum-energy steering on the PSD cone.

Steering between PSD matrices works component-wise: spectral factors of the
endpoints are paired off and each pair is driven by the classical Gramian
steering input, then the component trajectories are stacked back into a
matrix trajectory with rank-one structure.
"""

import dataclasses

import numpy as np

from .numerics import SV_CUTOFF, TimeGrid, TrajectoryGrid, expm, matrix_rank, ode_solve
from .rankone import MatrixTrajectory, synthesize_Q
from .validation import as_matrix, as_square, as_symmetric, as_vector, symmetrize

GRAMIAN_COND_LIMIT = 1e12


def controllability_matrix(A, B):
    """Kalman block matrix [B, AB, ..., A^(n-1)B]."""
    A = as_square("A", A)
    n = A.shape[0]
    B = as_matrix("B", B, rows=n)
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def controllability_rank(A, B):
    """Rank of the Kalman matrix; controllable iff the rank is full."""
    C = controllability_matrix(A, B)
    rank = matrix_rank(C)
    return rank == C.shape[0], rank


def _expm_table(A, step, count):
    """exp(A * j * step) for j = 0..count via one expm and a product recurrence."""
    n = A.shape[0]
    out = np.empty((count + 1, n, n))
    out[0] = np.eye(n)
    E = expm(A * step)
    for j in range(count):
        out[j + 1] = E @ out[j]
    return out


@dataclasses.dataclass(frozen=True)
class Gramian:
    """Finite-horizon controllability Gramian W(t1) with its quadrature samples."""

    W: np.ndarray
    t1: float
    samples: TrajectoryGrid
    cond: float


def _gramian_from_table(table, B, t1, steps):
    # per-cell Simpson on the half grid: table[2k], table[2k+1], table[2k+2]
    G = table @ B
    F = G @ G.transpose(0, 2, 1)
    h = t1 / steps
    cells = (h / 6.0) * (F[0:-2:2] + 4.0 * F[1:-1:2] + F[2::2])
    n = B.shape[0]
    samples = np.zeros((steps + 1, n, n))
    np.cumsum(cells, axis=0, out=samples[1:])
    W = symmetrize(samples[-1])
    cond = float(np.linalg.cond(W)) if np.any(W) else np.inf
    return Gramian(
        W=W,
        t1=float(t1),
        samples=TrajectoryGrid(TimeGrid(0.0, float(t1), steps), samples),
        cond=cond,
    )


def gramian(A, B, t1=1.0, steps=512):
    """W(t1) = integral of exp(At)BB'exp(A't) over [0, t1], per-cell Simpson."""
    A = as_square("A", A)
    B = as_matrix("B", B, rows=A.shape[0])
    if not t1 > 0:
        raise ValueError(f"horizon t1 must be positive, got {t1}")
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    table = _expm_table(A, 0.5 * t1 / steps, 2 * steps)
    return _gramian_from_table(table, B, t1, steps)


@dataclasses.dataclass
class SteeringInput:
    """Minimum-energy input u(t) = B' exp(A'(t1 - t)) eta, callable on [0, t1].

    Values at the integration half-grid are precomputed; off-grid times fall
    back to an exact matrix exponential.
    """

    grid: TimeGrid
    values: np.ndarray
    eta: np.ndarray
    endpoint_error: float
    gramian: Gramian
    _A: np.ndarray
    _B: np.ndarray

    def __call__(self, t):
        half = 0.5 * self.grid.h
        j = (float(t) - self.grid.t0) / half
        k = int(round(j))
        if 0 <= k < self.values.shape[0] and abs(j - k) <= 1e-9 * (1.0 + abs(j)):
            return self.values[k]
        Phi = expm(self._A.T * (self.grid.t1 - float(t)))
        return self._B.T @ (Phi @ self.eta)


def _steering_input(A, B, x0, x1, t1, steps, table, gram):
    W = gram.W
    rhs = x1 - table[-1] @ x0
    eta = np.linalg.solve(W, rhs)
    # u on the half grid: exp(A(t1 - tau_j)) = table[2*steps - j]
    vs = np.einsum("tij,i->tj", table[::-1], eta)
    u_vals = vs @ B
    grid = TimeGrid(0.0, float(t1), steps)
    u = SteeringInput(
        grid=grid,
        values=u_vals,
        eta=eta,
        endpoint_error=np.nan,
        gramian=gram,
        _A=A,
        _B=B,
    )
    path = ode_solve(lambda t, x: A @ x + B @ u(t), x0, grid, error_estimate=False)
    u.endpoint_error = float(np.linalg.norm(path.values[-1] - x1))
    return u


def min_energy_input(A, B, x0, x1, t1=1.0, steps=512):
    """Gramian steering input driving x0 to x1 over [0, t1].

    Raises when the Gramian condition number exceeds 1e12 (uncontrollable
    pair or horizon too short).
    """
    A = as_square("A", A)
    n = A.shape[0]
    B = as_matrix("B", B, rows=n)
    x0 = as_vector("x0", x0, length=n)
    x1 = as_vector("x1", x1, length=n)
    if not t1 > 0:
        raise ValueError(f"horizon t1 must be positive, got {t1}")
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    table = _expm_table(A, 0.5 * t1 / steps, 2 * steps)
    gram = _gramian_from_table(table, B, t1, steps)
    if not np.isfinite(gram.cond) or gram.cond > GRAMIAN_COND_LIMIT:
        raise ValueError(
            f"Gramian condition number {gram.cond:.3e} exceeds {GRAMIAN_COND_LIMIT:.0e}; "
            "the pair may be uncontrollable or the horizon too short"
        )
    return _steering_input(A, B, x0, x1, t1, steps, table, gram)


def _psd_factors(name, X, n):
    """Spectral factors sqrt(lam_i) v_i in descending eigenvalue order."""
    X = as_symmetric(name, X, dim=n)
    lam, vec = np.linalg.eigh(X)
    scale = max(float(lam[-1]), 0.0)
    if float(lam[0]) < -1e-8 * (1.0 + scale):
        raise ValueError(f"{name} is not positive semidefinite: min eigenvalue {lam[0]:.3e}")
    keep = lam > SV_CUTOFF * scale
    lam = np.clip(lam[keep], 0.0, None)
    vec = vec[:, keep]
    order = np.argsort(lam)[::-1]
    return (vec[:, order] * np.sqrt(lam[order])).T  # (k, n) rows


@dataclasses.dataclass
class SteeringPlan:
    """Per-component steering inputs whose stacked trajectory joins X0 to X1."""

    trajectory: MatrixTrajectory
    inputs: np.ndarray
    X0: np.ndarray
    X1: np.ndarray
    endpoint_errors: tuple
    component_endpoint_errors: list
    gramian: Gramian


def psd_steer(A, B, X0, X1, t1=1.0, steps=512) -> SteeringPlan:
    """Steer the PSD matrix X0 to X1 along a rank-one structured trajectory.

    Spectral factors of the endpoints are paired in descending eigenvalue
    order (the shorter list padded with zero vectors), each pair is steered
    by the minimum-energy input, and the components are stacked into a
    matrix trajectory whose upper-left block runs from X0 to X1.
    """
    A = as_square("A", A)
    n = A.shape[0]
    B = as_matrix("B", B, rows=n)
    m = B.shape[1]
    X0 = as_symmetric("X0", X0, dim=n)
    X1 = as_symmetric("X1", X1, dim=n)
    if not t1 > 0:
        raise ValueError(f"horizon t1 must be positive, got {t1}")
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")

    f0 = _psd_factors("X0", X0, n)
    f1 = _psd_factors("X1", X1, n)
    k = max(f0.shape[0], f1.shape[0])
    grid = TimeGrid(0.0, float(t1), steps)

    if k == 0:
        values = np.zeros((steps + 1, n + m, n + m))
        traj = MatrixTrajectory(grid, values, n, m, dynamics_residual=0.0)
        gram = gramian(A, B, t1, steps)
        return SteeringPlan(
            trajectory=traj,
            inputs=np.zeros((0, steps + 1, m)),
            X0=X0,
            X1=X1,
            endpoint_errors=(0.0, 0.0),
            component_endpoint_errors=[],
            gramian=gram,
        )

    starts = np.zeros((k, n))
    targets = np.zeros((k, n))
    starts[: f0.shape[0]] = f0
    targets[: f1.shape[0]] = f1

    table = _expm_table(A, 0.5 * t1 / steps, 2 * steps)
    gram = _gramian_from_table(table, B, t1, steps)
    if not np.isfinite(gram.cond) or gram.cond > GRAMIAN_COND_LIMIT:
        raise ValueError(
            f"Gramian condition number {gram.cond:.3e} exceeds {GRAMIAN_COND_LIMIT:.0e}; "
            "the pair may be uncontrollable or the horizon too short"
        )
    signals = [
        _steering_input(A, B, starts[i], targets[i], t1, steps, table, gram)
        for i in range(k)
    ]

    traj = synthesize_Q(A, B, list(starts), signals, grid)
    tol = 1e-5 * (1.0 + float(np.linalg.norm(X1)))
    e0 = float(np.linalg.norm(traj.q_nn[0] - X0))
    e1 = float(np.linalg.norm(traj.q_nn[-1] - X1))
    if e0 > tol or e1 > tol:
        raise ValueError(
            f"steering endpoint errors ({e0:.3e}, {e1:.3e}) exceed tolerance {tol:.3e}; "
            "try a longer horizon or finer grid"
        )
    inputs = np.stack([sig.values[::2] for sig in signals])
    return SteeringPlan(
        trajectory=traj,
        inputs=inputs,
        X0=X0,
        X1=X1,
        endpoint_errors=(e0, e1),
        component_endpoint_errors=[sig.endpoint_error for sig in signals],
        gramian=gram,
    )


@dataclasses.dataclass
class KControllabilityReport:
    """Outcome of random PSD steering trials, or the obstruction preventing them."""

    controllable: bool
    rank: int
    obstruction: np.ndarray | None
    endpoint_errors: list
    tolerance: float
    passed: bool


def verify_k_controllability(A, B, trials=10, seed=0, t1=1.0, steps=512):
    """Steer random PSD pairs when (A, B) is controllable; else exhibit a witness.

    The witness is a unit left null vector w of the Kalman matrix: w'x(t) is
    input-independent, so no steering between matrices differing along ww'
    can succeed.
    """
    A = as_square("A", A)
    n = A.shape[0]
    B = as_matrix("B", B, rows=n)
    C = controllability_matrix(A, B)
    rank = matrix_rank(C)
    if rank < n:
        U, _, _ = np.linalg.svd(C)
        return KControllabilityReport(
            controllable=False,
            rank=rank,
            obstruction=U[:, -1],
            endpoint_errors=[],
            tolerance=1e-5,
            passed=False,
        )
    rng = np.random.default_rng(seed)
    errors = []
    for _ in range(trials):
        G0 = rng.normal(size=(n, n))
        G1 = rng.normal(size=(n, n))
        X1 = G1 @ G1.T
        plan = psd_steer(A, B, G0 @ G0.T, X1, t1=t1, steps=steps)
        scale = 1.0 + float(np.linalg.norm(X1))
        errors.append(max(plan.endpoint_errors) / scale)
    return KControllabilityReport(
        controllable=True,
        rank=rank,
        obstruction=None,
        endpoint_errors=errors,
        tolerance=1e-5,
        passed=all(e <= 1e-5 for e in errors),
    )
