"""Small dense complex linear algebra and quantum-state primitives.

Everything here works on plain numpy arrays (2x2 or 4x4 complex). All
functions are pure: inputs are never mutated and results are freshly
allocated, so values can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SIGMA",
    "PSD_EIG_TOL",
    "CHOLESKY_PIVOT_TOL",
    "DensityMatrix",
    "Trajectory",
    "StateReport",
    "IntegrationResult",
    "dag",
    "tensor",
    "partial_trace",
    "validate_state",
    "cholesky_psd",
    "trace_power",
    "spectrum",
    "finite_diff",
    "diff_series",
    "hermiticity_defect",
    "rk4_integrate",
]

# Pauli matrices sigma_0..sigma_3 (sigma_0 = identity).
SIGMA = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

# An eigenvalue >= -PSD_EIG_TOL counts as non-negative; double-precision
# noise floor for 4x4 problems.
PSD_EIG_TOL = 1e-10
CHOLESKY_PIVOT_TOL = 1e-12


def dag(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return a.conj().T


def _as_square(a, name="matrix") -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def hermiticity_defect(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - dag(a))))


@dataclass(frozen=True)
class StateReport:
    """Validation report for a candidate density matrix."""

    hermiticity_defect: float
    trace_defect: float
    min_eigenvalue: float
    tol: float

    @property
    def ok(self) -> bool:
        return (
            self.hermiticity_defect <= self.tol
            and self.trace_defect <= self.tol
            and self.min_eigenvalue >= -self.tol
        )


@dataclass(frozen=True)
class DensityMatrix:
    """A validated state: Hermitian, unit trace, PSD within ``tol``."""

    mat: np.ndarray
    tol: float = 1e-9

    def __post_init__(self):
        m = _as_square(self.mat, "density matrix")
        object.__setattr__(self, "mat", m)
        report = validate_state(m, self.tol)
        if not report.ok:
            raise ValueError(f"not a valid density matrix: {report}")

    @property
    def dim(self) -> int:
        return self.mat.shape[0]


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled matrix-valued time series.

    ``samples`` has shape (n, d, d); sample ``i`` is the matrix at time
    ``t0 + i * dt``. At least 3 samples are required so that the
    second-order difference stencils have interior points.
    """

    t0: float
    dt: float
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.ndim != 3 or s.shape[1] != s.shape[2]:
            raise ValueError(f"samples must have shape (n, d, d), got {s.shape}")
        if s.shape[0] < 3:
            raise ValueError("need at least 3 samples")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "samples", s)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n)


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two 2x2 matrices (first factor varies slowest)."""
    a = _as_square(a, "a")
    b = _as_square(b, "b")
    if a.shape != (2, 2) or b.shape != (2, 2):
        raise ValueError("tensor expects two 2x2 matrices")
    return np.kron(a, b)


def partial_trace(rho: np.ndarray, subsystem: str) -> np.ndarray:
    """Trace a 4x4 operator over one factor.

    ``subsystem`` names the factor that is traced OUT: ``"B"`` (second
    factor) leaves the first qubit's reduced matrix, ``"A"`` the second's.
    """
    rho = _as_square(rho, "rho")
    if rho.shape != (4, 4):
        raise ValueError("partial_trace expects a 4x4 matrix")
    r = rho.reshape(2, 2, 2, 2)
    if subsystem == "B":
        return np.einsum("ikjk->ij", r)
    if subsystem == "A":
        return np.einsum("kikj->ij", r)
    raise ValueError(f"subsystem must be 'A' or 'B', got {subsystem!r}")


def validate_state(rho: np.ndarray, tol: float = 1e-9) -> StateReport:
    """Report how far ``rho`` is from being a density matrix."""
    rho = _as_square(rho, "rho")
    herm = hermiticity_defect(rho)
    trace = float(abs(np.trace(rho) - 1.0))
    w = np.linalg.eigvalsh(0.5 * (rho + dag(rho)))
    return StateReport(herm, trace, float(w[0]), tol)


def cholesky_psd(rho: np.ndarray, pivot_tol: float = CHOLESKY_PIVOT_TOL):
    """Cholesky factor of a Hermitian PSD matrix, or None if not PSD.

    Returns a lower-triangular L with rho = L L^dag and non-negative real
    diagonal. A pivot below -pivot_tol, or a non-trivial column under a
    vanishing pivot, certifies a negative direction and yields None.
    """
    rho = _as_square(rho, "rho")
    if hermiticity_defect(rho) > 1e-8 * max(1.0, float(np.abs(rho).max())):
        raise ValueError("cholesky_psd expects a Hermitian matrix")
    n = rho.shape[0]
    scale = max(1.0, float(np.abs(rho).max()))
    L = np.zeros((n, n), dtype=complex)
    for j in range(n):
        d = float((rho[j, j] - np.vdot(L[j, :j], L[j, :j])).real)
        if d < -pivot_tol * scale:
            return None
        if d <= pivot_tol * scale:
            # Zero pivot: the rest of the column must vanish too.
            col = rho[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j].conj()
            if col.size and np.max(np.abs(col)) > 1e-5 * scale:
                return None
            continue
        L[j, j] = np.sqrt(d)
        L[j + 1 :, j] = (rho[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j].conj()) / L[j, j]
    return L


def trace_power(rho: np.ndarray, k: int) -> float:
    """Tr(rho^k) for k in 1..4 (real part; Hermitian input assumed)."""
    rho = _as_square(rho, "rho")
    if k not in (1, 2, 3, 4):
        raise ValueError(f"k must be in 1..4, got {k}")
    acc = rho
    for _ in range(k - 1):
        acc = acc @ rho
    t = complex(np.trace(acc))
    if abs(t.imag) > 1e-9 * max(1.0, abs(t.real)):
        raise ValueError(f"trace power has large imaginary part {t.imag:g}")
    return t.real


def spectrum(h: np.ndarray, vectors: bool = False):
    """Eigenvalues of a Hermitian matrix, ascending.

    With ``vectors=True`` also returns the orthonormal eigenvectors as
    matrix columns, in a deterministic gauge: the first component of each
    vector with magnitude above 1e-8 is made real and positive.
    """
    h = _as_square(h, "h")
    if hermiticity_defect(h) > 1e-8 * max(1.0, float(np.abs(h).max())):
        raise ValueError("spectrum expects a Hermitian matrix")
    if not vectors:
        return np.linalg.eigvalsh(h)
    w, v = np.linalg.eigh(h)
    v = v.copy()
    for j in range(v.shape[1]):
        col = v[:, j]
        idx = np.argmax(np.abs(col) > 1e-8)
        ph = col[idx]
        if abs(ph) > 0:
            v[:, j] = col * (ph.conj() / abs(ph))
    return w, v


def finite_diff(traj: Trajectory) -> Trajectory:
    """Second-order time derivative of a trajectory.

    Central differences at interior points, one-sided second-order
    stencils at both ends; error O(dt^2) throughout.
    """
    s = traj.samples
    d = np.empty_like(s)
    d[1:-1] = (s[2:] - s[:-2]) / (2.0 * traj.dt)
    d[0] = (-3.0 * s[0] + 4.0 * s[1] - s[2]) / (2.0 * traj.dt)
    d[-1] = (3.0 * s[-1] - 4.0 * s[-2] + s[-3]) / (2.0 * traj.dt)
    return Trajectory(traj.t0, traj.dt, d)


def diff_series(values: np.ndarray, dt: float) -> np.ndarray:
    """Same stencils as finite_diff for an (n, ...) array of samples."""
    values = np.asarray(values)
    if values.shape[0] < 3:
        raise ValueError("need at least 3 samples")
    d = np.empty_like(values, dtype=float if values.dtype.kind == "f" else values.dtype)
    d[1:-1] = (values[2:] - values[:-2]) / (2.0 * dt)
    d[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dt)
    d[-1] = (3.0 * values[-1] - 4.0 * values[-2] + values[-3]) / (2.0 * dt)
    return d


@dataclass(frozen=True)
class IntegrationResult:
    trajectory: Trajectory
    trace_drift: np.ndarray = field(repr=False)
    hermiticity_drift: np.ndarray = field(repr=False)

    @property
    def max_trace_drift(self) -> float:
        return float(np.max(self.trace_drift))

    @property
    def max_hermiticity_drift(self) -> float:
        return float(np.max(self.hermiticity_drift))


def rk4_integrate(generator, rho0, t0: float, dt: float, n_steps: int) -> IntegrationResult:
    """Classic fixed-step RK4 for d(rho)/dt = generator(t, rho).

    ``rho0`` may be a DensityMatrix or a plain matrix. Returns the
    trajectory (n_steps + 1 samples) along with per-sample trace and
    Hermiticity drift relative to the initial state.
    """
    if isinstance(rho0, DensityMatrix):
        rho0 = rho0.mat
    rho = _as_square(rho0, "rho0")
    if n_steps < 2:
        raise ValueError("need at least 2 steps")
    n = rho.shape[0]
    out = np.empty((n_steps + 1, n, n), dtype=complex)
    out[0] = rho
    tr0 = complex(np.trace(rho))
    trace_drift = np.zeros(n_steps + 1)
    herm_drift = np.zeros(n_steps + 1)
    half = 0.5 * dt
    for i in range(n_steps):
        t = t0 + i * dt
        k1 = generator(t, rho)
        k2 = generator(t + half, rho + half * k1)
        k3 = generator(t + half, rho + half * k2)
        k4 = generator(t + dt, rho + dt * k3)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        if not np.all(np.isfinite(rho)):
            raise RuntimeError(f"integration produced non-finite values at t={t + dt:g}")
        out[i + 1] = rho
        trace_drift[i + 1] = abs(complex(np.trace(rho)) - tr0)
        herm_drift[i + 1] = hermiticity_defect(rho)
    return IntegrationResult(Trajectory(t0, dt, out), trace_drift, herm_drift)
