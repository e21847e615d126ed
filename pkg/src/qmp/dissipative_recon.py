"""Master-equation reconstruction for non-unitary two-qubit trajectories.

The dissipative part of a generator is handled in two equivalent
pictures: as an affine action r_dot = D r + l on the 15-component
coherence vector, and as a Kossakowski matrix K in the traceless
Pauli-product basis lambda_k = G_k,

    Diss[rho] = sum_ij K_ij (G_i rho G_j - 1/2 {G_j G_i, rho}).

For diagonal K the two pictures are linked by the anticommutation
pattern of the basis: D_kk = -2 * sum over i with {G_i, G_k} = 0 of
K_ii, and that linear map is invertible, so every diagonal affine
ansatz determines a unique diagonal K whose positivity decides
GKSL validity.

Array convention: 15-vectors and 15x15 matrices are indexed 0..14 and
refer to the generators G_1..G_15 (array position = generator index - 1;
sigma^1 (x) I sits at generator index 4, array position 3).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import nnls

from .bloch import coherence_series, traceless_basis
from .qcore import (
    PSD_EIG_TOL,
    Trajectory,
    dag,
    diff_series,
    finite_diff,
    hermiticity_defect,
    rk4_integrate,
    spectrum,
)
from .unitary_recon import EvolutionSequence

__all__ = [
    "AffineGenerator",
    "KossakowskiMatrix",
    "DiagonalFit",
    "CpReport",
    "IntegratedCpReport",
    "RoundtripReport",
    "hamiltonian_action",
    "generator_residual",
    "anticommutation_table",
    "fit_diagonal_unital",
    "diagonal_fit_residual",
    "candidate_diagonals",
    "k_from_d",
    "d_from_k",
    "cp_check",
    "integrated_cp_check",
    "dissipator_apply",
    "gksl_apply",
    "rotate_dissipator",
    "constant_generator",
    "roundtrip_verify",
]


@dataclass(frozen=True)
class AffineGenerator:
    """Coherence-vector generator r_dot = d r + l."""

    d: np.ndarray
    l: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "d", np.asarray(self.d, dtype=float).reshape(15, 15))
        object.__setattr__(self, "l", np.asarray(self.l, dtype=float).reshape(15))
        if not (np.all(np.isfinite(self.d)) and np.all(np.isfinite(self.l))):
            raise ValueError("generator entries must be finite")

    @property
    def unital(self) -> bool:
        return bool(np.max(np.abs(self.l)) < 1e-12)


@dataclass(frozen=True)
class KossakowskiMatrix:
    """Hermitian coefficient matrix of the dissipator in the G_k basis."""

    k: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.k, dtype=complex).reshape(15, 15)
        if hermiticity_defect(k) > 1e-12 * max(1.0, float(np.abs(k).max())):
            raise ValueError("Kossakowski matrix must be Hermitian")
        object.__setattr__(self, "k", k)

    def spectrum(self) -> np.ndarray:
        return spectrum(self.k)

    @staticmethod
    def from_diagonal(diag) -> "KossakowskiMatrix":
        return KossakowskiMatrix(np.diag(np.asarray(diag, dtype=float)))


def hamiltonian_action(h: np.ndarray) -> np.ndarray:
    """Matrix M with r_dot|_Hamiltonian = M r for the commutator flow.

    M_jk = Tr(G_j * (-i)[H, G_k]) / 4; exactly skew-symmetric for
    Hermitian H (checked to 1e-12 and antisymmetrized).
    """
    h = np.asarray(h, dtype=complex)
    if hermiticity_defect(h) > 1e-10 * max(1.0, float(np.abs(h).max())):
        raise ValueError("hamiltonian_action expects a Hermitian matrix")
    g = traceless_basis()
    comm = -1j * (np.einsum("ij,kjl->kil", h, g) - np.einsum("kij,jl->kil", g, h))
    m = np.einsum("jab,kba->jk", g, comm) / 4.0
    skew = np.max(np.abs(m + m.T))
    if skew > 1e-12 * max(1.0, float(np.abs(m).max())):
        raise ValueError(f"action matrix is not skew-symmetric (defect {skew:g})")
    return 0.5 * (m.real - m.real.T)


def generator_residual(traj: Trajectory, hseq: Trajectory) -> Trajectory:
    """Residual R(t) = rho_dot + i[H(t), rho(t)] of the Hamiltonian part.

    Vanishes for closed dynamics; otherwise it is the dissipative action
    on the state (traceless and Hermitian up to stencil error).
    """
    if traj.n != hseq.n or abs(traj.dt - hseq.dt) > 1e-12 or abs(traj.t0 - hseq.t0) > 1e-12:
        raise ValueError("trajectory grids differ")
    rdot = finite_diff(traj).samples
    comm = np.einsum("nij,njk->nik", hseq.samples, traj.samples)
    comm = comm - np.einsum("nij,njk->nik", traj.samples, hseq.samples)
    return Trajectory(traj.t0, traj.dt, rdot + 1j * comm)


@lru_cache(maxsize=1)
def anticommutation_table() -> np.ndarray:
    """B[j, k] = 1 when G_{j+1} and G_{k+1} anticommute, else 0."""
    g = traceless_basis()
    b = np.empty((15, 15))
    for j in range(15):
        for k in range(15):
            b[j, k] = 1.0 if np.max(np.abs(g[j] @ g[k] + g[k] @ g[j])) < 1e-12 else 0.0
    b.setflags(write=False)
    return b


@dataclass(frozen=True)
class DiagonalFit:
    """Constant diagonal unital generator fitted on the active components.

    ``d_diag`` holds the fitted rates (zero on inactive components),
    ``active``/``free`` the index sets (array positions), ``residual``
    the worst instantaneous misfit max |r_dot_k - d_k r_k| over the
    active components.
    """

    d_diag: np.ndarray
    active: tuple
    free: tuple
    residual: float


def fit_diagonal_unital(gamma_traj: Trajectory, active_tol: float = 1e-10) -> DiagonalFit:
    """Fit r_dot = diag(d) r on the coherence vector of a diagonal-frame
    trajectory.

    Components with |r_k| below ``active_tol`` everywhere carry no
    information and are reported as free; each active component gets its
    least-squares constant rate. The offset l is fixed to zero (unital
    ansatz).
    """
    r = coherence_series(gamma_traj.samples)
    rdot = diff_series(r, gamma_traj.dt)
    amp = np.max(np.abs(r), axis=0)
    active = tuple(int(i) for i in np.flatnonzero(amp > active_tol))
    free = tuple(int(i) for i in np.flatnonzero(amp <= active_tol))
    d = np.zeros(15)
    res = 0.0
    for k in active:
        d[k] = float(rdot[:, k] @ r[:, k] / (r[:, k] @ r[:, k]))
        res = max(res, float(np.max(np.abs(rdot[:, k] - d[k] * r[:, k]))))
    return DiagonalFit(d, active, free, res)


def diagonal_fit_residual(gamma_traj: Trajectory, d_diag) -> float:
    """Worst misfit of a given constant diagonal rate vector."""
    d_diag = np.asarray(d_diag, dtype=float).reshape(15)
    r = coherence_series(gamma_traj.samples)
    rdot = diff_series(r, gamma_traj.dt)
    return float(np.max(np.abs(rdot - d_diag[np.newaxis, :] * r)))


def k_from_d(d_diag, tol: float = 1e-10) -> KossakowskiMatrix:
    """Unique diagonal Kossakowski matrix reproducing a diagonal D.

    Solves -2 B k = d for the diagonal entries k, where B is the basis
    anticommutation table (invertible on the 15-space, so the ansatz
    has no null space). The inverse map is checked by round trip.
    """
    d_diag = np.asarray(d_diag, dtype=float).reshape(15)
    b = anticommutation_table()
    k = np.linalg.solve(-2.0 * b, d_diag)
    back = -2.0 * b @ k
    if np.max(np.abs(back - d_diag)) > tol * max(1.0, float(np.abs(d_diag).max())):
        raise ValueError("no diagonal Kossakowski matrix matches this D")
    return KossakowskiMatrix.from_diagonal(k)


def _dissipator_terms(k: KossakowskiMatrix):
    """Nonzero (K_ij, G_i, G_j) triples plus the summed sum K_ij G_j G_i."""
    g = traceless_basis()
    terms = []
    gg = np.zeros((4, 4), dtype=complex)
    rows, cols = np.nonzero(np.abs(k.k) > 0.0)
    for i, j in zip(rows, cols):
        val = k.k[i, j]
        terms.append((val, g[i], g[j]))
        gg += val * (g[j] @ g[i])
    return terms, gg


def dissipator_apply(k: KossakowskiMatrix, x: np.ndarray) -> np.ndarray:
    """The dissipator sum_ij K_ij (G_i X G_j - 1/2 {G_j G_i, X})."""
    terms, gg = _dissipator_terms(k)
    x = np.asarray(x, dtype=complex)
    out = -0.5 * (gg @ x + x @ gg)
    for val, gi, gj in terms:
        out += val * (gi @ x @ gj)
    return out


def d_from_k(k: KossakowskiMatrix) -> AffineGenerator:
    """Affine picture of a dissipator: apply it to each basis element.

    D_jk = Tr(G_j Diss[G_k]) / 4 and l_j = Tr(G_j Diss[I]) / 4.
    """
    g = traceless_basis()
    d = np.empty((15, 15))
    for col in range(15):
        image = dissipator_apply(k, g[col])
        d[:, col] = np.einsum("jab,ba->j", g, image).real / 4.0
    l = np.einsum("jab,ba->j", g, dissipator_apply(k, np.eye(4, dtype=complex))).real / 4.0
    return AffineGenerator(d, l)


@dataclass(frozen=True)
class CpReport:
    valid: bool
    min_eigenvalue: float
    tol: float


def cp_check(k: KossakowskiMatrix, tol: float = PSD_EIG_TOL) -> CpReport:
    """GKSL validity: the generator is CP-divisible iff K is PSD."""
    w = k.spectrum()
    return CpReport(bool(w[0] >= -tol), float(w[0]), tol)


@dataclass(frozen=True)
class IntegratedCpReport:
    passed: bool
    worst_index: int
    worst_time: float
    min_integral: float


def integrated_cp_check(
    k_diag_series: np.ndarray, t0: float, dt: float, tol: float = 1e-10
) -> IntegratedCpReport:
    """Cumulative-integral positivity of time-dependent diagonal rates.

    PASS iff int_0^t K_ii(tau) dtau >= -tol for every i and grid time t
    (trapezoidal quadrature).
    """
    ks = np.asarray(k_diag_series, dtype=float)
    if ks.ndim != 2:
        raise ValueError("expected an (n, m) series of diagonal entries")
    cum = cumulative_trapezoid(ks, dx=dt, axis=0, initial=0.0)
    flat = int(np.argmin(cum))
    row, col = np.unravel_index(flat, cum.shape)
    worst = float(cum[row, col])
    return IntegratedCpReport(worst >= -tol, int(col), t0 + dt * int(row), worst)


def candidate_diagonals(fit: DiagonalFit, tol: float = 1e-8):
    """Complete a partially determined diagonal D to full rate vectors.

    The fit only pins the rates on its active components; the free ones
    may take any value. Three completions are tried, each paired with
    its diagonal Kossakowski matrix:

    - ``zero``: free rates set to zero (the minimal guess);
    - ``single``: a single non-negative K entry reproducing the active
      rates, lowest generator index first;
    - ``nnls``: non-negative least squares over all K entries, kept when
      it actually matches the active rates.

    Duplicate completions are dropped; order is deterministic.
    """
    b = anticommutation_table()
    active = list(fit.active)
    d_active = fit.d_diag[active]
    out = []

    def push(label, d_full):
        for _, seen, _ in out:
            if np.max(np.abs(seen - d_full)) < 1e-12:
                return
        out.append((label, d_full, k_from_d(d_full)))

    push("zero", fit.d_diag.copy())
    if active:
        a = -2.0 * b[active, :]
        for j in range(15):
            col = a[:, j]
            denom = col @ col
            if denom == 0.0:
                kappa = 0.0
            else:
                kappa = float(col @ d_active / denom)
            if kappa < -tol:
                continue
            if np.max(np.abs(col * kappa - d_active)) < tol:
                kvec = np.zeros(15)
                kvec[j] = max(kappa, 0.0)
                push(f"single:{j + 1}", -2.0 * b @ kvec)
        kvec, rnorm = nnls(a, d_active)
        if rnorm < tol:
            push("nnls", -2.0 * b @ kvec)
    return out


def gksl_apply(h: np.ndarray, k: Optional[KossakowskiMatrix], rho: np.ndarray) -> np.ndarray:
    """Full master-equation right-hand side -i[H, rho] + Diss_K[rho]."""
    h = np.asarray(h, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    out = -1j * (h @ rho - rho @ h)
    if k is not None:
        out = out + dissipator_apply(k, rho)
    return out


def rotate_dissipator(
    k: KossakowskiMatrix, useq: EvolutionSequence, tol: float = 1e-9
) -> Callable[[float, np.ndarray], np.ndarray]:
    """Lab-frame applier of a diagonal-frame dissipator.

    Returns a callable (t, rho) -> U_t Diss_K[U_t^dag rho U_t] U_t^dag
    with U_t looked up on the sequence grid; off-grid times are
    rejected, so integration steps must land on grid samples.
    """
    terms, gg = _dissipator_terms(k)

    def apply(t: float, rho: np.ndarray) -> np.ndarray:
        idx = (t - useq.t0) / useq.dt
        i = int(round(idx))
        if abs(idx - i) > tol / useq.dt or not 0 <= i < useq.n:
            raise ValueError(f"time {t:g} is not on the unitary grid")
        u = useq.u[i]
        ud = u.conj().T
        sigma = ud @ rho @ u
        out = -0.5 * (gg @ sigma + sigma @ gg)
        for val, gi, gj in terms:
            out += val * (gi @ sigma @ gj)
        return u @ out @ ud

    return apply


def constant_generator(h: np.ndarray, k: Optional[KossakowskiMatrix] = None):
    """Time-independent right-hand side for rk4_integrate."""
    h = np.asarray(h, dtype=complex)

    def rhs(t, rho):
        return gksl_apply(h, k, rho)

    return rhs


@dataclass(frozen=True)
class RoundtripReport:
    max_deviation: float
    max_marginal_a: float
    max_marginal_b: float
    trace_drift: float


def roundtrip_verify(traj: Trajectory, rhs, stride: int = 1) -> RoundtripReport:
    """Re-integrate a generator from the first sample and compare.

    RK4 steps of size stride * dt are taken so that, with stride 2, the
    midpoint evaluations fall on grid samples (needed when ``rhs`` looks
    unitaries up on the trajectory's half-spaced grid). Deviations are
    max Frobenius distance of the joint state and max absolute entry
    deviation of each marginal.
    """
    from .qcore import partial_trace  # local import to avoid cycle noise

    if stride < 1 or (traj.n - 1) % stride != 0:
        raise ValueError("stride must divide the number of intervals")
    n_steps = (traj.n - 1) // stride
    result = rk4_integrate(rhs, traj.samples[0], traj.t0, stride * traj.dt, n_steps)
    ref = traj.samples[::stride]
    dev = 0.0
    dev_a = 0.0
    dev_b = 0.0
    for got, want in zip(result.trajectory.samples, ref):
        dev = max(dev, float(np.linalg.norm(got - want)))
        dev_a = max(dev_a, float(np.max(np.abs(partial_trace(got, "B") - partial_trace(want, "B")))))
        dev_b = max(dev_b, float(np.max(np.abs(partial_trace(got, "A") - partial_trace(want, "A")))))
    return RoundtripReport(dev, dev_a, dev_b, result.max_trace_drift)
