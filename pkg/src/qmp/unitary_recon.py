"""Reconstruction of unitary dynamics from a density-matrix trajectory.

Given samples of rho(t) with a constant spectrum, build a smooth family
of unitaries U(t) with U(t0) = I and U(t) rho(t0) U(t)^dag = rho(t), and
recover the generating Hamiltonian H(t) = i (dU/dt) U^dag. The route is
eigenframe continuation: per-time eigendecompositions are glued together
by overlap matching, phase fixing, and Procrustes alignment inside
degenerate eigenvalue blocks, which stays smooth where coordinate charts
(e.g. the Iwasawa/Gauss parametrization, provided here for validation)
become singular.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .qcore import Trajectory, dag, finite_diff, hermiticity_defect, spectrum

__all__ = [
    "OrbitSpec",
    "EvolutionSequence",
    "EigenframeResult",
    "HamiltonianResult",
    "orbit_rep",
    "iwasawa_decompose",
    "reconstruct_evolution",
    "eigenframe_decompose",
    "hamiltonian_from_evolution",
]

DEGENERACY_TOL = 1e-9
SPECTRUM_DRIFT_TOL = 1e-8


@dataclass(frozen=True)
class OrbitSpec:
    """Spectrum data labeling the unitary orbit of a state.

    ``gamma`` holds the eigenvalues in descending order; ``partition``
    groups indices of equal eigenvalues (at tolerance 1e-9). The orbit
    dimension is n^2 - sum(m_i^2) over the multiplicities, which gives
    n(n-1) for a nondegenerate spectrum, 2(n-1) for a pure state and 0
    for the maximally mixed state.
    """

    gamma: np.ndarray
    partition: tuple

    @property
    def dimension(self) -> int:
        n = len(self.gamma)
        return n * n - sum(len(b) ** 2 for b in self.partition)


def _partition_degenerate(w: np.ndarray, tol: float = DEGENERACY_TOL) -> tuple:
    """Group consecutive indices of a sorted eigenvalue list by closeness."""
    blocks = [[0]]
    for i in range(1, len(w)):
        if abs(w[i] - w[i - 1]) <= tol:
            blocks[-1].append(i)
        else:
            blocks.append([i])
    return tuple(tuple(b) for b in blocks)


def orbit_rep(rho: np.ndarray, tol: float = DEGENERACY_TOL) -> OrbitSpec:
    """Descending spectrum and degeneracy structure of a state."""
    w = spectrum(np.asarray(rho, dtype=complex))[::-1]
    return OrbitSpec(w, _partition_degenerate(w, tol))


def iwasawa_decompose(z: np.ndarray, tol: float = 1e-10):
    """Factor an invertible matrix as z = u a r.

    u is unitary, a positive diagonal with det a = 1, and r unit
    upper-triangular, obtained from the Cholesky factorization of
    z^dag z = r^dag a^2 r. The input must have unit determinant within
    ``tol`` (rescale first otherwise).
    """
    z = np.asarray(z, dtype=complex)
    if z.ndim != 2 or z.shape[0] != z.shape[1]:
        raise ValueError("z must be square")
    det = np.linalg.det(z)
    if abs(det - 1.0) > tol:
        raise ValueError(f"det z = {det:g}; rescale to unit determinant first")
    g = dag(z) @ z
    try:
        low = np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise ValueError("z is singular or too ill-conditioned") from exc
    d = low.diagonal().real
    a = np.diag(d.astype(complex))
    r = dag(low / d[np.newaxis, :])  # unit upper-triangular
    u = z @ np.linalg.inv(r) @ np.diag(1.0 / d)
    if np.max(np.abs(u @ dag(u) - np.eye(len(d)))) > 100 * tol:
        raise ValueError("factorization failed to produce a unitary factor")
    return u, a, r


@dataclass(frozen=True)
class EvolutionSequence:
    """Family of unitaries on a uniform grid with U(t0) = I."""

    t0: float
    dt: float
    u: np.ndarray
    gamma: np.ndarray  # descending spectrum of rho(t0)

    def __post_init__(self):
        u = np.asarray(self.u, dtype=complex)
        if u.ndim != 3 or u.shape[1] != u.shape[2]:
            raise ValueError("u must have shape (n, d, d)")
        eye = np.eye(u.shape[1])
        worst = max(np.max(np.abs(m @ dag(m) - eye)) for m in u)
        if worst > 1e-10:
            raise ValueError(f"sequence is not unitary (defect {worst:g})")
        if np.max(np.abs(u[0] - eye)) > 1e-10:
            raise ValueError("sequence must start at the identity")
        object.__setattr__(self, "u", u)

    @property
    def n(self) -> int:
        return self.u.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n)


@dataclass(frozen=True)
class EigenframeResult:
    """Eigenframe split rho(t) = V(t) W(t) V(t)^dag with labeled branches.

    ``useq`` carries U(t) = V(t) V(t0)^dag (identity at t0); ``gamma``
    is the trajectory of diagonal branch matrices W(t) ordered by the
    continuation labels, and ``residual`` the max reconstruction error
    max_t || U W(t0-frame) U^dag - rho || when the spectrum is constant.
    """

    useq: EvolutionSequence
    gamma: Trajectory
    residual: float


def _continue_frames(traj: Trajectory, require_constant_spectrum: bool):
    """Label-continuous eigendecomposition of every sample.

    Eigenvalue branches are matched to the previous time by maximal
    eigenvector overlap (optimal assignment); phases are fixed so the
    diagonal overlaps are real-positive, and degenerate blocks are
    aligned to the previous frame by orthogonal Procrustes so the frame
    is parallel-transported through exact degeneracies.
    """
    n = traj.n
    d = traj.dim
    frames = np.empty((n, d, d), dtype=complex)
    branches = np.empty((n, d))
    w0, v0 = spectrum(traj.samples[0], vectors=True)
    order = np.argsort(-w0, kind="stable")
    frames[0] = v0[:, order]
    branches[0] = w0[order]
    for i in range(1, n):
        w, v = spectrum(traj.samples[i], vectors=True)
        prev = frames[i - 1]
        overlap = np.abs(dag(prev) @ v) ** 2
        row, col = linear_sum_assignment(-overlap)
        perm = np.empty(d, dtype=int)
        perm[row] = col
        v = v[:, perm]
        w = w[perm]
        if require_constant_spectrum:
            drift = np.max(np.abs(w - branches[0]))
            if drift > SPECTRUM_DRIFT_TOL:
                raise ValueError(
                    f"spectrum drift {drift:g} at sample {i}: "
                    "not a unitary trajectory"
                )
        for block in _degenerate_blocks(w):
            b = list(block)
            if len(b) == 1:
                j = b[0]
                ph = prev[:, j].conj() @ v[:, j]
                if abs(ph) > 1e-12:
                    v[:, j] *= ph.conj() / abs(ph)
            else:
                m = dag(v[:, b]) @ prev[:, b]
                aa, _, bb = np.linalg.svd(m)
                v[:, b] = v[:, b] @ (aa @ bb)
        frames[i] = v
        branches[i] = w
    return frames, branches


def _degenerate_blocks(w: np.ndarray, tol: float = DEGENERACY_TOL):
    """Index groups of (nearly) equal values in an unsorted label order."""
    order = np.argsort(-w, kind="stable")
    blocks = []
    current = [order[0]]
    for a, b in zip(order[:-1], order[1:]):
        if abs(w[a] - w[b]) <= tol:
            current.append(b)
        else:
            blocks.append(tuple(current))
            current = [b]
    blocks.append(tuple(current))
    return blocks


def reconstruct_evolution(traj: Trajectory) -> EvolutionSequence:
    """Unitaries U(t) with U(t0) = I and U(t) rho(t0) U(t)^dag = rho(t).

    The trajectory must have a constant spectrum (drift above 1e-8
    aborts). The output is unique up to right-multiplication by unitaries
    commuting with rho(t0); the continuation gauge picks the smooth
    representative.
    """
    frames, _ = _continue_frames(traj, require_constant_spectrum=True)
    v0_inv = dag(frames[0])
    u = np.einsum("nij,jk->nik", frames, v0_inv)
    gamma = spectrum(traj.samples[0])[::-1]
    return EvolutionSequence(traj.t0, traj.dt, u, gamma)


def eigenframe_decompose(traj: Trajectory) -> EigenframeResult:
    """Split a (possibly dissipative) trajectory into frame and branches.

    Unlike ``reconstruct_evolution`` the spectrum may drift; the
    eigenvalue branches W(t) are returned as a diagonal trajectory in
    the continuation's label order, alongside U(t) = V(t) V(t0)^dag.
    """
    frames, branches = _continue_frames(traj, require_constant_spectrum=False)
    v0_inv = dag(frames[0])
    u = np.einsum("nij,jk->nik", frames, v0_inv)
    gamma = np.zeros_like(traj.samples)
    idx = np.arange(traj.dim)
    gamma[:, idx, idx] = branches
    # Residual of the frozen-spectrum reconstruction: tiny for unitary
    # trajectories, grows with dissipation.
    res = 0.0
    for ui, rho in zip(u, traj.samples):
        res = max(res, float(np.max(np.abs(ui @ gamma[0] @ dag(ui) - rho))))
    useq = EvolutionSequence(traj.t0, traj.dt, u, branches[0].copy())
    return EigenframeResult(useq, Trajectory(traj.t0, traj.dt, gamma), res)


@dataclass(frozen=True)
class HamiltonianResult:
    """H(t) series with the pre-symmetrization anti-Hermitian defect."""

    trajectory: Trajectory
    antihermitian_defect: float


def hamiltonian_from_evolution(seq: EvolutionSequence) -> HamiltonianResult:
    """Generator H(t) = i (dU/dt) U^dag of a unitary sequence.

    The raw finite-difference generator is Hermitian only up to the
    O(dt^2) stencil error; the returned series is symmetrized and made
    traceless, with the worst pre-symmetrization defect reported. The
    result does not depend on a constant right gauge factor of U.
    """
    du = finite_diff(Trajectory(seq.t0, seq.dt, seq.u))
    h = 1j * np.einsum("nij,nkj->nik", du.samples, seq.u.conj())
    defect = float(max(hermiticity_defect(m) for m in h))
    h = 0.5 * (h + np.conj(np.transpose(h, (0, 2, 1))))
    tr = np.trace(h, axis1=1, axis2=2).real / h.shape[1]
    h -= tr[:, np.newaxis, np.newaxis] * np.eye(h.shape[1])
    return HamiltonianResult(Trajectory(seq.t0, seq.dt, h), defect)
