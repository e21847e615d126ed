"""Kinematic side of the time-dependent marginal problem.

Tools to assemble compatible joint states from marginals plus a
correlation tensor, to test whether a sampled joint trajectory can be
unitary (constant trace powers), to test isospectrality of a marginal
pair, and to compute the admissible window for the conserved population
constant of the two-coherence ansatz. The three worked scenarios used
throughout the test suite are provided as samplers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .qcore import (
    Trajectory,
    cholesky_psd,
    partial_trace,
    spectrum,
    trace_power,
)
from .bloch import traceless_basis

__all__ = [
    "MarginalPair",
    "UnitarityReport",
    "IsospectralReport",
    "WindowReport",
    "assemble_joint",
    "unitarity_test",
    "isospectral_test",
    "unitary_window",
    "scenario_example1",
    "scenario_example2",
    "scenario_example3",
]


@dataclass(frozen=True)
class MarginalPair:
    """Two single-qubit trajectories on a shared uniform grid."""

    rho_a: Trajectory
    rho_b: Trajectory

    def __post_init__(self):
        a, b = self.rho_a, self.rho_b
        if a.dim != 2 or b.dim != 2:
            raise ValueError("marginals must be 2x2 trajectories")
        if a.n != b.n or abs(a.t0 - b.t0) > 1e-12 or abs(a.dt - b.dt) > 1e-12:
            raise ValueError("marginal grids differ")


@dataclass(frozen=True)
class UnitarityReport:
    passed: bool
    drift: dict  # k -> max_t |Tr rho^k(t) - Tr rho^k(t0)|
    tol: float


@dataclass(frozen=True)
class IsospectralReport:
    isospectral: bool
    max_distance: float
    tol: float


@dataclass(frozen=True)
class WindowReport:
    """Admissible interval for the conserved constant c = rho11 + rho44.

    ``exists`` is False when c_lo exceeds c_hi, which certifies that no
    unitarily evolving joint state is compatible with the marginals
    within the two-coherence ansatz. d1/d2 are the zero-coherence block
    products recorded at the window midpoint (None when no window).
    """

    c_lo: float
    c_hi: float
    d1: Optional[np.ndarray] = None
    d2: Optional[np.ndarray] = None

    @property
    def exists(self) -> bool:
        return self.c_lo <= self.c_hi + 1e-12


def assemble_joint(rho_a, rho_b, ztilde) -> Optional[np.ndarray]:
    """Join two marginals with a correlation tensor, if the result is PSD.

    Builds rho_a (x) rho_b + (1/4) sum_ij ztilde_ij sigma_i (x) sigma_j
    and certifies positivity with the pivoted Cholesky test. Returns None
    when the candidate has a negative direction.
    """
    rho_a = np.asarray(rho_a, dtype=complex)
    rho_b = np.asarray(rho_b, dtype=complex)
    zt = np.asarray(ztilde, dtype=float).reshape(3, 3)
    g = traceless_basis()
    delta = np.zeros((4, 4), dtype=complex)
    for i in range(3):
        for j in range(3):
            # generator index 4(i+1)+(j+1); the traceless stack starts at 1
            delta += 0.25 * zt[i, j] * g[4 * (i + 1) + (j + 1) - 1]
    cand = np.kron(rho_a, rho_b) + delta
    if cholesky_psd(cand) is None:
        return None
    return cand


def unitarity_test(traj: Trajectory, tol: float = 1e-10, ks=(2, 3)) -> UnitarityReport:
    """Constancy of the trace powers Tr rho^k along the trajectory.

    A trajectory evolves unitarily iff every trace power is constant, so
    the max drift relative to the first sample decides the verdict.
    """
    drift = {}
    for k in ks:
        vals = np.array([trace_power(s, k) for s in traj.samples])
        drift[k] = float(np.max(np.abs(vals - vals[0])))
    return UnitarityReport(all(d <= tol for d in drift.values()), drift, tol)


def isospectral_test(pair: MarginalPair, tol: float = 1e-9) -> IsospectralReport:
    """Max distance between the sorted spectra of the two marginals."""
    dist = 0.0
    for a, b in zip(pair.rho_a.samples, pair.rho_b.samples):
        wa = spectrum(a)
        wb = spectrum(b)
        dist = max(dist, float(np.max(np.abs(wa - wb))))
    return IsospectralReport(dist < tol, dist, tol)


def _fixed_eigenbasis_branches(traj: Trajectory, basis_tol: float = 1e-8):
    """Eigenvalue branches of a trajectory diagonal in one fixed basis.

    Finds the eigenbasis at the sample with the largest gap, orders its
    columns by descending eigenvalue there, and reads the labeled
    branches off the diagonal at every time. Branch labels follow the
    fixed eigenvectors, not magnitude sorting, so crossings stay smooth.
    """
    gaps = []
    for s in traj.samples:
        w = spectrum(s)
        gaps.append(w[-1] - w[0])
    ref = int(np.argmax(gaps))
    w, v = spectrum(traj.samples[ref], vectors=True)
    v = v[:, ::-1]  # descending eigenvalue at the reference time
    branches = np.empty((traj.n, 2))
    for i, s in enumerate(traj.samples):
        m = v.conj().T @ s @ v
        off = abs(m[0, 1])
        if off > basis_tol:
            raise ValueError(
                "marginal is not diagonal in a fixed basis "
                f"(off-diagonal {off:g} at sample {i}); rotate first"
            )
        branches[i] = m.diagonal().real
    return branches


def _refined_extremum(t: np.ndarray, f: np.ndarray) -> float:
    """Max of |f| on the grid, sharpened by a local quadratic fit."""
    i = int(np.argmax(np.abs(f)))
    best = abs(f[i])
    if 0 < i < len(f) - 1:
        s = np.sign(f[i]) or 1.0
        y0, y1, y2 = s * f[i - 1], s * f[i], s * f[i + 1]
        denom = y0 - 2.0 * y1 + y2
        if denom < 0:  # genuine local max of the signed branch
            vertex = y1 - 0.125 * (y2 - y0) ** 2 / denom
            best = max(best, vertex)
    return float(best)


def unitary_window(pair: MarginalPair, basis_tol: float = 1e-8) -> WindowReport:
    """Admissible interval for c = rho11 + rho44 of the two-coherence ansatz.

    With labeled eigenvalue branches alpha_i, beta_i of the marginals,
    the populations of a compatible joint state stay non-negative iff

        max_t |a1 b1 - a2 b2|  <=  c  <=  min_t [1 - |a1 b2 - a2 b1|].

    Extrema are evaluated on the grid with local quadratic refinement.
    """
    a = _fixed_eigenbasis_branches(pair.rho_a, basis_tol)
    b = _fixed_eigenbasis_branches(pair.rho_b, basis_tol)
    t = pair.rho_a.times
    g1 = a[:, 0] * b[:, 0] - a[:, 1] * b[:, 1]
    g2 = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    c_lo = _refined_extremum(t, g1)
    c_hi = 1.0 - _refined_extremum(t, g2)
    d1 = d2 = None
    if c_lo <= c_hi + 1e-12:
        c_mid = 0.5 * (c_lo + c_hi)
        eps = 0.5 * (c_mid - (a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1]))
        d1 = (a[:, 0] * b[:, 0] + eps) * (a[:, 1] * b[:, 1] + eps)
        d2 = (a[:, 0] * b[:, 1] - eps) * (a[:, 1] * b[:, 0] - eps)
    return WindowReport(c_lo, c_hi, d1, d2)


# ---------------------------------------------------------------------------
# Worked scenarios
# ---------------------------------------------------------------------------


def _grid(t0, dt, n):
    return t0 + dt * np.arange(n)


@dataclass(frozen=True)
class _Scenario:
    """Samplers for one worked scenario (joint and/or marginal states)."""

    joint_at: Optional[callable]
    rho_a_at: callable
    rho_b_at: callable

    def joint(self, t0: float, dt: float, n: int) -> Trajectory:
        if self.joint_at is None:
            raise ValueError("this scenario has no joint trajectory")
        return Trajectory(t0, dt, np.array([self.joint_at(t) for t in _grid(t0, dt, n)]))

    def marginals(self, t0: float, dt: float, n: int) -> MarginalPair:
        ts = _grid(t0, dt, n)
        return MarginalPair(
            Trajectory(t0, dt, np.array([self.rho_a_at(t) for t in ts])),
            Trajectory(t0, dt, np.array([self.rho_b_at(t) for t in ts])),
        )


def scenario_example1(j: float) -> _Scenario:
    """Mixed, unitarily evolving joint state with oscillating populations.

    The joint state is block-diagonal with constant corners 1/4 and a
    rotating middle block; its marginals have populations
    (8 +/- cos(Jt))/16. The generating Hamiltonian is the exchange term
    -(J/4)(s1 s1 + s2 s2).
    """
    if not j > 0:
        raise ValueError("J must be positive")

    def joint_at(t):
        c, s = np.cos(j * t), np.sin(j * t)
        return np.array(
            [
                [0.25, 0, 0, 0],
                [0, (4 + c) / 16, -1j * s / 16, 0],
                [0, 1j * s / 16, (4 - c) / 16, 0],
                [0, 0, 0, 0.25],
            ],
            dtype=complex,
        )

    def rho_a_at(t):
        c = np.cos(j * t)
        return np.diag([(8 + c) / 16, (8 - c) / 16]).astype(complex)

    def rho_b_at(t):
        c = np.cos(j * t)
        return np.diag([(8 - c) / 16, (8 + c) / 16]).astype(complex)

    return _Scenario(joint_at, rho_a_at, rho_b_at)


def scenario_example2(omega: float) -> _Scenario:
    """Marginal pair with out-of-phase coherences and no unitary joint.

    Both marginals are diagonal in fixed bases but their spectra are
    (1 -/+ cos 2wt)/2 versus (1 -/+ sin 2wt)/2, which rules out any
    unitarily evolving joint state. No joint sampler exists.
    """
    if not omega > 0:
        raise ValueError("omega must be positive")

    def rho_a_at(t):
        c = np.cos(2 * omega * t)
        return 0.5 * np.array([[1, c], [c, 1]], dtype=complex)

    def rho_b_at(t):
        s = np.sin(2 * omega * t)
        return 0.5 * np.array([[1, s], [s, 1]], dtype=complex)

    return _Scenario(None, rho_a_at, rho_b_at)


def scenario_example3(j: float, gamma: float) -> _Scenario:
    """Dissipative joint trajectory from |00> with rate gamma.

    The state is U_t Gamma(t) U_t^dag with Gamma(t) =
    diag(b+/2, 0, b-/2, 0), b+- = 1 +/- exp(-gamma t), and U_t the
    rotation generated by (3J/8)(s1 s1 - s2 s2). At gamma = 0 it reduces
    to a pure unitarily evolving trajectory.
    """
    if not j > 0:
        raise ValueError("J must be positive")
    if gamma < 0:
        raise ValueError("gamma must be non-negative")

    def joint_at(t):
        e = np.exp(-gamma * t)
        bp, bm = 1 + e, 1 - e
        c, s = np.cos(3 * j * t / 4), np.sin(3 * j * t / 4)
        big_s = np.sin(3 * j * t / 2)
        rho = np.zeros((4, 4), dtype=complex)
        rho[0, 0] = 0.5 * bp * c * c
        rho[2, 2] = 0.5 * bm
        rho[3, 3] = 0.5 * bp * s * s
        rho[0, 3] = 0.25j * bp * big_s
        rho[3, 0] = -0.25j * bp * big_s
        return rho

    def rho_a_at(t):
        rho = joint_at(t)
        return partial_trace(rho, "B")

    def rho_b_at(t):
        rho = joint_at(t)
        return partial_trace(rho, "A")

    return _Scenario(joint_at, rho_a_at, rho_b_at)
