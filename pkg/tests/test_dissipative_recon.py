import numpy as np
import pytest

from qmp.bloch import to_coherence, traceless_basis
from qmp.kinematics import scenario_example1, scenario_example3
from qmp.qcore import Trajectory, rk4_integrate
from qmp.unitary_recon import EvolutionSequence, eigenframe_decompose, hamiltonian_from_evolution
from qmp.dissipative_recon import (
    AffineGenerator,
    KossakowskiMatrix,
    anticommutation_table,
    candidate_diagonals,
    constant_generator,
    cp_check,
    d_from_k,
    diagonal_fit_residual,
    dissipator_apply,
    fit_diagonal_unital,
    generator_residual,
    gksl_apply,
    hamiltonian_action,
    integrated_cp_check,
    k_from_d,
    rotate_dissipator,
    roundtrip_verify,
)

from _oracles import (
    affine_from_superoperator,
    dissipator_superoperator,
    random_hermitian,
    random_state,
)

rng = np.random.default_rng(2718)
GAMMA = 0.2


def choice1_rates(gamma=GAMMA):
    """Decay on the two exponentially damped components only."""
    d = np.zeros(15)
    d[11] = d[14] = -gamma  # generators 12 (s3 x I) and 15 (s3 x s3)
    return d


def choice2_rates(gamma=GAMMA):
    """Decay on every component involving the first qubit's s3 sector."""
    d = np.zeros(15)
    d[7:] = -gamma  # generators 8..15
    return d


class TestHamiltonianAction:
    def test_zero(self):
        np.testing.assert_allclose(hamiltonian_action(np.zeros((4, 4))), 0)

    def test_skew_symmetric(self):
        m = hamiltonian_action(random_hermitian(rng))
        np.testing.assert_allclose(m + m.T, 0, atol=1e-12)

    def test_single_qubit_embedding(self):
        # H = h3 s3 x I rotates the first qubit's x into y at rate 2 h3
        h3 = 0.7
        g = traceless_basis()
        m = hamiltonian_action(h3 * g[11])  # generator 12 = s3 x I
        # x components of qubit A live at generators 4 and 8 (positions 3, 7)
        assert m[7, 3] == pytest.approx(2 * h3, abs=1e-12)
        assert m[3, 7] == pytest.approx(-2 * h3, abs=1e-12)

    def test_matches_direct_flow(self):
        h = random_hermitian(rng)
        rho = random_state(rng)
        m = hamiltonian_action(h)
        r = to_coherence(rho).as_vector()
        rhodot = -1j * (h @ rho - rho @ h)
        g = traceless_basis()
        rdot = np.einsum("kij,ji->k", g, rhodot).real
        np.testing.assert_allclose(m @ r, rdot, atol=1e-12)

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            hamiltonian_action(np.triu(np.ones((4, 4))))


class TestGeneratorResidual:
    def test_vanishes_for_closed_dynamics(self):
        traj = scenario_example1(2.0).joint(0.0, 1e-3, 500)
        from qmp.unitary_recon import reconstruct_evolution

        ham = hamiltonian_from_evolution(reconstruct_evolution(traj))
        res = generator_residual(traj, ham.trajectory)
        assert np.max(np.abs(res.samples[1:-1])) < 1e-6

    def test_dissipative_residual_properties(self):
        j, gamma = 2.0, 0.2
        traj = scenario_example3(j, gamma).joint(0.0, 1e-3, 500)
        g = traceless_basis()
        h = (3 * j / 8) * (g[4] - g[9])  # s1s1 - s2s2
        hseq = Trajectory(0.0, 1e-3, np.array([h] * 500))
        res = generator_residual(traj, hseq)
        assert np.max(np.abs(res.samples)) > 1e-3  # genuinely non-unitary
        for r in res.samples[1:-1:100]:
            assert abs(np.trace(r)) < 1e-8
            np.testing.assert_allclose(r, r.conj().T, atol=1e-8)

    def test_vanishes_without_damping(self):
        j = 2.0
        traj = scenario_example3(j, 0.0).joint(0.0, 1e-3, 500)
        g = traceless_basis()
        h = (3 * j / 8) * (g[4] - g[9])
        res = generator_residual(traj, Trajectory(0.0, 1e-3, np.array([h] * 500)))
        # bounded by the O(dt^2) stencil error of the time derivative
        assert np.max(np.abs(res.samples[1:-1])) < 1e-5


class TestAnticommutation:
    def test_symmetric_with_zero_diagonal(self):
        b = anticommutation_table()
        np.testing.assert_allclose(b, b.T)
        np.testing.assert_allclose(np.diag(b), 0)

    def test_each_generator_anticommutes_with_eight(self):
        b = anticommutation_table()
        np.testing.assert_allclose(b.sum(axis=1), 8)

    def test_invertible(self):
        assert np.linalg.matrix_rank(anticommutation_table()) == 15


class TestFit:
    def test_damped_diagonal_frame(self):
        traj = scenario_example3(2.0, GAMMA).joint(0.0, 1e-3, 2001)
        frame = eigenframe_decompose(traj)
        fit = fit_diagonal_unital(frame.gamma)
        assert [i + 1 for i in fit.active] == [3, 12, 15]
        assert fit.d_diag[2] == pytest.approx(0.0, abs=1e-8)
        assert fit.d_diag[11] == pytest.approx(-GAMMA, abs=1e-6)
        assert fit.d_diag[14] == pytest.approx(-GAMMA, abs=1e-6)
        assert fit.residual < 1e-6
        # the sparser rate assignment fits the same data equally well
        assert diagonal_fit_residual(frame.gamma, choice1_rates()) < 1e-6

    def test_static_trajectory_fits_zero(self):
        rho = np.diag([0.4, 0.3, 0.2, 0.1]).astype(complex)
        traj = Trajectory(0.0, 0.1, np.array([rho] * 10))
        fit = fit_diagonal_unital(traj)
        np.testing.assert_allclose(fit.d_diag, 0, atol=1e-12)
        assert fit.residual < 1e-12


class TestKossakowskiMaps:
    def test_zero_round_trip(self):
        gen = d_from_k(KossakowskiMatrix(np.zeros((15, 15))))
        np.testing.assert_allclose(gen.d, 0)
        np.testing.assert_allclose(gen.l, 0)

    def test_choice1_matrix(self):
        k = k_from_d(choice1_rates())
        expect = (GAMMA / 8) * np.array(
            [0, 0, -1, 1, 0, 0, 1, 1, 0, 0, 1, -1, 0, 0, -1], dtype=float
        )
        np.testing.assert_allclose(np.diag(k.k).real, expect, atol=1e-12)
        rep = cp_check(k)
        assert not rep.valid
        assert rep.min_eigenvalue == pytest.approx(-GAMMA / 8, abs=1e-12)

    def test_choice2_matrix(self):
        k = k_from_d(choice2_rates())
        expect = np.zeros(15)
        expect[3] = GAMMA / 2  # the s1 x I generator
        np.testing.assert_allclose(np.diag(k.k).real, expect, atol=1e-12)
        rep = cp_check(k)
        assert rep.valid
        spec = np.sort(k.spectrum())
        np.testing.assert_allclose(spec[:-1], 0, atol=1e-12)
        assert spec[-1] == pytest.approx(GAMMA / 2, abs=1e-12)

    def test_diagonal_round_trip(self):
        d = rng.normal(size=15)
        k = k_from_d(d)
        gen = d_from_k(k)
        np.testing.assert_allclose(np.diag(gen.d), d, atol=1e-10)
        assert gen.unital

    def test_d_from_k_linear(self):
        k1 = random_hermitian(rng, 15)
        k2 = random_hermitian(rng, 15)
        g12 = d_from_k(KossakowskiMatrix(k1 + 2 * k2))
        g1 = d_from_k(KossakowskiMatrix(k1))
        g2 = d_from_k(KossakowskiMatrix(k2))
        np.testing.assert_allclose(g12.d, g1.d + 2 * g2.d, atol=1e-10)

    def test_matches_superoperator_oracle(self):
        for _ in range(5):
            km = random_hermitian(rng, 15)
            gen = d_from_k(KossakowskiMatrix(km))
            d2, l2 = affine_from_superoperator(dissipator_superoperator(km))
            np.testing.assert_allclose(gen.d, d2, atol=1e-12)
            np.testing.assert_allclose(gen.l, l2, atol=1e-12)


class TestGksl:
    def test_pure_commutator_when_k_zero(self):
        h = random_hermitian(rng)
        rho = random_state(rng)
        out = gksl_apply(h, None, rho)
        np.testing.assert_allclose(out, -1j * (h @ rho - rho @ h), atol=1e-14)

    def test_bit_flip_dissipator_on_ground_state(self):
        k = k_from_d(choice2_rates())
        rho = np.zeros((4, 4), dtype=complex)
        rho[0, 0] = 1.0
        x1 = np.kron([[0, 1], [1, 0]], np.eye(2))
        expect = (GAMMA / 2) * (x1 @ rho @ x1 - rho)
        np.testing.assert_allclose(gksl_apply(np.zeros((4, 4)), k, rho), expect, atol=1e-14)

    def test_traceless_hermitian_output(self):
        km = KossakowskiMatrix(random_hermitian(rng, 15))
        rho = random_state(rng)
        out = dissipator_apply(km, rho)
        assert abs(np.trace(out)) < 1e-12
        np.testing.assert_allclose(out, out.conj().T, atol=1e-12)

    def test_unital_fixed_point(self):
        km = KossakowskiMatrix(random_hermitian(rng, 15))
        out = dissipator_apply(km, np.eye(4, dtype=complex) / 4)
        gen = d_from_k(km)
        if gen.unital:
            np.testing.assert_allclose(out, 0, atol=1e-12)

    def test_psd_k_preserves_positivity(self):
        a = rng.normal(size=(15, 15)) + 1j * rng.normal(size=(15, 15))
        km = KossakowskiMatrix(0.02 * (a @ a.conj().T))
        rhs = constant_generator(random_hermitian(rng), km)
        for _ in range(5):
            res = rk4_integrate(rhs, random_state(rng), 0.0, 1e-2, 300)
            w = np.linalg.eigvalsh(res.trajectory.samples[-1])
            assert w[0] >= -1e-6


class TestCpChecks:
    def test_integrated_constant_psd(self):
        ks = np.tile(np.abs(rng.normal(size=15)), (50, 1))
        rep = integrated_cp_check(ks, 0.0, 0.1)
        assert rep.passed

    def test_integrated_oscillating_rate(self):
        # K44(t) = g cos(wt): integral g sin(wt)/w dips negative after t = pi/w
        w = 2.0
        ts = np.linspace(0, np.pi / w, 200)
        ks = np.zeros((200, 15))
        ks[:, 3] = GAMMA * np.cos(w * ts)
        rep = integrated_cp_check(ks, 0.0, ts[1] - ts[0], tol=1e-6)
        assert rep.passed
        ts = np.linspace(0, 2 * np.pi / w, 400)
        ks = np.zeros((400, 15))
        ks[:, 3] = GAMMA * np.cos(w * ts)
        rep = integrated_cp_check(ks, 0.0, ts[1] - ts[0], tol=1e-6)
        assert not rep.passed
        assert rep.worst_index == 3
        assert rep.worst_time == pytest.approx(3 * np.pi / (2 * w), abs=0.05)


class TestCandidates:
    def test_damped_scenario_candidates(self):
        traj = scenario_example3(2.0, GAMMA).joint(0.0, 1e-3, 2001)
        fit = fit_diagonal_unital(eigenframe_decompose(traj).gamma)
        cands = candidate_diagonals(fit)
        labels = [label for label, _, _ in cands]
        assert labels[0] == "zero"
        assert "single:4" in labels
        by_label = {label: k for label, _, k in cands}
        assert not cp_check(by_label["zero"]).valid
        assert cp_check(by_label["single:4"]).valid

    def test_zero_fit_yields_trivial_candidate(self):
        rho = np.diag([0.4, 0.3, 0.2, 0.1]).astype(complex)
        traj = Trajectory(0.0, 0.1, np.array([rho] * 10))
        fit = fit_diagonal_unital(traj)
        cands = candidate_diagonals(fit)
        label, d_full, k = cands[0]
        assert cp_check(k).valid
        np.testing.assert_allclose(d_full, 0, atol=1e-12)


class TestRotateAndRoundtrip:
    def test_identity_sequence_is_direct_application(self):
        k = k_from_d(choice2_rates())
        u = np.array([np.eye(4, dtype=complex)] * 5)
        seq = EvolutionSequence(0.0, 0.1, u, np.full(4, 0.25))
        apply = rotate_dissipator(k, seq)
        rho = random_state(rng)
        np.testing.assert_allclose(apply(0.2, rho), dissipator_apply(k, rho), atol=1e-13)

    def test_off_grid_time_rejected(self):
        k = k_from_d(choice2_rates())
        u = np.array([np.eye(4, dtype=complex)] * 5)
        seq = EvolutionSequence(0.0, 0.1, u, np.full(4, 0.25))
        with pytest.raises(ValueError, match="grid"):
            rotate_dissipator(k, seq)(0.25, random_state(rng))

    def test_rotated_dissipator_matches_residual(self):
        j, dt = 2.0, 5e-4
        traj = scenario_example3(j, GAMMA).joint(0.0, dt, 2001)
        frame = eigenframe_decompose(traj)
        g = traceless_basis()
        h = (3 * j / 8) * (g[4] - g[9])
        res = generator_residual(traj, Trajectory(0.0, dt, np.array([h] * 2001)))
        apply = rotate_dissipator(k_from_d(choice2_rates()), frame.useq)
        worst = 0.0
        for i in range(1, 2000, 53):
            t = traj.t0 + i * traj.dt
            worst = max(worst, np.max(np.abs(apply(t, traj.samples[i]) - res.samples[i])))
        assert worst < 1e-6

    def test_unitary_roundtrip(self):
        j = 2.0
        traj = scenario_example1(j).joint(0.0, 1e-3, 1001)
        g = traceless_basis()
        h = -(j / 4) * (g[4] + g[9])
        rep = roundtrip_verify(traj, constant_generator(h))
        assert rep.max_deviation < 1e-6

    def test_wrong_damping_sign_detected(self):
        j = 2.0
        traj = scenario_example3(j, GAMMA).joint(0.0, 1e-3, 1001)
        frame = eigenframe_decompose(traj)
        g = traceless_basis()
        h = (3 * j / 8) * (g[4] - g[9])
        bad = rotate_dissipator(k_from_d(-choice2_rates()), frame.useq)

        def rhs(t, rho):
            return gksl_apply(h, None, rho) + bad(t, rho)

        rep = roundtrip_verify(traj, rhs, stride=2)
        assert rep.max_deviation > 0.05

    def test_stride_validation(self):
        traj = scenario_example1(2.0).joint(0.0, 1e-3, 11)
        with pytest.raises(ValueError):
            roundtrip_verify(traj, constant_generator(np.zeros((4, 4))), stride=3)


def test_affine_generator_validation():
    with pytest.raises(ValueError):
        AffineGenerator(np.full((15, 15), np.nan), np.zeros(15))
    gen = AffineGenerator(np.zeros((15, 15)), np.zeros(15))
    assert gen.unital


def test_kossakowski_requires_hermitian():
    with pytest.raises(ValueError):
        KossakowskiMatrix(np.triu(np.ones((15, 15))))
