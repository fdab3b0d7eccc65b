import numpy as np
import pytest

from skinchain.lattice import OBC, LatticeParams
from skinchain.state import (
    JumpOnEmptyModeError,
    JumpOperator,
    SlaterState,
    apply_jump,
    apply_propagator,
    bond_expectations,
    classical_entropy,
    density,
    density_imbalance,
    entanglement_entropy,
    jump_expectation,
    measure,
    particle_current,
)


def random_state(L, N, seed):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(L, N)) + 1j * rng.normal(size=(L, N))
    Q, _ = np.linalg.qr(M)
    return SlaterState(Q)


def right_mover():
    return SlaterState(np.array([[1.0], [-1.0j]]) / np.sqrt(2))


def left_mover():
    return SlaterState(np.array([[1.0], [1.0j]]) / np.sqrt(2))


class TestConstruction:
    def test_domain_wall_columns(self):
        s = SlaterState.from_occupation([1, 1, 0, 0])
        expected = np.zeros((4, 2))
        expected[0, 0] = expected[1, 1] = 1
        np.testing.assert_array_equal(s.orbitals, expected)

    def test_neel_columns(self):
        s = SlaterState.from_occupation([1, 0, 1, 0])
        expected = np.zeros((4, 2))
        expected[0, 0] = expected[2, 1] = 1
        np.testing.assert_array_equal(s.orbitals, expected)

    def test_filled_pair_is_identity(self):
        s = SlaterState.from_occupation([1, 1])
        np.testing.assert_array_equal(s.orbitals, np.eye(2))

    def test_rejects_empty_pattern(self):
        with pytest.raises(ValueError):
            SlaterState.from_occupation([0, 0, 0])


class TestCorrelationMatrix:
    def test_product_state_diagonal(self):
        G = SlaterState.from_occupation([1, 1, 0, 0]).correlation_matrix()
        np.testing.assert_allclose(G, np.diag([1, 1, 0, 0]))

    def test_shared_fermion(self):
        s = SlaterState(np.array([[1.0], [1.0]]) / np.sqrt(2))
        np.testing.assert_allclose(s.correlation_matrix(), np.full((2, 2), 0.5))

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_trace_counts_particles(self, seed):
        s = random_state(7, 3, seed)
        G = s.correlation_matrix()
        assert np.trace(G).real == pytest.approx(3.0, abs=1e-10)

    @pytest.mark.parametrize("seed", [3, 4])
    def test_pure_state_idempotence(self, seed):
        G = random_state(6, 3, seed).correlation_matrix()
        assert np.max(np.abs(G @ G - G)) < 1e-8
        assert np.max(np.abs(G - G.conj().T)) < 1e-10


class TestPropagation:
    def test_identity_propagator_keeps_correlations(self):
        s = random_state(5, 2, 11)
        out = apply_propagator(s, np.eye(5, dtype=complex))
        np.testing.assert_allclose(
            out.correlation_matrix(), s.correlation_matrix(), atol=1e-13
        )

    def test_unitary_drift_preserves_spectrum(self):
        import scipy.linalg

        from skinchain.lattice import build_h0

        params = LatticeParams(L=6, p=2.0, bc=OBC)
        K = scipy.linalg.expm(-1j * 0.3 * build_h0(params))
        s = SlaterState.from_occupation([1, 0, 1, 0, 1, 0])
        out = apply_propagator(s, K)
        lam_in = np.linalg.eigvalsh(s.correlation_matrix())
        lam_out = np.linalg.eigvalsh(out.correlation_matrix())
        np.testing.assert_allclose(lam_in, lam_out, atol=1e-10)
        assert out.orthonormality_defect() < 1e-10

    def test_orthonormality_restored_after_dissipative_drift(self):
        import scipy.linalg

        from skinchain.lattice import build_h_eff

        params = LatticeParams(L=6, p=2.0, gamma=1.5, bc=OBC)
        K = scipy.linalg.expm(-1j * 0.1 * build_h_eff(params))
        out = apply_propagator(random_state(6, 3, 5), K)
        assert out.orthonormality_defect() < 1e-10

    def test_rank_collapse_is_reported(self):
        from skinchain.state import RankDeficiencyError

        K = np.zeros((5, 5), dtype=complex)  # catastrophic dissipation
        with pytest.raises(RankDeficiencyError):
            apply_propagator(random_state(5, 2, 8), K)


class TestJumpExpectation:
    def test_right_mover_is_certain(self):
        assert jump_expectation(right_mover(), JumpOperator(2, 0, np.pi)) == pytest.approx(1.0)

    def test_left_mover_is_dark(self):
        assert jump_expectation(left_mover(), JumpOperator(2, 0, np.pi)) == pytest.approx(0.0, abs=1e-12)

    def test_domain_wall_interface_bond(self):
        s = SlaterState.from_occupation([1, 1, 0, 0])
        assert jump_expectation(s, JumpOperator(4, 1, np.pi)) == pytest.approx(0.5)

    @pytest.mark.parametrize("seed", [0, 7, 13])
    def test_matches_overlap_formula(self, seed):
        # independent route: <P> = 0.5 * sum_j |<a|U_j>|^2
        s = random_state(6, 3, seed)
        for bond in range(5):
            jump = JumpOperator(6, bond, np.pi)
            a = jump.a_vector()
            overlaps = a.conj() @ s.orbitals
            alt = 0.5 * float(np.sum(np.abs(overlaps) ** 2))
            assert jump_expectation(s, jump) == pytest.approx(alt, abs=1e-12)

    def test_vectorized_bond_expectations(self):
        s = random_state(6, 3, 21)
        vals = bond_expectations(s, 6, 6)
        for bond in range(6):
            assert vals[bond] == pytest.approx(
                jump_expectation(s, JumpOperator(6, bond, np.pi)), abs=1e-12
            )


class TestApplyJump:
    def test_converts_right_mover_to_left_mover(self):
        out = apply_jump(right_mover(), JumpOperator(2, 0, np.pi))
        np.testing.assert_allclose(
            out.correlation_matrix(), left_mover().correlation_matrix(), atol=1e-12
        )

    def test_rejects_dark_state(self):
        with pytest.raises(JumpOnEmptyModeError):
            apply_jump(left_mover(), JumpOperator(2, 0, np.pi))

    def test_preserves_particle_number_and_orthonormality(self):
        s = random_state(6, 3, 2)
        out = apply_jump(s, JumpOperator(6, 2, np.pi))
        assert out.N == 3
        assert out.orthonormality_defect() < 1e-10

    @pytest.mark.parametrize("seed", [1, 5])
    def test_matches_exact_many_body_action(self, seed):
        from skinchain.ed import FockBasis, correlation_from_vector, lift_jump, slater_vector

        s = random_state(6, 3, seed)
        jump = JumpOperator(6, 2, np.pi)
        basis = FockBasis.build(6, 3)
        psi = slater_vector(basis, s.orbitals)
        psi = lift_jump(basis, jump) @ psi
        psi /= np.linalg.norm(psi)
        G_exact = correlation_from_vector(basis, psi)
        G_gauss = apply_jump(s, jump).correlation_matrix()
        assert np.max(np.abs(G_exact - G_gauss)) < 1e-10

    def test_feedback_phase_commutes_with_renormalization(self):
        # theta=0 jump then sign flip on the partner row == theta=pi jump
        s = random_state(6, 3, 9)
        jump0 = JumpOperator(6, 1, 0.0)
        jump_pi = JumpOperator(6, 1, np.pi)
        via_pi = apply_jump(s, jump_pi).correlation_matrix()
        flipped = apply_jump(s, jump0).orbitals.copy()
        flipped[jump0.partner, :] *= -1
        Q, _ = np.linalg.qr(flipped)
        via_flip = SlaterState(Q).correlation_matrix()
        np.testing.assert_allclose(via_pi, via_flip, atol=1e-10)

    def test_wraparound_bond(self):
        s = SlaterState.from_occupation([0, 0, 0, 1])
        out = apply_jump(s, JumpOperator(4, 3, np.pi))
        n = density(out)
        assert n[3] + n[0] == pytest.approx(1.0, abs=1e-10)


class TestEntropies:
    def test_product_state_has_no_entanglement(self):
        s = SlaterState.from_occupation([1, 0, 1, 0, 1, 0, 1, 0])
        for size in (1, 2, 4):
            assert entanglement_entropy(s, range(size)) == pytest.approx(0.0, abs=1e-10)

    def test_shared_fermion_gives_ln2(self):
        s = SlaterState(np.array([[1.0], [1.0]]) / np.sqrt(2))
        assert entanglement_entropy(s, [0]) == pytest.approx(np.log(2), abs=1e-12)

    def test_empty_subsystem(self):
        assert entanglement_entropy(random_state(4, 2, 0), []) == 0.0

    def test_default_subsystem_is_first_quarter(self):
        s = random_state(8, 4, 3)
        assert entanglement_entropy(s) == pytest.approx(
            entanglement_entropy(s, range(2)), abs=1e-14
        )

    def test_classical_entropy_product_state(self):
        assert classical_entropy(SlaterState.from_occupation([1, 1, 0, 0])) == pytest.approx(
            0.0, abs=1e-10
        )

    def test_classical_entropy_uniform_half_filling(self):
        L = 4
        ks = 2 * np.pi * np.arange(2) / L
        U = np.exp(1j * np.outer(np.arange(L), ks)) / np.sqrt(L)
        s = SlaterState(U)
        np.testing.assert_allclose(density(s), 0.5, atol=1e-12)
        assert classical_entropy(s) == pytest.approx(L * np.log(2), abs=1e-10)

    @pytest.mark.parametrize("seed", [0, 4, 8])
    def test_subadditivity_bound(self, seed):
        s = random_state(8, 4, seed)
        half = entanglement_entropy(s, range(4))
        assert classical_entropy(s) >= 2 * half - 1e-8

    @pytest.mark.parametrize("seed", [2, 6])
    def test_quarter_cut_bound(self, seed):
        s = random_state(8, 4, seed)
        assert entanglement_entropy(s) <= classical_entropy(s) / 2 + 1e-8


class TestDensityObservables:
    def test_domain_wall_imbalance(self):
        assert density_imbalance(SlaterState.from_occupation([1, 1, 0, 0])) == pytest.approx(1.0)

    def test_neel_imbalance(self):
        assert density_imbalance(SlaterState.from_occupation([1, 0, 1, 0])) == pytest.approx(0.0)

    def test_uniform_state_imbalance(self):
        L = 4
        ks = 2 * np.pi * np.arange(2) / L
        U = np.exp(1j * np.outer(np.arange(L), ks)) / np.sqrt(L)
        assert density_imbalance(SlaterState(U)) == pytest.approx(0.0, abs=1e-12)

    def test_real_correlations_carry_no_current(self):
        assert particle_current(SlaterState.from_occupation([1, 1, 0, 0])) == 0.0

    def test_plane_wave_current(self):
        L = 4
        k = 2 * np.pi / L
        U = np.exp(1j * k * np.arange(L))[:, None] / np.sqrt(L)
        assert particle_current(SlaterState(U)) == pytest.approx(-2 * np.sin(k) / L, abs=1e-12)
        assert particle_current(SlaterState(U)) == pytest.approx(-0.5, abs=1e-12)

    def test_measure_bundles_everything(self):
        s = random_state(8, 4, 1)
        obs = measure(s, 1.5)
        assert obs.time == 1.5
        assert obs.S_ent >= -1e-10
        assert obs.S_cl >= -1e-10
        assert obs.S_ent <= obs.S_cl / 2 + 1e-8
        assert np.all(obs.density > -1e-9) and np.all(obs.density < 1 + 1e-9)
        assert np.sum(obs.density) == pytest.approx(4.0, abs=1e-8)
