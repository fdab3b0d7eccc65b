import numpy as np
import pytest

from skinchain.ensemble import (
    CollapsePoint,
    EnsembleConfig,
    collapse_scan,
    run_ensemble,
    scaling_exponent_fit,
)
from skinchain.lattice import OBC, PBC, LatticeParams
from skinchain.trajectory import TrajectoryConfig, domain_wall_pattern, neel_pattern


def ensemble_for(L=8, gamma=0.5, n_traj=4, bc=OBC, theta=np.pi, **kw):
    params = LatticeParams(L=L, p=2.0, gamma=gamma, theta=theta, bc=bc)
    defaults = dict(
        dt=0.02,
        t_max=1.0,
        initial_pattern=domain_wall_pattern(L),
        seed=9,
        record_every=10,
    )
    defaults.update(kw)
    base = TrajectoryConfig(lattice=params, **defaults)
    return EnsembleConfig(base=base, n_traj=n_traj, n_workers=1)


class TestRunEnsemble:
    def test_deterministic_dynamics_have_zero_stderr(self):
        record = run_ensemble(ensemble_for(gamma=0.0, n_traj=2))
        for key in ("S_ent", "S_cl", "delta_n", "current_J"):
            np.testing.assert_array_equal(record.stderr[key], 0.0)

    def test_imbalance_mean_is_convex_combination(self):
        record = run_ensemble(ensemble_for(gamma=1.0, n_traj=4))
        assert np.all(record.mean["delta_n"] >= 0.0)
        assert np.all(record.mean["delta_n"] <= 1.0)

    def test_steady_summary_within_trajectory_range(self):
        record = run_ensemble(ensemble_for(gamma=1.0, n_traj=5, t_max=2.0))
        for key, value in record.steady.mean.items():
            per = record.steady.per_trajectory[key]
            assert per.min() - 1e-12 <= value <= per.max() + 1e-12

    def test_worker_count_does_not_change_results(self):
        cfg1 = ensemble_for(gamma=1.0, n_traj=4)
        serial = run_ensemble(cfg1)
        from dataclasses import replace

        parallel = run_ensemble(replace(cfg1, n_workers=2))
        for key in ("S_ent", "S_cl", "delta_n", "current_J"):
            np.testing.assert_array_equal(serial.mean[key], parallel.mean[key])
            np.testing.assert_array_equal(serial.stderr[key], parallel.stderr[key])
        np.testing.assert_array_equal(serial.density_mean, parallel.density_mean)

    def test_mean_density_matches_exact_replay(self):
        # replay every member's jump log through the dense many-body path
        from dataclasses import replace

        from skinchain.ed import FockBasis, correlation_from_vector, replay
        from skinchain.trajectory import run_trajectory

        config = ensemble_for(L=6, gamma=1.0, n_traj=3, t_max=0.5, record_every=5,
                              initial_pattern=domain_wall_pattern(6))
        record = run_ensemble(config)
        basis = FockBasis.build(6, 3)
        exact_sum = None
        for i in range(config.n_traj):
            traj_cfg = replace(config.base, trajectory_index=i, record_density=True)
            rec = run_trajectory(traj_cfg)
            densities = []
            for _, psi in replay(traj_cfg, rec.jump_log):
                densities.append(np.real(np.diag(correlation_from_vector(basis, psi))))
            stack = np.array(densities)
            exact_sum = stack if exact_sum is None else exact_sum + stack
        np.testing.assert_allclose(record.density_mean, exact_sum / config.n_traj, atol=1e-8)

    def test_stderr_shrinks_like_inverse_sqrt_n(self):
        from dataclasses import replace

        small = run_ensemble(replace(ensemble_for(gamma=2.0, t_max=2.0), n_traj=25))
        large = run_ensemble(replace(ensemble_for(gamma=2.0, t_max=2.0), n_traj=100))
        ratio = small.steady.stderr["S_ent"] / large.steady.stderr["S_ent"]
        assert 1.3 < ratio < 3.1  # ~2 expected, frozen seed

    def test_rejects_single_trajectory(self):
        with pytest.raises(ValueError):
            ensemble_for(n_traj=1)


class TestCollapseScan:
    def synthetic_points(self, law, Ls=(32, 64, 128), gammas=(0.25, 0.5, 1.0, 2.0, 4.0)):
        return [
            CollapsePoint(L, g, L * law(g * L)) for L in Ls for g in gammas
        ]

    def test_recovers_inverse_law(self):
        points = self.synthetic_points(lambda x: 5.0 / x)
        result = collapse_scan(points)
        assert result.slope == pytest.approx(-1.0, abs=1e-10)
        assert result.fit_c == pytest.approx(5.0, abs=1e-10)

    def test_flat_scaling_function_gives_zero_slope(self):
        points = self.synthetic_points(lambda x: 0.7)
        result = collapse_scan(points)
        assert result.slope == pytest.approx(0.0, abs=1e-10)

    def test_refuses_thin_tail_but_emits_table(self):
        points = [
            CollapsePoint(4, 1.0, 4 * 0.3),
            CollapsePoint(8, 1.0, 8 * 0.2),
            CollapsePoint(16, 25.0, 16 * 0.01),
        ]
        result = collapse_scan(points)
        assert result.slope is None and result.fit_c is None
        assert result.n_tail == 1
        assert result.table.shape == (3, 3)

    def test_needs_three_sizes(self):
        with pytest.raises(ValueError):
            collapse_scan([CollapsePoint(8, g, 1.0) for g in (0.1, 0.2, 0.3)])

    def test_exact_scaling_form_collapses_to_single_curve(self):
        # same gamma*L arguments across sizes: vertical scatter vanishes
        f = lambda x: 3.0 / (1.0 + x)
        xs = np.array([2.0, 5.0, 10.0, 25.0, 60.0])
        points = [
            CollapsePoint(L, x / L, L * f(x)) for L in (16, 32, 64) for x in xs
        ]
        result = collapse_scan(points)
        x_col, y_col = result.table[:, 0], result.table[:, 1]
        for x in xs:
            group = y_col[np.isclose(x_col, x)]
            assert group.size == 3
            assert group.max() - group.min() < 1e-10


class TestScalingExponentFit:
    def test_recovers_power_law(self):
        Ls = [16, 32, 64, 128]
        slope, err = scaling_exponent_fit([(L, L**0.4) for L in Ls])
        assert slope == pytest.approx(0.4, abs=1e-10)
        assert err == pytest.approx(0.0, abs=1e-8)

    def test_flat_entropy_signals_area_law(self):
        slope, _ = scaling_exponent_fit([(L, 2.5) for L in (16, 32, 64)])
        assert slope == pytest.approx(0.0, abs=1e-12)

    def test_rejects_nonpositive_entropy(self):
        with pytest.raises(ValueError):
            scaling_exponent_fit([(16, 1.0), (32, 0.0), (64, 2.0)])

    def test_needs_three_sizes(self):
        with pytest.raises(ValueError):
            scaling_exponent_fit([(16, 1.0), (32, 2.0)])


@pytest.mark.slow
def test_no_feedback_steady_density_is_uniform():
    # theta=0 ring: trajectory-averaged steady density has no structure
    params = LatticeParams(L=64, p=2.0, gamma=2.0, theta=0.0, bc=PBC)
    base = TrajectoryConfig(
        lattice=params,
        dt=0.01,
        t_max=20.0,
        initial_pattern=neel_pattern(64),
        seed=21,
        record_every=50,
    )
    record = run_ensemble(EnsembleConfig(base=base, n_traj=100, n_workers=2))
    assert np.max(np.abs(record.steady.density_profile - 0.5)) < 0.1
