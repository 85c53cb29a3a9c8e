import numpy as np
import pytest
from scipy.integrate import solve_ivp

from skdelay.drifts import (
    DriftSpec,
    make_smooth_bump,
    make_zero,
    mollify_drift,
)
from skdelay.error import (
    ArgumentError,
    DimensionError,
    GridAlignmentError,
    SingularDriftError,
)
from skdelay.noise import GaussianPathSet, HurstWeightSpec, sample_paths
from skdelay.solver import (
    EnsembleResult,
    SolverConfig,
    euler_solve,
    first_variation,
    malliavin_solve,
    mc_ensemble,
    theta_grid,
)
from skdelay.utils import uniform_grid


@pytest.fixture(scope="module")
def zero_drift():
    return mollify_drift(DriftSpec((make_zero(), make_zero())), 2)


@pytest.fixture(scope="module")
def smooth_drift():
    spec = DriftSpec(
        (make_smooth_bump(0.8, 0.0, 1.0), make_smooth_bump(-0.5, 0.2, 0.8))
    )
    return mollify_drift(spec, 2)


def test_zero_drift_gives_the_brownian_path(zero_drift, paths, solver_config):
    traj = euler_solve(zero_drift, paths, solver_config)
    np.testing.assert_array_equal(traj.x, paths.W)
    assert traj.at(0.25).shape == (paths.n_paths,)
    np.testing.assert_array_equal(traj.at(0.25), paths.W[:, 16])


def test_initial_value_shifts_the_solution(zero_drift, paths):
    config = SolverConfig.build(T=0.5, dt=1 / 64, r=0.5, eta0=1.5, d=2)
    traj = euler_solve(zero_drift, paths[:10], config)
    np.testing.assert_allclose(traj.x, 1.5 + paths.W[:10], rtol=0, atol=1e-15)


def test_unmollified_drift_is_rejected(paths, solver_config, step_drift):
    with pytest.raises(SingularDriftError):
        euler_solve(step_drift.base, paths, solver_config)


def test_solution_stays_in_the_envelope(step_drift, paths, solver_config):
    traj = euler_solve(step_drift, paths, solver_config)
    assert traj.envelope_excess(paths, 0.0, step_drift.sup_sum) <= 1e-12
    assert traj.coeffs.shape == (paths.n_paths, 33, 2)
    np.testing.assert_allclose(
        traj.drift_increments, traj.drift_trace[:, :-1] / 64
    )


def test_paths_must_match_the_grid(step_drift, spec, solver_config):
    coarse = sample_paths(spec, 0.5, 16, 3, seed=0)
    with pytest.raises(GridAlignmentError):
        euler_solve(step_drift, coarse, solver_config)
    single = sample_paths(HurstWeightSpec((0.1,), (1.0,)), 0.5, 32, 3, seed=0)
    with pytest.raises(DimensionError):
        euler_solve(step_drift, single, solver_config)


def test_solution_is_adapted(step_drift, paths, solver_config):
    subset = paths[:20]
    traj = euler_solve(step_drift, subset, solver_config)
    W = subset.W.copy()
    W[:, 13:] += 1.0
    shifted = euler_solve(step_drift, subset.with_brownian(W), solver_config)
    np.testing.assert_array_equal(shifted.x[:, :13], traj.x[:, :13])
    np.testing.assert_array_equal(shifted.coeffs[:, :13], traj.coeffs[:, :13])
    assert not np.array_equal(shifted.x[:, 13], traj.x[:, 13])


def test_first_variation_without_drift(zero_drift, paths, solver_config):
    subset = paths[:10]
    traj = euler_solve(zero_drift, subset, solver_config)
    thetas = [0.0, 0.25, 0.5]
    variation = first_variation(
        zero_drift, traj, subset, thetas, solver_config, keep_table=True
    )
    assert variation.values.shape == (10, 3, 33)
    for i, start in enumerate([0, 16, 32]):
        np.testing.assert_array_equal(variation.values[:, i, :start], 0.0)
        np.testing.assert_array_equal(variation.values[:, i, start:], 1.0)
    assert variation.coefficient_table.shape == (10, 3, 33, 2)
    np.testing.assert_array_equal(variation.at(0.5), 1.0)
    late = malliavin_solve(zero_drift, traj, subset, 0.5, 0.25, solver_config)
    np.testing.assert_array_equal(late, 0.0)


def test_first_variation_arguments(zero_drift, paths, solver_config):
    subset = paths[:2]
    traj = euler_solve(zero_drift, subset, solver_config)
    with pytest.raises(GridAlignmentError):
        first_variation(zero_drift, traj, subset, [0.01], solver_config)
    with pytest.raises(ArgumentError):
        first_variation(zero_drift, traj, subset, [0.75], solver_config)


def test_first_variation_matches_finite_differences(smooth_drift, spec):
    config = SolverConfig.build(T=0.5, dt=1 / 64, r=0.5, d=2)
    paths = sample_paths(spec, 0.5, 32, 5, seed=3)
    traj = euler_solve(smooth_drift, paths, config)
    theta_index, h = 10, 1e-6
    derivative = malliavin_solve(
        smooth_drift, traj, paths, theta_index / 64, 0.5, config
    )
    shifted = []
    for sign in (1, -1):
        W = paths.W.copy()
        W[:, theta_index:] += sign * h
        shifted.append(
            euler_solve(smooth_drift, paths.with_brownian(W), config).x[:, -1]
        )
    difference = (shifted[0] - shifted[1]) / (2 * h)
    assert np.max(np.abs(derivative - 1.0)) > 0.02
    np.testing.assert_allclose(difference, derivative, atol=1e-2)


def _terminal_error(drift, dt):
    T = r = 0.5
    n_steps = int(round(T / dt))
    times = uniform_grid(T, n_steps)
    spec = HurstWeightSpec((0.1, 0.1), (1.0, 1.0))
    still = GaussianPathSet(
        times, np.zeros((1, n_steps + 1)), np.zeros((1, 2, n_steps + 1)), spec
    )
    config = SolverConfig.build(T=T, dt=dt, r=r, d=2)
    numeric = euler_solve(drift, still, config).x[0, -1]
    first, second = drift.components

    def rhs(_, state):
        x, mean = state
        return [float(first(x) + second(mean)), x / np.sqrt(r)]

    reference = solve_ivp(
        rhs, (0, T), [0.0, 0.0], method="DOP853", rtol=1e-11, atol=1e-13
    )
    return abs(numeric - reference.y[0, -1])


def test_deterministic_first_order_convergence():
    spec = DriftSpec(
        (make_smooth_bump(0.5, 1.0, 1.5), make_smooth_bump(0.3, 1.0, 1.5))
    )
    drift = mollify_drift(spec, 2)
    errors = [_terminal_error(drift, 1 / n) for n in (20, 40, 80, 160)]
    ratios = np.array(errors[:-1]) / np.array(errors[1:])
    assert np.all((ratios >= 1.7) & (ratios <= 2.3))


def test_config_checks():
    config = SolverConfig.build(T=0.5, dt=1 / 64, r=0.25, d=2)
    assert config.n_steps == 32
    assert config.K == 16
    with pytest.raises(GridAlignmentError):
        SolverConfig.build(T=0.5, dt=0.3, r=0.6)
    with pytest.raises(ArgumentError):
        SolverConfig.build(T=0.5, dt=1 / 64, r=0.5, eps=0.0)
    with pytest.raises(DimensionError):
        SolverConfig.build(T=0.5, dt=1 / 64, r=0.5, d=3, basis_size=2)


def test_theta_grid():
    np.testing.assert_allclose(
        theta_grid(0.5, 1 / 64, 5), [0, 0.125, 0.25, 0.375, 0.5]
    )
    np.testing.assert_allclose(theta_grid(1 / 64, 1 / 64), [0, 1 / 64])
    with pytest.raises(ArgumentError):
        theta_grid(0.5, 1 / 64, 1)


def test_trajectory_csv(tmp_path, step_drift, paths, solver_config):
    traj = euler_solve(step_drift, paths[:3], solver_config)
    traj.to_csv(tmp_path / "trajectories.csv", manifest="m")
    lines = (tmp_path / "trajectories.csv").read_text().splitlines()
    assert lines[0] == "# schema=trajectories.v1 manifest=m"
    assert lines[1] == "path_id,time,x,c_1,c_2"
    assert len(lines) == 2 + 3 * 33


def test_identical_levels_have_no_distance(step_drift, paths, solver_config):
    ensemble = mc_ensemble(
        [step_drift, step_drift, step_drift],
        paths[:200],
        solver_config,
        theta_count=4,
    )
    assert ensemble.labels == [4, 4, 4]
    assert all(row["mean"] == 0.0 for row in ensemble.distances())
    assert len(ensemble.distances()) == 3
    assert len(ensemble.successive_distances()) == 2
    assert ensemble.is_nonincreasing()


def test_ensemble_without_drift(zero_drift, paths, solver_config):
    ensemble = mc_ensemble(
        [zero_drift, zero_drift],
        paths[:50],
        solver_config,
        t=0.25,
        theta_count=8,
        labels=[1, 2],
    )
    deviation, _ = ensemble.malliavin_deviation()
    np.testing.assert_array_equal(deviation, 0.0)
    l2, _ = ensemble.malliavin_l2()
    np.testing.assert_allclose(l2, 0.25)
    pointwise, _ = ensemble.pointwise_deviation()
    assert pointwise.shape == (2, 8)
    table, _ = ensemble.difference_table()
    np.testing.assert_array_equal(table, 0.0)
    holder, _ = ensemble.holder_integral(0.2)
    np.testing.assert_array_equal(holder, 0.0)
    weights, _ = ensemble.weight_means()
    np.testing.assert_array_equal(weights, 1.0)


def test_ensemble_arguments(step_drift, zero_drift, paths, solver_config):
    with pytest.raises(ArgumentError):
        mc_ensemble([step_drift], paths[:5], solver_config)
    with pytest.raises(DimensionError):
        mc_ensemble([step_drift, zero_drift], [paths[:5]], solver_config)
    with pytest.raises(DimensionError):
        mc_ensemble(
            [step_drift, zero_drift], [paths[:5], paths[:6]], solver_config
        )
    plain = mc_ensemble(
        [step_drift, zero_drift], paths[:5], solver_config, theta_count=None
    )
    with pytest.raises(ArgumentError):
        plain.malliavin_l2()


def test_levels_must_share_their_noise(
    step_drift, zero_drift, paths, solver_config
):
    drifts = [step_drift, zero_drift]
    with pytest.raises(ArgumentError):
        mc_ensemble(drifts, [paths[:5], paths[5:10]], solver_config)
    listed = mc_ensemble(
        drifts, [paths[:5], paths[:5]], solver_config, theta_count=None
    )
    shared = mc_ensemble(drifts, paths[:5], solver_config, theta_count=None)
    np.testing.assert_array_equal(listed.x_t, shared.x_t)


def test_holder_integral_uses_trapezoid_cells():
    thetas = np.array([0.0, 0.25, 0.5])
    ensemble = EnsembleResult(
        [1],
        0.5,
        np.zeros((1, 2)),
        np.zeros((1, 2)),
        thetas,
        np.broadcast_to(thetas, (1, 2, 3)).copy(),
    )
    holder, se = ensemble.holder_integral(0.0)
    assert holder[0] == pytest.approx(0.046875, rel=1e-12)
    assert se[0] == 0.0


def test_chunking_does_not_change_results(
    step_drift, zero_drift, paths, solver_config
):
    drifts = [zero_drift, step_drift]
    whole = mc_ensemble(drifts, paths[:30], solver_config, theta_count=4)
    chunked = mc_ensemble(
        drifts, paths[:30], solver_config, theta_count=4, chunk_size=7
    )
    np.testing.assert_allclose(chunked.x_t, whole.x_t)
    np.testing.assert_allclose(chunked.variation, whole.variation)
    np.testing.assert_allclose(chunked.log_weights, whole.log_weights)


def test_ensemble_round_trip(
    tmp_path, step_drift, zero_drift, paths, solver_config
):
    ensemble = mc_ensemble(
        [zero_drift, step_drift], paths[:20], solver_config, theta_count=4
    )
    ensemble.to_disk(tmp_path / "ensemble")
    loaded = EnsembleResult.from_disk(tmp_path / "ensemble")
    np.testing.assert_array_equal(loaded.x_t, ensemble.x_t)
    np.testing.assert_array_equal(loaded.variation, ensemble.variation)
    assert loaded.labels == ensemble.labels
    ensemble.distances_to_csv(tmp_path / "distances.csv", manifest="x")
    lines = (tmp_path / "distances.csv").read_text().splitlines()
    assert lines[:2] == [
        "# schema=distances.v1 manifest=x",
        "level_a,level_b,mean,se",
    ]
    assert len(lines) == 3
