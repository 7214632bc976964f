from dataclasses import replace
import json

import numpy as np
import pytest

from culture_governance import error_model, estimator, input_pipeline, simulate
from culture_governance.errors import DomainError, InputError
from culture_governance.simulate import SimulationConfig


def test_same_seed_same_panel(small_simulation):
    first, truth_first = simulate.simulate_panel(small_simulation)
    second, truth_second = simulate.simulate_panel(small_simulation)
    np.testing.assert_array_equal(first.y, second.y)
    np.testing.assert_array_equal(first.X, second.X)
    np.testing.assert_array_equal(truth_first.weights.matrices, truth_second.weights.matrices)
    other, _ = simulate.simulate_panel(small_simulation, replicate=1)
    assert not np.array_equal(first.y, other.y)


def test_panel_shapes(small_simulation):
    design, truth = simulate.simulate_panel(small_simulation)
    assert design.y.shape == (3, 15, 2)
    assert design.X.shape == (3, 15, 3)
    assert design.equations == ('VA', 'PV')
    assert truth.theta.shape == (2, 3)
    assert design.n_obs == 45
    simulate.check_weights(truth.weights.matrices)


@pytest.mark.parametrize('kwargs, message', [
    (dict(true_lambda=1.5), 'true lambda must lie strictly inside'),
    (dict(true_phi=-1.0), 'true phi must lie strictly inside'),
    (dict(n_countries=0), 'n_countries'),
    (dict(row_sum=1.2), 'row sum'),
    (dict(true_sigma=((1.0, 2.0), (2.0, 1.0)), n_equations=2), 'invalid true error parameters'),
    (dict(true_lambda=(0.1, 0.2), n_equations=3), 'one value or 3 values'),
    (dict(weight_scheme='from-file'), 'weights path'),
    (dict(regressor_set='all_of_them'), 'regressor set'),
])
def test_invalid_configuration(kwargs, message):
    with pytest.raises(InputError, match=message):
        SimulationConfig(**kwargs).validate()


def test_second_period_variance_of_pure_serial_errors():
    # no spatial term, one country: u2 = phi u1 + e2
    params = error_model.ErrorParams(np.array([0.0]), np.array([0.7]), np.array([[2.0]]))
    matrices = np.zeros([2, 1, 1])
    u = simulate.draw_errors(params, matrices, np.random.default_rng(0), size=200000)
    variance = np.var(u[:, 1, 0, 0])
    assert variance == pytest.approx(0.7 ** 2 * 2.0 + 2.0, rel=0.02)


@pytest.mark.parametrize('initial_condition', error_model.INITIAL_CONDITIONS)
def test_draws_match_implied_covariance(initial_condition):
    cfg = SimulationConfig(n_countries=3, n_periods=2, n_equations=2, n_regressors=1,
                           true_lambda=(0.5, -0.4), true_phi=(0.6, 0.3),
                           true_sigma=((1.0, 0.3), (0.3, 0.5)), row_sum=0.9, density=0.6,
                           initial_condition=initial_condition, seed=5)
    assert simulate.empirical_covariance_check(cfg, 100000) < 0.05


def test_covariance_check_rejects_large_panels():
    with pytest.raises(InputError, match='N\\*T\\*M'):
        simulate.empirical_covariance_check(SimulationConfig(n_countries=5, n_periods=3, n_equations=1), 10)


def test_tiny_sigma_gives_tiny_errors():
    cfg = SimulationConfig(n_countries=10, n_periods=3, n_equations=1, n_regressors=1,
                           true_sigma=((1e-12,),), true_theta=((1.0, 2.0),), seed=3)
    design, truth = simulate.simulate_panel(cfg)
    mean = np.einsum('tnp,mp->tnm', design.X, truth.theta)
    assert np.max(np.abs(design.y - mean)) < 1e-4


def test_strong_spatial_dependence_stays_finite():
    cfg = SimulationConfig(n_countries=30, n_periods=4, n_equations=2, n_regressors=2,
                           true_lambda=0.9, true_phi=0.5, row_sum=1.0, seed=9)
    design, _ = simulate.simulate_panel(cfg)
    assert np.all(np.isfinite(design.y))


def test_spectral_radius_at_one_is_rejected():
    params = error_model.ErrorParams(np.array([0.99]), np.array([0.0]), np.eye(1))
    w = np.array([[[0.0, 1.0], [1.0, 0.0]]]) * 1.02
    with pytest.raises(DomainError, match='spectral radius'):
        simulate._spectral_check(params, w)


def test_weights_round_trip_through_csv(tmp_path, random_weights_factory):
    codes = simulate.synthetic_codes(4)
    years = simulate.synthetic_years(2)
    weights = random_weights_factory(codes, years, np.random.default_rng(2), row_sum=0.7, density=1.0)
    for year in years:
        weights.to_frame(year).to_csv(str(tmp_path / 'weights_{}.csv'.format(year)), index=False,
                                      float_format='%.17g')
    loaded = simulate.load_weights_csv(str(tmp_path))
    assert loaded.countries == codes and loaded.years == years
    np.testing.assert_array_equal(loaded.matrices, weights.matrices)

    cfg = SimulationConfig(n_countries=4, n_periods=2, n_equations=1, n_regressors=1,
                           weight_scheme='from-file', weights_path=str(tmp_path))
    design, truth = simulate.simulate_panel(cfg)
    np.testing.assert_array_equal(truth.weights.matrices, weights.matrices)

    wrong = SimulationConfig(n_countries=5, n_periods=2, n_equations=1, n_regressors=1,
                             weight_scheme='from-file', weights_path=str(tmp_path))
    with pytest.raises(InputError, match='covers 4 countries'):
        simulate.simulate_panel(wrong)


def test_weights_file_with_bad_row_sum(write_csv):
    path = write_csv('weights_2000.csv', 'year,dest,origin,weight',
                     [(2000, 'AAA', 'BBB', 0.7), (2000, 'AAA', 'CCC', 0.6)])
    with pytest.raises(DomainError, match='sum above one'):
        simulate.load_weights_csv(path)


def test_synthetic_files_parse_without_exclusions(synthetic_files):
    inputs = input_pipeline.InputPipeline(**{k: v for k, v in synthetic_files.items() if k != 'truth'})
    assert len(inputs.exclusion_report()) == 0
    assert len(inputs.grid.countries) == 12
    assert inputs.grid.years == (2000, 2005, 2010)
    with open(synthetic_files['truth']) as f:
        truth = json.load(f)
    assert truth['seed'] == 11
    assert np.shape(truth['theta']) == (6, 13)
    assert truth['regressor_set'] == 'level_and_diversity'


def test_synthetic_world_is_reproducible(tmp_path):
    cfg = SimulationConfig(n_countries=6, n_periods=2, n_regressors=6, seed=4)
    first = simulate.SyntheticWorld(cfg).write(str(tmp_path / 'a'))
    second = simulate.SyntheticWorld(cfg).write(str(tmp_path / 'b'))
    for name in ('registry', 'hofstede', 'migrants', 'population', 'wgi', 'truth'):
        with open(first[name], 'rb') as f, open(second[name], 'rb') as g:
            assert f.read() == g.read()


def test_synthetic_world_needs_six_equations():
    with pytest.raises(InputError, match='6 equations'):
        simulate.SyntheticWorld(SimulationConfig(n_equations=2))


def test_recovery_tables():
    cfg = SimulationConfig(n_countries=20, n_periods=3, n_equations=2, n_regressors=1,
                           true_lambda=0.2, true_phi=0.5, true_sigma=((0.5, 0.1), (0.1, 0.4)), seed=1)
    detail, summary = simulate.run_recovery(cfg, replications=2)
    # 2 equations x (2 coefficients + lambda + phi) per replicate
    assert len(detail) == 2 * 2 * 4
    assert set(summary.parameter) == {'theta', 'lambda', 'phi'}
    assert np.all(summary.replications == 2)
    assert np.all((summary.coverage >= 0) & (summary.coverage <= 1))


def test_recovery_uses_the_configured_regressor_set():
    cfg = SimulationConfig(n_countries=20, n_periods=3, n_equations=2, n_regressors=1,
                           true_lambda=0.2, true_phi=0.5, true_sigma=((0.5, 0.1), (0.1, 0.4)), seed=1)
    detail, _ = simulate.run_recovery(cfg, replications=1, error_structure='sur')
    assert set(detail.regressor_set) == {'level_only'}
    detail, _ = simulate.run_recovery(replace(cfg, regressor_set='hofstede_only'), replications=1,
                                      error_structure='sur')
    assert set(detail.regressor_set) == {'hofstede_only'}


def test_synthetic_world_regressor_set(tmp_path):
    cfg = SimulationConfig(n_countries=6, n_periods=2, n_regressors=6, regressor_set='hofstede_only', seed=4)
    paths = simulate.SyntheticWorld(cfg).write(str(tmp_path))
    with open(paths['truth']) as f:
        assert json.load(f)['regressor_set'] == 'hofstede_only'
    with pytest.raises(InputError, match='needs 12 regressors'):
        simulate.SyntheticWorld(replace(cfg, regressor_set='level_and_diversity'))


@pytest.mark.slow
def test_parameters_recovered_on_large_panels():
    cfg = SimulationConfig(n_countries=100, n_periods=5, n_equations=2, n_regressors=2,
                           true_lambda=(0.15, 0.10), true_phi=(0.8, 0.78),
                           true_sigma=((0.1, 0.05), (0.05, 0.1)), seed=2024)
    detail, _ = simulate.run_recovery(cfg, replications=20)
    phi = detail[detail.parameter == 'phi']
    lam = detail[detail.parameter == 'lambda']
    theta = detail[detail.parameter == 'theta']
    assert theta.groupby(['equation', 'regressor']).ngroups == 2 * 3
    for equation in ('VA', 'PV'):
        assert phi[phi.equation == equation].covered.sum() >= 18
        assert lam[lam.equation == equation].covered.sum() >= 18
    for (equation, regressor), rows in theta.groupby(['equation', 'regressor']):
        assert len(rows) == 20
        assert rows.covered.sum() >= 18, (equation, regressor)
    assert (phi.estimate - phi.truth).abs().mean() < 0.05
    assert np.all(detail.convergence.isin(['converged', 'max-iter', 'boundary']))


def test_fitting_recovers_clear_serial_dependence():
    cfg = SimulationConfig(n_countries=60, n_periods=5, n_equations=1, n_regressors=1,
                           true_lambda=0.0, true_phi=0.7, true_sigma=((0.2,),), seed=12)
    design, truth = simulate.simulate_panel(cfg)
    spec = estimator.ModelSpec(regressor_set='level_only', error_structure='serial', equations=design.equations)
    result = estimator.fit(design, truth.weights, spec)
    assert abs(result.phi[0] - 0.7) < 4 * result.phi_se[0]
