from dataclasses import replace
import warnings

import numpy as np
import pytest
from scipy import linalg

from culture_governance import error_model, estimator, numerical, simulate
from culture_governance.country_data import DIMENSIONS, INDICATORS, CountryPanel, ObservationGrid, frozen_array
from culture_governance.errors import DomainError, InputError
from culture_governance.estimator import DesignMatrices, ModelSpec, OptimizerSettings
from culture_governance.indicators import IndicatorPanel

SMALL = simulate.SimulationConfig(n_countries=15, n_periods=3, n_equations=2, n_regressors=2,
                                  true_lambda=(0.3, -0.2), true_phi=(0.6, 0.4),
                                  true_sigma=((1.0, 0.4), (0.4, 0.8)), seed=7)


def _spec(error_structure, equations=('VA', 'PV')):
    return ModelSpec(regressor_set='level_only', error_structure=error_structure, equations=equations)


@pytest.fixture(scope='module')
def small_fits():
    design, truth = simulate.simulate_panel(SMALL)
    results = {s: estimator.fit(design, truth.weights, _spec(s)) for s in error_model.ERROR_STRUCTURES}
    return design, truth, results


def _indicator_world(rng, n_countries=8, years=(2000, 2005, 2010)):
    codes = tuple('C{:02d}'.format(i) for i in range(n_countries))
    shape = (n_countries, len(years), len(DIMENSIONS))
    panel_indicators = IndicatorPanel(
        countries=codes,
        years=years,
        cli=frozen_array(rng.uniform(10, 100, size=shape)),
        cdi=frozen_array(rng.uniform(0, 30, size=shape)),
        own_scores=frozen_array(rng.uniform(10, 100, size=(n_countries, len(DIMENSIONS)))))
    wgi = rng.normal(size=(n_countries, len(years), len(INDICATORS)))
    panel = CountryPanel(codes, years, frozen_array(np.full((n_countries, len(years)), 1e6)), frozen_array(wgi))
    return panel_indicators, panel, ObservationGrid(codes, years)


@pytest.mark.parametrize('regressor_set, n_columns', [
    ('hofstede_only', 7), ('level_only', 7), ('level_and_diversity', 13)])
def test_regressor_columns(regressor_set, n_columns):
    names = estimator.regressor_names(regressor_set)
    assert len(names) == n_columns
    assert names[0] == 'const'


def test_design_columns_and_scale():
    rng = np.random.default_rng(0)
    panel_indicators, panel, grid = _indicator_world(rng, n_countries=16)
    design = estimator.assemble_design(panel_indicators, panel, ModelSpec('level_and_diversity'), grid)
    assert design.X.shape == (3, 16, 13)
    np.testing.assert_array_equal(design.X[:, :, 0], 1.0)
    np.testing.assert_allclose(design.X[1, 2, 1:7], panel_indicators.cli[2, 1] / 100.0)
    np.testing.assert_allclose(design.X[1, 2, 7:], panel_indicators.cdi[2, 1] / 100.0)
    np.testing.assert_allclose(design.y[1, 2], panel.wgi[2, 1])

    hofstede = estimator.assemble_design(panel_indicators, panel, ModelSpec('hofstede_only'), grid)
    # time-invariant own scores
    np.testing.assert_allclose(hofstede.X[0, :, 1:], hofstede.X[2, :, 1:])


def test_incomplete_cells_dropped_from_every_equation(caplog):
    rng = np.random.default_rng(1)
    panel_indicators, panel, grid = _indicator_world(rng, n_countries=12)
    wgi = np.array(panel.wgi)
    wgi[3, 1, 2] = np.nan
    panel = CountryPanel(panel.codes, panel.years, panel.population, frozen_array(wgi))
    design = estimator.assemble_design(panel_indicators, panel, ModelSpec('level_only'), grid)
    assert not design.observed[1, 3]
    assert design.n_obs == 12 * 3 - 1
    y, X = design.stacked()
    assert y.shape == (35, 6) and X.shape == (35, 7)
    assert np.all(np.isfinite(y))
    assert 'C03 2005' in caplog.text


def test_rank_deficiency_names_columns():
    rng = np.random.default_rng(2)
    panel_indicators, panel, grid = _indicator_world(rng)
    cli = np.array(panel_indicators.cli)
    cli[:, :, 1] = 2.0 * cli[:, :, 0]
    collinear = replace(panel_indicators, cli=frozen_array(cli))
    with pytest.raises(InputError, match='collinear columns') as info:
        estimator.assemble_design(collinear, panel, ModelSpec('level_only'), grid)
    assert 'pdi_level' in str(info.value) or 'idv_level' in str(info.value)


def test_too_few_observations():
    rng = np.random.default_rng(3)
    panel_indicators, panel, grid = _indicator_world(rng, n_countries=3, years=(2000, 2005))
    with pytest.raises(InputError, match='complete observations'):
        estimator.assemble_design(panel_indicators, panel, ModelSpec('level_and_diversity'), grid)


def test_unknown_equation():
    rng = np.random.default_rng(4)
    panel_indicators, panel, grid = _indicator_world(rng)
    with pytest.raises(InputError, match='XX'):
        estimator.assemble_design(panel_indicators, panel, ModelSpec(equations=('VA', 'XX')), grid)


@pytest.mark.parametrize('kwargs', [
    dict(regressor_set='everything'),
    dict(error_structure='garch'),
    dict(equations=()),
    dict(equations=('VA', 'VA')),
])
def test_invalid_model_spec(kwargs):
    with pytest.raises(InputError):
        ModelSpec(**kwargs)


@pytest.mark.parametrize('kwargs', [
    dict(max_iter=0), dict(gtol=0.0), dict(perturbed_phi=1.0), dict(regressor_scale=-1.0),
    dict(initial_condition='diffuse'),
])
def test_invalid_optimizer_settings(kwargs):
    with pytest.raises(InputError):
        OptimizerSettings(**kwargs)


def test_independent_is_equationwise_ols(small_fits):
    design, _, results = small_fits
    y, X = design.stacked()
    ols = np.linalg.lstsq(X, y, rcond=None)[0].T
    independent = results['independent']
    np.testing.assert_allclose(independent.coefficients, ols, atol=1e-8)
    residuals = y - X @ ols.T
    np.testing.assert_allclose(np.diag(independent.sigma), np.mean(residuals ** 2, axis=0), rtol=1e-10)
    assert independent.sigma[0, 1] == 0.0
    np.testing.assert_array_equal(independent.lam, 0.0)
    np.testing.assert_array_equal(independent.phi, 0.0)


def test_sur_with_common_regressors_is_ols(small_fits):
    _, _, results = small_fits
    np.testing.assert_allclose(results['sur'].coefficients, results['independent'].coefficients, atol=1e-8)
    assert results['sur'].sigma[0, 1] != 0.0


def test_restricted_variants_nest(small_fits):
    _, _, results = small_fits
    loglik = {s: r.loglik for s, r in results.items()}
    for restricted in ('spatial', 'serial', 'sur'):
        assert loglik[restricted] >= loglik['independent']
        assert loglik['all'] >= loglik[restricted]


@pytest.mark.slow
@pytest.mark.parametrize('seed', range(10))
def test_restricted_variants_nest_on_every_dataset(seed):
    design, truth = simulate.simulate_panel(replace(SMALL, seed=seed))
    loglik = {s: estimator.fit(design, truth.weights, _spec(s)).loglik for s in error_model.ERROR_STRUCTURES}
    for restricted in ('spatial', 'serial', 'sur'):
        assert loglik[restricted] >= loglik['independent'], (seed, restricted)
        assert loglik['all'] >= loglik[restricted], (seed, restricted)


def test_estimates_converge_with_finite_errors(small_fits):
    _, _, results = small_fits
    full = results['all']
    assert full.converged
    assert np.all(np.isfinite(full.std_errors)) and np.all(full.std_errors > 0)
    assert np.all(np.isfinite(full.lam_se)) and np.all(np.isfinite(full.phi_se))
    assert np.all(np.abs(full.lam) < 1) and np.all(np.abs(full.phi) < 1)
    assert full.n_params == 2 * 3 + 4 + 3
    assert full.n_obs == 15 * 3


def test_truth_is_not_better_than_the_estimate(small_fits):
    design, truth, results = small_fits
    at_truth = error_model.log_likelihood(truth.theta, truth.params, design, truth.weights)
    assert at_truth <= results['all'].loglik + 1e-8


def test_profile_agrees_with_full_likelihood(small_fits):
    design, truth, results = small_fits
    full = results['all']
    at_estimate = error_model.log_likelihood(full.coefficients, full.error_params(), design, truth.weights)
    assert at_estimate == pytest.approx(full.loglik, rel=1e-10)


def test_concentrated_gradient_vanishes_at_optimum(small_fits):
    design, truth, results = small_fits
    full = results['all']
    fitter = estimator.SpatialSurEstimator(design, truth.weights, _spec('all'))
    gradient = numerical.central_gradient(fitter.objective, fitter.pack_outer(full.lam, full.phi), rel_step=1e-5)
    assert np.max(np.abs(gradient)) < 1e-3


def test_full_likelihood_is_stationary_at_the_optimum(small_fits):
    design, truth, results = small_fits
    full = results['all']
    fitter = estimator.SpatialSurEstimator(design, truth.weights, _spec('all'))
    x = fitter.pack_full(full.coefficients, full.lam, full.phi, full.sigma)
    gradient = numerical.central_gradient(fitter.full_loglik, x, rel_step=1e-5)
    assert np.max(np.abs(gradient)) < 1e-4


def test_warm_start_never_lowers_the_likelihood(small_fits):
    design, truth, results = small_fits
    fitter = estimator.SpatialSurEstimator(design, truth.weights, _spec('all'))
    lam, phi, _, _ = fitter.optimize(warm_starts=[(truth.params.lam, truth.params.phi)])
    assert fitter.profile(lam, phi)[2] >= fitter.profile(truth.params.lam, truth.params.phi)[2] - 1e-10


def test_profile_stops_before_sigma_turns_singular(caplog, monkeypatch):
    # 12 observations for 15 coefficients
    cfg = simulate.SimulationConfig(n_countries=6, n_periods=2, n_equations=3, n_regressors=4, seed=3)
    design, truth = simulate.simulate_panel(cfg)
    fitter = estimator.SpatialSurEstimator(design, truth.weights, _spec('all', equations=design.equations))
    assert 'unbounded' in caplog.text

    sweeps = []
    solve = fitter._gls_coefficients
    monkeypatch.setattr(fitter, '_gls_coefficients', lambda *args: sweeps.append(1) or solve(*args))
    with warnings.catch_warnings():
        warnings.simplefilter('error', linalg.LinAlgWarning)
        theta, sigma, loglik = fitter.profile(np.array([0.1, 0.3, 0.5]), np.array([0.2, 0.4, 0.6]))
    assert np.isfinite(loglik)
    assert np.all(np.isfinite(theta))
    scale = np.sqrt(np.diag(sigma))
    assert np.linalg.cond(sigma / np.outer(scale, scale)) < fitter.SIGMA_COND
    assert sweeps


def test_near_singular_gls_system_falls_back_to_least_squares():
    design, truth = simulate.simulate_panel(replace(SMALL, n_regressors=1))
    fitter = estimator.SpatialSurEstimator(design, truth.weights, _spec('all'))
    x_tilde = np.ones((6, 2))
    x_tilde[:, 1] = 1.0 + 1e-13 * np.arange(6)
    y_tilde = np.column_stack([np.arange(6.0), -np.arange(6.0)])
    grams = [[x_tilde.T @ x_tilde] * 2] * 2
    moments = [[x_tilde.T @ y_tilde[:, l] for l in range(2)]] * 2
    with warnings.catch_warnings():
        warnings.simplefilter('error', linalg.LinAlgWarning)
        theta = fitter._gls_coefficients(np.array([[1.0, 0.3], [0.3, 1.0]]), grams, moments)
    assert theta.shape == (2, 2)
    assert np.all(np.isfinite(theta))


def test_column_scaling_rescales_coefficients(small_fits):
    design, truth, results = small_fits
    X = np.array(design.X)
    X[:, :, 1] *= 10.0
    scaled = estimator.fit(replace(design, X=X), truth.weights, _spec('spatial'))
    base = results['spatial']
    assert scaled.loglik == pytest.approx(base.loglik, abs=1e-6)
    np.testing.assert_allclose(scaled.lam, base.lam, atol=1e-4)
    np.testing.assert_allclose(scaled.coefficients[:, 1] * 10.0, base.coefficients[:, 1], rtol=1e-3, atol=1e-6)
    np.testing.assert_allclose(scaled.std_errors[:, 1] * 10.0, base.std_errors[:, 1], rtol=1e-4)
    np.testing.assert_allclose(scaled.p_values, base.p_values, rtol=0, atol=1e-6)


def test_equation_order_does_not_matter(small_fits):
    design, truth, results = small_fits
    swapped = replace(design, y=design.y[:, :, ::-1], equations=design.equations[::-1])
    result = estimator.fit(swapped, truth.weights, _spec('all', equations=swapped.equations))
    base = results['all']
    assert result.loglik == pytest.approx(base.loglik, abs=1e-5)
    np.testing.assert_allclose(result.lam, base.lam[::-1], atol=1e-3)
    np.testing.assert_allclose(result.phi, base.phi[::-1], atol=1e-3)
    np.testing.assert_allclose(result.coefficients, base.coefficients[::-1], atol=1e-2)


def test_fit_statistics(small_fits):
    design, _, results = small_fits
    stats = estimator.fit_statistics(results['all'], design)
    assert stats.r2.shape == (2,)
    assert np.all(stats.r2 <= 1.0)
    assert stats.r2_mean == pytest.approx(stats.r2.mean())
    np.testing.assert_array_equal(np.diag(stats.residual_corr), 1.0)
    assert np.all(np.abs(stats.residual_corr) <= 1.0)
    np.testing.assert_allclose(stats.residual_cov, stats.residual_cov.T)

    perfect = estimator.fit_statistics(replace(results['all'], residuals=np.zeros_like(results['all'].residuals)),
                                       design)
    np.testing.assert_allclose(perfect.r2, 1.0)
    assert perfect.r2_pooled == pytest.approx(1.0)


def test_intercept_only_r2_is_zero(small_fits):
    design, truth, _ = small_fits
    intercept = replace(design, X=design.X[:, :, :1], regressors=('const',))
    result = estimator.fit(intercept, truth.weights, _spec('independent'))
    stats = estimator.fit_statistics(result, intercept)
    np.testing.assert_allclose(stats.r2, 0.0, atol=1e-12)


def test_zero_variance_equation(small_fits):
    design, _, results = small_fits
    y = np.array(design.y)
    y[:, :, 1] = 0.5
    with pytest.raises(DomainError, match='PV'):
        estimator.fit_statistics(results['independent'], replace(design, y=y))


def _placeholder_result(error_structure):
    names = estimator.regressor_names('level_and_diversity')
    m, p = len(INDICATORS), len(names)
    half = np.full((m, p), 0.5)
    return estimator.FitResult(
        spec=ModelSpec('level_and_diversity', error_structure),
        equations=INDICATORS, regressors=names,
        coefficients=np.zeros((m, p)), std_errors=np.ones((m, p)), p_values=half,
        lam=np.zeros(m), lam_se=np.full(m, np.nan), lam_p=np.full(m, np.nan),
        phi=np.zeros(m), phi_se=np.full(m, np.nan), phi_p=np.full(m, np.nan),
        sigma=np.eye(m), loglik=-1.0, n_obs=100, n_params=1, convergence='converged')


@pytest.mark.parametrize('error_structure, n_rows', [
    ('independent', 13 * 6), ('sur', 13 * 6), ('spatial', 13 * 6 + 6), ('serial', 13 * 6 + 6), ('all', 13 * 6 + 12)])
def test_coefficient_rows(error_structure, n_rows):
    rows = _placeholder_result(error_structure).coefficient_rows()
    assert len(rows) == n_rows
    assert rows[0]['equation'] == 'VA' and rows[0]['regressor'] == 'const'
    assert all(set(r) == {'equation', 'regressor', 'estimate', 'std_error', 'p_value', 'stars'} for r in rows)


def test_to_dict_has_no_nan():
    document = _placeholder_result('all').to_dict()
    assert document['lambda_std_errors'] == [None] * 6
    assert document['error_structure'] == 'all'
    assert len(document['coefficients']) == 6


def test_two_sided_p():
    assert estimator.two_sided_p(1.959963984540054, 1.0) == pytest.approx(0.05)
    assert np.isnan(estimator.two_sided_p(1.0, np.nan))
