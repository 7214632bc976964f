"""
    Synthetic panels drawn from the governance regression's own error
    process, used to check the likelihood and the estimator and to build
    complete input datasets for end-to-end runs.
"""
from . import error_model
from . import estimator
from . import imputation
from . import indicators
from . import input_pipeline
from . import utils
from .country_data import (DIMENSIONS, INDICATORS, CountryPanel, CountryRegistry, HofstedeTable,
                           MigrantStockTensor, ObservationGrid, frozen_array)
from .errors import DomainError, InputError

from dataclasses import dataclass
import glob
from itertools import product
import json
import logging
import os
from string import ascii_uppercase

import numpy as np
import pandas as pd
from scipy import linalg

logger = logging.getLogger(__name__)

WEIGHT_SCHEMES = ('random-row-substochastic', 'from-file')
WEIGHT_COLUMNS = ('year', 'dest', 'origin', 'weight')
FIRST_YEAR = 2000
YEAR_STEP = 5


def default_sigma(n_equations):
    return 0.1 * (0.5 * np.eye(n_equations) + 0.5 * np.ones([n_equations, n_equations]))


def rng_for(seed, replicate=0):
    """independent stream per (seed, replicate)"""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replicate,)))


def synthetic_codes(n):
    if n > 26 * 26:
        raise InputError('at most {} synthetic countries, got {}'.format(26 * 26, n))
    return tuple('X' + a + b for a, b in product(ascii_uppercase, repeat=2))[:n]


def synthetic_years(n_periods):
    return tuple(FIRST_YEAR + YEAR_STEP * t for t in range(n_periods))


@dataclass(frozen=True)
class SimulationConfig:
    n_countries: int = 40
    n_periods: int = 5
    n_equations: int = 6
    n_regressors: int = 12
    true_theta: tuple = None
    true_lambda: tuple = 0.15
    true_phi: tuple = 0.8
    true_sigma: tuple = None
    weight_scheme: str = 'random-row-substochastic'
    weights_path: str = None
    row_sum: float = 0.8
    density: float = 0.2
    initial_condition: str = 'zero'
    regressor_set: str = None
    seed: int = 0

    def validate(self):
        """raises before anything is drawn"""
        for name in ('n_countries', 'n_periods', 'n_equations', 'n_regressors'):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise InputError('{} must be a positive integer, got {!r}'.format(name, value))
        if self.weight_scheme not in WEIGHT_SCHEMES:
            raise InputError('weight scheme must be one of {}, got {!r}'.format(WEIGHT_SCHEMES, self.weight_scheme))
        if self.weight_scheme == 'from-file' and not self.weights_path:
            raise InputError('weight scheme from-file needs a weights path')
        if not 0 < self.row_sum <= 1:
            raise InputError('row sum must lie in (0, 1], got {}'.format(self.row_sum))
        if not 0 < self.density <= 1:
            raise InputError('density must lie in (0, 1], got {}'.format(self.density))
        if self.initial_condition not in error_model.INITIAL_CONDITIONS:
            raise InputError('initial condition must be one of {}'.format(error_model.INITIAL_CONDITIONS))
        if self.regressor_set is not None and self.regressor_set not in estimator.REGRESSOR_SETS:
            raise InputError('regressor set must be one of {}, got {!r}'.format(estimator.REGRESSOR_SETS, self.regressor_set))
        if not 0 <= int(self.seed) < 2 ** 64:
            raise InputError('seed must be a 64-bit unsigned integer, got {}'.format(self.seed))

        lam, phi = self.lambdas(), self.phis()
        for name, values in (('lambda', lam), ('phi', phi)):
            if values.shape != (self.n_equations,):
                raise InputError('true {} needs one value or {} values'.format(name, self.n_equations))
            if np.any(np.abs(values) >= 1):
                raise InputError('true {} must lie strictly inside (-1, 1), got {}'.format(
                    name, ', '.join('{:g}'.format(v) for v in values)))
        sigma = self.sigma()
        if sigma.shape != (self.n_equations, self.n_equations):
            raise InputError('true sigma must be {0} x {0}'.format(self.n_equations))
        try:
            error_model.ErrorParams(lam, phi, sigma).validate()
        except DomainError as exc:
            raise InputError('invalid true error parameters: {}'.format(exc))
        if self.true_theta is not None:
            if np.shape(self.true_theta) != (self.n_equations, self.n_regressors + 1):
                raise InputError('true theta must be {} x {} (intercept first)'.format(
                    self.n_equations, self.n_regressors + 1))
        return self

    def _per_equation(self, value):
        values = np.atleast_1d(np.asarray(value, dtype=float))
        if values.size == 1:
            return np.full(self.n_equations, values[0])
        return values

    def regressors(self):
        """regressor set the fits are labelled with, derived from n_regressors when unset"""
        if self.regressor_set is not None:
            return self.regressor_set
        return 'level_and_diversity' if self.n_regressors == 2 * len(DIMENSIONS) else 'level_only'

    def lambdas(self):
        return self._per_equation(self.true_lambda)

    def phis(self):
        return self._per_equation(self.true_phi)

    def sigma(self):
        if self.true_sigma is None:
            return default_sigma(self.n_equations)
        return np.asarray(self.true_sigma, dtype=float)

    def theta(self, rng):
        """the configured theta, or one drawn from rng"""
        if self.true_theta is not None:
            return np.asarray(self.true_theta, dtype=float)
        intercept = rng.normal(0.0, 0.5, size=(self.n_equations, 1))
        slopes = rng.normal(0.0, 1.0, size=(self.n_equations, self.n_regressors))
        return np.hstack([intercept, slopes])

    def error_params(self):
        return error_model.ErrorParams(self.lambdas(), self.phis(), self.sigma())


@dataclass(frozen=True, eq=False)
class SimulationTruth:
    theta: np.ndarray
    params: error_model.ErrorParams
    weights: indicators.SpatialWeights
    seed: int
    replicate: int = 0

    def to_dict(self):
        return {
            'seed': int(self.seed),
            'replicate': int(self.replicate),
            'theta': np.asarray(self.theta).tolist(),
            'lambda': np.asarray(self.params.lam).tolist(),
            'phi': np.asarray(self.params.phi).tolist(),
            'sigma': np.asarray(self.params.sigma).tolist(),
        }


def random_weights(n_countries, n_periods, rng, row_sum=0.8, density=0.2):
    """
        nonnegative rows with zero diagonal, each scaled to row_sum. every
        row gets at least one neighbour.
    """
    matrices = np.zeros([n_periods, n_countries, n_countries])
    if n_countries < 2:
        return matrices
    for t in range(n_periods):
        w = rng.uniform(size=(n_countries, n_countries)) * (rng.uniform(size=(n_countries, n_countries)) < density)
        np.fill_diagonal(w, 0.0)
        for i in np.flatnonzero(w.sum(axis=1) == 0):
            j = (i + 1 + rng.integers(n_countries - 1)) % n_countries
            w[i, j] = 1.0
        matrices[t] = row_sum * w / w.sum(axis=1, keepdims=True)
    return matrices


def check_weights(matrices):
    if np.any(matrices < 0):
        raise DomainError('spatial weights must be nonnegative')
    for t, w in enumerate(matrices):
        if np.any(np.diagonal(w) != 0):
            raise DomainError('spatial weights of period {} have a nonzero diagonal'.format(t))
        if np.any(w.sum(axis=1) > 1 + 1e-12):
            raise DomainError('spatial weight rows of period {} sum above one'.format(t))


def load_weights_csv(path):
    """
        reads the year,dest,origin,weight export back into SpatialWeights.
        path is one csv or a directory holding weights_<year>.csv files.
    """
    if os.path.isdir(path):
        paths = sorted(glob.glob(os.path.join(path, 'weights_*.csv')))
        if not paths:
            raise InputError('no weights_<year>.csv files in {}'.format(path))
    else:
        paths = [path]
    rows = []
    for csv_path in paths:
        frame = input_pipeline.read_table(csv_path, WEIGHT_COLUMNS, 'weights')
        for row_number, row in enumerate(frame.itertuples(index=False)):
            year = input_pipeline.parse_year(row.year, csv_path, row_number)
            try:
                weight = float(row.weight)
            except ValueError:
                raise InputError('{} line {}: weight {!r} is not a number'.format(
                    csv_path, row_number + 2, row.weight))
            rows.append((year, row.dest, row.origin, weight))
    if not rows:
        raise InputError('weights file {} has no entries'.format(path))

    countries = tuple(sorted({r[1] for r in rows} | {r[2] for r in rows}))
    years = tuple(sorted({r[0] for r in rows}))
    index = {c: i for i, c in enumerate(countries)}
    matrices = np.zeros([len(years), len(countries), len(countries)])
    for year, dest, origin, weight in rows:
        matrices[years.index(year), index[dest], index[origin]] = weight
    check_weights(matrices)
    logger.info('Loaded weights for %d countries and %d years from %s', len(countries), len(years), path)
    return indicators.SpatialWeights(countries, years, frozen_array(matrices))


def equation_names(n_equations):
    if n_equations <= len(INDICATORS):
        return INDICATORS[:n_equations]
    return tuple('eq{}'.format(j + 1) for j in range(n_equations))


def draw_errors(params, matrices, rng, initial_condition='zero', size=None):
    """
        u[..., t, i, j] from the forward recursion
        u_t = (I - lam W_t)^-1 (phi u_t-1 + e_t), u before the first period 0.
        size prepends independent draws.
    """
    lam, phi = np.asarray(params.lam), np.asarray(params.phi)
    n_periods, n_countries = matrices.shape[0], matrices.shape[1]
    m = len(lam)
    lead = () if size is None else (size,)
    chol = error_model.cholesky_factor(np.asarray(params.sigma, dtype=float))
    shocks = rng.standard_normal(lead + (n_periods, n_countries, m)) @ chol.T

    u = np.zeros(lead + (n_periods, n_countries, m))
    for t in range(n_periods):
        for j in range(m):
            rhs = shocks[..., t, :, j]
            if t > 0:
                rhs = rhs + phi[j] * u[..., t - 1, :, j]
            elif initial_condition == 'stationary':
                rhs = rhs / np.sqrt(1.0 - phi[j] ** 2)
            system = np.eye(n_countries) - lam[j] * matrices[t]
            u[..., t, :, j] = linalg.solve(system, rhs.T).T if rhs.ndim > 1 else linalg.solve(system, rhs)
    return u


def _spectral_check(params, matrices):
    for j, lam in enumerate(np.asarray(params.lam)):
        for t, w in enumerate(matrices):
            radius = np.max(np.abs(np.linalg.eigvals(lam * w))) if w.size else 0.0
            if not radius < 1:
                raise DomainError('spectral radius {:.4f} of lambda W in equation {} period {} is not below 1'.format(
                    radius, j, t))


def simulate_panel(cfg, replicate=0):
    """
        draws (X, u) and returns the design with y = X theta + u and the
        true parameters. reproducible from (cfg.seed, replicate).

        output:
            DesignMatrices, SimulationTruth
    """
    cfg.validate()
    rng = rng_for(cfg.seed, replicate)
    if cfg.weight_scheme == 'from-file':
        weights = load_weights_csv(cfg.weights_path)
        if len(weights.countries) != cfg.n_countries or len(weights.years) != cfg.n_periods:
            raise InputError('weights file covers {} countries and {} years, config asks for {} and {}'.format(
                len(weights.countries), len(weights.years), cfg.n_countries, cfg.n_periods))
    else:
        matrices = random_weights(cfg.n_countries, cfg.n_periods, rng, cfg.row_sum, cfg.density)
        weights = indicators.SpatialWeights(synthetic_codes(cfg.n_countries), synthetic_years(cfg.n_periods),
                                            frozen_array(matrices))
    params = cfg.error_params()
    _spectral_check(params, weights.matrices)

    theta = cfg.theta(rng)
    X = np.concatenate([np.ones([cfg.n_periods, cfg.n_countries, 1]),
                        rng.uniform(size=(cfg.n_periods, cfg.n_countries, cfg.n_regressors))], axis=2)
    u = draw_errors(params, weights.matrices, rng, cfg.initial_condition)
    y = np.einsum('tnp,mp->tnm', X, theta) + u

    design = estimator.DesignMatrices(
        countries=weights.countries,
        years=weights.years,
        equations=equation_names(cfg.n_equations),
        regressors=('const',) + tuple('x{}'.format(r + 1) for r in range(cfg.n_regressors)),
        y=y,
        X=X,
        observed=np.ones([cfg.n_periods, cfg.n_countries], dtype=bool),
        regressor_set='simulated')
    return design, SimulationTruth(theta, params, weights, cfg.seed, replicate)


def empirical_covariance_check(cfg, n_draws):
    """
        max over entries of |S_ab - C_ab| / sqrt(C_aa C_bb) between the
        Monte-Carlo covariance S of the stacked errors and the covariance C
        implied by the innovation map
    """
    cfg.validate()
    if cfg.n_countries * cfg.n_periods * cfg.n_equations > 12:
        raise InputError('covariance check needs N*T*M <= 12, got {}'.format(
            cfg.n_countries * cfg.n_periods * cfg.n_equations))
    if n_draws < 2:
        raise InputError('n_draws must be at least 2')
    rng = rng_for(cfg.seed, 0)
    matrices = random_weights(cfg.n_countries, cfg.n_periods, rng, cfg.row_sum, cfg.density)
    params = cfg.error_params()
    _spectral_check(params, matrices)

    draws = draw_errors(params, matrices, rng, cfg.initial_condition, size=n_draws).reshape(n_draws, -1)
    empirical = draws.T @ draws / n_draws
    implied = error_model.dense_error_covariance(params.lam, params.phi, params.sigma, matrices,
                                                 cfg.initial_condition)
    scale = np.sqrt(np.outer(np.diag(implied), np.diag(implied)))
    deviation = float(np.max(np.abs(empirical - implied) / scale))
    logger.info('Covariance check over %d draws: max relative deviation %.4f', n_draws, deviation)
    return deviation


class SyntheticWorld:
    """
        A complete set of input files whose governance scores follow the
        regression on the indicators the pipeline itself computes from the
        other files. Needs six equations and six or twelve regressors.
    """
    OTHER_SHARE = 0.05

    def __init__(self, cfg):
        cfg.validate()
        if cfg.n_equations != len(INDICATORS):
            raise InputError('synthetic datasets need {} equations, got {}'.format(len(INDICATORS), cfg.n_equations))
        if cfg.n_regressors not in (len(DIMENSIONS), 2 * len(DIMENSIONS)):
            raise InputError('synthetic datasets need {} or {} regressors, got {}'.format(
                len(DIMENSIONS), 2 * len(DIMENSIONS), cfg.n_regressors))
        if cfg.weight_scheme != 'random-row-substochastic':
            raise InputError('synthetic datasets draw their own migration, weight scheme must be random')
        if cfg.n_countries < 2:
            raise InputError('synthetic datasets need at least two countries')
        self.cfg = cfg
        self.regressor_set = cfg.regressors()
        wanted = 2 * len(DIMENSIONS) if self.regressor_set == 'level_and_diversity' else len(DIMENSIONS)
        if cfg.n_regressors != wanted:
            raise InputError('regressor set {} needs {} regressors, got {}'.format(
                self.regressor_set, wanted, cfg.n_regressors))
        self.rng = rng_for(cfg.seed, 0)
        self.codes = synthetic_codes(cfg.n_countries)
        self.years = synthetic_years(cfg.n_periods)
        self._draw_inputs()
        self._draw_governance()

    def _draw_inputs(self):
        n, n_periods, rng = self.cfg.n_countries, self.cfg.n_periods, self.rng
        self.latitudes = np.round(rng.uniform(-60.0, 70.0, size=n), 4)
        self.longitudes = np.round(rng.uniform(-180.0, 180.0, size=n), 4)
        self.scores = rng.integers(10, 101, size=(n, len(DIMENSIONS))).astype(float)
        self.population = rng.integers(1_000_000, 100_000_000, size=(n, n_periods)).astype(float)

        pattern = random_weights(n, n_periods, rng, 1.0, self.cfg.density)
        foreign_share = rng.uniform(0.02, 0.3, size=(n, n_periods))
        self.counts = np.zeros([n, n_periods, n])
        self.other = np.zeros([n, n_periods])
        for t in range(n_periods):
            foreign = np.floor(foreign_share[:, t] * self.population[:, t])
            self.other[:, t] = np.floor(self.OTHER_SHARE * foreign) * (rng.uniform(size=n) < 0.3)
            self.counts[:, t, :] = np.floor((foreign - self.other[:, t])[:, None] * pattern[t])
            native = self.population[:, t] - self.counts[:, t, :].sum(axis=1) - self.other[:, t]
            self.counts[np.arange(n), t, np.arange(n)] = native

    def _draw_governance(self):
        cfg = self.cfg
        registry = CountryRegistry(self.codes, tuple('Synthetic {}'.format(c) for c in self.codes),
                                   frozen_array(self.latitudes), frozen_array(self.longitudes))
        self.registry = registry
        hofstede = HofstedeTable(self.codes, frozen_array(self.scores))
        tensor = MigrantStockTensor(
            codes=self.codes,
            years=self.years,
            counts=frozen_array(self.counts),
            unknown_origin=frozen_array(self.other),
            covered=frozen_array(np.ones([cfg.n_countries, cfg.n_periods], dtype=bool), dtype=bool))
        panel = CountryPanel(
            codes=self.codes,
            years=self.years,
            population=frozen_array(self.population),
            wgi=frozen_array(np.zeros([cfg.n_countries, cfg.n_periods, len(INDICATORS)])))
        grid = ObservationGrid(self.codes, self.years)

        tensor = imputation.redistribute_unknown(tensor)
        panel_indicators = indicators.compute_cli(tensor, hofstede, panel, grid)
        panel_indicators = indicators.compute_cdi(tensor, hofstede, panel, panel_indicators, grid)
        self.weights = indicators.build_weights(tensor, panel, grid)
        params = cfg.error_params()
        _spectral_check(params, self.weights.matrices)

        X = estimator.design_regressors(panel_indicators, self.regressor_set)
        self.theta = cfg.theta(self.rng)
        u = draw_errors(params, self.weights.matrices, self.rng, cfg.initial_condition)
        self.wgi = np.einsum('tnp,mp->tnm', X, self.theta) + u
        self.truth = SimulationTruth(self.theta, params, self.weights, cfg.seed)

    def frames(self):
        """the five input tables in their file formats"""
        registry = pd.DataFrame({'code': self.codes, 'name': self.registry.names,
                                 'lat': self.latitudes, 'lon': self.longitudes},
                                columns=list(input_pipeline.REGISTRY_COLUMNS))
        hofstede = pd.DataFrame(self.scores.astype(int), columns=[d.lower() for d in DIMENSIONS])
        hofstede.insert(0, 'code', self.codes)

        migrants = []
        for d, dest in enumerate(self.codes):
            for t, year in enumerate(self.years):
                for o, origin in enumerate(self.codes):
                    if self.counts[d, t, o] > 0:
                        migrants.append((dest, year, origin, int(self.counts[d, t, o])))
                if self.other[d, t] > 0:
                    migrants.append((dest, year, input_pipeline.UNKNOWN_ORIGIN, int(self.other[d, t])))
        migrants = pd.DataFrame(migrants, columns=list(input_pipeline.MIGRANT_COLUMNS))

        population = pd.DataFrame([(code, year, int(self.population[i, t]))
                                   for i, code in enumerate(self.codes) for t, year in enumerate(self.years)],
                                  columns=list(input_pipeline.POPULATION_COLUMNS))
        wgi = pd.DataFrame([(code, year) + tuple(self.wgi[t, i])
                            for i, code in enumerate(self.codes) for t, year in enumerate(self.years)],
                           columns=list(input_pipeline.WGI_COLUMNS))
        return {'registry': registry, 'hofstede': hofstede, 'migrants': migrants,
                'population': population, 'wgi': wgi}

    def write(self, directory):
        """writes <name>.csv for the five inputs plus truth.json, returns the paths"""
        os.makedirs(directory, exist_ok=True)
        paths = {}
        for name, frame in self.frames().items():
            paths[name] = os.path.join(directory, '{}.csv'.format(name))
            frame.to_csv(paths[name], index=False, float_format='%.17g', lineterminator='\n')
        truth = self.truth.to_dict()
        truth['regressor_set'] = self.regressor_set
        truth['initial_condition'] = self.cfg.initial_condition
        paths['truth'] = os.path.join(directory, 'truth.json')
        with open(paths['truth'], 'w') as f:
            json.dump(truth, f, indent=2, sort_keys=True)
            f.write('\n')
        logger.info('Wrote synthetic dataset of %d countries and %d years to %s',
                    len(self.codes), len(self.years), directory)
        return paths


def _parameter_rows(result, truth):
    rows = []
    for j, equation in enumerate(result.equations):
        for r, regressor in enumerate(result.regressors):
            rows.append(('theta', equation, regressor, truth.theta[j, r],
                         result.coefficients[j, r], result.std_errors[j, r]))
        if result.spec.spatial:
            rows.append(('lambda', equation, '', truth.params.lam[j], result.lam[j], result.lam_se[j]))
        if result.spec.serial:
            rows.append(('phi', equation, '', truth.params.phi[j], result.phi[j], result.phi_se[j]))
    return rows


def run_recovery(cfg, replications=20, error_structure='all', settings=None):
    """
        fits every replicate with the true error structure and records
        whether the truth lies within three standard errors of the estimate

        output:
            per-parameter rows, summary by parameter kind (pandas frames)
    """
    cfg.validate()
    if replications < 1:
        raise InputError('replications must be positive, got {}'.format(replications))
    records = []
    for replicate in range(replications):
        utils.log_progress(replicate + 1, replications, prefix='Recovery replicate')
        design, truth = simulate_panel(cfg, replicate)
        spec = estimator.ModelSpec(regressor_set=cfg.regressors(), error_structure=error_structure,
                                   equations=design.equations)
        result = estimator.fit(design, truth.weights, spec, settings)
        for kind, equation, regressor, true_value, estimate, se in _parameter_rows(result, truth):
            records.append({
                'replicate': replicate,
                'regressor_set': result.spec.regressor_set,
                'parameter': kind,
                'equation': equation,
                'regressor': regressor,
                'truth': true_value,
                'estimate': estimate,
                'std_error': se,
                'covered': bool(np.isfinite(se) and abs(estimate - true_value) <= 3.0 * se),
                'convergence': result.convergence,
            })

    detail = pd.DataFrame(records, columns=['replicate', 'regressor_set', 'parameter', 'equation', 'regressor',
                                            'truth', 'estimate', 'std_error', 'covered', 'convergence'])
    error = detail['estimate'] - detail['truth']
    summary = detail.assign(error=error, abs_error=error.abs()).groupby(
        ['parameter', 'equation', 'regressor'], sort=False).agg(
        replications=('replicate', 'size'),
        coverage=('covered', 'mean'),
        mean_abs_error=('abs_error', 'mean'),
        mean_bias=('error', 'mean')).reset_index()
    logger.info('Recovery over %d replications: overall 3-se coverage %.3f', replications, detail['covered'].mean())
    return detail, summary
