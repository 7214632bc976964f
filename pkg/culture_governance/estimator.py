"""
    Six-equation governance regression with spatial, serial and
    cross-equation correlated errors, estimated by maximum likelihood.

    The outer optimisation runs over the spatial and serial coefficients
    only (mapped to the real line by atanh); for every trial value the
    regression coefficients and the error covariance are concentrated out
    by iterated feasible GLS on the filtered data. Standard errors come
    from a central-difference Hessian of the full likelihood.
"""
from . import error_model
from . import numerical
from .country_data import DIMENSIONS, INDICATORS
from .error_model import ERROR_STRUCTURES, ErrorParams
from .errors import DomainError, InputError
from . import utils

from dataclasses import dataclass, field, replace
import logging
from time import time
import warnings

import numpy as np
from scipy import linalg, optimize, stats

logger = logging.getLogger(__name__)

REGRESSOR_SETS = ('hofstede_only', 'level_only', 'level_and_diversity')


@dataclass(frozen=True)
class ModelSpec:
    regressor_set: str = 'level_and_diversity'
    error_structure: str = 'all'
    equations: tuple = INDICATORS

    def __post_init__(self):
        if self.regressor_set not in REGRESSOR_SETS:
            raise InputError('regressor set must be one of {}, got {!r}'.format(REGRESSOR_SETS, self.regressor_set))
        if self.error_structure not in ERROR_STRUCTURES:
            raise InputError('error structure must be one of {}, got {!r}'.format(
                ERROR_STRUCTURES, self.error_structure))
        if not self.equations or len(set(self.equations)) != len(self.equations):
            raise InputError('equations must be distinct and non-empty, got {}'.format(self.equations))

    @property
    def spatial(self):
        return self.error_structure in ('spatial', 'all')

    @property
    def serial(self):
        return self.error_structure in ('serial', 'all')

    @property
    def full_sigma(self):
        return self.error_structure in ('sur', 'all')


@dataclass(frozen=True)
class OptimizerSettings:
    max_iter: int = 200
    gtol: float = 1e-5
    ftol: float = 1e-8
    fgls_tol: float = 1e-10
    fgls_max_iter: int = 500
    hessian_step: float = 1e-4
    perturbed_lambda: float = 0.1
    perturbed_phi: float = 0.5
    regressor_scale: float = 100.0
    initial_condition: str = 'zero'

    def __post_init__(self):
        if self.max_iter < 1 or self.fgls_max_iter < 1:
            raise InputError('iteration limits must be positive')
        if not (self.gtol > 0 and self.ftol > 0 and self.fgls_tol > 0 and self.hessian_step > 0):
            raise InputError('optimizer tolerances must be positive')
        if abs(self.perturbed_lambda) >= 1 or abs(self.perturbed_phi) >= 1:
            raise InputError('perturbed starting values must lie in (-1, 1)')
        if not self.regressor_scale > 0:
            raise InputError('regressor scale must be positive')
        if self.initial_condition not in error_model.INITIAL_CONDITIONS:
            raise InputError('initial condition must be one of {}'.format(error_model.INITIAL_CONDITIONS))


@dataclass(frozen=True, eq=False)
class DesignMatrices:
    """
        y[t, i, j] governance scores (NaN in dropped cells), X[t, i, r]
        regressors with the intercept first, observed[t, i] the complete
        cases. countries and years give the i and t axes.
    """
    countries: tuple
    years: tuple
    equations: tuple
    regressors: tuple
    y: np.ndarray
    X: np.ndarray
    observed: np.ndarray
    regressor_set: str = 'custom'
    scale: float = 1.0

    @property
    def n_equations(self):
        return len(self.equations)

    @property
    def n_regressors(self):
        return len(self.regressors)

    @property
    def n_obs(self):
        return int(np.sum(self.observed))

    def stacked(self):
        """(y, X) over observed cells in year-major order"""
        rows_t, rows_i = np.nonzero(self.observed)
        return self.y[rows_t, rows_i], self.X[rows_t, rows_i]


def regressor_names(regressor_set):
    names = ['const']
    if regressor_set == 'hofstede_only':
        names += [d.lower() for d in DIMENSIONS]
    else:
        names += ['{}_level'.format(d.lower()) for d in DIMENSIONS]
    if regressor_set == 'level_and_diversity':
        names += ['{}_diversity'.format(d.lower()) for d in DIMENSIONS]
    return tuple(names)


def check_rank(X, names):
    if X.shape[0] < X.shape[1]:
        raise InputError('design has {} complete observations for {} columns'.format(X.shape[0], X.shape[1]))
    _, r, pivots = linalg.qr(X, mode='economic', pivoting=True)
    diag = np.abs(np.diagonal(r))
    tol = diag.max() * max(X.shape) * np.finfo(float).eps if diag.size else 0.0
    rank = int(np.sum(diag > tol))
    if rank < X.shape[1]:
        collinear = [names[c] for c in pivots[rank:]]
        raise InputError('design matrix is rank deficient ({} of {} columns), collinear columns: {}'.format(
            rank, X.shape[1], ', '.join(collinear)))


def design_regressors(indicators, regressor_set, scale=100.0):
    """
        X[t, i, r] for the indicator panel: intercept, the six level
        columns, then the six diversity columns if selected, divided by scale
    """
    n_countries, n_periods = len(indicators.countries), len(indicators.years)
    if regressor_set == 'hofstede_only':
        level = np.repeat(np.asarray(indicators.own_scores)[:, None, :], n_periods, axis=1)
    else:
        level = np.asarray(indicators.cli)
    blocks = [np.ones([n_countries, n_periods, 1]), level / scale]
    if regressor_set == 'level_and_diversity':
        if indicators.cdi is None:
            raise InputError('level_and_diversity needs the cultural diversity indicators')
        blocks.append(np.asarray(indicators.cdi) / scale)
    return np.concatenate(blocks, axis=2).transpose(1, 0, 2)


def assemble_design(indicators, panel, spec, grid, scale=100.0):
    """
        complete-case design over the grid: an (i, t) missing any governance
        equation is dropped from all of them. indicator columns are divided
        by scale.
    """
    countries, years = grid
    if tuple(countries) != tuple(indicators.countries) or tuple(years) != tuple(indicators.years):
        raise InputError('indicator panel does not match the observation grid')
    unknown = [j for j in spec.equations if j not in INDICATORS]
    if unknown:
        raise InputError('unknown governance equations {}'.format(unknown))
    n_countries, n_periods = len(countries), len(years)
    X = design_regressors(indicators, spec.regressor_set, scale)

    columns = [INDICATORS.index(j) for j in spec.equations]
    y = np.array([[panel.indicators(code, year)[columns] for code in countries] for year in years])
    y = y.reshape(n_periods, n_countries, len(columns))
    observed = np.all(np.isfinite(y), axis=2)
    for t, year in enumerate(years):
        for i, code in enumerate(countries):
            if not observed[t, i]:
                missing = [spec.equations[j] for j in range(len(columns)) if not np.isfinite(y[t, i, j])]
                logger.warning('Dropping %s %s from all equations: missing %s', code, year, ' '.join(missing))
    if not np.any(observed):
        raise InputError('no complete (country, year) observations in the design')

    names = regressor_names(spec.regressor_set)
    assert X.shape[2] == len(names)
    check_rank(X[observed], names)
    logger.info('Design %s: %d observations, %d columns per equation, %d equations',
                spec.regressor_set, int(observed.sum()), len(names), len(columns))
    return DesignMatrices(
        countries=tuple(countries),
        years=tuple(years),
        equations=tuple(spec.equations),
        regressors=names,
        y=y,
        X=X,
        observed=observed,
        regressor_set=spec.regressor_set,
        scale=scale)


@dataclass(frozen=True, eq=False)
class FitResult:
    spec: ModelSpec
    equations: tuple
    regressors: tuple
    coefficients: np.ndarray
    std_errors: np.ndarray
    p_values: np.ndarray
    lam: np.ndarray
    lam_se: np.ndarray
    lam_p: np.ndarray
    phi: np.ndarray
    phi_se: np.ndarray
    phi_p: np.ndarray
    sigma: np.ndarray
    loglik: float
    n_obs: int
    n_params: int
    convergence: str
    iterations: int = 0
    elapsed: float = 0.0
    residuals: np.ndarray = field(default=None, repr=False)
    innovations: np.ndarray = field(default=None, repr=False)
    r2: np.ndarray = None
    r2_pooled: float = None
    r2_mean: float = None
    residual_cov: np.ndarray = None
    residual_corr: np.ndarray = None

    @property
    def converged(self):
        return self.convergence == 'converged'

    def error_params(self):
        return ErrorParams(self.lam, self.phi, self.sigma)

    def coefficient_rows(self):
        """
            one row per (equation, regressor) followed by the spatial and
            serial parameters of the equations where they are estimated
        """
        rows = []
        for j, equation in enumerate(self.equations):
            for r, regressor in enumerate(self.regressors):
                rows.append((equation, regressor, self.coefficients[j, r], self.std_errors[j, r], self.p_values[j, r]))
        for name, free, values, ses, ps in (('lambda', self.spec.spatial, self.lam, self.lam_se, self.lam_p),
                                            ('phi', self.spec.serial, self.phi, self.phi_se, self.phi_p)):
            if free:
                for j, equation in enumerate(self.equations):
                    rows.append((equation, name, values[j], ses[j], ps[j]))
        return [dict(equation=e, regressor=r, estimate=est, std_error=se, p_value=p,
                     stars=utils.significance_stars(p)) for e, r, est, se, p in rows]

    def to_dict(self):
        def plain(value):
            if isinstance(value, np.ndarray):
                return plain(value.tolist())
            if isinstance(value, (list, tuple)):
                return [plain(v) for v in value]
            if isinstance(value, (float, np.floating)):
                return float(value) if np.isfinite(value) else None
            if isinstance(value, np.integer):
                return int(value)
            return value

        return {
            'regressor_set': self.spec.regressor_set,
            'error_structure': self.spec.error_structure,
            'equations': list(self.equations),
            'regressors': list(self.regressors),
            'coefficients': plain(self.coefficients),
            'std_errors': plain(self.std_errors),
            'p_values': plain(self.p_values),
            'lambda': plain(self.lam),
            'lambda_std_errors': plain(self.lam_se),
            'lambda_p_values': plain(self.lam_p),
            'phi': plain(self.phi),
            'phi_std_errors': plain(self.phi_se),
            'phi_p_values': plain(self.phi_p),
            'sigma': plain(self.sigma),
            'loglik': plain(self.loglik),
            'n_obs': self.n_obs,
            'n_params': self.n_params,
            'convergence': self.convergence,
            'iterations': self.iterations,
            'r2': plain(self.r2) if self.r2 is not None else None,
            'r2_pooled': plain(self.r2_pooled),
            'r2_mean': plain(self.r2_mean),
            'residual_cov': plain(self.residual_cov) if self.residual_cov is not None else None,
            'residual_corr': plain(self.residual_corr) if self.residual_corr is not None else None,
        }


def two_sided_p(estimate, std_error):
    with np.errstate(divide='ignore', invalid='ignore'):
        z = np.abs(np.asarray(estimate) / np.asarray(std_error))
    return 2.0 * stats.norm.sf(z)


class SpatialSurEstimator:
    """
        Holds the design, the aligned weight matrices and the innovation
        filter for one model specification. fit() runs the profiled
        optimisation and the standard errors.
    """
    # |atanh| clip, keeps tanh strictly inside (-1, 1)
    ZMAX = 10.0
    BOUNDARY = 0.9999
    PENALTY = 1e12
    GRADIENT_TOL = 1e-4
    # correlation condition number beyond which FGLS stops
    SIGMA_COND = 1e10

    def __init__(self, design, weights, spec, settings=None):
        self.design = design
        self.spec = spec
        self.settings = settings or OptimizerSettings()
        if tuple(spec.equations) != tuple(design.equations):
            spec = replace(spec, equations=tuple(design.equations))
            self.spec = spec
        matrices = error_model.aligned_matrices(design.years, design.countries, weights)
        self.filter = error_model.InnovationFilter(matrices, design.observed, self.settings.initial_condition)
        self.m = design.n_equations
        self.p = design.n_regressors
        self.n = self.filter.n_obs
        # the filter ignores unobserved current cells, lagged ones are masked
        self.y = np.where(np.isfinite(design.y), design.y, 0.0)
        self.X = np.asarray(design.X, dtype=float)
        if spec.full_sigma and (spec.spatial or spec.serial) and self.n <= self.m * self.p:
            logger.warning('%d observations for %d coefficients: the %s likelihood is unbounded as sigma turns '
                           'singular, FGLS stops at the last well-conditioned iterate',
                           self.n, self.m * self.p, spec.error_structure)

    @property
    def n_outer(self):
        return self.m * (int(self.spec.spatial) + int(self.spec.serial))

    def unpack_outer(self, z):
        z = np.clip(np.asarray(z, dtype=float), -self.ZMAX, self.ZMAX)
        lam = np.zeros(self.m)
        phi = np.zeros(self.m)
        offset = 0
        if self.spec.spatial:
            lam = np.tanh(z[:self.m])
            offset = self.m
        if self.spec.serial:
            phi = np.tanh(z[offset:offset + self.m])
        return lam, phi

    def pack_outer(self, lam, phi):
        parts = []
        bound = np.tanh(self.ZMAX)
        if self.spec.spatial:
            parts.append(np.arctanh(np.clip(lam, -bound, bound)))
        if self.spec.serial:
            parts.append(np.arctanh(np.clip(phi, -bound, bound)))
        return np.concatenate(parts) if parts else np.zeros(0)

    def filtered(self, lam, phi):
        """filtered y (n, M) and per-equation filtered X, shared where (lam, phi) repeat"""
        cache = {}
        ys = []
        xs = []
        for j in range(self.m):
            key = (float(lam[j]), float(phi[j]))
            if key not in cache:
                cache[key] = self.filter.apply(self.X, lam[j], phi[j])
            xs.append(cache[key])
            ys.append(self.filter.apply(self.y[:, :, j], lam[j], phi[j]))
        return np.column_stack(ys), xs

    def log_jacobian(self, lam, phi):
        return sum(self.filter.log_jacobian(lam[j], phi[j]) for j in range(self.m))

    def _innovations(self, y_tilde, x_tilde, theta):
        return y_tilde - np.column_stack([x_tilde[j] @ theta[j] for j in range(self.m)])

    def profile(self, lam, phi):
        """
            concentrates theta and sigma out for fixed (lam, phi)

            output:
                theta (M x p), sigma (M x M), loglik
        """
        y_tilde, x_tilde = self.filtered(lam, phi)
        log_jacobian = self.log_jacobian(lam, phi)
        theta = np.array([linalg.lstsq(x_tilde[j], y_tilde[:, j])[0] for j in range(self.m)])
        innovations = self._innovations(y_tilde, x_tilde, theta)
        cross = innovations.T @ innovations / self.n

        if not self.spec.full_sigma:
            sigma = np.diag(np.diag(cross))
            return theta, sigma, error_model.gaussian_loglik(innovations, sigma, log_jacobian)

        sigma = cross
        best = (theta, sigma, error_model.gaussian_loglik(innovations, sigma, log_jacobian))
        if all(x is x_tilde[0] for x in x_tilde):
            # identical regressors in every equation: GLS is equation-wise OLS
            return best

        grams = [[x_tilde[j].T @ x_tilde[l] for l in range(self.m)] for j in range(self.m)]
        moments = [[x_tilde[j].T @ y_tilde[:, l] for l in range(self.m)] for j in range(self.m)]
        previous = best[2]
        for iteration in range(self.settings.fgls_max_iter):
            try:
                new_theta = self._gls_coefficients(sigma, grams, moments)
            except linalg.LinAlgError:
                logger.debug('FGLS: sigma not positive definite at lam=%s phi=%s', lam, phi)
                break
            innovations = self._innovations(y_tilde, x_tilde, new_theta)
            sigma = innovations.T @ innovations / self.n
            if not self._well_conditioned(sigma):
                # the likelihood grows without bound as sigma turns singular
                logger.debug('FGLS: degenerate sigma after %d iterations at lam=%s phi=%s', iteration + 1, lam, phi)
                break
            loglik = error_model.gaussian_loglik(innovations, sigma, log_jacobian)
            if loglik > best[2]:
                best = (new_theta, sigma, loglik)
            change = np.max(np.abs(new_theta - theta))
            theta = new_theta
            # each sweep can only raise the likelihood, a drop is roundoff
            if change < self.settings.fgls_tol * (1.0 + np.max(np.abs(theta))) or loglik <= previous:
                break
            previous = loglik
        else:
            logger.debug('FGLS stopped after %d iterations at lam=%s phi=%s', iteration + 1, lam, phi)
        return best

    def _gls_coefficients(self, sigma, grams, moments):
        """GLS coefficients (M x p) for a fixed sigma, minimum-norm when the system is near singular"""
        precision = linalg.cho_solve(linalg.cho_factor(sigma), np.eye(self.m))
        lhs = np.block([[precision[j, l] * grams[j][l] for l in range(self.m)] for j in range(self.m)])
        rhs = np.concatenate([sum(precision[j, l] * moments[j][l] for l in range(self.m)) for j in range(self.m)])
        try:
            with warnings.catch_warnings():
                warnings.simplefilter('error', linalg.LinAlgWarning)
                solution = linalg.solve(lhs, rhs, assume_a='pos')
        except (linalg.LinAlgError, linalg.LinAlgWarning):
            solution = linalg.lstsq(lhs, rhs)[0]
        return solution.reshape(self.m, self.p)

    def _well_conditioned(self, sigma):
        scale = np.sqrt(np.diag(sigma))
        if not np.all(np.isfinite(scale)) or np.any(scale <= 0):
            return False
        return np.linalg.cond(sigma / np.outer(scale, scale)) < self.SIGMA_COND

    def objective(self, z):
        lam, phi = self.unpack_outer(z)
        try:
            return -self.profile(lam, phi)[2]
        except (DomainError, linalg.LinAlgError):
            return self.PENALTY

    def optimize(self, warm_starts=()):
        """
            maximises the concentrated likelihood from the zero start, a
            perturbed start and any warm starts given as (lam, phi) pairs.
            a start that no optimizer run improves on is kept as it is.

            output:
                lam, phi, convergence, iterations
        """
        if self.n_outer == 0:
            return np.zeros(self.m), np.zeros(self.m), 'converged', 0

        zeros = np.zeros(self.m)
        starts = [(zeros, zeros),
                  (np.full(self.m, self.settings.perturbed_lambda), np.full(self.m, self.settings.perturbed_phi))]
        for lam, phi in warm_starts:
            starts.append((np.where(self.spec.spatial, lam, 0.0), np.where(self.spec.serial, phi, 0.0)))

        best = (np.inf, zeros, zeros, 'max-iter')
        iterations = 0
        bounds = [(-self.ZMAX, self.ZMAX)] * self.n_outer
        for s, (lam0, phi0) in enumerate(starts):
            z0 = self.pack_outer(lam0, phi0)
            try:
                f0 = -self.profile(lam0, phi0)[2]
            except (DomainError, linalg.LinAlgError):
                f0 = self.PENALTY
            res = optimize.minimize(
                self.objective, z0, method='L-BFGS-B', jac='3-point', bounds=bounds,
                options={'maxiter': self.settings.max_iter,
                         'gtol': self.settings.gtol,
                         'ftol': self.settings.ftol / max(1.0, abs(f0))})
            iterations += int(res.nit)
            logger.debug('start %d: loglik %.6f -> %.6f (%s)', s, -f0, -res.fun, res.message)
            state = self._state(res)
            lam1, phi1 = self.unpack_outer(res.x)
            for f, lam, phi in ((res.fun, lam1, phi1), (f0, lam0, phi0)):
                if f < best[0]:
                    best = (f, lam, phi, state)

        _, lam, phi, state = best
        free = np.concatenate([lam if self.spec.spatial else [], phi if self.spec.serial else []])
        if np.any(np.abs(free) >= self.BOUNDARY):
            state = 'boundary'
        elif state != 'converged':
            gradient = numerical.central_gradient(self.objective, self.pack_outer(lam, phi), rel_step=1e-5)
            state = 'converged' if np.max(np.abs(gradient)) < self.GRADIENT_TOL else 'max-iter'
        return lam, phi, state, iterations

    def _state(self, res):
        if res.success:
            return 'converged'
        if res.nit >= self.settings.max_iter:
            return 'max-iter'
        # abnormal line search termination, judged by the gradient afterwards
        return 'unknown'

    def sigma_params(self, sigma):
        if not self.spec.full_sigma:
            return 0.5 * np.log(np.diag(sigma))
        chol = linalg.cholesky(sigma, lower=True)
        values = []
        for j in range(self.m):
            for l in range(j + 1):
                values.append(np.log(chol[j, j]) if l == j else chol[j, l])
        return np.array(values)

    def sigma_from_params(self, values):
        if not self.spec.full_sigma:
            return np.diag(np.exp(2.0 * values))
        chol = np.zeros([self.m, self.m])
        pos = 0
        for j in range(self.m):
            for l in range(j + 1):
                chol[j, l] = np.exp(values[pos]) if l == j else values[pos]
                pos += 1
        return chol @ chol.T

    @property
    def n_sigma_params(self):
        return self.m * (self.m + 1) // 2 if self.spec.full_sigma else self.m

    def pack_full(self, theta, lam, phi, sigma):
        return np.concatenate([np.ravel(theta), self.pack_outer(lam, phi), self.sigma_params(sigma)])

    def unpack_full(self, x):
        n_theta = self.m * self.p
        theta = x[:n_theta].reshape(self.m, self.p)
        lam, phi = self.unpack_outer(x[n_theta:n_theta + self.n_outer])
        sigma = self.sigma_from_params(x[n_theta + self.n_outer:])
        return theta, lam, phi, sigma

    def residuals(self, theta):
        return self.y - np.einsum('tnp,mp->tnm', self.X, theta)

    def full_loglik(self, x):
        theta, lam, phi, sigma = self.unpack_full(x)
        innovations = error_model.innovations_for(self.residuals(theta), lam, phi, self.filter)
        return error_model.gaussian_loglik(innovations, sigma, self.log_jacobian(lam, phi))

    def standard_errors(self, theta, lam, phi, sigma):
        """
            inverse of the negative central-difference hessian on the
            transformed scale, mapped back to lam and phi by the delta method
        """
        x0 = self.pack_full(theta, lam, phi, sigma)
        hessian = numerical.central_hessian(self.full_loglik, x0, rel_step=self.settings.hessian_step)
        information = -hessian
        try:
            linalg.cholesky(information, lower=True)
            covariance = linalg.inv(information)
        except linalg.LinAlgError:
            logger.warning('Negative hessian is not positive definite, using its pseudo-inverse')
            covariance = linalg.pinv(information)
        variances = np.diag(covariance)
        with np.errstate(invalid='ignore'):
            se = np.where(variances > 0, np.sqrt(np.abs(variances)), np.nan)

        n_theta = self.m * self.p
        theta_se = se[:n_theta].reshape(self.m, self.p)
        lam_se = np.full(self.m, np.nan)
        phi_se = np.full(self.m, np.nan)
        offset = n_theta
        if self.spec.spatial:
            lam_se = (1.0 - lam ** 2) * se[offset:offset + self.m]
            offset += self.m
        if self.spec.serial:
            phi_se = (1.0 - phi ** 2) * se[offset:offset + self.m]
        return theta_se, lam_se, phi_se

    def fit(self, warm_starts=()):
        start = time()
        logger.info('Fitting %s / %s on %d observations ...',
                    self.spec.regressor_set, self.spec.error_structure, self.n)
        lam, phi, convergence, iterations = self.optimize(warm_starts)
        theta, sigma, loglik = self.profile(lam, phi)
        theta_se, lam_se, phi_se = self.standard_errors(theta, lam, phi, sigma)

        residuals = self.residuals(theta)
        innovations = error_model.innovations_for(residuals, lam, phi, self.filter)
        rows_t, rows_i = np.nonzero(self.design.observed)
        n_params = self.m * self.p + self.n_outer + self.n_sigma_params
        elapsed = time() - start
        if convergence != 'converged':
            logger.warning('%s / %s finished with status %s', self.spec.regressor_set,
                           self.spec.error_structure, convergence)
        logger.info('took %.1fs, loglik %.4f', elapsed, loglik)
        nan = np.full(self.m, np.nan)
        return FitResult(
            spec=self.spec,
            equations=self.design.equations,
            regressors=self.design.regressors,
            coefficients=theta,
            std_errors=theta_se,
            p_values=two_sided_p(theta, theta_se),
            lam=lam,
            lam_se=lam_se,
            lam_p=two_sided_p(lam, lam_se) if self.spec.spatial else nan,
            phi=phi,
            phi_se=phi_se,
            phi_p=two_sided_p(phi, phi_se) if self.spec.serial else nan,
            sigma=sigma,
            loglik=float(loglik),
            n_obs=self.n,
            n_params=n_params,
            convergence=convergence,
            iterations=iterations,
            elapsed=elapsed,
            residuals=residuals[rows_t, rows_i],
            innovations=innovations)


def restricted_starts(design, weights, spec, settings=None):
    """(lam, phi) optima of the spatial-only and serial-only variants"""
    settings = settings or OptimizerSettings()
    lam, _, _, _ = SpatialSurEstimator(design, weights, replace(spec, error_structure='spatial'), settings).optimize()
    _, phi, _, _ = SpatialSurEstimator(design, weights, replace(spec, error_structure='serial'), settings).optimize()
    zeros = np.zeros(len(lam))
    return [(lam, zeros), (zeros, phi), (lam, phi)]


def fit(design, weights, spec, opts=None, warm_starts=None):
    """
        maximum likelihood fit of spec on design. the full model is also
        started from the spatial-only and serial-only optima so that it
        never ends below them.
    """
    opts = opts or OptimizerSettings()
    if warm_starts is None:
        warm_starts = restricted_starts(design, weights, spec, opts) if spec.error_structure == 'all' else ()
    return SpatialSurEstimator(design, weights, spec, opts).fit(warm_starts)


def fit_statistics(result, design):
    """R^2 per equation and pooled, and the innovation covariance/correlation"""
    if not result.converged:
        logger.warning('Fit statistics for a fit with status %s', result.convergence)
    y, _ = design.stacked()
    centred = y - y.mean(axis=0)
    sst = np.sum(centred ** 2, axis=0)
    if np.any(sst <= 0):
        zero = [design.equations[j] for j in np.flatnonzero(sst <= 0)]
        raise DomainError('zero total variance in equations {}'.format(', '.join(zero)))
    ssr = np.sum(result.residuals ** 2, axis=0)
    r2 = 1.0 - ssr / sst

    innovations = result.innovations
    cov = innovations.T @ innovations / innovations.shape[0]
    sd = np.sqrt(np.diag(cov))
    with np.errstate(divide='ignore', invalid='ignore'):
        corr = np.clip(cov / np.outer(sd, sd), -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return replace(result,
                   r2=r2,
                   r2_pooled=float(1.0 - ssr.sum() / sst.sum()),
                   r2_mean=float(r2.mean()),
                   residual_cov=cov,
                   residual_corr=corr)
