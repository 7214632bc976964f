"""
    Exact Gaussian likelihood of the spatial + AR(1) + cross-equation error
    process through its innovation representation

        e[., t, j] = (I - lam_j W_t) u[., t, j] - phi_j u[., t-1, j]

    with u before the first period set to zero and e[i, t, .] ~ N(0, Sigma)
    independently over (i, t). Observation rows are stacked year by year,
    countries in grid order within a year, skipping dropped cells.
"""
from .errors import DomainError, InputError

from dataclasses import dataclass
import logging

import numpy as np
from scipy import linalg

logger = logging.getLogger(__name__)

ERROR_STRUCTURES = ('independent', 'spatial', 'serial', 'sur', 'all')
INITIAL_CONDITIONS = ('zero', 'stationary')

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class ErrorParams:
    lam: np.ndarray
    phi: np.ndarray
    sigma: np.ndarray

    def validate(self):
        lam = np.asarray(self.lam, dtype=float)
        phi = np.asarray(self.phi, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        m = sigma.shape[0]
        if sigma.shape != (m, m) or lam.shape != (m,) or phi.shape != (m,):
            raise DomainError('error parameters disagree on the number of equations')
        if np.any(np.abs(lam) >= 1):
            raise DomainError('spatial coefficients must lie in (-1, 1), got {}'.format(lam))
        if np.any(np.abs(phi) >= 1):
            raise DomainError('serial coefficients must lie in (-1, 1), got {}'.format(phi))
        if not np.allclose(sigma, sigma.T, rtol=0, atol=1e-12 * max(1.0, np.abs(sigma).max())):
            raise DomainError('error covariance is not symmetric')
        cholesky_factor(sigma)


def cholesky_factor(sigma):
    try:
        return linalg.cholesky(sigma, lower=True)
    except linalg.LinAlgError:
        raise DomainError('error covariance is not positive definite')


def aligned_matrices(years, countries, weights):
    """weight matrices ordered like the design's years and countries"""
    missing = [y for y in years if y not in weights.years]
    if missing:
        raise InputError('no spatial weights for design years {}'.format(missing))
    if tuple(countries) != tuple(weights.countries):
        raise InputError('spatial weights and design cover different countries')
    return np.stack([weights.matrix(y) for y in years]) if years else np.zeros([0, 0, 0])


class InnovationFilter:
    """
        Maps errors u over the observed (t, i) cells to innovations e for
        one equation at a time. A dropped cell is removed from W_t's rows
        and columns for its year, and a unit whose previous period was
        dropped restarts its recursion like in the first period.
    """

    def __init__(self, matrices, observed, initial_condition='zero'):
        if initial_condition not in INITIAL_CONDITIONS:
            raise InputError('initial condition must be one of {}, got {!r}'.format(
                INITIAL_CONDITIONS, initial_condition))
        self.observed = np.asarray(observed, dtype=bool)
        self.initial_condition = initial_condition
        self.index = [np.flatnonzero(row) for row in self.observed]
        self.sub_matrices = [matrices[t][np.ix_(idx, idx)] for t, idx in enumerate(self.index)]
        self.has_lag = [np.zeros(len(idx), dtype=bool) if t == 0 else self.observed[t - 1, idx]
                        for t, idx in enumerate(self.index)]
        self.n_obs = int(sum(len(idx) for idx in self.index))
        self.n_start = int(sum(np.sum(~lag) for lag in self.has_lag))
        self._log_det_cache = {}

    def start_scale(self, phi):
        if self.initial_condition == 'stationary':
            return np.sqrt(1.0 - phi * phi)
        return 1.0

    def apply(self, values, lam, phi):
        """
            values: (T, N) or (T, N, c) array over the full grid
            returns the stacked (n_obs,) or (n_obs, c) innovations
        """
        scale = self.start_scale(phi)
        rows = []
        for t, idx in enumerate(self.index):
            current = values[t, idx]
            filtered = current - lam * (self.sub_matrices[t] @ current) if lam != 0 else current.copy()
            lag = self.has_lag[t]
            if current.ndim > 1:
                lag = lag[:, None]
            if t > 0 and phi != 0:
                filtered = filtered - phi * np.where(lag, values[t - 1, idx], 0.0)
            if scale != 1.0:
                filtered = np.where(lag, filtered, scale * filtered)
            rows.append(filtered)
        if not rows:
            return np.zeros((0,) + values.shape[2:])
        return np.concatenate(rows, axis=0)

    def log_det(self, lam):
        """sum over years of log|det(I - lam W_t)|, by pivoted LU"""
        if lam == 0:
            return 0.0
        key = float(lam)
        if key in self._log_det_cache:
            return self._log_det_cache[key]
        total = 0.0
        for w in self.sub_matrices:
            if w.shape[0] == 0:
                continue
            lu, _ = linalg.lu_factor(np.eye(w.shape[0]) - lam * w, check_finite=False)
            pivots = np.abs(np.diagonal(lu))
            if np.any(pivots <= np.finfo(float).eps * w.shape[0]):
                raise DomainError('I - lam W is numerically singular at lam={}'.format(lam))
            total += np.sum(np.log(pivots))
        if len(self._log_det_cache) > 4096:
            self._log_det_cache.clear()
        self._log_det_cache[key] = total
        return total

    def log_jacobian(self, lam, phi):
        total = self.log_det(lam)
        if self.initial_condition == 'stationary' and phi != 0:
            total += self.n_start * np.log(self.start_scale(phi))
        return total


def gaussian_loglik(innovations, sigma, log_jacobian):
    """
        log density of i.i.d. N(0, sigma) innovation rows plus the log
        jacobian of the map from errors to innovations
    """
    n, m = innovations.shape
    chol = cholesky_factor(sigma)
    log_det_sigma = 2.0 * np.sum(np.log(np.diagonal(chol)))
    whitened = linalg.solve_triangular(chol, innovations.T, lower=True, check_finite=False)
    return (-0.5 * n * m * LOG_2PI - 0.5 * n * log_det_sigma + log_jacobian
            - 0.5 * np.sum(whitened * whitened))


def innovations_for(residuals, lam, phi, innovation_filter):
    """residuals (T, N, M) -> innovations (n_obs, M)"""
    columns = [innovation_filter.apply(residuals[:, :, j], lam[j], phi[j]) for j in range(residuals.shape[2])]
    return np.column_stack(columns) if columns else np.zeros((innovation_filter.n_obs, 0))


def log_likelihood(theta, err, design, weights, initial_condition='zero'):
    """
        exact log-likelihood of the regression coefficients theta (M x p)
        and error parameters err for the design and spatial weights
    """
    err.validate()
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (design.n_equations, design.n_regressors):
        raise DomainError('theta must have shape {}, got {}'.format(
            (design.n_equations, design.n_regressors), theta.shape))
    matrices = aligned_matrices(design.years, design.countries, weights)
    innovation_filter = InnovationFilter(matrices, design.observed, initial_condition)

    residuals = design.y - np.einsum('tnp,mp->tnm', design.X, theta)
    lam = np.asarray(err.lam, dtype=float)
    phi = np.asarray(err.phi, dtype=float)
    innovations = innovations_for(residuals, lam, phi, innovation_filter)
    log_jacobian = sum(innovation_filter.log_jacobian(lam[j], phi[j]) for j in range(len(lam)))
    return gaussian_loglik(innovations, np.asarray(err.sigma, dtype=float), log_jacobian)


def dense_transform(lam, phi, matrices, initial_condition='zero'):
    """
        the matrix A with e = A u for a balanced panel, both stacked in
        (t, i, j) order
    """
    lam = np.asarray(lam, dtype=float)
    phi = np.asarray(phi, dtype=float)
    n_periods, n_countries = matrices.shape[0], matrices.shape[1]
    m = len(lam)
    size = n_periods * n_countries * m
    transform = np.zeros([size, size])
    for t in range(n_periods):
        for j in range(m):
            rows = (t * n_countries + np.arange(n_countries)) * m + j
            block = np.eye(n_countries) - lam[j] * matrices[t]
            if t == 0 and initial_condition == 'stationary':
                block = np.sqrt(1.0 - phi[j] ** 2) * block
            transform[np.ix_(rows, rows)] = block
            if t > 0:
                lag_rows = ((t - 1) * n_countries + np.arange(n_countries)) * m + j
                transform[rows, lag_rows] = -phi[j]
    return transform


def dense_error_covariance(lam, phi, sigma, matrices, initial_condition='zero'):
    """covariance of the stacked errors u implied by the innovation map"""
    transform = dense_transform(lam, phi, matrices, initial_condition)
    n_cells = matrices.shape[0] * matrices.shape[1]
    inverse = np.linalg.inv(transform)
    return inverse @ np.kron(np.eye(n_cells), np.asarray(sigma, dtype=float)) @ inverse.T
