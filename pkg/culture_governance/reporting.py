"""
    CSV and JSON writers for the indicator exports and the fit tables.
    Every csv uses six significant digits, fit.json keeps full precision.
"""
from .country_data import INDICATORS
from .error_model import ERROR_STRUCTURES
from .estimator import REGRESSOR_SETS

import json
import logging
import os

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.6g'

ERROR_STRUCTURE_LABELS = {
    'independent': 'Indep.',
    'spatial': 'Spatial',
    'serial': 'Serial',
    'sur': 'SUR',
    'all': 'All',
}
REGRESSOR_SET_LABELS = {
    'hofstede_only': "Hofstede's Cultural Dimensions",
    'level_only': 'Heterogeneous Level',
    'level_and_diversity': 'Heterogeneous Level and Diversity',
}


def write_csv(frame, directory, name):
    path = os.path.join(directory, name)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    logger.debug('Wrote %d rows to %s', len(frame), path)
    return path


def write_json(document, directory, name):
    path = os.path.join(directory, name)
    with open(path, 'w') as f:
        json.dump(document, f, indent=2, allow_nan=False)
        f.write('\n')
    return path


def wgi_average_frame(panel, grid):
    """mean of the six governance scores per grid (code, year), empty when incomplete"""
    countries, years = grid
    records = []
    for code in countries:
        for year in years:
            values = panel.indicators(code, year)
            records.append((code, year, float(np.mean(values)) if np.all(np.isfinite(values)) else np.nan))
    return pd.DataFrame(records, columns=['code', 'year', 'wgi_avg'])


def write_indicator_exports(directory, indicator_panel, weights, exclusions, imputed, panel, grid):
    """
        indicators.csv, indicators_avg.csv, weights_<year>.csv,
        exclusions.csv, imputation.csv and wgi_avg.csv
    """
    paths = [
        write_csv(indicator_panel.to_frame(), directory, 'indicators.csv'),
        write_csv(indicator_panel.averages_frame(), directory, 'indicators_avg.csv'),
    ]
    for year in weights.years:
        paths.append(write_csv(weights.to_frame(year), directory, 'weights_{}.csv'.format(year)))
    paths.append(write_csv(exclusions.to_frame(), directory, 'exclusions.csv'))
    paths.append(write_csv(imputed.to_frame(), directory, 'imputation.csv'))
    paths.append(write_csv(wgi_average_frame(panel, grid), directory, 'wgi_avg.csv'))
    logger.info('Wrote %d indicator files to %s', len(paths), directory)
    return paths


def coefficients_frame(result):
    columns = ['equation', 'regressor', 'estimate', 'std_error', 'p_value', 'stars']
    return pd.DataFrame(result.coefficient_rows(), columns=columns)


def loglik_frame(results):
    records = [(r.spec.regressor_set, r.spec.error_structure, r.loglik, r.n_obs, r.n_params, r.convergence)
               for r in results]
    return pd.DataFrame(records, columns=['regressor_set', 'error_structure', 'loglik', 'n_obs', 'n_params',
                                          'convergence'])


def loglik_grid_frame(results):
    """regressor sets in rows, error structures in columns, empty where not fitted"""
    table = {(r.spec.regressor_set, r.spec.error_structure): r.loglik for r in results}
    records = []
    for regressor_set in REGRESSOR_SETS:
        row = [regressor_set, REGRESSOR_SET_LABELS[regressor_set]]
        row += [table.get((regressor_set, s), np.nan) for s in ERROR_STRUCTURES]
        records.append(row)
    return pd.DataFrame(records, columns=['regressor_set', 'label'] + [ERROR_STRUCTURE_LABELS[s]
                                                                       for s in ERROR_STRUCTURES])


def r2_frame(results):
    """per-equation R^2, SSR-pooled and mean-of-equations R^2, one row per fit"""
    records = []
    for r in results:
        row = {'regressor_set': r.spec.regressor_set, 'error_structure': r.spec.error_structure}
        row.update({equation: r.r2[j] for j, equation in enumerate(r.equations)})
        row.update({'pooled': r.r2_pooled, 'mean': r.r2_mean})
        records.append(row)
    equations = [j for j in INDICATORS if any(j in r.equations for r in results)]
    equations += [j for r in results for j in r.equations if j not in equations]
    return pd.DataFrame(records, columns=['regressor_set', 'error_structure'] + equations + ['pooled', 'mean'])


def residual_matrix(result):
    """variances on the diagonal, covariances below it, correlations above it"""
    matrix = np.tril(result.residual_cov)
    upper = np.triu_indices(len(result.equations), k=1)
    matrix[upper] = result.residual_corr[upper]
    return matrix


def residual_cov_frame(result):
    frame = pd.DataFrame(residual_matrix(result), columns=list(result.equations))
    frame.insert(0, 'equation', list(result.equations))
    return frame


def write_fit_outputs(directory, primary, results, compare=False):
    """
        coefficients.csv and residual_cov.csv for the primary fit, loglik.csv
        and r2.csv over every fit, loglik_grid.csv when comparing, fit.json
    """
    paths = [write_csv(coefficients_frame(primary), directory, 'coefficients.csv'),
             write_csv(loglik_frame(results), directory, 'loglik.csv')]
    with_statistics = [r for r in results if r.r2 is not None]
    if with_statistics:
        paths.append(write_csv(r2_frame(with_statistics), directory, 'r2.csv'))
    if primary.residual_cov is not None:
        paths.append(write_csv(residual_cov_frame(primary), directory, 'residual_cov.csv'))
    if compare:
        paths.append(write_csv(loglik_grid_frame(results), directory, 'loglik_grid.csv'))

    document = primary.to_dict()
    if compare:
        document['compare'] = [r.to_dict() for r in results if r is not primary]
    paths.append(write_json(document, directory, 'fit.json'))
    logger.info('Wrote %d fit files to %s', len(paths), directory)
    return paths


def write_recovery(directory, detail, summary):
    return [write_csv(detail, directory, 'recovery.csv'),
            write_csv(summary, directory, 'recovery_summary.csv')]
