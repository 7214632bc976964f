"""
    Cultural level and diversity indicators and the migrant-share spatial
    weights. Every (country, year) population is split into origin groups
    with shares BIC[i,t,o] / POP[i,t]; the part of the population not
    covered by any origin count is added to the native group so the shares
    sum to one.
"""
from .country_data import DIMENSIONS, frozen_array
from .errors import DomainError

from dataclasses import dataclass
import logging

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class IndicatorPanel:
    """cli[i, t, k] and cdi[i, t, k] over grid countries and years"""
    countries: tuple
    years: tuple
    cli: np.ndarray
    cdi: np.ndarray = None
    own_scores: np.ndarray = None

    def to_frame(self):
        records = []
        for i, code in enumerate(self.countries):
            for t, year in enumerate(self.years):
                for k, dimension in enumerate(DIMENSIONS):
                    records.append((code, year, dimension, self.cli[i, t, k],
                                    np.nan if self.cdi is None else self.cdi[i, t, k]))
        return pd.DataFrame(records, columns=['code', 'year', 'dimension', 'cli', 'cdi'])

    def averages_frame(self):
        """simple mean over the six dimensions, one row per (code, year)"""
        cli_avg = self.cli.mean(axis=2)
        cdi_avg = self.cdi.mean(axis=2) if self.cdi is not None else np.full(cli_avg.shape, np.nan)
        records = [(code, year, cli_avg[i, t], cdi_avg[i, t])
                   for i, code in enumerate(self.countries)
                   for t, year in enumerate(self.years)]
        return pd.DataFrame(records, columns=['code', 'year', 'cli_avg', 'cdi_avg'])


@dataclass(frozen=True, eq=False)
class SpatialWeights:
    """matrices[t] is the N x N weight matrix of years[t] over countries"""
    countries: tuple
    years: tuple
    matrices: np.ndarray

    def __len__(self):
        return len(self.years)

    def matrix(self, year):
        return self.matrices[self.years.index(year)]

    def spectral_radius(self, year):
        return float(np.max(np.abs(np.linalg.eigvals(self.matrix(year))))) if self.countries else 0.0

    def to_frame(self, year):
        """nonzero entries only"""
        w = self.matrix(year)
        dest, origin = np.nonzero(w)
        return pd.DataFrame({
            'year': year,
            'dest': [self.countries[i] for i in dest],
            'origin': [self.countries[o] for o in origin],
            'weight': w[dest, origin],
        }, columns=['year', 'dest', 'origin', 'weight'])


def population_shares(tensor, panel, grid):
    """
        shares[i, t, o] over the tensor's code axis for grid countries i,
        with the uncovered population mass folded into the native group
    """
    countries, years = grid
    shares = np.zeros([len(countries), len(years), len(tensor.codes)])
    for i, code in enumerate(countries):
        d = tensor.index(code)
        for t, year in enumerate(years):
            pop = panel.pop(code, year)
            row = tensor.counts[d, tensor.year_index(year)] / pop
            row[d] = 0.0
            native = 1.0 - row.sum()
            if native < -1e-12:
                raise DomainError('foreign-born population of {} in {} exceeds its population'.format(code, year))
            row[d] = max(native, 0.0)
            shares[i, t] = row
    return shares


def _origin_scores(tensor, hofstede, shares):
    """hofstede rows aligned with the tensor's code axis, zeros where unused"""
    scores = np.zeros([len(tensor.codes), len(DIMENSIONS)])
    used = np.any(shares > 0, axis=(0, 1))
    for o, code in enumerate(tensor.codes):
        if code in hofstede:
            scores[o] = hofstede.row(code)
        elif used[o]:
            raise DomainError('origin {} has migrants in the sample but no Hofstede scores'.format(code))
    return scores


def compute_cli(tensor, hofstede, panel, grid):
    """
        population-share weighted mean of each dimension. computed as
        deviations from the country's own score so that a country without
        foreign-born population returns its own score exactly.
    """
    countries, years = grid
    shares = population_shares(tensor, panel, grid)
    scores = _origin_scores(tensor, hofstede, shares)
    own = np.array([hofstede.row(code) for code in countries]).reshape(len(countries), len(DIMENSIONS))

    deviations = scores[None, :, :] - own[:, None, :]
    cli = own[:, None, :] + np.einsum('ito,iok->itk', shares, deviations)
    logger.info('Computed cultural level indicators for %d countries and %d years', len(countries), len(years))
    return IndicatorPanel(
        countries=tuple(countries),
        years=tuple(years),
        cli=frozen_array(cli),
        own_scores=frozen_array(own))


def compute_cdi(tensor, hofstede, panel, cli, grid):
    """population-share weighted standard deviation, divide-by-N"""
    countries, years = grid
    shares = population_shares(tensor, panel, grid)
    scores = _origin_scores(tensor, hofstede, shares)

    squared = (scores[None, None, :, :] - cli.cli[:, :, None, :]) ** 2
    cdi = np.sqrt(np.einsum('ito,itok->itk', shares, squared))
    logger.info('Computed cultural diversity indicators for %d countries and %d years', len(countries), len(years))
    return IndicatorPanel(
        countries=cli.countries,
        years=cli.years,
        cli=cli.cli,
        cdi=frozen_array(cdi),
        own_scores=cli.own_scores)


def build_weights(tensor, panel, grid):
    """
        w[t][i][o] = BIC[i,t,o] / (POP[i,t] - BIC[i,t,i]) over grid
        countries, zero diagonal, rows not renormalised after dropping
        origins outside the grid
    """
    countries, years = grid
    columns = [tensor.index(code) for code in countries]
    matrices = np.zeros([len(years), len(countries), len(countries)])
    for t, year in enumerate(years):
        y = tensor.year_index(year)
        for i, code in enumerate(countries):
            d = columns[i]
            numerators = tensor.counts[d, y, columns].copy()
            numerators[i] = 0.0
            if not np.any(numerators > 0):
                continue
            denominator = panel.pop(code, year) - tensor.counts[d, y, d]
            if not denominator > 0:
                raise DomainError('weight row of {} in {} has foreign-born migrants but '
                                  'non-positive denominator {}'.format(code, year, denominator))
            matrices[t, i] = numerators / denominator

        row_sums = matrices[t].sum(axis=1)
        if np.any(row_sums > 1 + 1e-12):
            logger.warning('%d weight rows in %d sum above one', int(np.sum(row_sums > 1 + 1e-12)), year)

    logger.info('Built spatial weights for %d years over %d countries', len(years), len(countries))
    return SpatialWeights(countries=tuple(countries), years=tuple(years), matrices=frozen_array(matrices))
