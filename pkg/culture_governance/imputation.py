from . import country_data
from . import utils
from .country_data import DIMENSIONS, frozen_array
from .errors import DomainError, InputError

import logging

import numpy as np

logger = logging.getLogger(__name__)

WEIGHTINGS = ('mean', 'inverse_distance', 'inverse_square')


def nearest_donors(code, donors, registry, k_neighbors):
    """
        the k_neighbors donor codes closest to code by great-circle
        distance between centroids, closest first. ties go to the
        alphabetically smaller code.

        output:
            list of (donor_code, distance_km)
    """
    lat, lon = registry.centroid(code)
    donor_lat = np.array([registry.centroid(d)[0] for d in donors])
    donor_lon = np.array([registry.centroid(d)[1] for d in donors])
    distances = utils.great_circle_km(lat, lon, donor_lat, donor_lon)

    # sort on distance then code
    ranked = sorted(zip(distances.tolist(), donors), key=lambda x: (x[0], x[1]))
    return [(d, dist) for dist, d in ranked[:k_neighbors]]


def donor_weights(distances, weighting):
    distances = np.asarray(distances, dtype=float)
    if weighting == 'mean':
        return np.full(len(distances), 1.0 / len(distances))
    # donors sharing the target's centroid take all the weight
    if np.any(distances == 0):
        weights = (distances == 0).astype(float)
    else:
        power = 1.0 if weighting == 'inverse_distance' else 2.0
        weights = distances ** -power
    return weights / weights.sum()


def impute_hofstede(table, registry, k_neighbors=5, weighting='mean'):
    """
        fills every missing score of every registry country from its
        k_neighbors nearest countries with a complete observed score row.
        observed scores are never changed and imputed values never feed
        other imputations.
    """
    if k_neighbors < 1:
        raise InputError('k_neighbors must be a positive integer, got {}'.format(k_neighbors))
    if weighting not in WEIGHTINGS:
        raise InputError('unknown imputation weighting {!r}, expected one of {}'.format(weighting, WEIGHTINGS))

    universe = registry.codes
    donors = []
    for code in table.complete_codes():
        if registry.has_centroid(code):
            donors.append(code)
        else:
            logger.warning('%s has observed scores but no centroid, not used as a donor', code)
    donors.sort()
    needs_imputation = [c for c in universe if not table.is_complete(c)]
    if needs_imputation and len(donors) < k_neighbors:
        raise InputError('imputation of {} countries needs at least {} donor countries with observed scores, '
                         'found {}'.format(len(needs_imputation), k_neighbors, len(donors)))

    scores = np.full([len(universe), len(DIMENSIONS)], np.nan)
    donor_map = {}
    n_imputed = 0
    for c, code in enumerate(universe):
        if code in table:
            scores[c] = table.row(code)
        missing = ~np.isfinite(scores[c])
        if not np.any(missing):
            continue
        if not registry.has_centroid(code):
            raise InputError('cannot impute Hofstede scores for {}: no centroid in the registry'.format(code))

        neighbours = nearest_donors(code, donors, registry, k_neighbors)
        weights = donor_weights([dist for _, dist in neighbours], weighting)
        donor_scores = np.array([table.row(d) for d, _ in neighbours])
        scores[c, missing] = weights @ donor_scores[:, missing]
        donor_map[code] = tuple(d for d, _ in neighbours)
        n_imputed += 1

    logger.info('Imputed Hofstede scores for %d of %d countries from %d donors (k=%d, %s)',
                n_imputed, len(universe), len(donors), k_neighbors, weighting)
    observed = np.zeros_like(scores, dtype=bool)
    for c, code in enumerate(universe):
        if code in table:
            observed[c] = np.isfinite(table.row(code))
    return country_data.ImputedHofstedeTable(
        codes=tuple(universe),
        scores=frozen_array(scores),
        observed=frozen_array(observed, dtype=bool),
        donors=donor_map)


def redistribute_unknown(tensor):
    """
        splits each unknown-origin count over the named origins of the same
        year in proportion to their total emigrant stock, never onto the
        destination itself
    """
    counts = np.array(tensor.counts, copy=True)
    n_moved = 0
    for y, year in enumerate(tensor.years):
        emigrants = tensor.emigrant_totals(year)
        for d, dest in enumerate(tensor.codes):
            unknown = tensor.unknown_origin[d, y]
            if unknown <= 0:
                continue
            shares = emigrants.copy()
            shares[d] = 0.0
            total = shares.sum()
            if not total > 0:
                raise DomainError('cannot redistribute {} unknown-origin migrants of {} in {}: '
                                  'no origin has emigrants that year'.format(unknown, dest, year))
            counts[d, y] += unknown * shares / total
            n_moved += 1

    logger.info('Redistributed unknown-origin migrants for %d (destination, year) pairs', n_moved)
    return country_data.MigrantStockTensor(
        codes=tensor.codes,
        years=tensor.years,
        counts=frozen_array(counts),
        unknown_origin=frozen_array(np.zeros_like(tensor.unknown_origin)),
        covered=tensor.covered,
        unresolved=tensor.unresolved,
        rows_read=tensor.rows_read,
        rows_stored=tensor.rows_stored)
