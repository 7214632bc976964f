import os

import numpy as np
import pytest

from culture_governance import country_data, indicators, simulate
from culture_governance.country_data import DIMENSIONS, INDICATORS, frozen_array

FIVE_CODES = ('AUT', 'BEL', 'CZE', 'DNK', 'EST')
FIVE_CENTROIDS = {
    'AUT': (47.59, 14.14),
    'BEL': (50.64, 4.64),
    'CZE': (49.73, 15.31),
    'DNK': (55.98, 10.03),
    'EST': (58.67, 25.54),
}
FIVE_SCORES = {
    'AUT': (11, 55, 79, 70, 60, 63),
    'BEL': (65, 75, 54, 94, 82, 57),
    'CZE': (57, 58, 57, 74, 70, 29),
    'DNK': (18, 74, 16, 23, 35, 70),
}
FIVE_YEARS = (2000, 2005)


def _write(path, header, rows):
    with open(path, 'w', encoding='utf-8') as f:
        f.write(header + '\n')
        for row in rows:
            f.write(','.join('' if v is None else str(v) for v in row) + '\n')
    return str(path)


@pytest.fixture
def write_csv(tmp_path):
    """write_csv(name, header, rows) -> path inside tmp_path"""
    def writer(name, header, rows):
        return _write(os.path.join(str(tmp_path), name), header, rows)
    return writer


@pytest.fixture
def five_country_files(write_csv):
    """
        five countries over two years, EST without Hofstede scores and AUT
        with 20 unknown-origin migrants per year
    """
    registry = write_csv('registry.csv', 'code,name,lat,lon',
                         [(c, 'Country {}'.format(c)) + FIVE_CENTROIDS[c] for c in FIVE_CODES])
    hofstede = write_csv('hofstede.csv', 'code,pdi,idv,mas,uai,lto,ivr',
                         [(c,) + FIVE_SCORES[c] for c in FIVE_CODES if c in FIVE_SCORES])
    migrants = []
    for dest in FIVE_CODES:
        for year in FIVE_YEARS:
            migrants.append((dest, year, dest, 900))
            for origin in FIVE_CODES:
                if origin != dest:
                    migrants.append((dest, year, origin, 20))
            if dest == 'AUT':
                migrants.append((dest, year, 'OTHER', 20))
    migrants = write_csv('migrants.csv', 'dest,year,origin,count', migrants)
    population = write_csv('population.csv', 'code,year,pop',
                           [(c, y, 1000) for c in FIVE_CODES for y in FIVE_YEARS])
    wgi = write_csv('wgi.csv', 'code,year,va,pv,ge,rq,rl,cc',
                    [(c, y) + tuple(round(0.3 * i - 0.1 * j + 0.05 * t, 2) for j in range(len(INDICATORS)))
                     for i, c in enumerate(FIVE_CODES) for t, y in enumerate(FIVE_YEARS)])
    return {'registry': registry, 'hofstede': hofstede, 'migrants': migrants,
            'population': population, 'wgi': wgi}


@pytest.fixture
def make_registry():
    def build(codes, centroids):
        return country_data.CountryRegistry(
            codes=tuple(codes),
            names=tuple(codes),
            latitudes=frozen_array([centroids[c][0] for c in codes]),
            longitudes=frozen_array([centroids[c][1] for c in codes]))
    return build


@pytest.fixture
def make_hofstede():
    def build(scores):
        codes = tuple(sorted(scores))
        values = np.array([scores[c] for c in codes], dtype=float).reshape(len(codes), len(DIMENSIONS))
        return country_data.HofstedeTable(codes=codes, scores=frozen_array(values))
    return build


@pytest.fixture
def make_tensor():
    """counts given as {(dest, year, origin): persons}, unknown as {(dest, year): persons}"""
    def build(codes, years, counts, unknown=None):
        unknown = unknown or {}
        index = {c: i for i, c in enumerate(codes)}
        year_index = {y: i for i, y in enumerate(years)}
        array = np.zeros([len(codes), len(years), len(codes)])
        other = np.zeros([len(codes), len(years)])
        covered = np.zeros([len(codes), len(years)], dtype=bool)
        for (dest, year, origin), value in counts.items():
            array[index[dest], year_index[year], index[origin]] = value
            covered[index[dest], year_index[year]] = True
        for (dest, year), value in unknown.items():
            other[index[dest], year_index[year]] = value
            covered[index[dest], year_index[year]] = True
        return country_data.MigrantStockTensor(
            codes=tuple(codes),
            years=tuple(years),
            counts=frozen_array(array),
            unknown_origin=frozen_array(other),
            covered=frozen_array(covered, dtype=bool))
    return build


@pytest.fixture
def make_panel():
    def build(codes, years, population, wgi=None):
        population = np.asarray(population, dtype=float).reshape(len(codes), len(years))
        if wgi is None:
            wgi = np.zeros([len(codes), len(years), len(INDICATORS)])
        return country_data.CountryPanel(
            codes=tuple(codes),
            years=tuple(years),
            population=frozen_array(population),
            wgi=frozen_array(wgi))
    return build


@pytest.fixture
def small_simulation():
    """a config small enough for repeated fits"""
    return simulate.SimulationConfig(n_countries=15, n_periods=3, n_equations=2, n_regressors=2,
                                     true_lambda=(0.3, -0.2), true_phi=(0.6, 0.4),
                                     true_sigma=((1.0, 0.4), (0.4, 0.8)), seed=7)


@pytest.fixture
def random_weights_factory():
    def build(countries, years, rng, row_sum=0.8, density=0.5):
        matrices = simulate.random_weights(len(countries), len(years), rng, row_sum, density)
        return indicators.SpatialWeights(tuple(countries), tuple(years), frozen_array(matrices))
    return build


@pytest.fixture
def synthetic_files(tmp_path):
    """a complete synthetic input set written by the simulate module"""
    cfg = simulate.SimulationConfig(n_countries=12, n_periods=3, seed=11)
    directory = os.path.join(str(tmp_path), 'data')
    return simulate.SyntheticWorld(cfg).write(directory)


@pytest.fixture
def compare_files(tmp_path):
    """more complete observations than the 78 coefficients of the largest fit"""
    cfg = simulate.SimulationConfig(n_countries=30, n_periods=4, seed=11)
    directory = os.path.join(str(tmp_path), 'compare_data')
    return simulate.SyntheticWorld(cfg).write(directory)
