"""
    Loaders for the five input tables and the observation grid built from
    them. A country enters the grid only with a complete governance row
    (all six indicators) in at least one grid year, since the regression
    drops every (country, year) missing any of the six.
"""
from . import country_data
from .country_data import DIMENSIONS, INDICATORS, ExclusionReport, frozen_array
from .errors import InputError

import logging
import os
import re

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

REGISTRY_COLUMNS = ('code', 'name', 'lat', 'lon')
HOFSTEDE_COLUMNS = ('code',) + tuple(d.lower() for d in DIMENSIONS)
MIGRANT_COLUMNS = ('dest', 'year', 'origin', 'count')
POPULATION_COLUMNS = ('code', 'year', 'pop')
WGI_COLUMNS = ('code', 'year') + tuple(j.lower() for j in INDICATORS)

UNKNOWN_ORIGIN = 'OTHER'
CODE_PATTERN = re.compile(r'^[A-Z]{3}$')


def _line(row_number):
    # header is line 1
    return row_number + 2


def read_table(path, columns, what):
    """reads a header-first utf-8 csv as text, empty cell = ''"""
    if not os.path.isfile(path):
        raise InputError('{} file not found: {}'.format(what, path))
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding='utf-8')
    except pd.errors.EmptyDataError:
        raise InputError('{} file is empty: {}'.format(what, path))
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise InputError('{} file {} could not be parsed: {}'.format(what, path, exc))

    header = [str(c).strip().lower() for c in frame.columns]
    if header != list(columns):
        raise InputError('malformed header in {} file {}: expected {}, got {}'.format(
            what, path, ','.join(columns), ','.join(header)))
    frame.columns = header
    return frame.apply(lambda col: col.str.strip())


def parse_float(text):
    """None for an empty cell, ValueError when unparseable"""
    if text == '':
        return None
    return float(text)


def parse_year(text, path, row_number):
    try:
        return int(text)
    except ValueError:
        raise InputError('{} line {}: year {!r} is not an integer'.format(path, _line(row_number), text))


def find_duplicates(keys):
    """map of key -> list of row numbers for keys seen more than once"""
    seen = {}
    for row_number, key in enumerate(keys):
        seen.setdefault(key, []).append(row_number)
    return {key: rows for key, rows in seen.items() if len(rows) > 1}


def _raise_on_duplicates(keys, path, what):
    duplicates = find_duplicates(keys)
    if duplicates:
        key, rows = sorted(duplicates.items(), key=lambda item: item[1][0])[0]
        raise InputError('duplicate {} rows for {} in {} at lines {}'.format(
            what, key, path, ', '.join(str(_line(r)) for r in rows)))


def load_registry(path):
    frame = read_table(path, REGISTRY_COLUMNS, 'registry')
    _raise_on_duplicates(list(frame['code']), path, 'registry')

    records = []
    for row_number, row in enumerate(frame.itertuples(index=False)):
        if not CODE_PATTERN.match(row.code):
            raise InputError('{} line {}: country code {!r} is not a 3-letter uppercase code'.format(
                path, _line(row_number), row.code))
        try:
            lat = parse_float(row.lat)
            lon = parse_float(row.lon)
        except ValueError:
            raise InputError('{} line {}: unparseable centroid'.format(path, _line(row_number)))
        lat = np.nan if lat is None else lat
        lon = np.nan if lon is None else lon
        if not (np.isnan(lat) or -90.0 <= lat <= 90.0) or not (np.isnan(lon) or -180.0 <= lon <= 180.0):
            raise InputError('{} line {}: centroid ({}, {}) out of range'.format(path, _line(row_number), lat, lon))
        records.append((row.code, row.name, lat, lon))

    records.sort(key=lambda r: r[0])
    logger.info('Loaded %d registry entries from %s', len(records), path)
    return country_data.CountryRegistry(
        codes=tuple(r[0] for r in records),
        names=tuple(r[1] for r in records),
        latitudes=frozen_array([r[2] for r in records]),
        longitudes=frozen_array([r[3] for r in records]))


def load_hofstede(path, registry):
    frame = read_table(path, HOFSTEDE_COLUMNS, 'hofstede')
    _raise_on_duplicates(list(frame['code']), path, 'hofstede')

    scores = {}
    unresolved = []
    low, high = country_data.SCORE_RANGE
    for row_number, row in enumerate(frame.itertuples(index=False)):
        code = row.code
        if code not in registry:
            unresolved.append((code, 'hofstede line {}: code not in registry'.format(_line(row_number))))
            continue
        values = []
        for dimension, text in zip(DIMENSIONS, row[1:]):
            try:
                value = parse_float(text)
            except ValueError:
                logger.warning('%s line %d: unparseable %s score %r recorded as missing',
                               path, _line(row_number), dimension, text)
                value = None
            if value is not None and not low <= value <= high:
                raise InputError('{} line {}: {} score {} outside [{}, {}]'.format(
                    path, _line(row_number), dimension, value, low, high))
            values.append(np.nan if value is None else value)
        scores[code] = values

    if unresolved:
        logger.warning('%d hofstede rows with unresolved codes', len(unresolved))
    codes = tuple(sorted(scores))
    logger.info('Loaded hofstede scores for %d countries from %s', len(codes), path)
    return country_data.HofstedeTable(
        codes=codes,
        scores=frozen_array([scores[c] for c in codes]).reshape(len(codes), len(DIMENSIONS)),
        unresolved=ExclusionReport(tuple(unresolved)),
        rows_read=len(frame),
        rows_stored=len(codes))


def load_migrant_stock(path, registry):
    frame = read_table(path, MIGRANT_COLUMNS, 'migrant stock')

    known = []
    other = []
    unresolved = []
    for row_number, row in enumerate(frame.itertuples(index=False)):
        year = parse_year(row.year, path, row_number)
        try:
            count = parse_float(row[3])
        except ValueError:
            count = None
        if count is None or not np.isfinite(count):
            raise InputError('{} line {}: count {!r} is not a number'.format(path, _line(row_number), row[3]))
        if count < 0:
            raise InputError('{} line {}: negative count {}'.format(path, _line(row_number), row[3]))

        missing = [c for c in (row.dest, row.origin) if c != UNKNOWN_ORIGIN and c not in registry]
        if row.dest == UNKNOWN_ORIGIN or missing:
            code = row.dest if row.dest == UNKNOWN_ORIGIN else missing[0]
            unresolved.append((code, 'migrant stock line {}: code not in registry'.format(_line(row_number))))
            continue
        if row.origin == UNKNOWN_ORIGIN:
            other.append((row.dest, year, count))
        else:
            known.append(((row.dest, year, row.origin), count, row_number))

    # OTHER rows may legitimately come in several pieces, named origins may not
    duplicates = find_duplicates([key for key, _, _ in known])
    if duplicates:
        key, rows = sorted(duplicates.items(), key=lambda item: item[1][0])[0]
        lines = ', '.join(str(_line(known[r][2])) for r in rows)
        raise InputError('duplicate migrant stock rows for {} in {} at lines {}'.format(key, path, lines))

    codes = sorted({k[0] for k, _, _ in known} | {k[2] for k, _, _ in known} | {d for d, _, _ in other})
    years = sorted({k[1] for k, _, _ in known} | {y for _, y, _ in other})
    code_index = {c: i for i, c in enumerate(codes)}
    year_index = {y: i for i, y in enumerate(years)}

    counts = np.zeros([len(codes), len(years), len(codes)])
    unknown = np.zeros([len(codes), len(years)])
    covered = np.zeros([len(codes), len(years)], dtype=bool)
    for (dest, year, origin), count, _ in known:
        d, y = code_index[dest], year_index[year]
        counts[d, y, code_index[origin]] = count
        covered[d, y] = True
    for dest, year, count in other:
        d, y = code_index[dest], year_index[year]
        unknown[d, y] += count
        covered[d, y] = True

    if unresolved:
        logger.warning('%d migrant stock rows with unresolved codes', len(unresolved))
    logger.info('Loaded %d migrant stock rows for %d countries and %d years from %s',
                len(known) + len(other), len(codes), len(years), path)
    return country_data.MigrantStockTensor(
        codes=tuple(codes),
        years=tuple(years),
        counts=frozen_array(counts),
        unknown_origin=frozen_array(unknown),
        covered=frozen_array(covered, dtype=bool),
        unresolved=ExclusionReport(tuple(unresolved)),
        rows_read=len(frame),
        rows_stored=len(known) + len(other))


def load_panel(path_pop, path_wgi, registry):
    pop_frame = read_table(path_pop, POPULATION_COLUMNS, 'population')
    wgi_frame = read_table(path_wgi, WGI_COLUMNS, 'governance')

    unresolved = []
    population = {}
    pop_keys = [(row.code, parse_year(row.year, path_pop, r)) for r, row in enumerate(pop_frame.itertuples(index=False))]
    _raise_on_duplicates(pop_keys, path_pop, 'population')
    for row_number, (key, row) in enumerate(zip(pop_keys, pop_frame.itertuples(index=False))):
        if key[0] not in registry:
            unresolved.append((key[0], 'population line {}: code not in registry'.format(_line(row_number))))
            continue
        try:
            value = parse_float(row.pop)
        except ValueError:
            raise InputError('{} line {}: population {!r} is not a number'.format(path_pop, _line(row_number), row.pop))
        if value is None:
            unresolved.append((key[0], 'population line {}: missing population for {}'.format(_line(row_number), key[1])))
            continue
        if not value > 0:
            raise InputError('{} line {}: population must be positive, got {}'.format(path_pop, _line(row_number), row.pop))
        population[key] = value

    wgi = {}
    wgi_keys = [(row.code, parse_year(row.year, path_wgi, r)) for r, row in enumerate(wgi_frame.itertuples(index=False))]
    _raise_on_duplicates(wgi_keys, path_wgi, 'governance')
    low, high = country_data.WGI_NOMINAL_RANGE
    for row_number, (key, row) in enumerate(zip(wgi_keys, wgi_frame.itertuples(index=False))):
        if key[0] not in registry:
            unresolved.append((key[0], 'governance line {}: code not in registry'.format(_line(row_number))))
            continue
        values = []
        for indicator, text in zip(INDICATORS, row[2:]):
            try:
                value = parse_float(text)
            except ValueError:
                raise InputError('{} line {}: {} value {!r} is not a number'.format(
                    path_wgi, _line(row_number), indicator, text))
            if value is not None and not low <= value <= high:
                logger.warning('%s line %d: %s value %s outside the nominal [%s, %s] range',
                               path_wgi, _line(row_number), indicator, value, low, high)
            values.append(np.nan if value is None else value)
        wgi[key] = values

    mismatches = []
    for code, year in sorted(set(wgi) - set(population)):
        mismatches.append((code, 'governance row for {} has no population row'.format(year)))
    for code, year in sorted(set(population) - set(wgi)):
        mismatches.append((code, 'population row for {} has no governance row'.format(year)))
    if mismatches:
        logger.warning('%d (country, year) keys present in only one of the population and governance files',
                       len(mismatches))
    if unresolved:
        logger.warning('%d population/governance rows unresolved', len(unresolved))

    codes = sorted({c for c, _ in population} | {c for c, _ in wgi})
    years = sorted({y for _, y in population} | {y for _, y in wgi})
    code_index = {c: i for i, c in enumerate(codes)}
    year_index = {y: i for i, y in enumerate(years)}
    pop_array = np.full([len(codes), len(years)], np.nan)
    wgi_array = np.full([len(codes), len(years), len(INDICATORS)], np.nan)
    for (code, year), value in population.items():
        pop_array[code_index[code], year_index[year]] = value
    for (code, year), values in wgi.items():
        wgi_array[code_index[code], year_index[year]] = values

    logger.info('Loaded population for %d and governance for %d (country, year) pairs',
                len(population), len(wgi))
    return country_data.CountryPanel(
        codes=tuple(codes),
        years=tuple(years),
        population=frozen_array(pop_array),
        wgi=frozen_array(wgi_array),
        mismatches=ExclusionReport(tuple(mismatches)),
        unresolved=ExclusionReport(tuple(unresolved)),
        rows_read=len(pop_frame) + len(wgi_frame),
        rows_stored=len(population) + len(wgi))


def _grid_exclusion_reason(code, years, tensor, panel, hofstede):
    """first reason a country cannot enter the grid, None when it can"""
    if code not in hofstede:
        return 'no Hofstede scores'
    if not hofstede.is_complete(code):
        missing = [d for d, v in zip(DIMENSIONS, hofstede.row(code)) if not np.isfinite(v)]
        return 'missing Hofstede scores: {}'.format(' '.join(missing))
    for year in years:
        if not np.isfinite(panel.pop(code, year)):
            return 'no population for {}'.format(year)
    for year in years:
        if not tensor.is_covered(code, year):
            return 'no migrant stock for {}'.format(year)
    for year in years:
        # relative slack for fractional counts
        if tensor.recorded_total(code, year) > panel.pop(code, year) * (1 + 1e-9):
            return 'migrant stock exceeds population in {}'.format(year)
    if not any(np.all(np.isfinite(panel.indicators(code, year))) for year in years):
        return 'no complete governance indicators in any grid year'
    return None


def build_observation_grid(tensor, panel, hofstede, years=None):
    """
        countries with complete observed hofstede scores, population and
        migrant stock in every retained year and all six governance
        indicators in at least one. retained years are those covered by all
        three sources.
    """
    pop_years = {y for i, y in enumerate(panel.years) if np.any(np.isfinite(panel.population[:, i]))}
    wgi_years = {y for i, y in enumerate(panel.years) if np.any(np.isfinite(panel.wgi[:, i]))}
    grid_years = set(tensor.years) & pop_years & wgi_years
    if years is not None:
        grid_years &= set(years)
    grid_years = tuple(sorted(grid_years))
    if not grid_years:
        raise InputError('empty observation grid: no year is covered by migrant stock, population and governance data')

    candidates = sorted(set(hofstede.codes) | set(panel.codes)
                        | {c for c in tensor.codes if np.any(tensor.covered[tensor.index(c)])})
    countries = []
    exclusions = []
    for code in candidates:
        reason = _grid_exclusion_reason(code, grid_years, tensor, panel, hofstede)
        if reason is None:
            countries.append(code)
        else:
            exclusions.append((code, reason))

    if not countries:
        raise InputError('empty observation grid: all {} candidate countries excluded'.format(len(candidates)))
    logger.info('Observation grid: %d countries, years %s, %d excluded',
                len(countries), ', '.join(str(y) for y in grid_years), len(exclusions))
    return country_data.ObservationGrid(tuple(countries), grid_years, ExclusionReport(tuple(exclusions)))


class InputPipeline:
    """
        Loads the registry and the three datasets and aligns them into an
        observation grid. Keeps every intermediate structure around so the
        commands can write exports and reports from them.
    """

    def __init__(self, registry, hofstede, migrants, population, wgi, years=None):
        """
            registry, hofstede, migrants, population, wgi: csv paths
            years: optional restriction of the observation years
        """
        logger.info('Getting all input files ...')
        self.registry = load_registry(registry)
        self.hofstede = load_hofstede(hofstede, self.registry)
        self.migrants = load_migrant_stock(migrants, self.registry)
        self.panel = load_panel(population, wgi, self.registry)
        self.grid = build_observation_grid(self.migrants, self.panel, self.hofstede, years=years)

    def exclusion_report(self):
        """loader reports followed by the grid exclusions"""
        return self.hofstede.unresolved.merged(
            self.migrants.unresolved,
            self.panel.unresolved,
            self.panel.mismatches,
            self.grid.exclusions)
