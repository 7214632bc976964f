"""
    Immutable containers shared by the loaders, the imputation and the
    indicator computation. Every array is indexed by the sorted tuple of
    country codes it carries, so two containers built from identical
    files are identical element for element.
"""
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

DIMENSIONS = ('PDI', 'IDV', 'MAS', 'UAI', 'LTO', 'IVR')
INDICATORS = ('VA', 'PV', 'GE', 'RQ', 'RL', 'CC')

SCORE_RANGE = (0.0, 120.0)
WGI_NOMINAL_RANGE = (-2.5, 2.5)


def frozen_array(values, dtype=float):
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class ExclusionReport:
    """rows of (code, reason), written as the `code,reason` csv"""
    rows: tuple = ()

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def codes(self):
        return [code for code, _ in self.rows]

    def merged(self, *others):
        rows = list(self.rows)
        for other in others:
            rows.extend(other.rows)
        return ExclusionReport(tuple(rows))

    def to_frame(self):
        return pd.DataFrame(list(self.rows), columns=['code', 'reason'])


@dataclass(frozen=True, eq=False)
class CountryRegistry:
    codes: tuple
    names: tuple
    latitudes: np.ndarray
    longitudes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, '_index', {c: i for i, c in enumerate(self.codes)})

    def __len__(self):
        return len(self.codes)

    def __contains__(self, code):
        return code in self._index

    def index(self, code):
        return self._index[code]

    def centroid(self, code):
        i = self._index[code]
        return self.latitudes[i], self.longitudes[i]

    def has_centroid(self, code):
        if code not in self._index:
            return False
        lat, lon = self.centroid(code)
        return bool(np.isfinite(lat) and np.isfinite(lon))


@dataclass(frozen=True, eq=False)
class HofstedeTable:
    """scores[c, k] for the sorted codes, NaN where missing"""
    codes: tuple
    scores: np.ndarray
    unresolved: ExclusionReport = field(default_factory=ExclusionReport)
    rows_read: int = 0
    rows_stored: int = 0

    def __post_init__(self):
        object.__setattr__(self, '_index', {c: i for i, c in enumerate(self.codes)})

    def __contains__(self, code):
        return code in self._index

    def row(self, code):
        return self.scores[self._index[code]]

    def score(self, code, dimension):
        return self.scores[self._index[code], DIMENSIONS.index(dimension)]

    def is_complete(self, code):
        return code in self._index and bool(np.all(np.isfinite(self.row(code))))

    def complete_codes(self):
        return tuple(c for c in self.codes if self.is_complete(c))


@dataclass(frozen=True, eq=False)
class ImputedHofstedeTable:
    """
        complete scores over the origin universe. observed[c, k] marks the
        cells taken from the input table, donors[c] lists the codes whose
        scores filled the remaining cells of c.
    """
    codes: tuple
    scores: np.ndarray
    observed: np.ndarray
    donors: dict

    def __post_init__(self):
        object.__setattr__(self, '_index', {c: i for i, c in enumerate(self.codes)})

    def __contains__(self, code):
        return code in self._index

    def index(self, code):
        return self._index[code]

    def row(self, code):
        return self.scores[self._index[code]]

    def provenance(self, code):
        return 'observed' if bool(np.all(self.observed[self._index[code]])) else 'imputed'

    def to_frame(self):
        records = []
        for c, code in enumerate(self.codes):
            donor_list = ' '.join(self.donors.get(code, ()))
            for k, dimension in enumerate(DIMENSIONS):
                observed = bool(self.observed[c, k])
                records.append({
                    'code': code,
                    'dimension': dimension,
                    'value': self.scores[c, k],
                    'provenance': 'observed' if observed else 'imputed',
                    'donors': '' if observed else donor_list,
                })
        return pd.DataFrame(records, columns=['code', 'dimension', 'value', 'provenance', 'donors'])


@dataclass(frozen=True, eq=False)
class MigrantStockTensor:
    """
        counts[d, y, o] persons living in codes[d] born in codes[o] at
        years[y]; one code axis serves destinations and origins. covered
        marks the (dest, year) pairs that appear in the file at all.
    """
    codes: tuple
    years: tuple
    counts: np.ndarray
    unknown_origin: np.ndarray
    covered: np.ndarray
    unresolved: ExclusionReport = field(default_factory=ExclusionReport)
    rows_read: int = 0
    rows_stored: int = 0

    def __post_init__(self):
        object.__setattr__(self, '_index', {c: i for i, c in enumerate(self.codes)})
        object.__setattr__(self, '_year_index', {y: i for i, y in enumerate(self.years)})

    def __contains__(self, code):
        return code in self._index

    def index(self, code):
        return self._index[code]

    def year_index(self, year):
        return self._year_index[year]

    def count(self, dest, year, origin):
        return self.counts[self._index[dest], self._year_index[year], self._index[origin]]

    def unknown(self, dest, year):
        return self.unknown_origin[self._index[dest], self._year_index[year]]

    def is_covered(self, dest, year):
        if dest not in self._index or year not in self._year_index:
            return False
        return bool(self.covered[self._index[dest], self._year_index[year]])

    def recorded_total(self, dest, year):
        d, y = self._index[dest], self._year_index[year]
        return self.counts[d, y].sum() + self.unknown_origin[d, y]

    def emigrant_totals(self, year):
        """emig[o] = sum over destinations d != o of counts[d, year, o]"""
        block = self.counts[:, self._year_index[year], :]
        return block.sum(axis=0) - np.diagonal(block)


@dataclass(frozen=True, eq=False)
class CountryPanel:
    """population[c, y] and wgi[c, y, j], NaN where missing"""
    codes: tuple
    years: tuple
    population: np.ndarray
    wgi: np.ndarray
    mismatches: ExclusionReport = field(default_factory=ExclusionReport)
    unresolved: ExclusionReport = field(default_factory=ExclusionReport)
    rows_read: int = 0
    rows_stored: int = 0

    def __post_init__(self):
        object.__setattr__(self, '_index', {c: i for i, c in enumerate(self.codes)})
        object.__setattr__(self, '_year_index', {y: i for i, y in enumerate(self.years)})

    def __contains__(self, code):
        return code in self._index

    def has_year(self, year):
        return year in self._year_index

    def pop(self, code, year):
        if code not in self._index or not self.has_year(year):
            return np.nan
        return self.population[self._index[code], self._year_index[year]]

    def indicators(self, code, year):
        if code not in self._index or not self.has_year(year):
            return np.full(len(INDICATORS), np.nan)
        return self.wgi[self._index[code], self._year_index[year]]


@dataclass(frozen=True)
class ObservationGrid:
    """countries and years entering the indicators and the regression"""
    countries: tuple
    years: tuple
    exclusions: ExclusionReport = field(default_factory=ExclusionReport)

    def __iter__(self):
        # unpacks as (countries, years)
        return iter((self.countries, self.years))
