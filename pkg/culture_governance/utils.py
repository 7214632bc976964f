import logging

import numpy as np

logger = logging.getLogger(__name__)

EARTH_RADIUS_KM = 6371.0

# (threshold, stars), checked in order
STAR_LEVELS = ((0.001, '***'), (0.01, '**'), (0.05, '*'))


def great_circle_km(lat1, lon1, lat2, lon2):
    """
        haversine distance in kilometres, broadcasts over numpy arrays
        of latitudes and longitudes given in degrees
    """
    lat1, lon1, lat2, lon2 = map(np.radians, (lat1, lon1, lat2, lon2))
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    a = np.sin(dlat / 2) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin(dlon / 2) ** 2
    # clip guards the arcsin against rounding just above 1
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def significance_stars(p_value):
    if p_value is None or not np.isfinite(p_value):
        return ''
    for threshold, stars in STAR_LEVELS:
        if p_value < threshold:
            return stars
    return ''


def log_progress(iteration, total, prefix='', every=1):
    """logs 'prefix i/total (pct%)' every `every` iterations and at the end"""
    if total <= 0:
        return
    if iteration % every == 0 or iteration == total:
        percent = 100.0 * iteration / float(total)
        logger.info('%s %d/%d (%.1f%%)', prefix, iteration, total, percent)
