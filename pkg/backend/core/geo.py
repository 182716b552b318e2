"""
Geo Module

Maps raw locations to the nearest cloud region and synthesizes an RTT
matrix from great-circle distances when no measured one is supplied.
"""

import math
from typing import Sequence

import numpy as np

from .domain import GeoPoint, Region, RegionSet, RttMatrix
from .errors import EmptyRegionSetError


EARTH_RADIUS_KM = 6371.0
DEFAULT_BASE_RTT_MS = 8.8
DEFAULT_MS_PER_KM = 0.02


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    """
    Great-circle distance between two points.

    Args:
        a: First point
        b: Second point

    Returns:
        Distance in km on a sphere of radius 6371 km
    """
    lat1 = math.radians(a.latitude)
    lat2 = math.radians(b.latitude)
    dlat = lat2 - lat1
    dlon = math.radians(b.longitude - a.longitude)
    sin_lat = math.sin(dlat * 0.5)
    sin_lon = math.sin(dlon * 0.5)
    h = sin_lat * sin_lat + math.cos(lat1) * math.cos(lat2) * sin_lon * sin_lon
    h = min(1.0, max(0.0, h))
    return 2.0 * EARTH_RADIUS_KM * math.asin(math.sqrt(h))


def nearest_region(p: GeoPoint, regions: Sequence[Region]) -> int:
    """
    Id of the region closest to ``p``; equal distances go to the lowest id.

    Accepts a RegionSet or any sequence of Region.

    Raises:
        EmptyRegionSetError: if there are no regions
    """
    if isinstance(regions, RegionSet):
        regions = regions.regions
    if not regions:
        raise EmptyRegionSetError("Cannot map a location onto an empty region set")

    best_id = -1
    best_km = math.inf
    for region in sorted(regions, key=lambda r: r.id):
        km = haversine_km(p, region.point)
        if km < best_km:
            best_id, best_km = region.id, km
    return best_id


def distance_matrix_km(regions: Sequence[Region]) -> np.ndarray:
    """Pairwise haversine distances indexed by region id."""
    ordered = sorted(regions, key=lambda r: r.id)
    n = len(ordered)
    km = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i + 1, n):
            km[i, j] = km[j, i] = haversine_km(ordered[i].point, ordered[j].point)
    return km


def synthesize_rtt(
    regions: Sequence[Region],
    base_ms: float = DEFAULT_BASE_RTT_MS,
    ms_per_km: float = DEFAULT_MS_PER_KM,
) -> RttMatrix:
    """
    RTT model d[i][j] = base_ms + ms_per_km * distance(i, j).

    The diagonal is ``base_ms``: serving a viewer from its own region still
    costs the closest-region latency.
    """
    if isinstance(regions, RegionSet):
        regions = regions.regions
    if base_ms <= 0:
        raise ValueError(f"base_ms must be positive, got {base_ms}")
    if not regions:
        raise EmptyRegionSetError("Cannot synthesize RTT for an empty region set")

    d = base_ms + ms_per_km * distance_matrix_km(regions)
    return RttMatrix(d=d.tolist())


def build_region_set(
    regions: Sequence[Region],
    base_ms: float = DEFAULT_BASE_RTT_MS,
    ms_per_km: float = DEFAULT_MS_PER_KM,
) -> RegionSet:
    """RegionSet with a synthesized RTT matrix."""
    return RegionSet(regions=list(regions), rtt=synthesize_rtt(regions, base_ms, ms_per_km))
