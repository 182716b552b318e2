"""
Feature Encoding

Turns RawFeatures into the dense vector the regression models consume.
Block order (fixed):

    [ hashed broadcaster name | hashed content category |
      time period one-hot (6) | created day one-hot (7) |
      broadcaster region one-hot (n) ]

High-cardinality text features use the signed hashing trick; everything
else is one-hot encoded.
"""

import hashlib
from datetime import datetime
from typing import Dict, List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .domain import GeoPoint, RawFeatures, RegionSet
from .errors import HashDimensionError
from .geo import nearest_region


N_TIME_PERIODS = 6
N_DAYS = 7
HOURS_PER_TIME_PERIOD = 24 // N_TIME_PERIODS

# A FeatureVector is a 1-D float64 array of width EncoderConfig.width(n)
FeatureVector = np.ndarray


class EncoderConfig(BaseModel):
    """Hashing dimensions and seed for the text features."""
    model_config = ConfigDict(frozen=True)

    hash_dim_name: int = Field(default=64, ge=2)
    hash_dim_category: int = Field(default=32, ge=2)
    hash_seed: int = 0

    def width(self, n_regions: int) -> int:
        return self.hash_dim_name + self.hash_dim_category + N_TIME_PERIODS + N_DAYS + n_regions


def cluster_time_period(ts: datetime) -> int:
    """Hour-of-day bucket: [0,4)->0, [4,8)->1, ..., [20,24)->5."""
    return ts.hour // HOURS_PER_TIME_PERIOD


def _digest(text: str, seed: int, purpose: bytes) -> int:
    h = hashlib.blake2b(text.encode("utf-8"), digest_size=8, person=purpose, salt=seed.to_bytes(8, "little", signed=True))
    return int.from_bytes(h.digest(), "little")


def hash_feature(text: str, dim: int, seed: int = 0) -> Dict[int, float]:
    """
    Signed hashing trick.

    Args:
        text: Feature value
        dim: Output dimension, a power of two >= 2
        seed: Hash seed

    Returns:
        Sparse vector {index: +1.0 or -1.0} with exactly one entry

    Raises:
        HashDimensionError: if dim is not a power of two >= 2
    """
    if dim < 2 or dim & (dim - 1):
        raise HashDimensionError(f"Hash dimension must be a power of two >= 2, got {dim}", {"dim": dim})

    index = _digest(text, seed, b"index") % dim
    sign = 1.0 if _digest(text, seed, b"sign") & 1 else -1.0
    return {index: sign}


def _one_hot(index: int, size: int) -> np.ndarray:
    block = np.zeros(size, dtype=np.float64)
    block[index] = 1.0
    return block


def _hashed_block(text: str, dim: int, seed: int) -> np.ndarray:
    block = np.zeros(dim, dtype=np.float64)
    for idx, value in hash_feature(text, dim, seed).items():
        block[idx] += value
    return block


def broadcaster_region_of(features: RawFeatures, regions: RegionSet) -> int:
    """Region id of the broadcaster, mapping coordinates to the nearest site."""
    location = features.broadcaster_location
    if isinstance(location, GeoPoint):
        return nearest_region(location, regions)
    if not 0 <= location < regions.n:
        raise ValueError(f"Broadcaster region {location} outside 0..{regions.n - 1}")
    return location


def encode(features: RawFeatures, regions: RegionSet, cfg: EncoderConfig) -> FeatureVector:
    """Encode one video's features into a fixed-width vector."""
    return np.concatenate([
        _hashed_block(features.broadcaster_name, cfg.hash_dim_name, cfg.hash_seed),
        _hashed_block(features.content_category, cfg.hash_dim_category, cfg.hash_seed + 1),
        _one_hot(cluster_time_period(features.created_time), N_TIME_PERIODS),
        _one_hot(features.created_day, N_DAYS),
        _one_hot(broadcaster_region_of(features, regions), regions.n),
    ])


def encode_many(rows: List[RawFeatures], regions: RegionSet, cfg: EncoderConfig) -> np.ndarray:
    """Stack encoded vectors into an (m, width) matrix."""
    if not rows:
        return np.zeros((0, cfg.width(regions.n)), dtype=np.float64)
    return np.vstack([encode(f, regions, cfg) for f in rows])
