"""
Domain Types

Value types shared by every module of the allocation engine:

- Region / RegionSet / RttMatrix: the cloud-site universe and round-trip delays
- CostParams: storage (alpha), migration (eta) and serving (omega) prices
- VideoRecord / RawFeatures: one incoming live video
- DemandVector: viewers per region; E(v, r) is derived from the counts
- PlacementDecision: allocation sites A(v, r) and serving map W(v, r^a, r^w)
- PeriodLedger / PeriodMetrics: simulator state and per-period accounting

All sizes are in GB. Storage prices are per GB per period.
"""

import math
from datetime import datetime
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import DimensionMismatchError


GBIT_TO_GB = 0.125
DEFAULT_VIDEO_SIZE_GB = 0.738 * GBIT_TO_GB
DEFAULT_DURATION_PERIODS = 4


def gbit_to_gb(gbit: float) -> float:
    """Convert a size in Gbit to GB."""
    return gbit * GBIT_TO_GB


class _Value(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class GeoPoint(_Value):
    """A point on the globe, degrees."""
    latitude: float = Field(ge=-90.0, le=90.0)
    longitude: float = Field(ge=-180.0, le=180.0)


class Region(_Value):
    """One cloud site."""
    id: int = Field(ge=0)
    name: str
    latitude: float = Field(ge=-90.0, le=90.0)
    longitude: float = Field(ge=-180.0, le=180.0)

    @property
    def point(self) -> GeoPoint:
        return GeoPoint(latitude=self.latitude, longitude=self.longitude)


class RttMatrix(_Value):
    """Round-trip delay in ms, d[a][w] from allocation site a to viewer region w."""
    d: List[List[float]]

    @field_validator("d")
    @classmethod
    def validate_matrix(cls, v):
        n = len(v)
        if n == 0:
            raise ValueError("RTT matrix must be non-empty")
        for i, row in enumerate(v):
            if len(row) != n:
                raise ValueError(f"RTT matrix must be square, row {i} has {len(row)} columns, expected {n}")
        for i in range(n):
            if not v[i][i] > 0:
                raise ValueError(f"Intra-region delay d[{i}][{i}] must be positive, got {v[i][i]}")
            for j in range(n):
                if v[i][j] < 0 or not math.isfinite(v[i][j]):
                    raise ValueError(f"Delay d[{i}][{j}] must be finite and non-negative, got {v[i][j]}")
                if v[i][j] != v[j][i]:
                    raise ValueError(f"RTT matrix must be symmetric: d[{i}][{j}]={v[i][j]} != d[{j}][{i}]={v[j][i]}")
        return v

    @property
    def n(self) -> int:
        return len(self.d)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.d, dtype=np.float64)


class RegionSet(_Value):
    """Regions with dense ids 0..n-1 plus their RTT matrix."""
    regions: List[Region]
    rtt: RttMatrix

    @model_validator(mode="after")
    def validate_ids(self):
        ids = sorted(r.id for r in self.regions)
        if ids != list(range(len(self.regions))):
            raise ValueError(f"Region ids must be dense and unique (0..n-1), got {ids}")
        if self.rtt.n != len(self.regions):
            raise ValueError(f"RTT matrix is {self.rtt.n}x{self.rtt.n} but there are {len(self.regions)} regions")
        return self

    @property
    def n(self) -> int:
        return len(self.regions)

    def by_id(self, region_id: int) -> Region:
        for r in self.regions:
            if r.id == region_id:
                return r
        raise KeyError(region_id)

    def names(self) -> List[str]:
        """Region names ordered by id."""
        return [r.name for r in sorted(self.regions, key=lambda r: r.id)]


class TierPrice(_Value):
    """Storage price applying to volume above ``threshold_gb``."""
    threshold_gb: float = Field(ge=0.0)
    price: float = Field(ge=0.0)


class CostParams(_Value):
    """Per-region prices: alpha per GB per period, eta and omega per GB."""
    alpha: List[float]
    eta: List[float]
    omega: List[float]
    tiers: Optional[List[List[TierPrice]]] = None

    @model_validator(mode="after")
    def validate_prices(self):
        n = len(self.alpha)
        if len(self.eta) != n or len(self.omega) != n:
            raise ValueError(
                f"Price vectors must have equal length: alpha={n}, eta={len(self.eta)}, omega={len(self.omega)}"
            )
        for name, vec in (("alpha", self.alpha), ("eta", self.eta), ("omega", self.omega)):
            for i, p in enumerate(vec):
                if p < 0 or not math.isfinite(p):
                    raise ValueError(f"{name}[{i}] must be finite and >= 0, got {p}")
        if self.tiers is not None:
            if len(self.tiers) != n:
                raise ValueError(f"tiers must list {n} regions, got {len(self.tiers)}")
            for r, table in enumerate(self.tiers):
                for a, b in zip(table, table[1:]):
                    if not b.threshold_gb > a.threshold_gb:
                        raise ValueError(f"Tier thresholds for region {r} must be strictly increasing")
                    if b.price > a.price:
                        raise ValueError(f"Tier prices for region {r} must be non-increasing")
        return self

    @property
    def n(self) -> int:
        return len(self.alpha)

    def scaled(self, factor: float) -> "CostParams":
        """All prices multiplied by ``factor``."""
        tiers = None
        if self.tiers is not None:
            tiers = [
                [TierPrice(threshold_gb=t.threshold_gb, price=t.price * factor) for t in table]
                for table in self.tiers
            ]
        return CostParams(
            alpha=[p * factor for p in self.alpha],
            eta=[p * factor for p in self.eta],
            omega=[p * factor for p in self.omega],
            tiers=tiers,
        )

    def tiered_storage_cost(self, region: int, volume_gb: float) -> float:
        """
        Storage charge for ``volume_gb`` at ``region`` priced against the tier
        table (falls back to the flat alpha when no tiers are configured).
        """
        if self.tiers is None or not self.tiers[region]:
            return self.alpha[region] * volume_gb
        table = self.tiers[region]
        total = 0.0
        for k, tier in enumerate(table):
            if volume_gb <= tier.threshold_gb:
                break
            upper = table[k + 1].threshold_gb if k + 1 < len(table) else math.inf
            total += (min(volume_gb, upper) - tier.threshold_gb) * tier.price
        return total


class RawFeatures(_Value):
    """The per-video features available when the stream starts."""
    broadcaster_name: str
    content_category: str
    created_time: datetime
    created_day: int = Field(ge=0, le=6, description="Day of week, Monday = 0")
    broadcaster_location: Union[int, GeoPoint]


class DemandVector(_Value):
    """Viewers per region; E(v, r) is ``counts[r] > 0``."""
    counts: List[int]

    @field_validator("counts")
    @classmethod
    def validate_counts(cls, v):
        for i, c in enumerate(v):
            if c < 0:
                raise ValueError(f"Viewer count for region {i} must be >= 0, got {c}")
        return v

    @classmethod
    def zeros(cls, n: int) -> "DemandVector":
        return cls(counts=[0] * n)

    @property
    def n(self) -> int:
        return len(self.counts)

    @property
    def total(self) -> int:
        return sum(self.counts)

    def exists(self, region: int) -> bool:
        return self.counts[region] > 0

    def support(self) -> List[int]:
        """Regions with viewers, ascending."""
        return [r for r, c in enumerate(self.counts) if c > 0]


class VideoRecord(_Value):
    """One live video as it enters the system."""
    video_id: str
    broadcaster_region: int = Field(ge=0)
    start_period: int
    duration_periods: int = Field(default=DEFAULT_DURATION_PERIODS, ge=1)
    size_gb: float = Field(default=DEFAULT_VIDEO_SIZE_GB, gt=0.0)
    features: Optional[RawFeatures] = None
    actual_viewers: Optional[DemandVector] = None

    @property
    def end_period(self) -> int:
        """First period in which the video no longer holds storage."""
        return self.start_period + self.duration_periods


class PlacementDecision(_Value):
    """A(v, r^a) as ``allocate``; W(v, r^a, r^w) as ``serve[r^w] = r^a``."""
    allocate: List[bool]
    serve: Dict[int, int] = Field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.allocate)

    def allocated(self) -> List[int]:
        return [r for r, a in enumerate(self.allocate) if a]

    def assignments(self) -> List[Tuple[int, int]]:
        """(viewer region, serving region) pairs ordered by viewer region."""
        return sorted(self.serve.items())

    @classmethod
    def broadcaster_only(cls, n: int, broadcaster: int, demand: Optional[DemandVector] = None) -> "PlacementDecision":
        """Single replica at the broadcaster, serving every viewer region from it."""
        allocate = [False] * n
        allocate[broadcaster] = True
        serve = {r: broadcaster for r in demand.support()} if demand is not None else {}
        return cls(allocate=allocate, serve=serve)


def validate_decision(dec: PlacementDecision, demand: DemandVector, broadcaster: int) -> bool:
    """
    Check the structural constraints of a placement decision.

    Covers: broadcaster always allocated, serving only from allocated sites,
    serving exactly the regions with viewers (one site each), binary variables.
    The delay constraint needs RTT and a threshold and lives in the optimizer.

    Raises:
        DimensionMismatchError: if the vectors disagree on the region count
    """
    n = dec.n
    if demand.n != n or not 0 <= broadcaster < n:
        raise DimensionMismatchError(
            "Decision, demand and broadcaster refer to different region counts",
            {"allocate": n, "demand": demand.n, "broadcaster": broadcaster},
        )

    if not all(isinstance(a, bool) for a in dec.allocate):
        return False
    if not dec.allocate[broadcaster]:
        return False

    for viewer, site in dec.serve.items():
        if not (0 <= viewer < n and 0 <= site < n):
            return False
        if not dec.allocate[site]:
            return False

    return set(dec.serve) == set(demand.support())


class ActiveVideo(_Value):
    """A committed video holding storage until ``expiry``."""
    video_id: str
    decision: PlacementDecision
    size_gb: float
    start_period: int
    expiry: int


class PeriodLedger(BaseModel):
    """Simulator state: current period, storage usage SU and the active registry."""
    period: int = 0
    storage_used: List[float]
    active: Dict[str, ActiveVideo] = Field(default_factory=dict)

    @classmethod
    def empty(cls, n: int) -> "PeriodLedger":
        return cls(period=0, storage_used=[0.0] * n)

    def storage_from_registry(self) -> List[float]:
        """SU recomputed from the active registry."""
        n = len(self.storage_used)
        per_region: List[List[float]] = [[] for _ in range(n)]
        for video in self.active.values():
            for r in video.decision.allocated():
                per_region[r].append(video.size_gb)
        return [math.fsum(sizes) for sizes in per_region]

    def refresh_storage(self) -> None:
        self.storage_used = self.storage_from_registry()


class PeriodMetrics(_Value):
    """
    Per-period cost, hits and latency figures.

    ``stored_cost`` is charged on ``storage_charged``, the storage use after
    expiries and before this period's commits. ``storage_used`` is the storage
    use once the new videos are committed.
    """
    period: int
    storage_cost: float = 0.0
    migration_cost: float = 0.0
    serving_cost: float = 0.0
    network_cost: float = 0.0
    stored_cost: float = 0.0
    tiered_stored_cost: Optional[float] = None
    hourly_total: float = 0.0
    hits_pct: Optional[float] = None
    avg_latency_predicted: Optional[float] = None
    avg_latency_actual: Optional[float] = None
    n_videos: int = 0
    n_infeasible: int = 0
    storage_used: List[float] = Field(default_factory=list)
    storage_charged: List[float] = Field(default_factory=list)
    predicted_viewers: List[int] = Field(default_factory=list)
    actual_viewers: Optional[List[int]] = None

    @model_validator(mode="after")
    def check_identities(self):
        if self.network_cost != self.storage_cost + self.migration_cost + self.serving_cost:
            raise ValueError("network_cost must equal storage + migration + serving cost")
        if self.hourly_total != self.network_cost + self.stored_cost:
            raise ValueError("hourly_total must equal network_cost + stored_cost")
        return self
