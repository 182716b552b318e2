"""
Workload Module

Trace files and a synthetic trace generator.

Trace format (newline-delimited JSON):

    {"schema_version": 1, "region_set": "aws-10", "n_regions": 10}
    {"video_id": "v0001-0000", "broadcaster_region": 4, "start_period": 1, ...}
    ...

The first line is the header, every following line one VideoRecord, sorted
by start_period. The generator draws broadcasters from a fixed pool. Each
broadcaster has a home region, a content category and an audience reach
drawn once from a discrete power law scaled by category, so demand is a
function of the broadcaster and the time period plus noise.
"""

import json
import logging
from datetime import datetime, timedelta
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .domain import DEFAULT_DURATION_PERIODS, DEFAULT_VIDEO_SIZE_GB, DemandVector, GeoPoint, RawFeatures, RegionSet, VideoRecord
from .errors import TraceFormatError
from .features import cluster_time_period
from .geo import nearest_region


logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DEFAULT_REGION_SET = "aws-10"

DEFAULT_CATEGORIES = ["gaming", "music", "sports", "news", "talk", "travel"]

# Relative audience per 4-hour time period, index = cluster_time_period
DIURNAL_PROFILE = [0.45, 0.3, 0.65, 0.9, 1.0, 0.8]

LOCATION_JITTER_DEG = 0.5


class TraceHeader(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    schema_version: int = SCHEMA_VERSION
    region_set: str = DEFAULT_REGION_SET
    n_regions: int = Field(ge=1)


class GeneratorConfig(BaseModel):
    """Synthetic workload parameters."""
    model_config = ConfigDict(frozen=True)

    n_videos_per_period: float = Field(default=30.0, gt=0.0)
    popularity: float = Field(default=1.5, gt=1.0)
    locality: float = Field(default=0.6, ge=0.0, le=1.0)
    seed: int = 0
    n_broadcasters: int = Field(default=60, ge=1)
    categories: List[str] = Field(default_factory=lambda: list(DEFAULT_CATEGORIES), min_length=1)
    min_viewers: int = Field(default=50, ge=1)
    max_viewers: int = Field(default=2000, ge=1)
    noise: float = Field(default=0.3, ge=0.0)
    global_mix: Optional[List[float]] = None
    start_time: datetime = datetime(2024, 1, 1)
    period_length_hours: float = Field(default=1.0, gt=0.0)
    duration_periods: int = Field(default=DEFAULT_DURATION_PERIODS, ge=1)
    size_gb: float = Field(default=DEFAULT_VIDEO_SIZE_GB, gt=0.0)

    @field_validator("global_mix")
    @classmethod
    def validate_mix(cls, v):
        if v is None:
            return v
        if any(w < 0 for w in v) or sum(v) <= 0:
            raise ValueError("global_mix weights must be non-negative with a positive sum")
        return v

    @model_validator(mode="after")
    def check_viewer_range(self):
        if self.max_viewers < self.min_viewers:
            raise ValueError("max_viewers must be at least min_viewers")
        return self


def _parse_error_text(e: ValidationError) -> str:
    first = e.errors()[0]
    loc = ".".join(str(part) for part in first.get("loc", ()))
    return f"{loc}: {first.get('msg')}" if loc else str(first.get("msg"))


def iter_trace(path: Union[str, Path]) -> Iterator[Union[TraceHeader, VideoRecord]]:
    """
    Stream a trace file: the header first, then each record.

    Raises:
        TraceFormatError: on a missing or unsupported header, a row that does
            not parse or validate, a vector of the wrong length, or unsorted periods
    """
    path = Path(path)
    header: Optional[TraceHeader] = None
    last_period: Optional[int] = None
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue

            if header is None:
                try:
                    raw = json.loads(line)
                except json.JSONDecodeError as e:
                    raise TraceFormatError(f"Header is not valid JSON ({e.msg})", row=line_no)
                if not isinstance(raw, dict) or raw.get("schema_version") != SCHEMA_VERSION:
                    raise TraceFormatError(
                        f"Unsupported schema_version {raw.get('schema_version') if isinstance(raw, dict) else None}",
                        row=line_no,
                        expected=SCHEMA_VERSION,
                    )
                try:
                    header = TraceHeader.model_validate(raw)
                except ValidationError as e:
                    raise TraceFormatError(f"Invalid header: {_parse_error_text(e)}", row=line_no)
                yield header
                continue

            try:
                record = VideoRecord.model_validate_json(line)
            except ValidationError as e:
                raise TraceFormatError(_parse_error_text(e), row=line_no)

            if record.broadcaster_region >= header.n_regions:
                raise TraceFormatError(
                    f"broadcaster_region {record.broadcaster_region} outside 0..{header.n_regions - 1}",
                    row=line_no,
                )
            if record.actual_viewers is not None and record.actual_viewers.n != header.n_regions:
                raise TraceFormatError(
                    f"actual_viewers has {record.actual_viewers.n} entries, expected {header.n_regions}",
                    row=line_no,
                )
            if last_period is not None and record.start_period < last_period:
                raise TraceFormatError(
                    f"start_period {record.start_period} follows {last_period}; trace must be sorted",
                    row=line_no,
                )
            last_period = record.start_period
            yield record

    if header is None:
        raise TraceFormatError("Trace file has no header", path=str(path))


def load_trace(path: Union[str, Path], n_regions: Optional[int] = None) -> List[VideoRecord]:
    """
    Read and validate a whole trace.

    Args:
        path: Trace file
        n_regions: Expected region count; checked against the header when given

    Returns:
        Records in file order
    """
    stream = iter_trace(path)
    header = next(stream)
    if n_regions is not None and header.n_regions != n_regions:
        raise TraceFormatError(
            f"Trace is for {header.n_regions} regions, region set has {n_regions}",
            row=1,
        )
    records = list(stream)
    logger.debug("Loaded %d records from %s", len(records), path)
    return records


def save_trace(
    path: Union[str, Path],
    records: Sequence[VideoRecord],
    n_regions: int,
    region_set: str = DEFAULT_REGION_SET,
) -> Path:
    """Write records after a header line; the file round-trips through load_trace."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = TraceHeader(region_set=region_set, n_regions=n_regions)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(header.model_dump_json() + "\n")
        for record in records:
            fh.write(record.model_dump_json(exclude_none=True) + "\n")
    return path


class _Broadcaster(BaseModel):
    name: str
    home: int
    category: int
    reach: float


def _jitter(point: GeoPoint, rng: np.random.Generator) -> GeoPoint:
    dlat, dlon = rng.uniform(-LOCATION_JITTER_DEG, LOCATION_JITTER_DEG, size=2)
    return GeoPoint(
        latitude=float(np.clip(point.latitude + dlat, -90.0, 90.0)),
        longitude=float(np.clip(point.longitude + dlon, -180.0, 180.0)),
    )


def _viewer_mix(cfg: GeneratorConfig, n: int) -> np.ndarray:
    if cfg.global_mix is None:
        return np.full(n, 1.0 / n)
    if len(cfg.global_mix) != n:
        raise ValueError(f"global_mix has {len(cfg.global_mix)} weights for {n} regions")
    mix = np.asarray(cfg.global_mix, dtype=np.float64)
    return mix / mix.sum()


def generate(cfg: GeneratorConfig, T: int, regions: RegionSet) -> List[VideoRecord]:
    """
    Synthetic trace over periods 1..T.

    Args:
        cfg: Generator parameters
        T: Number of periods
        regions: Region set the viewers are spread over

    Returns:
        Records sorted by start_period, deterministic for a given cfg.seed
    """
    rng = np.random.default_rng(cfg.seed)
    n = regions.n
    mix = _viewer_mix(cfg, n)
    ordered = sorted(regions.regions, key=lambda r: r.id)

    # Reach: min_viewers * Zipf(popularity) draw * category weight (rank^-1/2), capped at max_viewers
    category_weight = np.arange(1, len(cfg.categories) + 1, dtype=np.float64) ** -0.5

    pool = []
    for i in range(cfg.n_broadcasters):
        home = int(rng.integers(n))
        category = int(rng.integers(len(cfg.categories)))
        draw = float(rng.zipf(cfg.popularity))
        pool.append(_Broadcaster(
            name=f"broadcaster-{i:03d}",
            home=home,
            category=category,
            reach=min(cfg.min_viewers * draw * category_weight[category], float(cfg.max_viewers)),
        ))

    records: List[VideoRecord] = []
    for t in range(1, T + 1):
        period_start = cfg.start_time + timedelta(hours=(t - 1) * cfg.period_length_hours)
        for j in range(int(rng.poisson(cfg.n_videos_per_period))):
            who = pool[int(rng.integers(len(pool)))]
            created = period_start + timedelta(minutes=float(rng.uniform(0.0, 60.0 * cfg.period_length_hours)))
            location = _jitter(ordered[who.home].point, rng)
            b = nearest_region(location, regions)

            scale = who.reach * DIURNAL_PROFILE[cluster_time_period(created)]
            total = int(round(scale * float(np.exp(cfg.noise * rng.standard_normal()))))
            probs = (1.0 - cfg.locality) * mix
            probs[b] += cfg.locality
            counts = rng.multinomial(max(total, 0), probs / probs.sum())

            records.append(VideoRecord(
                video_id=f"v{t:04d}-{j:04d}",
                broadcaster_region=b,
                start_period=t,
                duration_periods=cfg.duration_periods,
                size_gb=cfg.size_gb,
                features=RawFeatures(
                    broadcaster_name=who.name,
                    content_category=cfg.categories[who.category],
                    created_time=created,
                    created_day=created.weekday(),
                    broadcaster_location=location,
                ),
                actual_viewers=DemandVector(counts=[int(c) for c in counts]),
            ))

    logger.debug("Generated %d videos over %d periods", len(records), T)
    return records

