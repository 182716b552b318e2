"""
Period Simulator

Runs the proactive allocation loop one period at a time:

    for t in 1..T:
        release storage of videos that ended
        predict demand of the incoming videos
        solve the period and commit every video to its sites for its lifetime
        account new-video network cost plus the stored-video charge

The ledger is the only mutable state and is copied, never shared, between steps.
"""

import logging
import math
from collections import defaultdict
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from .domain import (
    ActiveVideo,
    CostParams,
    DemandVector,
    PeriodLedger,
    PeriodMetrics,
    PlacementDecision,
    RegionSet,
    VideoRecord,
)
from .errors import SimulationError
from .features import EncoderConfig, encode_many
from .forest import ForestModel, predict_many
from .optimizer import (
    DEFAULT_MAX_REFINEMENTS,
    DEFAULT_RESOLUTION_MS,
    DELAY_SLACK_MS,
    SolveReport,
    VideoInstance,
    solve_period,
)


logger = logging.getLogger(__name__)

DEFAULT_THRESHOLDS_MS = [8.8, 60.0, 120.0, 171.0, 220.0, 371.0]
ORACLE_PREDICTOR = "oracle"


class SimConfig(BaseModel):
    """Everything a run needs besides the trace and the threshold."""
    model_config = ConfigDict(frozen=True)

    regions: RegionSet
    prices: CostParams
    T: int = Field(default=24, ge=1)
    period_length_hours: float = Field(default=1.0, gt=0.0)
    thresholds_ms: List[float] = Field(default_factory=lambda: list(DEFAULT_THRESHOLDS_MS))
    predictor: str = ORACLE_PREDICTOR
    encoder: EncoderConfig = Field(default_factory=EncoderConfig)
    knapsack_resolution_ms: float = Field(default=DEFAULT_RESOLUTION_MS, gt=0.0)
    knapsack_max_refinements: int = Field(default=DEFAULT_MAX_REFINEMENTS, ge=0)
    charge_broadcaster_migration: bool = False
    jobs: int = Field(default=1, ge=1)

    @field_validator("thresholds_ms")
    @classmethod
    def validate_thresholds(cls, v):
        for D in v:
            if not D > 0:
                raise ValueError(f"Delay thresholds must be positive, got {D}")
        return v

    @property
    def oracle(self) -> bool:
        return self.predictor == ORACLE_PREDICTOR


class CommittedVideo(BaseModel):
    """A video as committed in its arrival period, kept for latency replays."""
    model_config = ConfigDict(frozen=True)

    video_id: str
    period: int
    decision: PlacementDecision
    predicted: DemandVector
    infeasible: bool = False


class SimResult(BaseModel):
    """One run at one threshold."""
    model_config = ConfigDict(frozen=True)

    threshold_ms: float
    periods: List[PeriodMetrics]
    system_total_cost: float
    committed: List[CommittedVideo] = Field(default_factory=list)
    period_length_hours: float = 1.0

    @property
    def hours(self) -> float:
        return len(self.periods) * self.period_length_hours


class LatencyGapRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    period: int
    predicted_latency: Optional[float]
    actual_latency: Optional[float]
    threshold_ms: float
    exceeded: bool


def serve_actual(decision: PlacementDecision, actual: DemandVector, d: Sequence[Sequence[float]]) -> Dict[int, int]:
    """
    Serving map for the actual viewers under a committed decision.

    Regions the prediction covered keep their serving site; any other region
    with viewers is served from the lowest-delay allocated site (lowest id on ties).
    """
    sites = decision.allocated()
    serve: Dict[int, int] = {}
    for w in actual.support():
        if w in decision.serve:
            serve[w] = decision.serve[w]
        else:
            serve[w] = min(sites, key=lambda a: (d[a][w], a))
    return serve


def _weighted_latency(
    items: Iterable[Tuple[DemandVector, Dict[int, int]]],
    d: Sequence[Sequence[float]],
) -> Optional[float]:
    """Viewer-weighted mean delay over several videos; None without viewers."""
    weighted: List[float] = []
    viewers: List[int] = []
    for demand, serve in items:
        for w in sorted(serve):
            weighted.append(demand.counts[w] * d[serve[w]][w])
            viewers.append(demand.counts[w])
    total = sum(viewers)
    if total == 0:
        return None
    return math.fsum(weighted) / total


def _predict(arrivals: Sequence[VideoRecord], model: Optional[ForestModel], cfg: SimConfig) -> List[DemandVector]:
    if cfg.oracle:
        missing = [rec.video_id for rec in arrivals if rec.actual_viewers is None]
        if missing:
            raise SimulationError("Oracle predictor needs actual viewers", {"videos": missing})
        return [rec.actual_viewers for rec in arrivals]

    if model is None:
        raise SimulationError(f"Predictor '{cfg.predictor}' was not loaded")
    if not arrivals:
        return []
    missing = [rec.video_id for rec in arrivals if rec.features is None]
    if missing:
        raise SimulationError("Model predictor needs raw features", {"videos": missing})
    X = encode_many([rec.features for rec in arrivals], cfg.regions, model.encoder)
    return predict_many(model, X)


def _sum_counts(demands: Sequence[DemandVector], n: int) -> List[int]:
    totals = [0] * n
    for demand in demands:
        for r, c in enumerate(demand.counts):
            totals[r] += c
    return totals


def step(
    ledger: PeriodLedger,
    arrivals: Sequence[VideoRecord],
    model: Optional[ForestModel],
    cfg: SimConfig,
    D: float,
    journal: Optional[List[CommittedVideo]] = None,
) -> Tuple[PeriodLedger, PeriodMetrics]:
    """
    Advance the ledger by one period.

    Args:
        ledger: State at the end of the previous period
        arrivals: Videos starting in the next period
        model: Trained forest, or None in oracle mode
        cfg: Simulation settings
        D: Delay threshold in ms
        journal: Optional list that receives the committed videos

    Returns:
        (new ledger, metrics of the new period)

    Raises:
        SimulationError: on arrivals for another period, duplicate ids or missing inputs
    """
    period = ledger.period + 1
    wrong = [rec.video_id for rec in arrivals if rec.start_period != period]
    if wrong:
        raise SimulationError(f"Arrivals must start in period {period}", {"videos": wrong})

    regions, prices = cfg.regions, cfg.prices
    n = regions.n
    d = regions.rtt.d

    ledger = ledger.model_copy(deep=True)
    ledger.period = period
    for video_id in [vid for vid, video in ledger.active.items() if video.expiry <= period]:
        del ledger.active[video_id]
    ledger.refresh_storage()
    charged = list(ledger.storage_used)

    stored_cost = math.fsum(prices.alpha[r] * charged[r] for r in range(n))
    tiered = None
    if prices.tiers is not None:
        tiered = math.fsum(prices.tiered_storage_cost(r, charged[r]) for r in range(n))

    demands = _predict(arrivals, model, cfg)
    instances = [
        VideoInstance(
            broadcaster_region=rec.broadcaster_region,
            demand=demand,
            size_gb=rec.size_gb,
            video_id=rec.video_id,
        )
        for rec, demand in zip(arrivals, demands)
    ]
    reports: List[SolveReport] = solve_period(
        instances, regions, prices, D,
        jobs=cfg.jobs,
        knapsack_resolution_ms=cfg.knapsack_resolution_ms,
        charge_broadcaster_migration=cfg.charge_broadcaster_migration,
        max_refinements=cfg.knapsack_max_refinements,
    )

    for rec, demand, report in zip(arrivals, demands, reports):
        if rec.video_id in ledger.active:
            raise SimulationError(f"Duplicate active video id {rec.video_id}")
        ledger.active[rec.video_id] = ActiveVideo(
            video_id=rec.video_id,
            decision=report.decision,
            size_gb=rec.size_gb,
            start_period=period,
            expiry=rec.end_period,
        )
        if journal is not None:
            journal.append(CommittedVideo(
                video_id=rec.video_id,
                period=period,
                decision=report.decision,
                predicted=demand,
                infeasible=report.infeasible,
            ))
    ledger.refresh_storage()

    S = math.fsum(r.storage_cost for r in reports)
    M = math.fsum(r.migration_cost for r in reports)
    Rq = math.fsum(r.serving_cost for r in reports)
    network_cost = S + M + Rq

    assignments = [(w, a) for r in reports for w, a in r.decision.assignments()]
    hits_pct = None
    if assignments:
        hits_pct = 100.0 * sum(1 for w, a in assignments if w == a) / len(assignments)

    predicted_latency = _weighted_latency(
        ((demand, report.decision.serve) for demand, report in zip(demands, reports)), d
    )
    actual_latency = None
    actual_viewers = None
    if arrivals and all(rec.actual_viewers is not None for rec in arrivals):
        actual_latency = _weighted_latency(
            (
                (rec.actual_viewers, serve_actual(report.decision, rec.actual_viewers, d))
                for rec, report in zip(arrivals, reports)
            ),
            d,
        )
        actual_viewers = _sum_counts([rec.actual_viewers for rec in arrivals], n)

    n_infeasible = sum(1 for r in reports if r.infeasible)
    if n_infeasible:
        logger.info("Period %d: %d of %d videos infeasible at D=%s ms", period, n_infeasible, len(reports), D)

    metrics = PeriodMetrics(
        period=period,
        storage_cost=S,
        migration_cost=M,
        serving_cost=Rq,
        network_cost=network_cost,
        stored_cost=stored_cost,
        tiered_stored_cost=tiered,
        hourly_total=network_cost + stored_cost,
        hits_pct=hits_pct,
        avg_latency_predicted=predicted_latency,
        avg_latency_actual=actual_latency,
        n_videos=len(arrivals),
        n_infeasible=n_infeasible,
        storage_used=list(ledger.storage_used),
        storage_charged=charged,
        predicted_viewers=_sum_counts(demands, n),
        actual_viewers=actual_viewers,
    )
    return ledger, metrics


def run(
    trace: Iterable[VideoRecord],
    cfg: SimConfig,
    D: float,
    model: Optional[ForestModel] = None,
) -> SimResult:
    """
    Fold ``step`` over periods 1..T.

    Videos starting after T are not simulated.

    Raises:
        SimulationError: if the trace is unsorted or starts before period 1
    """
    by_period: Dict[int, List[VideoRecord]] = defaultdict(list)
    last = None
    for rec in trace:
        if last is not None and rec.start_period < last:
            raise SimulationError(
                f"Trace is not sorted by start_period (video {rec.video_id})",
                {"video_id": rec.video_id, "start_period": rec.start_period},
            )
        if rec.start_period < 1:
            raise SimulationError(f"Video {rec.video_id} starts before period 1")
        last = rec.start_period
        by_period[rec.start_period].append(rec)

    skipped = sum(len(v) for t, v in by_period.items() if t > cfg.T)
    if skipped:
        logger.debug("Ignoring %d videos that start after period %d", skipped, cfg.T)

    ledger = PeriodLedger.empty(cfg.regions.n)
    periods: List[PeriodMetrics] = []
    committed: List[CommittedVideo] = []
    for t in range(1, cfg.T + 1):
        ledger, metrics = step(ledger, by_period.get(t, []), model, cfg, D, journal=committed)
        periods.append(metrics)

    return SimResult(
        threshold_ms=D,
        periods=periods,
        system_total_cost=math.fsum(m.hourly_total for m in periods),
        committed=committed,
        period_length_hours=cfg.period_length_hours,
    )


def latency_gap_report(
    result: SimResult,
    trace: Iterable[VideoRecord],
    regions: RegionSet,
) -> List[LatencyGapRow]:
    """
    Per-period average latency of the committed decisions under predicted and
    actual demand, flagging periods whose actual average exceeds the threshold.

    Raises:
        SimulationError: if a committed video has no actual viewers in the trace
    """
    actuals = {rec.video_id: rec.actual_viewers for rec in trace}
    d = regions.rtt.d

    by_period: Dict[int, List[CommittedVideo]] = defaultdict(list)
    for video in result.committed:
        if actuals.get(video.video_id) is None:
            raise SimulationError(f"Trace has no actual viewers for video {video.video_id}")
        by_period[video.period].append(video)

    rows: List[LatencyGapRow] = []
    for metrics in result.periods:
        videos = by_period.get(metrics.period, [])
        predicted = _weighted_latency(((v.predicted, v.decision.serve) for v in videos), d)
        actual = _weighted_latency(
            ((actuals[v.video_id], serve_actual(v.decision, actuals[v.video_id], d)) for v in videos), d
        )
        rows.append(LatencyGapRow(
            period=metrics.period,
            predicted_latency=predicted,
            actual_latency=actual,
            threshold_ms=result.threshold_ms,
            exceeded=actual is not None and actual > result.threshold_ms + DELAY_SLACK_MS,
        ))
    return rows
