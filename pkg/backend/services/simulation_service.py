"""
Simulation Service

Runs the simulator across delay thresholds and writes the result tables:
metrics.csv, summary.json, viewers.csv, latency_gap.csv and optionally a
workbook with one sheet per threshold.
"""

import json
import logging
import time
from pathlib import Path
from typing import List, Optional, Sequence, Union

import pandas as pd

from backend.core import (
    ForestModel,
    RegionSet,
    SimConfig,
    SimResult,
    VideoRecord,
    latency_gap_report,
    run,
)
from backend.schemas import ThresholdSummary


logger = logging.getLogger(__name__)

METRIC_COLUMNS = [
    "threshold_ms", "period", "storage_cost", "migration_cost", "serving_cost", "network_cost",
    "stored_cost", "tiered_stored_cost", "hourly_total", "hits_pct", "pred_latency", "actual_latency",
    "n_videos", "n_infeasible",
]


class SimulationService:
    """Service for threshold sweeps and their reports."""

    def sweep(
        self,
        trace: Sequence[VideoRecord],
        cfg: SimConfig,
        model: Optional[ForestModel] = None,
        thresholds_ms: Optional[Sequence[float]] = None,
    ) -> List[SimResult]:
        """Run the full simulation once per threshold, in the given order."""
        results = []
        for D in thresholds_ms or cfg.thresholds_ms:
            start_time = time.perf_counter()
            result = run(trace, cfg, D, model)
            elapsed_ms = int((time.perf_counter() - start_time) * 1000)
            n_infeasible = sum(m.n_infeasible for m in result.periods)
            logger.info(
                "[SimulationService] D=%g ms: system total %.6f over %d periods (%d infeasible) in %d ms",
                D, result.system_total_cost, len(result.periods), n_infeasible, elapsed_ms,
            )
            results.append(result)
        return results

    def metrics_frame(self, results: Sequence[SimResult]) -> pd.DataFrame:
        rows = []
        for result in results:
            for m in result.periods:
                rows.append({
                    "threshold_ms": result.threshold_ms,
                    "period": m.period,
                    "storage_cost": m.storage_cost,
                    "migration_cost": m.migration_cost,
                    "serving_cost": m.serving_cost,
                    "network_cost": m.network_cost,
                    "stored_cost": m.stored_cost,
                    "tiered_stored_cost": m.tiered_stored_cost,
                    "hourly_total": m.hourly_total,
                    "hits_pct": m.hits_pct,
                    "pred_latency": m.avg_latency_predicted,
                    "actual_latency": m.avg_latency_actual,
                    "n_videos": m.n_videos,
                    "n_infeasible": m.n_infeasible,
                })
        return pd.DataFrame(rows, columns=METRIC_COLUMNS)

    def viewers_frame(self, result: SimResult, regions: RegionSet) -> pd.DataFrame:
        """Predicted and actual viewers per period and region (independent of the threshold)."""
        rows = []
        names = regions.names()
        for m in result.periods:
            for r, name in enumerate(names):
                rows.append({
                    "period": m.period,
                    "region": name,
                    "predicted_viewers": m.predicted_viewers[r] if m.predicted_viewers else 0,
                    "actual_viewers": m.actual_viewers[r] if m.actual_viewers else None,
                    "n_videos": m.n_videos,
                })
        return pd.DataFrame(rows, columns=["period", "region", "predicted_viewers", "actual_viewers", "n_videos"])

    def latency_gap_frame(
        self,
        results: Sequence[SimResult],
        trace: Sequence[VideoRecord],
        regions: RegionSet,
    ) -> pd.DataFrame:
        rows = []
        for result in results:
            for row in latency_gap_report(result, trace, regions):
                rows.append(row.model_dump())
        return pd.DataFrame(
            rows, columns=["period", "predicted_latency", "actual_latency", "threshold_ms", "exceeded"]
        )

    def summaries(self, results: Sequence[SimResult], gaps: Optional[pd.DataFrame] = None) -> List[ThresholdSummary]:
        out = []
        for result in results:
            periods = result.periods
            hits = [m.hits_pct for m in periods if m.hits_pct is not None]
            predicted = [m.avg_latency_predicted for m in periods if m.avg_latency_predicted is not None]
            actual = [m.avg_latency_actual for m in periods if m.avg_latency_actual is not None]
            exceeded: List[int] = []
            if gaps is not None and len(gaps):
                mine = gaps[(gaps["threshold_ms"] == result.threshold_ms) & gaps["exceeded"]]
                exceeded = [int(p) for p in mine["period"]]
            out.append(ThresholdSummary(
                threshold_ms=result.threshold_ms,
                system_total_cost=result.system_total_cost,
                hours=result.hours,
                cost_per_hour=result.system_total_cost / result.hours if result.hours else 0.0,
                network_cost=sum(m.network_cost for m in periods),
                stored_cost=sum(m.stored_cost for m in periods),
                mean_hits_pct=sum(hits) / len(hits) if hits else None,
                max_predicted_latency=max(predicted) if predicted else None,
                max_actual_latency=max(actual) if actual else None,
                n_videos=sum(m.n_videos for m in periods),
                n_infeasible=sum(m.n_infeasible for m in periods),
                periods_exceeding_threshold=exceeded,
            ))
        return out

    def write_outputs(
        self,
        results: Sequence[SimResult],
        trace: Sequence[VideoRecord],
        regions: RegionSet,
        out_dir: Union[str, Path],
        xlsx: bool = False,
    ) -> List[Path]:
        """Write every report file; returns the paths written."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []

        metrics = self.metrics_frame(results)
        metrics_path = out_dir / "metrics.csv"
        metrics.to_csv(metrics_path, index=False)
        written.append(metrics_path)

        gaps = None
        if trace and all(rec.actual_viewers is not None for rec in trace):
            gaps = self.latency_gap_frame(results, trace, regions)
            gap_path = out_dir / "latency_gap.csv"
            gaps.to_csv(gap_path, index=False)
            written.append(gap_path)

        summaries = self.summaries(results, gaps)
        summary_path = out_dir / "summary.json"
        payload = {"thresholds": [s.model_dump() for s in summaries]}
        summary_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        written.append(summary_path)

        if results:
            viewers_path = out_dir / "viewers.csv"
            self.viewers_frame(results[0], regions).to_csv(viewers_path, index=False)
            written.append(viewers_path)

        if xlsx:
            book_path = out_dir / "simulation.xlsx"
            with pd.ExcelWriter(book_path, engine="openpyxl") as writer:
                pd.DataFrame([s.model_dump(exclude={"periods_exceeding_threshold"}) for s in summaries]).to_excel(
                    writer, sheet_name="summary", index=False
                )
                for result in results:
                    sheet = f"D={result.threshold_ms:g}ms"[:31]
                    metrics[metrics["threshold_ms"] == result.threshold_ms].to_excel(writer, sheet_name=sheet, index=False)
            written.append(book_path)

        logger.info("[SimulationService] Wrote %d files to %s", len(written), out_dir)
        return written


# Singleton instance
simulation_service = SimulationService()
