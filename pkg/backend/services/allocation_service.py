"""
Allocation Service

Solves instance files and runs the brute-force equivalence suite.
"""

import json
import logging
import time
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from backend.core import (
    CostParams,
    DemandVector,
    DimensionMismatchError,
    InfeasibleError,
    Region,
    RegionSet,
    RttMatrix,
    SolveReport,
    VideoInstance,
    brute_force_solve,
    check_delay,
    minimum_average_delay,
    solve_period,
    solve_video,
    validate_decision,
)
from backend.schemas import OracleCheckSummary, SolveInstancesFile, SolveSummaryRow


logger = logging.getLogger(__name__)

ORACLE_REL_TOLERANCE = 1e-9


def random_instance(
    rng: np.random.Generator,
    max_regions: int = 5,
    max_viewer_regions: int = 4,
) -> Tuple[VideoInstance, RegionSet, CostParams, float]:
    """
    A random small instance: symmetric RTT, random prices and demand, and a
    threshold drawn around the minimum achievable delay (sometimes below it).
    """
    n = int(rng.integers(2, max_regions + 1))
    d = np.zeros((n, n))
    for i in range(n):
        d[i, i] = rng.uniform(5.0, 15.0)
        for j in range(i + 1, n):
            d[i, j] = d[j, i] = rng.uniform(5.0, 200.0)
    regions = RegionSet(
        regions=[Region(id=i, name=f"r{i}", latitude=0.0, longitude=0.0) for i in range(n)],
        rtt=RttMatrix(d=d.tolist()),
    )
    prices = CostParams(
        alpha=rng.uniform(0.0, 0.01, n).tolist(),
        eta=rng.uniform(0.0, 0.1, n).tolist(),
        omega=rng.uniform(0.05, 0.3, n).tolist(),
    )

    counts = [0] * n
    k = int(rng.integers(0, min(n, max_viewer_regions) + 1))
    for w in rng.choice(n, size=k, replace=False):
        counts[int(w)] = int(rng.integers(1, 51))
    demand = DemandVector(counts=counts)

    inst = VideoInstance(
        broadcaster_region=int(rng.integers(n)),
        demand=demand,
        size_gb=float(rng.uniform(0.05, 1.0)),
    )
    floor = minimum_average_delay(demand, regions.rtt)
    D = float(rng.uniform(0.8, 3.0) * floor) if floor > 0 else float(rng.uniform(5.0, 200.0))
    return inst, regions, prices, D


class AllocationService:
    """Service for solving placement instances."""

    def load_instances(self, path: Union[str, Path], n_regions: int) -> Tuple[float, List[VideoInstance]]:
        """
        Read a `solve` instances file.

        Returns:
            (threshold_ms, instances)
        """
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
        try:
            parsed = SolveInstancesFile.model_validate(raw)
        except ValidationError as e:
            raise ValueError(f"Invalid instances file {path}: {e}")

        instances = []
        for i, entry in enumerate(parsed.instances):
            if len(entry.demand) != n_regions:
                raise DimensionMismatchError(
                    f"Instance {i} has {len(entry.demand)} demand entries, expected {n_regions}",
                    {"instance": i},
                )
            instances.append(VideoInstance(
                broadcaster_region=entry.broadcaster_region,
                demand=DemandVector(counts=entry.demand),
                size_gb=entry.size_gb,
                video_id=entry.video_id or f"video-{i}",
            ))
        return parsed.threshold_ms, instances

    def solve_file(
        self,
        path: Union[str, Path],
        regions: RegionSet,
        prices: CostParams,
        threshold_ms: Optional[float] = None,
        jobs: int = 1,
        knapsack_resolution_ms: float = 0.1,
        max_refinements: int = 3,
        charge_broadcaster_migration: bool = False,
    ) -> Tuple[List[SolveReport], float, int]:
        """
        Solve every instance of a file; ``threshold_ms`` overrides the file's threshold.

        Returns:
            (reports, threshold used, calculation_time_ms)
        """
        start_time = time.perf_counter()
        file_threshold, instances = self.load_instances(path, regions.n)
        D = threshold_ms if threshold_ms is not None else file_threshold

        reports = solve_period(
            instances, regions, prices, D,
            jobs=jobs,
            knapsack_resolution_ms=knapsack_resolution_ms,
            charge_broadcaster_migration=charge_broadcaster_migration,
            max_refinements=max_refinements,
        )

        elapsed_ms = int((time.perf_counter() - start_time) * 1000)
        logger.info(
            "[AllocationService] Solved %d videos at D=%s ms in %d ms (%d infeasible)",
            len(reports), D, elapsed_ms, sum(1 for r in reports if r.infeasible),
        )
        return reports, D, elapsed_ms

    def summary_rows(self, reports: List[SolveReport]) -> List[SolveSummaryRow]:
        return [
            SolveSummaryRow(
                video_id=r.video_id,
                allocated=" ".join(str(a) for a in r.decision.allocated()),
                storage_cost=r.storage_cost,
                migration_cost=r.migration_cost,
                serving_cost=r.serving_cost,
                total_cost=r.total_cost,
                avg_delay_ms=r.avg_delay_ms,
                optimal=r.optimal,
                infeasible=r.infeasible,
            )
            for r in reports
        ]

    def write_reports(self, reports: List[SolveReport], out_dir: Union[str, Path]) -> Tuple[Path, Path]:
        """Write solve_reports.json and solve_summary.csv."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)

        json_path = out_dir / "solve_reports.json"
        payload = [r.model_dump(mode="json") for r in reports]
        json_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")

        csv_path = out_dir / "solve_summary.csv"
        rows = [row.model_dump() for row in self.summary_rows(reports)]
        pd.DataFrame(rows, columns=list(SolveSummaryRow.model_fields)).to_csv(csv_path, index=False)
        return json_path, csv_path

    def oracle_check(
        self,
        n_instances: int = 1000,
        seed: int = 0,
        max_regions: int = 5,
        max_viewer_regions: int = 4,
        knapsack_resolution_ms: float = 0.1,
    ) -> OracleCheckSummary:
        """
        Compare solve_video with brute_force_solve on seeded random instances.

        An instance agrees when both report infeasibility, or both costs match
        within 1e-9 relative and the solver's decision is valid and meets D.
        """
        start_time = time.perf_counter()
        rng = np.random.default_rng(seed)
        mismatches = []
        n_infeasible = 0
        max_gap = 0.0

        for i in range(n_instances):
            inst, regions, prices, D = random_instance(rng, max_regions, max_viewer_regions)
            try:
                expected = brute_force_solve(inst, regions, prices, D)
            except InfeasibleError:
                expected = None
            try:
                got = solve_video(inst, regions, prices, D, knapsack_resolution_ms=knapsack_resolution_ms)
            except InfeasibleError:
                got = None

            if expected is None or got is None:
                if expected is None and got is None:
                    n_infeasible += 1
                else:
                    mismatches.append({"instance": i, "reason": "feasibility disagrees"})
                continue

            gap = abs(got.total_cost - expected.total_cost) / max(abs(expected.total_cost), 1e-12)
            max_gap = max(max_gap, gap)
            _, satisfied = check_delay(inst, got.decision, regions.rtt, D)
            valid = validate_decision(got.decision, inst.demand, inst.broadcaster_region)
            if gap > ORACLE_REL_TOLERANCE or not satisfied or not valid:
                mismatches.append({
                    "instance": i,
                    "solver_cost": got.total_cost,
                    "oracle_cost": expected.total_cost,
                    "delay_ok": satisfied,
                    "valid": valid,
                })

        elapsed_ms = int((time.perf_counter() - start_time) * 1000)
        logger.info(
            "[AllocationService] Oracle check: %d instances, %d mismatches, max gap %.3g in %d ms",
            n_instances, len(mismatches), max_gap, elapsed_ms,
        )
        return OracleCheckSummary(
            n_instances=n_instances,
            n_infeasible=n_infeasible,
            n_mismatches=len(mismatches),
            max_relative_gap=max_gap,
            elapsed_ms=elapsed_ms,
            mismatches=mismatches,
        )


# Singleton instance
allocation_service = AllocationService()
