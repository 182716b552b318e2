"""
Pydantic schemas for CLI input files and report rows.
"""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from backend.core.domain import DEFAULT_VIDEO_SIZE_GB


class InstanceEntry(BaseModel):
    """One video of a `solve` instances file."""
    video_id: Optional[str] = None
    broadcaster_region: int = Field(ge=0)
    demand: List[int]
    size_gb: float = Field(default=DEFAULT_VIDEO_SIZE_GB, gt=0.0)


class SolveInstancesFile(BaseModel):
    """Input of the `solve` subcommand."""
    threshold_ms: float
    instances: List[InstanceEntry] = []


class SolveSummaryRow(BaseModel):
    """One row of solve_summary.csv."""
    video_id: Optional[str] = None
    allocated: str
    storage_cost: float
    migration_cost: float
    serving_cost: float
    total_cost: float
    avg_delay_ms: float
    optimal: bool
    infeasible: bool


class RegionScore(BaseModel):
    """Per-region validation R² of the forest and the single tree."""
    region: str
    rf_r2: Optional[float] = None
    dt_r2: Optional[float] = None
    test_r2: Optional[float] = None


class GridPoint(BaseModel):
    n_trees: int
    max_depth: Optional[int] = None
    pooled_r2: float


class TrainingReport(BaseModel):
    """Summary written by `train`."""
    n_train: int
    n_validation: int
    n_trees: int
    max_depth: Optional[int] = None
    pooled_rf_r2: float
    pooled_dt_r2: float
    pooled_test_r2: Optional[float] = None
    regions: List[RegionScore]
    grid: List[GridPoint] = []
    elapsed_ms: int


class ThresholdSummary(BaseModel):
    """System totals of one simulated threshold."""
    threshold_ms: float
    system_total_cost: float
    network_cost: float
    stored_cost: float
    hours: float
    cost_per_hour: float
    mean_hits_pct: Optional[float] = None
    max_predicted_latency: Optional[float] = None
    max_actual_latency: Optional[float] = None
    n_videos: int
    n_infeasible: int
    periods_exceeding_threshold: List[int] = []


class OracleCheckSummary(BaseModel):
    """Outcome of the brute-force equivalence suite."""
    n_instances: int
    n_infeasible: int
    n_mismatches: int
    max_relative_gap: float
    elapsed_ms: int
    mismatches: List[Dict[str, Any]] = []


class ErrorResponse(BaseModel):
    """Standard error response."""
    error: str
    detail: Optional[str] = None
    details: Dict[str, Any] = {}
