"""Test domain types and structural validation."""
import math

import pytest

from backend.core import (
    ActiveVideo,
    CostParams,
    DemandVector,
    DimensionMismatchError,
    PeriodLedger,
    PeriodMetrics,
    PlacementDecision,
    Region,
    RegionSet,
    RttMatrix,
    TierPrice,
    VideoRecord,
    gbit_to_gb,
    validate_decision,
)
from backend.core.domain import DEFAULT_VIDEO_SIZE_GB


def test_zero_demand_broadcaster_only_is_valid():
    dec = PlacementDecision(allocate=[True, False, False], serve={})
    assert validate_decision(dec, DemandVector.zeros(3), 0)


def test_serving_from_unallocated_site_is_invalid():
    demand = DemandVector(counts=[0, 0, 4, 0, 0, 0])
    dec = PlacementDecision(allocate=[True, False, False, False, False, False], serve={2: 5})
    assert not validate_decision(dec, demand, 0)


def test_broadcaster_must_be_allocated():
    dec = PlacementDecision(allocate=[False, True], serve={1: 1})
    assert not validate_decision(dec, DemandVector(counts=[0, 3]), 0)


def test_serve_keys_must_match_viewer_regions():
    demand = DemandVector(counts=[2, 3])
    missing = PlacementDecision(allocate=[True, False], serve={0: 0})
    extra = PlacementDecision(allocate=[True, True], serve={0: 0, 1: 1})
    assert not validate_decision(missing, demand, 0)
    assert validate_decision(extra, demand, 0)
    assert not validate_decision(extra, DemandVector(counts=[2, 0]), 0)


def test_dimension_mismatch_raises():
    dec = PlacementDecision(allocate=[True, False], serve={})
    with pytest.raises(DimensionMismatchError):
        validate_decision(dec, DemandVector.zeros(3), 0)
    with pytest.raises(DimensionMismatchError):
        validate_decision(dec, DemandVector.zeros(2), 5)


def test_rtt_matrix_invariants():
    RttMatrix(d=[[8.8, 20.0], [20.0, 8.8]])
    with pytest.raises(ValueError):
        RttMatrix(d=[[8.8, 20.0], [21.0, 8.8]])
    with pytest.raises(ValueError):
        RttMatrix(d=[[0.0, 20.0], [20.0, 8.8]])
    with pytest.raises(ValueError):
        RttMatrix(d=[[8.8, -1.0], [-1.0, 8.8]])
    with pytest.raises(ValueError):
        RttMatrix(d=[[8.8, 20.0]])


def test_region_set_requires_dense_ids():
    rtt = RttMatrix(d=[[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(ValueError):
        RegionSet(
            regions=[Region(id=0, name="a", latitude=0, longitude=0), Region(id=2, name="b", latitude=0, longitude=0)],
            rtt=rtt,
        )
    with pytest.raises(ValueError):
        Region(id=0, name="bad", latitude=91.0, longitude=0.0)


def test_cost_params_validation_and_tiers():
    with pytest.raises(ValueError):
        CostParams(alpha=[-0.1], eta=[0.0], omega=[0.0])
    with pytest.raises(ValueError):
        CostParams(alpha=[0.1, 0.1], eta=[0.0], omega=[0.0, 0.0])
    with pytest.raises(ValueError):
        CostParams(
            alpha=[0.03], eta=[0.0], omega=[0.0],
            tiers=[[TierPrice(threshold_gb=0, price=0.02), TierPrice(threshold_gb=10, price=0.03)]],
        )

    prices = CostParams(
        alpha=[0.03], eta=[0.0], omega=[0.0],
        tiers=[[TierPrice(threshold_gb=0, price=0.03), TierPrice(threshold_gb=10, price=0.02)]],
    )
    assert prices.tiered_storage_cost(0, 15.0) == pytest.approx(10 * 0.03 + 5 * 0.02)
    assert prices.tiered_storage_cost(0, 4.0) == pytest.approx(4 * 0.03)
    assert prices.scaled(2.0).tiers[0][1].price == pytest.approx(0.04)


def test_demand_vector():
    demand = DemandVector(counts=[0, 3, 0, 1])
    assert demand.support() == [1, 3]
    assert demand.total == 4
    assert demand.exists(1) and not demand.exists(0)
    with pytest.raises(ValueError):
        DemandVector(counts=[1, -1])


def test_json_round_trip_is_exact():
    demand = DemandVector(counts=[0, 7, 2])
    dec = PlacementDecision(allocate=[True, False, True], serve={1: 2, 2: 2})
    assert DemandVector.model_validate_json(demand.model_dump_json()) == demand
    assert PlacementDecision.model_validate_json(dec.model_dump_json()) == dec


def test_video_record_defaults():
    rec = VideoRecord(video_id="v", broadcaster_region=0, start_period=3)
    assert rec.duration_periods == 4
    assert rec.size_gb == pytest.approx(0.09225)
    assert rec.end_period == 7
    assert gbit_to_gb(0.738) == DEFAULT_VIDEO_SIZE_GB
    with pytest.raises(ValueError):
        VideoRecord(video_id="v", broadcaster_region=0, start_period=1, size_gb=0.0)


def test_ledger_storage_matches_registry():
    ledger = PeriodLedger.empty(3)
    ledger.active["a"] = ActiveVideo(
        video_id="a", decision=PlacementDecision(allocate=[True, False, True]), size_gb=0.5, start_period=1, expiry=5,
    )
    ledger.active["b"] = ActiveVideo(
        video_id="b", decision=PlacementDecision(allocate=[False, False, True]), size_gb=0.25, start_period=1, expiry=5,
    )
    ledger.refresh_storage()
    assert ledger.storage_used == [0.5, 0.0, 0.75]


def test_period_metrics_identities_enforced():
    ok = PeriodMetrics(
        period=1, storage_cost=0.1, migration_cost=0.2, serving_cost=0.3,
        network_cost=0.1 + 0.2 + 0.3, stored_cost=0.05, hourly_total=(0.1 + 0.2 + 0.3) + 0.05,
    )
    assert ok.hits_pct is None
    with pytest.raises(ValueError):
        PeriodMetrics(period=1, storage_cost=0.1, network_cost=0.2, hourly_total=0.2)
    with pytest.raises(ValueError):
        PeriodMetrics(period=1, stored_cost=1.0, hourly_total=math.pi)
