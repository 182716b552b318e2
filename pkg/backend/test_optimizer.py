"""Test the placement optimizer against hand-worked cases and the brute-force oracle."""
import itertools
import json
import math

import numpy as np
import pytest

from backend.core import (
    DemandVector,
    DimensionMismatchError,
    InfeasibleError,
    InstanceTooLargeError,
    InvalidDecisionError,
    PlacementDecision,
    VideoInstance,
    brute_force_solve,
    check_delay,
    minimum_average_delay,
    solve_period,
    solve_video,
    validate_decision,
    video_cost,
)
from backend.core.optimizer import _ServingProblem
from backend.services import allocation_service
from backend.services.allocation_service import random_instance


def _inst(b, counts, size_gb=1.0, video_id=None):
    return VideoInstance(broadcaster_region=b, demand=DemandVector(counts=counts), size_gb=size_gb, video_id=video_id)


def test_video_cost_example(three_prices):
    inst = _inst(0, [10, 0, 5])
    dec = PlacementDecision(allocate=[True, False, True], serve={0: 0, 2: 2})
    storage, migration, serving = video_cost(inst, dec, three_prices)
    assert storage == pytest.approx(0.002)
    assert migration == pytest.approx(0.02)
    assert serving == pytest.approx(0.9 + 0.75)

    _, charged, _ = video_cost(inst, dec, three_prices, charge_broadcaster_migration=True)
    assert charged == pytest.approx(0.04)


def test_video_cost_is_linear_in_size(three_prices):
    dec = PlacementDecision(allocate=[True, True, False], serve={1: 1, 2: 0})
    small = video_cost(_inst(0, [0, 4, 3], size_gb=0.5), dec, three_prices)
    large = video_cost(_inst(0, [0, 4, 3], size_gb=1.5), dec, three_prices)
    for a, b in zip(small, large):
        assert b == pytest.approx(3 * a)


def test_video_cost_rejects_invalid_decision(three_prices):
    inst = _inst(0, [0, 4, 0])
    with pytest.raises(InvalidDecisionError):
        video_cost(inst, PlacementDecision(allocate=[True, False, False], serve={1: 1}), three_prices)
    with pytest.raises(DimensionMismatchError):
        video_cost(inst, PlacementDecision(allocate=[True, False], serve={}), three_prices)


def test_check_delay(three_regions):
    inst = _inst(1, [0, 10, 10])
    dec = PlacementDecision(allocate=[False, True, False], serve={1: 1, 2: 1})
    assert check_delay(inst, dec, three_regions.rtt, 35.0) == (35.0, True)
    assert check_delay(inst, dec, three_regions.rtt, 34.9) == (35.0, False)
    assert check_delay(_inst(1, [0, 0, 0]), PlacementDecision.broadcaster_only(3, 1), three_regions.rtt, 0.0) == (0.0, True)


def test_golden_instances(three_region_dir, three_regions, three_prices):
    threshold, instances = allocation_service.load_instances(three_region_dir / "instances.json", 3)
    golden = json.loads((three_region_dir / "golden_solve.json").read_text())
    reports = solve_period(instances, three_regions, three_prices, threshold)

    assert [r.video_id for r in reports] == ["local", "remote", "idle"]
    for report, expected in zip(reports, golden):
        got = report.model_dump(mode="json")
        assert got["decision"] == expected["decision"]
        for key in ("storage_cost", "migration_cost", "serving_cost", "avg_delay_ms"):
            assert got[key] == pytest.approx(expected[key])
        assert got["optimal"] is True
        assert got["infeasible"] is False


def test_tight_threshold_forces_replica(three_regions, three_prices):
    # serving region 2 from region 1 is too slow at D=20, so a replica in region 2 is needed
    report = solve_video(_inst(1, [0, 10, 10]), three_regions, three_prices, 20.0)
    assert report.decision.allocated() == [1, 2]
    assert report.decision.serve == {1: 1, 2: 2}
    assert report.avg_delay_ms == pytest.approx(10.0)
    assert report.total_cost == pytest.approx(0.002 + 0.02 + 1.2 + 1.5)


def test_matches_brute_force_on_random_instances():
    summary = allocation_service.oracle_check(n_instances=1000, seed=0)
    assert summary.n_mismatches == 0, summary.mismatches[:5]
    assert summary.n_infeasible > 0


def test_unconstrained_matches_brute_force():
    rng = np.random.default_rng(7)
    for _ in range(200):
        inst, regions, prices, _ = random_instance(rng)
        expected = brute_force_solve(inst, regions, prices, math.inf)
        got = solve_video(inst, regions, prices, math.inf)
        assert got.total_cost == pytest.approx(expected.total_cost, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("resolution,refinements", [(50.0, 0), (50.0, -1), (0.5, 1)])
def test_coarse_or_no_dp_still_exact(resolution, refinements):
    rng = np.random.default_rng(21)
    for _ in range(150):
        inst, regions, prices, D = random_instance(rng)
        try:
            expected = brute_force_solve(inst, regions, prices, D)
        except InfeasibleError:
            continue
        got = solve_video(inst, regions, prices, D, knapsack_resolution_ms=resolution, max_refinements=refinements)
        assert got.total_cost == pytest.approx(expected.total_cost, rel=1e-9, abs=1e-12)
        assert check_delay(inst, got.decision, regions.rtt, D)[1]


def test_pruning_does_not_change_the_optimum():
    rng = np.random.default_rng(3)
    for _ in range(200):
        inst, regions, prices, D = random_instance(rng)
        try:
            pruned = solve_video(inst, regions, prices, D, prune=True)
        except InfeasibleError:
            continue
        full = solve_video(inst, regions, prices, D, prune=False)
        assert pruned.total_cost == pytest.approx(full.total_cost, rel=1e-9, abs=1e-12)


def test_cost_is_monotone_in_threshold(default_regions, default_prices):
    rng = np.random.default_rng(5)
    thresholds = [8.8, 50.0, 121.0, 200.0, 371.0, math.inf]
    for _ in range(20):
        counts = [0] * 10
        for w in rng.choice(10, size=int(rng.integers(1, 5)), replace=False):
            counts[int(w)] = int(rng.integers(1, 100))
        inst = _inst(int(rng.integers(10)), counts, size_gb=0.09225)
        costs = [solve_video(inst, default_regions, default_prices, D).total_cost for D in thresholds]
        for tight, loose in zip(costs, costs[1:]):
            assert tight >= loose - 1e-12


def test_price_scaling(three_regions, three_prices):
    inst = _inst(1, [3, 10, 10])
    base = solve_video(inst, three_regions, three_prices, 45.0)
    scaled = solve_video(inst, three_regions, three_prices.scaled(3.0), 45.0)
    assert scaled.total_cost == pytest.approx(3.0 * base.total_cost)


def test_local_serving_at_intra_region_delay(default_regions, default_prices):
    rng = np.random.default_rng(9)
    for _ in range(20):
        counts = [int(c) for c in rng.integers(0, 3, size=10) * rng.integers(1, 40, size=10)]
        inst = _inst(int(rng.integers(10)), counts, size_gb=0.09225)
        report = solve_video(inst, default_regions, default_prices, 8.8)
        assert all(site == viewer for viewer, site in report.decision.assignments())
        assert report.avg_delay_ms <= 8.8 + 1e-9


def test_infeasible_threshold(default_regions, default_prices, three_regions, three_prices):
    with pytest.raises(InfeasibleError) as exc:
        solve_video(_inst(0, [1] + [0] * 9), default_regions, default_prices, 5.0)
    assert exc.value.min_delay_ms == pytest.approx(8.8)

    with pytest.raises(InfeasibleError):
        brute_force_solve(_inst(0, [2, 1, 0]), three_regions, three_prices, 0.0)


def test_zero_demand(three_regions, three_prices):
    inst = _inst(2, [0, 0, 0], size_gb=0.5)
    for solver in (solve_video, brute_force_solve):
        report = solver(inst, three_regions, three_prices, 0.0)
        assert report.decision.allocated() == [2]
        assert report.decision.serve == {}
        assert report.total_cost == pytest.approx(0.0005)
        assert report.avg_delay_ms == 0.0


def test_brute_force_size_limit(default_regions, default_prices):
    with pytest.raises(InstanceTooLargeError):
        brute_force_solve(_inst(0, [1] * 10), default_regions, default_prices, math.inf)


def test_minimum_average_delay(three_regions):
    assert minimum_average_delay(DemandVector(counts=[1, 1, 2]), three_regions.rtt) == 10.0
    assert minimum_average_delay(DemandVector.zeros(3), three_regions.rtt) == 0.0


def test_solve_period_edge_cases(three_regions, three_prices):
    assert solve_period([], three_regions, three_prices, 40.0) == []

    twin = _inst(0, [5, 3, 1], video_id="twin")
    first, second = solve_period([twin, twin], three_regions, three_prices, 40.0)
    assert first == second

    ok, bad = solve_period([_inst(0, [0, 0, 0], video_id="ok"), _inst(1, [0, 4, 2], video_id="bad")],
                           three_regions, three_prices, 5.0)
    assert not ok.infeasible
    assert bad.infeasible and not bad.optimal
    assert bad.min_delay_ms == pytest.approx(10.0)
    assert bad.decision == PlacementDecision(allocate=[False, True, False], serve={1: 1, 2: 1})
    assert validate_decision(bad.decision, DemandVector(counts=[0, 4, 2]), 1)


def test_solve_period_jobs_do_not_change_results(default_regions, default_prices):
    rng = np.random.default_rng(13)
    videos = [
        _inst(int(rng.integers(10)), [int(c) for c in rng.integers(0, 20, size=10)], 0.09225, f"v{i}")
        for i in range(12)
    ]
    serial = solve_period(videos, default_regions, default_prices, 121.0)
    parallel = solve_period(videos, default_regions, default_prices, 121.0, jobs=4)
    assert serial == parallel
    assert [r.video_id for r in parallel] == [f"v{i}" for i in range(12)]


def test_closest_site_fallback_is_not_reported_optimal(monkeypatch, three_regions, three_prices):
    monkeypatch.setattr(_ServingProblem, "feasible", lambda self, choice: False)
    report = solve_video(_inst(0, [4, 0, 6]), three_regions, three_prices, 40.0)
    assert report.decision == PlacementDecision(allocate=[True, False, True], serve={0: 0, 2: 2})
    assert report.avg_delay_ms == pytest.approx(10.0)
    assert not report.optimal


def test_lagrangian_bounds_hold_for_every_subset():
    rng = np.random.default_rng(17)
    checked = 0
    for _ in range(40):
        inst, regions, prices, D = random_instance(rng)
        if inst.demand.total == 0 or minimum_average_delay(inst.demand, regions.rtt) > D:
            continue
        problem = _ServingProblem(inst, regions, prices, D, False)
        masks = problem.subsets(prune=False)
        bound, inc_cost, inc_choice = problem.lagrangian(masks)
        classes = np.arange(len(problem.viewers))
        for s, mask in enumerate(masks):
            sites = np.flatnonzero(mask).tolist()
            extra = set(sites) - {problem.b}
            best = math.inf
            for choice in itertools.product(sites, repeat=len(classes)):
                if extra <= set(choice) and problem.feasible(choice):
                    best = min(best, float(problem.item_cost[classes, list(choice)].sum()))
            assert bound[s] <= best + 1e-9 * max(1.0, best)
            if math.isfinite(inc_cost[s]):
                assert all(mask[a] for a in inc_choice[s])
                assert problem.item_delay[classes, inc_choice[s]].sum() <= D + 1e-6
            checked += 1
    assert checked > 0


def test_decisions_allocate_only_serving_sites(default_regions, default_prices):
    rng = np.random.default_rng(29)
    for D in (40.0, 60.0, 120.0):
        for _ in range(10):
            counts = [int(c) for c in rng.integers(0, 30, size=10)]
            inst = _inst(int(rng.integers(10)), counts, size_gb=0.09225)
            report = solve_video(inst, default_regions, default_prices, D)
            served_from = {site for _, site in report.decision.assignments()}
            assert set(report.decision.allocated()) == served_from | {inst.broadcaster_region}
            assert report.avg_delay_ms <= D + 1e-9
