"""
Placement Optimizer

Exact per-video solver for the period cost minimization:

    min  S + M + Rq
    s.t. broadcaster always allocated, serve only from allocated sites,
         every region with viewers served by exactly one site,
         viewer-weighted average delay <= D

The objective separates across videos, so each video is solved on its own:

1. enumerate allocation subsets containing the broadcaster (after dropping
   dominated non-viewer regions), ordered by a cost lower bound. Once the
   cheapest-serving map of a subset misses D, every bound is raised with a
   knapsack bound over the full candidate set and a Lagrangian bound on the
   delay constraint, and subsets that cannot beat an incumbent are dropped;
2. for a subset, the serving assignment is a multiple-choice knapsack
   (one class per viewer region, one item per allocated site) solved by a
   DP over the discretized delay budget. Delays are rounded down, so the DP
   value is a lower bound; its assignment is accepted only if it passes the
   exact delay check, otherwise the subset is re-queued at a 10x finer
   resolution (and finally settled by an exact branch and bound);
3. a verified assignment is committed on the sites it actually serves from;
   the first one popped is optimal, since every other subset's lower bound
   is at least its cost.

``brute_force_solve`` enumerates every subset and serving map and serves as
the verification oracle on small instances.
"""

import heapq
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from .domain import CostParams, DemandVector, PlacementDecision, RegionSet, RttMatrix, validate_decision
from .errors import DimensionMismatchError, InfeasibleError, InstanceTooLargeError, InvalidDecisionError


logger = logging.getLogger(__name__)

DELAY_SLACK_MS = 1e-9
DEFAULT_RESOLUTION_MS = 0.1
DEFAULT_MAX_REFINEMENTS = 3
MAX_DP_TABLE = 2_000_000
BRUTE_FORCE_MAX_REGIONS = 6
BRUTE_FORCE_MAX_VIEWER_REGIONS = 5
LAGRANGE_ITERATIONS = 24

_EXACT = 0
_PENDING = 1


class VideoInstance(BaseModel):
    """Optimizer input for one video."""
    model_config = ConfigDict(frozen=True)

    broadcaster_region: int
    demand: DemandVector
    size_gb: float
    video_id: Optional[str] = None


class SolveReport(BaseModel):
    """Decision plus its cost breakdown and average delay."""
    model_config = ConfigDict(frozen=True)

    decision: PlacementDecision
    storage_cost: float
    migration_cost: float
    serving_cost: float
    avg_delay_ms: float
    optimal: bool
    infeasible: bool = False
    min_delay_ms: Optional[float] = None
    video_id: Optional[str] = None

    @property
    def total_cost(self) -> float:
        return self.storage_cost + self.migration_cost + self.serving_cost


def _check_dimensions(inst: VideoInstance, n: int, prices: Optional[CostParams] = None) -> None:
    sizes = {"regions": n, "demand": inst.demand.n}
    if prices is not None:
        sizes["prices"] = prices.n
    if len(set(sizes.values())) != 1 or not 0 <= inst.broadcaster_region < n:
        raise DimensionMismatchError(
            "Instance, prices and regions disagree on the region count",
            {**sizes, "broadcaster": inst.broadcaster_region},
        )


def video_cost(
    inst: VideoInstance,
    dec: PlacementDecision,
    prices: CostParams,
    charge_broadcaster_migration: bool = False,
) -> Tuple[float, float, float]:
    """
    Storage, migration and serving cost of one decision.

    S  = sum over allocated sites of alpha * size
    M  = sum over allocated sites other than the broadcaster of eta[broadcaster] * size
         (the broadcaster copy is included when ``charge_broadcaster_migration``)
    Rq = sum over viewer regions of omega[serving site] * size * viewers

    Raises:
        InvalidDecisionError: if the decision violates a structural constraint
    """
    _check_dimensions(inst, dec.n, prices)
    b = inst.broadcaster_region
    if not validate_decision(dec, inst.demand, b):
        raise InvalidDecisionError("Decision violates placement constraints", {"decision": dec.model_dump()})

    kappa = inst.size_gb
    allocated = dec.allocated()
    storage = math.fsum(prices.alpha[a] * kappa for a in allocated)
    migration = math.fsum(
        prices.eta[b] * kappa for a in allocated if a != b or charge_broadcaster_migration
    )
    serving = math.fsum(
        prices.omega[site] * kappa * inst.demand.counts[viewer] for viewer, site in dec.assignments()
    )
    return storage, migration, serving


def average_delay(demand: DemandVector, serve: Dict[int, int], d: Sequence[Sequence[float]]) -> float:
    """Viewer-weighted mean of d[site][viewer]; 0 when there are no viewers."""
    total = demand.total
    if total == 0:
        return 0.0
    weighted = math.fsum(demand.counts[w] * d[serve[w]][w] for w in sorted(serve))
    return weighted / total


def check_delay(inst: VideoInstance, dec: PlacementDecision, rtt: RttMatrix, D: float) -> Tuple[float, bool]:
    """
    Average serving delay of a decision and whether it meets threshold D.

    Zero-demand videos satisfy any threshold.
    """
    if inst.demand.total == 0:
        return 0.0, True
    avg = average_delay(inst.demand, dec.serve, rtt.d)
    return avg, avg <= D + DELAY_SLACK_MS


def minimum_average_delay(demand: DemandVector, rtt: RttMatrix) -> float:
    """Lowest achievable average delay: every viewer region served from its closest site."""
    total = demand.total
    if total == 0:
        return 0.0
    d = rtt.d
    n = len(d)
    weighted = math.fsum(
        demand.counts[w] * min(d[a][w] for a in range(n)) for w in demand.support()
    )
    return weighted / total


def _report(
    inst: VideoInstance,
    dec: PlacementDecision,
    regions: RegionSet,
    prices: CostParams,
    D: float,
    charge_broadcaster_migration: bool,
    optimal: bool = True,
) -> SolveReport:
    storage, migration, serving = video_cost(inst, dec, prices, charge_broadcaster_migration)
    avg, satisfied = check_delay(inst, dec, regions.rtt, D)
    return SolveReport(
        decision=dec,
        storage_cost=storage,
        migration_cost=migration,
        serving_cost=serving,
        avg_delay_ms=avg,
        optimal=optimal and satisfied,
        video_id=inst.video_id,
    )


class _ServingProblem:
    """Arrays for one video: viewer classes, per-site prices and delays."""

    def __init__(self, inst: VideoInstance, regions: RegionSet, prices: CostParams, D: float, charge: bool):
        self.inst = inst
        self.n = regions.n
        self.b = inst.broadcaster_region
        self.D = D
        self.d = regions.rtt.as_array()
        self.d_rows = regions.rtt.d
        self.kappa = inst.size_gb
        self.omega = np.asarray(prices.omega, dtype=np.float64)

        counts = np.asarray(inst.demand.counts, dtype=np.float64)
        self.viewers = np.asarray(inst.demand.support(), dtype=np.int64)
        self.p = counts[self.viewers]
        self.total = float(inst.demand.total)

        alpha = np.asarray(prices.alpha, dtype=np.float64)
        eta_b = prices.eta[self.b]
        self.replica_cost = alpha * self.kappa + eta_b * self.kappa
        if not charge:
            self.replica_cost[self.b] = alpha[self.b] * self.kappa

        # per (viewer class, site): serving cost and contribution to the average delay
        self.item_cost = self.p[:, None] * self.kappa * self.omega[None, :]
        self.item_delay = self.p[:, None] * self.d[:, self.viewers].T / self.total
        self._delay_rows = self.item_delay.tolist()
        cost_rows = self.item_cost.tolist()
        self._order = [
            sorted(range(self.n), key=lambda a, c=c: (cost_rows[c][a], self._delay_rows[c][a], a))
            for c in range(len(self.viewers))
        ]

    def _dominated(self, c: int) -> bool:
        marginal = self.replica_cost.copy()
        marginal[self.b] = 0.0
        col_c = self.d[c, self.viewers]
        for other in range(self.n):
            if other == c:
                continue
            col_o = self.d[other, self.viewers]
            if marginal[other] > marginal[c] or self.omega[other] > self.omega[c] or np.any(col_o > col_c):
                continue
            strictly_better = (
                marginal[other] < marginal[c] or self.omega[other] < self.omega[c] or np.any(col_o < col_c)
            )
            if strictly_better or other < c:
                return True
        return False

    def candidates(self, prune: bool) -> List[int]:
        viewer_set = set(self.viewers.tolist())
        others = [r for r in range(self.n) if r != self.b]
        if prune:
            others = [r for r in others if r in viewer_set or not self._dominated(r)]
        return others

    def subsets(self, prune: bool) -> np.ndarray:
        """Boolean (S, n) masks of every allocation subset containing the broadcaster."""
        others = self.candidates(prune)
        k = len(others)
        bits = (np.arange(1 << k)[:, None] >> np.arange(k)[None, :]) & 1
        masks = np.zeros((1 << k, self.n), dtype=bool)
        masks[:, others] = bits.astype(bool)
        masks[:, self.b] = True
        return masks

    def decision(self, sites: Sequence[int], choice: Sequence[int]) -> PlacementDecision:
        allocate = [False] * self.n
        for a in sites:
            allocate[int(a)] = True
        serve = {int(w): int(a) for w, a in zip(self.viewers, choice)}
        return PlacementDecision(allocate=allocate, serve=serve)

    def feasible(self, choice: Sequence[int]) -> bool:
        serve = {int(w): int(a) for w, a in zip(self.viewers, choice)}
        return average_delay(self.inst.demand, serve, self.d_rows) <= self.D + DELAY_SLACK_MS

    def pareto_items(self, sites: Sequence[int], cls: int) -> List[int]:
        """Sites for one class after removing items no cheaper and no faster than another."""
        allowed = {int(a) for a in sites}
        delays = self._delay_rows[cls]
        kept: List[int] = []
        best_delay = math.inf
        for a in self._order[cls]:
            if a in allowed and delays[a] < best_delay:
                kept.append(a)
                best_delay = delays[a]
        return kept

    def greedy(self, sites: np.ndarray) -> List[int]:
        return [self.pareto_items(sites, c)[0] for c in range(len(self.viewers))]

    def knapsack(self, sites: np.ndarray, resolution_ms: float) -> Optional[Tuple[float, List[int]]]:
        """
        Multiple-choice knapsack DP over the delay budget at ``resolution_ms``.

        Returns (serving cost lower bound, chosen site per class), None if the
        rounded-down relaxation is already infeasible, or raises OverflowError
        when the table would exceed MAX_DP_TABLE.
        """
        classes = []
        base = 0
        cap = 0
        for c in range(len(self.viewers)):
            items = self.pareto_items(sites, c)
            units = np.floor(self.item_delay[c, items] / resolution_ms * (1.0 - 1e-12)).astype(np.int64)
            units = np.maximum(units, 0)
            low = int(units.min())
            base += low
            cap += int(units.max()) - low
            classes.append((items, units - low, self.item_cost[c, items]))

        budget = int(math.floor((self.D + DELAY_SLACK_MS) / resolution_ms * (1.0 + 1e-12))) - base
        if budget < 0:
            return None
        budget = min(budget, cap)
        if budget + 1 > MAX_DP_TABLE:
            raise OverflowError(budget)

        dp = np.zeros(budget + 1, dtype=np.float64)
        span = np.arange(budget + 1)
        picks = []
        for items, weights, costs in classes:
            # (items, capacity) table; ties keep the first item
            src = span[None, :] - weights[:, None]
            cand = np.where(src >= 0, dp[np.maximum(src, 0)] + costs[:, None], np.inf)
            pick = cand.argmin(axis=0)
            dp = cand[pick, span]
            picks.append(np.where(np.isfinite(dp), pick, -1))

        if not math.isfinite(dp[budget]):
            return None

        choice = [0] * len(classes)
        cap_left = budget
        for c in range(len(classes) - 1, -1, -1):
            idx = int(picks[c][cap_left])
            items, weights, _ = classes[c]
            choice[c] = items[idx]
            cap_left -= int(weights[idx])
        return float(dp[budget]), choice

    def _multiplier_range(self) -> Optional[Tuple[float, float]]:
        """Span of delay prices at which some class trades cost for delay."""
        dc = self.item_cost[:, :, None] - self.item_cost[:, None, :]
        dd = self.item_delay[:, None, :] - self.item_delay[:, :, None]
        trade = (dc > 0) & (dd > 0)
        if not trade.any():
            return None
        ratios = dc[trade] / dd[trade]
        return float(ratios.min()) / 2.0, float(ratios.max()) * 2.0

    def lagrangian(self, masks: np.ndarray, iterations: int = LAGRANGE_ITERATIONS):
        """
        Delay-aware bounds on the cost of serving from exactly the sites in each subset.

        A subset only needs solving when its best serving map uses every
        non-broadcaster site it allocates; otherwise a smaller subset with the
        same map is cheaper. For a delay price lam >= 0, the sum over classes of
        the smallest cost + lam * delay among allocated sites, plus for each
        unused site the cheapest switch of one class onto it, minus lam * D,
        bounds that cost from below. lam is bisected per subset on whether the
        minimizing map meets D.

        Args:
            masks: Boolean (m, n) allocation subsets

        Returns:
            (bound, incumbent serving cost, incumbent choice): per-subset lower
            bounds (inf when the subset has more sites than viewer classes) and
            the cheapest D-feasible minimizing map seen (cost inf when none was)
        """
        m = masks.shape[0]
        n_cls = len(self.viewers)
        limit = self.D + DELAY_SLACK_MS
        rows = np.arange(n_cls)[None, :]
        blocked = ~masks[:, None, :]
        extra_sites = masks.copy()
        extra_sites[:, self.b] = False
        coverable = extra_sites.sum(axis=1) <= n_cls

        def evaluate(lam: np.ndarray):
            score = np.where(blocked, np.inf, self.item_cost[None] + lam[:, None, None] * self.item_delay[None])
            choice = score.argmin(axis=2)
            picked = np.take_along_axis(score, choice[:, :, None], axis=2)
            switch = (score - picked).min(axis=1)
            used = np.zeros((m, self.n), dtype=bool)
            used[np.arange(m)[:, None], choice] = True
            missing = extra_sites & ~used
            penalty = np.where(missing, switch, 0.0).sum(axis=1)
            cost = self.item_cost[rows, choice].sum(axis=1)
            delay = self.item_delay[rows, choice].sum(axis=1)
            return choice, cost, delay, penalty

        choice, cost, delay, penalty = evaluate(np.zeros(m))
        bound = cost + penalty
        ok = delay <= limit
        inc_cost = np.where(ok, cost, np.inf)
        inc_choice = choice.copy()

        span = self._multiplier_range()
        if math.isfinite(limit) and span is not None and not ok.all():
            lo = np.full(m, math.log(span[0]))
            hi = np.full(m, math.log(span[1]))
            for _ in range(iterations):
                mid = 0.5 * (lo + hi)
                lam = np.exp(mid)
                choice, cost, delay, penalty = evaluate(lam)
                value = cost + penalty + lam * (delay - limit)
                value -= 1e-12 * (cost + penalty + lam * (delay + limit))
                bound = np.maximum(bound, value)
                ok = delay <= limit
                better = ok & (cost < inc_cost)
                inc_cost[better] = cost[better]
                inc_choice[better] = choice[better]
                lo = np.where(ok, lo, mid)
                hi = np.where(ok, mid, hi)

        return np.where(coverable, bound, np.inf), inc_cost, inc_choice

    def branch_and_bound(self, sites: np.ndarray) -> Optional[List[int]]:
        """Exact search over serving maps with cost and delay bounds."""
        n_cls = len(self.viewers)
        items = [self.pareto_items(sites, c) for c in range(n_cls)]
        min_cost = [min(self.item_cost[c, a] for a in items[c]) for c in range(n_cls)]
        min_delay = [min(self.item_delay[c, a] for a in items[c]) for c in range(n_cls)]
        rest_cost = [math.fsum(min_cost[c:]) for c in range(n_cls + 1)]
        rest_delay = [math.fsum(min_delay[c:]) for c in range(n_cls + 1)]
        limit = self.D + DELAY_SLACK_MS

        best_cost = math.inf
        best: Optional[List[int]] = None
        chosen: List[int] = []

        def visit(c: int, cost: float, delay: float) -> None:
            nonlocal best_cost, best
            if c == n_cls:
                if self.feasible(chosen):
                    best_cost, best = cost, list(chosen)
                return
            for a in items[c]:
                new_cost = cost + self.item_cost[c, a]
                new_delay = delay + self.item_delay[c, a]
                if new_cost + rest_cost[c + 1] >= best_cost or new_delay + rest_delay[c + 1] > limit:
                    continue
                chosen.append(a)
                visit(c + 1, new_cost, new_delay)
                chosen.pop()

        visit(0, 0.0, 0.0)
        return best


def _zero_demand_report(inst, regions, prices, D, charge) -> SolveReport:
    dec = PlacementDecision.broadcaster_only(regions.n, inst.broadcaster_region)
    return _report(inst, dec, regions, prices, D, charge)


def solve_video(
    inst: VideoInstance,
    regions: RegionSet,
    prices: CostParams,
    D: float,
    knapsack_resolution_ms: float = DEFAULT_RESOLUTION_MS,
    charge_broadcaster_migration: bool = False,
    max_refinements: int = DEFAULT_MAX_REFINEMENTS,
    prune: bool = True,
) -> SolveReport:
    """
    Optimal placement and serving for one video.

    Args:
        inst: Video to place
        regions: Regions and RTT matrix
        prices: Storage, migration and serving prices
        D: Average delay threshold in ms (math.inf for unconstrained)
        knapsack_resolution_ms: Initial delay discretization of the DP
        charge_broadcaster_migration: Charge eta for the broadcaster copy too
        max_refinements: Finer DP levels tried before exact branch and bound
        prune: Drop dominated non-viewer regions before enumeration

    Returns:
        SolveReport with optimal=True

    Raises:
        InfeasibleError: if even the closest-site serving misses D
    """
    _check_dimensions(inst, regions.n, prices)
    if inst.demand.total == 0:
        return _zero_demand_report(inst, regions, prices, D, charge_broadcaster_migration)

    min_avg = minimum_average_delay(inst.demand, regions.rtt)
    if min_avg > D + DELAY_SLACK_MS:
        raise InfeasibleError(min_avg, D)

    problem = _ServingProblem(inst, regions, prices, D, charge_broadcaster_migration)
    masks = problem.subsets(prune)

    fixed = masks @ problem.replica_cost
    cheapest_omega = np.where(masks, problem.omega[None, :], np.inf).min(axis=1)
    lower_bound = fixed + problem.kappa * problem.total * cheapest_omega

    closest = np.where(masks[:, :, None], problem.d[:, problem.viewers][None, :, :], np.inf).min(axis=1)
    best_avg = (closest * problem.p[None, :]).sum(axis=1) / problem.total
    # loose tolerance; numpy summation order differs from the exact check
    reachable = best_avg <= D + DELAY_SLACK_MS + 1e-9

    heap: List[Tuple[float, int, int, int]] = [
        (float(lower_bound[s]), _PENDING, s, -1) for s in np.flatnonzero(reachable)
    ]
    heapq.heapify(heap)
    resolved: List[PlacementDecision] = []
    tightened = False

    def settle(s: int, choice: Sequence[int]) -> None:
        choice = [int(a) for a in choice]
        dec = problem.decision(sorted(set(choice) | {problem.b}), choice)
        resolved.append(dec)
        storage, migration, serving = video_cost(inst, dec, prices, charge_broadcaster_migration)
        heapq.heappush(heap, (storage + migration + serving, _EXACT, s, len(resolved) - 1))

    def seed(s: int, choice: Sequence[int]) -> None:
        if problem.feasible(choice):
            settle(s, choice)

    def tighten() -> None:
        """Raise pending bounds with delay-aware relaxations and seed incumbents."""
        pending = [(entry[0], entry[2]) for entry in heap if entry[1] == _PENDING]
        heap[:] = [entry for entry in heap if entry[1] == _EXACT]
        ids = np.asarray([s for _, s in pending], dtype=np.int64)
        bounds = np.asarray([b for b, _ in pending], dtype=np.float64)

        # every subset serves from a subset of the full candidate set
        full = len(masks) - 1
        try:
            relaxed = problem.knapsack(np.flatnonzero(masks[full]), knapsack_resolution_ms)
        except OverflowError:
            relaxed = None
        if relaxed is not None:
            serving_floor, choice = relaxed
            bounds = np.maximum(bounds, fixed[ids] + serving_floor)
            seed(full, choice)

        incumbent = min((entry[0] for entry in heap), default=math.inf)
        open_ = bounds < incumbent
        if open_.any():
            lagr, inc_cost, inc_choice = problem.lagrangian(masks[ids[open_]])
            bounds[open_] = np.maximum(bounds[open_], fixed[ids[open_]] + lagr)
            totals = fixed[ids[open_]] + inc_cost
            if np.isfinite(totals).any():
                j = int(np.argmin(totals))
                seed(int(ids[open_][j]), inc_choice[j])

        incumbent = min((entry[0] for entry in heap), default=math.inf)
        kept = bounds < incumbent
        logger.debug("Video %s: %d of %d subsets left after tightening", inst.video_id, int(kept.sum()), len(ids))
        for b, s in zip(bounds[kept], ids[kept]):
            heap.append((float(b), _PENDING, int(s), -1))
        heapq.heapify(heap)

    while heap:
        bound, status, s, level = heapq.heappop(heap)
        if status == _EXACT:
            return _report(inst, resolved[level], regions, prices, D, charge_broadcaster_migration)

        sites = np.flatnonzero(masks[s])
        if level < 0:
            choice = problem.greedy(sites)
            if problem.feasible(choice):
                settle(s, choice)
                continue
            if not tightened:
                tightened = True
                heapq.heappush(heap, (bound, status, s, level))
                tighten()
                continue

        next_level = level + 1
        relaxed = None
        use_dp = next_level <= max_refinements
        if use_dp:
            resolution = knapsack_resolution_ms / (10 ** next_level)
            try:
                relaxed = problem.knapsack(sites, resolution)
            except OverflowError:
                logger.debug("Subset %s: DP table too large at %.6g ms, using branch and bound", s, resolution)
                use_dp = False
            else:
                if relaxed is None:
                    continue

        if use_dp:
            serving_bound, choice = relaxed
            if problem.feasible(choice):
                settle(s, choice)
            else:
                logger.debug("Subset %s: DP at %.6g ms violates D, refining", s, resolution)
                heapq.heappush(heap, (max(bound, float(fixed[s]) + serving_bound), _PENDING, s, next_level))
            continue

        choice = problem.branch_and_bound(sites)
        if choice is not None:
            settle(s, choice)

    # Only reachable when every subset was lost to rounding at the delay boundary
    logger.debug("Falling back to closest-site serving for video %s", inst.video_id)
    closest_sites = [int(np.argmin(problem.d[:, w])) for w in problem.viewers]
    sites = sorted(set(closest_sites) | {problem.b})
    dec = problem.decision(sites, closest_sites)
    return _report(inst, dec, regions, prices, D, charge_broadcaster_migration, optimal=False)


def brute_force_solve(
    inst: VideoInstance,
    regions: RegionSet,
    prices: CostParams,
    D: float,
    charge_broadcaster_migration: bool = False,
) -> SolveReport:
    """
    Exhaustive oracle: every allocation subset times every serving map, with
    the exact (undiscretized) delay check.

    Raises:
        InstanceTooLargeError: more than 6 regions or 5 viewer regions
        InfeasibleError: if no assignment meets D
    """
    _check_dimensions(inst, regions.n, prices)
    n = regions.n
    viewers = inst.demand.support()
    if n > BRUTE_FORCE_MAX_REGIONS or len(viewers) > BRUTE_FORCE_MAX_VIEWER_REGIONS:
        raise InstanceTooLargeError(
            "Instance too large for exhaustive enumeration",
            {"regions": n, "viewer_regions": len(viewers)},
        )
    if inst.demand.total == 0:
        return _zero_demand_report(inst, regions, prices, D, charge_broadcaster_migration)

    b = inst.broadcaster_region
    d = regions.rtt.as_array()
    kappa = inst.size_gb
    omega = np.asarray(prices.omega, dtype=np.float64)
    p = np.asarray([inst.demand.counts[w] for w in viewers], dtype=np.float64)
    cols = np.asarray(viewers, dtype=np.int64)
    total = p.sum()

    best_cost = math.inf
    best: Optional[Tuple[List[int], List[int]]] = None
    for mask in range(1 << n):
        if not mask >> b & 1:
            continue
        sites = [r for r in range(n) if mask >> r & 1]
        fixed = math.fsum(
            prices.alpha[a] * kappa + (prices.eta[b] * kappa if a != b or charge_broadcaster_migration else 0.0)
            for a in sites
        )
        maps = np.asarray(list(itertools.product(sites, repeat=len(viewers))), dtype=np.int64)
        avg = (d[maps, cols[None, :]] * p[None, :]).sum(axis=1) / total
        cost = fixed + (omega[maps] * p[None, :]).sum(axis=1) * kappa
        cost[avg > D + DELAY_SLACK_MS] = np.inf
        i = int(np.argmin(cost))
        if cost[i] < best_cost:
            best_cost = float(cost[i])
            best = (sites, maps[i].tolist())

    if best is None:
        raise InfeasibleError(minimum_average_delay(inst.demand, regions.rtt), D)

    sites, choice = best
    allocate = [r in sites for r in range(n)]
    dec = PlacementDecision(allocate=allocate, serve=dict(zip(viewers, choice)))
    return _report(inst, dec, regions, prices, D, charge_broadcaster_migration)


def fallback_report(
    inst: VideoInstance,
    regions: RegionSet,
    prices: CostParams,
    D: float,
    min_delay_ms: float,
    charge_broadcaster_migration: bool = False,
) -> SolveReport:
    """Broadcaster-only allocation for a video no assignment can serve within D."""
    dec = PlacementDecision.broadcaster_only(regions.n, inst.broadcaster_region, inst.demand)
    report = _report(inst, dec, regions, prices, D, charge_broadcaster_migration, optimal=False)
    return report.model_copy(update={"infeasible": True, "min_delay_ms": min_delay_ms})


def solve_period(
    videos: Sequence[VideoInstance],
    regions: RegionSet,
    prices: CostParams,
    D: float,
    jobs: int = 1,
    knapsack_resolution_ms: float = DEFAULT_RESOLUTION_MS,
    charge_broadcaster_migration: bool = False,
    max_refinements: int = DEFAULT_MAX_REFINEMENTS,
) -> List[SolveReport]:
    """
    Solve every video of a period independently, preserving input order.

    Infeasible videos do not stop the period: they come back as
    broadcaster-only reports flagged ``infeasible``.
    """
    def solve_one(inst: VideoInstance) -> SolveReport:
        try:
            return solve_video(
                inst, regions, prices, D,
                knapsack_resolution_ms=knapsack_resolution_ms,
                charge_broadcaster_migration=charge_broadcaster_migration,
                max_refinements=max_refinements,
            )
        except InfeasibleError as e:
            logger.warning("Video %s infeasible at D=%s ms (min %.3f ms)", inst.video_id, D, e.min_delay_ms)
            return fallback_report(inst, regions, prices, D, e.min_delay_ms, charge_broadcaster_migration)

    if jobs > 1 and len(videos) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(solve_one, videos))
    return [solve_one(v) for v in videos]
