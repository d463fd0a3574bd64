import heapq
import itertools
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from pnetdesign.flow import FeasibilityReport, check_feasibility
from pnetdesign.inequality import CUT_TOLERANCE, Cut, CutPool, NoGoodCut, evaluate_violation
from pnetdesign.logger import logger
from pnetdesign.lp import LinearProgram, Relation, solve_lp
from pnetdesign.network import Instance
from pnetdesign.separation import ProblemTooLargeException, separate

MAX_BRUTE_FORCE_ARCS = 20
INTEGRALITY_TOLERANCE = 1e-6
BRANCHING_RULES = ('most-fractional', 'first-fractional')


class CutSoundnessException(Exception): pass


class SolveStatus(str, Enum):
    OPTIMAL = 'optimal'
    INFEASIBLE = 'infeasible'
    LIMIT = 'limit-reached'


@dataclass(frozen=True)
class SolverConfig:
    use_cuts: bool = True
    k_max: Optional[int] = None
    fixed_k: Optional[int] = None
    cut_tolerance: float = CUT_TOLERANCE
    node_limit: Optional[int] = None
    time_limit: Optional[float] = None
    root_only_cuts: bool = False
    max_rounds: int = 50
    branching: str = 'most-fractional'
    workers: int = 1

    def __post_init__(self):
        for name in ('k_max', 'fixed_k', 'node_limit', 'time_limit'):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise ValueError(f'{name} must be positive, got {value}')
        if self.max_rounds < 1 or self.workers < 1 or self.cut_tolerance < 0:
            raise ValueError('max_rounds and workers must be positive, cut_tolerance non-negative')
        if self.branching not in BRANCHING_RULES:
            raise ValueError(f'unknown branching rule {self.branching!r}, expected one of {BRANCHING_RULES}')

    @property
    def k_label(self) -> str:
        if self.fixed_k is not None:
            return f'={self.fixed_k}'
        return 'all' if self.k_max is None else str(self.k_max)


@dataclass
class SolveStatistics:
    nodes: int = 0
    branch_nodes: int = 0
    cuts_added: int = 0
    nogoods_added: int = 0
    lp_iterations: int = 0
    separation_calls: int = 0
    feasibility_checks: int = 0
    wall_time: float = 0.0


@dataclass(frozen=True, eq=False)
class SolveOutcome:
    status: SolveStatus
    x: Optional[np.ndarray]
    cost: Optional[float]
    dual_bound: float
    statistics: SolveStatistics
    cuts: Tuple[Cut, ...] = ()

    @property
    def gap(self) -> float:
        """relative gap in percent, inf without incumbent"""
        if self.cost is None:
            return math.inf
        if self.status != SolveStatus.LIMIT:
            return 0.0
        if abs(self.cost) < 1e-12:
            return 0.0
        return max(0.0, (self.cost - self.dual_bound) / abs(self.cost) * 100)

    def to_record(self, inst: Instance, config: Optional[SolverConfig]) -> Dict:
        stats = self.statistics
        return {
            'instance': inst.name,
            'cuts_enabled': config is not None and config.use_cuts,
            'k_max': 'brute-force' if config is None else config.k_label,
            'pi_bar': inst.pi_bar,
            'status': self.status.value,
            'cost': self.cost,
            'dual_bound': self.dual_bound,
            'time_s': round(stats.wall_time, 3),
            'nodes': stats.nodes,
            'branch_nodes': stats.branch_nodes,
            'cuts': stats.cuts_added,
            'nogoods': stats.nogoods_added,
            'lp_iterations': stats.lp_iterations,
            'gap_pct': self.gap,
        }


def _cost_order(cost: np.ndarray) -> Iterator[np.ndarray]:
    """
    Every binary vector over the arcs, cheapest first, generated lazily.
    Costs must be non-negative: a subset of the cost-sorted arcs ending at
    position i spawns the subset extended by i+1 and the one with i replaced
    by i+1, neither cheaper than itself.
    """
    n = len(cost)
    order = np.argsort(cost, kind='stable')
    ranked = [float(c) for c in cost[order]]

    def design(members: Tuple[int, ...]) -> np.ndarray:
        x = np.zeros(n)
        x[order[list(members)]] = 1.0
        return x

    yield design(())
    heap = [(ranked[0], 0, (0,))] if n else []
    while heap:
        total, last, members = heapq.heappop(heap)
        yield design(members)
        if last + 1 < n:
            following = ranked[last + 1]
            heapq.heappush(heap, (total + following, last + 1, members + (last + 1,)))
            heapq.heappush(heap, (total - ranked[last] + following, last + 1, members[:-1] + (last + 1,)))


def solve_bruteforce(inst: Instance, max_arcs: int = MAX_BRUTE_FORCE_ARCS) -> SolveOutcome:
    """cheapest feasible binary x by enumerating every subset of arcs"""
    if inst.graph.n_arcs > max_arcs:
        raise ProblemTooLargeException(f'{inst.graph.n_arcs} arcs exceed the brute-force limit {max_arcs}')
    start = time.monotonic()
    stats = SolveStatistics()
    for x in _cost_order(inst.cost):
        stats.nodes += 1
        stats.feasibility_checks += 1
        if check_feasibility(inst, x).feasible:
            cost = float(inst.cost @ x)
            stats.wall_time = time.monotonic() - start
            logger.info(f'brute force on {inst.name}: optimal cost {cost:.6g} after {stats.nodes} points')
            return SolveOutcome(SolveStatus.OPTIMAL, x, cost, cost, stats)
    stats.wall_time = time.monotonic() - start
    logger.info(f'brute force on {inst.name}: infeasible after {stats.nodes} points')
    return SolveOutcome(SolveStatus.INFEASIBLE, None, None, math.inf, stats)


@dataclass(order=True)
class _Node:
    bound: float
    order: int
    depth: int = field(compare=False)
    lower: np.ndarray = field(compare=False)
    upper: np.ndarray = field(compare=False)


class BranchAndCut:
    """
    LP relaxation over the cut pool, best-bound node selection. Integral LP
    points go to the feasibility oracle; infeasible ones are cut off by a
    disjoint-cut inequality when separation finds one, by a no-good otherwise.
    """

    def __init__(self, inst: Instance, config: SolverConfig, pool: Optional[CutPool] = None):
        self.inst = inst
        self.config = config
        self.pool = pool if pool is not None else CutPool()
        self.stats = SolveStatistics()
        self.monotone = inst.is_two_terminal and not inst.has_individual_bounds
        self.incumbent: Optional[np.ndarray] = None
        self.incumbent_cost = math.inf
        self.feasible_points: List[np.ndarray] = []
        self._feasibility: Dict[bytes, FeasibilityReport] = {}
        self._counter = itertools.count()
        self._start = time.monotonic()

    def feasibility(self, x: np.ndarray) -> FeasibilityReport:
        key = x.astype(np.int8).tobytes()
        if key not in self._feasibility:
            self.stats.feasibility_checks += 1
            self._feasibility[key] = check_feasibility(self.inst, x)
        return self._feasibility[key]

    def _limit_reached(self) -> bool:
        if self.config.node_limit is not None and self.stats.nodes >= self.config.node_limit:
            return True
        return self.config.time_limit is not None and time.monotonic() - self._start >= self.config.time_limit

    def _prunable(self, bound: float) -> bool:
        if self.incumbent is None:
            return False
        return bound >= self.incumbent_cost - 1e-9 * max(1.0, abs(self.incumbent_cost))

    def _add_cut(self, cut: Cut) -> bool:
        for point in self.feasible_points:
            if evaluate_violation(cut, point) < -self.config.cut_tolerance:
                raise CutSoundnessException(f'{cut.kind} cut violated by feasible point {point.astype(int).tolist()}')
        if not self.pool.add(cut):
            return False
        if cut.kind == NoGoodCut.kind:
            self.stats.nogoods_added += 1
        else:
            self.stats.cuts_added += 1
        return True

    def _accept(self, x: np.ndarray) -> None:
        violated = self.pool.violated_by(x, self.config.cut_tolerance)
        if violated:
            raise CutSoundnessException(f'feasible point {x.astype(int).tolist()} violates {len(violated)} pool cuts')
        self.feasible_points.append(x)
        cost = float(self.inst.cost @ x)
        if cost < self.incumbent_cost:
            self.incumbent, self.incumbent_cost = x, cost
            logger.info(f'new incumbent with cost {cost:.6g}')

    def _separate(self, x: np.ndarray, depth: int) -> Optional[Cut]:
        if not self.config.use_cuts or (self.config.root_only_cuts and depth > 0):
            return None
        self.stats.separation_calls += 1
        result = separate(self.inst, x, self.config.k_max, self.config.fixed_k, self.config.cut_tolerance, self.config.workers)
        return result.violated

    def _relaxation(self, node: _Node) -> LinearProgram:
        matrix, rhs = self.pool.rows(self.inst.graph.n_arcs)
        return LinearProgram(np.array(self.inst.cost, dtype=float), matrix, tuple([Relation.GE] * len(rhs)), rhs,
                             node.lower.astype(float), node.upper.astype(float))

    def _branch_variable(self, x: np.ndarray, node: _Node) -> Optional[int]:
        free = np.flatnonzero(node.lower < node.upper)
        if not len(free):
            return None
        fractionality = np.abs(x[free] - np.round(x[free]))
        fractional = free[fractionality > INTEGRALITY_TOLERANCE]
        if not len(fractional):
            return int(free[np.argmax(self.inst.cost[free])])
        if self.config.branching == 'first-fractional':
            return int(fractional[0])
        # most fractional first, then the more expensive arc
        return int(min(fractional, key=lambda a: (round(abs(x[a] - 0.5), 12), -self.inst.cost[a], a)))

    def _branch(self, node: _Node, bound: float, a: int) -> None:
        for value in (1.0, 0.0):
            lower, upper = node.lower.copy(), node.upper.copy()
            lower[a] = upper[a] = value
            heapq.heappush(self.heap, _Node(bound, next(self._counter), node.depth + 1, lower, upper))
            self.stats.branch_nodes += 1

    def process(self, node: _Node) -> float:
        """cut loop of one node; returns its final LP bound, inf when the node is infeasible"""
        rounds = 0
        previous = -math.inf
        while True:
            solution = solve_lp(self._relaxation(node))
            self.stats.lp_iterations += solution.iterations
            if not solution.optimal:
                logger.info(f'node {self.stats.nodes} depth {node.depth} lp {solution.status.value} cuts {len(self.pool)} prune')
                return math.inf
            bound = solution.objective
            if bound < previous - 1e-7 * max(1.0, abs(previous)):
                logger.warning(f'lp bound decreased from {previous:.9g} to {bound:.9g} after adding cuts')
            previous = bound
            if self._prunable(bound):
                logger.info(f'node {self.stats.nodes} depth {node.depth} lp {bound:.6g} cuts {len(self.pool)} prune by bound')
                return bound
            x = np.clip(solution.x, node.lower, node.upper)
            integral = np.all(np.abs(x - np.round(x)) <= INTEGRALITY_TOLERANCE)

            if integral:
                point = np.round(x)
                report = self.feasibility(point)
                if report.feasible:
                    self._accept(point)
                    logger.info(f'node {self.stats.nodes} depth {node.depth} lp {bound:.6g} cuts {len(self.pool)} feasible')
                    return bound
                if rounds < self.config.max_rounds:
                    rounds += 1
                    cut = self._separate(point, node.depth)
                    if cut is not None and self._add_cut(cut):
                        logger.debug(f'round {rounds}: disjoint-cut inequality k={cut.k} at infeasible point')
                        continue
                    if self._add_cut(NoGoodCut.excluding(point, support_only=self.monotone)):
                        logger.debug(f'round {rounds}: no-good cut ({report.reason})')
                        continue
            else:
                if rounds < self.config.max_rounds:
                    rounds += 1
                    cut = self._separate(x, node.depth)
                    if cut is not None and self._add_cut(cut):
                        logger.debug(f'round {rounds}: disjoint-cut inequality k={cut.k} at fractional point')
                        continue

            a = self._branch_variable(x, node)
            if a is None:
                logger.info(f'node {self.stats.nodes} depth {node.depth} lp {bound:.6g} cuts {len(self.pool)} prune infeasible leaf')
                return math.inf
            logger.info(f'node {self.stats.nodes} depth {node.depth} lp {bound:.6g} cuts {len(self.pool)} branch on {self.inst.graph.arc_names[a]}')
            self._branch(node, bound, a)
            return bound

    def presolve(self) -> bool:
        """False when the instance is proven infeasible without search"""
        if not self.monotone:
            return True
        report = self.feasibility(np.ones(self.inst.graph.n_arcs))
        if not report.feasible:
            logger.info(f'{self.inst.name}: infeasible with every arc built ({report.reason})')
        return report.feasible

    def solve(self) -> SolveOutcome:
        n = self.inst.graph.n_arcs
        self.heap: List[_Node] = [_Node(0.0, next(self._counter), 0, np.zeros(n), np.ones(n))]
        limit = False
        if not self.presolve():
            self.heap = []
        while self.heap:
            if self._limit_reached():
                limit = True
                break
            node = heapq.heappop(self.heap)
            if self._prunable(node.bound):
                continue
            self.stats.nodes += 1
            self.process(node)

        self.stats.wall_time = time.monotonic() - self._start
        if limit:
            dual_bound = min([node.bound for node in self.heap] + [self.incumbent_cost])
            status = SolveStatus.LIMIT
        elif self.incumbent is not None:
            dual_bound, status = self.incumbent_cost, SolveStatus.OPTIMAL
        else:
            dual_bound, status = math.inf, SolveStatus.INFEASIBLE
        cost = None if self.incumbent is None else self.incumbent_cost
        logger.info(f'{self.inst.name}: {status.value} cost={cost} bound={dual_bound:.6g} nodes={self.stats.nodes} '
                    f'branch_nodes={self.stats.branch_nodes} cuts={self.stats.cuts_added} nogoods={self.stats.nogoods_added}')
        return SolveOutcome(status, self.incumbent, cost, dual_bound, self.stats, tuple(self.pool))


def solve_branch_and_cut(inst: Instance, config: Optional[SolverConfig] = None, pool: Optional[CutPool] = None) -> SolveOutcome:
    return BranchAndCut(inst, config or SolverConfig(), pool).solve()
