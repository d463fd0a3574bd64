import abc
import math
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Collection, Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from pnetdesign.flow import check_build_vector
from pnetdesign.inequality import CUT_TOLERANCE, CutChain, ValidInequality, build_inequality, chain_violations
from pnetdesign.logger import logger
from pnetdesign.lp import LinearProgram, LpNumericalException, Relation, solve_lp
from pnetdesign.network import Instance, balance_of_subset, crossing_arcs

MAX_EXHAUSTIVE_TERMINALS = 16
MAX_BRUTE_FORCE_NODES = 8
INTEGRALITY_TOLERANCE = 1e-7


class ProblemTooLargeException(Exception): pass


@dataclass(frozen=True, eq=False)
class WeightedCutGraph:
    """
    Undirected view of the instance graph with the sources of X contracted
    into ``source`` and the sinks outside X into ``sink``. Parallel edges are
    merged and loops dropped. ``source``/``sink`` are None when there is
    nothing to contract.
    """
    groups: Tuple[FrozenSet[int], ...]
    edges: Tuple[Tuple[int, int], ...]
    weights: np.ndarray
    source: Optional[int]
    sink: Optional[int]

    @property
    def n_nodes(self) -> int:
        return len(self.groups)

    def expand(self, contracted: Collection[int]) -> FrozenSet[int]:
        return frozenset().union(*(self.groups[c] for c in contracted))


def build_cut_graph(inst: Instance, x: Sequence[float], X: Collection[int]) -> WeightedCutGraph:
    g = inst.graph
    weights = inst.network.conductance * check_build_vector(g, x)
    members = frozenset(X)
    sources = sorted(members & inst.t_plus)
    sinks = sorted(inst.t_minus - members)
    groups: List[FrozenSet[int]] = []
    index = np.empty(g.n_nodes, dtype=int)
    source = sink = None
    if sources:
        source = len(groups)
        groups.append(frozenset(sources))
        index[sources] = source
    if sinks:
        sink = len(groups)
        groups.append(frozenset(sinks))
        index[sinks] = sink
    for v in range(g.n_nodes):
        if v not in members & inst.t_plus and v not in inst.t_minus - members:
            index[v] = len(groups)
            groups.append(frozenset([v]))

    merged: Dict[Tuple[int, int], float] = {}
    for a in range(g.n_arcs):
        u, w = index[g.tails[a]], index[g.heads[a]]
        if u != w:
            pair = (min(u, w), max(u, w))
            merged[pair] = merged.get(pair, 0.0) + float(weights[a])
    edges = tuple(sorted(merged))
    return WeightedCutGraph(tuple(groups), edges, np.array([merged[e] for e in edges]), source, sink)


def max_disjoint_cuts(g: WeightedCutGraph) -> float:
    """largest k admitting k disjoint nested cuts: the hop distance from source to sink"""
    if g.source is None or g.sink is None:
        return math.inf
    graph = nx.Graph()
    graph.add_nodes_from(range(g.n_nodes))
    graph.add_edges_from(g.edges)
    try:
        return nx.shortest_path_length(graph, g.source, g.sink)
    except nx.NetworkXNoPath:
        return math.inf


def k_cut_lp(g: WeightedCutGraph, k: int) -> LinearProgram:
    """
    Node-potential LP of the k nested disjoint cuts. Every edge {u, w} gets
    two auxiliary nodes and four arcs (u,v1) (w,v2) with the edge weight and
    (w,v1) (u,v2) with weight 0; each arc (y, z) carries 0 <= p_y - p_z <= 1.
    """
    n = g.n_nodes + 2 * len(g.edges)
    objective = np.zeros(n)
    rows = []

    def arc(y: int, z: int, weight: float):
        objective[y] += weight
        objective[z] -= weight
        row = np.zeros(n)
        row[y], row[z] = 1.0, -1.0
        rows.append((row, Relation.GE, 0.0))
        rows.append((row, Relation.LE, 1.0))

    for e, (u, w) in enumerate(g.edges):
        v1, v2 = g.n_nodes + 2 * e, g.n_nodes + 2 * e + 1
        arc(u, v1, g.weights[e])
        arc(w, v2, g.weights[e])
        arc(w, v1, 0.0)
        arc(u, v2, 0.0)
    terminal_row = np.zeros(n)
    terminal_row[g.source], terminal_row[g.sink] = 1.0, -1.0
    rows.append((terminal_row, Relation.EQ, float(k)))
    return LinearProgram.build(objective, rows, np.zeros(n), np.full(n, float(k)))


def solve_k_disjoint_cut(g: WeightedCutGraph, k: int) -> Optional[Tuple[Tuple[FrozenSet[int], ...], float]]:
    """
    Minimum weight chain S1 ⊆ … ⊆ Sk of cuts (in contracted nodes) with pairwise
    disjoint crossings, or None when no k disjoint cuts exist.
    """
    if k < 1:
        raise ValueError(f'k={k} must be at least 1')
    if g.source is None:
        return tuple(frozenset() for _ in range(k)), 0.0
    if g.sink is None:
        return tuple(frozenset(range(g.n_nodes)) for _ in range(k)), 0.0
    if max_disjoint_cuts(g) < k:
        return None
    solution = solve_lp(k_cut_lp(g, k))
    if not solution.optimal:
        return None
    p = solution.x[:g.n_nodes]
    rounded = np.round(p)
    if np.max(np.abs(p - rounded), initial=0.0) > INTEGRALITY_TOLERANCE:
        raise LpNumericalException(f'k-cut LP returned a fractional vertex (k={k})')
    levels = tuple(frozenset(np.flatnonzero(rounded >= k - i).tolist()) for i in range(k))
    value = float(sum(w * abs(rounded[u] - rounded[v]) for (u, v), w in zip(g.edges, g.weights)))
    return levels, value


@dataclass(frozen=True)
class SeparationCandidate:
    k: int
    X: FrozenSet[int]
    sigma: float
    g: float
    chain: CutChain = field(compare=False)


def _order(X: FrozenSet[int]) -> Tuple[int, ...]:
    return tuple(sorted(X))


class SeparationProblem:
    """σ_k and g_k evaluations for one (instance, x), cut graphs cached per X"""

    def __init__(self, inst: Instance, x: Sequence[float]):
        self.inst = inst
        self.x = check_build_vector(inst.graph, x)
        self._graphs: Dict[FrozenSet[int], WeightedCutGraph] = {}

    @property
    def terminals(self) -> List[int]:
        return sorted(self.inst.terminals)

    def subsets(self) -> List[FrozenSet[int]]:
        """every X ⊆ T, ordered by size then lexicographically"""
        terminals = self.terminals
        return [frozenset(c) for size in range(len(terminals) + 1) for c in combinations(terminals, size)]

    def demand_term(self, X: FrozenSet[int]) -> float:
        return balance_of_subset(self.inst, X) / self.inst.pi_bar ** (1.0 / self.inst.degree_r)

    def cut_graph(self, X: FrozenSet[int]) -> WeightedCutGraph:
        if X not in self._graphs:
            self._graphs[X] = build_cut_graph(self.inst, self.x, X)
        return self._graphs[X]

    def evaluate(self, X: Collection[int], k: int) -> Optional[SeparationCandidate]:
        members = frozenset(X)
        g = self.cut_graph(members)
        result = solve_k_disjoint_cut(g, k)
        if result is None:
            return None
        levels, value = result
        sigma = value / (k * k ** (1.0 / self.inst.degree_r))
        chain = CutChain(tuple(g.expand(level) for level in levels))
        return SeparationCandidate(k, members, sigma, sigma - self.demand_term(members), chain)


def _better(candidate: SeparationCandidate, best: Optional[SeparationCandidate]) -> bool:
    if best is None or candidate.g < best.g - 1e-12:
        return True
    if candidate.g > best.g + 1e-12:
        return False
    return (candidate.k, _order(candidate.X)) < (best.k, _order(best.X))


class SubsetMinimizer(abc.ABC):
    """minimizes g_k over the terminal subsets admitting k disjoint cuts"""

    @abc.abstractmethod
    def minimize(self, problem: SeparationProblem, k: int, log: Optional[List[SeparationCandidate]] = None) -> SeparationCandidate:
        """
        :return: a minimizer; X = ∅ with g = 0 is always a candidate
        """
        pass


class ExhaustiveSubsetMinimizer(SubsetMinimizer):
    """
    Tries every X ⊆ T with b(X) > 0 (g_k is non-negative elsewhere).
    A polynomial submodular minimization over the lattice would plug in here.
    """

    def __init__(self, executor: Optional[Executor] = None, max_terminals: int = MAX_EXHAUSTIVE_TERMINALS):
        self.executor = executor
        self.max_terminals = max_terminals

    def minimize(self, problem: SeparationProblem, k: int, log: Optional[List[SeparationCandidate]] = None) -> SeparationCandidate:
        if len(problem.terminals) > self.max_terminals:
            raise ProblemTooLargeException(f'{len(problem.terminals)} terminals exceed the exhaustive limit {self.max_terminals}')
        subsets = [X for X in problem.subsets() if problem.demand_term(X) > 0]
        evaluate = lambda X: problem.evaluate(X, k)
        results = list(self.executor.map(evaluate, subsets)) if self.executor else [evaluate(X) for X in subsets]
        best = problem.evaluate(frozenset(), k)
        for candidate in results:
            if candidate is None:
                continue
            if log is not None:
                log.append(candidate)
            if _better(candidate, best):
                best = candidate
        return best


@dataclass(frozen=True, eq=False)
class SeparationResult:
    violated: Optional[ValidInequality]
    best: Optional[SeparationCandidate]
    minima: Dict[int, SeparationCandidate]
    log: Tuple[SeparationCandidate, ...] = ()

    @property
    def certificate(self) -> Dict[int, float]:
        return {k: candidate.g for k, candidate in self.minima.items()}


def sigma_k(inst: Instance, x: Sequence[float], X: Collection[int], k: int) -> Optional[float]:
    """σ_k(X), or None when X admits no k disjoint cuts"""
    candidate = SeparationProblem(inst, x).evaluate(X, k)
    return None if candidate is None else candidate.sigma


def minimize_g_k(inst: Instance, x: Sequence[float], k: int, minimizer: Optional[SubsetMinimizer] = None) -> SeparationCandidate:
    if k < 1:
        raise ValueError(f'k={k} must be at least 1')
    return (minimizer or ExhaustiveSubsetMinimizer()).minimize(SeparationProblem(inst, x), k)


def k_range(inst: Instance, k_max: Optional[int] = None, fixed_k: Optional[int] = None) -> List[int]:
    if fixed_k is not None:
        return [fixed_k]
    cap = inst.graph.n_nodes - 1 if k_max is None else min(k_max, inst.graph.n_nodes - 1)
    return list(range(1, max(cap, 1) + 1))


def separate(inst: Instance, x: Sequence[float], k_max: Optional[int] = None, fixed_k: Optional[int] = None,
             tolerance: float = CUT_TOLERANCE, workers: int = 1,
             minimizer: Optional[SubsetMinimizer] = None) -> SeparationResult:
    """
    Most violated disjoint-cut inequality at ``x`` over k = 1 … min(|V|-1, k_max).
    Ties go to the smallest k, then the smallest X.
    """
    problem = SeparationProblem(inst, x)
    log: List[SeparationCandidate] = []
    minima: Dict[int, SeparationCandidate] = {}
    executor = ThreadPoolExecutor(max_workers=workers) if workers > 1 and minimizer is None else None
    try:
        strategy = minimizer or ExhaustiveSubsetMinimizer(executor)
        best = None
        for k in k_range(inst, k_max, fixed_k):
            candidate = strategy.minimize(problem, k, log)
            minima[k] = candidate
            if _better(candidate, best):
                best = candidate
    finally:
        if executor:
            executor.shutdown()

    violated = None
    if best is not None and best.g < -tolerance:
        violated = build_inequality(inst, best.X, best.chain)
        logger.debug(f'violated cut k={best.k} X={sorted(inst.graph.node_names[v] for v in best.X)} g={best.g:.6g}')
    return SeparationResult(violated, best, minima, tuple(log))


def candidate_sets(inst: Instance, X: Collection[int]) -> List[FrozenSet[int]]:
    """all (X∩T+, T-∖X)-cuts of the instance graph"""
    members = frozenset(X)
    sources, sinks = members & inst.t_plus, inst.t_minus - members
    free = [v for v in range(inst.graph.n_nodes) if v not in sources and v not in sinks]
    return [sources | frozenset(c) for size in range(len(free) + 1) for c in combinations(free, size)]


def enumerate_chains(inst: Instance, X: Collection[int], k: int) -> Iterator[CutChain]:
    """every nested chain of k cuts with pairwise disjoint crossings, by brute force"""
    if inst.graph.n_nodes > MAX_BRUTE_FORCE_NODES:
        raise ProblemTooLargeException(f'chain enumeration is limited to {MAX_BRUTE_FORCE_NODES} nodes')
    sets = candidate_sets(inst, X)
    crossings = {s: crossing_arcs(inst.graph, s) for s in sets}

    def extend(prefix: Tuple[FrozenSet[int], ...], used: FrozenSet[int]) -> Iterator[CutChain]:
        if len(prefix) == k:
            yield CutChain(prefix)
            return
        for s in sets:
            if prefix and not prefix[-1] <= s:
                continue
            if crossings[s] & used:
                continue
            yield from extend(prefix + (s,), used | crossings[s])

    yield from extend((), frozenset())


def brute_force_separate(inst: Instance, x: Sequence[float], k_max: Optional[int] = None) -> Optional[SeparationCandidate]:
    """minimum of g_k over every X ⊆ T, every k and every chain, by enumeration"""
    values = check_build_vector(inst.graph, x)
    weights = inst.network.conductance * values
    r = inst.degree_r
    problem = SeparationProblem(inst, values)
    best = None
    for k in k_range(inst, k_max):
        for X in problem.subsets():
            demand = problem.demand_term(X)
            for chain in enumerate_chains(inst, X, k):
                total = sum(weights[a] for crossing in chain.crossings(inst.graph) for a in crossing)
                sigma = total / (k * k ** (1.0 / r))
                candidate = SeparationCandidate(k, X, sigma, sigma - demand, chain)
                if _better(candidate, best):
                    best = candidate
    if best is not None and chain_violations(inst, best.X, best.chain):
        raise AssertionError('enumerated an invalid chain')
    return best
