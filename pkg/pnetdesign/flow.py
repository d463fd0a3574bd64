from dataclasses import dataclass
from typing import Collection, Dict, FrozenSet, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from pnetdesign.logger import logger
from pnetdesign.network import Arc, Instance, MultiGraph, Network, frozen_array, weak_components, subnetwork

FLOW_TOLERANCE = 1e-9
MAX_NEWTON_ITERATIONS = 200
JACOBIAN_REGULARIZATION = 1e-12
STALL_TOLERANCE = 1e-13
SPREAD_TOLERANCE = 1e-9


class UnbalancedDemandException(Exception): pass
class InvalidBuildVectorException(Exception): pass


class FlowSolverException(Exception):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f'{message} (residual={residual:.3e} after {iterations} iterations)')
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True, eq=False)
class FlowState:
    flow: np.ndarray
    potential: np.ndarray
    iterations: int = 0
    residual: float = 0.0

    @property
    def spread(self) -> float:
        return float(np.max(self.potential) - np.min(self.potential)) if len(self.potential) else 0.0


@dataclass(frozen=True, eq=False)
class FeasibilityReport:
    feasible: bool
    components: Tuple[FrozenSet[int], ...]
    spreads: Tuple[float, ...]
    states: Tuple[FlowState, ...]
    flow: np.ndarray
    potential: np.ndarray
    reason: Optional[str] = None

    @property
    def max_spread(self) -> float:
        return max(self.spreads, default=0.0)


def arc_flows(net: Network, potential: np.ndarray) -> np.ndarray:
    """flows implied by the potential law for the given node potentials"""
    delta = potential[net.graph.tails] - potential[net.graph.heads]
    return np.sign(delta) * net.conductance * np.abs(delta) ** (1.0 / net.degree_r)


def node_excess(g: MultiGraph, flow: np.ndarray) -> np.ndarray:
    """outflow minus inflow per node"""
    return (np.bincount(g.tails, weights=flow, minlength=g.n_nodes)
            - np.bincount(g.heads, weights=flow, minlength=g.n_nodes))


def potential_law_residual(net: Network, state: FlowState) -> float:
    delta = state.potential[net.graph.tails] - state.potential[net.graph.heads]
    expected = net.beta * np.sign(state.flow) * np.abs(state.flow) ** net.degree_r
    return float(np.max(np.abs(delta - expected), initial=0.0))


class _NewtonSystem:
    """
    Node equations of one connected component, node 0 pinned to zero potential.
    The residual is the gradient of a strictly convex energy, so a damped
    Newton step on the energy converges from any start.
    """
    def __init__(self, tails: np.ndarray, heads: np.ndarray, mu: np.ndarray, r: float, balance: np.ndarray):
        self.tails, self.heads, self.mu, self.r, self.balance = tails, heads, mu, r, balance
        self.n = len(balance)
        self.power = 1.0 + 1.0 / r

    def flows(self, pi: np.ndarray) -> np.ndarray:
        delta = pi[self.tails] - pi[self.heads]
        return np.sign(delta) * self.mu * np.abs(delta) ** (1.0 / self.r)

    def residual(self, pi: np.ndarray) -> np.ndarray:
        f = self.flows(pi)
        excess = np.bincount(self.tails, weights=f, minlength=self.n) - np.bincount(self.heads, weights=f, minlength=self.n)
        return excess - self.balance

    def energy(self, pi: np.ndarray) -> float:
        delta = np.abs(pi[self.tails] - pi[self.heads])
        return float(np.sum(self.mu * delta ** self.power) / self.power - self.balance @ pi)

    def laplacian(self, weights: np.ndarray) -> np.ndarray:
        matrix = np.zeros((self.n, self.n))
        np.add.at(matrix, (self.tails, self.tails), weights)
        np.add.at(matrix, (self.heads, self.heads), weights)
        np.add.at(matrix, (self.tails, self.heads), -weights)
        np.add.at(matrix, (self.heads, self.tails), -weights)
        return matrix[1:, 1:]

    def jacobian(self, pi: np.ndarray) -> np.ndarray:
        delta = np.maximum(np.abs(pi[self.tails] - pi[self.heads]), JACOBIAN_REGULARIZATION)
        return self.laplacian(self.mu / self.r * delta ** (1.0 / self.r - 1.0))

    def initial_guess(self) -> np.ndarray:
        pi = np.zeros(self.n)
        pi[1:] = _solve(self.laplacian(self.mu), self.balance[1:])
        # best multiple of the linear solution: the energy along the ray is a·λ^p − c·λ
        a = float(np.sum(self.mu * np.abs(pi[self.tails] - pi[self.heads]) ** self.power) / self.power)
        c = float(self.balance @ pi)
        if a <= 0 or c <= 0:
            return np.zeros(self.n)
        return pi * (c / (self.power * a)) ** self.r

    def solve(self, tolerance: float) -> Tuple[np.ndarray, int, float]:
        pi = self.initial_guess()
        residual = self.residual(pi)
        norm = float(np.max(np.abs(residual[1:]), initial=0.0))
        iteration = 0
        while norm > tolerance:
            if iteration >= MAX_NEWTON_ITERATIONS:
                raise FlowSolverException('newton iteration did not converge', norm, iteration)
            iteration += 1
            step = np.zeros(self.n)
            step[1:] = _solve(self.jacobian(pi), -residual[1:])
            slope = float(residual @ step)
            energy = self.energy(pi)
            t = 1.0
            while True:
                candidate = pi + t * step
                candidate_residual = self.residual(candidate)
                candidate_norm = float(np.max(np.abs(candidate_residual[1:]), initial=0.0))
                if self.energy(candidate) <= energy + 1e-4 * t * slope or candidate_norm < norm:
                    break
                t /= 2
                if t < 1e-12:
                    raise FlowSolverException('line search stalled', norm, iteration)
            moved = float(np.max(np.abs(candidate - pi), initial=0.0))
            pi, residual, norm = candidate, candidate_residual, candidate_norm
            if norm > tolerance and moved <= STALL_TOLERANCE * max(1.0, float(np.ptp(pi))):
                # arcs without flow left in the system: potentials no longer move
                logger.debug(f'newton stalled at residual {norm:.3e} after {iteration} iterations')
                break
        return pi, iteration, norm


def _solve(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    if not len(rhs):
        return np.zeros(0)
    try:
        return np.linalg.solve(matrix, rhs)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(matrix, rhs, rcond=None)[0]


def _zero_flow_regions(n: int, tails: np.ndarray, heads: np.ndarray, balance: np.ndarray) -> Dict[int, int]:
    """
    Nodes separated from every nonzero balance by a single node, mapped to
    that node. Such regions carry no flow and sit at the potential of their
    anchor, so they stay out of the Newton system.
    """
    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    graph.add_edges_from(zip(tails.tolist(), heads.tolist()))
    active = set(np.flatnonzero(balance != 0).tolist())
    dead = set()
    for cut_node in nx.articulation_points(graph):
        rest = graph.subgraph(set(graph) - {cut_node})
        for part in nx.connected_components(rest):
            if not part & active:
                dead |= part
    anchors: Dict[int, int] = {}
    for part in nx.connected_components(graph.subgraph(dead)):
        anchor = next(w for v in part for w in graph[v] if w not in dead)
        anchors.update(dict.fromkeys(part, anchor))
    return anchors


def _solve_component(tails: np.ndarray, heads: np.ndarray, mu: np.ndarray, r: float, balance: np.ndarray,
                     tolerance: float) -> Tuple[np.ndarray, np.ndarray, int, float]:
    """potentials and flows of one connected component given in local node indices"""
    n = len(balance)
    anchors = _zero_flow_regions(n, tails, heads, balance)
    live = np.array([v for v in range(n) if v not in anchors], dtype=int)
    index = np.full(n, -1)
    index[live] = np.arange(len(live))
    arcs = np.flatnonzero((index[tails] >= 0) & (index[heads] >= 0))
    system = _NewtonSystem(index[tails[arcs]], index[heads[arcs]], mu[arcs], r, balance[live])
    pi, iterations, residual = system.solve(tolerance)
    potential = np.zeros(n)
    potential[live] = pi
    for v, anchor in anchors.items():
        potential[v] = potential[anchor]
    flow = np.zeros(len(tails))
    flow[arcs] = system.flows(pi)
    if anchors:
        logger.debug(f'{len(anchors)} nodes without flow left out of the newton system')
    return potential, flow, iterations, residual


def solve_transshipment(net: Network, balance: Sequence[float]) -> FlowState:
    """
    Unique potential-based flow meeting ``balance``.

    Every weakly connected component is solved on its own and shifted so that
    its smallest potential is zero; each component must be balanced.
    """
    g = net.graph
    b = np.asarray(balance, dtype=float)
    if b.shape != (g.n_nodes,):
        raise UnbalancedDemandException(f'balance has {len(b)} entries for {g.n_nodes} nodes')
    scale = max(1.0, float(np.max(np.abs(b), initial=0.0)))
    potential = np.zeros(g.n_nodes)
    flow = np.zeros(g.n_arcs)
    iterations, worst = 0, 0.0
    for component in weak_components(g):
        nodes = np.array(sorted(component), dtype=int)
        total = float(np.sum(b[nodes]))
        if abs(total) > FLOW_TOLERANCE * scale:
            raise UnbalancedDemandException(
                f'balance of component {[g.node_names[v] for v in nodes]} sums to {total:g}')
        if np.all(b[nodes] == 0) or len(nodes) == 1:
            continue
        local = np.full(g.n_nodes, -1)
        local[nodes] = np.arange(len(nodes))
        arcs = np.flatnonzero(local[g.tails] >= 0)
        pi, arc_flow, n_iterations, residual = _solve_component(
            local[g.tails[arcs]], local[g.heads[arcs]], net.conductance[arcs], net.degree_r, b[nodes], FLOW_TOLERANCE * scale)
        potential[nodes] = pi - np.min(pi)
        flow[arcs] = arc_flow
        iterations, worst = max(iterations, n_iterations), max(worst, residual)
    logger.debug(f'transshipment solved on {g.n_nodes} nodes in {iterations} newton iterations (residual {worst:.2e})')
    return FlowState(frozen_array(flow), frozen_array(potential), iterations, worst)


def effective_resistance(net: Network, s: int, t: int) -> float:
    """potential difference needed to send one unit of flow from s to t"""
    net.graph.check_nodes((s, t))
    if s == t:
        raise ValueError('effective resistance needs two distinct nodes')
    b = np.zeros(net.graph.n_nodes)
    b[s], b[t] = 1.0, -1.0
    state = solve_transshipment(net, b)
    return float(state.potential[s] - state.potential[t])


def effective_conductance(net: Network, s: int, t: int) -> float:
    return effective_resistance(net, s, t) ** (-1.0 / net.degree_r)


def multipath_conductance(u: Sequence[float], r: float) -> float:
    """closed-form effective conductance of segments in series, segment i having conductance u[i]"""
    values = np.asarray(u, dtype=float)
    if not len(values):
        raise ValueError('multipath needs at least one segment')
    if np.any(values <= 0) or r <= 0:
        raise ValueError('segment conductances and degree must be positive')
    return float(np.sum(values ** (-r)) ** (-1.0 / r))


def check_build_vector(g: MultiGraph, x: Sequence[float]) -> np.ndarray:
    values = np.asarray(x, dtype=float)
    if values.shape != (g.n_arcs,):
        raise InvalidBuildVectorException(f'build vector has {values.size} entries for {g.n_arcs} arcs')
    if np.any(~np.isfinite(values)) or np.any(values < 0) or np.any(values > 1):
        raise InvalidBuildVectorException('build vector entries must lie in [0, 1]')
    return values


def _with_arcs(net: Network, positions: Sequence[int], beta: np.ndarray) -> Network:
    g = net.graph
    graph = MultiGraph(g.node_names, tuple(g.arcs[i] for i in positions), tuple(g.arc_names[i] for i in positions), g.node_ids)
    return Network(graph, frozen_array(beta), net.degree_r)


def induced_network(net: Network, x: Sequence[float]) -> Network:
    """N^x: arcs with x_a = 0 removed, resistance β_a / x_a on the others"""
    values = check_build_vector(net.graph, x)
    support = np.flatnonzero(values > 0)
    return _with_arcs(net, support, net.beta[support] / values[support])


def check_feasibility(inst: Instance, x: Sequence[float]) -> FeasibilityReport:
    g = inst.graph
    values = check_build_vector(g, x)
    induced = induced_network(inst.network, values)
    arc_position = {arc.id: position for position, arc in enumerate(g.arcs)}
    scale = max(1.0, float(np.max(np.abs(inst.balance), initial=0.0)))

    flow = np.zeros(g.n_arcs)
    potential = np.zeros(g.n_nodes)
    components = tuple(weak_components(induced.graph))
    spreads: List[float] = []
    states: List[FlowState] = []
    reason = None
    for component in components:
        nodes = sorted(component)
        b = inst.balance[nodes]
        total = float(np.sum(b))
        if len(nodes) == 1:
            if b[0] != 0:
                reason = reason or 'isolated terminal with nonzero balance'
            elif inst.has_individual_bounds:
                potential[nodes] = inst.pi_lower[nodes]
            continue
        if abs(total) > FLOW_TOLERANCE * scale:
            reason = reason or f'component {[g.node_names[v] for v in nodes]} has unbalanced demand {total:g}'
            continue
        sub = subnetwork(induced, nodes)
        state = solve_transshipment(sub, b)
        states.append(state)
        spreads.append(state.spread)
        for arc, value in zip(sub.graph.arcs, state.flow):
            flow[arc_position[arc.id]] = value
        potential[nodes] = state.potential
        if state.spread > inst.pi_bar * (1 + SPREAD_TOLERANCE):
            reason = reason or f'potential spread {state.spread:.6g} exceeds pi_bar {inst.pi_bar:.6g}'
        elif inst.has_individual_bounds:
            slack_low = inst.pi_lower[nodes] - state.potential
            slack_high = inst.pi_upper[nodes] - state.potential
            if np.max(slack_low) > np.min(slack_high) + SPREAD_TOLERANCE * inst.pi_bar:
                reason = reason or f'no shift of component {[g.node_names[v] for v in nodes]} meets the node bounds'
            else:
                potential[nodes] += float(np.max(slack_low))
    report = FeasibilityReport(reason is None, components, tuple(spreads), tuple(states),
                               frozen_array(flow), frozen_array(potential), reason)
    logger.debug(f'feasibility of {inst.name}: {report.feasible} (max spread {report.max_spread:.6g})')
    return report


def delete_arc(net: Network, a: int) -> Network:
    kept = [i for i in range(net.graph.n_arcs) if i != a]
    return _with_arcs(net, kept, net.beta[kept])


def scale_resistance(net: Network, a: int, factor: float) -> Network:
    if factor <= 0:
        raise ValueError('resistance factor must be positive')
    beta = np.array(net.beta)
    beta[a] *= factor
    return Network(net.graph, frozen_array(beta), net.degree_r)


def _rebuild(net: Network, nodes: Sequence[int], records: Sequence[Tuple[int, int, float, int, str]]) -> Network:
    """network on ``nodes`` from (tail, head, beta, id, name) records given in old node indices"""
    g = net.graph
    position = {v: i for i, v in enumerate(nodes)}
    graph = MultiGraph(
        tuple(g.node_names[v] for v in nodes),
        tuple(Arc(arc_id, position[u], position[v]) for u, v, _, arc_id, _ in records),
        tuple(name for *_, name in records),
        tuple(g.node_ids[v] for v in nodes),
    )
    return Network(graph, frozen_array([beta for _, _, beta, _, _ in records]), net.degree_r)


def _records(net: Network) -> List[Tuple[int, int, float, int, str]]:
    g = net.graph
    return [(a.tail, a.head, float(net.beta[i]), a.id, g.arc_names[i]) for i, a in enumerate(g.arcs)]


def contract_nodes(net: Network, u: int, v: int) -> Network:
    """merge v into u; arcs between them disappear"""
    net.graph.check_nodes((u, v))
    if u == v:
        return net
    moved = lambda w: u if w == v else w
    records = [(moved(t), moved(h), beta, arc_id, name) for t, h, beta, arc_id, name in _records(net)]
    return _rebuild(net, [w for w in range(net.graph.n_nodes) if w != v], [rec for rec in records if rec[0] != rec[1]])


def _merge_parallel(net: Network, records):
    groups: Dict[Tuple[int, int], List[int]] = {}
    for i, (t, h, *_) in enumerate(records):
        groups.setdefault((min(t, h), max(t, h)), []).append(i)
    r = net.degree_r
    merged = []
    for members in sorted(groups.values()):
        first = records[members[0]]
        if len(members) == 1:
            merged.append(first)
            continue
        conductance = sum(records[i][2] ** (-1.0 / r) for i in members)
        merged.append((first[0], first[1], conductance ** (-r), first[3], '+'.join(records[i][4] for i in members)))
    return merged


def merge_parallel_arcs(net: Network) -> Network:
    """parallel arcs (either orientation) replaced by one arc whose conductance is the sum"""
    return _rebuild(net, list(range(net.graph.n_nodes)), _merge_parallel(net, _records(net)))


def reduce_series_parallel(net: Network, terminals: Collection[int]) -> Network:
    """
    Two-terminal equivalent: parallel merges, series eliminations of degree-2
    non-terminals and removal of dangling non-terminals until nothing changes.
    """
    keep = net.graph.check_nodes(terminals)
    nodes = set(range(net.graph.n_nodes))
    records = _records(net)
    changed = True
    while changed:
        changed = False
        merged = _merge_parallel(net, records)
        if len(merged) != len(records):
            records, changed = merged, True
        incident: Dict[int, List[int]] = {v: [] for v in nodes}
        for i, (t, h, *_) in enumerate(records):
            incident[t].append(i)
            incident[h].append(i)
        for v in sorted(nodes - keep):
            arcs = incident[v]
            if len(arcs) == 0:
                nodes.discard(v)
                changed = True
                break
            if len(arcs) == 1:
                nodes.discard(v)
                records = [rec for i, rec in enumerate(records) if i != arcs[0]]
                changed = True
                break
            if len(arcs) == 2:
                first, second = records[arcs[0]], records[arcs[1]]
                w = first[0] if first[1] == v else first[1]
                z = second[1] if second[0] == v else second[0]
                if w == z:
                    continue
                series = (w, z, first[2] + second[2], first[3], f'{first[4]}*{second[4]}')
                records = [rec for i, rec in enumerate(records) if i not in arcs] + [series]
                nodes.discard(v)
                changed = True
                break
    return _rebuild(net, sorted(nodes), records)
