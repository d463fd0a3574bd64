from dataclasses import dataclass, field
from functools import cached_property
from typing import Collection, Dict, FrozenSet, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

BALANCE_TOLERANCE = 1e-9


class InvalidInstanceException(Exception):
    def __init__(self, violations: List[str]):
        super().__init__('; '.join(violations))
        self.violations = violations


class UnknownNodeException(Exception): pass
class NonTerminalException(Exception): pass


def frozen_array(values: Iterable[float]) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


class Arc(NamedTuple):
    id: int
    tail: int
    head: int


@dataclass(frozen=True, eq=False)
class MultiGraph:
    """
    Directed multigraph on dense node indices 0..n-1.

    Arcs are addressed by position; ``Arc.id`` and ``node_ids`` keep the ids of
    the graph this one was derived from (identical to positions for root graphs).
    """
    node_names: Tuple[str, ...]
    arcs: Tuple[Arc, ...]
    arc_names: Tuple[str, ...]
    node_ids: Tuple[int, ...] = ()

    def __post_init__(self):
        if not self.node_ids:
            object.__setattr__(self, 'node_ids', tuple(range(len(self.node_names))))

    @staticmethod
    def from_pairs(n_nodes: int, pairs: Sequence[Tuple[int, int]], node_names: Optional[Sequence[str]] = None,
                   arc_names: Optional[Sequence[str]] = None) -> 'MultiGraph':
        return MultiGraph(
            tuple(node_names) if node_names is not None else tuple(f'v{i}' for i in range(n_nodes)),
            tuple(Arc(i, int(u), int(v)) for i, (u, v) in enumerate(pairs)),
            tuple(arc_names) if arc_names is not None else tuple(f'a{i}' for i in range(len(pairs))),
        )

    @property
    def n_nodes(self) -> int:
        return len(self.node_names)

    @property
    def n_arcs(self) -> int:
        return len(self.arcs)

    @cached_property
    def tails(self) -> np.ndarray:
        return np.array([a.tail for a in self.arcs], dtype=int)

    @cached_property
    def heads(self) -> np.ndarray:
        return np.array([a.head for a in self.arcs], dtype=int)

    @cached_property
    def _node_lookup(self) -> Dict[str, int]:
        return {name: i for i, name in enumerate(self.node_names)}

    @cached_property
    def _arc_lookup(self) -> Dict[str, int]:
        return {name: i for i, name in enumerate(self.arc_names)}

    def node_index(self, name: str) -> int:
        try:
            return self._node_lookup[name]
        except KeyError:
            raise UnknownNodeException(f'unknown node {name!r}')

    def arc_index(self, name: str) -> int:
        try:
            return self._arc_lookup[name]
        except KeyError:
            raise UnknownNodeException(f'unknown arc {name!r}')

    def check_nodes(self, nodes: Iterable[int]) -> FrozenSet[int]:
        members = frozenset(nodes)
        unknown = [v for v in members if not (isinstance(v, (int, np.integer)) and 0 <= v < self.n_nodes)]
        if unknown:
            raise UnknownNodeException(f'unknown node ids {sorted(map(str, unknown))}')
        return members

    def undirected(self) -> nx.MultiGraph:
        graph = nx.MultiGraph()
        graph.add_nodes_from(range(self.n_nodes))
        graph.add_edges_from((a.tail, a.head, position) for position, a in enumerate(self.arcs))
        return graph


@dataclass(frozen=True, eq=False)
class Network:
    graph: MultiGraph
    beta: np.ndarray
    degree_r: float

    @cached_property
    def conductance(self) -> np.ndarray:
        return frozen_array(self.beta ** (-1.0 / self.degree_r))


@dataclass(frozen=True, eq=False)
class Instance:
    network: Network
    t_plus: FrozenSet[int]
    t_minus: FrozenSet[int]
    balance: np.ndarray
    pi_bar: float
    cost: np.ndarray
    name: str = 'instance'
    pi_lower: Optional[np.ndarray] = None
    pi_upper: Optional[np.ndarray] = None
    arc_attributes: Tuple[Mapping[str, float], ...] = field(default=())

    @property
    def graph(self) -> MultiGraph:
        return self.network.graph

    @property
    def degree_r(self) -> float:
        return self.network.degree_r

    @property
    def terminals(self) -> FrozenSet[int]:
        return self.t_plus | self.t_minus

    @property
    def has_individual_bounds(self) -> bool:
        return self.pi_lower is not None and self.pi_upper is not None

    @property
    def is_two_terminal(self) -> bool:
        """single entry and single exit carry all the demand"""
        if len(self.t_plus) != 1 or len(self.t_minus) != 1:
            return False
        others = [v for v in range(self.graph.n_nodes) if v not in self.terminals]
        return bool(np.all(np.abs(self.balance[others]) <= BALANCE_TOLERANCE))


@dataclass(frozen=True)
class ValidationReport:
    violations: Tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def raise_for_violations(self) -> None:
        if self.violations:
            raise InvalidInstanceException(list(self.violations))


def derived_pi_bar(pi_lower: np.ndarray, pi_upper: np.ndarray) -> float:
    return float(np.max(pi_upper) - np.min(pi_lower))


def weak_components(g: MultiGraph) -> List[FrozenSet[int]]:
    return sorted((frozenset(c) for c in nx.connected_components(g.undirected())), key=min)


def validate_graph(g: MultiGraph, require_connected: bool = True) -> List[str]:
    violations = []
    if g.n_nodes == 0:
        violations.append('graph has no nodes')
        return violations
    if len(set(g.node_names)) != g.n_nodes:
        violations.append('duplicate node ids')
    if len(set(g.arc_names)) != g.n_arcs:
        violations.append('duplicate arc ids')
    for position, arc in enumerate(g.arcs):
        if not (0 <= arc.tail < g.n_nodes and 0 <= arc.head < g.n_nodes):
            violations.append(f'arc {g.arc_names[position]} has an endpoint out of range')
        elif arc.tail == arc.head:
            violations.append(f'loop arc {g.arc_names[position]} at node {g.node_names[arc.tail]}')
    if require_connected and not violations and len(weak_components(g)) > 1:
        violations.append('graph is not weakly connected')
    return violations


def validate_instance(inst: Instance, require_connected: bool = True) -> ValidationReport:
    g = inst.graph
    violations = validate_graph(g, require_connected)
    if inst.network.beta.shape != (g.n_arcs,) or np.any(~(inst.network.beta > 0)) or np.any(~np.isfinite(inst.network.beta)):
        violations.append('resistances must be positive and finite')
    if not inst.network.degree_r > 0:
        violations.append(f'degree r={inst.network.degree_r} must be positive')
    if inst.cost.shape != (g.n_arcs,) or np.any(~(inst.cost > 0)):
        violations.append('arc costs must be positive')
    if not inst.pi_bar > 0:
        violations.append(f'pi_bar={inst.pi_bar} must be positive')
    if inst.t_plus & inst.t_minus:
        violations.append('entries and exits overlap')
    if not (inst.t_plus | inst.t_minus) <= set(range(g.n_nodes)):
        violations.append('terminal out of range')
        return ValidationReport(tuple(violations))
    if inst.balance.shape != (g.n_nodes,):
        violations.append('balance vector has wrong length')
        return ValidationReport(tuple(violations))
    total = float(np.sum(inst.balance))
    if abs(total) > BALANCE_TOLERANCE * max(1.0, float(np.sum(np.abs(inst.balance)))):
        violations.append(f'balance sums to {total:g} ≠ 0')
    for v in range(g.n_nodes):
        b_v = inst.balance[v]
        if v in inst.t_plus and b_v < 0:
            violations.append(f'entry {g.node_names[v]} has negative balance {b_v:g}')
        elif v in inst.t_minus and b_v > 0:
            violations.append(f'exit {g.node_names[v]} has positive balance {b_v:g}')
        elif v not in inst.terminals and b_v != 0:
            violations.append(f'non-terminal {g.node_names[v]} has balance {b_v:g}')
    if inst.has_individual_bounds and np.any(inst.pi_lower > inst.pi_upper):
        violations.append('individual potential bounds with lower > upper')
    return ValidationReport(tuple(violations))


def crossing_arcs(g: MultiGraph, S: Collection[int]) -> FrozenSet[int]:
    members = g.check_nodes(S)
    inside = np.zeros(g.n_nodes, dtype=bool)
    inside[list(members)] = True
    return frozenset(np.flatnonzero(inside[g.tails] != inside[g.heads]).tolist())


def cut_value(g: MultiGraph, S: Collection[int], weights: np.ndarray) -> float:
    return float(sum(weights[a] for a in crossing_arcs(g, S)))


def balance_of_subset(inst: Instance, X: Collection[int]) -> float:
    members = inst.graph.check_nodes(X)
    outsiders = members - inst.terminals
    if outsiders:
        raise NonTerminalException(f'nodes {sorted(inst.graph.node_names[v] for v in outsiders)} are not terminals')
    return float(sum(inst.balance[v] for v in members))


def subnetwork(net: Network, nodes: Collection[int]) -> Network:
    """network induced on ``nodes``; arcs with an endpoint outside are dropped"""
    g = net.graph
    kept = sorted(nodes)
    position = {v: i for i, v in enumerate(kept)}
    arc_positions = [i for i, a in enumerate(g.arcs) if a.tail in position and a.head in position]
    sub = MultiGraph(
        tuple(g.node_names[v] for v in kept),
        tuple(Arc(g.arcs[i].id, position[g.arcs[i].tail], position[g.arcs[i].head]) for i in arc_positions),
        tuple(g.arc_names[i] for i in arc_positions),
        tuple(g.node_ids[v] for v in kept),
    )
    return Network(sub, frozen_array(net.beta[arc_positions]), net.degree_r)
