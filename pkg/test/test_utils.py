from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from pnetdesign.generator import GeneratorSpec, generate_random
from pnetdesign.network import Instance, MultiGraph, Network, frozen_array


def make_instance(node_names: Sequence[str], arcs: Sequence[Tuple[str, str]], balance: Sequence[float],
                  beta: Optional[Sequence[float]] = None, cost: Optional[Sequence[float]] = None,
                  pi_bar: float = 1.0, r: float = 2.0, entries: Iterable[str] = (), exits: Iterable[str] = (),
                  name: str = 'test', pi_lower=None, pi_upper=None) -> Instance:
    """
    Entries and exits default to the nodes with positive and negative balance.
    """
    index = {node: i for i, node in enumerate(node_names)}
    pairs = [(index[u], index[v]) for u, v in arcs]
    graph = MultiGraph.from_pairs(len(node_names), pairs, node_names)
    b = np.asarray(balance, dtype=float)
    t_plus = {index[v] for v in entries} or {i for i, value in enumerate(b) if value > 0}
    t_minus = {index[v] for v in exits} or {i for i, value in enumerate(b) if value < 0}
    return Instance(
        Network(graph, frozen_array(beta if beta is not None else np.ones(len(arcs))), r),
        frozenset(t_plus), frozenset(t_minus), frozen_array(b), pi_bar,
        frozen_array(cost if cost is not None else np.ones(len(arcs))),
        name=name,
        pi_lower=None if pi_lower is None else frozen_array(pi_lower),
        pi_upper=None if pi_upper is None else frozen_array(pi_upper),
    )


def two_segment_instance(demand: float, pi_bar: float = 1.0) -> Instance:
    """three unit arcs s-v followed by two unit arcs v-t, r = 2"""
    return make_instance(['s', 'v', 't'], [('s', 'v')] * 3 + [('v', 't')] * 2, [demand, 0, -demand],
                         pi_bar=pi_bar, name='two-segment')


def two_entry_instance(r: float = 2.0) -> Instance:
    """arcs s1-v, v-t, s2-t with unit weights"""
    return make_instance(['s1', 's2', 'v', 't'], [('s1', 'v'), ('v', 't'), ('s2', 't')], [1, 1, 0, -2], r=r,
                         pi_bar=10.0, name='two-entry')


def path_instance(length: int, demand: float = 1.0, pi_bar: float = 10.0, r: float = 2.0) -> Instance:
    names = ['s'] + [f'v{i}' for i in range(1, length)] + ['t']
    arcs = list(zip(names[:-1], names[1:]))
    return make_instance(names, arcs, [demand] + [0] * (length - 1) + [-demand], pi_bar=pi_bar, r=r, name=f'path{length}')


# (entries, exits) cycled through by the random sweeps
TERMINAL_MIXES = ((1, 1), (2, 1), (1, 2), (2, 2))


def random_instance(seed: int, nodes: int = 5, arcs: int = 7, entries: int = 1, exits: int = 1,
                    r: float = 2.0, pi_factor: float = 1.5) -> Instance:
    return generate_random(GeneratorSpec(kind='random', nodes=nodes, arcs=arcs, entries=entries, exits=exits,
                                         degree_r=r, pi_factor=pi_factor, equal_lengths=False, seed=seed))


def binary_points(n: int) -> np.ndarray:
    return ((np.arange(2 ** n)[:, None] >> np.arange(n)) & 1).astype(float)
