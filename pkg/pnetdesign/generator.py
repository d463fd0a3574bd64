"""
Seeded instance generators.

Pipes follow a synthetic model: resistance β = L / D^5 and cost
c = L·(α0 + α1·D²) for length L and diameter D, so larger options are
stronger and more expensive per unit length but cheaper per unit of
conductance.
"""
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

import numpy as np

from pnetdesign.flow import solve_transshipment
from pnetdesign.logger import logger
from pnetdesign.network import Instance, MultiGraph, Network, frozen_array, validate_instance

KINDS = ('multipath', 'random')
TIGHT_MARGIN = 1e-7


class InvalidGeneratorSpecException(Exception): pass


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str = 'multipath'
    segments: int = 8
    options: int = 3
    nodes: int = 6
    arcs: int = 9
    entries: int = 1
    exits: int = 1
    demand: float = 1.0
    pi_bar: Optional[float] = None
    pi_factor: float = 1.5
    degree_r: float = 2.0
    length_range: Tuple[float, float] = (0.5, 2.0)
    diameter_range: Tuple[float, float] = (0.4, 0.8)
    alpha0: float = 0.5
    alpha1: float = 2.0
    equal_lengths: bool = True
    seed: int = 0

    def check(self) -> None:
        problems = []
        if self.kind not in KINDS:
            problems.append(f'kind must be one of {KINDS}')
        if self.segments < 1 or self.options < 1:
            problems.append('segments and options must be at least 1')
        if self.kind == 'random':
            if self.nodes < 2:
                problems.append('random instances need at least 2 nodes')
            if self.arcs < self.nodes - 1:
                problems.append(f'{self.arcs} arcs cannot connect {self.nodes} nodes')
            if self.entries < 1 or self.exits < 1 or self.entries + self.exits > self.nodes:
                problems.append('need at least one entry and one exit, and no more terminals than nodes')
        if self.demand < 0 or self.degree_r <= 0 or self.pi_factor <= 0:
            problems.append('demand must be non-negative, degree_r and pi_factor positive')
        if self.pi_bar is not None and self.pi_bar <= 0:
            problems.append('pi_bar must be positive')
        if not 0 < self.length_range[0] <= self.length_range[1] or not 0 < self.diameter_range[0] <= self.diameter_range[1]:
            problems.append('length and diameter ranges must be positive and ordered')
        if problems:
            raise InvalidGeneratorSpecException('; '.join(problems))

    @property
    def diameters(self) -> np.ndarray:
        return np.linspace(self.diameter_range[0], self.diameter_range[1], self.options)


def pipe_beta(length: float, diameter: float) -> float:
    return length / diameter ** 5


def pipe_cost(length: float, diameter: float, spec: GeneratorSpec) -> float:
    return length * (spec.alpha0 + spec.alpha1 * diameter ** 2)


def _lengths(rng: np.random.Generator, spec: GeneratorSpec, count: int) -> np.ndarray:
    if spec.equal_lengths:
        return np.full(count, rng.uniform(*spec.length_range))
    return rng.uniform(spec.length_range[0], spec.length_range[1], count)


def generate_multipath(spec: GeneratorSpec) -> Instance:
    """
    Path v0 … vK where every segment offers ``options`` parallel pipes. The
    demand enters at v0 and leaves at vK. Without an explicit pi_bar the
    bound is the tight one: building the largest option everywhere is
    exactly feasible.
    """
    spec.check()
    rng = np.random.default_rng(spec.seed)
    lengths = _lengths(rng, spec, spec.segments)
    diameters = spec.diameters
    pairs, arc_names, beta, cost, attributes = [], [], [], [], []
    for i, length in enumerate(lengths):
        for j, diameter in enumerate(diameters):
            pairs.append((i, i + 1))
            arc_names.append(f'p{i}_{j}')
            beta.append(pipe_beta(length, diameter))
            cost.append(pipe_cost(length, diameter, spec))
            attributes.append({'diameter': float(diameter), 'length': float(length)})
    n = spec.segments + 1
    balance = np.zeros(n)
    balance[0], balance[-1] = spec.demand, -spec.demand

    pi_bar = spec.pi_bar
    if pi_bar is None:
        strongest = np.array(beta).reshape(spec.segments, spec.options).min(axis=1)
        pi_bar = float(spec.demand ** spec.degree_r * np.sum(strongest)) * (1 + TIGHT_MARGIN)
        if pi_bar <= 0:
            pi_bar = 1.0

    graph = MultiGraph.from_pairs(n, pairs, [f'v{i}' for i in range(n)], arc_names)
    inst = Instance(
        Network(graph, frozen_array(beta), spec.degree_r),
        frozenset([0]), frozenset([n - 1]),
        frozen_array(balance), pi_bar, frozen_array(cost),
        name=f'multipath-{spec.segments}x{spec.options}-s{spec.seed}',
        arc_attributes=tuple(attributes),
    )
    validate_instance(inst).raise_for_violations()
    logger.debug(f'generated {inst.name} with pi_bar={pi_bar:.6g}')
    return inst


def tight_pi_bar(spec: GeneratorSpec) -> float:
    """the pi_bar at which the largest option on every segment is exactly feasible"""
    return generate_multipath(replace(spec, kind='multipath', pi_bar=None)).pi_bar


def _split(rng: np.random.Generator, total: float, parts: int) -> np.ndarray:
    weights = rng.uniform(0.5, 1.5, parts)
    values = total * weights / weights.sum()
    values[-1] = total - values[:-1].sum()
    return values


def generate_random(spec: GeneratorSpec) -> Instance:
    """
    Random spanning tree plus extra arcs (parallel arcs allowed), random
    orientation, pipe sizes drawn from the options. Without an explicit
    pi_bar the bound is ``pi_factor`` times the spread with every arc built.
    """
    spec.check()
    rng = np.random.default_rng(spec.seed)
    order = rng.permutation(spec.nodes)
    pairs: List[Tuple[int, int]] = []
    for i in range(1, spec.nodes):
        pairs.append((int(order[i]), int(order[rng.integers(0, i)])))
    while len(pairs) < spec.arcs:
        u, v = rng.choice(spec.nodes, size=2, replace=False)
        pairs.append((int(u), int(v)))
    pairs = [(u, v) if rng.random() < 0.5 else (v, u) for u, v in pairs]

    lengths = _lengths(rng, spec, len(pairs))
    diameters = spec.diameters[rng.integers(0, spec.options, len(pairs))]
    beta = [pipe_beta(length, diameter) for length, diameter in zip(lengths, diameters)]
    cost = [pipe_cost(length, diameter, spec) for length, diameter in zip(lengths, diameters)]
    attributes = tuple({'diameter': float(d), 'length': float(l)} for d, l in zip(diameters, lengths))

    terminals = rng.permutation(spec.nodes)[:spec.entries + spec.exits]
    entries, exits = terminals[:spec.entries], terminals[spec.entries:]
    balance = np.zeros(spec.nodes)
    balance[entries] = _split(rng, spec.demand, spec.entries)
    balance[exits] = -_split(rng, spec.demand, spec.exits)

    graph = MultiGraph.from_pairs(spec.nodes, pairs, arc_names=[f'a{i}' for i in range(len(pairs))])
    network = Network(graph, frozen_array(beta), spec.degree_r)
    pi_bar = spec.pi_bar
    if pi_bar is None:
        spread = solve_transshipment(network, balance).spread
        pi_bar = spec.pi_factor * spread if spread > 0 else 1.0
    inst = Instance(
        network, frozenset(int(v) for v in entries), frozenset(int(v) for v in exits),
        frozen_array(balance), float(pi_bar), frozen_array(cost),
        name=f'random-{spec.nodes}n{spec.arcs}a-s{spec.seed}',
        arc_attributes=attributes,
    )
    validate_instance(inst).raise_for_violations()
    return inst


def generate(spec: GeneratorSpec) -> Instance:
    return generate_multipath(spec) if spec.kind == 'multipath' else generate_random(spec)
