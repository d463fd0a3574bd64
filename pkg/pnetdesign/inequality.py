import threading
from dataclasses import dataclass
from typing import Collection, FrozenSet, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from pnetdesign.network import Instance, MultiGraph, UnknownNodeException, balance_of_subset, crossing_arcs, frozen_array

CUT_TOLERANCE = 1e-6
KEY_DIGITS = 12


class InvalidCutChainException(Exception): pass
class InequalityFormatException(Exception): pass


@dataclass(frozen=True)
class CutChain:
    sets: Tuple[FrozenSet[int], ...]

    @staticmethod
    def of(*sets: Collection[int]) -> 'CutChain':
        return CutChain(tuple(frozenset(s) for s in sets))

    @property
    def k(self) -> int:
        return len(self.sets)

    def crossings(self, g: MultiGraph) -> Tuple[FrozenSet[int], ...]:
        return tuple(crossing_arcs(g, s) for s in self.sets)


def chain_violations(inst: Instance, X: Collection[int], chain: CutChain) -> List[str]:
    g = inst.graph
    members = frozenset(X)
    sources, sinks = members & inst.t_plus, inst.t_minus - members
    violations = []
    if chain.k < 1:
        violations.append('empty chain')
    for i, s in enumerate(chain.sets):
        if not s <= set(range(g.n_nodes)):
            violations.append(f'level {i + 1} has unknown nodes')
            return violations
        if not sources <= s:
            violations.append(f'level {i + 1} misses a source of X')
        if s & sinks:
            violations.append(f'level {i + 1} contains a sink outside X')
    for i in range(1, chain.k):
        if not chain.sets[i - 1] <= chain.sets[i]:
            violations.append(f'levels {i} and {i + 1} are not nested')
    crossings = chain.crossings(g)
    for i in range(chain.k):
        for j in range(i + 1, chain.k):
            if crossings[i] & crossings[j]:
                violations.append(f'levels {i + 1} and {j + 1} share crossing arcs')
    return violations


def check_chain(inst: Instance, X: Collection[int], chain: CutChain) -> bool:
    """true iff ``chain`` is a nested chain of (X∩T+, T-∖X)-cuts with pairwise disjoint crossings"""
    return not chain_violations(inst, X, chain)


@dataclass(frozen=True, eq=False)
class ValidInequality:
    """
    coefficients·x >= rhs over the build variables. ``chain`` is None for
    inequalities read back from a cut-pool file.
    """
    coefficients: np.ndarray
    rhs: float
    X: FrozenSet[int]
    k: int
    degree_r: float
    chain: Optional[CutChain] = None

    kind = 'disjoint-cut'

    @property
    def support(self) -> Tuple[int, ...]:
        return tuple(np.flatnonzero(self.coefficients).tolist())

    @property
    def key(self) -> tuple:
        return self.kind, self.k, self.support, round(self.rhs, KEY_DIGITS)


@dataclass(frozen=True, eq=False)
class NoGoodCut:
    """
    Excludes a binary point. The exact form cuts off that point only; the
    support form cuts off every subset of its support and is only valid when
    removing arcs never restores feasibility.
    """
    coefficients: np.ndarray
    rhs: float
    point: Tuple[int, ...]
    support_only: bool = False

    kind = 'nogood'
    k = 0
    X: FrozenSet[int] = frozenset()

    @staticmethod
    def excluding(point: Sequence[float], support_only: bool = False) -> 'NoGoodCut':
        binary = np.round(np.asarray(point, dtype=float)).astype(int)
        if support_only:
            coefficients, rhs = (binary == 0).astype(float), 1.0
        else:
            coefficients, rhs = np.where(binary == 0, 1.0, -1.0), 1.0 - float(np.sum(binary))
        return NoGoodCut(frozen_array(coefficients), rhs, tuple(binary.tolist()), support_only)

    @property
    def key(self) -> tuple:
        return self.kind, tuple(self.coefficients.tolist()), self.rhs


Cut = Union[ValidInequality, NoGoodCut]


def build_inequality(inst: Instance, X: Collection[int], chain: CutChain) -> ValidInequality:
    violations = chain_violations(inst, X, chain)
    if violations:
        raise InvalidCutChainException('; '.join(violations))
    r = inst.degree_r
    k = chain.k
    factor = 1.0 / (k * k ** (1.0 / r))
    coefficients = np.zeros(inst.graph.n_arcs)
    for crossing in chain.crossings(inst.graph):
        arcs = sorted(crossing)
        coefficients[arcs] = inst.network.conductance[arcs] * factor
    rhs = balance_of_subset(inst, X) / inst.pi_bar ** (1.0 / r)
    return ValidInequality(frozen_array(coefficients), rhs, frozenset(X), k, r, chain)


def evaluate_violation(cut: Cut, x: Sequence[float]) -> float:
    """lhs − rhs; negative means violated"""
    return float(cut.coefficients @ np.asarray(x, dtype=float) - cut.rhs)


def evaluate_nonlinear_violation(ineq: ValidInequality, x: Sequence[float]) -> float:
    """slack of the strengthened form with x_a^(1/r) in place of x_a"""
    values = np.asarray(x, dtype=float)
    return float(ineq.coefficients @ values ** (1.0 / ineq.degree_r) - ineq.rhs)


def format_inequality(cut: Cut, g: MultiGraph) -> str:
    """'k; X; rhs; arc:coef ...' with k = 0 for no-good cuts"""
    nodes = ','.join(g.node_names[v] for v in sorted(cut.X))
    terms = ' '.join(f'{g.arc_names[a]}:{cut.coefficients[a]!r}' for a in np.flatnonzero(cut.coefficients))
    return f'{cut.k}; {nodes}; {cut.rhs!r}; {terms}'


def parse_inequality(line: str, inst: Instance) -> Cut:
    g = inst.graph
    fields = [field.strip() for field in line.split(';')]
    if len(fields) != 4:
        raise InequalityFormatException(f'expected 4 fields separated by ";", got {len(fields)}: {line!r}')
    try:
        k = int(fields[0])
        rhs = float(fields[2])
        X = frozenset(g.node_index(name) for name in fields[1].split(',') if name)
        coefficients = np.zeros(g.n_arcs)
        for term in fields[3].split():
            name, _, value = term.rpartition(':')
            coefficients[g.arc_index(name)] = float(value)
    except (ValueError, UnknownNodeException) as error:
        raise InequalityFormatException(f'{error} in {line!r}')
    if k < 0:
        raise InequalityFormatException(f'negative k in {line!r}')
    if k == 0:
        point = tuple(0 if c > 0 else 1 for c in coefficients)
        return NoGoodCut(frozen_array(coefficients), rhs, point, bool(np.all(coefficients >= 0)) and rhs == 1.0)
    return ValidInequality(frozen_array(coefficients), rhs, X, k, inst.degree_r)


class CutPool:
    """insertion-ordered cuts, exact duplicates dropped"""

    def __init__(self, cuts: Sequence[Cut] = ()):
        self._cuts: List[Cut] = []
        self._keys = set()
        self._lock = threading.Lock()
        for cut in cuts:
            self.add(cut)

    def add(self, cut: Cut) -> bool:
        with self._lock:
            if cut.key in self._keys:
                return False
            self._keys.add(cut.key)
            self._cuts.append(cut)
            return True

    def __len__(self) -> int:
        return len(self._cuts)

    def __iter__(self) -> Iterator[Cut]:
        return iter(list(self._cuts))

    def count(self, kind: str) -> int:
        return sum(1 for cut in self._cuts if cut.kind == kind)

    def violated_by(self, x: Sequence[float], tolerance: float = CUT_TOLERANCE) -> List[Cut]:
        return [cut for cut in self._cuts if evaluate_violation(cut, x) < -tolerance]

    def rows(self, n_arcs: int) -> Tuple[np.ndarray, np.ndarray]:
        if not self._cuts:
            return np.zeros((0, n_arcs)), np.zeros(0)
        return np.vstack([cut.coefficients for cut in self._cuts]), np.array([cut.rhs for cut in self._cuts])

    def lines(self, g: MultiGraph) -> List[str]:
        return [format_inequality(cut, g) for cut in self._cuts]
