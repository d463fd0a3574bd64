import math

import numpy as np
import pytest

from pnetdesign.inequality import CutChain, check_chain, evaluate_violation
from pnetdesign.separation import ProblemTooLargeException, SeparationCandidate, SeparationProblem, _better, \
    brute_force_separate, build_cut_graph, enumerate_chains, k_range, max_disjoint_cuts, minimize_g_k, separate, \
    sigma_k, solve_k_disjoint_cut
from test.test_utils import TERMINAL_MIXES, make_instance, path_instance, random_instance, two_entry_instance, \
    two_segment_instance


def test_cut_graph_contracts_terminals():
    inst = two_entry_instance()
    g = build_cut_graph(inst, np.ones(3), {0, 1})
    assert g.groups[g.source] == {0, 1}
    assert g.groups[g.sink] == {3}
    assert g.n_nodes == 3
    assert sorted(g.weights.tolist()) == [1.0, 1.0, 1.0]


def test_cut_graph_merges_parallel_arcs():
    inst = two_segment_instance(1.0)
    g = build_cut_graph(inst, [1, 1, 0, 1, 0.25], {0})
    assert len(g.edges) == 2
    assert sorted(g.weights.tolist()) == pytest.approx([1.25, 2.0])


def test_max_disjoint_cuts():
    inst = path_instance(3)
    assert max_disjoint_cuts(build_cut_graph(inst, np.zeros(3), {0})) == 3
    assert max_disjoint_cuts(build_cut_graph(inst, np.zeros(3), set())) == math.inf


def test_k_disjoint_cut_on_path():
    inst = path_instance(3)
    g = build_cut_graph(inst, np.ones(3), {0})
    levels, value = solve_k_disjoint_cut(g, 3)
    assert value == 3
    chain = CutChain(tuple(g.expand(level) for level in levels))
    assert chain == CutChain.of({0}, {0, 1}, {0, 1, 2})
    assert solve_k_disjoint_cut(g, 4) is None


def test_k_disjoint_cut_with_direct_arc():
    inst = make_instance(['s', 'v', 't'], [('s', 'v'), ('v', 't'), ('s', 't')], [1, 0, -1])
    g = build_cut_graph(inst, np.ones(3), {0})
    assert solve_k_disjoint_cut(g, 2) is None
    levels, value = solve_k_disjoint_cut(g, 1)
    assert value == 2


def test_k_disjoint_cut_rejects_k_below_one():
    g = build_cut_graph(path_instance(2), np.ones(2), {0})
    with pytest.raises(ValueError):
        solve_k_disjoint_cut(g, 0)


def test_two_entry_sigma_values():
    inst = two_entry_instance()
    x = np.ones(3)
    s1, s2 = 0, 1
    assert sigma_k(inst, x, {s1}, 2) == pytest.approx(2 ** -0.5)
    assert sigma_k(inst, x, {s1}, 1) == pytest.approx(1)
    assert sigma_k(inst, x, {s2}, 1) == pytest.approx(1)
    assert sigma_k(inst, x, {s2}, 2) is None
    assert sigma_k(inst, x, {s1, s2}, 1) == pytest.approx(2)
    assert sigma_k(inst, x, {s1, s2}, 2) is None
    assert sigma_k(inst, x, set(), 2) == 0


def test_two_entry_sigma_is_not_submodular():
    inst = two_entry_instance()
    x = np.ones(3)

    def sigma(X):
        return min(value for value in (sigma_k(inst, x, X, k) for k in k_range(inst)) if value is not None)

    assert sigma({0}) + sigma({1}) < sigma({0, 1}) + sigma(set())


def test_two_entry_chain():
    inst = two_entry_instance()
    candidate = SeparationProblem(inst, np.ones(3)).evaluate({0}, 2)
    assert candidate.chain == CutChain.of({0}, {0, 2})
    assert candidate.sigma == pytest.approx(2 ** -0.5)
    assert candidate.g == pytest.approx(2 ** -0.5 - 1 / np.sqrt(10))


def test_sigma_k_is_submodular():
    rng = np.random.default_rng(3)
    for seed in range(4):
        inst = random_instance(seed, nodes=6, arcs=9, entries=2, exits=2)
        x = rng.random(inst.graph.n_arcs)
        terminals = sorted(inst.terminals)
        subsets = [frozenset(v for i, v in enumerate(terminals) if mask >> i & 1) for mask in range(16)]
        for k in (1, 2):
            values = {X: sigma_k(inst, x, X, k) for X in subsets}
            for X in subsets:
                for Y in subsets:
                    if values[X] is None or values[Y] is None:
                        continue
                    assert values[X | Y] is not None and values[X & Y] is not None
                    assert values[X] + values[Y] >= values[X | Y] + values[X & Y] - 1e-9


def test_minimize_two_segments():
    inst = two_segment_instance(1.8)
    candidate = minimize_g_k(inst, np.ones(5), 2)
    assert candidate.X == {0}
    assert candidate.g == pytest.approx(5 / (2 * np.sqrt(2)) - 1.8)
    with pytest.raises(ValueError):
        minimize_g_k(inst, np.ones(5), 0)


def test_separate_finds_violation():
    inst = two_segment_instance(1.8)
    result = separate(inst, np.ones(5))
    assert result.violated is not None
    assert result.best.k == 2
    assert result.best.X == {0}
    assert evaluate_violation(result.violated, np.ones(5)) == pytest.approx(result.best.g)
    assert result.certificate[1] == 0
    assert [c.g for c in result.log if c.k == 1] == pytest.approx([0.2])
    assert check_chain(inst, result.best.X, result.best.chain)


def test_separate_feasible_point():
    inst = two_segment_instance(1.6)
    result = separate(inst, np.ones(5))
    assert result.violated is None
    assert min(result.certificate.values()) >= -1e-6


def test_separate_fixed_k():
    inst = two_segment_instance(1.8)
    result = separate(inst, np.ones(5), fixed_k=1)
    assert result.violated is None
    assert list(result.minima) == [1]


def test_separate_with_workers():
    inst = random_instance(2, nodes=6, arcs=9, entries=2, exits=2)
    x = np.full(inst.graph.n_arcs, 0.3)
    serial = separate(inst, x)
    threaded = separate(inst, x, workers=4)
    assert threaded.best.g == pytest.approx(serial.best.g, abs=1e-9)
    assert threaded.best.X == serial.best.X
    assert threaded.best.k == serial.best.k


@pytest.mark.timeout(300)
@pytest.mark.parametrize('r', [1.0, 2.0])
def test_separation_matches_enumeration(r):
    rng = np.random.default_rng(5)
    for seed in range(20):
        entries, exits = TERMINAL_MIXES[seed % 4]
        inst = random_instance(seed, nodes=5, arcs=6, entries=entries, exits=exits, r=r)
        for _ in range(3):
            x = np.round(rng.random(inst.graph.n_arcs), 2)
            fast = separate(inst, x)
            slow = brute_force_separate(inst, x)
            assert fast.best.g == pytest.approx(slow.g, abs=1e-7)
            assert (fast.violated is not None) == (slow.g < -1e-6)


def test_enumeration_is_limited():
    inst = path_instance(9)
    with pytest.raises(ProblemTooLargeException):
        list(enumerate_chains(inst, {0}, 1))


def test_ties_go_to_smallest_k_then_lexicographic_set():
    chain = CutChain.of({0})
    pair = SeparationCandidate(1, frozenset({0, 1}), 1.0, -0.5, chain)
    single = SeparationCandidate(1, frozenset({2}), 1.0, -0.5, chain)
    assert _better(pair, single)
    assert not _better(single, pair)
    assert _better(SeparationCandidate(2, frozenset({2}), 1.0, -0.5, chain),
                   SeparationCandidate(3, frozenset({0}), 1.0, -0.5, chain))
    assert _better(SeparationCandidate(3, frozenset({2}), 1.0, -0.6, chain), pair)
