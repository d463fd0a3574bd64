import numpy as np
import pytest

from pnetdesign.flow import check_feasibility
from pnetdesign.inequality import CutChain, CutPool, InequalityFormatException, InvalidCutChainException, NoGoodCut, \
    build_inequality, check_chain, evaluate_nonlinear_violation, evaluate_violation, format_inequality, parse_inequality
from pnetdesign.separation import enumerate_chains, k_range
from test.test_utils import TERMINAL_MIXES, binary_points, make_instance, path_instance, random_instance, \
    two_segment_instance


def test_check_chain_path():
    inst = path_instance(3)
    assert check_chain(inst, {0}, CutChain.of({0}, {0, 1}, {0, 1, 2}))
    assert check_chain(inst, {0}, CutChain.of({0}, {0, 1, 2}))


def test_check_chain_shared_crossing():
    inst = make_instance(['s', 'v1', 'v2', 't'], [('s', 'v1'), ('v1', 'v2'), ('v2', 't'), ('s', 't')], [1, 0, 0, -1])
    assert not check_chain(inst, {0}, CutChain.of({0}, {0, 1}))


def test_check_chain_not_nested():
    inst = path_instance(3)
    assert not check_chain(inst, {0}, CutChain.of({0, 1}, {0, 2}))


def test_check_chain_must_separate():
    inst = path_instance(3)
    assert not check_chain(inst, {0}, CutChain.of({1}))
    assert not check_chain(inst, {0}, CutChain.of({0, 3}))


def test_two_segment_inequality():
    inst = two_segment_instance(1.7, pi_bar=2.0)
    ineq = build_inequality(inst, {0}, CutChain.of({0}, {0, 1}))
    np.testing.assert_allclose(ineq.coefficients, np.full(5, 1 / (2 * np.sqrt(2))))
    assert ineq.rhs == pytest.approx(1.7 / np.sqrt(2))
    assert ineq.k == 2
    assert ineq.support == (0, 1, 2, 3, 4)


def test_single_cut_inequality():
    inst = two_segment_instance(1.0)
    ineq = build_inequality(inst, {0}, CutChain.of({0, 1}))
    np.testing.assert_allclose(ineq.coefficients, [0, 0, 0, 1, 1])
    assert ineq.rhs == pytest.approx(1.0)


def test_non_positive_demand_gives_non_positive_rhs():
    inst = two_segment_instance(1.0)
    assert build_inequality(inst, {0, 2}, CutChain.of({0})).rhs == 0
    assert build_inequality(inst, {2}, CutChain.of(set())).rhs == pytest.approx(-1)


def test_invalid_chain_raises():
    with pytest.raises(InvalidCutChainException):
        build_inequality(two_segment_instance(1.0), {0}, CutChain.of({1}))


def test_violation():
    inst = two_segment_instance(1.7)
    ineq = build_inequality(inst, {0}, CutChain.of({0}, {0, 1}))
    assert evaluate_violation(ineq, np.zeros(5)) == pytest.approx(-1.7)
    assert evaluate_violation(ineq, np.ones(5)) == pytest.approx(5 / (2 * np.sqrt(2)) - 1.7)
    tight = build_inequality(two_segment_instance(1.8), {0}, CutChain.of({0}, {0, 1}))
    assert evaluate_violation(tight, np.ones(5)) < 0


def test_nonlinear_form_is_weaker_to_violate():
    inst = two_segment_instance(1.7)
    ineq = build_inequality(inst, {0}, CutChain.of({0}, {0, 1}))
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.random(5)
        assert evaluate_nonlinear_violation(ineq, x) >= evaluate_violation(ineq, x) - 1e-12


def test_exact_nogood():
    cut = NoGoodCut.excluding([1, 0, 1])
    np.testing.assert_array_equal(cut.coefficients, [-1, 1, -1])
    assert cut.rhs == -1
    for point in binary_points(3):
        violated = evaluate_violation(cut, point) < 0
        assert violated == (point.tolist() == [1, 0, 1])


def test_support_nogood():
    cut = NoGoodCut.excluding([1, 0, 1], support_only=True)
    np.testing.assert_array_equal(cut.coefficients, [0, 1, 0])
    for point in binary_points(3):
        violated = evaluate_violation(cut, point) < 0
        assert violated == (point[1] == 0)


def test_format_and_parse():
    inst = two_segment_instance(1.7)
    ineq = build_inequality(inst, {0}, CutChain.of({0}, {0, 1}))
    line = format_inequality(ineq, inst.graph)
    assert line.startswith('2; s; ')
    parsed = parse_inequality(line, inst)
    np.testing.assert_array_equal(parsed.coefficients, ineq.coefficients)
    assert parsed.rhs == ineq.rhs
    assert parsed.key == ineq.key


def test_format_and_parse_nogood():
    inst = two_segment_instance(1.7)
    cut = NoGoodCut.excluding([1, 1, 0, 1, 0])
    parsed = parse_inequality(format_inequality(cut, inst.graph), inst)
    assert parsed.kind == 'nogood'
    assert parsed.point == (1, 1, 0, 1, 0)
    assert parsed.key == cut.key


def test_parse_malformed():
    inst = two_segment_instance(1.7)
    with pytest.raises(InequalityFormatException):
        parse_inequality('2; s; 1.0', inst)
    with pytest.raises(InequalityFormatException):
        parse_inequality('2; s; 1.0; nope:1.0', inst)
    with pytest.raises(InequalityFormatException):
        parse_inequality('2; s; one; a0:1.0', inst)


def test_cut_pool_drops_duplicates():
    inst = two_segment_instance(1.7)
    pool = CutPool()
    assert pool.add(build_inequality(inst, {0}, CutChain.of({0}, {0, 1})))
    assert not pool.add(build_inequality(inst, {0}, CutChain.of({0}, {0, 1})))
    assert pool.add(NoGoodCut.excluding(np.zeros(5)))
    assert len(pool) == 2
    assert pool.count('nogood') == 1
    matrix, rhs = pool.rows(5)
    assert matrix.shape == (2, 5)
    assert rhs.tolist() == pytest.approx([1.7, 1.0])
    assert len(pool.violated_by(np.zeros(5))) == 2
    assert len(pool.lines(inst.graph)) == 2


@pytest.mark.timeout(300)
@pytest.mark.parametrize('r', [1.0, 2.0])
def test_every_inequality_holds_on_feasible_designs(r):
    for seed in range(20):
        entries, exits = TERMINAL_MIXES[seed % 4]
        inst = random_instance(seed, nodes=5, arcs=7, entries=entries, exits=exits, r=r, pi_factor=2.0)
        feasible = [x for x in binary_points(7) if check_feasibility(inst, x).feasible]
        assert feasible
        terminals_sorted = sorted(inst.terminals)
        subsets = [{v for i, v in enumerate(terminals_sorted) if mask >> i & 1} for mask in range(2 ** len(terminals_sorted))]
        rows, rhs = [], []
        for X in subsets:
            for k in k_range(inst):
                for chain in enumerate_chains(inst, X, k):
                    ineq = build_inequality(inst, X, chain)
                    rows.append(ineq.coefficients)
                    rhs.append(ineq.rhs)
        slack = np.array(feasible) @ np.array(rows).T - np.array(rhs)
        assert np.min(slack) >= -1e-6
