import numpy as np
import pytest

from pnetdesign.flow import check_feasibility
from pnetdesign.generator import GeneratorSpec, generate_multipath
from pnetdesign.inequality import CutPool, evaluate_violation
from pnetdesign.separation import ProblemTooLargeException
from pnetdesign.solver import SolveStatus, SolverConfig, _cost_order, solve_branch_and_cut, solve_bruteforce
from test.test_utils import TERMINAL_MIXES, make_instance, random_instance


def weak_and_strong(pi_bar: float):
    # weak arc beta=4 cost 1, strong arc beta=1 cost 3
    return make_instance(['s', 't'], [('s', 't'), ('s', 't')], [1, -1], beta=[4, 1], cost=[1, 3], pi_bar=pi_bar)


def test_bruteforce_zero_demand():
    inst = make_instance(['s', 't'], [('s', 't')], [0, 0], entries=['s'], exits=['t'])
    outcome = solve_bruteforce(inst)
    assert outcome.status == SolveStatus.OPTIMAL
    assert outcome.cost == 0
    assert outcome.x.tolist() == [0]


def test_bruteforce_picks_strong_arc():
    outcome = solve_bruteforce(weak_and_strong(1.5))
    assert outcome.x.tolist() == [0, 1]
    assert outcome.cost == 3


def test_bruteforce_infeasible():
    outcome = solve_bruteforce(weak_and_strong(0.1))
    assert outcome.status == SolveStatus.INFEASIBLE
    assert outcome.x is None


def test_bruteforce_size_limit():
    inst = make_instance(['s', 't'], [('s', 't')] * 21, [1, -1], pi_bar=10.0)
    with pytest.raises(ProblemTooLargeException):
        solve_bruteforce(inst)


def test_cost_order_enumerates_every_design_once():
    cost = np.array([3.0, 1.0, 2.0, 1.0, 0.5])
    designs = list(_cost_order(cost))
    assert len(designs) == 32
    assert len({tuple(x) for x in designs}) == 32
    totals = [float(cost @ x) for x in designs]
    assert totals == sorted(totals)


def test_cost_order_is_lazy():
    designs = _cost_order(np.ones(20))
    assert next(designs).sum() == 0
    assert next(designs).sum() == 1


@pytest.mark.timeout(300)
def test_bruteforce_on_random_instances():
    for seed in range(10):
        inst = random_instance(seed, nodes=6, arcs=9, pi_factor=1.1)
        outcome = solve_bruteforce(inst)
        assert outcome.status == SolveStatus.OPTIMAL
        assert outcome.cost <= float(np.sum(inst.cost)) + 1e-9
        assert check_feasibility(inst, outcome.x).feasible


def test_branch_and_cut_picks_strong_arc():
    outcome = solve_branch_and_cut(weak_and_strong(1.5))
    assert outcome.status == SolveStatus.OPTIMAL
    assert outcome.x.tolist() == [0, 1]
    assert outcome.cost == pytest.approx(3)


def test_branch_and_cut_infeasible():
    for config in (SolverConfig(), SolverConfig(use_cuts=False)):
        outcome = solve_branch_and_cut(weak_and_strong(0.1), config)
        assert outcome.status == SolveStatus.INFEASIBLE
        assert outcome.cost is None


@pytest.mark.timeout(600)
@pytest.mark.parametrize('r', [1.0, 2.0])
def test_branch_and_cut_matches_bruteforce(r):
    for seed in range(20):
        entries, exits = TERMINAL_MIXES[seed % 4]
        inst = random_instance(seed, nodes=5, arcs=7, entries=entries, exits=exits, r=r, pi_factor=1.2)
        expected = solve_bruteforce(inst)
        for use_cuts in (True, False):
            outcome = solve_branch_and_cut(inst, SolverConfig(use_cuts=use_cuts))
            assert outcome.status == expected.status
            assert outcome.cost == pytest.approx(expected.cost, rel=1e-9)
            assert check_feasibility(inst, outcome.x).feasible


def test_cuts_are_valid_for_every_feasible_design():
    inst = random_instance(3, nodes=5, arcs=7, entries=2, exits=1, pi_factor=1.2)
    outcome = solve_branch_and_cut(inst, SolverConfig(k_max=2))
    points = ((np.arange(2 ** 7)[:, None] >> np.arange(7)) & 1).astype(float)
    for x in points:
        if check_feasibility(inst, x).feasible:
            assert all(evaluate_violation(cut, x) >= -1e-6 for cut in outcome.cuts)


@pytest.mark.timeout(60)
def test_multipath_solved_at_root_with_disjoint_cuts():
    for seed in range(3):
        inst = generate_multipath(GeneratorSpec(segments=8, options=3, seed=seed))
        outcome = solve_branch_and_cut(inst, SolverConfig(fixed_k=8))
        assert outcome.status == SolveStatus.OPTIMAL
        assert outcome.statistics.branch_nodes == 0
        largest = np.array([name.endswith('_2') for name in inst.graph.arc_names], dtype=float)
        np.testing.assert_array_equal(outcome.x, largest)
        assert outcome.statistics.cuts_added >= 1


def test_multipath_without_cuts_needs_branching():
    inst = generate_multipath(GeneratorSpec(segments=8, options=3, seed=0))
    outcome = solve_branch_and_cut(inst, SolverConfig(use_cuts=False, node_limit=3))
    assert outcome.statistics.branch_nodes >= 1
    assert outcome.status == SolveStatus.LIMIT
    assert outcome.dual_bound <= float(inst.cost @ np.ones(24))


def test_root_only_cuts():
    inst = random_instance(1, nodes=5, arcs=7, pi_factor=1.2)
    expected = solve_bruteforce(inst)
    outcome = solve_branch_and_cut(inst, SolverConfig(root_only_cuts=True, branching='first-fractional'))
    assert outcome.cost == pytest.approx(expected.cost)


def test_shared_pool_collects_cuts():
    inst = generate_multipath(GeneratorSpec(segments=4, options=2, seed=2))
    pool = CutPool()
    outcome = solve_branch_and_cut(inst, SolverConfig(fixed_k=4), pool)
    assert len(pool) == len(outcome.cuts)
    assert pool.count('disjoint-cut') == outcome.statistics.cuts_added


def test_record():
    inst = weak_and_strong(1.5)
    config = SolverConfig(k_max=3)
    record = solve_branch_and_cut(inst, config).to_record(inst, config)
    assert record['k_max'] == '3'
    assert record['cuts_enabled'] is True
    assert record['status'] == 'optimal'
    assert record['gap_pct'] == 0
    assert solve_bruteforce(inst).to_record(inst, None)['k_max'] == 'brute-force'


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(k_max=0)
    with pytest.raises(ValueError):
        SolverConfig(branching='random')
    assert SolverConfig(fixed_k=8).k_label == '=8'
    assert SolverConfig().k_label == 'all'
