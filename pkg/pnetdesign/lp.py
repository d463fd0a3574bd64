from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from pnetdesign.logger import logger

# all LP tolerances live here
FEASIBILITY_TOLERANCE = 1e-8
PIVOT_TOLERANCE = 1e-10
OPTIMALITY_TOLERANCE = 1e-9
DEGENERATE_PIVOTS_BEFORE_BLAND = 1000
REFACTOR_PERIOD = 50
RESIDUAL_BREAKDOWN = 1e-6


class LpDimensionException(Exception): pass
class LpNumericalException(Exception): pass


class Relation(str, Enum):
    LE = '<='
    EQ = '='
    GE = '>='


class LpStatus(str, Enum):
    OPTIMAL = 'optimal'
    INFEASIBLE = 'infeasible'
    UNBOUNDED = 'unbounded'


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """
    min (or max) objective·x  s.t.  matrix·x (relation) rhs,  lower <= x <= upper.
    Bounds may be infinite.
    """
    objective: np.ndarray
    matrix: np.ndarray
    relations: Tuple[Relation, ...]
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    maximize: bool = False

    @staticmethod
    def build(objective: Sequence[float], rows: Sequence[Tuple[Sequence[float], str, float]] = (),
              lower: Optional[Sequence[float]] = None, upper: Optional[Sequence[float]] = None,
              maximize: bool = False) -> 'LinearProgram':
        n = len(objective)
        matrix = np.array([row for row, _, _ in rows], dtype=float).reshape(len(rows), n)
        return LinearProgram(
            np.asarray(objective, dtype=float),
            matrix,
            tuple(Relation(relation) for _, relation, _ in rows),
            np.array([rhs for _, _, rhs in rows], dtype=float),
            np.zeros(n) if lower is None else np.asarray(lower, dtype=float),
            np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float),
            maximize,
        )

    @property
    def n_variables(self) -> int:
        return len(self.objective)

    @property
    def n_rows(self) -> int:
        return len(self.rhs)

    def check(self) -> None:
        n, m = self.n_variables, self.n_rows
        if self.matrix.shape != (m, n) or len(self.relations) != m:
            raise LpDimensionException(f'matrix {self.matrix.shape} does not match {m} rows x {n} variables')
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise LpDimensionException('bound vectors must have one entry per variable')
        if not (np.all(np.isfinite(self.objective)) and np.all(np.isfinite(self.matrix)) and np.all(np.isfinite(self.rhs))):
            raise LpDimensionException('coefficients must be finite')
        if np.any(self.lower == np.inf) or np.any(self.upper == -np.inf):
            raise LpDimensionException('lower bounds must be < inf and upper bounds > -inf')


@dataclass(frozen=True, eq=False)
class LpSolution:
    status: LpStatus
    x: Optional[np.ndarray] = None
    objective: Optional[float] = None
    duals: Optional[np.ndarray] = None
    reduced_costs: Optional[np.ndarray] = None
    dual_objective: Optional[float] = None
    primal_residual: float = 0.0
    complementarity_residual: float = 0.0
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == LpStatus.OPTIMAL


_LOWER, _UPPER, _FREE, _BASIC = 0, 1, 2, 3


class BoundedSimplex:
    """
    Dense bounded-variable primal simplex with an explicit basis inverse.

    Rows become equalities with one slack each; phase one starts from slacks
    where they absorb the initial residual and from artificials elsewhere.
    Dantzig pricing switches to Bland's rule after a run of degenerate pivots.
    """

    def __init__(self, lp: LinearProgram):
        lp.check()
        self.lp = lp
        n, m = lp.n_variables, lp.n_rows
        self.n, self.m = n, m
        slack_lower = np.array([-np.inf if r == Relation.GE else 0.0 for r in lp.relations])
        slack_upper = np.array([np.inf if r == Relation.LE else 0.0 for r in lp.relations])

        self.lower = np.concatenate([lp.lower, slack_lower, np.zeros(m)])
        self.upper = np.concatenate([lp.upper, slack_upper, np.full(m, np.inf)])
        self.state = np.full(n + 2 * m, _LOWER)
        for j in range(n):
            if np.isfinite(lp.lower[j]):
                self.state[j] = _LOWER
            elif np.isfinite(lp.upper[j]):
                self.state[j] = _UPPER
            else:
                self.state[j] = _FREE
        self.state[n:n + m] = [_LOWER if np.isfinite(lo) else _UPPER for lo in slack_lower]

        x_start = self._nonbasic_values()[:n]
        residual = lp.rhs - lp.matrix @ x_start
        signs = np.where(residual >= 0, 1.0, -1.0)
        self.columns = np.hstack([lp.matrix, np.eye(m), np.diag(signs)])

        basis = []
        for i in range(m):
            slack = n + i
            if self.lower[slack] <= residual[i] <= self.upper[slack]:
                basis.append(slack)
                self.upper[n + m + i] = 0.0
            else:
                basis.append(n + m + i)
        self.basis = np.array(basis, dtype=int)
        self.state[self.basis] = _BASIC
        self.basis_inverse = np.eye(m)
        self._refactor()
        self.iterations = 0
        self.max_iterations = 50 * (n + 2 * m) + 1000

    def _nonbasic_values(self) -> np.ndarray:
        values = np.zeros(len(self.state))
        at_lower = self.state == _LOWER
        at_upper = self.state == _UPPER
        values[at_lower] = self.lower[at_lower]
        values[at_upper] = self.upper[at_upper]
        return values

    def _values(self) -> np.ndarray:
        values = self._nonbasic_values()
        values[self.basis] = 0.0
        if self.m:
            values[self.basis] = self.basis_inverse @ (self.lp.rhs - self.columns @ values)
        return values

    def _refactor(self) -> None:
        if not self.m:
            return
        try:
            self.basis_inverse = np.linalg.inv(self.columns[:, self.basis])
        except np.linalg.LinAlgError:
            raise LpNumericalException('singular basis during refactorization')

    def _ratio_test(self, values: np.ndarray, delta: np.ndarray, bland: bool) -> Tuple[float, int]:
        """largest step along -delta keeping the basis within bounds, and the row that blocks it"""
        if not self.m:
            return np.inf, -1
        lower, upper = self.lower[self.basis], self.upper[self.basis]
        current = values[self.basis]
        ratios = np.full(self.m, np.inf)
        falling = (delta > PIVOT_TOLERANCE) & np.isfinite(lower)
        rising = (delta < -PIVOT_TOLERANCE) & np.isfinite(upper)
        ratios[falling] = (current[falling] - lower[falling]) / delta[falling]
        ratios[rising] = (upper[rising] - current[rising]) / -delta[rising]
        ratios = np.maximum(ratios, 0.0)
        theta = float(np.min(ratios))
        if not np.isfinite(theta):
            return np.inf, -1
        ties = np.flatnonzero(ratios <= theta + 1e-12)
        if bland:
            return theta, int(ties[np.argmin(self.basis[ties])])
        return theta, int(ties[np.argmax(np.abs(delta[ties]))])

    def run(self, cost: np.ndarray) -> LpStatus:
        degenerate_run = 0
        bland = False
        pivots = 0
        while True:
            if self.iterations >= self.max_iterations:
                raise LpNumericalException(f'no convergence after {self.iterations} simplex iterations')
            duals = cost[self.basis] @ self.basis_inverse if self.m else np.zeros(0)
            reduced = cost - duals @ self.columns if self.m else cost.copy()
            movable = self.upper > self.lower
            increase = movable & ((self.state == _LOWER) | (self.state == _FREE)) & (reduced < -OPTIMALITY_TOLERANCE)
            decrease = movable & ((self.state == _UPPER) | (self.state == _FREE)) & (reduced > OPTIMALITY_TOLERANCE)
            candidates = np.flatnonzero(increase | decrease)
            if not len(candidates):
                return LpStatus.OPTIMAL
            entering = int(candidates[0]) if bland else int(candidates[np.argmax(np.abs(reduced[candidates]))])
            direction = 1.0 if increase[entering] else -1.0

            values = self._values()
            delta = direction * (self.basis_inverse @ self.columns[:, entering]) if self.m else np.zeros(0)
            theta_basis, leaving = self._ratio_test(values, delta, bland)
            theta_flip = self.upper[entering] - self.lower[entering]
            self.iterations += 1

            if not np.isfinite(theta_basis) and not np.isfinite(theta_flip):
                return LpStatus.UNBOUNDED
            if theta_flip <= theta_basis:
                self.state[entering] = _UPPER if direction > 0 else _LOWER
                degenerate_run = 0
                continue

            leaving_variable = self.basis[leaving]
            self.state[leaving_variable] = _LOWER if delta[leaving] > 0 else _UPPER
            alpha = direction * delta
            pivot_row = self.basis_inverse[leaving] / alpha[leaving]
            self.basis_inverse -= np.outer(alpha, pivot_row)
            self.basis_inverse[leaving] = pivot_row
            self.basis[leaving] = entering
            self.state[entering] = _BASIC
            pivots += 1
            if pivots % REFACTOR_PERIOD == 0:
                self._refactor()

            degenerate_run = degenerate_run + 1 if theta_basis <= 1e-12 else 0
            if not bland and degenerate_run >= DEGENERATE_PIVOTS_BEFORE_BLAND:
                logger.debug(f'switching to Bland rule after {degenerate_run} degenerate pivots')
                bland = True

    def solve(self) -> LpSolution:
        n, m = self.n, self.m
        artificials = np.arange(n + m, n + 2 * m)
        phase_one_cost = np.zeros(n + 2 * m)
        phase_one_cost[artificials] = 1.0
        self.run(phase_one_cost)
        infeasibility = float(np.sum(self._values()[artificials]))
        if infeasibility > FEASIBILITY_TOLERANCE * (1.0 + float(np.max(np.abs(self.lp.rhs), initial=0.0))):
            return LpSolution(LpStatus.INFEASIBLE, iterations=self.iterations)
        self.upper[artificials] = 0.0

        sign = -1.0 if self.lp.maximize else 1.0
        cost = np.concatenate([sign * self.lp.objective, np.zeros(2 * m)])
        status = self.run(cost)
        if status == LpStatus.UNBOUNDED:
            return LpSolution(status, iterations=self.iterations)

        self._refactor()
        values = self._values()
        duals = cost[self.basis] @ self.basis_inverse if m else np.zeros(0)
        reduced = cost - duals @ self.columns if m else cost.copy()
        x = values[:n]
        activity = self.lp.matrix @ x
        primal_residual = _row_violation(activity, self.lp.relations, self.lp.rhs)
        primal_residual = max(primal_residual, float(np.max(np.maximum(self.lp.lower - x, x - self.lp.upper), initial=0.0)))
        if primal_residual > RESIDUAL_BREAKDOWN * (1.0 + float(np.max(np.abs(self.lp.rhs), initial=0.0))):
            raise LpNumericalException(f'primal residual {primal_residual:.3e} after optimal basis')

        dual_objective = float(duals @ self.lp.rhs) if m else 0.0
        complementarity = 0.0
        for j in range(n + m):
            d = reduced[j]
            if abs(d) <= OPTIMALITY_TOLERANCE:
                continue
            bound = self.lower[j] if d > 0 else self.upper[j]
            dual_objective += d * bound if np.isfinite(bound) else -np.inf
            complementarity += abs(d) * abs(values[j] - bound) if np.isfinite(bound) else np.inf
        complementarity += float(np.sum(np.abs(duals * (self.lp.rhs - activity)))) if m else 0.0

        return LpSolution(
            LpStatus.OPTIMAL,
            x=x.copy(),
            objective=float(self.lp.objective @ x),
            duals=sign * duals,
            reduced_costs=sign * reduced[:n],
            dual_objective=sign * dual_objective,
            primal_residual=primal_residual,
            complementarity_residual=complementarity,
            iterations=self.iterations,
        )


def _row_violation(activity: np.ndarray, relations: Sequence[Relation], rhs: np.ndarray) -> float:
    worst = 0.0
    for value, relation, bound in zip(activity, relations, rhs):
        if relation == Relation.LE:
            worst = max(worst, value - bound)
        elif relation == Relation.GE:
            worst = max(worst, bound - value)
        else:
            worst = max(worst, abs(value - bound))
    return float(worst)


def solve_lp(lp: LinearProgram) -> LpSolution:
    solution = BoundedSimplex(lp).solve()
    logger.debug(f'lp {lp.n_rows}x{lp.n_variables}: {solution.status.value} after {solution.iterations} iterations')
    return solution


def dump_lp(lp: LinearProgram, name: str = 'lp') -> str:
    """CPLEX LP text of ``lp``, variables named x0..xn-1 and rows c0..cm-1"""
    def linear(coefficients: np.ndarray) -> str:
        terms = [f'{"-" if c < 0 else "+"} {abs(c):.12g} x{j}' for j, c in enumerate(coefficients) if c != 0]
        text = ' '.join(terms) if terms else '0 x0'
        return text[2:] if text.startswith('+ ') else text

    lines = [f'\\ {name}', 'Maximize' if lp.maximize else 'Minimize', f' obj: {linear(lp.objective)}', 'Subject To']
    for i, (relation, bound) in enumerate(zip(lp.relations, lp.rhs)):
        lines.append(f' c{i}: {linear(lp.matrix[i])} {relation.value} {bound:.12g}')
    lines.append('Bounds')
    for j, (lo, up) in enumerate(zip(lp.lower, lp.upper)):
        if np.isinf(lo) and np.isinf(up):
            lines.append(f' x{j} free')
        else:
            lo_text = '-inf' if np.isinf(lo) else f'{lo:.12g}'
            up_text = '+inf' if np.isinf(up) else f'{up:.12g}'
            lines.append(f' {lo_text} <= x{j} <= {up_text}')
    lines.append('End')
    return '\n'.join(lines) + '\n'
