"""
Bounded-variable simplex on a dense tableau.

Every row `a·x (<=|=|>=) b` gets a slack column so that `A x + s = b`, with
the slack bounded to `[0, inf)`, `(-inf, 0]` or `[0, 0]`. Structural and
slack columns together form the base matrix `[A | I]`. Cold solves start from
a slack/artificial identity basis and run a two-phase primal simplex. Warm
solves refactor a previous basis under new variable bounds, restore primal
feasibility with the dual simplex, then finish with the primal simplex.
"""

from __future__ import annotations

import time

import numpy as np

from .errors import NumericalError
from .logger import logger
from .types import LinearRow, MilpProblem, MilpStatus, SolverSettings

LOWER = 0
UPPER = 1
FREE = 2
BASIC = 3

OPTIMALITY_TOLERANCE = 1e-9
DEGENERATE_STREAK = 25
"""Consecutive degenerate pivots before pricing switches to Bland's rule."""
REFACTOR_EVERY = 200


class DeadlineExceeded(Exception):
    pass


class _NumericalTrouble(Exception):
    pass


class LpResult:
    def __init__(
        self,
        status: MilpStatus,
        values: np.ndarray | None = None,
        objective: float | None = None,
        basis: np.ndarray | None = None,
        iterations: int = 0,
    ):
        self.status = status
        self.values = values
        """Structural variable values."""
        self.objective = objective
        """Objective without the problem's constant offset."""
        self.basis = basis
        self.iterations = iterations


class _Tableau:
    def __init__(
        self,
        matrix: np.ndarray,
        rhs: np.ndarray,
        lower: np.ndarray,
        upper: np.ndarray,
        basis: np.ndarray,
    ):
        self.matrix = matrix
        self.rhs = rhs
        self.lower = lower
        self.upper = upper
        self.basis = basis
        self.state = np.full(matrix.shape[1], LOWER, dtype=np.int8)
        self.state[basis] = BASIC
        self.values = np.zeros(matrix.shape[1])
        self.table = np.empty_like(matrix)
        self.beta = np.empty_like(rhs)
        self.pivots = 0
        self.refactored_at = 0

    def refactor(self) -> None:
        self.refactored_at = self.pivots
        factor = self.matrix[:, self.basis]
        self.table = np.linalg.solve(factor, self.matrix)
        self.beta = np.linalg.solve(factor, self.rhs)
        self.update_basics()

    def update_basics(self) -> None:
        self.values[self.basis] = 0.0
        basics = self.beta - self.table @ self.values
        self.values[self.basis] = basics

    def pivot(self, row: int, column: int) -> None:
        table = self.table
        element = table[row, column]
        table[row] /= element
        self.beta[row] /= element
        coefficients = table[:, column].copy()
        coefficients[row] = 0.0
        table -= np.outer(coefficients, table[row])
        self.beta -= coefficients * self.beta[row]
        table[:, column] = 0.0
        table[row, column] = 1.0
        self.basis[row] = column
        self.pivots += 1

    def reduced_costs(self, cost: np.ndarray) -> np.ndarray:
        return cost - cost[self.basis] @ self.table


class SimplexEngine:
    """LP relaxation of one MilpProblem, re-solvable under changing bounds."""

    def __init__(self, problem: MilpProblem, settings: SolverSettings):
        self.settings = settings
        self.num_structural = problem.num_variables
        self.cost = np.asarray(problem.objective, dtype=float)
        self.lower = np.asarray(problem.lower, dtype=float)
        self.upper = np.asarray(problem.upper, dtype=float)
        self.trivially_infeasible = False

        rows = [row for row in problem.rows if _has_coefficients(row)]
        for row in problem.rows:
            if not _has_coefficients(row) and not _relation_holds(
                0.0, row.relation, row.rhs, settings.feasibility_tolerance
            ):
                self.trivially_infeasible = True

        n, m = self.num_structural, len(rows)
        self.num_rows = m
        constraint = np.zeros((m, n))
        for i, row in enumerate(rows):
            np.add.at(constraint[i], row.indices, row.coefficients)
        self.constraint = constraint
        self.rhs = np.array([row.rhs for row in rows], dtype=float)
        self.base = np.hstack([constraint, np.eye(m)])
        self.slack_lower = np.array(
            [-np.inf if row.relation == ">=" else 0.0 for row in rows]
        )
        self.slack_upper = np.array(
            [np.inf if row.relation == "<=" else 0.0 for row in rows]
        )
        self.full_cost = np.concatenate([self.cost, np.zeros(m)])

    def solve(
        self,
        lower: np.ndarray | None = None,
        upper: np.ndarray | None = None,
        *,
        warm: np.ndarray | None = None,
        deadline: float | None = None,
    ) -> LpResult:
        lower = self.lower if lower is None else lower
        upper = self.upper if upper is None else upper
        if self.trivially_infeasible or np.any(lower > upper):
            return LpResult(MilpStatus.INFEASIBLE)
        if warm is not None:
            try:
                result = self._solve_warm(lower, upper, warm, deadline)
            except (np.linalg.LinAlgError, _NumericalTrouble) as error:
                logger.debug(f"warm start abandoned ({error!r}); solving cold")
                result = None
            if result is not None:
                return result
        try:
            return self._solve_cold(lower, upper, deadline)
        except _NumericalTrouble as error:
            raise NumericalError(f"simplex gave up: {error}") from None

    ### cold start

    def _solve_cold(
        self, lower: np.ndarray, upper: np.ndarray, deadline: float | None
    ) -> LpResult:
        n, m = self.num_structural, self.num_rows
        tolerance = self.settings.feasibility_tolerance

        values = np.zeros(n)
        state = np.full(n, LOWER, dtype=np.int8)
        finite_lower = np.isfinite(lower)
        finite_upper = np.isfinite(upper)
        values[finite_lower] = lower[finite_lower]
        at_upper = ~finite_lower & finite_upper
        values[at_upper] = upper[at_upper]
        state[at_upper] = UPPER
        state[~finite_lower & ~finite_upper] = FREE

        residual = self.rhs - self.constraint @ values
        slack_feasible = (residual >= self.slack_lower - tolerance) & (
            residual <= self.slack_upper + tolerance
        )
        artificial_rows = np.flatnonzero(~slack_feasible)
        k = len(artificial_rows)

        artificial = np.zeros((m, k))
        artificial[artificial_rows, np.arange(k)] = 1.0
        matrix = np.hstack([self.base, artificial])
        signs = np.sign(residual[artificial_rows])
        art_lower = np.where(signs > 0, 0.0, -np.inf)
        art_upper = np.where(signs > 0, np.inf, 0.0)
        full_lower = np.concatenate([lower, self.slack_lower, art_lower])
        full_upper = np.concatenate([upper, self.slack_upper, art_upper])

        basis = np.arange(n, n + m)
        basis[artificial_rows] = n + m + np.arange(k)
        tab = _Tableau(matrix, self.rhs.copy(), full_lower, full_upper, basis)
        tab.state[:n] = state
        tab.values[:n] = values
        slack_state = np.where(self.slack_lower == 0.0, LOWER, UPPER)
        for i in artificial_rows:
            tab.state[n + i] = slack_state[i]
        tab.state[basis] = BASIC
        tab.table = matrix.copy()
        tab.beta = self.rhs.copy()
        tab.update_basics()

        iterations = 0
        if k:
            phase_one = np.zeros(matrix.shape[1])
            phase_one[n + m :] = np.where(signs > 0, 1.0, -1.0)
            status, iterations = self._primal(tab, phase_one, deadline)
            infeasibility = float(np.abs(tab.values[n + m :]).sum())
            scale = max(1.0, float(np.abs(self.rhs).max(initial=0.0)))
            if infeasibility > tolerance * scale:
                return LpResult(MilpStatus.INFEASIBLE, iterations=iterations)
            self._drive_out_artificials(tab, n + m)

        cost = self.full_cost
        status, more = self._primal(tab, cost, deadline)
        return self._result(tab, status, iterations + more)

    def _drive_out_artificials(self, tab: _Tableau, first_artificial: int) -> None:
        tab.lower[first_artificial:] = 0.0
        tab.upper[first_artificial:] = 0.0
        tab.values[first_artificial:] = 0.0
        for row in np.flatnonzero(tab.basis >= first_artificial):
            candidates = np.abs(tab.table[row, :first_artificial])
            column = int(np.argmax(candidates))
            if candidates[column] <= self.settings.pivot_tolerance:
                raise _NumericalTrouble("artificial variable cannot leave the basis")
            leaving = tab.basis[row]
            tab.state[column] = BASIC
            tab.state[leaving] = LOWER
            tab.pivot(row, column)
        tab.matrix = tab.matrix[:, :first_artificial]
        tab.table = tab.table[:, :first_artificial]
        tab.lower = tab.lower[:first_artificial]
        tab.upper = tab.upper[:first_artificial]
        tab.values = tab.values[:first_artificial]
        tab.state = tab.state[:first_artificial]
        tab.update_basics()

    ### warm start

    def _solve_warm(
        self,
        lower: np.ndarray,
        upper: np.ndarray,
        basis: np.ndarray,
        deadline: float | None,
    ) -> LpResult | None:
        full_lower = np.concatenate([lower, self.slack_lower])
        full_upper = np.concatenate([upper, self.slack_upper])
        tab = _Tableau(self.base, self.rhs, full_lower, full_upper, basis.copy())
        tab.refactor()

        # Place nonbasic columns on the bound their reduced cost prefers, which
        # keeps the basis dual feasible.
        reduced = tab.reduced_costs(self.full_cost)
        nonbasic = tab.state != BASIC
        finite_lower = np.isfinite(full_lower)
        finite_upper = np.isfinite(full_upper)
        fixed = full_lower == full_upper
        wants_lower = nonbasic & ~fixed & (reduced > OPTIMALITY_TOLERANCE)
        wants_upper = nonbasic & ~fixed & (reduced < -OPTIMALITY_TOLERANCE)
        if np.any(wants_lower & ~finite_lower) or np.any(wants_upper & ~finite_upper):
            return None
        indifferent = nonbasic & ~wants_lower & ~wants_upper
        go_lower = wants_lower | (indifferent & finite_lower)
        go_upper = wants_upper | (indifferent & ~finite_lower & finite_upper)
        go_free = indifferent & ~finite_lower & ~finite_upper
        tab.state[go_lower] = LOWER
        tab.values[go_lower] = full_lower[go_lower]
        tab.state[go_upper] = UPPER
        tab.values[go_upper] = full_upper[go_upper]
        tab.state[go_free] = FREE
        tab.values[go_free] = 0.0
        tab.update_basics()

        feasible, iterations = self._dual(tab, self.full_cost, deadline)
        if not feasible:
            return LpResult(MilpStatus.INFEASIBLE, iterations=iterations)
        status, more = self._primal(tab, self.full_cost, deadline)
        return self._result(tab, status, iterations + more)

    ### iterations

    def _iteration_limit(self, tab: _Tableau) -> int:
        return 50 * (tab.table.shape[0] + tab.table.shape[1]) + 1000

    def _check(self, tab: _Tableau, iteration: int, deadline: float | None) -> None:
        if iteration > self._iteration_limit(tab):
            raise _NumericalTrouble("iteration limit reached")
        if deadline is not None and iteration % 32 == 0 and time.perf_counter() > deadline:
            raise DeadlineExceeded()
        if tab.pivots - tab.refactored_at >= REFACTOR_EVERY:
            try:
                tab.refactor()
            except np.linalg.LinAlgError as error:
                raise _NumericalTrouble("singular basis") from error

    def _primal(
        self, tab: _Tableau, cost: np.ndarray, deadline: float | None
    ) -> tuple[MilpStatus, int]:
        pivot_tolerance = self.settings.pivot_tolerance
        degenerate = 0
        bland = False
        iteration = 0
        while True:
            iteration += 1
            self._check(tab, iteration, deadline)
            reduced = tab.reduced_costs(cost)
            movable = (tab.state != BASIC) & (tab.upper > tab.lower)
            increase = movable & (tab.state != UPPER) & (reduced < -OPTIMALITY_TOLERANCE)
            decrease = movable & (tab.state != LOWER) & (reduced > OPTIMALITY_TOLERANCE)
            eligible = increase | decrease
            if not eligible.any():
                return MilpStatus.OPTIMAL, iteration
            if bland:
                column = int(np.flatnonzero(eligible)[0])
            else:
                column = int(np.argmax(np.where(eligible, np.abs(reduced), 0.0)))
            direction = 1.0 if increase[column] else -1.0

            delta = -direction * tab.table[:, column]
            basics = tab.values[tab.basis]
            ratios = np.full(len(delta), np.inf)
            falling = delta < -pivot_tolerance
            rising = delta > pivot_tolerance
            with np.errstate(invalid="ignore"):
                ratios[falling] = (basics[falling] - tab.lower[tab.basis][falling]) / -delta[falling]
                ratios[rising] = (tab.upper[tab.basis][rising] - basics[rising]) / delta[rising]
            ratios = np.maximum(ratios, 0.0)
            step = float(ratios.min(initial=np.inf))
            flip = float(tab.upper[column] - tab.lower[column])

            if flip <= step:
                if not np.isfinite(flip):
                    return MilpStatus.UNBOUNDED, iteration
                to_upper = direction > 0
                tab.state[column] = UPPER if to_upper else LOWER
                tab.values[column] = tab.upper[column] if to_upper else tab.lower[column]
                tab.update_basics()
                degenerate, bland = 0, False
                continue
            if not np.isfinite(step):
                return MilpStatus.UNBOUNDED, iteration

            ties = np.flatnonzero(ratios <= step + 1e-12)
            if bland:
                row = int(ties[np.argmin(tab.basis[ties])])
            else:
                row = int(ties[np.argmax(np.abs(delta[ties]))])
            leaving = int(tab.basis[row])
            if delta[row] < 0:
                tab.state[leaving] = LOWER
                tab.values[leaving] = tab.lower[leaving]
            else:
                tab.state[leaving] = UPPER
                tab.values[leaving] = tab.upper[leaving]
            tab.values[column] += direction * step
            tab.state[column] = BASIC
            tab.pivot(row, column)
            tab.update_basics()

            if step <= 1e-12:
                degenerate += 1
                bland = bland or degenerate > DEGENERATE_STREAK
            else:
                degenerate, bland = 0, False

    def _dual(
        self, tab: _Tableau, cost: np.ndarray, deadline: float | None
    ) -> tuple[bool, int]:
        tolerance = self.settings.feasibility_tolerance
        pivot_tolerance = self.settings.pivot_tolerance
        iteration = 0
        while True:
            iteration += 1
            self._check(tab, iteration, deadline)
            basics = tab.values[tab.basis]
            below = tab.lower[tab.basis] - basics
            above = basics - tab.upper[tab.basis]
            violation = np.maximum(below, above)
            if violation.max(initial=0.0) <= tolerance:
                return True, iteration
            row = int(np.argmax(violation))
            leaving = int(tab.basis[row])
            raise_value = below[row] >= above[row]

            alpha = tab.table[row]
            movable = (tab.state != BASIC) & (tab.upper > tab.lower)
            can_rise = movable & (tab.state != UPPER)
            can_fall = movable & (tab.state != LOWER)
            if raise_value:
                eligible = (can_rise & (alpha < -pivot_tolerance)) | (
                    can_fall & (alpha > pivot_tolerance)
                )
            else:
                eligible = (can_rise & (alpha > pivot_tolerance)) | (
                    can_fall & (alpha < -pivot_tolerance)
                )
            if not eligible.any():
                return False, iteration

            reduced = tab.reduced_costs(cost)
            candidates = np.flatnonzero(eligible)
            ratios = np.abs(reduced[candidates]) / np.abs(alpha[candidates])
            best = ratios.min()
            ties = candidates[ratios <= best + 1e-12]
            column = int(ties[np.argmax(np.abs(alpha[ties]))])

            if raise_value:
                tab.state[leaving] = LOWER
                tab.values[leaving] = tab.lower[leaving]
            else:
                tab.state[leaving] = UPPER
                tab.values[leaving] = tab.upper[leaving]
            tab.state[column] = BASIC
            tab.pivot(row, column)
            tab.update_basics()

    def _result(self, tab: _Tableau, status: MilpStatus, iterations: int) -> LpResult:
        if status != MilpStatus.OPTIMAL:
            return LpResult(status, iterations=iterations)
        values = tab.values[: self.num_structural].copy()
        objective = float(self.cost @ values)
        return LpResult(status, values, objective, tab.basis.copy(), iterations)


def _has_coefficients(row: LinearRow) -> bool:
    return any(coefficient != 0 for coefficient in row.coefficients)


def _relation_holds(value: float, relation: str, rhs: float, tolerance: float) -> bool:
    match relation:
        case "<=":
            return value <= rhs + tolerance
        case ">=":
            return value >= rhs - tolerance
        case _:
            return abs(value - rhs) <= tolerance
