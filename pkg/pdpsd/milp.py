from __future__ import annotations

import heapq
import itertools
import math
import re
import time
from collections.abc import Iterable, Mapping, Sequence

import numpy as np

from .errors import CapabilityError, NumericalError, ProblemError
from .logger import logger
from .simplex import DeadlineExceeded, SimplexEngine
from .types import LinearRow, MilpProblem, MilpSolution, MilpStatus, SolverSettings

ENUMERATION_MAX_INTEGERS = 24
ENUMERATION_MAX_ASSIGNMENTS = 2**24
ENUMERATION_CHUNK = 4096


class MilpBuilder:
    """Accumulates variables and rows, then freezes them into a MilpProblem."""

    def __init__(self, name: str = "problem"):
        self.name = name
        self.objective: list[float] = []
        self.lower: list[float] = []
        self.upper: list[float] = []
        self.integer: list[bool] = []
        self.names: list[str] = []
        self.rows: list[LinearRow] = []
        self.offset = 0.0

    @property
    def num_variables(self) -> int:
        return len(self.objective)

    def add_variable(
        self,
        name: str,
        lower: float = 0.0,
        upper: float = math.inf,
        *,
        integer: bool = False,
        cost: float = 0.0,
    ) -> int:
        self.objective.append(cost)
        self.lower.append(lower)
        self.upper.append(upper)
        self.integer.append(integer)
        self.names.append(name)
        return len(self.objective) - 1

    def fix(self, index: int, value: float) -> None:
        self.lower[index] = value
        self.upper[index] = value

    def add_row(
        self,
        terms: Mapping[int, float] | Iterable[tuple[int, float]],
        relation: str,
        rhs: float,
        name: str = "",
    ) -> None:
        merged: dict[int, float] = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for index, coefficient in items:
            merged[index] = merged.get(index, 0.0) + coefficient
        self.rows.append(
            LinearRow(
                indices=list(merged),
                coefficients=list(merged.values()),
                relation=relation,  # type: ignore[arg-type]
                rhs=rhs,
                name=name or f"r{len(self.rows)}",
            )
        )

    def build(self) -> MilpProblem:
        return MilpProblem(
            name=self.name,
            objective=list(self.objective),
            objective_offset=self.offset,
            rows=list(self.rows),
            lower=list(self.lower),
            upper=list(self.upper),
            integer=list(self.integer),
            names=list(self.names),
        )


def validate_problem(problem: MilpProblem) -> None:
    n = problem.num_variables
    for label, values in (
        ("lower", problem.lower),
        ("upper", problem.upper),
        ("integer", problem.integer),
    ):
        if len(values) != n:
            raise ProblemError(f"{label} has {len(values)} entries for {n} variables")
    if problem.names and len(problem.names) != n:
        raise ProblemError(f"names has {len(problem.names)} entries for {n} variables")
    if not all(math.isfinite(c) for c in problem.objective):
        raise ProblemError("objective coefficients must be finite")
    for j in range(n):
        lower, upper = problem.lower[j], problem.upper[j]
        if math.isnan(lower) or math.isnan(upper) or lower > upper:
            raise ProblemError(f"variable {problem.variable_name(j)}: bounds [{lower}, {upper}]")
        if problem.integer[j] and not (math.isfinite(lower) and math.isfinite(upper)):
            raise ProblemError(f"integer variable {problem.variable_name(j)} needs finite bounds")
    for row in problem.rows:
        if len(row.indices) != len(row.coefficients):
            raise ProblemError(f"row {row.name}: indices and coefficients differ in length")
        if any(not 0 <= index < n for index in row.indices):
            raise ProblemError(f"row {row.name}: variable index out of range")
        if not math.isfinite(row.rhs) or not all(map(math.isfinite, row.coefficients)):
            raise ProblemError(f"row {row.name}: coefficients must be finite")


def solve_lp(problem: MilpProblem, settings: SolverSettings | None = None) -> MilpSolution:
    """Solve the LP relaxation; integrality flags are ignored."""
    settings = settings or SolverSettings()
    validate_problem(problem)
    started = time.perf_counter()
    engine = SimplexEngine(problem, settings)
    try:
        result = engine.solve(deadline=started + settings.time_limit)
    except DeadlineExceeded:
        return MilpSolution(
            status=MilpStatus.TIME_LIMIT_NO_SOLUTION,
            node_count=1,
            wall_time=time.perf_counter() - started,
        )
    wall_time = time.perf_counter() - started
    if result.status != MilpStatus.OPTIMAL or result.values is None:
        return MilpSolution(status=result.status, node_count=1, wall_time=wall_time)
    assert result.objective is not None
    return MilpSolution(
        status=MilpStatus.OPTIMAL,
        objective=result.objective + problem.objective_offset,
        assignment=result.values.tolist(),
        gap=0.0,
        node_count=1,
        wall_time=wall_time,
    )


class _Node:
    def __init__(
        self,
        lower: np.ndarray,
        upper: np.ndarray,
        depth: int,
        bound: float,
        basis: np.ndarray | None,
    ):
        self.lower = lower
        self.upper = upper
        self.depth = depth
        self.bound = bound
        self.basis = basis


def _seed(
    engine: SimplexEngine,
    problem: MilpProblem,
    starts: Sequence[Mapping[int, float]],
    lower: np.ndarray,
    upper: np.ndarray,
    integrality: float,
    deadline: float,
) -> np.ndarray | None:
    """
    Best complete solution among `starts`. Each start fixes the integer
    variables it names; an LP fills in everything else.
    """
    best: np.ndarray | None = None
    best_value = math.inf
    for number, start in enumerate(starts):
        fixed_lower, fixed_upper = lower.copy(), upper.copy()
        consistent = True
        for index, value in start.items():
            if not problem.integer[index]:
                continue
            if not lower[index] - integrality <= value <= upper[index] + integrality:
                consistent = False
                break
            fixed_lower[index] = fixed_upper[index] = round(value)
        if not consistent:
            logger.debug(f"{problem.name}: start {number} breaks a variable bound")
            continue
        try:
            result = engine.solve(fixed_lower, fixed_upper, deadline=deadline)
        except DeadlineExceeded:
            break
        except NumericalError as error:
            logger.debug(f"{problem.name}: start {number} skipped: {error.message}")
            continue
        if result.status != MilpStatus.OPTIMAL or result.values is None:
            logger.debug(f"{problem.name}: start {number} is {result.status}")
            continue
        integers = np.asarray(problem.integer, dtype=bool)
        values = result.values.copy()
        values[integers] = np.round(values[integers])
        value = float(engine.cost @ values)
        if value < best_value:
            best, best_value = values, value
    return best


def solve_milp(
    problem: MilpProblem,
    time_limit: float | None = None,
    gap_tolerance: float | None = None,
    settings: SolverSettings | None = None,
    starts: Sequence[Mapping[int, float]] = (),
) -> MilpSolution:
    """
    Branch-and-bound over LP relaxations.

    Until the search reaches an integer leaf better than the incumbent it
    dives depth first, taking the child on the side the branching variable
    rounds to. From then on open nodes are ordered by bound, then deeper first, then
    insertion order. Branching is on the most fractional integer variable
    (lowest index on ties), so identical inputs always explore identical
    trees.

    `starts` are known solutions given as integer variable values. The best
    one whose continuous remainder is LP-feasible becomes the first
    incumbent; LPs solved for starts are not counted as nodes.
    """
    settings = settings or SolverSettings()
    time_limit = settings.time_limit if time_limit is None else time_limit
    gap_tolerance = settings.gap_tolerance if gap_tolerance is None else gap_tolerance
    integrality = settings.integrality_tolerance
    validate_problem(problem)

    started = time.perf_counter()
    deadline = started + time_limit
    engine = SimplexEngine(problem, settings)
    cost = engine.cost
    integers = np.flatnonzero(np.asarray(problem.integer, dtype=bool))

    lower = engine.lower.copy()
    upper = engine.upper.copy()
    lower[integers] = np.ceil(lower[integers] - integrality)
    upper[integers] = np.floor(upper[integers] + integrality)

    incumbent: np.ndarray | None = None
    incumbent_value = math.inf
    if starts and time.perf_counter() <= deadline:
        incumbent = _seed(engine, problem, starts, lower, upper, integrality, deadline)
        if incumbent is not None:
            incumbent_value = float(cost @ incumbent)
            logger.debug(
                f"{problem.name}: starting incumbent {incumbent_value + problem.objective_offset:.6f}"
            )

    counter = itertools.count()
    heap: list[tuple[float, int, int, _Node]] = []
    stack = [_Node(lower, upper, 0, -math.inf, None)]
    diving = True

    def push(node: _Node) -> None:
        heapq.heappush(heap, (node.bound, -node.depth, next(counter), node))

    def open_bound() -> float:
        bounds = [node.bound for node in stack]
        if heap:
            bounds.append(heap[0][0])
        return min(bounds, default=math.inf)

    bound_log: list[float] = []
    nodes = 0
    timed_out = False
    proven_bound: float | None = None

    while stack or heap:
        if time.perf_counter() > deadline:
            timed_out = True
            break
        node = stack.pop() if diving else heapq.heappop(heap)[3]
        bound = node.bound
        if bound >= incumbent_value - gap_tolerance:
            if diving:
                continue
            proven_bound = bound
            break
        try:
            relaxation = engine.solve(
                node.lower, node.upper, warm=node.basis, deadline=deadline
            )
        except DeadlineExceeded:
            if diving:
                stack.append(node)
            else:
                push(node)
            timed_out = True
            break
        nodes += 1

        if relaxation.status == MilpStatus.UNBOUNDED:
            return MilpSolution(
                status=MilpStatus.UNBOUNDED,
                node_count=nodes,
                wall_time=time.perf_counter() - started,
                bound_log=bound_log,
            )
        if relaxation.status != MilpStatus.OPTIMAL or relaxation.values is None:
            continue
        assert relaxation.objective is not None
        value = relaxation.objective
        reached = max(bound, value)
        bound_log.append(min(reached, open_bound(), incumbent_value))
        if value >= incumbent_value - gap_tolerance:
            continue

        values = relaxation.values
        fractions = values[integers] - np.floor(values[integers])
        distance = np.minimum(fractions, 1.0 - fractions)
        if distance.size == 0 or distance.max() <= integrality:
            candidate = values.copy()
            candidate[integers] = np.round(candidate[integers])
            candidate_value = float(cost @ candidate)
            if candidate_value < incumbent_value:
                incumbent, incumbent_value = candidate, candidate_value
                logger.debug(
                    f"{problem.name}: incumbent {candidate_value + problem.objective_offset:.6f} "
                    f"at node {nodes}"
                )
            if diving:
                diving = False
                for waiting in stack:
                    push(waiting)
                stack.clear()
                logger.debug(f"{problem.name}: first integer leaf at node {nodes}")
            continue

        chosen = int(np.argmax(distance))
        branch = int(integers[chosen])
        down_upper = node.upper.copy()
        down_upper[branch] = math.floor(values[branch])
        up_lower = node.lower.copy()
        up_lower[branch] = math.ceil(values[branch])
        down = _Node(node.lower, down_upper, node.depth + 1, reached, relaxation.basis)
        up = _Node(up_lower, node.upper, node.depth + 1, reached, relaxation.basis)
        if diving:
            # the child explored first goes on top
            stack.extend((down, up) if fractions[chosen] >= 0.5 else (up, down))
        else:
            push(down)
            push(up)

    wall_time = time.perf_counter() - started
    offset = problem.objective_offset
    if incumbent is None:
        status = MilpStatus.TIME_LIMIT_NO_SOLUTION if timed_out else MilpStatus.INFEASIBLE
        logger.info(f"{problem.name}: {status} after {nodes} nodes in {wall_time:.2f}s")
        return MilpSolution(
            status=status, node_count=nodes, wall_time=wall_time, bound_log=bound_log
        )

    if timed_out:
        status = MilpStatus.TIME_LIMIT_FEASIBLE
        best_bound = min(open_bound(), incumbent_value)
        gap = incumbent_value - best_bound if math.isfinite(best_bound) else None
        shown = "unknown" if gap is None else f"{gap:.6f}"
        logger.warning(
            f"{problem.name}: time limit with incumbent "
            f"{incumbent_value + offset:.6f}, gap {shown}"
        )
    else:
        status = MilpStatus.OPTIMAL
        best_bound = incumbent_value if proven_bound is None else proven_bound
        gap = max(0.0, incumbent_value - best_bound)
        logger.info(
            f"{problem.name}: optimal {incumbent_value + offset:.6f} "
            f"after {nodes} nodes in {wall_time:.2f}s"
        )
    return MilpSolution(
        status=status,
        objective=incumbent_value + offset,
        assignment=incumbent.tolist(),
        gap=gap,
        node_count=nodes,
        wall_time=wall_time,
        bound_log=bound_log,
    )


def enumerate_milp(
    problem: MilpProblem, settings: SolverSettings | None = None
) -> MilpSolution:
    """
    Exhaustive oracle: try every integer assignment, solving an LP for the
    continuous remainder when there is one.
    """
    settings = settings or SolverSettings()
    validate_problem(problem)
    integers = [j for j, flag in enumerate(problem.integer) if flag]
    if len(integers) > ENUMERATION_MAX_INTEGERS:
        raise CapabilityError(
            f"enumeration supports at most {ENUMERATION_MAX_INTEGERS} integer variables, "
            f"got {len(integers)}"
        )
    domains = [
        range(math.ceil(problem.lower[j] - 1e-9), math.floor(problem.upper[j] + 1e-9) + 1)
        for j in integers
    ]
    total = math.prod(len(domain) for domain in domains)
    if total > ENUMERATION_MAX_ASSIGNMENTS:
        raise CapabilityError(f"enumeration space of {total} assignments is too large")

    started = time.perf_counter()
    if len(integers) == problem.num_variables:
        best, best_value = _enumerate_pure(problem, domains, settings)
    else:
        outcome = _enumerate_mixed(problem, integers, domains, settings)
        if outcome is None:
            return MilpSolution(
                status=MilpStatus.UNBOUNDED,
                node_count=total,
                wall_time=time.perf_counter() - started,
            )
        best, best_value = outcome

    wall_time = time.perf_counter() - started
    if best is None:
        return MilpSolution(status=MilpStatus.INFEASIBLE, node_count=total, wall_time=wall_time)
    return MilpSolution(
        status=MilpStatus.OPTIMAL,
        objective=best_value + problem.objective_offset,
        assignment=best.tolist(),
        gap=0.0,
        node_count=total,
        wall_time=wall_time,
    )


def _enumerate_pure(
    problem: MilpProblem, domains: list[range], settings: SolverSettings
) -> tuple[np.ndarray | None, float]:
    n = problem.num_variables
    tolerance = settings.feasibility_tolerance
    matrix = np.zeros((len(problem.rows), n))
    for i, row in enumerate(problem.rows):
        np.add.at(matrix[i], row.indices, row.coefficients)
    rhs = np.array([row.rhs for row in problem.rows], dtype=float)
    relations = np.array([row.relation for row in problem.rows], dtype=object)
    less = relations == "<="
    greater = relations == ">="
    equal = relations == "="
    cost = np.asarray(problem.objective, dtype=float)

    best: np.ndarray | None = None
    best_value = math.inf
    assignments = itertools.product(*domains)
    while chunk := list(itertools.islice(assignments, ENUMERATION_CHUNK)):
        points = np.array(chunk, dtype=float).reshape(len(chunk), n)
        lhs = points @ matrix.T
        feasible = np.all(lhs[:, less] <= rhs[less] + tolerance, axis=1)
        feasible &= np.all(lhs[:, greater] >= rhs[greater] - tolerance, axis=1)
        feasible &= np.all(np.abs(lhs[:, equal] - rhs[equal]) <= tolerance, axis=1)
        if not feasible.any():
            continue
        values = np.where(feasible, points @ cost, np.inf)
        index = int(np.argmin(values))
        if values[index] < best_value:
            best, best_value = points[index].copy(), float(values[index])
    return best, best_value


def _enumerate_mixed(
    problem: MilpProblem,
    integers: list[int],
    domains: list[range],
    settings: SolverSettings,
) -> tuple[np.ndarray | None, float] | None:
    engine = SimplexEngine(problem, settings)
    best: np.ndarray | None = None
    best_value = math.inf
    for assignment in itertools.product(*domains):
        lower = engine.lower.copy()
        upper = engine.upper.copy()
        lower[integers] = assignment
        upper[integers] = assignment
        result = engine.solve(lower, upper)
        if result.status == MilpStatus.UNBOUNDED:
            return None
        if result.status != MilpStatus.OPTIMAL or result.values is None:
            continue
        assert result.objective is not None
        if result.objective < best_value - 1e-12:
            best, best_value = result.values.copy(), result.objective
    return best, best_value


### LP-text dump

_UNSAFE = re.compile(r"[^A-Za-z0-9_.!\"#$%&()/,;?@`'{}|~]")


def _lp_name(name: str) -> str:
    cleaned = _UNSAFE.sub("_", name) or "_"
    if cleaned[0].isdigit() or cleaned[0] in ".eE":
        cleaned = f"_{cleaned}"
    return cleaned


def _lp_number(value: float) -> str:
    return f"{value:.17g}"


def _lp_terms(pairs: Iterable[tuple[float, str]]) -> str:
    parts = []
    for coefficient, name in pairs:
        sign = "-" if coefficient < 0 else "+"
        parts.append(f"{sign} {_lp_number(abs(coefficient))} {name}")
    lines = [" ".join(parts[k : k + 8]) for k in range(0, len(parts), 8)]
    return "\n   ".join(lines) if lines else "0"


def to_lp_text(problem: MilpProblem) -> str:
    """Render `problem` in the LP-text format documented in docs/lp-format.md."""
    names = [_lp_name(problem.variable_name(j)) for j in range(problem.num_variables)]
    out = [f"\\ Problem: {problem.name}"]
    if problem.objective_offset:
        out.append(f"\\ Objective offset: {_lp_number(problem.objective_offset)}")
    out.append("Minimize")
    objective = [(c, names[j]) for j, c in enumerate(problem.objective) if c]
    out.append(f" obj: {_lp_terms(objective)}")
    out.append("Subject To")
    for index, row in enumerate(problem.rows):
        label = _lp_name(row.name or f"r{index}")
        terms = [(c, names[j]) for j, c in zip(row.indices, row.coefficients) if c]
        out.append(f" {label}: {_lp_terms(terms)} {row.relation} {_lp_number(row.rhs)}")
    out.append("Bounds")
    for j, name in enumerate(names):
        lower, upper = problem.lower[j], problem.upper[j]
        if lower == upper:
            out.append(f" {name} = {_lp_number(lower)}")
        elif math.isinf(lower) and math.isinf(upper):
            out.append(f" {name} free")
        else:
            low = "-inf" if math.isinf(lower) else _lp_number(lower)
            high = "+inf" if math.isinf(upper) else _lp_number(upper)
            out.append(f" {low} <= {name} <= {high}")
    generals = [names[j] for j, flag in enumerate(problem.integer) if flag]
    if generals:
        out.append("Generals")
        out.extend(f" {name}" for name in generals)
    out.append("End")
    return "\n".join(out) + "\n"
