"""Branch-and-bound over LP relaxations with SOS Type 1 branching.

An SOS1 pair names two variables of which at most one may be nonzero in any
acceptable solution. Instead of big-M constants and binary switches, the
search branches directly on the most violated pair, fixing one member to
zero in each child. Nodes are explored depth-first; when a node spawns two
children, the child with the better relaxation bound is explored first.

The produced optimum carries a certificate gap (incumbent minus the best
bound that was pruned), which stays at floating-point noise level because
nodes are only pruned when they provably cannot improve the incumbent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, NodeLimitExceeded, NumericalFailure
from .lp import INFEASIBLE, OPTIMAL, UNBOUNDED, LinearProgram, SimplexSolver, _StandardForm

#: a pair counts as complementary when its smaller member is below this
COMPLEMENTARITY_TOL = 1e-7
#: children whose bound cannot beat the incumbent by more than this are cut
PRUNE_TOL = 1e-9

DEFAULT_NODE_LIMIT = 1_000_000


@dataclass(frozen=True)
class Sos1Pair:
    """Two variable indices of which at most one may be nonzero."""

    first_var: int
    second_var: int
    label: str = ""

    def __post_init__(self):
        if self.first_var == self.second_var:
            raise DimensionMismatch("an SOS1 pair needs two distinct variables")


@dataclass(frozen=True, eq=False)
class MilpProblem:
    relaxation: LinearProgram
    sos1: tuple[Sos1Pair, ...]

    def __post_init__(self):
        object.__setattr__(self, "sos1", tuple(self.sos1))
        n = self.relaxation.n_vars
        seen: set[int] = set()
        for pair in self.sos1:
            for v in (pair.first_var, pair.second_var):
                if not 0 <= v < n:
                    raise DimensionMismatch(f"SOS1 variable index {v} out of range")
                if v in seen:
                    raise DimensionMismatch(f"variable {v} appears in more than one SOS1 pair")
                seen.add(v)


@dataclass(frozen=True, eq=False)
class MilpSolution:
    status: str
    objective: float
    x: Optional[np.ndarray]
    node_count: int
    gap: float

    @property
    def is_optimal(self) -> bool:
        return self.status == OPTIMAL


def build_with_sos(vars_lambda: Sequence[int], vars_d: Sequence[int],
                   labels: Sequence[str] | None = None) -> tuple[Sos1Pair, ...]:
    """One SOS1 pair per (intensity, deviation) variable couple."""
    if len(vars_lambda) != len(vars_d):
        raise DimensionMismatch(
            f"{len(vars_lambda)} intensity variables vs {len(vars_d)} deviation variables"
        )
    if labels is not None and len(labels) != len(vars_lambda):
        raise DimensionMismatch("one label per pair is required")
    labels = labels or [""] * len(vars_lambda)
    return tuple(Sos1Pair(a, b, lab) for a, b, lab in zip(vars_lambda, vars_d, labels))


def _violation(x: np.ndarray, pairs: tuple[Sos1Pair, ...]) -> tuple[float, int]:
    """Largest min(|first|,|second|) over pairs and the index attaining it.

    Ties resolve to the lowest pair index (argmax keeps the first maximum),
    which keeps runs deterministic.
    """
    worst = -1.0
    arg = -1
    for k, pair in enumerate(pairs):
        v = min(abs(x[pair.first_var]), abs(x[pair.second_var]))
        if v > worst + 1e-15:
            worst = v
            arg = k
    return worst, arg


def solve_milp(p: MilpProblem, node_limit: int = DEFAULT_NODE_LIMIT,
               comp_tol: float = COMPLEMENTARITY_TOL,
               solver: SimplexSolver | None = None) -> MilpSolution:
    """Globally minimize the relaxation subject to all SOS1 conditions."""
    solver = solver or SimplexSolver()
    pairs = p.sos1
    root = p.relaxation

    lb = root.lb
    free = root.free
    for pair in pairs:
        for v in (pair.first_var, pair.second_var):
            if lb[v] != 0.0 or free[v]:
                raise DimensionMismatch(
                    "SOS1 members must be nonnegative variables with lower bound zero"
                )

    # the standard form is built once; every node is a column mask over it
    base_sf = _StandardForm(root)

    best_obj = np.inf
    best_x: Optional[np.ndarray] = None
    nodes = 0
    pruned_bound = np.inf  # smallest bound discarded by the incumbent test

    # LIFO stack of (fixed variable set, warm basis, parent bound): depth first
    stack: list[tuple[frozenset[int], object, float]] = [(frozenset(), None, -np.inf)]

    while stack:
        fixed, basis, parent_bound = stack.pop()
        if parent_bound >= best_obj - PRUNE_TOL:
            # the subtree cannot improve on the incumbent; no LP needed
            pruned_bound = min(pruned_bound, parent_bound)
            continue
        nodes += 1
        if nodes > node_limit:
            raise NodeLimitExceeded(f"branch-and-bound exceeded {node_limit} nodes")
        sf = base_sf.masked(fixed) if fixed else base_sf
        if basis is not None and any(key[1] in fixed for key in basis if key[0] in ("x", "xn")):
            basis = None  # the parent basis used a column this node removed
        sol = solver.solve_standard(root, sf, basis=basis)
        if sol.status == INFEASIBLE:
            continue
        if sol.status == UNBOUNDED:
            raise NumericalFailure("relaxation is unbounded; SOS1 search cannot bound it")
        x = np.array(sol.x)
        x[list(fixed)] = 0.0
        if sol.objective >= best_obj - PRUNE_TOL:
            pruned_bound = min(pruned_bound, sol.objective)
            continue
        worst, arg = _violation(x, pairs)
        if worst <= comp_tol:
            best_obj = sol.objective
            best_x = x
            continue
        pair = pairs[arg]
        small, big = pair.first_var, pair.second_var
        if abs(x[small]) > abs(x[big]):
            small, big = big, small
        # explore the child that zeroes the smaller member first: the parent
        # point is closer to that restriction, so incumbents appear sooner
        stack.append((fixed | {big}, sol.basis, sol.objective))
        stack.append((fixed | {small}, sol.basis, sol.objective))

    if best_x is None:
        return MilpSolution(INFEASIBLE, np.inf, None, nodes, np.inf)
    gap = max(0.0, best_obj - min(pruned_bound, best_obj))
    return MilpSolution(OPTIMAL, best_obj, _frozen(best_x), nodes, gap)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a
