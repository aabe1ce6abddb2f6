"""Frontier models: efficiency classification, layer peeling, closest
targets on the outer frontier, and two-stage target plans across a pair of
nested frontiers.

All technologies are variable-returns-to-scale: the attainable set is the
convex hull of the observed bundles plus free disposal (more input, less
output). A unit is rated efficient when the additive slack test over its
technology comes back zero, i.e. no feasible point dominates it with any
strict component.

Closest targets solve a slack-minimizing program whose multiplier block
forces the target onto a supporting hyperplane with strictly positive
weights; the complementarity between intensity and deviation variables is
enforced by SOS1 branching rather than big-M switches, so no magic constants
enter the formulation. The two-stage model chains two such blocks, linked so
the final target must dominate the intermediate one, and scalarizes the two
normalized gaps with a weight ``alpha``.

Model building is pure and every solve owns its own solver instance, so
independent units may be evaluated concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .core import Dataset, GapDecomposition, TargetVector
from .errors import EmptyStratum, LevelMismatch, SolverFailure
from .lp import INFEASIBLE, OPTIMAL, LinearProgram, SimplexSolver, solve_lp
from .milp import MilpProblem, MilpSolution, build_with_sos, solve_milp

#: additive-slack optimum below which a point counts as frontier-efficient
EFFICIENCY_TOL = 1e-7
#: reconstruction agreement required between slack form and hull form
RECONSTRUCTION_TOL = 1e-6

DEFAULT_ALPHAS = (0.0, 0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True)
class LayerAssignment:
    """Per-unit performance level plus the efficient set of each peel."""

    level_of: Mapping[str, int]
    efficient_sets: tuple[tuple[str, ...], ...]

    @property
    def depth(self) -> int:
        return len(self.efficient_sets)

    def level(self, dmu_id: str) -> int:
        return self.level_of[dmu_id]

    def units_at(self, level: int) -> tuple[str, ...]:
        return tuple(i for i, lv in self.level_of.items() if lv == level)


@dataclass(frozen=True)
class MultiplierCertificate:
    """Supporting-hyperplane weights certifying that a target sits on a face."""

    v: tuple[float, ...]
    u: tuple[float, ...]
    u0: float
    d: tuple[float, ...]


@dataclass(frozen=True)
class TargetPlan:
    """One unit's improvement plan: an intermediate and a final target."""

    dmu_id: str
    alpha: Optional[float]
    intermediate: TargetVector
    final: TargetVector
    slacks_I: tuple[tuple[float, ...], tuple[float, ...]]
    slacks_E: tuple[tuple[float, ...], tuple[float, ...]]
    lambda_I: Mapping[str, float]
    lambda_E: Mapping[str, float]
    gaps: GapDecomposition


# ---------------------------------------------------------------------------
# additive slack test and classification


def additive_gap(ds: Dataset, members: Sequence[str], point_inputs, point_outputs,
                 solver: SimplexSolver | None = None) -> float:
    """Optimum of the normalized additive slack program at an arbitrary point.

    Zero (within tolerance) certifies the point is Pareto-efficient in the
    technology spanned by ``members``; weights come from the point itself,
    which only scales the objective and never moves the zero set.
    """
    X, Y = ds.bundles(members)
    x0 = np.asarray(point_inputs, dtype=float)
    y0 = np.asarray(point_outputs, dtype=float)
    k = len(members)
    m, s = ds.m, ds.s
    # columns: intensities (k), input slacks (m), output slacks (s)
    n = k + m + s
    A = np.zeros((m + s + 1, n))
    A[:m, :k] = X.T
    A[:m, k:k + m] = np.eye(m)
    A[m:m + s, :k] = Y.T
    A[m:m + s, k + m:] = -np.eye(s)
    A[m + s, :k] = 1.0
    rhs = np.concatenate([x0, y0, [1.0]])
    costs = np.concatenate([np.zeros(k), -1.0 / x0, -1.0 / y0])
    sol = (solver or SimplexSolver()).solve(
        LinearProgram(costs, A, rhs, ("=",) * (m + s + 1)))
    if sol.status == INFEASIBLE:
        return np.inf  # the point is not even attainable in this technology
    if sol.status != OPTIMAL:
        raise SolverFailure(f"additive slack test ended with status {sol.status}")
    return max(0.0, -sol.objective)


def classify_efficient(ds: Dataset, members: Sequence[str] | None = None,
                       tol: float = EFFICIENCY_TOL) -> tuple[str, ...]:
    """Ids of the Pareto-efficient units within the given member technology."""
    members = tuple(members if members is not None else ds.ids)
    if not members:
        raise EmptyStratum("cannot classify an empty member set")
    if len(members) == 1:
        return members  # a lone unit spans its own frontier
    solver = SimplexSolver()
    out = []
    for i in members:
        rec = ds.record(i)
        if additive_gap(ds, members, rec.inputs, rec.outputs, solver) <= tol:
            out.append(i)
    return tuple(out)


def peel_layers(ds: Dataset, depth: int = 2) -> LayerAssignment:
    """Stratify units into nested frontier layers by repeated omission.

    Level k holds the units efficient after the first k-1 efficient sets
    have been removed; everything still unclassified after ``depth`` peels
    lands at level depth+1. Requesting more peels than the data can fill
    raises ``EmptyStratum``.
    """
    if depth < 1:
        raise EmptyStratum("peeling depth must be at least 1")
    remaining = list(ds.ids)
    level_of: dict[str, int] = {}
    efficient_sets: list[tuple[str, ...]] = []
    for level in range(1, depth + 1):
        if not remaining:
            raise EmptyStratum(
                f"no units left for level {level}; dataset supports only {level - 1} layers"
            )
        eff = classify_efficient(ds, remaining)
        for i in eff:
            level_of[i] = level
        efficient_sets.append(eff)
        remaining = [i for i in remaining if i not in eff]
    for i in remaining:
        level_of[i] = depth + 1
    ordered = {i: level_of[i] for i in ds.ids}
    return LayerAssignment(ordered, tuple(efficient_sets))


# ---------------------------------------------------------------------------
# closest-target model (single frontier)


class _ClosestLayout:
    """Column map of the single-frontier closest-target program."""

    def __init__(self, k: int, m: int, s: int):
        self.lam = list(range(0, k))
        self.s_in = list(range(k, k + m))
        self.s_out = list(range(k + m, k + m + s))
        self.v = list(range(k + m + s, k + 2 * m + s))
        self.u = list(range(k + 2 * m + s, k + 2 * m + 2 * s))
        self.u0 = k + 2 * m + 2 * s
        self.d = list(range(k + 2 * m + 2 * s + 1, 2 * k + 2 * m + 2 * s + 1))
        self.n = 2 * k + 2 * m + 2 * s + 1


def _closest_problem(X: np.ndarray, Y: np.ndarray, x0, y0, wx, wy) -> tuple[MilpProblem, _ClosestLayout]:
    k, m = X.shape
    s = Y.shape[1]
    lay = _ClosestLayout(k, m, s)
    rows = m + s + 1 + k + m + s
    A = np.zeros((rows, lay.n))
    rhs = np.zeros(rows)
    senses: list[str] = []
    r = 0
    for i in range(m):  # hull inputs: sum lam x + s_in = x0
        A[r, lay.lam] = X[:, i]
        A[r, lay.s_in[i]] = 1.0
        rhs[r] = x0[i]
        senses.append("=")
        r += 1
    for t in range(s):  # hull outputs: sum lam y - s_out = y0
        A[r, lay.lam] = Y[:, t]
        A[r, lay.s_out[t]] = -1.0
        rhs[r] = y0[t]
        senses.append("=")
        r += 1
    A[r, lay.lam] = 1.0
    rhs[r] = 1.0
    senses.append("=")
    r += 1
    for j in range(k):  # hyperplane rows: -v.Xj + u.Yj + u0 + d_j = 0
        A[r, lay.v] = -X[j]
        A[r, lay.u] = Y[j]
        A[r, lay.u0] = 1.0
        A[r, lay.d[j]] = 1.0
        senses.append("=")
        r += 1
    for i in range(m):  # v_i x0_i >= 1
        A[r, lay.v[i]] = x0[i]
        rhs[r] = 1.0
        senses.append(">=")
        r += 1
    for t in range(s):  # u_r y0_r >= 1
        A[r, lay.u[t]] = y0[t]
        rhs[r] = 1.0
        senses.append(">=")
        r += 1
    costs = np.zeros(lay.n)
    costs[lay.s_in] = wx
    costs[lay.s_out] = wy
    free = np.zeros(lay.n, bool)
    free[lay.u0] = True
    lp = LinearProgram(costs, A, rhs, tuple(senses), free=free)
    pairs = build_with_sos(lay.lam, lay.d)
    return MilpProblem(lp, pairs), lay


@dataclass(frozen=True)
class _Projection:
    """Full solution of one closest-target solve."""

    target_inputs: np.ndarray
    target_outputs: np.ndarray
    objective: float
    lambdas: np.ndarray
    s_in: np.ndarray
    s_out: np.ndarray
    certificate: MultiplierCertificate
    milp: MilpSolution


def _project_point(ds: Dataset, reference: Sequence[str], x0, y0, wx, wy,
                   node_limit: int) -> _Projection:
    reference = tuple(reference)
    if not reference:
        raise SolverFailure("reference set is empty")
    X, Y = ds.bundles(reference)
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    prob, lay = _closest_problem(X, Y, x0, y0, np.asarray(wx), np.asarray(wy))
    sol = solve_milp(prob, node_limit=node_limit)
    if sol.status != OPTIMAL:
        # a dominating efficient point always exists for valid data, so this
        # signals an internal defect, not a property of the input
        raise SolverFailure(
            f"closest-target program unexpectedly {sol.status}; this should be impossible"
        )
    x = np.asarray(sol.x)
    lam = x[lay.lam]
    d = x[lay.d]
    if np.max(np.minimum(np.abs(lam), np.abs(d)), initial=0.0) > 1e-6:
        raise SolverFailure("accepted solution violates intensity/deviation complementarity")
    s_in = x[lay.s_in]
    s_out = x[lay.s_out]
    tx = x0 - s_in
    ty = y0 + s_out
    hull_x = lam @ X
    hull_y = lam @ Y
    if (np.max(np.abs(hull_x - tx), initial=0.0) > RECONSTRUCTION_TOL
            or np.max(np.abs(hull_y - ty), initial=0.0) > RECONSTRUCTION_TOL):
        raise SolverFailure("slack-form target disagrees with its hull reconstruction")
    cert = MultiplierCertificate(tuple(x[lay.v]), tuple(x[lay.u]), float(x[lay.u0]), tuple(d))
    return _Projection(tx, ty, sol.objective, lam, s_in, s_out, cert, sol)


def closest_targets(ds: Dataset, reference: Sequence[str], dmu_id: str,
                    node_limit: int = 1_000_000) -> tuple[TargetVector, MultiplierCertificate, float]:
    """Closest dominating point of one unit on the frontier spanned by ``reference``.

    Distance is the normalized L1 gap with weights taken from the unit's own
    bundle. Returns the target, the supporting-hyperplane certificate and the
    optimal gap.
    """
    rec = ds.record(dmu_id)
    proj = _project_point(ds, reference, rec.inputs, rec.outputs,
                          1.0 / np.asarray(rec.inputs), 1.0 / np.asarray(rec.outputs),
                          node_limit)
    return TargetVector(tuple(proj.target_inputs), tuple(proj.target_outputs)), proj.certificate, proj.objective


# ---------------------------------------------------------------------------
# two-stage model (pair of nested frontiers)


class _TwoStepLayout:
    """Column map of the chained two-frontier program."""

    def __init__(self, k1: int, ke: int, m: int, s: int):
        off = 0
        def block(count):
            nonlocal off
            idx = list(range(off, off + count))
            off += count
            return idx
        self.lam_i = block(k1)
        self.si_in = block(m)
        self.si_out = block(s)
        self.v_i = block(m)
        self.u_i = block(s)
        self.u0_i = block(1)[0]
        self.d_i = block(k1)
        self.lam_e = block(ke)
        self.se_in = block(m)
        self.se_out = block(s)
        self.v_e = block(m)
        self.u_e = block(s)
        self.u0_e = block(1)[0]
        self.d_e = block(ke)
        self.n = off


def _two_step_problem(XI, YI, XE, YE, x0, y0, wx, wy, alpha) -> tuple[MilpProblem, _TwoStepLayout]:
    k1, m = XI.shape
    s = YI.shape[1]
    ke = XE.shape[0]
    lay = _TwoStepLayout(k1, ke, m, s)
    rows = 2 * (m + s + 1) + k1 + ke + 2 * (m + s)
    A = np.zeros((rows, lay.n))
    rhs = np.zeros(rows)
    senses: list[str] = []
    r = 0

    # inner-layer hull: sum lamI x + sI_in = x0 ; sum lamI y - sI_out = y0
    for i in range(m):
        A[r, lay.lam_i] = XI[:, i]; A[r, lay.si_in[i]] = 1.0; rhs[r] = x0[i]
        senses.append("="); r += 1
    for t in range(s):
        A[r, lay.lam_i] = YI[:, t]; A[r, lay.si_out[t]] = -1.0; rhs[r] = y0[t]
        senses.append("="); r += 1
    A[r, lay.lam_i] = 1.0; rhs[r] = 1.0; senses.append("="); r += 1
    for j in range(k1):
        A[r, lay.v_i] = -XI[j]; A[r, lay.u_i] = YI[j]
        A[r, lay.u0_i] = 1.0; A[r, lay.d_i[j]] = 1.0
        senses.append("="); r += 1
    for i in range(m):
        A[r, lay.v_i[i]] = x0[i]; rhs[r] = 1.0; senses.append(">="); r += 1
    for t in range(s):
        A[r, lay.u_i[t]] = y0[t]; rhs[r] = 1.0; senses.append(">="); r += 1

    # outer-layer hull linked through the intermediate slacks:
    # sum lamE x = (x0 - sI_in) - sE_in ; sum lamE y = (y0 + sI_out) + sE_out
    for i in range(m):
        A[r, lay.lam_e] = XE[:, i]; A[r, lay.si_in[i]] = 1.0; A[r, lay.se_in[i]] = 1.0
        rhs[r] = x0[i]; senses.append("="); r += 1
    for t in range(s):
        A[r, lay.lam_e] = YE[:, t]; A[r, lay.si_out[t]] = -1.0; A[r, lay.se_out[t]] = -1.0
        rhs[r] = y0[t]; senses.append("="); r += 1
    A[r, lay.lam_e] = 1.0; rhs[r] = 1.0; senses.append("="); r += 1
    for j in range(ke):
        A[r, lay.v_e] = -XE[j]; A[r, lay.u_e] = YE[j]
        A[r, lay.u0_e] = 1.0; A[r, lay.d_e[j]] = 1.0
        senses.append("="); r += 1
    for i in range(m):
        A[r, lay.v_e[i]] = x0[i]; rhs[r] = 1.0; senses.append(">="); r += 1
    for t in range(s):
        A[r, lay.u_e[t]] = y0[t]; rhs[r] = 1.0; senses.append(">="); r += 1

    costs = np.zeros(lay.n)
    costs[lay.si_in] = alpha * wx
    costs[lay.si_out] = alpha * wy
    costs[lay.se_in] = (1.0 - alpha) * wx
    costs[lay.se_out] = (1.0 - alpha) * wy
    free = np.zeros(lay.n, bool)
    free[lay.u0_i] = True
    free[lay.u0_e] = True
    lp = LinearProgram(costs, A, rhs, tuple(senses), free=free)
    pairs = build_with_sos(lay.lam_i + lay.lam_e, lay.d_i + lay.d_e)
    return MilpProblem(lp, pairs), lay


def _with_step2_cap(prob: MilpProblem, lay: _TwoStepLayout, wx, wy, cap: float,
                    new_alpha_costs: np.ndarray) -> MilpProblem:
    """Re-objective the program and bound the second-stage gap by ``cap``."""
    lp = prob.relaxation
    row = np.zeros(lp.n_vars)
    row[lay.se_in] = wx
    row[lay.se_out] = wy
    A = np.vstack([lp.matrix, row])
    rhs = np.concatenate([lp.rhs, [cap]])
    senses = lp.senses + ("<=",)
    lp2 = LinearProgram(new_alpha_costs, A, rhs, senses, lp.lb, lp.ub, lp.free)
    return MilpProblem(lp2, prob.sos1)


def two_step_targets(ds: Dataset, E: Sequence[str], E1: Sequence[str], dmu_id: str,
                     alpha: float, node_limit: int = 1_000_000) -> TargetPlan:
    """Sequenced targets for a unit sitting below both frontiers.

    ``alpha`` weighs the first-stage gap against the second-stage gap. The
    endpoints get special handling so they stay well defined: at alpha=1 the
    outer target is recomputed as the closest point to the intermediate
    target (evaluated as if it were a unit itself), and at alpha=0 the
    first-stage gap is minimized lexicographically subject to second-stage
    optimality.
    """
    E = tuple(E)
    E1 = tuple(E1)
    if not E or not E1:
        raise EmptyStratum("both frontier layers must be nonempty")
    if set(E) & set(E1):
        raise LevelMismatch("frontier layers must be disjoint")
    if dmu_id in E or dmu_id in E1:
        raise LevelMismatch(
            f"unit {dmu_id!r} lies on a frontier layer; two-stage plans are for units below both"
        )
    if not 0.0 <= alpha <= 1.0:
        raise LevelMismatch(f"alpha must lie in [0, 1], got {alpha}")

    rec = ds.record(dmu_id)
    x0 = np.asarray(rec.inputs)
    y0 = np.asarray(rec.outputs)
    wx = 1.0 / x0
    wy = 1.0 / y0
    XI, YI = ds.bundles(E1)
    XE, YE = ds.bundles(E)

    prob, lay = _two_step_problem(XI, YI, XE, YE, x0, y0, wx, wy, alpha)
    sol = solve_milp(prob, node_limit=node_limit)
    if sol.status != OPTIMAL:
        raise SolverFailure(f"two-stage program unexpectedly {sol.status}")

    if alpha == 0.0:
        # lexicographic refinement: keep the optimal second-stage gap, then
        # minimize the first-stage gap among those optima
        x = np.asarray(sol.x)
        cap = float(x[lay.se_in] @ wx + x[lay.se_out] @ wy) + 1e-9
        costs = np.zeros(prob.relaxation.n_vars)
        costs[lay.si_in] = wx
        costs[lay.si_out] = wy
        sol = solve_milp(_with_step2_cap(prob, lay, wx, wy, cap, costs),
                         node_limit=node_limit)
        if sol.status != OPTIMAL:
            raise SolverFailure("lexicographic refinement unexpectedly infeasible")

    x = np.asarray(sol.x)
    si_in, si_out = x[lay.si_in], x[lay.si_out]
    inter_x = x0 - si_in
    inter_y = y0 + si_out
    lam_i = x[lay.lam_i]

    if alpha == 1.0:
        # the outer block carried no objective weight: re-project the
        # intermediate target on the outer frontier, in its own scale
        proj = _project_point(ds, E, inter_x, inter_y, 1.0 / inter_x, 1.0 / inter_y,
                              node_limit)
        lam_e = proj.lambdas
        se_in, se_out = proj.s_in, proj.s_out
        final_x, final_y = proj.target_inputs, proj.target_outputs
    else:
        lam_e = x[lay.lam_e]
        se_in, se_out = x[lay.se_in], x[lay.se_out]
        final_x = inter_x - se_in
        final_y = inter_y + se_out

    _check_plan_algebra(XI, YI, XE, YE, lam_i, lam_e, inter_x, inter_y, final_x, final_y,
                        x[lay.d_i], None if alpha == 1.0 else x[lay.d_e])

    gaps = GapDecomposition(
        step1=float(si_in @ wx + si_out @ wy),
        step2=float(se_in @ wx + se_out @ wy),  # always in the unit's own scale
    )
    return TargetPlan(
        dmu_id=dmu_id,
        alpha=alpha,
        intermediate=TargetVector(tuple(inter_x), tuple(inter_y)),
        final=TargetVector(tuple(final_x), tuple(final_y)),
        slacks_I=(tuple(si_in), tuple(si_out)),
        slacks_E=(tuple(se_in), tuple(se_out)),
        lambda_I={i: float(l) for i, l in zip(E1, lam_i)},
        lambda_E={i: float(l) for i, l in zip(E, lam_e)},
        gaps=gaps,
    )


def _check_plan_algebra(XI, YI, XE, YE, lam_i, lam_e, inter_x, inter_y,
                        final_x, final_y, d_i, d_e) -> None:
    if abs(lam_i.sum() - 1.0) > RECONSTRUCTION_TOL or abs(lam_e.sum() - 1.0) > RECONSTRUCTION_TOL:
        raise SolverFailure("intensity weights do not sum to one")
    if (np.max(np.abs(lam_i @ XI - inter_x), initial=0.0) > RECONSTRUCTION_TOL
            or np.max(np.abs(lam_i @ YI - inter_y), initial=0.0) > RECONSTRUCTION_TOL):
        raise SolverFailure("intermediate target disagrees with its hull reconstruction")
    if (np.max(np.abs(lam_e @ XE - final_x), initial=0.0) > RECONSTRUCTION_TOL
            or np.max(np.abs(lam_e @ YE - final_y), initial=0.0) > RECONSTRUCTION_TOL):
        raise SolverFailure("final target disagrees with its hull reconstruction")
    if np.max(np.minimum(np.abs(lam_i), np.abs(d_i)), initial=0.0) > 1e-6:
        raise SolverFailure("inner-layer complementarity violated")
    if d_e is not None and np.max(np.minimum(np.abs(lam_e), np.abs(d_e)), initial=0.0) > 1e-6:
        raise SolverFailure("outer-layer complementarity violated")


def alpha_sweep(ds: Dataset, E: Sequence[str], E1: Sequence[str], dmu_id: str,
                alphas: Sequence[float] = DEFAULT_ALPHAS,
                node_limit: int = 1_000_000) -> list[TargetPlan]:
    """One plan per requested alpha, in input order."""
    return [two_step_targets(ds, E, E1, dmu_id, a, node_limit) for a in alphas]


def benchmark_level2(ds: Dataset, E: Sequence[str], dmu_id: str,
                     node_limit: int = 1_000_000) -> TargetPlan:
    """Single-stage plan for a unit already on the second frontier.

    The unit itself serves as the intermediate point (first-stage gap zero)
    and its closest target on the outer frontier is the final one.
    """
    E = tuple(E)
    if dmu_id in E:
        raise LevelMismatch(f"unit {dmu_id!r} is on the outer frontier already")
    rest = [i for i in ds.ids if i not in E]
    rec = ds.record(dmu_id)
    if additive_gap(ds, rest, rec.inputs, rec.outputs) > EFFICIENCY_TOL:
        raise LevelMismatch(f"unit {dmu_id!r} is not on the second frontier")
    x0 = np.asarray(rec.inputs)
    y0 = np.asarray(rec.outputs)
    proj = _project_point(ds, E, x0, y0, 1.0 / x0, 1.0 / y0, node_limit)
    return TargetPlan(
        dmu_id=dmu_id,
        alpha=None,
        intermediate=TargetVector.of(rec),
        final=TargetVector(tuple(proj.target_inputs), tuple(proj.target_outputs)),
        slacks_I=(tuple(np.zeros(ds.m)), tuple(np.zeros(ds.s))),
        slacks_E=(tuple(proj.s_in), tuple(proj.s_out)),
        lambda_I={dmu_id: 1.0},
        lambda_E={i: float(l) for i, l in zip(E, proj.lambdas)},
        gaps=GapDecomposition(step1=0.0, step2=proj.objective),
    )
