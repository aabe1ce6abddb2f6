"""Brute-force certification of target programs on desk-scale instances.

The frontier of a convex technology is a union of faces, each spanned by a
subset of the layer's efficient units. A subset spans an efficient face
exactly when its equal-weight barycenter passes the zero-additive-slack
test: a relative-interior point lies in a face only if every generator does.
Enumerating those subsets and optimizing a small LP over each face (or face
pair, for two-stage plans) yields the global optimum with no branching at
all, which makes it an independent check on the SOS1 search.

Hard size caps keep the enumeration honest: a partial enumeration would
silently corrupt the ground truth, so oversized inputs are errors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Dataset, TargetVector
from .dea import EFFICIENCY_TOL, additive_gap
from .errors import SolverFailure, TooLarge
from .lp import OPTIMAL, INFEASIBLE, LinearProgram, SimplexSolver

MAX_FACE_MEMBERS = 12
MAX_TWO_STEP_MEMBERS = 10


@dataclass(frozen=True)
class FaceCandidate:
    """A subset of efficient units whose hull lies entirely on the frontier."""

    member_ids: tuple[str, ...]
    barycenter: TargetVector


def enumerate_faces(ds: Dataset, layer_set: Sequence[str]) -> list[FaceCandidate]:
    """All nonempty subsets of the layer spanning an efficient face.

    Certification is downward closed (a subset of a face spans a sub-face),
    so the search grows subsets apriori-style and never expands a failed one.
    """
    layer = tuple(layer_set)
    if len(layer) > MAX_FACE_MEMBERS:
        raise TooLarge(f"face enumeration is capped at {MAX_FACE_MEMBERS} units, got {len(layer)}")
    if not layer:
        return []
    X, Y = ds.bundles(layer)
    solver = SimplexSolver()

    def certify(subset: tuple[int, ...]) -> FaceCandidate | None:
        bx = X[list(subset)].mean(axis=0)
        by = Y[list(subset)].mean(axis=0)
        if additive_gap(ds, layer, bx, by, solver) <= EFFICIENCY_TOL:
            return FaceCandidate(tuple(layer[i] for i in subset),
                                 TargetVector(tuple(bx), tuple(by)))
        return None

    found: list[FaceCandidate] = []
    current: list[tuple[int, ...]] = []
    for i in range(len(layer)):
        cand = certify((i,))
        if cand is not None:
            found.append(cand)
            current.append((i,))
    certified_sets = {c for c in current}
    while current:
        nxt: list[tuple[int, ...]] = []
        for subset in current:
            last = subset[-1]
            for j in range(last + 1, len(layer)):
                grown = subset + (j,)
                # every (k-1)-subset of a face is itself certified
                if any(grown[:t] + grown[t + 1:] not in certified_sets for t in range(len(grown))):
                    continue
                cand = certify(grown)
                if cand is not None:
                    found.append(cand)
                    nxt.append(grown)
                    certified_sets.add(grown)
        current = nxt
    return found


def _maximal_faces(faces: list[FaceCandidate]) -> list[tuple[str, ...]]:
    sets = [frozenset(f.member_ids) for f in faces]
    out = []
    for k, s in enumerate(sets):
        if not any(s < t for t in sets):
            out.append(faces[k].member_ids)
    return out


def _face_lp(X: np.ndarray, Y: np.ndarray, x0, y0, wx, wy, solver: SimplexSolver):
    """min gap(point -> hull point) s.t. the hull point dominates ``point``.

    Returns (target_x, target_y, gap) or None when no point of the face
    dominates the evaluated one.
    """
    k = X.shape[0]
    m, s = X.shape[1], Y.shape[1]
    # gap(mu) = const + mu.(Y wy - X wx); the constant never moves the argmin
    costs = Y @ wy - X @ wx
    A = np.zeros((1 + m + s, k))
    A[0] = 1.0
    A[1:1 + m] = X.T
    A[1 + m:] = Y.T
    rhs = np.concatenate([[1.0], x0, y0])
    senses = ("=",) + ("<=",) * m + (">=",) * s
    sol = solver.solve(LinearProgram(costs, A, rhs, senses))
    if sol.status == INFEASIBLE:
        return None
    if sol.status != OPTIMAL:
        raise SolverFailure(f"face program ended with status {sol.status}")
    mu = np.asarray(sol.x)
    tx = mu @ X
    ty = mu @ Y
    gap = float((x0 - tx) @ wx + (ty - y0) @ wy)
    return tx, ty, gap


def _closest_over_faces(ds: Dataset, faces: list[tuple[str, ...]], x0, y0, wx, wy):
    solver = SimplexSolver()
    best = None
    for ids in faces:
        X, Y = ds.bundles(ids)
        res = _face_lp(X, Y, x0, y0, wx, wy, solver)
        if res is None:
            continue
        if best is None or res[2] < best[2] - 1e-12:
            best = res
    if best is None:
        raise SolverFailure("no frontier face dominates the evaluated point")
    return best


def oracle_closest(ds: Dataset, layer_set: Sequence[str], dmu_id: str) -> tuple[TargetVector, float]:
    """Certified closest-target optimum by explicit enumeration of faces."""
    rec = ds.record(dmu_id)
    x0 = np.asarray(rec.inputs)
    y0 = np.asarray(rec.outputs)
    faces = _maximal_faces(enumerate_faces(ds, layer_set))
    tx, ty, gap = _closest_over_faces(ds, faces, x0, y0, 1.0 / x0, 1.0 / y0)
    return TargetVector(tuple(tx), tuple(ty)), gap


def _pair_lp(X1, Y1, X2, Y2, x0, y0, wx, wy, alpha, solver,
             step2_cap: float | None = None):
    """Joint program over one face pair: intermediate in hull 1 dominating the
    point, final in hull 2 dominating the intermediate; scalarized objective.

    Returns (inter_x, inter_y, final_x, final_y, g1, g2) or None.
    """
    k1, k2 = X1.shape[0], X2.shape[0]
    m, s = X1.shape[1], Y1.shape[1]
    # g1 = const + phi1.mu and g2 = phi2.nu - phi1.mu, so the scalarized
    # objective collapses to (2a-1) phi1.mu + (1-a) phi2.nu plus a constant
    phi1 = Y1 @ wy - X1 @ wx
    phi2 = Y2 @ wy - X2 @ wx
    costs = np.concatenate([(2.0 * alpha - 1.0) * phi1, (1.0 - alpha) * phi2])
    rows = 2 + m + s + m + s + (1 if step2_cap is not None else 0)
    A = np.zeros((rows, k1 + k2))
    rhs = np.zeros(rows)
    senses: list[str] = []
    r = 0
    A[r, :k1] = 1.0; rhs[r] = 1.0; senses.append("="); r += 1
    A[r, k1:] = 1.0; rhs[r] = 1.0; senses.append("="); r += 1
    for i in range(m):  # X1 mu <= x0
        A[r, :k1] = X1[:, i]; rhs[r] = x0[i]; senses.append("<="); r += 1
    for t in range(s):  # Y1 mu >= y0
        A[r, :k1] = Y1[:, t]; rhs[r] = y0[t]; senses.append(">="); r += 1
    for i in range(m):  # X2 nu <= X1 mu
        A[r, :k1] = -X1[:, i]; A[r, k1:] = X2[:, i]; senses.append("<="); r += 1
    for t in range(s):  # Y2 nu >= Y1 mu
        A[r, :k1] = -Y1[:, t]; A[r, k1:] = Y2[:, t]; senses.append(">="); r += 1
    if step2_cap is not None:
        # g2(mu, nu) = phi2.nu - phi1.mu <= cap
        A[r, :k1] = -phi1; A[r, k1:] = phi2; rhs[r] = step2_cap; senses.append("<="); r += 1
    sol = solver.solve(LinearProgram(costs, A, rhs, tuple(senses)))
    if sol.status == INFEASIBLE:
        return None
    if sol.status != OPTIMAL:
        raise SolverFailure(f"face-pair program ended with status {sol.status}")
    z = np.asarray(sol.x)
    mu, nu = z[:k1], z[k1:]
    ix, iy = mu @ X1, mu @ Y1
    fx, fy = nu @ X2, nu @ Y2
    g1 = float((x0 - ix) @ wx + (iy - y0) @ wy)
    g2 = float((ix - fx) @ wx + (fy - iy) @ wy)
    return ix, iy, fx, fy, g1, g2


def oracle_two_step(ds: Dataset, E: Sequence[str], E1: Sequence[str], dmu_id: str,
                    alpha: float) -> tuple[TargetVector, TargetVector, float]:
    """Certified two-stage optimum by enumeration over pairs of frontier faces.

    Applies the same endpoint conventions as the model it certifies: closest
    re-projection of the intermediate target at alpha=1, lexicographic
    refinement of the first-stage gap at alpha=0.
    """
    E = tuple(E)
    E1 = tuple(E1)
    if len(E) > MAX_TWO_STEP_MEMBERS or len(E1) > MAX_TWO_STEP_MEMBERS:
        raise TooLarge(f"two-stage certification is capped at {MAX_TWO_STEP_MEMBERS} units per layer")
    rec = ds.record(dmu_id)
    x0 = np.asarray(rec.inputs)
    y0 = np.asarray(rec.outputs)
    wx, wy = 1.0 / x0, 1.0 / y0

    if additive_gap(ds, E, x0, y0) <= EFFICIENCY_TOL:
        # already on the outer frontier: nothing to improve
        tv = TargetVector(tuple(x0), tuple(y0))
        return tv, tv, 0.0

    faces_outer = _maximal_faces(enumerate_faces(ds, E))
    faces_inner = _maximal_faces(enumerate_faces(ds, E1))
    solver = SimplexSolver()

    if alpha == 1.0:
        ix, iy, g1 = _closest_over_faces(ds, faces_inner, x0, y0, wx, wy)
        fx, fy, _ = _closest_over_faces(ds, faces_outer, ix, iy, 1.0 / ix, 1.0 / iy)
        return (TargetVector(tuple(ix), tuple(iy)), TargetVector(tuple(fx), tuple(fy)), g1)

    def sweep(a: float, cap: float | None):
        best = None
        for ids1 in faces_inner:
            X1, Y1 = ds.bundles(ids1)
            for ids2 in faces_outer:
                X2, Y2 = ds.bundles(ids2)
                res = _pair_lp(X1, Y1, X2, Y2, x0, y0, wx, wy, a, solver, cap)
                if res is None:
                    continue
                score = a * res[4] + (1.0 - a) * res[5]
                if best is None or score < best[0] - 1e-12:
                    best = (score, res)
        if best is None:
            raise SolverFailure("no face pair admits a dominating chain")
        return best

    if alpha == 0.0:
        score, res = sweep(0.0, None)
        cap = res[5] + 1e-9
        # among second-stage optima, minimize the first-stage gap
        _, res = sweep(1.0, cap)
        obj = res[5]
    else:
        _, res = sweep(alpha, None)
        obj = alpha * res[4] + (1.0 - alpha) * res[5]
    ix, iy, fx, fy = res[0], res[1], res[2], res[3]
    return TargetVector(tuple(ix), tuple(iy)), TargetVector(tuple(fx), tuple(fy)), float(obj)
