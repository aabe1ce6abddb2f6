"""Dense two-phase primal simplex.

Solves small linear programs exactly enough for desk-scale benchmarking work:
minimize c.x subject to rows with =, <= or >= sense, variable lower bounds
(default 0), optional upper bounds and free variables. Free variables are
split into positive/negative parts; finite nonzero upper bounds become extra
rows; a variable fixed by lb == ub is substituted out, which is how the
branch-and-bound layer pins variables to zero without growing the tableau.

Pivoting uses the Dantzig rule and falls back to Bland's rule after a stall
of degenerate pivots, so degenerate instances (Beale-style cycles) terminate.
Every optimal basis is re-solved densely from the original data before the
solution is accepted; the tableau is never the final authority.

A solver instance owns mutable working storage: confine each instance to one
thread. The problem objects themselves are immutable and shareable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, NumericalFailure

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
RESIDUAL_TOL = 1e-7
STALL_LIMIT = 50  # degenerate pivots tolerated before switching to Bland's rule

_LEQ, _GEQ, _EQ = "<=", ">=", "="


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """min costs.x  s.t.  matrix x (sense) rhs,  lb <= x <= ub."""

    costs: np.ndarray
    matrix: np.ndarray
    rhs: np.ndarray
    senses: tuple[str, ...]
    lb: Optional[np.ndarray] = None
    ub: Optional[np.ndarray] = None
    free: Optional[np.ndarray] = None

    def __post_init__(self):
        c = np.asarray(self.costs, dtype=float)
        b = np.asarray(self.rhs, dtype=float)
        A = np.asarray(self.matrix, dtype=float)
        if A.ndim != 2:
            A = A.reshape(b.size, -1)
        n = c.size
        if A.shape != (b.size, n):
            raise DimensionMismatch(
                f"matrix is {A.shape}, expected ({b.size}, {n}) from rhs and costs"
            )
        senses = tuple(self.senses)
        if len(senses) != b.size:
            raise DimensionMismatch("one sense per row is required")
        for sn in senses:
            if sn not in (_LEQ, _GEQ, _EQ):
                raise DimensionMismatch(f"unknown row sense {sn!r}")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise DimensionMismatch("costs, matrix and rhs must be finite")
        lb = np.zeros(n) if self.lb is None else np.asarray(self.lb, dtype=float)
        ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float)
        free = np.zeros(n, bool) if self.free is None else np.asarray(self.free, dtype=bool)
        if lb.size != n or ub.size != n or free.size != n:
            raise DimensionMismatch("bounds and free flags must match the variable count")
        lb = np.where(free, -np.inf, lb)
        ub = np.where(free, np.inf, ub)
        object.__setattr__(self, "costs", _readonly(c))
        object.__setattr__(self, "matrix", _readonly(A))
        object.__setattr__(self, "rhs", _readonly(b))
        object.__setattr__(self, "senses", senses)
        object.__setattr__(self, "lb", _readonly(lb))
        object.__setattr__(self, "ub", _readonly(ub))
        object.__setattr__(self, "free", _readonly(free))

    @property
    def n_vars(self) -> int:
        return self.costs.size

    @property
    def n_rows(self) -> int:
        return self.rhs.size

    def fixing(self, var_indices: Sequence[int]) -> "LinearProgram":
        """A copy with the given variables pinned to zero (used by branching)."""
        lb = np.array(self.lb)
        ub = np.array(self.ub)
        free = np.array(self.free)
        idx = list(var_indices)
        lb[idx] = 0.0
        ub[idx] = 0.0
        free[idx] = False
        return LinearProgram(self.costs, self.matrix, self.rhs, self.senses, lb, ub, free)


@dataclass(frozen=True, eq=False)
class LpSolution:
    status: str
    objective: float
    x: Optional[np.ndarray]
    basis: Optional[tuple[tuple[str, int], ...]]
    pivots: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status == OPTIMAL


class _StandardForm:
    """min c.t  s.t.  A t = b, t >= 0, built from a LinearProgram.

    Keeps the bookkeeping needed to map a standard-form point back onto the
    original variables. Column keys: ("x", j) main part of variable j,
    ("xn", j) negative part of a free variable, ("s", i) slack/surplus of
    row i, ("bs", j) slack of the bound row of variable j.
    """

    def __init__(self, p: LinearProgram):
        c = p.costs
        A = p.matrix
        b = p.rhs.copy()
        lb, ub = p.lb, p.ub
        n = p.n_vars

        cols: list[np.ndarray] = []
        ccosts: list[float] = []
        keys: list[tuple[str, int]] = []
        self.shift = np.zeros(n)  # x_j = shift_j + sign_j * t_j (0 columns when fixed)
        self.sign = np.ones(n)
        self.const = 0.0
        bound_rows: list[tuple[int, float]] = []  # (var, cap) meaning t_var <= cap

        for j in range(n):
            lo, hi = lb[j], ub[j]
            if lo == -np.inf and hi == np.inf:
                keys.append(("x", j)); cols.append(A[:, j]); ccosts.append(c[j])
                keys.append(("xn", j)); cols.append(-A[:, j]); ccosts.append(-c[j])
            elif lo == -np.inf:
                # x = hi - t with t >= 0
                self.shift[j] = hi
                self.sign[j] = -1.0
                self.const += c[j] * hi
                b = b - A[:, j] * hi
                keys.append(("x", j)); cols.append(-A[:, j]); ccosts.append(-c[j])
            else:
                if hi < lo - FEAS_TOL:
                    raise DimensionMismatch(f"variable {j} has ub < lb")
                self.shift[j] = lo
                if lo != 0.0:
                    self.const += c[j] * lo
                    b = b - A[:, j] * lo
                if hi == lo:
                    continue  # fixed: substituted out entirely
                keys.append(("x", j)); cols.append(A[:, j]); ccosts.append(c[j])
                if hi < np.inf:
                    bound_rows.append((j, hi - lo))

        key_index = {k: i for i, k in enumerate(keys)}
        n_struct = p.n_rows
        nrows = n_struct + len(bound_rows)
        M = np.zeros((nrows, len(keys)))
        if cols:
            M[:n_struct, :] = np.column_stack(cols)
        for r, (j, _cap) in enumerate(bound_rows):
            M[n_struct + r, key_index[("x", j)]] = 1.0

        rhs = np.concatenate([b, [cap for _, cap in bound_rows]])
        senses = list(p.senses) + [_LEQ] * len(bound_rows)

        # slack / surplus columns
        slack_cols = []
        for i, sense in enumerate(senses):
            if sense == _EQ:
                continue
            col = np.zeros(nrows)
            col[i] = 1.0 if sense == _LEQ else -1.0
            slack_cols.append(col)
            keys.append(("s", i) if i < n_struct else ("bs", bound_rows[i - n_struct][0]))
            ccosts.append(0.0)
        if slack_cols:
            M = np.hstack([M, np.column_stack(slack_cols)])

        # normalize to b >= 0
        neg = rhs < 0
        M[neg] *= -1.0
        rhs = np.where(neg, -rhs, rhs)

        self.A = M
        self.b = rhs
        self.c = np.asarray(ccosts)
        self.keys = keys
        self.key_index = {k: i for i, k in enumerate(keys)}

    def masked(self, drop_vars: frozenset[int]) -> "_StandardForm":
        """A copy with the main columns of the given variables removed.

        Only valid for variables with lower bound zero and no free split:
        removing their column is exactly pinning them to zero. This is how
        branch-and-bound derives child forms without rebuilding anything.
        """
        keep = [i for i, (kind, j) in enumerate(self.keys)
                if not (kind in ("x", "xn") and j in drop_vars)]
        sf = object.__new__(_StandardForm)
        sf.A = self.A[:, keep]
        sf.b = self.b
        sf.c = self.c[keep]
        sf.shift = self.shift
        sf.sign = self.sign
        sf.keys = [self.keys[i] for i in keep]
        sf.key_index = {k: i for i, k in enumerate(sf.keys)}
        return sf

    def recover(self, t: np.ndarray) -> np.ndarray:
        x = self.shift.copy()
        for i, (kind, j) in enumerate(self.keys):
            if kind == "x":
                x[j] += self.sign[j] * t[i]
            elif kind == "xn":
                x[j] -= t[i]
        return x


class SimplexSolver:
    """Two-phase primal simplex over a dense tableau."""

    def __init__(self, feas_tol: float = FEAS_TOL, opt_tol: float = OPT_TOL,
                 residual_tol: float = RESIDUAL_TOL, max_pivots: int | None = None):
        self.feas_tol = feas_tol
        self.opt_tol = opt_tol
        self.residual_tol = residual_tol
        self.max_pivots = max_pivots

    # -- public entry point ----------------------------------------------

    def solve(self, p: LinearProgram,
              basis: Sequence[tuple[str, int]] | None = None) -> LpSolution:
        return self.solve_standard(p, _StandardForm(p), basis)

    def solve_standard(self, p: LinearProgram, sf: _StandardForm,
                       basis: Sequence[tuple[str, int]] | None = None) -> LpSolution:
        """Solve a prebuilt standard form; ``p`` supplies the acceptance check."""
        if basis is not None:
            warm = self._try_warm(sf, basis)
            if warm is not None:
                return self._finish(p, sf, *warm)
        return self._cold(p, sf)

    # -- internals ---------------------------------------------------------

    def _cold(self, p: LinearProgram, sf: _StandardForm) -> LpSolution:
        A, b = sf.A, sf.b
        nrows, struct_cols = A.shape

        basis = [-1] * nrows
        for i, key in enumerate(sf.keys):
            if key[0] in ("s", "bs"):
                row = int(np.argmax(np.abs(A[:, i])))
                if A[row, i] > 0.5 and basis[row] == -1:
                    basis[row] = i
        art_rows = [r for r in range(nrows) if basis[r] == -1]
        n_art = len(art_rows)
        total_cols = struct_cols + n_art
        T = np.zeros((nrows, total_cols + 1))
        T[:, :struct_cols] = A
        T[:, -1] = b
        art_mask = np.zeros(total_cols, bool)
        for k, r in enumerate(art_rows):
            col = struct_cols + k
            T[r, col] = 1.0
            basis[r] = col
            art_mask[col] = True
        pivots = 0

        if n_art:
            # phase 1: minimize the sum of artificials
            z = np.zeros(total_cols + 1)
            z[art_mask.nonzero()[0]] = 1.0
            for r, bc in enumerate(basis):
                if art_mask[bc]:
                    z -= T[r]
            status, extra = self._iterate(T, z, basis, allowed=np.ones(total_cols, bool))
            pivots += extra
            if status != OPTIMAL:
                raise NumericalFailure("phase 1 did not terminate cleanly")
            if -z[-1] > 1e-7:
                return LpSolution(INFEASIBLE, np.inf, None, None, pivots)
            # drive leftover artificials out of the basis
            keep_rows = np.ones(nrows, bool)
            for r in range(nrows):
                if art_mask[basis[r]]:
                    row = T[r, :total_cols]
                    cand = np.nonzero((np.abs(row) > 1e-7) & ~art_mask)[0]
                    if cand.size:
                        self._pivot(T, r, int(cand[0]))
                        basis[r] = int(cand[0])
                        pivots += 1
                    else:
                        keep_rows[r] = False  # redundant row
            if not np.all(keep_rows):
                T = T[keep_rows]
                basis = [bc for r, bc in enumerate(basis) if keep_rows[r]]

        # phase 2; artificials stay in the tableau but can never re-enter
        z = np.zeros(total_cols + 1)
        z[:struct_cols] = sf.c
        for r, bc in enumerate(basis):
            if z[bc] != 0.0:
                z -= z[bc] * T[r]
        status, extra = self._iterate(T, z, basis, allowed=~art_mask)
        pivots += extra
        if status == UNBOUNDED:
            return LpSolution(UNBOUNDED, -np.inf, None, None, pivots)
        if status != OPTIMAL:
            raise NumericalFailure("phase 2 did not terminate cleanly")
        return self._finish(p, sf, T, basis, pivots)

    def _try_warm(self, sf: _StandardForm, basis_keys: Sequence[tuple[str, int]]):
        """Rebuild a tableau from a previous basis; None when incompatible."""
        nrows = sf.A.shape[0]
        idx = []
        for key in basis_keys:
            k = sf.key_index.get(tuple(key))
            if k is None:
                return None
            idx.append(k)
        if len(idx) != nrows or len(set(idx)) != nrows:
            return None
        B = sf.A[:, idx]
        try:
            xb = np.linalg.solve(B, sf.b)
            binv_a = np.linalg.solve(B, sf.A)
        except np.linalg.LinAlgError:
            return None
        if np.any(xb < -1e-7):
            return None
        T = np.hstack([binv_a, xb[:, None]])
        basis = list(idx)
        z = np.zeros(sf.A.shape[1] + 1)
        z[: sf.c.size] = sf.c
        for r, bc in enumerate(basis):
            if z[bc] != 0.0:
                z -= z[bc] * T[r]
        status, pivots = self._iterate(T, z, basis, allowed=np.ones(sf.A.shape[1], bool))
        if status != OPTIMAL:
            return None  # let the cold path re-derive unbounded verdicts
        return T, basis, pivots

    def _iterate(self, T: np.ndarray, z: np.ndarray, basis: list[int], allowed: np.ndarray):
        """Run the simplex loop in place; returns (status, pivot count)."""
        nrows = T.shape[0]
        ncols = allowed.size
        bland = False
        stall = 0
        pivots = 0
        cap = self.max_pivots or (20000 + 100 * (nrows + ncols))
        blocked = ~allowed
        while True:
            red = z[:ncols].copy()
            red[blocked] = np.inf
            if bland:
                elig = np.nonzero(red < -self.opt_tol)[0]
                if elig.size == 0:
                    return OPTIMAL, pivots
                q = int(elig[0])
            else:
                q = int(np.argmin(red))
                if red[q] >= -self.opt_tol:
                    return OPTIMAL, pivots
            col = T[:nrows, q]
            pos = np.flatnonzero(col > self.feas_tol)
            if pos.size == 0:
                return UNBOUNDED, pivots
            vals = T[pos, -1] / col[pos]
            rmin = vals.min()
            ties = pos[vals <= rmin + 1e-12]
            # smallest basis variable index among ties keeps Bland's rule valid
            r = int(min(ties, key=lambda i: basis[i]))
            if rmin <= 1e-12:
                stall += 1
                if stall > STALL_LIMIT:
                    bland = True
            else:
                stall = 0
            self._pivot(T, r, q)
            z -= z[q] * T[r]
            basis[r] = q
            pivots += 1
            if pivots > cap:
                raise NumericalFailure(f"simplex exceeded {cap} pivots without converging")

    @staticmethod
    def _pivot(T: np.ndarray, r: int, q: int) -> None:
        T[r] = T[r] / T[r, q]
        col = T[:, q].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        T[:, q] = 0.0
        T[r, q] = 1.0

    def _finish(self, p: LinearProgram, sf: _StandardForm, T: np.ndarray,
                basis: list[int], pivots: int) -> LpSolution:
        # dense re-solve of the final basis from pristine data; the tableau
        # only nominates the basis, it does not certify the numbers
        basis = [bc for bc in basis]
        if T.shape[0] == sf.A.shape[0]:
            A0, b0 = sf.A, sf.b
        else:
            keep = self._independent_rows(sf.A[:, basis])
            A0, b0 = sf.A[keep], sf.b[keep]
        try:
            xb = np.linalg.solve(A0[:, basis], b0)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("final basis is singular") from exc
        if np.any(xb < -self.residual_tol):
            raise NumericalFailure("final basis is primal infeasible beyond tolerance")
        t = np.zeros(sf.A.shape[1])
        t[basis] = np.clip(xb, 0.0, None)
        x = sf.recover(t)
        obj = float(p.costs @ x)

        # acceptance check on the original rows
        res = p.matrix @ x - p.rhs
        scale = 1.0 + np.abs(p.rhs)
        for i, sense in enumerate(p.senses):
            if sense == _EQ:
                bad = abs(res[i]) > self.residual_tol * scale[i]
            elif sense == _LEQ:
                bad = res[i] > self.residual_tol * scale[i]
            else:
                bad = -res[i] > self.residual_tol * scale[i]
            if bad:
                raise NumericalFailure(f"row {i} residual {res[i]:.3e} above tolerance")
        if np.any(x < p.lb - 1e-9) or np.any(x > p.ub + 1e-9):
            raise NumericalFailure("variable bound violated beyond tolerance")
        x = np.minimum(np.maximum(x, p.lb), p.ub)
        basis_keys = tuple(sf.keys[i] for i in basis if i < len(sf.keys))
        return LpSolution(OPTIMAL, obj, _readonly(x), basis_keys, pivots)

    @staticmethod
    def _independent_rows(B: np.ndarray) -> np.ndarray:
        """Greedily pick rows of B forming a square nonsingular block."""
        nb = B.shape[1]
        keep: list[int] = []
        rank = 0
        for i in range(B.shape[0]):
            if np.linalg.matrix_rank(B[keep + [i], :], tol=1e-10) > rank:
                keep.append(i)
                rank += 1
            if rank == nb:
                break
        mask = np.zeros(B.shape[0], bool)
        mask[keep] = True
        return mask


def solve_lp(p: LinearProgram, *, feas_tol: float = FEAS_TOL, opt_tol: float = OPT_TOL) -> LpSolution:
    """Solve a linear program from scratch."""
    return SimplexSolver(feas_tol=feas_tol, opt_tol=opt_tol).solve(p)


def solve_lp_warm(p: LinearProgram, basis: Sequence[tuple[str, int]] | None,
                  *, feas_tol: float = FEAS_TOL, opt_tol: float = OPT_TOL) -> LpSolution:
    """Solve starting from a previous basis, falling back to a cold solve."""
    return SimplexSolver(feas_tol=feas_tol, opt_tol=opt_tol).solve(p, basis=basis)
