"""Dense linear programs and a bounded-variable revised simplex solver.

Every LP handled here is a minimization

    min  c @ x + offset
    s.t. A[r] @ x  (<=, =, >=)  b[r]
         lower <= x <= upper

with possibly infinite bounds.  Internally each row gets a logical variable
``s_r = A[r] @ x`` whose bounds encode the row sense, so the working system is
``A x - s = 0`` with every column boxed.  Phase 1 uses artificial columns,
phase 2 is a primal simplex with Dantzig pricing that falls back to Bland's
rule when degenerate pivots pile up.  A dual simplex is used when a warm-start
basis is dual but not primal feasible, which is the common case inside
branch-and-bound.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

LE, EQ, GE = "<=", "=", ">="
SENSES = (LE, EQ, GE)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL = "numerical breakdown"

# nonbasic status codes
_BASIC, _AT_LOWER, _AT_UPPER, _FREE, _FIXED = 0, 1, 2, 3, 4


@dataclass(frozen=True)
class Tolerances:
    feas: float = 1e-8
    gap: float = 1e-7
    cs: float = 1e-7
    dual: float = 1e-9
    pivot: float = 1e-9


DEFAULT_TOL = Tolerances()


@dataclass(eq=False)
class LinearProgram:
    c: np.ndarray
    A: np.ndarray
    senses: tuple
    b: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    var_names: tuple = ()
    row_names: tuple = ()
    offset: float = 0.0

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        n = self.c.size
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        self.lower = np.asarray(self.lower, dtype=float).reshape(-1)
        self.upper = np.asarray(self.upper, dtype=float).reshape(-1)
        self.senses = tuple(self.senses)
        m = self.A.shape[0]
        if self.b.size != m or len(self.senses) != m:
            raise ValueError("row count mismatch between A, b and senses")
        if self.lower.size != n or self.upper.size != n:
            raise ValueError("bound vectors must have one entry per variable")
        bad = [s for s in self.senses if s not in SENSES]
        if bad:
            raise ValueError(f"unknown row sense {bad[0]!r}")
        if np.any(self.lower > self.upper):
            j = int(np.argmax(self.lower > self.upper))
            raise ValueError(f"lower > upper for variable {j}")
        if np.any(np.isnan(self.A)) or np.any(np.isnan(self.b)) or np.any(np.isnan(self.c)):
            raise ValueError("NaN in LP data")
        if not self.var_names:
            self.var_names = tuple(f"x{j}" for j in range(n))
        if not self.row_names:
            self.row_names = tuple(f"r{i}" for i in range(m))

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    def with_bounds(self, lower=None, upper=None) -> "LinearProgram":
        return LinearProgram(
            self.c, self.A, self.senses, self.b,
            self.lower if lower is None else lower,
            self.upper if upper is None else upper,
            self.var_names, self.row_names, self.offset,
        )

    def with_rows(self, A_new, senses_new, b_new, names_new=()) -> "LinearProgram":
        A_new = np.atleast_2d(np.asarray(A_new, dtype=float))
        names = tuple(names_new) or tuple(
            f"r{i}" for i in range(self.n_rows, self.n_rows + A_new.shape[0]))
        return LinearProgram(
            self.c, np.vstack([self.A, A_new]), self.senses + tuple(senses_new),
            np.concatenate([self.b, np.asarray(b_new, dtype=float)]),
            self.lower, self.upper, self.var_names, self.row_names + names, self.offset,
        )

    def objective_value(self, x) -> float:
        return float(self.c @ x + self.offset)

    def row_violation(self, x) -> np.ndarray:
        """Per-row amount by which ``x`` violates its requirement (0 if met)."""
        act = self.A @ x
        out = np.zeros(self.n_rows)
        for i, s in enumerate(self.senses):
            if s == LE:
                out[i] = max(0.0, act[i] - self.b[i])
            elif s == GE:
                out[i] = max(0.0, self.b[i] - act[i])
            else:
                out[i] = abs(act[i] - self.b[i])
        return out


class LpBuilder:
    """Incremental construction of a LinearProgram with named columns and rows."""

    def __init__(self):
        self._names: list[str] = []
        self._index: dict[str, int] = {}
        self._lo: list[float] = []
        self._hi: list[float] = []
        self._cost: list[float] = []
        self._rows: list[dict[int, float]] = []
        self._senses: list[str] = []
        self._rhs: list[float] = []
        self._row_names: list[str] = []
        self.offset = 0.0

    def add_var(self, name, lo=0.0, hi=math.inf, cost=0.0) -> int:
        if name in self._index:
            raise ValueError(f"duplicate variable {name}")
        j = len(self._names)
        self._names.append(name)
        self._index[name] = j
        self._lo.append(float(lo))
        self._hi.append(float(hi))
        self._cost.append(float(cost))
        return j

    def var(self, name) -> int:
        return self._index[name]

    def add_row(self, coeffs, sense, rhs, name=None) -> int:
        row: dict[int, float] = {}
        for j, a in coeffs.items() if isinstance(coeffs, dict) else coeffs:
            if a != 0.0:
                row[j] = row.get(j, 0.0) + float(a)
        self._rows.append(row)
        self._senses.append(sense)
        self._rhs.append(float(rhs))
        self._row_names.append(name or f"r{len(self._rows) - 1}")
        return len(self._rows) - 1

    @property
    def n_vars(self) -> int:
        return len(self._names)

    @property
    def n_rows(self) -> int:
        return len(self._rows)

    def build(self) -> LinearProgram:
        n, m = len(self._names), len(self._rows)
        A = np.zeros((m, n))
        for i, row in enumerate(self._rows):
            for j, a in row.items():
                A[i, j] = a
        return LinearProgram(
            np.array(self._cost), A, tuple(self._senses), np.array(self._rhs),
            np.array(self._lo), np.array(self._hi),
            tuple(self._names), tuple(self._row_names), self.offset,
        )


@dataclass(frozen=True)
class Basis:
    """Warm-start information: basic column list plus nonbasic statuses.

    Columns ``0..n-1`` are structural, ``n + r`` is the logical of row ``r``.
    """
    n_vars: int
    n_rows: int
    basic: tuple
    status: tuple

    def extended(self, n_rows: int) -> "Basis":
        """Basis for the same LP with extra rows appended (their logicals basic)."""
        if n_rows < self.n_rows:
            raise ValueError("cannot shrink a basis")
        extra = tuple(range(self.n_vars + self.n_rows, self.n_vars + n_rows))
        return Basis(self.n_vars, n_rows, self.basic + extra,
                     self.status + (_BASIC,) * len(extra))


@dataclass
class LpSolution:
    status: str
    objective: float = math.nan
    x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    reduced_costs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dual_objective: float = math.nan
    iterations: int = 0
    basis: Basis | None = None

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def dual_objective(lp: LinearProgram, y, d) -> float:
    """Dual objective for row duals ``y`` and reduced costs ``d``.

    Each reduced cost is charged against the bound its sign selects; a
    nonzero reduced cost pointing at an infinite bound gives ``-inf``.
    """
    for i, s in enumerate(lp.senses):
        if (s == LE and y[i] > 0) or (s == GE and y[i] < 0):
            return -math.inf
    val = float(lp.b @ y) + lp.offset
    for j, dj in enumerate(d):
        if dj > 0:
            if math.isinf(lp.lower[j]):
                return -math.inf
            val += dj * lp.lower[j]
        elif dj < 0:
            if math.isinf(lp.upper[j]):
                return -math.inf
            val += dj * lp.upper[j]
    return val


class _Simplex:
    def __init__(self, lp: LinearProgram, tol: Tolerances, max_iter: int | None):
        self.lp = lp
        self.tol = tol
        n, m = lp.n_vars, lp.n_rows
        self.n, self.m = n, m
        self.K = np.hstack([lp.A, -np.eye(m)])
        lo_s = np.where(np.array([s != LE for s in lp.senses], dtype=bool), lp.b, -np.inf)
        hi_s = np.where(np.array([s != GE for s in lp.senses], dtype=bool), lp.b, np.inf)
        self.lo = np.concatenate([lp.lower, lo_s])
        self.hi = np.concatenate([lp.upper, hi_s])
        self.cost = np.concatenate([lp.c, np.zeros(m)])
        self.max_iter = max_iter or 50 * (n + m) + 1000
        self.iterations = 0
        self.refactor_every = 48

    # -- helpers -----------------------------------------------------------
    def _default_status(self, j):
        lo, hi = self.lo[j], self.hi[j]
        if lo == hi:
            return _FIXED
        if not math.isinf(lo):
            return _AT_LOWER
        if not math.isinf(hi):
            return _AT_UPPER
        return _FREE

    def _nonbasic_value(self, j, st):
        if st in (_AT_LOWER, _FIXED):
            return self.lo[j]
        if st == _AT_UPPER:
            return self.hi[j]
        return 0.0

    def _refactor(self):
        self.Binv = np.linalg.inv(self.K[:, self.basic])
        self.since_refactor = 0

    def _recompute_x(self):
        xn = self.x.copy()
        xn[self.basic] = 0.0
        self.x[self.basic] = -self.Binv @ (self.K @ xn)

    def _duals(self, cost):
        y = cost[self.basic] @ self.Binv
        d = cost - y @ self.K
        d[self.basic] = 0.0
        return y, d

    def _update_binv(self, r, col):
        piv = col[r]
        row = self.Binv[r] / piv
        self.Binv -= np.outer(col, row)
        self.Binv[r] = row
        self.since_refactor += 1

    def _pivot(self, r, q, col):
        leaving = self.basic[r]
        self.basic[r] = q
        self.status[q] = _BASIC
        self.is_basic[q] = True
        self.is_basic[leaving] = False
        self._update_binv(r, col)
        if self.since_refactor >= self.refactor_every:
            self._refactor()
        return leaving

    def _park(self, j, value):
        """Set nonbasic status of ``j`` from the bound it sits at."""
        lo, hi = self.lo[j], self.hi[j]
        if lo == hi:
            self.status[j] = _FIXED
            self.x[j] = lo
        elif not math.isinf(lo) and abs(value - lo) <= abs(value - hi):
            self.status[j] = _AT_LOWER
            self.x[j] = lo
        elif not math.isinf(hi):
            self.status[j] = _AT_UPPER
            self.x[j] = hi
        else:
            self.status[j] = _FREE
            self.x[j] = 0.0

    def _primal_infeasibility(self):
        xb = self.x[self.basic]
        lo = self.lo[self.basic]
        hi = self.hi[self.basic]
        return np.maximum(lo - xb, 0.0) + np.maximum(xb - hi, 0.0)

    # -- setup -----------------------------------------------------------
    def cold_start(self):
        n, m = self.n, self.m
        N = n + m
        self.status = np.array([self._default_status(j) for j in range(N)], dtype=int)
        self.x = np.array([self._nonbasic_value(j, self.status[j]) for j in range(N)])
        act = self.lp.A @ self.x[:n]
        art_cols = []
        art_sign = []
        basic = []
        for r in range(m):
            s = n + r
            a = act[r]
            lo, hi = self.lo[s], self.hi[s]
            if lo - self.tol.feas <= a <= hi + self.tol.feas:
                basic.append(s)
                self.x[s] = a
                self.status[s] = _BASIC
            else:
                v = lo if a < lo else hi
                self.x[s] = v
                self.status[s] = _FIXED if lo == hi else (_AT_LOWER if v == lo else _AT_UPPER)
                sign = 1.0 if v - a > 0 else -1.0
                art_cols.append(r)
                art_sign.append(sign)
                basic.append(N + len(art_cols) - 1)
        k = len(art_cols)
        if k:
            E = np.zeros((m, k))
            for idx, (r, sg) in enumerate(zip(art_cols, art_sign)):
                E[r, idx] = sg
            self.K = np.hstack([self.K, E])
            self.lo = np.concatenate([self.lo, np.zeros(k)])
            self.hi = np.concatenate([self.hi, np.full(k, np.inf)])
            self.cost = np.concatenate([self.cost, np.zeros(k)])
            self.status = np.concatenate([self.status, np.zeros(k, dtype=int)])
            self.x = np.concatenate([self.x, np.zeros(k)])
        self.n_art = k
        self.basic = np.array(basic, dtype=int)
        self.is_basic = np.zeros(self.K.shape[1], dtype=bool)
        self.is_basic[self.basic] = True
        self._refactor()
        self._recompute_x()

    def warm_start(self, basis: Basis) -> bool:
        n, m = self.n, self.m
        if basis.n_vars != n:
            return False
        if basis.n_rows != m:
            if basis.n_rows > m:
                return False
            basis = basis.extended(m)
        self.n_art = 0
        N = n + m
        self.basic = np.array(basis.basic, dtype=int)
        if self.basic.size != m:
            return False
        self.status = np.array(basis.status, dtype=int)
        self.is_basic = np.zeros(N, dtype=bool)
        self.is_basic[self.basic] = True
        self.x = np.zeros(N)
        for j in range(N):
            if self.is_basic[j]:
                self.status[j] = _BASIC
                continue
            st = self.status[j]
            lo, hi = self.lo[j], self.hi[j]
            if lo == hi:
                st = _FIXED
            elif st == _AT_LOWER and math.isinf(lo):
                st = _AT_UPPER if not math.isinf(hi) else _FREE
            elif st == _AT_UPPER and math.isinf(hi):
                st = _AT_LOWER if not math.isinf(lo) else _FREE
            elif st in (_FIXED, _BASIC, _FREE):
                st = self._default_status(j)
            self.status[j] = st
            self.x[j] = self._nonbasic_value(j, st)
        try:
            self._refactor()
        except np.linalg.LinAlgError:
            return False
        if not np.all(np.isfinite(self.Binv)) or np.abs(self.Binv).max() > 1e12:
            return False
        self._recompute_x()
        return True

    # -- primal simplex ----------------------------------------------------
    def _entering(self, d, bland):
        tol = self.tol.dual
        st = self.status
        cand = np.zeros_like(d)
        lower = (st == _AT_LOWER) & (d < -tol)
        upper = (st == _AT_UPPER) & (d > tol)
        free = (st == _FREE) & (np.abs(d) > tol)
        mask = lower | upper | free
        if not mask.any():
            return -1
        if bland:
            return int(np.argmax(mask))
        cand[mask] = np.abs(d[mask])
        return int(np.argmax(cand))

    def primal(self, cost) -> str:
        degenerate = 0
        bland = False
        while True:
            if self.iterations >= self.max_iter:
                return NUMERICAL
            y, d = self._duals(cost)
            q = self._entering(d, bland)
            if q < 0:
                return OPTIMAL
            self.iterations += 1
            direction = 1.0 if d[q] < 0 else -1.0
            col = self.Binv @ self.K[:, q]
            rate = -direction * col
            xb = self.x[self.basic]
            lob = self.lo[self.basic]
            hib = self.hi[self.basic]
            ptol = self.tol.pivot
            dec = rate < -ptol
            inc = rate > ptol
            t = np.full(self.m, np.inf)
            with np.errstate(divide="ignore", invalid="ignore"):
                t_dec = (xb - lob) / -rate
                t_inc = (hib - xb) / rate
            t = np.where(dec & np.isfinite(lob), t_dec, t)
            t = np.where(inc & np.isfinite(hib), t_inc, t)
            t = np.maximum(t, 0.0)
            span = self.hi[q] - self.lo[q]
            t_min = t.min() if t.size else np.inf
            if math.isinf(t_min) and math.isinf(span):
                return UNBOUNDED
            if span <= t_min:
                # bound flip, basis unchanged
                self.x[q] += direction * span
                self.status[q] = _AT_UPPER if direction > 0 else _AT_LOWER
                self._recompute_x()
                degenerate = 0
                bland = False
                continue
            if bland:
                ties = np.flatnonzero(t <= t_min + 1e-12)
                r = int(ties[np.argmin(self.basic[ties])])
            else:
                # Harris-style: among near-minimal ratios prefer the largest pivot
                with np.errstate(divide="ignore", invalid="ignore"):
                    t_relax_dec = (xb - lob + self.tol.feas) / -rate
                    t_relax_inc = (hib - xb + self.tol.feas) / rate
                tr = np.full(self.m, np.inf)
                tr = np.where(dec & np.isfinite(lob), t_relax_dec, tr)
                tr = np.where(inc & np.isfinite(hib), t_relax_inc, tr)
                t_max = tr.min()
                ties = np.flatnonzero(t <= t_max)
                r = int(ties[np.argmax(np.abs(col[ties]))])
            step = t[r]
            hit_upper = rate[r] > 0
            self.x[q] += direction * step
            self.x[self.basic] = xb + rate * step
            leaving = self._pivot(r, q, col)
            target = self.hi[leaving] if hit_upper else self.lo[leaving]
            self._park(leaving, target)
            if leaving >= self.n + self.m:
                # artificial left the basis: never let it back in
                self.hi[leaving] = 0.0
                self.status[leaving] = _FIXED
                self.x[leaving] = 0.0
            self._recompute_x()
            if step <= 1e-12:
                degenerate += 1
                if degenerate > 50:
                    bland = True
            else:
                degenerate = 0
                bland = False

    # -- dual simplex ------------------------------------------------------
    def dual_feasible(self, cost) -> bool:
        _, d = self._duals(cost)
        tol = 1e-7
        st = self.status
        bad = ((st == _AT_LOWER) & (d < -tol)) | ((st == _AT_UPPER) & (d > tol)) \
            | ((st == _FREE) & (np.abs(d) > tol))
        return not bad.any()

    def dual(self, cost) -> str:
        degenerate = 0
        while True:
            if self.iterations >= self.max_iter:
                return NUMERICAL
            infeas = self._primal_infeasibility()
            if infeas.max(initial=0.0) <= self.tol.feas:
                return OPTIMAL
            bland = degenerate > 50
            if bland:
                # dual Bland rule: smallest basic index leaves, smallest index enters
                rows = np.flatnonzero(infeas > self.tol.feas)
                r = int(rows[np.argmin(self.basic[rows])])
            else:
                r = int(np.argmax(infeas))
            self.iterations += 1
            p = self.basic[r]
            below = self.x[p] < self.lo[p]
            target = self.lo[p] if below else self.hi[p]
            y, d = self._duals(cost)
            alpha = self.Binv[r] @ self.K
            st = self.status
            ptol = self.tol.pivot
            if below:
                elig = ((st == _AT_LOWER) & (alpha < -ptol)) | ((st == _AT_UPPER) & (alpha > ptol))
            else:
                elig = ((st == _AT_LOWER) & (alpha > ptol)) | ((st == _AT_UPPER) & (alpha < -ptol))
            elig |= (st == _FREE) & (np.abs(alpha) > ptol)
            if not elig.any():
                return INFEASIBLE
            idx = np.flatnonzero(elig)
            ratios = np.abs(d[idx]) / np.abs(alpha[idx])
            rmin = ratios.min()
            ties = idx[ratios <= rmin + 1e-12]
            q = int(ties.min()) if bland else int(ties[np.argmax(np.abs(alpha[ties]))])
            col = self.Binv @ self.K[:, q]
            delta = (self.x[p] - target) / col[r]
            self.x[q] += delta
            leaving = self._pivot(r, q, col)
            self._park(leaving, target)
            self._recompute_x()
            degenerate = degenerate + 1 if rmin <= 1e-12 else 0

    # -- phase driver ------------------------------------------------------
    def drive_out_artificials(self):
        N = self.n + self.m
        for r in range(self.m):
            a = self.basic[r]
            if a < N:
                continue
            row = self.Binv[r] @ self.K[:, :N]
            row[self.is_basic[:N]] = 0.0
            cand = np.flatnonzero(np.abs(row) > 1e-7)
            if cand.size == 0:
                continue
            q = int(cand[np.argmax(np.abs(row[cand]))])
            col = self.Binv @ self.K[:, q]
            leaving = self._pivot(r, q, col)
            self.hi[leaving] = 0.0
            self.status[leaving] = _FIXED
            self.x[leaving] = 0.0
        self._refactor()
        self._recompute_x()

    def export_basis(self) -> Basis | None:
        N = self.n + self.m
        if np.any(self.basic >= N):
            return None
        st = self.status[:N].copy()
        st[self.basic] = _BASIC
        return Basis(self.n, self.m, tuple(int(j) for j in self.basic),
                     tuple(int(s) for s in st))


def _finish(sx: _Simplex, lp: LinearProgram, tol: Tolerances) -> LpSolution:
    sx._refactor()
    sx._recompute_x()
    n = lp.n_vars
    x = sx.x[:n].copy()
    if np.any(x < lp.lower - 1e-6) or np.any(x > lp.upper + 1e-6):
        return LpSolution(NUMERICAL, iterations=sx.iterations)
    # clip onto bounds: values are within tol and downstream code assumes bounds hold
    x = np.minimum(np.maximum(x, lp.lower), lp.upper)
    cost = sx.cost
    y, d = sx._duals(cost)
    duals = y.copy()
    rc = (lp.c - lp.A.T @ y)
    for j in range(n):
        if sx.is_basic[j]:
            rc[j] = 0.0
    scale = 1.0 + np.abs(lp.A).max(initial=0.0) * np.abs(x).max(initial=0.0)
    viol = lp.row_violation(x)
    bscale = np.maximum(1.0, np.abs(lp.b))
    if np.any(viol > tol.feas * np.maximum(scale, bscale) * 10):
        return LpSolution(NUMERICAL, iterations=sx.iterations)
    obj = lp.objective_value(x)
    duals = _clean_duals(duals, lp, tol)
    dobj = dual_objective(lp, duals, _clean_rc(rc, x, lp, tol))
    return LpSolution(OPTIMAL, obj, x, duals, rc, dobj, sx.iterations, sx.export_basis())


def _clean_duals(y, lp, tol):
    out = y.copy()
    for i, s in enumerate(lp.senses):
        if (s == LE and 0 < out[i] <= tol.dual * 10) or (s == GE and 0 > out[i] >= -tol.dual * 10):
            out[i] = 0.0
    return out


def _clean_rc(rc, x, lp, tol):
    """Zero reduced costs that are pure round-off so the dual objective is finite."""
    out = rc.copy()
    small = np.abs(out) <= tol.dual * 10
    out[small] = 0.0
    return out


def _warm_solve(lp, tol, basis, max_iter):
    """Re-optimize from ``basis``; ``None`` means "start over cold"."""
    budget = 20 * (lp.n_rows + lp.n_vars)
    sx = _Simplex(lp, tol, budget if max_iter is None else min(max_iter, budget))
    if not sx.warm_start(basis):
        return None
    infeas = sx._primal_infeasibility().max(initial=0.0)
    if infeas <= tol.feas:
        status = sx.primal(sx.cost)
    elif sx.dual_feasible(sx.cost):
        status = sx.dual(sx.cost)
        if status == OPTIMAL:
            status = sx.primal(sx.cost)
    else:
        return None
    if status == OPTIMAL:
        sol = _finish(sx, lp, tol)
        return sol if sol.optimal else None
    if status == UNBOUNDED:
        return LpSolution(UNBOUNDED, iterations=sx.iterations)
    # infeasible or stalled: a stale basis never decides the outcome alone
    return None


def solve_lp(lp: LinearProgram, tol: Tolerances = DEFAULT_TOL, *,
             basis: Basis | None = None, max_iter: int | None = None) -> LpSolution:
    """Solve ``lp`` to optimality, or report infeasible / unbounded / breakdown.

    ``basis`` optionally warm-starts the solve from a previous optimal basis of
    an LP with the same columns (rows may have been appended since).
    """
    if lp.n_rows == 0:
        return _solve_box_only(lp)
    if basis is not None:
        try:
            sol = _warm_solve(lp, tol, basis, max_iter)
        except (np.linalg.LinAlgError, FloatingPointError):
            sol = None
        if sol is not None:
            return sol
    sx = _Simplex(lp, tol, max_iter)
    try:
        sx.cold_start()
        if sx.n_art:
            phase1 = np.zeros_like(sx.cost)
            phase1[sx.n + sx.m:] = 1.0
            status = sx.primal(phase1)
            if status != OPTIMAL:
                return LpSolution(NUMERICAL, iterations=sx.iterations)
            infeas = float(phase1 @ sx.x)
            if infeas > tol.feas * max(1.0, np.abs(lp.b).max(initial=0.0)):
                return LpSolution(INFEASIBLE, iterations=sx.iterations)
            sx.hi[sx.n + sx.m:] = 0.0
            sx.drive_out_artificials()
        status = sx.primal(sx.cost)
        if status != OPTIMAL:
            return LpSolution(status, iterations=sx.iterations)
        return _finish(sx, lp, tol)
    except np.linalg.LinAlgError:
        return LpSolution(NUMERICAL, iterations=sx.iterations)


def solve_lp_highs(lp: LinearProgram, tol: Tolerances = DEFAULT_TOL, **_ignored) -> LpSolution:
    """Same contract as :func:`solve_lp`, delegated to HiGHS through scipy.

    Used where many mid-sized LPs must be solved quickly (branch-and-bound
    node relaxations).  Warm-start arguments are accepted and ignored.
    """
    from scipy.optimize import linprog

    senses = np.array(lp.senses)
    ub = senses != EQ
    eq = ~ub
    sign = np.where(senses == GE, -1.0, 1.0)
    res = linprog(
        lp.c,
        A_ub=lp.A[ub] * sign[ub, None] if ub.any() else None,
        b_ub=lp.b[ub] * sign[ub] if ub.any() else None,
        A_eq=lp.A[eq] if eq.any() else None,
        b_eq=lp.b[eq] if eq.any() else None,
        bounds=np.column_stack([lp.lower, lp.upper]),
        method="highs",
        options={"primal_feasibility_tolerance": tol.feas,
                 "dual_feasibility_tolerance": tol.feas},
    )
    if res.status == 2:
        return LpSolution(INFEASIBLE)
    if res.status == 3:
        return LpSolution(UNBOUNDED)
    if res.status != 0:
        return LpSolution(NUMERICAL)
    x = np.minimum(np.maximum(res.x, lp.lower), lp.upper)
    y = np.zeros(lp.n_rows)
    if ub.any():
        y[ub] = res.ineqlin.marginals * sign[ub]
    if eq.any():
        y[eq] = res.eqlin.marginals
    rc = lp.c - lp.A.T @ y
    return LpSolution(OPTIMAL, lp.objective_value(x), x, y, rc,
                      dual_objective(lp, _clean_duals(y, lp, tol), _clean_rc(rc, x, lp, tol)),
                      int(getattr(res, "nit", 0)), None)


LP_BACKENDS = {"simplex": solve_lp, "highs": solve_lp_highs}


def _solve_box_only(lp: LinearProgram) -> LpSolution:
    x = np.zeros(lp.n_vars)
    for j, cj in enumerate(lp.c):
        lo, hi = lp.lower[j], lp.upper[j]
        if cj > 0:
            if math.isinf(lo):
                return LpSolution(UNBOUNDED)
            x[j] = lo
        elif cj < 0:
            if math.isinf(hi):
                return LpSolution(UNBOUNDED)
            x[j] = hi
        else:
            x[j] = lo if not math.isinf(lo) else (hi if not math.isinf(hi) else 0.0)
    obj = lp.objective_value(x)
    return LpSolution(OPTIMAL, obj, x, np.zeros(0), lp.c.copy(),
                      dual_objective(lp, np.zeros(0), lp.c), 0, None)


def dual_of(lp: LinearProgram) -> LinearProgram:
    """Standard LP dual, written as a minimization of the negated dual objective.

    Row duals follow the sign convention of a minimization: ``<=`` rows get
    ``y <= 0``, ``>=`` rows ``y >= 0``, equalities are free.  A finite lower
    bound adds ``alpha_j >= 0`` and a finite upper bound ``beta_j >= 0``;
    zero bounds are folded into the column inequality instead, so the
    textbook pair (min c x, A x >= b, x >= 0) / (max b y, A^T y <= c, y >= 0)
    comes out literally.
    """
    bld = LpBuilder()
    ys = []
    for i, s in enumerate(lp.senses):
        lo, hi = {LE: (-math.inf, 0.0), GE: (0.0, math.inf), EQ: (-math.inf, math.inf)}[s]
        ys.append(bld.add_var(f"y[{lp.row_names[i]}]", lo, hi, cost=-lp.b[i]))
    for j in range(lp.n_vars):
        lo, hi = lp.lower[j], lp.upper[j]
        coeffs = {ys[i]: lp.A[i, j] for i in range(lp.n_rows) if lp.A[i, j] != 0.0}
        name = lp.var_names[j]
        if lo == hi:
            k = bld.add_var(f"fix[{name}]", -math.inf, math.inf, cost=-lo)
            coeffs[k] = 1.0
            bld.add_row(coeffs, EQ, lp.c[j], f"col[{name}]")
            continue
        sense = EQ
        if not math.isinf(lo):
            if lo == 0.0:
                sense = LE
            else:
                coeffs[bld.add_var(f"lb[{name}]", 0.0, math.inf, cost=-lo)] = 1.0
        if not math.isinf(hi):
            if hi == 0.0 and sense == EQ:
                sense = GE
            else:
                coeffs[bld.add_var(f"ub[{name}]", 0.0, math.inf, cost=hi)] = -1.0
        bld.add_row(coeffs, sense, lp.c[j], f"col[{name}]")
    bld.offset = -lp.offset
    return bld.build()


def dump_lp(lp: LinearProgram, out=None) -> str:
    """Human-readable dump, one constraint per line, for diffing against other solvers."""
    buf = io.StringIO()

    def term(a, name):
        return f"{'+' if a >= 0 else '-'} {abs(a):.12g} {name}"

    obj = " ".join(term(a, lp.var_names[j]) for j, a in enumerate(lp.c) if a != 0.0)
    buf.write(f"minimize: {obj or '0'} + {lp.offset:.12g}\n")
    buf.write("subject to:\n")
    for i in range(lp.n_rows):
        terms = " ".join(term(a, lp.var_names[j]) for j, a in enumerate(lp.A[i]) if a != 0.0)
        buf.write(f"  {lp.row_names[i]}: {terms or '0'} {lp.senses[i]} {lp.b[i]:.12g}\n")
    buf.write("bounds:\n")
    for j in range(lp.n_vars):
        buf.write(f"  {lp.lower[j]:.12g} <= {lp.var_names[j]} <= {lp.upper[j]:.12g}\n")
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text
