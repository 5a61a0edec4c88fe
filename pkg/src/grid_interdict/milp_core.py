"""Best-bound branch-and-bound over binary variables.

LP relaxations are solved with :func:`grid_interdict.lp_core.solve_lp` by
default; child nodes are warm-started from the parent's optimal basis.  For
larger relaxations the HiGHS backend is much faster per node.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .lp_core import (DEFAULT_TOL, GE, INFEASIBLE, LP_BACKENDS, NUMERICAL, OPTIMAL,
                      UNBOUNDED, LinearProgram, Tolerances)

log = logging.getLogger(__name__)

LIMIT = "limit"


@dataclass(eq=False)
class MixedIntegerProgram:
    lp: LinearProgram
    binaries: tuple

    def __post_init__(self):
        self.binaries = tuple(int(j) for j in self.binaries)
        for j in self.binaries:
            if not 0 <= j < self.lp.n_vars:
                raise ValueError(f"binary index {j} out of range")
            if self.lp.lower[j] < 0 or self.lp.upper[j] > 1:
                raise ValueError(f"binary variable {j} must have bounds within [0, 1]")


@dataclass
class MipSolution:
    status: str
    objective: float = math.nan
    x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    nodes: int = 0
    gap: float = math.inf
    bound: float = -math.inf
    incumbents: list = field(default_factory=list)
    node_log: list = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _gap(incumbent: float, bound: float) -> float:
    if math.isinf(incumbent):
        return math.inf
    return max(0.0, incumbent - bound) / max(abs(incumbent), 1e-10)


def solve_mip(mip: MixedIntegerProgram, gap: float = 1e-6, *, node_limit: int = 10**6,
              tol_int: float = 1e-6, abs_gap: float = 1e-9,
              tol: Tolerances = DEFAULT_TOL, keep_log: bool = False,
              lp_backend: str = "simplex") -> MipSolution:
    """Minimize ``mip`` with best-bound node selection and most-fractional branching.

    Stops once ``(incumbent - bound) <= max(gap * |incumbent|, abs_gap)``.
    Hitting ``node_limit`` returns the incumbent (if any) with status
    ``"limit"`` and the gap that was actually proven.  ``lp_backend`` picks
    the relaxation solver: the in-house ``"simplex"`` (warm-started from the
    parent basis) or ``"highs"``.
    """
    if lp_backend not in LP_BACKENDS:
        raise ValueError(f"unknown lp_backend {lp_backend!r}")
    solve_lp = LP_BACKENDS[lp_backend]
    lp = mip.lp
    binaries = np.array(mip.binaries, dtype=int)
    counter = 0
    nodes = 0
    incumbent = math.inf
    best_x = None
    incumbents: list = []
    node_log: list = []

    def solve(lower, upper, basis):
        nonlocal nodes
        nodes += 1
        return solve_lp(lp.with_bounds(lower, upper), tol, basis=basis)

    root = solve(lp.lower.copy(), lp.upper.copy(), None)
    if root.status == INFEASIBLE:
        return MipSolution(INFEASIBLE, nodes=nodes)
    if root.status == UNBOUNDED:
        return MipSolution(UNBOUNDED, nodes=nodes)
    if root.status != OPTIMAL:
        return MipSolution(NUMERICAL, nodes=nodes)

    heap: list = []
    heapq.heappush(heap, (root.objective, counter, 0, lp.lower.copy(), lp.upper.copy(), root))
    limited = False

    def prunable(bound):
        return bound >= incumbent - max(gap * abs(incumbent), abs_gap)

    while heap:
        bound, _, depth, lower, upper, sol = heapq.heappop(heap)
        if prunable(bound):
            heap.clear()
            heapq.heappush(heap, (bound, -1, depth, lower, upper, sol))
            break
        if nodes >= node_limit:
            heapq.heappush(heap, (bound, -1, depth, lower, upper, sol))
            limited = True
            break
        xb = sol.x[binaries]
        frac = np.abs(xb - np.round(xb))
        if keep_log:
            node_log.append({"node": nodes, "depth": depth, "bound": bound,
                             "incumbent": incumbent})
        if frac.max(initial=0.0) <= tol_int:
            # integral relaxation: re-solve with binaries pinned for clean values
            lo, hi = lower.copy(), upper.copy()
            r = np.round(xb)
            lo[binaries] = r
            hi[binaries] = r
            fixed = solve(lo, hi, sol.basis)
            cand = fixed if fixed.optimal else sol
            if cand.objective < incumbent:
                incumbent = cand.objective
                best_x = cand.x.copy()
                best_x[binaries] = r
                incumbents.append(incumbent)
                log.debug("node %d: new incumbent %.10g", nodes, incumbent)
            continue
        # most fractional, lowest index on ties
        score = np.abs(xb - 0.5)
        k = int(np.argmin(score))
        j = int(binaries[k])
        for lo_j, hi_j in ((0.0, 0.0), (1.0, 1.0)):
            lo, hi = lower.copy(), upper.copy()
            lo[j], hi[j] = lo_j, hi_j
            if lo[j] < lower[j] or hi[j] > upper[j]:
                continue
            child = solve(lo, hi, sol.basis)
            if child.status == INFEASIBLE:
                continue
            if child.status != OPTIMAL:
                log.warning("node LP ended with status %s; treating node as unresolved", child.status)
                return MipSolution(NUMERICAL, incumbent, best_x if best_x is not None else np.zeros(0),
                                   nodes, math.inf, bound, incumbents, node_log)
            if prunable(child.objective):
                continue
            counter += 1
            heapq.heappush(heap, (child.objective, counter, depth + 1, lo, hi, child))

    global_bound = min((h[0] for h in heap), default=incumbent)
    global_bound = min(global_bound, incumbent)
    if best_x is None:
        if limited:
            return MipSolution(LIMIT, nodes=nodes, bound=global_bound, node_log=node_log)
        return MipSolution(INFEASIBLE, nodes=nodes, node_log=node_log)
    g = _gap(incumbent, global_bound)
    status = LIMIT if limited else OPTIMAL
    return MipSolution(status, incumbent, best_x, nodes, g, global_bound, incumbents, node_log)


def add_nogood_cut(mip: MixedIntegerProgram, assignment, *, superset: bool = True,
                   over=None) -> MixedIntegerProgram:
    """Append a cut excluding the pattern where exactly ``assignment`` is at 0.

    ``assignment`` lists binary column indices that were 0.  With ``superset``
    the cut is ``sum(z[assignment]) >= 1``, which also removes every pattern
    that zeroes those binaries plus others.  Without it only the exact pattern
    over the binaries in ``over`` (default: all binaries) is removed.
    """
    zeros = sorted(set(int(j) for j in assignment))
    domain = mip.binaries if over is None else tuple(over)
    for j in zeros:
        if j not in mip.binaries:
            raise ValueError(f"column {j} is not binary")
    row = np.zeros(mip.lp.n_vars)
    row[zeros] = 1.0
    rhs = 1.0
    if not superset:
        ones = [j for j in domain if j not in zeros]
        row[ones] = -1.0
        rhs = 1.0 - len(ones)
    key = ",".join(map(str, zeros))
    name = f"{'cut' if superset else 'nogood'}[{key}]"
    return MixedIntegerProgram(mip.lp.with_rows(row[None, :], (GE,), [rhs], (name,)), mip.binaries)
