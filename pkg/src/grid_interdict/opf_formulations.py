"""Lower-level OPF models (DC and linearized AC) and the single-level interdiction MIP.

Each builder produces a *parametric* LP whose right-hand side is affine in the
branch in-service indicators ``z`` (1 = in service, 0 = attacked)::

    A x  (sense)  b0 + D z

Everything that depends on ``z`` (flow equations relaxed by big-M, flow
limits scaled by ``z``) lives in rows, never in bounds, which keeps the
strong-duality reformulation mechanical: the only bilinear terms left are
``z_e * (D[:, e] @ y)`` in the dual objective, one per branch.

Linearized AC flow model, expanded around ``v = v0`` and zero angle
difference, with ``a_i = v_i - v0`` and ``d = theta_i - theta_j``::

    p_ij = G v0 (v_i - v_j) + G a_i^2 + G v0^2 d^2 / 2 - B v0^2 d
    q_ij = -B v0 (v_i - v_j) - B a_i^2 - B v0^2 d^2 / 2 - G v0^2 d

The squares are carried by auxiliary columns bounded below by the secant
interpolant of ``x^2`` (exact at the breakpoints, never below the square), so
no binaries are needed; overstating losses never lowers load shedding.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .grid_model import Network
from .lp_core import EQ, GE, LE, LinearProgram, LpBuilder, solve_lp
from .milp_core import MixedIntegerProgram

log = logging.getLogger(__name__)

DC, LAC = "dc", "lac"
MODELS = (DC, LAC)


@dataclass(frozen=True)
class LacConfig:
    polygon_sides: int = 8
    pwl_segments: int = 6
    v0: float = 1.0
    theta0: float = 0.0
    angle_diff_max: float = 0.35

    def __post_init__(self):
        if self.polygon_sides < 4 or self.polygon_sides % 2:
            raise ValueError("polygon_sides must be an even integer >= 4")
        if self.pwl_segments < 2:
            raise ValueError("pwl_segments must be >= 2")
        if not self.v0 > 0:
            raise ValueError("v0 must be positive")
        if self.theta0 != 0.0:
            raise ValueError("only a zero angle-difference expansion point is supported")
        if not 0 < self.angle_diff_max < math.pi / 2:
            raise ValueError("angle_diff_max must lie in (0, pi/2)")


@dataclass(frozen=True)
class FormulationConfig:
    lac: LacConfig = field(default_factory=LacConfig)
    angle_bound: float = math.pi / 4      # |theta_i| limit, rad
    bigm_safety: float = 2.0
    dual_bound: float = 10.0              # times max |objective coefficient|

    def __post_init__(self):
        if not self.angle_bound > 0:
            raise ValueError("angle_bound must be positive")
        if self.bigm_safety < 1 or self.dual_bound <= 0:
            raise ValueError("bigm_safety must be >= 1 and dual_bound positive")


@dataclass(frozen=True)
class OpfVariables:
    """Column index for every symbol instance, e.g. ``p_d[3]`` or ``q_k[2,1,4]``."""
    columns: dict

    def __getitem__(self, name) -> int:
        return self.columns[name]

    def __contains__(self, name) -> bool:
        return name in self.columns

    def symbol(self, column: int) -> str:
        for k, v in self.columns.items():
            if v == column:
                return k
        raise KeyError(column)

    def family(self, prefix: str) -> dict:
        return {k: v for k, v in self.columns.items() if k.split("[", 1)[0] == prefix}


DC_SYMBOLS = ("p_d", "p_g", "theta", "p_k")
LAC_SYMBOLS = ("p_d", "q_d", "p_g", "q_g", "v", "theta", "p_k", "q_k",
               "dtheta", "sq_dtheta", "sq_dv")


def polygon_rows(n: int, s_max: float):
    """Inner n-gon of the circle of radius ``s_max`` as (cos, sin, rhs) half-planes."""
    rhs = s_max * math.cos(math.pi / n)
    return [(math.cos(2 * math.pi * k / n), math.sin(2 * math.pi * k / n), rhs) for k in range(n)]


def secant_rows(lo: float, hi: float, segments: int):
    """Secants of ``x^2`` over ``[lo, hi]``: rows ``s - slope*x >= intercept``."""
    pts = np.linspace(lo, hi, segments + 1)
    return [(float(a + b), float(-a * b)) for a, b in zip(pts[:-1], pts[1:])]


class _ParamBuilder(LpBuilder):
    def __init__(self, branch_ids):
        super().__init__()
        self.branch_ids = tuple(branch_ids)
        self._zcol = {e: k for k, e in enumerate(self.branch_ids)}
        self.zcoef: list[dict] = []
        self.bigm: dict[int, tuple] = {}

    def add_row(self, coeffs, sense, rhs, name=None, zcoef=None, bigm=None):
        r = super().add_row(coeffs, sense, rhs, name)
        self.zcoef.append(dict(zcoef or {}))
        if bigm is not None:
            self.bigm[r] = bigm
        return r

    def D(self) -> np.ndarray:
        D = np.zeros((self.n_rows, len(self.branch_ids)))
        for r, zc in enumerate(self.zcoef):
            for e, a in zc.items():
                D[r, self._zcol[e]] += a
        return D


@dataclass(eq=False)
class OpfModel:
    """Parametric lower-level LP plus the attack it is currently evaluated at."""
    model: str
    network: Network
    base: LinearProgram
    D: np.ndarray
    branch_ids: tuple
    variables: OpfVariables
    bigm_rows: dict
    attack: tuple = ()

    def z_vector(self, attack) -> np.ndarray:
        attacked = set(attack)
        unknown = attacked - set(self.branch_ids)
        if unknown:
            raise KeyError(f"unknown branch id(s) {sorted(unknown)}")
        return np.array([0.0 if e in attacked else 1.0 for e in self.branch_ids])

    def fixed(self, attack=()) -> LinearProgram:
        b = self.base.b + self.D @ self.z_vector(attack)
        return LinearProgram(self.base.c, self.base.A, self.base.senses, b,
                             self.base.lower, self.base.upper,
                             self.base.var_names, self.base.row_names, self.base.offset)

    @property
    def lp(self) -> LinearProgram:
        return self.fixed(self.attack)

    def shed(self, attack=()) -> float:
        sol = solve_lp(self.fixed(attack))
        if not sol.optimal:
            raise RuntimeError(f"lower-level LP for attack {sorted(attack)} ended {sol.status}")
        return sol.objective


def _common_columns(pb: _ParamBuilder, net: Network, cfg: FormulationConfig, reactive: bool):
    for d in net.demands:
        pb.add_var(f"p_d[{d.id}]", 0.0, d.p_base, cost=-1.0)
        if reactive:
            pb.add_var(f"q_d[{d.id}]", -math.inf, math.inf)
    pb.offset = float(sum(d.p_base for d in net.demands))
    for g in net.generators:
        pb.add_var(f"p_g[{g.id}]", 0.0, g.p_max)
        if reactive:
            pb.add_var(f"q_g[{g.id}]", g.q_min, g.q_max)
    ref = net.reference_bus
    for b in net.buses:
        bound = 0.0 if b.id == ref else cfg.angle_bound
        pb.add_var(f"theta[{b.id}]", -bound, bound)
        if reactive:
            pb.add_var(f"v[{b.id}]", b.v_min, b.v_max)


def _dc(net: Network, cfg: FormulationConfig) -> _ParamBuilder:
    pb = _ParamBuilder([br.id for br in net.branches])
    _common_columns(pb, net, cfg, reactive=False)
    # p_ji = -p_ij holds identically in the DC model, so one column per branch
    for br in net.branches:
        pb.add_var(f"p_k[{br.id},{br.from_bus},{br.to_bus}]", -math.inf, math.inf)
    for b in net.buses:
        coeffs = {}
        for g in net.generators:
            if g.bus == b.id:
                coeffs[pb.var(f"p_g[{g.id}]")] = 1.0
        for d in net.demands:
            if d.bus == b.id:
                coeffs[pb.var(f"p_d[{d.id}]")] = -1.0
        for br in net.branches:
            col = pb.var(f"p_k[{br.id},{br.from_bus},{br.to_bus}]")
            if br.from_bus == b.id:
                coeffs[col] = coeffs.get(col, 0.0) - 1.0
            elif br.to_bus == b.id:
                coeffs[col] = coeffs.get(col, 0.0) + 1.0
        pb.add_row(coeffs, EQ, 0.0, f"balance_p[{b.id}]")
    span = 2.0 * cfg.angle_bound
    for br in net.branches:
        p = pb.var(f"p_k[{br.id},{br.from_bus},{br.to_bus}]")
        tf, tt = pb.var(f"theta[{br.from_bus}]"), pb.var(f"theta[{br.to_bus}]")
        M = cfg.bigm_safety * abs(br.b) * span
        flow = {p: 1.0, tf: br.b, tt: -br.b}
        pb.add_row(flow, LE, M, f"flow_up[{br.id}]", {br.id: -M}, bigm=(br.id, M))
        pb.add_row(flow, GE, -M, f"flow_lo[{br.id}]", {br.id: M}, bigm=(br.id, M))
        pb.add_row({p: 1.0}, LE, 0.0, f"limit_up[{br.id}]", {br.id: br.s_max})
        pb.add_row({p: 1.0}, GE, 0.0, f"limit_lo[{br.id}]", {br.id: -br.s_max})
    return pb


def _lac(net: Network, cfg: FormulationConfig) -> _ParamBuilder:
    lac = cfg.lac
    v0, R = lac.v0, lac.angle_diff_max
    pb = _ParamBuilder([br.id for br in net.branches])
    _common_columns(pb, net, cfg, reactive=True)
    for d in net.demands:
        pb.add_row({pb.var(f"q_d[{d.id}]"): 1.0, pb.var(f"p_d[{d.id}]"): -d.alpha},
                   EQ, 0.0, f"pf_d[{d.id}]")
    for g in net.generators:
        pb.add_row({pb.var(f"q_g[{g.id}]"): 1.0, pb.var(f"p_g[{g.id}]"): -g.alpha},
                   LE, 0.0, f"pf_g[{g.id}]")
    amax = {}
    for b in net.buses:
        lo, hi = b.v_min - v0, b.v_max - v0
        amax[b.id] = max(abs(lo), abs(hi))
        s = pb.add_var(f"sq_dv[{b.id}]", 0.0, amax[b.id] ** 2)
        v = pb.var(f"v[{b.id}]")
        if hi - lo <= 0:
            pb.add_row({s: 1.0}, GE, lo * lo, f"sec_dv[{b.id},0]")
            continue
        for k, (slope, icpt) in enumerate(secant_rows(lo, hi, lac.pwl_segments)):
            pb.add_row({s: 1.0, v: -slope}, GE, icpt - slope * v0, f"sec_dv[{b.id},{k}]")
    vmin = {b.id: b.v_min for b in net.buses}
    vmax = {b.id: b.v_max for b in net.buses}
    for br in net.branches:
        e, f, t = br.id, br.from_bus, br.to_bus
        dt = pb.add_var(f"dtheta[{e}]", -R, R)
        sq = pb.add_var(f"sq_dtheta[{e}]", 0.0, R * R)
        for k, (slope, icpt) in enumerate(secant_rows(-R, R, lac.pwl_segments)):
            pb.add_row({sq: 1.0, dt: -slope}, GE, icpt, f"sec_dtheta[{e},{k}]")
        # link dtheta to the bus angles; scaled by |B| so its dual stays O(1)
        w = max(abs(br.b), abs(br.g), 1.0)
        Ml = cfg.bigm_safety * (2 * cfg.angle_bound + R) * w
        link = {pb.var(f"theta[{f}]"): w, pb.var(f"theta[{t}]"): -w, dt: -w}
        pb.add_row(link, LE, Ml, f"link_up[{e}]", {e: -Ml}, bigm=(e, Ml))
        pb.add_row(link, GE, -Ml, f"link_lo[{e}]", {e: Ml}, bigm=(e, Ml))
        G, B = br.g, br.b
        dv = max(vmax[f] - vmin[t], vmax[t] - vmin[f])
        am = max(amax[f], amax[t])
        Mf = cfg.bigm_safety * (abs(G) + abs(B)) * (v0 * dv + am * am + v0 * v0 * (R * R / 2 + R))
        for i, j, sign in ((f, t, 1.0), (t, f, -1.0)):
            p = pb.add_var(f"p_k[{e},{i},{j}]", -math.inf, math.inf)
            q = pb.add_var(f"q_k[{e},{i},{j}]", -math.inf, math.inf)
            vi, vj = pb.var(f"v[{i}]"), pb.var(f"v[{j}]")
            si = pb.var(f"sq_dv[{i}]")
            prow = {p: 1.0, vi: -G * v0, vj: G * v0, si: -G, sq: -G * v0 * v0 / 2,
                    dt: B * v0 * v0 * sign}
            qrow = {q: 1.0, vi: B * v0, vj: -B * v0, si: B, sq: B * v0 * v0 / 2,
                    dt: G * v0 * v0 * sign}
            for label, row in (("p", prow), ("q", qrow)):
                pb.add_row(row, LE, Mf, f"flow_{label}_up[{e},{i},{j}]", {e: -Mf}, bigm=(e, Mf))
                pb.add_row(row, GE, -Mf, f"flow_{label}_lo[{e},{i},{j}]", {e: Mf}, bigm=(e, Mf))
            for k, (cs, sn, rhs) in enumerate(polygon_rows(lac.polygon_sides, br.s_max)):
                pb.add_row({p: cs, q: sn}, LE, 0.0, f"poly[{e},{i},{j},{k}]", {e: rhs})
    for b in net.buses:
        cp, cq = {}, {}
        for g in net.generators:
            if g.bus == b.id:
                cp[pb.var(f"p_g[{g.id}]")] = 1.0
                cq[pb.var(f"q_g[{g.id}]")] = 1.0
        for d in net.demands:
            if d.bus == b.id:
                cp[pb.var(f"p_d[{d.id}]")] = -1.0
                cq[pb.var(f"q_d[{d.id}]")] = -1.0
        for br in net.branches:
            for i, j in ((br.from_bus, br.to_bus), (br.to_bus, br.from_bus)):
                if i == b.id:
                    cp[pb.var(f"p_k[{br.id},{i},{j}]")] = -1.0
                    cq[pb.var(f"q_k[{br.id},{i},{j}]")] = -1.0
        pb.add_row(cp, EQ, 0.0, f"balance_p[{b.id}]")
        pb.add_row(cq, EQ, 0.0, f"balance_q[{b.id}]")
    return pb


def _finish(model, net, pb: _ParamBuilder, attack) -> OpfModel:
    lp = pb.build()
    opf = OpfModel(model, net, lp, pb.D(), pb.branch_ids, OpfVariables(dict(pb._index)),
                   dict(pb.bigm), tuple(sorted(attack or ())))
    opf.z_vector(opf.attack)
    return opf


def build_dc(network: Network, attack=None, config: FormulationConfig | None = None) -> OpfModel:
    """DC lower level; ``attack`` lists attacked branch ids (``None`` = no attack)."""
    return _finish(DC, network, _dc(network, config or FormulationConfig()), attack)


def build_lac(network: Network, attack=None, config: FormulationConfig | None = None) -> OpfModel:
    return _finish(LAC, network, _lac(network, config or FormulationConfig()), attack)


def build_opf(network: Network, model: str, attack=None,
              config: FormulationConfig | None = None) -> OpfModel:
    if model == DC:
        return build_dc(network, attack, config)
    if model == LAC:
        return build_lac(network, attack, config)
    raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")


# ---------------------------------------------------------------------------
# single-level reformulation

@dataclass
class BigMAudit:
    ok: bool
    active: list
    max_dual_ratio: float


@dataclass(eq=False)
class InterdictionMip:
    mip: MixedIntegerProgram
    opf: OpfModel
    budget: int
    z_cols: dict            # branch id -> column
    x_cols: np.ndarray      # lower-level primal columns, in OpfModel order
    y_cols: np.ndarray      # row duals, in OpfModel row order
    w_cols: dict            # branch id -> column of z_e * (D[:, e] @ y)
    dual_bound: float
    w_bound: dict
    bounded_rows: np.ndarray

    def attack_of(self, x) -> tuple:
        return tuple(sorted(e for e, j in self.z_cols.items() if x[j] < 0.5))

    def shed_of(self, x) -> float:
        return float(self.opf.base.c @ x[self.x_cols] + self.opf.base.offset)

    def audit(self, x, tol: float = 1e-6) -> BigMAudit:
        """Check that no big-M or dual bound is active for the attack chosen at ``x``.

        The MIP's own dual values are not unique, so the check re-solves the
        lower level for the chosen attack and inspects that LP's multipliers
        and the slack of every relaxed (attacked) flow row.
        """
        return self.audit_attack(self.attack_of(x), tol)

    def audit_attack(self, attack, tol: float = 1e-6) -> BigMAudit:
        attack = set(attack)
        lp = self.opf.fixed(attack)
        sol = solve_lp(lp)
        if not sol.optimal:
            return BigMAudit(False, [f"lower level {sol.status}"], math.inf)
        active = []
        y = sol.duals
        ratio = 0.0
        for r in self.bounded_rows:
            ratio = max(ratio, abs(y[r]) / self.dual_bound)
            if abs(y[r]) >= self.dual_bound - tol:
                active.append(f"dual[{lp.row_names[r]}]")
        for e in self.w_cols:
            k = self.opf.branch_ids.index(e)
            if abs(float(self.opf.D[:, k] @ y)) >= self.w_bound[e] - tol:
                active.append(f"w[{e}]")
        act = lp.A @ sol.x
        for r, (e, M) in self.opf.bigm_rows.items():
            if e in attack and abs(act[r] - lp.b[r]) <= tol:
                active.append(f"bigM[{lp.row_names[r]}]")
        return BigMAudit(not active, active, ratio)


def _dual_columns(bld: LpBuilder, lp: LinearProgram, ys: list, name_prefix=""):
    """Dual feasibility rows for every primal column; returns objective terms.

    Returns a list of ``(column, coefficient)`` making up the bound part of
    the dual objective.
    """
    obj_terms = []
    AT = lp.A.T
    for j in range(lp.n_vars):
        lo, hi = lp.lower[j], lp.upper[j]
        coeffs = {ys[i]: AT[j, i] for i in np.flatnonzero(AT[j])}
        name = lp.var_names[j]
        if lo == hi:
            k = bld.add_var(f"{name_prefix}fix[{name}]", -math.inf, math.inf)
            coeffs[k] = 1.0
            obj_terms.append((k, lo))
            bld.add_row(coeffs, EQ, lp.c[j], f"dualfeas[{name}]")
            continue
        sense = EQ
        if not math.isinf(lo):
            if lo == 0.0:
                sense = LE
            else:
                k = bld.add_var(f"{name_prefix}lb[{name}]", 0.0, math.inf)
                coeffs[k] = 1.0
                obj_terms.append((k, lo))
        if not math.isinf(hi):
            if hi == 0.0 and sense == EQ:
                sense = GE
            else:
                k = bld.add_var(f"{name_prefix}ub[{name}]", 0.0, math.inf)
                coeffs[k] = -1.0
                obj_terms.append((k, -hi))
        bld.add_row(coeffs, sense, lp.c[j], f"dualfeas[{name}]")
    return obj_terms


def build_interdiction_mip(network: Network, model: str, budget: int,
                           config: FormulationConfig | None = None,
                           opf: OpfModel | None = None) -> InterdictionMip:
    """Single-level MIP: maximize shedding over attacks of at most ``budget`` branches.

    The lower level is replaced by primal feasibility, dual feasibility and
    ``primal objective == dual objective``.  The dual objective contains
    ``z_e * (D[:, e] @ y)``, linearized with a bounded auxiliary ``w_e``.
    """
    if budget < 0:
        raise ValueError("budget must be >= 0")
    cfg = config or FormulationConfig()
    opf = opf or build_opf(network, model, None, cfg)
    base = opf.base
    m, n = base.n_rows, base.n_vars
    attackable = [e for e in opf.branch_ids if network.branch(e).attackable]
    kcol = {e: k for k, e in enumerate(opf.branch_ids)}
    b0 = base.b.copy()
    for e in opf.branch_ids:
        if e not in attackable:
            b0 += opf.D[:, kcol[e]]
    Da = opf.D[:, [kcol[e] for e in attackable]] if attackable else np.zeros((m, 0))
    Y = cfg.dual_bound * max(1.0, float(np.abs(base.c).max(initial=0.0)))
    bounded = np.flatnonzero(np.abs(Da).sum(axis=1) > 0)
    is_bounded = np.zeros(m, dtype=bool)
    is_bounded[bounded] = True

    bld = LpBuilder()
    z = {e: bld.add_var(f"z[{e}]", 0.0, 1.0) for e in attackable}
    xs = [bld.add_var(base.var_names[j], base.lower[j], base.upper[j], cost=-base.c[j])
          for j in range(n)]
    bld.offset = -base.offset
    ys = []
    for i, s in enumerate(base.senses):
        lo, hi = {LE: (-math.inf, 0.0), GE: (0.0, math.inf), EQ: (-math.inf, math.inf)}[s]
        if is_bounded[i]:
            lo, hi = max(lo, -Y), min(hi, Y)
        ys.append(bld.add_var(f"y[{base.row_names[i]}]", lo, hi))
    U = {e: float(np.abs(Da[:, k]).sum() * Y) for k, e in enumerate(attackable)}
    w = {e: bld.add_var(f"w[{e}]", -U[e], U[e]) for e in attackable}

    # primal feasibility: A x - D z (sense) b0
    for i in range(m):
        coeffs = {xs[j]: base.A[i, j] for j in np.flatnonzero(base.A[i])}
        for k, e in enumerate(attackable):
            if Da[i, k] != 0.0:
                coeffs[z[e]] = -Da[i, k]
        bld.add_row(coeffs, base.senses[i], b0[i], f"primal[{base.row_names[i]}]")
    bound_terms = _dual_columns(bld, base, ys)
    # strong duality: c x - (b0 y + sum w + bound terms) = 0
    sd = {xs[j]: base.c[j] for j in range(n) if base.c[j] != 0.0}
    for i in range(m):
        if b0[i] != 0.0:
            sd[ys[i]] = sd.get(ys[i], 0.0) - b0[i]
    for e in attackable:
        sd[w[e]] = -1.0
    for col, coef in bound_terms:
        if coef != 0.0:
            sd[col] = sd.get(col, 0.0) - coef
    bld.add_row(sd, EQ, 0.0, "strong_duality")
    for k, e in enumerate(attackable):
        Ue = U[e]
        Dy = {ys[i]: -Da[i, k] for i in np.flatnonzero(Da[:, k])}
        bld.add_row({w[e]: 1.0, z[e]: -Ue}, LE, 0.0, f"w_z_up[{e}]")
        bld.add_row({w[e]: 1.0, z[e]: Ue}, GE, 0.0, f"w_z_lo[{e}]")
        bld.add_row({w[e]: 1.0, **Dy, z[e]: Ue}, LE, Ue, f"w_y_up[{e}]")
        bld.add_row({w[e]: 1.0, **Dy, z[e]: -Ue}, GE, -Ue, f"w_y_lo[{e}]")
    if attackable:
        bld.add_row({z[e]: 1.0 for e in attackable}, GE, len(attackable) - budget, "budget")
    lp = bld.build()
    log.debug("interdiction MIP (%s, budget %d): %d columns, %d rows, dual bound %g",
              model, budget, lp.n_vars, lp.n_rows, Y)
    mip = MixedIntegerProgram(lp, tuple(z.values()))
    return InterdictionMip(mip, opf, budget, z, np.array(xs, dtype=int), np.array(ys, dtype=int),
                           w, Y, U, bounded)


# ---------------------------------------------------------------------------
# exact AC check

@dataclass
class AcResidualReport:
    max_flow_residual: float
    max_balance_residual: float
    flow_residuals: dict
    balance_residuals: dict

    @property
    def max_residual(self) -> float:
        return max(self.max_flow_residual, self.max_balance_residual)


def exact_branch_flow(br, vi, vj, ti, tj, reverse=False):
    """Exact AC (p, q) injected at the sending end; shunt susceptance taken as 0."""
    G, B = br.g, br.b
    d = ti - tj
    p = G * vi * vi - vi * vj * (G * math.cos(d) + B * math.sin(d))
    q = -B * vi * vi + vi * vj * (B * math.cos(d) - G * math.sin(d))
    return p, q


def dispatch_from_solution(opf: OpfModel, x) -> dict:
    """Collect v, theta, p/q of units and directed branch flows from an LP point."""
    cols = opf.variables.columns
    net = opf.network
    out = {"v": {}, "theta": {}, "p_g": {}, "q_g": {}, "p_d": {}, "q_d": {}, "p_k": {}, "q_k": {}}
    for name, j in cols.items():
        fam, _, rest = name.partition("[")
        key = rest.rstrip("]")
        if fam in ("v", "theta", "p_g", "q_g", "p_d", "q_d"):
            out[fam][int(key)] = float(x[j])
        elif fam in ("p_k", "q_k"):
            out[fam][tuple(int(s) for s in key.split(","))] = float(x[j])
    if opf.model == DC:
        for b in net.buses:
            out["v"].setdefault(b.id, 1.0)
        for (e, i, j), p in list(out["p_k"].items()):
            out["p_k"][(e, j, i)] = -p
    return out


def tight_dispatch(opf: OpfModel, attack=None) -> dict:
    """Optimal dispatch whose loss surrogates sit on their PWL envelopes.

    Shedding is usually indifferent to how far the squared-term columns rise
    above their envelopes, so a second solve keeps shedding at its optimum and
    minimizes the sum of those columns.  The result is the point to compare
    against the exact AC equations.
    """
    attack = opf.attack if attack is None else tuple(attack)
    lp = opf.fixed(attack)
    first = solve_lp(lp)
    if not first.optimal:
        raise RuntimeError(f"lower level ended {first.status}")
    capped = lp.with_rows(lp.c[None, :], (LE,), [first.objective - lp.offset + 1e-9], ("shed_cap",))
    c = np.zeros(lp.n_vars)
    for name, j in opf.variables.columns.items():
        if name.startswith("sq_"):
            c[j] = 1.0
    second = solve_lp(LinearProgram(c, capped.A, capped.senses, capped.b, capped.lower,
                                    capped.upper, capped.var_names, capped.row_names))
    x = second.x if second.optimal else first.x
    return dispatch_from_solution(opf, x)


def evaluate_ac_feasible(network: Network, attack, dispatch: dict) -> AcResidualReport:
    """Residuals of the exact AC branch-flow and nodal-balance equations at ``dispatch``.

    Missing entries default to a flat point (v=1, theta=0, zero power).
    """
    attacked = set(attack)
    v = {b.id: dispatch.get("v", {}).get(b.id, 1.0) for b in network.buses}
    th = {b.id: dispatch.get("theta", {}).get(b.id, 0.0) for b in network.buses}
    pk, qk = dispatch.get("p_k", {}), dispatch.get("q_k", {})
    flow_res = {}
    inj_p = {b.id: 0.0 for b in network.buses}
    inj_q = {b.id: 0.0 for b in network.buses}
    for br in network.branches:
        for i, j in ((br.from_bus, br.to_bus), (br.to_bus, br.from_bus)):
            if br.id in attacked:
                pe, qe = 0.0, 0.0
            else:
                pe, qe = exact_branch_flow(br, v[i], v[j], th[i], th[j])
            key = (br.id, i, j)
            if key in pk or key in qk:
                flow_res[key] = max(abs(pk.get(key, pe) - pe), abs(qk.get(key, qe) - qe))
            inj_p[i] += pe
            inj_q[i] += qe
    bal = {}
    for b in network.buses:
        gp = sum(dispatch.get("p_g", {}).get(g.id, 0.0) for g in network.generators if g.bus == b.id)
        gq = sum(dispatch.get("q_g", {}).get(g.id, 0.0) for g in network.generators if g.bus == b.id)
        dp = sum(dispatch.get("p_d", {}).get(d.id, 0.0) for d in network.demands if d.bus == b.id)
        dq = sum(dispatch.get("q_d", {}).get(d.id, 0.0) for d in network.demands if d.bus == b.id)
        bal[b.id] = max(abs(gp - dp - inj_p[b.id]), abs(gq - dq - inj_q[b.id]))
    return AcResidualReport(max(flow_res.values(), default=0.0), max(bal.values(), default=0.0),
                            flow_res, bal)


def symbol_audit(opf: OpfModel) -> list:
    """Names of columns that do not belong to a known symbol family (empty when clean)."""
    allowed = DC_SYMBOLS if opf.model == DC else LAC_SYMBOLS
    bad = [k for k in opf.variables.columns if k.split("[", 1)[0] not in allowed]
    if len(set(opf.variables.columns.values())) != len(opf.variables.columns):
        bad.append("<duplicate column owner>")
    if opf.base.lower[opf.variables[f"theta[{opf.network.reference_bus}]"]] != 0.0:
        bad.append("<reference angle not fixed>")
    return bad
