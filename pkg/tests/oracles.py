"""Independent reference computations used by the tests.

None of these import the solver code under test; they use brute force,
scipy's HiGHS or scipy's nonlinear root finder instead.
"""

import itertools
import math

import numpy as np
from scipy.optimize import fsolve, linprog


# ---------------------------------------------------------------------------
# random LPs and vertex enumeration

def random_lp(rng, n_max=8, m_max=10):
    """Feasible LP with a finite box: min c x, rows of mixed sense, built around an interior point."""
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    lo = rng.uniform(-3, 0, n)
    hi = lo + rng.uniform(0.5, 4, n)
    x0 = lo + (hi - lo) * rng.uniform(0.2, 0.8, n)
    A = rng.normal(size=(m, n)).round(3)
    A[rng.uniform(size=(m, n)) < 0.2] = 0.0
    for i in range(m):
        if not A[i].any():
            A[i, rng.integers(n)] = 1.0
    n_eq = int(rng.integers(0, min(2, n - 1) + 1)) if n > 1 else 0
    senses, b = [], []
    for i in range(m):
        if i < n_eq:
            senses.append("=")
            b.append(A[i] @ x0)
        elif rng.uniform() < 0.5:
            senses.append("<=")
            b.append(A[i] @ x0 + rng.uniform(0, 2))
        else:
            senses.append(">=")
            b.append(A[i] @ x0 - rng.uniform(0, 2))
    c = rng.normal(size=n).round(3)
    return c, A, senses, np.array(b), lo, hi


def vertex_enumeration(c, A, senses, b, lo, hi, feas_tol=1e-9):
    """Minimum of c x over all vertices of {rows, lo <= x <= hi} (the box keeps it bounded).

    A vertex is fixed by all equality rows, k active inequality rows and
    n - (#eq + k) variables sitting at one of their bounds.
    """
    n = len(c)
    eq = [i for i, s in enumerate(senses) if s == "="]
    ineq = [i for i, s in enumerate(senses) if s != "="]
    best, best_x = math.inf, None
    for k in range(0, min(len(ineq), n - len(eq)) + 1):
        nb = n - len(eq) - k
        vs = list(itertools.combinations(range(n), nb))
        sd = list(itertools.product((0, 1), repeat=nb))
        var_sets = np.array(vs, dtype=int).reshape(len(vs), nb)
        sides = np.array(sd, dtype=int).reshape(len(sd), nb)
        C = len(var_sets)
        E = np.zeros((C, nb, n))
        if nb:
            E[np.arange(C)[:, None], np.arange(nb)[None, :], var_sets] = 1.0
        bound_vals = np.where(sides[None, :, :] == 1, hi[var_sets][:, None, :], lo[var_sets][:, None, :])
        for rows in itertools.combinations(ineq, k):
            act = eq + list(rows)
            R = np.broadcast_to(A[act], (C, len(act), n))
            S = np.concatenate([R, E], axis=1)
            det = np.linalg.det(S)
            ok = np.abs(det) > 1e-10
            if not ok.any():
                continue
            # right-hand sides: one column per choice of bound sides
            rhs = np.concatenate([np.broadcast_to(b[act][None, None, :], (C, len(sides), len(act))),
                                  bound_vals], axis=2)
            X = np.linalg.solve(S[ok][:, None, :, :], rhs[ok][..., None])[..., 0].reshape(-1, n)
            feas = np.all(X >= lo - feas_tol, axis=1) & np.all(X <= hi + feas_tol, axis=1)
            val = X @ A.T
            for i, s in enumerate(senses):
                if s == "<=":
                    feas &= val[:, i] <= b[i] + feas_tol
                elif s == ">=":
                    feas &= val[:, i] >= b[i] - feas_tol
                else:
                    feas &= np.abs(val[:, i] - b[i]) <= feas_tol
            if feas.any():
                vals = X[feas] @ c
                j = int(np.argmin(vals))
                if vals[j] < best:
                    best, best_x = float(vals[j]), X[feas][j]
    return best, best_x


def highs_lp(c, A, senses, b, lo, hi):
    senses = np.array(senses)
    le, ge, eq = senses == "<=", senses == ">=", senses == "="
    A_ub = np.vstack([A[le], -A[ge]])
    b_ub = np.concatenate([b[le], -b[ge]])
    res = linprog(c, A_ub=A_ub if len(b_ub) else None, b_ub=b_ub if len(b_ub) else None,
                  A_eq=A[eq] if eq.any() else None, b_eq=b[eq] if eq.any() else None,
                  bounds=list(zip(lo, hi)), method="highs")
    return res


def exhaustive_mip(lp, binaries):
    """Minimum over all 0/1 patterns of the binaries, each completed by a HiGHS LP solve."""
    senses = np.array(lp.senses)
    best, best_x = math.inf, None
    for pattern in itertools.product((0.0, 1.0), repeat=len(binaries)):
        lo, hi = lp.lower.copy(), lp.upper.copy()
        lo[list(binaries)] = pattern
        hi[list(binaries)] = pattern
        res = highs_lp(lp.c, lp.A, ["<=" if s == "<=" else ">=" if s == ">=" else "=" for s in senses],
                       lp.b, lo, hi)
        if res.status == 0 and res.fun + lp.offset < best:
            best, best_x = res.fun + lp.offset, res.x
    return best, best_x


# ---------------------------------------------------------------------------
# DC shedding, formulated from scratch on the in-service subgraph

def dc_shed(net, attack=(), angle_bound=math.pi / 4):
    """Minimum DC load shedding with the attacked branches simply removed."""
    attack = set(attack)
    buses = [b.id for b in net.buses]
    live = [br for br in net.branches if br.id not in attack]
    nd, ng, nb, nl = len(net.demands), len(net.generators), len(buses), len(live)
    n = nd + ng + nb + nl
    bi = {b: nd + ng + k for k, b in enumerate(buses)}
    c = np.zeros(n)
    c[:nd] = -1.0
    bounds = [(0, d.p_base) for d in net.demands] + [(0, g.p_max) for g in net.generators]
    ref = net.reference_bus
    bounds += [(0, 0) if b == ref else (-angle_bound, angle_bound) for b in buses]
    bounds += [(-br.s_max, br.s_max) for br in live]
    A_eq, b_eq = [], []
    for b in buses:
        row = np.zeros(n)
        for k, d in enumerate(net.demands):
            if d.bus == b:
                row[k] -= 1
        for k, g in enumerate(net.generators):
            if g.bus == b:
                row[nd + k] += 1
        for k, br in enumerate(live):
            if br.from_bus == b:
                row[nd + ng + nb + k] -= 1
            if br.to_bus == b:
                row[nd + ng + nb + k] += 1
        A_eq.append(row)
        b_eq.append(0.0)
    for k, br in enumerate(live):
        row = np.zeros(n)
        row[nd + ng + nb + k] = 1.0
        # flow = -B (theta_f - theta_t) with B < 0 for inductive lines
        row[bi[br.from_bus]] = br.b
        row[bi[br.to_bus]] = -br.b
        A_eq.append(row)
        b_eq.append(0.0)
    res = linprog(c, A_eq=np.array(A_eq), b_eq=b_eq, bounds=bounds, method="highs")
    assert res.status == 0, res.message
    return net.total_demand + res.fun


def islanded_demand(net):
    """Demand that no generator can reach once every attackable branch is cut."""
    import collections
    adj = collections.defaultdict(set)
    for br in net.branches:
        if not br.attackable:
            adj[br.from_bus].add(br.to_bus)
            adj[br.to_bus].add(br.from_bus)
    seen, total = set(), 0.0
    for b in net.bus_ids:
        if b in seen:
            continue
        comp, stack = set(), [b]
        while stack:
            u = stack.pop()
            if u in comp:
                continue
            comp.add(u)
            stack.extend(adj[u])
        seen |= comp
        dem = sum(d.p_base for d in net.demands if d.bus in comp)
        gen = sum(g.p_max for g in net.generators if g.bus in comp)
        total += max(0.0, dem - gen)
    return total


# ---------------------------------------------------------------------------
# exact AC power flow on a small network

def ac_flow(br, vi, vj, ti, tj):
    G, B = br.g, br.b
    d = ti - tj
    p = G * vi * vi - vi * vj * (G * math.cos(d) + B * math.sin(d))
    q = -B * vi * vi + vi * vj * (B * math.cos(d) - G * math.sin(d))
    return p, q


def ac_power_flow(net, slack_bus, v_slack, p_inj, q_inj):
    """Solve the exact AC equations with a slack bus; other buses are PQ with net injections.

    Returns (v, theta, p_slack, q_slack) dictionaries / floats, or ``None`` if
    the root finder does not converge.
    """
    pq = [b.id for b in net.buses if b.id != slack_bus]

    def unpack(z):
        v = {slack_bus: v_slack}
        th = {slack_bus: 0.0}
        for k, b in enumerate(pq):
            v[b] = z[k]
            th[b] = z[len(pq) + k]
        return v, th

    def injections(v, th):
        P = {b.id: 0.0 for b in net.buses}
        Q = {b.id: 0.0 for b in net.buses}
        for br in net.branches:
            for i, j in ((br.from_bus, br.to_bus), (br.to_bus, br.from_bus)):
                p, q = ac_flow(br, v[i], v[j], th[i], th[j])
                P[i] += p
                Q[i] += q
        return P, Q

    def residual(z):
        v, th = unpack(z)
        P, Q = injections(v, th)
        return [P[b] - p_inj.get(b, 0.0) for b in pq] + [Q[b] - q_inj.get(b, 0.0) for b in pq]

    z0 = np.concatenate([np.ones(len(pq)), np.zeros(len(pq))])
    z, info, ier, _ = fsolve(residual, z0, full_output=True, xtol=1e-12)
    if ier != 1 or np.max(np.abs(residual(z))) > 1e-8:
        return None
    v, th = unpack(z)
    P, Q = injections(v, th)
    return v, th, P[slack_bus], Q[slack_bus]
