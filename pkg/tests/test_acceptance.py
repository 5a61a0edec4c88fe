"""Acceptance criteria, one test each; every test records a PASS/FAIL line shown after the run."""

import math
import random
import shutil
import time
from collections import Counter

import numpy as np
import pytest

from conftest import acceptance_line, rel_close
from grid_interdict import data_path, load_toy
from grid_interdict.analysis import compare_formulations, score_across_timesteps
from grid_interdict.cli import main
from grid_interdict.interdiction import (DEFAULT, EXHAUSTIVE, AttackVector, CavEntry, CavList,
                                         brute_force_cavs, enumerate_cavs, solve_worst_case)
from grid_interdict.lp_core import LE, LinearProgram, solve_lp
from grid_interdict.milp_core import solve_mip
from grid_interdict.opf_formulations import build_interdiction_mip, polygon_rows
from oracles import random_lp, vertex_enumeration

TOYS = ("meshed5", "radial7", "reactive6")
MODELS = ("dc", "lac")
BUDGETS = (1, 2, 3)

# share of LAC vectors the DC list misses on the reactive 6-bus toy at budget 1,
# both lists enumerated to exhaustion (4 of 6), computed once
BLIND_SPOT_U = 4 / 6


@pytest.fixture(scope="module")
def brute():
    return {(g, m, z): brute_force_cavs(load_toy(g), m, z, **EXHAUSTIVE)
            for g in TOYS for m in MODELS for z in BUDGETS}


@pytest.fixture(scope="module")
def worst():
    out = {}
    for g in TOYS:
        net = load_toy(g)
        for m in MODELS:
            for z in BUDGETS:
                out[(g, m, z)] = solve_worst_case(net, m, z)
    return out


def test_oracle_equivalence(brute):
    t0 = time.perf_counter()
    bad = []
    for g in TOYS:
        net = load_toy(g)
        for m in MODELS:
            for z in BUDGETS:
                got = enumerate_cavs(net, m, z, **EXHAUSTIVE)
                ref = brute[(g, m, z)]
                same_set = Counter(e.attack for e in got) == Counter(e.attack for e in ref)
                zr = {e.attack: e.zeta for e in ref}
                close = same_set and all(rel_close(e.zeta, zr[e.attack], 1e-6) for e in got)
                if not close:
                    bad.append(f"{g}/{m}/Z{z}")
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 120
    acceptance_line("oracle equivalence", ok,
                    f"18 cases, mismatches {bad or 'none'}, enumeration time {elapsed:.1f}s (< 120s)")
    assert ok


def test_mip_vs_enumeration(brute, worst):
    bad, audits, worst_ratio = [], 0, 0.0
    for g in TOYS:
        net = load_toy(g)
        for m in MODELS:
            for z in BUDGETS:
                ref = brute[(g, m, z)].entries[0].zeta
                entry = worst[(g, m, z)]
                im = build_interdiction_mip(net, m, z)
                sol = solve_mip(im.mip, 1e-9, lp_backend="highs")
                audit = im.audit(sol.x)
                worst_ratio = max(worst_ratio, audit.max_dual_ratio)
                audits += audit.ok
                if not (sol.optimal and rel_close(-sol.objective, ref, 1e-6)
                        and rel_close(entry.zeta, ref, 1e-6) and audit.ok):
                    bad.append(f"{g}/{m}/Z{z}")
    ok = not bad
    acceptance_line("MIP vs enumeration", ok,
                    f"18 cases, mismatches {bad or 'none'}, big-M audits passed {audits}/18, "
                    f"largest |dual|/bound {worst_ratio:.3f}")
    assert ok


def test_lp_solver_500():
    rng = np.random.default_rng(2024)
    worst_err = worst_gap = 0.0
    fails = 0
    for _ in range(500):
        c, A, senses, b, lo, hi = random_lp(rng)
        ref, _ = vertex_enumeration(c, A, senses, b, lo, hi)
        sol = solve_lp(LinearProgram(c, A, senses, b, lo, hi))
        if not sol.optimal:
            fails += 1
            continue
        worst_err = max(worst_err, abs(sol.objective - ref))
        worst_gap = max(worst_gap, abs(sol.objective - sol.dual_objective))
    ok = fails == 0 and worst_err <= 1e-7 and worst_gap <= 1e-7
    acceptance_line("LP solver", ok,
                    f"500 LPs, non-optimal {fails}, max |obj - vertex oracle| {worst_err:.2e}, "
                    f"max duality gap {worst_gap:.2e}")
    assert ok


def test_polygon_soundness():
    rng = np.random.default_rng(99)
    n = 8
    kept, violations = 0, 0
    while kept < 100_000:
        s = rng.uniform(0.1, 5.0, 50_000)
        p = rng.uniform(-1, 1, s.size) * s
        q = rng.uniform(-1, 1, s.size) * s
        inside = np.ones(s.size, dtype=bool)
        for cs, sn, r in polygon_rows(n, 1.0):
            inside &= cs * p + sn * q <= r * s
        take = np.flatnonzero(inside)[: 100_000 - kept]
        violations += int(np.sum(p[take] ** 2 + q[take] ** 2 > s[take] ** 2))
        kept += take.size
    # reach of the polygon along the k=0 direction, from an LP over its half-planes
    rows = polygon_rows(n, 1.0)
    lp = LinearProgram([-1.0, 0.0], [[c, sn] for c, sn, _ in rows], [LE] * n, [r for *_, r in rows],
                       [-2, -2], [2, 2])
    reach = -solve_lp(lp).objective
    factor_err = abs(reach - math.cos(math.pi / 8))
    ok = violations == 0 and factor_err <= 1e-9
    acceptance_line("polygon soundness", ok,
                    f"{kept} feasible samples, {violations} outside the circle; k=0 reach {reach:.12f} "
                    f"vs cos(pi/8), error {factor_err:.1e}")
    assert ok


def test_dc_blind_spot():
    net = load_toy("reactive6")
    lac = enumerate_cavs(net, "lac", 1, **EXHAUSTIVE)
    dc = enumerate_cavs(net, "dc", 1, **EXHAUSTIVE)
    rep = compare_formulations(lac, dc)
    missed = [r.attack for r in rep.rows if not r.detected]
    ok = rep.u > 0 and rep.u == BLIND_SPOT_U
    acceptance_line("DC blind spot", ok,
                    f"u = {rep.undetected}/{rep.n_lac} = {rep.u:.4f} (regression {BLIND_SPOT_U:.4f}); "
                    f"LAC vectors missed by DC: {', '.join(missed)}")
    assert ok


def _stream(rng, T):
    keys = [AttackVector(c).key for c in ((1,), (2,), (3,), (4,), (1, 2), (2, 5), (3, 6), (7,))]
    lists = []
    for t in range(1, T + 1):
        chosen = rng.sample(keys, rng.randint(1, len(keys)))
        zs = sorted((rng.uniform(0, 3) for _ in chosen), reverse=True)
        entries = [CavEntry(k + 1, AttackVector.from_key(x), z, 100.0, 0.0, "dc", 2, t)
                   for k, (x, z) in enumerate(zip(chosen, zs))]
        lists.append(CavList(entries, "count", "dc", 2, t))
    return lists


def _entry_list(pairs, approach, t):
    entries = [CavEntry(k + 1, AttackVector.from_key(x), z, 100.0, 0.0, approach, 2, t)
               for k, (x, z) in enumerate(pairs)]
    return CavList(entries, "count", approach, 2, t)


def test_scoring_identities():
    T = 6
    lists = [_entry_list([("2", 1.0), ("8", 0.8), ("1", 0.5)] if t % 3 == 0 else
                         [("7", 0.9), ("8", 0.8), ("1", 0.5)], "dc", t) for t in range(1, T + 1)]
    table = score_across_timesteps(lists)
    x, y = table.rows["1"].phi_rank, table.rows["2"].phi_rank
    rng = random.Random(7)
    worst_rel, checked = 0.0, 0
    for _ in range(1000):
        T = rng.randint(1, 16)
        tab = score_across_timesteps(_stream(rng, T))
        for row in tab.rows.values():
            checked += 1
            worst_rel = max(worst_rel, abs(row.phi_obj * T - row.obj_sum) / max(row.obj_sum, 1e-300))
    ok = x == 3.0 and y == 3.0 and worst_rel <= 1e-12
    acceptance_line("scoring identities", ok,
                    f"rank score every-step@3 = {x}, every-third@1 = {y}; phi_obj*T vs Y over "
                    f"{checked} vectors in 1000 streams, max rel. deviation {worst_rel:.1e}")
    assert ok


def test_undetected_share_identity(brute):
    reports = []
    for g in TOYS:
        net = load_toy(g)
        for z in BUDGETS:
            reports.append(compare_formulations(brute[(g, "lac", z)], brute[(g, "dc", z)]))
            lac = enumerate_cavs(net, "lac", z)
            dc = enumerate_cavs(net, "dc", z, DEFAULT, DEFAULT)
            reports.append(compare_formulations(lac, dc))
    rng = random.Random(11)
    for _ in range(500):
        a, b = _stream(rng, 2)
        b = CavList([CavEntry(e.rank, e.attack, e.zeta, 100.0, 0.0, "dc", 2, 1) for e in b.entries],
                    "count", "dc", 2, 1)
        reports.append(compare_formulations(a, b))
    bad = [r for r in reports
           if r.u != (r.undetected / r.n_lac if r.n_lac else 0.0)
           or r.undetected != sum(not row.detected for row in r.rows)]
    ok = not bad
    acceptance_line("u = U/N identity", ok,
                    f"{len(reports)} reports checked here (toy grids and random lists), {len(bad)} "
                    f"violations; every ComparisonReport also verifies it when constructed")
    assert ok


def test_budget_monotonicity(worst):
    bad = []
    for g in TOYS:
        for m in MODELS:
            vals = [worst[(g, m, z)].zeta for z in BUDGETS]
            if not all(a <= b + 1e-9 for a, b in zip(vals, vals[1:])):
                bad.append(f"{g}/{m}: {vals}")
    ok = not bad
    summary = "; ".join(f"{g}/{m} " + "/".join(f"{worst[(g, m, z)].zeta:.4g}" for z in BUDGETS)
                        for g in TOYS for m in MODELS)
    acceptance_line("budget monotonicity", ok, f"violations {bad or 'none'}; shed Z=1/2/3: {summary}")
    assert ok


def _pipeline(out):
    grid, ts = str(data_path("toy5_meshed.json")), str(data_path("toy5_timeseries.csv"))
    codes = []
    for model in MODELS:
        for z in (1, 2):
            codes.append(main(["enumerate", "--grid", grid, "--timeseries", ts, "--model", model,
                               "--budget", str(z), "--out", str(out)]))
            codes.append(main(["score", "--model", model, "--budget", str(z), "--out", str(out)]))
    codes.append(main(["report", "--out", str(out)]))
    return codes


def test_end_to_end_determinism(tmp_path):
    out = tmp_path / "run"
    snaps = []
    for _ in range(2):
        if out.exists():
            shutil.rmtree(out)
        codes = _pipeline(out)
        assert set(codes) == {0}
        snaps.append({p.relative_to(out).as_posix(): p.read_bytes()
                      for p in sorted(out.rglob("*")) if p.is_file()})
    jsonl = [k for k in snaps[0] if k.endswith(".jsonl")]
    ok = snaps[0] == snaps[1] and len(jsonl) == 16
    acceptance_line("end-to-end determinism", ok,
                    f"two full pipeline runs, {len(snaps[0])} files ({len(jsonl)} JSONL), "
                    f"byte-identical: {snaps[0] == snaps[1]}")
    assert ok
