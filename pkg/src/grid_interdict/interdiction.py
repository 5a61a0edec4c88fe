"""Worst-case attack solving and ranked enumeration of critical attack vectors.

Enumeration repeatedly solves the single-level MIP and cuts off what it found:

* an attack using fewer branches than the budget is cut together with all of
  its supersets (adding branches to it cannot be a new, distinct vector);
* an attack using the full budget is cut exactly.

Each MIP optimum is mapped to a canonical representative before it is
recorded: among its subsets with the same shedding, the one with the fewest
branches, then the lexicographically smallest ids.  Every subset of an
admissible attack is itself admissible under the cuts above, so this is just
a different optimal solution of the same MIP, and it makes the result
independent of which optimum the tree search happens to return.

Reported objective values come from solving the lower-level LP with the
attack fixed, so MIP and brute-force results are directly comparable.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterator

from .grid_model import Network
from .lp_core import OPTIMAL
from .milp_core import LIMIT, add_nogood_cut, solve_mip
from .opf_formulations import (DC, LAC, MODELS, FormulationConfig, OpfModel,
                               build_interdiction_mip, build_opf)

log = logging.getLogger(__name__)

COUNT, THRESHOLD, EXHAUSTED = "count", "threshold", "exhausted"

# default depth: top 5 LAC vectors; at least 50 DC vectors, and more while the
# 50th still exceeds half of the worst case
DEFAULT_LIMITS = {DC: (50, 0.5), LAC: (5, None)}

BRUTE_FORCE_GUARD = 20_000

DEFAULT = "default"     # use the per-model depth policy for N or phi
EXHAUSTIVE = {"max_solutions": math.inf, "threshold": None}


class SolverLimitError(RuntimeError):
    pass


@dataclass(frozen=True, order=True)
class AttackVector:
    ids: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(sorted({int(i) for i in self.ids})))

    @property
    def key(self) -> str:
        return "+".join(map(str, self.ids)) if self.ids else "none"

    @classmethod
    def from_key(cls, key: str) -> "AttackVector":
        key = key.strip()
        if key in ("", "none"):
            return cls(())
        return cls(tuple(int(s) for s in key.split("+")))

    @property
    def sort_key(self) -> tuple:
        return (len(self.ids), self.ids)

    def __len__(self):
        return len(self.ids)

    def __iter__(self):
        return iter(self.ids)

    def __str__(self):
        return self.key


@dataclass(frozen=True)
class CavEntry:
    rank: int
    attack: AttackVector
    zeta: float             # per unit
    base_mva: float
    gap: float = 0.0
    approach: str = DC
    budget: int = 0
    timestep: int = 0
    status: str = OPTIMAL

    @property
    def zeta_mw(self) -> float:
        return self.zeta * self.base_mva

    def to_record(self) -> dict:
        # MW derived from the rounded per-unit value so a read/write cycle is stable
        pu = round(self.zeta, 12)
        return {
            "t": self.timestep,
            "a": self.approach,
            "Z": self.budget,
            "n": self.rank,
            "attack": list(self.attack.ids),
            "zeta_pu": pu,
            "zeta_mw": round(pu * self.base_mva, 9),
            "gap": round(self.gap, 12) if math.isfinite(self.gap) else None,
            "status": self.status,
            "base_mva": self.base_mva,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "CavEntry":
        zeta = float(rec["zeta_pu"])
        base = float(rec["base_mva"]) if "base_mva" in rec else (
            float(rec["zeta_mw"]) / zeta if zeta else 100.0)
        gap = rec.get("gap")
        return cls(int(rec["n"]), AttackVector(tuple(rec["attack"])), zeta, base,
                   math.inf if gap is None else float(gap), rec["a"], int(rec["Z"]),
                   int(rec["t"]), rec.get("status", OPTIMAL))


@dataclass
class CavList:
    entries: list
    stop_reason: str = EXHAUSTED
    approach: str = DC
    budget: int = 0
    timestep: int = 0

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def rank_of(self, attack: AttackVector):
        for e in self.entries:
            if e.attack == attack:
                return e.rank
        return None

    def check(self, tie_tol: float = 1e-7) -> None:
        """Raise ``ValueError`` if the list violates its ordering or exclusion rules."""
        seen = set()
        for k, e in enumerate(self.entries):
            if e.rank != k + 1:
                raise ValueError("ranks must be contiguous from 1")
            if e.attack in seen:
                raise ValueError(f"duplicate attack vector {e.attack}")
            seen.add(e.attack)
            if len(e.attack) > self.budget:
                raise ValueError(f"attack {e.attack} exceeds budget {self.budget}")
            if k and e.zeta > self.entries[k - 1].zeta + tie_tol:
                raise ValueError("objective values must be non-increasing")
            for p in self.entries[:k]:
                if len(p.attack) < self.budget and set(p.attack.ids) < set(e.attack.ids):
                    raise ValueError(f"{e.attack} is a superset of earlier sub-budget {p.attack}")

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e.to_record(), sort_keys=True) + "\n" for e in self.entries)

    @classmethod
    def from_jsonl(cls, text: str, stop_reason: str = EXHAUSTED) -> "CavList":
        entries = [CavEntry.from_record(json.loads(line)) for line in text.splitlines() if line.strip()]
        head = entries[0] if entries else None
        return cls(entries, stop_reason, head.approach if head else DC,
                   head.budget if head else 0, head.timestep if head else 0)


@dataclass(frozen=True)
class SearchConfig:
    formulation: FormulationConfig = field(default_factory=FormulationConfig)
    mip_gap: float = 1e-9
    node_limit: int = 10**6
    tie_tol: float = 1e-7
    zero_tol: float = 1e-7
    lp_backend: str = "highs"
    audit: bool = True
    audit_retries: int = 2


@dataclass
class _Found:
    attack: AttackVector
    zeta: float
    gap: float = 0.0
    status: str = OPTIMAL


class _Evaluator:
    """Fixed-attack lower-level shedding with a cache keyed by attack."""

    def __init__(self, opf: OpfModel):
        self.opf = opf
        self.cache: dict = {}

    def __call__(self, attack: AttackVector) -> float:
        if attack not in self.cache:
            self.cache[attack] = self.opf.shed(attack.ids)
        return self.cache[attack]

    def canonical(self, attack: AttackVector, tie_tol: float) -> AttackVector:
        ids = attack.ids
        if len(ids) <= 10:
            subsets = [AttackVector(c) for k in range(len(ids) + 1)
                       for c in itertools.combinations(ids, k)]
            values = {s: self(s) for s in subsets}
            best = max(values.values())
            return min((s for s, v in values.items() if v >= best - tie_tol),
                       key=lambda s: s.sort_key)
        # large attacks: drop branches one at a time while shedding holds
        current, value = attack, self(attack)
        changed = True
        while changed:
            changed = False
            for e in current.ids:
                trial = AttackVector(tuple(i for i in current.ids if i != e))
                if self(trial) >= value - tie_tol:
                    current, value, changed = trial, max(value, self(trial)), True
                    break
        return current


class _MipSearch:
    """Holds the interdiction MIP plus accumulated cuts; escalates dual bounds on audit failure."""

    def __init__(self, network, model, budget, config: SearchConfig, opf: OpfModel):
        self.network, self.model, self.budget = network, model, budget
        self.config = config
        self.opf = opf
        self.cuts: list = []   # (attack ids, superset?)
        self.formulation = config.formulation
        self.exhausted = False
        self._rebuild()

    def _rebuild(self):
        self.im = build_interdiction_mip(self.network, self.model, self.budget,
                                         self.formulation, opf=self.opf)
        self.mip = self.im.mip
        for ids, superset in self.cuts:
            self._apply(ids, superset)

    def _apply(self, ids, superset):
        cols = [self.im.z_cols[e] for e in ids]
        self.mip = add_nogood_cut(self.mip, cols, superset=superset,
                                  over=tuple(self.im.z_cols.values()))

    def cut(self, attack: AttackVector):
        superset = len(attack) < self.budget
        self.cuts.append((attack.ids, superset))
        if attack.ids or not superset:
            self._apply(attack.ids, superset)
        else:
            # the empty attack below budget: every attack is a superset of it
            self.exhausted = True

    def solve(self):
        """Best remaining attack as ``(AttackVector, mip solution)`` or ``None``."""
        if self.exhausted:
            return None
        cfg = self.config
        for attempt in range(cfg.audit_retries + 1):
            sol = solve_mip(self.mip, cfg.mip_gap, node_limit=cfg.node_limit,
                            lp_backend=cfg.lp_backend)
            if sol.status not in (OPTIMAL, LIMIT) or sol.x.size == 0:
                if sol.status == LIMIT:
                    raise SolverLimitError("node limit reached before any feasible attack was found")
                return None
            attack = AttackVector(self.im.attack_of(sol.x))
            if not cfg.audit:
                return attack, sol
            report = self.im.audit_attack(attack.ids)
            if report.ok:
                return attack, sol
            log.warning("big-M audit failed for %s (%s); raising dual bound",
                        attack, ", ".join(report.active[:5]))
            self.formulation = replace(self.formulation,
                                       dual_bound=self.formulation.dual_bound * 10)
            self._rebuild()
        log.warning("big-M audit still failing after %d retries", cfg.audit_retries)
        return attack, sol


def _limits(model, max_solutions, threshold):
    n_def, phi_def = DEFAULT_LIMITS[model]
    return (n_def if max_solutions in (None, DEFAULT) else max_solutions,
            phi_def if threshold == DEFAULT else threshold)


def _order(found: list, tie_tol: float) -> list:
    """Sort by shedding, grouping near-equal values and ordering each group canonically."""
    found = sorted(found, key=lambda f: (-f.zeta, f.attack.sort_key))
    out, group = [], []
    for f in found:
        if group and group[0].zeta - f.zeta > tie_tol:
            out.extend(sorted(group, key=lambda g: g.attack.sort_key))
            group = []
        group.append(f)
    out.extend(sorted(group, key=lambda g: g.attack.sort_key))
    return out


def _collect(stream: Iterator, n_max, phi, tie_tol, zero_tol):
    """Pull accepted vectors until the stopping rule fires; returns (ordered, reason)."""
    got: list = []
    stopped = False
    for f in stream:
        if got and f.zeta <= zero_tol:
            break
        if got and len(got) >= n_max and (phi is None or got[-1].zeta < phi * got[0].zeta):
            # stopping point reached; only finish the current tie group
            if f.zeta < min(g.zeta for g in got[int(n_max) - 1:]) - tie_tol:
                stopped = True
                break
        got.append(f)
        if got[0].zeta <= zero_tol:
            return got[:1], THRESHOLD
    ordered = _order(got, tie_tol)
    if math.isinf(n_max):
        return ordered, EXHAUSTED
    for n in range(n_max, len(ordered) + 1):
        z1, zn = ordered[0].zeta, ordered[n - 1].zeta
        if phi is None or zn < phi * z1:
            if n < len(ordered) or stopped:
                return ordered[:n], COUNT if n == n_max else THRESHOLD
            break
    return ordered, EXHAUSTED


def _to_list(ordered, reason, net: Network, model, budget, timestep) -> CavList:
    entries = [CavEntry(k + 1, f.attack, f.zeta, net.base_mva, f.gap, model, budget, timestep, f.status)
               for k, f in enumerate(ordered)]
    return CavList(entries, reason, model, budget, timestep)


def _check_args(network, model, budget):
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    if budget < 0:
        raise ValueError("budget must be >= 0")


def solve_worst_case(network: Network, model: str, budget: int,
                     config: SearchConfig | None = None, timestep: int = 0) -> CavEntry:
    """Rank-1 attack: maximum shedding with at most ``budget`` branches attacked."""
    _check_args(network, model, budget)
    config = config or SearchConfig()
    opf = build_opf(network, model, None, config.formulation)
    ev = _Evaluator(opf)
    search = _MipSearch(network, model, budget, config, opf)
    res = search.solve()
    if res is None:
        raise RuntimeError("interdiction MIP has no feasible attack")
    attack, sol = res
    canon = ev.canonical(attack, config.tie_tol)
    zeta = ev(canon)
    if abs(-sol.objective - zeta) > 1e-6 * max(1.0, abs(zeta)):
        log.warning("MIP objective %.10g differs from lower-level shedding %.10g", -sol.objective, zeta)
    status = OPTIMAL if sol.status == OPTIMAL else LIMIT
    return CavEntry(1, canon, zeta, network.base_mva, sol.gap, model, budget, timestep, status)


def _mip_stream(search: _MipSearch, ev: _Evaluator, tie_tol: float):
    while True:
        res = search.solve()
        if res is None:
            return
        attack, sol = res
        canon = ev.canonical(attack, tie_tol)
        zeta = ev(canon)
        log.debug("found %s with shedding %.10g (gap %.2g)", canon, zeta, sol.gap)
        yield _Found(canon, zeta, sol.gap, OPTIMAL if sol.status == OPTIMAL else LIMIT)
        search.cut(canon)


def enumerate_cavs(network: Network, model: str, budget: int, max_solutions=DEFAULT,
                   threshold=DEFAULT, config: SearchConfig | None = None,
                   timestep: int = 0) -> CavList:
    """Ranked critical attack vectors via repeated MIP solves with exclusion cuts.

    ``max_solutions`` (N) and ``threshold`` (phi) default to the per-model depth
    policy; the list stops at rank N unless rank N still sheds at least
    ``phi`` times the worst case, in which case it grows until it does not.
    ``threshold=None`` never extends; ``**EXHAUSTIVE`` runs until no
    remaining attack sheds load.
    """
    _check_args(network, model, budget)
    n_max, phi = _limits(model, max_solutions, threshold)
    if not n_max >= 1:
        raise ValueError("max_solutions must be >= 1")
    if phi is not None and not 0.0 <= phi <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    config = config or SearchConfig()
    opf = build_opf(network, model, None, config.formulation)
    ev = _Evaluator(opf)
    search = _MipSearch(network, model, budget, config, opf)
    ordered, reason = _collect(_mip_stream(search, ev, config.tie_tol), n_max, phi,
                               config.tie_tol, config.zero_tol)
    return _to_list(ordered, reason, network, model, budget, timestep)


def _brute_stream(network, budget, ev: _Evaluator, tie_tol):
    ids = network.attackable_ids
    n_sets = sum(math.comb(len(ids), k) for k in range(min(budget, len(ids)) + 1))
    if n_sets > BRUTE_FORCE_GUARD:
        raise ValueError(f"brute force needs {n_sets} LP solves (guard {BRUTE_FORCE_GUARD})")
    found = [_Found(AttackVector(c), 0.0) for k in range(min(budget, len(ids)) + 1)
             for c in itertools.combinations(ids, k)]
    for f in found:
        f.zeta = ev(f.attack)
    accepted: list = []
    for f in _order(found, tie_tol):
        s = set(f.attack.ids)
        if any(len(p.attack) < budget and set(p.attack.ids) < s for p in accepted):
            continue
        accepted.append(f)
        yield f


def brute_force_cavs(network: Network, model: str, budget: int, max_solutions=DEFAULT,
                     threshold=DEFAULT, config: SearchConfig | None = None,
                     timestep: int = 0) -> CavList:
    """Reference list from fixed-attack LP solves over every attack within budget."""
    _check_args(network, model, budget)
    n_max, phi = _limits(model, max_solutions, threshold)
    config = config or SearchConfig()
    ev = _Evaluator(build_opf(network, model, None, config.formulation))
    ordered, reason = _collect(_brute_stream(network, budget, ev, config.tie_tol), n_max, phi,
                               config.tie_tol, config.zero_tol)
    return _to_list(ordered, reason, network, model, budget, timestep)


def read_cav_file(path) -> CavList:
    from pathlib import Path
    p = Path(path)
    meta = p.with_name(p.name.replace(".cavs.jsonl", ".meta.json"))
    reason = EXHAUSTED
    if meta.exists():
        reason = json.loads(meta.read_text(encoding="utf-8")).get("stop_reason", EXHAUSTED)
    return CavList.from_jsonl(p.read_text(encoding="utf-8"), reason)
