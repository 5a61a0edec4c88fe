"""Cross-formulation comparison of CAV lists and multi-time-step scoring.

Comparison: every LAC vector is looked up in the DC list of the same time step
and budget (by canonical attack key).  Vectors missing from the DC list count
as undetected; detected ones record how much DC under- or overstates their
shedding.  Averages divide by the full LAC list length, with undetected
entries contributing zero; the detected-only averages are reported alongside.

Scoring: per attack vector, count appearances C, sum ranks R and objectives Y
over T time steps, then ``phi_rank = R*T/C**2`` (lower is more consistently
critical) and ``phi_obj = (Y/C)*(C/T)``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field

from .interdiction import CavList

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ComparisonRow:
    n: int
    attack: str
    zeta_lac: float
    detected: bool
    dc_rank: int | None = None
    zeta_dc: float | None = None
    delta_abs: float | None = None
    delta_rel: float | None = None


@dataclass
class ComparisonReport:
    timestep: int
    budget: int
    base_mva: float
    rows: list
    n_lac: int
    undetected: int
    u: float
    psi_abs: float
    psi_rel: float
    psi_abs_detected: float | None
    psi_rel_detected: float | None
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        if self.n_lac != len(self.rows) or self.undetected != sum(not r.detected for r in self.rows):
            raise ValueError("row counts disagree with n_lac / undetected")
        if self.u != (self.undetected / self.n_lac if self.n_lac else 0.0):
            raise ValueError("u must equal undetected / n_lac")

    @property
    def undetected_mw(self) -> float:
        return math.fsum(r.zeta_lac for r in self.rows if not r.detected) * self.base_mva

    @property
    def underestimated_mw(self) -> float:
        return math.fsum(r.delta_abs for r in self.rows if r.detected) * self.base_mva

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rows"] = [asdict(r) for r in self.rows]
        d["undetected_mw"] = self.undetected_mw
        d["underestimated_mw"] = self.underestimated_mw
        d["psi_abs_mw"] = self.psi_abs * self.base_mva
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ComparisonReport":
        d = dict(d)
        for k in ("undetected_mw", "underestimated_mw", "psi_abs_mw"):
            d.pop(k, None)
        d["rows"] = [ComparisonRow(**r) for r in d["rows"]]
        return cls(**d)


def compare_formulations(lac: CavList, dc: CavList) -> ComparisonReport:
    """Check which LAC vectors the DC list contains and by how much DC misjudges them."""
    if (lac.timestep, lac.budget) != (dc.timestep, dc.budget):
        raise ValueError(f"lists differ in (t, budget): LAC {(lac.timestep, lac.budget)}, "
                         f"DC {(dc.timestep, dc.budget)}")
    dc_by_key = {e.attack.key: e for e in dc.entries}
    rows, warnings = [], []
    for e in lac.entries:
        match = dc_by_key.get(e.attack.key)
        if match is None:
            rows.append(ComparisonRow(e.rank, e.attack.key, e.zeta, False))
            continue
        d_abs = e.zeta - match.zeta
        d_rel = None
        if e.zeta == 0.0:
            msg = f"LAC rank {e.rank} ({e.attack.key}) sheds nothing; relative deviation undefined"
            log.warning(msg)
            warnings.append(msg)
        else:
            d_rel = d_abs / e.zeta
        rows.append(ComparisonRow(e.rank, e.attack.key, e.zeta, True, match.rank, match.zeta,
                                  d_abs, d_rel))
    n = len(rows)
    undetected = sum(not r.detected for r in rows)
    abs_vals = [r.delta_abs for r in rows if r.detected]
    rel_vals = [r.delta_rel for r in rows if r.detected and r.delta_rel is not None]
    if n == 0:
        warnings.append("LAC list is empty; u and averages reported as 0")
    base = lac.entries[0].base_mva if lac.entries else (dc.entries[0].base_mva if dc.entries else 1.0)
    return ComparisonReport(
        timestep=lac.timestep,
        budget=lac.budget,
        base_mva=base,
        rows=rows,
        n_lac=n,
        undetected=undetected,
        u=undetected / n if n else 0.0,
        psi_abs=math.fsum(abs_vals) / n if n else 0.0,
        psi_rel=math.fsum(rel_vals) / n if n else 0.0,
        psi_abs_detected=math.fsum(abs_vals) / len(abs_vals) if abs_vals else None,
        psi_rel_detected=math.fsum(rel_vals) / len(rel_vals) if rel_vals else None,
        warnings=warnings,
    )


COMPARISON_COLUMNS = ("t", "budget", "n_lac", "undetected", "u", "undetected_mw",
                      "underestimated_mw", "psi_abs_mw", "psi_rel")


def comparison_csv(reports) -> str:
    """One row per time step: the per-t bar data (undetected MW, underestimated MW, counts)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COMPARISON_COLUMNS)
    for r in sorted(reports, key=lambda r: (r.budget, r.timestep)):
        w.writerow([r.timestep, r.budget, r.n_lac, r.undetected, _fmt(r.u), _fmt(r.undetected_mw),
                    _fmt(r.underestimated_mw), _fmt(r.psi_abs * r.base_mva), _fmt(r.psi_rel)])
    return buf.getvalue()


def aggregate_comparisons(reports) -> dict:
    """Pooled KPIs over several time steps (all LAC entries weighted equally)."""
    rows = [row for r in reports for row in r.rows]
    n = len(rows)
    undetected = sum(not row.detected for row in rows)
    base = reports[0].base_mva if reports else 1.0
    abs_sum = math.fsum(row.delta_abs for row in rows if row.detected)
    rel_sum = math.fsum(row.delta_rel for row in rows if row.detected and row.delta_rel is not None)
    return {
        "time_steps": len(reports),
        "n_lac": n,
        "undetected": undetected,
        "u": undetected / n if n else 0.0,
        "psi_abs": abs_sum / n if n else 0.0,
        "psi_abs_mw": abs_sum / n * base if n else 0.0,
        "psi_rel": rel_sum / n if n else 0.0,
    }


@dataclass(frozen=True)
class ScoreRow:
    attack: str
    count: int
    rank_sum: int
    obj_sum: float
    phi_rank: float
    phi_obj: float


@dataclass
class ScoreTable:
    approach: str
    budget: int
    T: int
    base_mva: float
    rows: dict

    def by_rank(self) -> list:
        """Ascending rank score (most consistently critical first)."""
        return sorted(self.rows.values(), key=lambda r: (r.phi_rank, -r.phi_obj, r.attack))

    def by_objective(self) -> list:
        """Descending objective score."""
        return sorted(self.rows.values(), key=lambda r: (-r.phi_obj, r.phi_rank, r.attack))

    def to_dict(self) -> dict:
        return {
            "approach": self.approach,
            "budget": self.budget,
            "T": self.T,
            "base_mva": self.base_mva,
            "by_rank": [asdict(r) for r in self.by_rank()],
            "by_objective": [asdict(r) for r in self.by_objective()],
        }


def score_across_timesteps(lists, T: int | None = None) -> ScoreTable:
    """Aggregate CAV lists of several time steps into rank and objective scores.

    ``T`` defaults to the number of lists; pass it explicitly when some time
    steps produced no list at all.
    """
    lists = list(lists)
    if not lists:
        raise ValueError("need at least one CAV list")
    heads = {(cl.approach, cl.budget) for cl in lists}
    if len(heads) > 1:
        raise ValueError(f"lists mix approaches/budgets: {sorted(heads)}")
    steps = [cl.timestep for cl in lists]
    if len(set(steps)) != len(steps):
        raise ValueError("more than one list for the same time step")
    T = len(lists) if T is None else T
    if T < len(lists) or T < 1:
        raise ValueError("T must be at least the number of lists")
    counts: dict = {}
    ranks: dict = {}
    objs: dict = {}
    for cl in lists:
        seen = set()
        for e in cl.entries:
            k = e.attack.key
            if k in seen:
                raise ValueError(f"time step {cl.timestep}: attack {k} listed twice")
            seen.add(k)
            counts[k] = counts.get(k, 0) + 1
            ranks[k] = ranks.get(k, 0) + e.rank
            objs.setdefault(k, []).append(e.zeta)
    rows = {}
    for k in counts:
        C, R = counts[k], ranks[k]
        # fsum over sorted values keeps the result independent of time-step order
        Y = math.fsum(sorted(objs[k]))
        rows[k] = ScoreRow(k, C, R, Y, R * T / C**2, (Y / C) * (C / T))
    approach, budget = heads.pop()
    base = next((e.base_mva for cl in lists for e in cl.entries), 1.0)
    return ScoreTable(approach, budget, T, base, rows)


SCORE_COLUMNS = ("position", "attack", "phi_obj_mw", "phi_rank", "count", "rank_sum", "obj_sum_mw")


def score_csv(table: ScoreTable, top: int | None = 10) -> str:
    """Top-k by objective score with the rank score as a color column."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCORE_COLUMNS)
    rows = table.by_objective()
    for k, r in enumerate(rows[:top] if top else rows, start=1):
        w.writerow([k, r.attack, _fmt(r.phi_obj * table.base_mva), _fmt(r.phi_rank), r.count,
                    r.rank_sum, _fmt(r.obj_sum * table.base_mva)])
    return buf.getvalue()


def _fmt(x) -> str:
    if x is None:
        return ""
    return repr(round(float(x), 9))


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
