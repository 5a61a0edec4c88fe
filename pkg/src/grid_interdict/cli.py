"""Command-line entry point: ``grid-interdict solve|enumerate|compare|score|report``.

Outputs live under ``--out``::

    <out>/<model>/Z<budget>/t<step>.cavs.jsonl     ranked CAV list
    <out>/<model>/Z<budget>/t<step>.meta.json      stopping reason and limits
    <out>/<model>/Z<budget>/t<step>.worst.json     rank-1 result of ``solve``
    <out>/<model>/Z<budget>/run.json               effective configuration
    <out>/reports/...                              comparison and score tables

``compare``, ``score`` and ``report`` only read enumeration outputs; they
never solve anything.  Exit codes: 0 ok, 1 solver limit, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from . import analysis
from .grid_model import GridError, LoadCase, apply_case, load_network, load_timeseries
from .interdiction import (DEFAULT, DEFAULT_LIMITS, LIMIT, SearchConfig, SolverLimitError,
                           enumerate_cavs, read_cav_file, solve_worst_case)
from .lp_core import dump_lp
from .opf_formulations import MODELS, FormulationConfig, LacConfig, build_interdiction_mip, build_opf

log = logging.getLogger("grid_interdict")

EXIT_OK, EXIT_LIMIT, EXIT_INPUT = 0, 1, 2
COMMANDS = ("solve", "enumerate", "compare", "score", "report")


class InputError(Exception):
    pass


@dataclass
class RunConfig:
    command: str = "enumerate"
    grid: str | None = None
    timeseries: str | None = None
    timesteps: list | None = None
    model: str = "dc"
    budget: int = 1
    max_solutions: int | None = None       # None: per-model default; 0 or less never valid
    threshold: float | str | None = DEFAULT
    exhaustive: bool = False
    polygon_sides: int = 8
    pwl_segments: int = 6
    v0: float = 1.0
    angle_diff_max: float = 0.35
    angle_bound: float = math.pi / 4
    mip_gap: float = 1e-9
    tie_tol: float = 1e-7
    zero_tol: float = 1e-7
    node_limit: int = 10**6
    lp_backend: str = "highs"
    jobs: int = 1
    out: str = "out"
    top: int = 10
    dump_models: bool = False
    seed: int = 0

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise InputError(f"unknown command {self.command!r}")
        if self.command in ("solve", "enumerate") and not self.grid:
            raise InputError("--grid is required")
        if self.model not in MODELS:
            raise InputError(f"--model must be one of {MODELS}")
        if self.budget < 0:
            raise InputError("--budget must be >= 0")
        if self.max_solutions is not None and self.max_solutions < 1:
            raise InputError("--max-solutions must be >= 1")
        if isinstance(self.threshold, (int, float)) and not 0 <= self.threshold <= 1:
            raise InputError("--threshold must lie in [0, 1]")
        if self.jobs < 1:
            raise InputError("--jobs must be >= 1")
        if self.lp_backend not in ("highs", "simplex"):
            raise InputError("lp_backend must be 'highs' or 'simplex'")
        try:
            self.search_config()
        except ValueError as exc:
            raise InputError(str(exc)) from None

    def search_config(self) -> SearchConfig:
        lac = LacConfig(polygon_sides=self.polygon_sides, pwl_segments=self.pwl_segments,
                        v0=self.v0, angle_diff_max=self.angle_diff_max)
        form = FormulationConfig(lac=lac, angle_bound=self.angle_bound)
        return SearchConfig(formulation=form, mip_gap=self.mip_gap, node_limit=self.node_limit,
                            tie_tol=self.tie_tol, zero_tol=self.zero_tol, lp_backend=self.lp_backend)

    def limits(self):
        if self.exhaustive:
            return math.inf, None
        n = DEFAULT if self.max_solutions is None else self.max_solutions
        return n, self.threshold

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InputError(f"unknown config field(s) {sorted(unknown)}")
        return cls(**d)


def parse_timesteps(text: str) -> list:
    """``"1-4"``, ``"3"`` or ``"1,3,5-7"`` to a sorted list of distinct integers."""
    out = set()
    for part in text.split(","):
        part = part.strip()
        m = re.fullmatch(r"(\d+)(?:-(\d+))?", part)
        if not m:
            raise InputError(f"bad --timesteps item {part!r}")
        a = int(m.group(1))
        b = int(m.group(2) or a)
        if b < a:
            raise InputError(f"empty --timesteps range {part!r}")
        out.update(range(a, b + 1))
    return sorted(out)


def _threshold(text: str):
    if text.lower() in ("none", "off"):
        return None
    if text == DEFAULT:
        return DEFAULT
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="grid-interdict",
                                description="Critical attack vectors of power grids via bilevel interdiction.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("solve", "worst-case attack per time step"),
                           ("enumerate", "ranked CAV lists per time step"),
                           ("compare", "LAC vs DC comparison from enumeration outputs"),
                           ("score", "multi-time-step scores from enumeration outputs"),
                           ("report", "all comparison and score tables from enumeration outputs")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", help="run.json to replay; other flags are ignored")
        s.add_argument("--grid")
        s.add_argument("--timeseries")
        s.add_argument("--timesteps", help="e.g. 1-4 or 1,3,5-7")
        s.add_argument("--model", choices=MODELS, default="dc")
        s.add_argument("--budget", type=int, default=1)
        s.add_argument("--max-solutions", type=int)
        s.add_argument("--threshold", type=_threshold, default=DEFAULT,
                       help="fraction of the worst case (or 'none')")
        s.add_argument("--exhaustive", action="store_true", help="enumerate until no attack sheds load")
        s.add_argument("--pwl-segments", type=int, default=6)
        s.add_argument("--polygon-sides", type=int, default=8)
        s.add_argument("--out", default="out")
        s.add_argument("--jobs", type=int, default=1)
        s.add_argument("--top", type=int, default=10)
        s.add_argument("--dump-models", action="store_true")
    return p


def config_from_args(args) -> RunConfig:
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise InputError(f"config file not found: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"{args.config}: {exc}") from None
        data["command"] = args.command
        return RunConfig.from_dict(data)
    return RunConfig(
        command=args.command, grid=args.grid, timeseries=args.timeseries,
        timesteps=parse_timesteps(args.timesteps) if args.timesteps else None,
        model=args.model, budget=args.budget, max_solutions=args.max_solutions,
        threshold=args.threshold, exhaustive=args.exhaustive, pwl_segments=args.pwl_segments,
        polygon_sides=args.polygon_sides, out=args.out, jobs=args.jobs, top=args.top,
        dump_models=args.dump_models,
    )


def _cases(cfg: RunConfig, network) -> list:
    if cfg.timeseries:
        cases = load_timeseries(cfg.timeseries, network)
    else:
        cases = [LoadCase(1)]
    if cfg.timesteps is not None:
        by_t = {c.timestep: c for c in cases}
        missing = [t for t in cfg.timesteps if t not in by_t]
        if missing:
            raise InputError(f"time step(s) {missing} not in the time series (1..{len(cases)})")
        cases = [by_t[t] for t in cfg.timesteps]
    return cases


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _step_dir(cfg: RunConfig, model: str | None = None) -> Path:
    return Path(cfg.out) / (model or cfg.model) / f"Z{cfg.budget}"


def _enumerate_job(job):
    network, case, cfg = job
    snap = apply_case(network, case)
    n, phi = cfg.limits()
    cl = enumerate_cavs(snap, cfg.model, cfg.budget, n, phi, cfg.search_config(), case.timestep)
    return case.timestep, cl


def _solve_job(job):
    network, case, cfg = job
    snap = apply_case(network, case)
    return case.timestep, solve_worst_case(snap, cfg.model, cfg.budget, cfg.search_config(), case.timestep)


def _map(func, jobs, n_workers):
    if n_workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            return list(pool.map(func, jobs))
    return [func(j) for j in jobs]


def _dump_models(cfg: RunConfig, network, cases) -> None:
    d = _step_dir(cfg) / "models"
    form = cfg.search_config().formulation
    for case in cases:
        snap = apply_case(network, case)
        opf = build_opf(snap, cfg.model, None, form)
        _write(d / f"t{case.timestep}.lower.txt", dump_lp(opf.lp))
        im = build_interdiction_mip(snap, cfg.model, cfg.budget, form, opf=opf)
        _write(d / f"t{case.timestep}.mip.txt", dump_lp(im.mip.lp))


def _write_run(cfg: RunConfig, where: Path) -> None:
    _write(where / "run.json", json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")


def cmd_solve(cfg: RunConfig) -> int:
    network = load_network(cfg.grid)
    cases = _cases(cfg, network)
    if cfg.dump_models:
        _dump_models(cfg, network, cases)
    results = _map(_solve_job, [(network, c, cfg) for c in cases], cfg.jobs)
    d = _step_dir(cfg)
    records = []
    for t, entry in results:
        rec = entry.to_record()
        records.append(rec)
        _write(d / f"t{t}.worst.json", json.dumps(rec, indent=2, sort_keys=True) + "\n")
    _write_run(cfg, d)
    print(json.dumps(records, indent=2, sort_keys=True))
    return EXIT_LIMIT if any(r["status"] == LIMIT for r in records) else EXIT_OK


def cmd_enumerate(cfg: RunConfig) -> int:
    network = load_network(cfg.grid)
    cases = _cases(cfg, network)
    if cfg.dump_models:
        _dump_models(cfg, network, cases)
    results = _map(_enumerate_job, [(network, c, cfg) for c in cases], cfg.jobs)
    d = _step_dir(cfg)
    n, phi = cfg.limits()
    limited = False
    for t, cl in results:
        _write(d / f"t{t}.cavs.jsonl", cl.to_jsonl())
        meta = {"stop_reason": cl.stop_reason, "count": len(cl),
                "max_solutions": None if n == math.inf else (DEFAULT_LIMITS[cfg.model][0] if n == DEFAULT else n),
                "threshold": DEFAULT_LIMITS[cfg.model][1] if phi == DEFAULT else phi}
        _write(d / f"t{t}.meta.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
        limited |= any(e.status == LIMIT for e in cl)
        top = cl.entries[0] if cl.entries else None
        print(f"t={t} model={cfg.model} Z={cfg.budget}: {len(cl)} CAVs ({cl.stop_reason})"
              + (f", worst {top.attack.key} sheds {top.zeta_mw:.4f} MW" if top else ""))
    _write_run(cfg, d)
    return EXIT_LIMIT if limited else EXIT_OK


def _load_lists(cfg: RunConfig, model: str) -> dict:
    d = _step_dir(cfg, model)
    if not d.is_dir():
        raise InputError(f"no enumeration outputs in {d}")
    out = {}
    for p in sorted(d.glob("t*.cavs.jsonl")):
        t = int(p.name[1:].split(".")[0])
        if cfg.timesteps is None or t in cfg.timesteps:
            cl = read_cav_file(p)
            cl.timestep, cl.approach, cl.budget = t, model, cfg.budget
            out[t] = cl
    if not out:
        raise InputError(f"no CAV files selected in {d}")
    return out


def _comparisons(cfg: RunConfig) -> list:
    lac, dc = _load_lists(cfg, "lac"), _load_lists(cfg, "dc")
    missing = sorted(set(lac) ^ set(dc))
    if missing:
        raise InputError(f"time steps {missing} are present for only one model")
    return [analysis.compare_formulations(lac[t], dc[t]) for t in sorted(lac)]


def _write_comparisons(cfg: RunConfig, reports) -> dict:
    rd = Path(cfg.out) / "reports"
    agg = analysis.aggregate_comparisons(reports)
    payload = {"budget": cfg.budget, "aggregate": agg, "per_timestep": [r.to_dict() for r in reports]}
    _write(rd / f"compare_Z{cfg.budget}.json", analysis.dumps(payload))
    _write(rd / f"compare_Z{cfg.budget}.csv", analysis.comparison_csv(reports))
    return agg


def _score(cfg: RunConfig, model: str):
    lists = _load_lists(cfg, model)
    T = len(cfg.timesteps) if cfg.timesteps else len(lists)
    table = analysis.score_across_timesteps(lists.values(), T)
    rd = Path(cfg.out) / "reports"
    _write(rd / f"score_{model}_Z{cfg.budget}.json", analysis.dumps(table.to_dict()))
    _write(rd / f"score_{model}_Z{cfg.budget}.csv", analysis.score_csv(table, cfg.top))
    return table


def cmd_compare(cfg: RunConfig) -> int:
    agg = _write_comparisons(cfg, _comparisons(cfg))
    _write_run(cfg, Path(cfg.out) / "reports" / f"compare_Z{cfg.budget}")
    print(json.dumps(agg, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_score(cfg: RunConfig) -> int:
    table = _score(cfg, cfg.model)
    _write_run(cfg, Path(cfg.out) / "reports" / f"score_{cfg.model}_Z{cfg.budget}")
    for k, row in enumerate(table.by_objective()[:cfg.top], start=1):
        print(f"{k:3d}  {row.attack:<16} phi_obj={row.phi_obj * table.base_mva:.4f} MW  "
              f"phi_rank={row.phi_rank:.4f}  count={row.count}")
    return EXIT_OK


def cmd_report(cfg: RunConfig) -> int:
    """Every table the existing enumeration outputs allow, for all budgets found."""
    root = Path(cfg.out)
    budgets = sorted({int(p.name[1:]) for m in MODELS for p in (root / m).glob("Z*")
                      if p.is_dir() and p.name[1:].isdigit()})
    if not budgets:
        raise InputError(f"no enumeration outputs under {root}")
    summary = {}
    for b in budgets:
        sub = RunConfig(**{**cfg.to_dict(), "budget": b})
        entry = {}
        if all((root / m / f"Z{b}").is_dir() for m in MODELS):
            entry["comparison"] = _write_comparisons(sub, _comparisons(sub))
        for m in MODELS:
            if (root / m / f"Z{b}").is_dir():
                table = _score(sub, m)
                best = table.by_objective()[:1]
                entry[f"top_{m}"] = best[0].attack if best else None
        summary[f"Z{b}"] = entry
    _write(root / "reports" / "summary.json", analysis.dumps(summary))
    _write_run(cfg, root / "reports")
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


HANDLERS = {"solve": cmd_solve, "enumerate": cmd_enumerate, "compare": cmd_compare,
            "score": cmd_score, "report": cmd_report}


def _setup_logging() -> None:
    level = os.environ.get("GRID_INTERDICT_LOG", "WARNING").strip().upper()
    if level.isdigit():
        lvl = int(level)
    else:
        lvl = getattr(logging, level, logging.WARNING)
    logging.basicConfig(level=lvl, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        cfg.validate()
        return HANDLERS[cfg.command](cfg)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, GridError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SolverLimitError as exc:
        print(f"error: solver limit: {exc}", file=sys.stderr)
        return EXIT_LIMIT


if __name__ == "__main__":
    sys.exit(main())
