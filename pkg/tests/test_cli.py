import json
import logging
import shutil

import pytest

from grid_interdict import data_path
from grid_interdict.cli import InputError, RunConfig, main, parse_timesteps
from grid_interdict.interdiction import EXHAUSTIVE, brute_force_cavs, read_cav_file
from grid_interdict.grid_model import apply_case, load_timeseries

GRID5 = str(data_path("toy5_meshed.json"))
TS5 = str(data_path("toy5_timeseries.csv"))
GRID6 = str(data_path("toy6_reactive.json"))


def run(*argv):
    return main([str(a) for a in argv])


def files_under(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_solve_5bus(tmp_path, capsys, meshed5):
    out = tmp_path / "o"
    assert run("solve", "--grid", GRID5, "--model", "dc", "--budget", 1, "--out", out) == 0
    recs = json.loads(capsys.readouterr().out)
    assert recs[0]["attack"] == [6] and recs[0]["zeta_pu"] == pytest.approx(0.3)
    assert recs[0]["zeta_mw"] == pytest.approx(30.0)
    worst = json.loads((out / "dc" / "Z1" / "t1.worst.json").read_text())
    assert worst == recs[0]
    cfg = json.loads((out / "dc" / "Z1" / "run.json").read_text())
    assert cfg["command"] == "solve" and cfg["budget"] == 1


def test_missing_grid_exit_2(tmp_path, capsys):
    assert run("solve", "--grid", tmp_path / "nope.json", "--out", tmp_path) == 2
    assert "nope.json" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["enumerate", "--grid", GRID5, "--budget", "-1"],
    ["enumerate", "--grid", GRID5, "--max-solutions", "0"],
    ["enumerate", "--grid", GRID5, "--threshold", "2"],
    ["enumerate", "--grid", GRID5, "--polygon-sides", "7"],
    ["enumerate", "--grid", GRID5, "--timeseries", TS5, "--timesteps", "3-9"],
    ["enumerate", "--grid", GRID5, "--timesteps", "x"],
    ["enumerate", "--grid", GRID5, "--jobs", "0"],
    ["compare", "--out", "/nonexistent-dir"],
    ["enumerate"],
])
def test_input_errors_exit_2(tmp_path, argv):
    if "--out" not in argv:
        argv = argv + ["--out", tmp_path]
    assert run(*argv) == 2


def test_bad_grid_content_exit_2(tmp_path):
    p = tmp_path / "g.json"
    p.write_text('{"base_mva": 100}')
    assert run("solve", "--grid", p, "--out", tmp_path) == 2


def test_budget_zero(tmp_path, capsys):
    assert run("solve", "--grid", GRID5, "--budget", 0, "--out", tmp_path) == 0
    rec = json.loads(capsys.readouterr().out)[0]
    assert rec["attack"] == [] and rec["zeta_pu"] == pytest.approx(0.0, abs=1e-9)


def test_enumerate_defaults_follow_depth_policy(tmp_path):
    assert run("enumerate", "--grid", GRID5, "--model", "lac", "--budget", 2, "--out", tmp_path) == 0
    meta = json.loads((tmp_path / "lac" / "Z2" / "t1.meta.json").read_text())
    assert meta["max_solutions"] == 5 and meta["threshold"] is None
    assert meta["stop_reason"] == "count" and meta["count"] == 5
    assert run("enumerate", "--grid", GRID5, "--model", "dc", "--budget", 2, "--out", tmp_path) == 0
    meta = json.loads((tmp_path / "dc" / "Z2" / "t1.meta.json").read_text())
    assert meta["max_solutions"] == 50 and meta["threshold"] == 0.5


def test_exhaustive_matches_brute_force(tmp_path, meshed5):
    assert run("enumerate", "--grid", GRID5, "--model", "lac", "--budget", 2, "--exhaustive",
               "--out", tmp_path) == 0
    got = read_cav_file(tmp_path / "lac" / "Z2" / "t1.cavs.jsonl")
    ref = brute_force_cavs(meshed5, "lac", 2, **EXHAUSTIVE, timestep=1)
    assert [(e.attack, e.zeta) for e in got] == [(e.attack, pytest.approx(e.zeta, rel=1e-9)) for e in ref]
    assert got.stop_reason == ref.stop_reason


def test_threshold_one_stops_at_n(tmp_path):
    assert run("enumerate", "--grid", GRID5, "--budget", 3, "--max-solutions", 2,
               "--threshold", "1.0", "--out", tmp_path) == 0
    assert len(read_cav_file(tmp_path / "dc" / "Z3" / "t1.cavs.jsonl")) == 2


def test_timeseries_pipeline(tmp_path, capsys, meshed5):
    out = tmp_path / "o"
    for model in ("dc", "lac"):
        assert run("enumerate", "--grid", GRID5, "--timeseries", TS5, "--model", model,
                   "--budget", 2, "--exhaustive", "--out", out) == 0
    names = sorted(p.name for p in (out / "dc" / "Z2").glob("*.cavs.jsonl"))
    assert names == [f"t{t}.cavs.jsonl" for t in (1, 2, 3, 4)]
    # time step 3 uses the scaled snapshot
    case = load_timeseries(TS5, meshed5)[2]
    ref = brute_force_cavs(apply_case(meshed5, case), "dc", 2, **EXHAUSTIVE, timestep=3)
    got = read_cav_file(out / "dc" / "Z2" / "t3.cavs.jsonl")
    assert [(e.attack, round(e.zeta, 12)) for e in got] == [(e.attack, round(e.zeta, 12)) for e in ref]
    capsys.readouterr()
    assert run("compare", "--budget", 2, "--out", out) == 0
    agg = json.loads(capsys.readouterr().out)
    assert agg["time_steps"] == 4
    payload = json.loads((out / "reports" / "compare_Z2.json").read_text())
    for rep in payload["per_timestep"]:
        assert rep["u"] == rep["undetected"] / rep["n_lac"]
    assert run("score", "--model", "dc", "--budget", 2, "--out", out, "--top", 3) == 0
    csv_lines = (out / "reports" / "score_dc_Z2.csv").read_text().strip().splitlines()
    assert len(csv_lines) == 4
    assert run("report", "--out", out) == 0
    summary = json.loads((out / "reports" / "summary.json").read_text())
    assert "comparison" in summary["Z2"]


def test_compare_needs_both_models(tmp_path):
    assert run("enumerate", "--grid", GRID5, "--budget", 1, "--out", tmp_path) == 0
    assert run("compare", "--budget", 1, "--out", tmp_path) == 2


def test_config_replay_is_byte_identical(tmp_path):
    out = tmp_path / "o"
    assert run("enumerate", "--grid", GRID6, "--model", "lac", "--budget", 2, "--out", out) == 0
    first = files_under(out)
    cfg = tmp_path / "run.json"
    shutil.copy(out / "lac" / "Z2" / "run.json", cfg)
    shutil.rmtree(out)
    assert run("enumerate", "--config", cfg) == 0
    assert files_under(out) == first


def test_jobs_give_same_bytes(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("enumerate", "--grid", GRID5, "--timeseries", TS5, "--budget", 2, "--out", a) == 0
    assert run("enumerate", "--grid", GRID5, "--timeseries", TS5, "--budget", 2, "--jobs", 2,
               "--out", b) == 0
    fa = {k: v for k, v in files_under(a).items() if not k.endswith("run.json")}
    fb = {k: v for k, v in files_under(b).items() if not k.endswith("run.json")}
    assert fa == fb


def test_dump_models(tmp_path):
    assert run("solve", "--grid", GRID5, "--model", "lac", "--dump-models", "--out", tmp_path) == 0
    text = (tmp_path / "lac" / "Z1" / "models" / "t1.lower.txt").read_text()
    assert text.startswith("minimize:") and "poly[" in text
    assert "strong_duality" in (tmp_path / "lac" / "Z1" / "models" / "t1.mip.txt").read_text()


def test_log_level_from_env(tmp_path, monkeypatch):
    monkeypatch.setenv("GRID_INTERDICT_LOG", "debug")
    root = logging.getLogger()
    old = root.handlers[:], root.level
    root.handlers = []
    try:
        assert run("solve", "--grid", GRID5, "--budget", 0, "--out", tmp_path) == 0
        assert root.level == logging.DEBUG
    finally:
        root.handlers, _ = old
        root.setLevel(old[1])


def test_parse_timesteps_and_config_errors():
    assert parse_timesteps("1,3,5-7") == [1, 3, 5, 6, 7]
    assert parse_timesteps("4-4") == [4]
    for bad in ("7-3", "a", "1,,2"):
        with pytest.raises(InputError):
            parse_timesteps(bad)
    with pytest.raises(InputError):
        RunConfig.from_dict({"colour": 1})
    with pytest.raises(InputError):
        RunConfig(model="ac", grid="x").validate()
    cfg = RunConfig(grid="g.json", max_solutions=7)
    assert RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
