import csv
import json
import subprocess
import sys

import pytest
from hypothesis import given
from hypothesis import strategies as st

from kreinlab import expcli
from kreinlab.errors import ConfigError
from kreinlab.expcli import RESULT_COLUMNS, SCENARIOS, ExperimentConfig, ResultRow, UsageError


def write_config(tmp_path, raw, name="cfg.json"):
    path = tmp_path / name
    path.write_text(raw if isinstance(raw, str) else json.dumps(raw))
    return str(path)


def run(tmp_path, raw, *extra):
    out = tmp_path / "out"
    code = expcli.main(["run", write_config(tmp_path, raw), "--out", str(out), "--quiet", *extra])
    return code, out


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_scenarios_listing(capsys):
    assert expcli.main(["scenarios"]) == 0
    listed = [line.split()[0] for line in capsys.readouterr().out.splitlines()]
    assert listed == list(SCENARIOS) and len(listed) == 7


@pytest.fixture(scope="module")
def default_runs(tmp_path_factory):
    runs = {}
    for name in SCENARIOS:
        d = tmp_path_factory.mktemp(name)
        runs[name] = run(d, {"scenario": name})
    return runs


@pytest.mark.parametrize("name", list(SCENARIOS))
def test_default_scenarios_pass(default_runs, name):
    code, out = default_runs[name]
    assert code == 0
    rows = read_rows(out / "results.csv")
    assert rows and list(rows[0]) == RESULT_COLUMNS
    assert all(r["pass"] in ("true", "") for r in rows)
    summary = json.loads((out / "summary.json").read_text())
    assert summary["scenario"] == name and summary["counts"]["failed"] == 0


def test_extra_artifacts(default_runs):
    assert (default_runs["mnt-line"][1] / "mnt_reference.csv").exists()
    assert (default_runs["mnt-line"][1] / "mnt_trend.csv").exists()
    assert (default_runs["dirac-cesaro"][1] / "dirac_cesaro.csv").exists()
    assert (default_runs["opuc-mnt"][1] / "opuc_mnt.csv").exists()
    assert (default_runs["conjecture-explore"][1] / "conjecture_measure2.csv").exists()


@pytest.mark.parametrize(
    "raw",
    [
        {"scenario": "no-such-thing"},
        {"scenario": "cd-check", "tolerance": -1},
        {"scenario": "mnt-line", "r_schedule": [20, 10]},
        {"scenario": "opuc-mnt", "verblunsky": [1.5]},
        {"scenario": "free-sanity", "colour": "blue"},
        {"scenario": "free-sanity", "seed": -3},
        "{not json",
        "[1, 2]",
    ],
)
def test_config_errors_exit_2(tmp_path, raw, capsys):
    code, out = run(tmp_path, raw)
    assert code == 2
    assert "krein-lab:" in capsys.readouterr().err
    assert not out.exists()


def test_missing_config_exit_2(tmp_path):
    assert expcli.main(["run", str(tmp_path / "absent.json")]) == 2


def test_unknown_scenario_is_usage_error():
    with pytest.raises(UsageError):
        ExperimentConfig.from_dict({"scenario": "x"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"scenario": "cd-check", "pairs": 0})


def test_failing_tolerance_exit_1(tmp_path):
    code, out = run(tmp_path, {"scenario": "cd-check", "tolerance": 1e-12})
    assert code == 1
    rows = read_rows(out / "results.csv")
    assert any(r["pass"] == "false" for r in rows)
    assert json.loads((out / "summary.json").read_text())["counts"]["failed"] > 0


def test_deterministic_and_rerunnable(tmp_path):
    raw = {"scenario": "cd-check", "seed": 4, "pairs": 3}
    for d in "abc":
        (tmp_path / d).mkdir()
    code_a, out_a = run(tmp_path / "a", raw)
    code_b, out_b = run(tmp_path / "b", raw)
    assert code_a == code_b == 0
    first = (out_a / "results.csv").read_bytes()
    assert first == (out_b / "results.csv").read_bytes()
    echo = json.loads((out_a / "summary.json").read_text())["config"]
    run(tmp_path / "c", echo)
    assert (tmp_path / "c" / "out" / "results.csv").read_bytes() == first


def test_seed_override(tmp_path):
    raw = {"scenario": "cd-check", "pairs": 2, "nodes": 1001, "tolerance": 1.0}
    outs = []
    for seed in (1, 2):
        d = tmp_path / str(seed)
        d.mkdir()
        code, out = run(d, raw, "--seed", str(seed))
        assert code == 0
        outs.append((out / "results.csv").read_bytes())
        assert json.loads((out / "summary.json").read_text())["config"]["seed"] == seed
    assert outs[0] != outs[1]


def test_nested_defaults_merge():
    cfg = ExperimentConfig.from_dict({"scenario": "dirac-cesaro", "random": {"count": 2}})
    assert cfg.params["random"]["count"] == 2
    assert cfg.params["random"]["max_pieces"] == 5


@given(st.floats(0, 10), st.floats(1e-12, 10))
def test_verdict_matches_tolerance(err, tol):
    row = ResultRow.check("s", {}, 1.0 + err, 1.0, tol)
    assert row.passed == (row.rel_error <= tol)
    assert row.cells()[-1] == ("true" if row.passed else "false")


def test_exploratory_rows_have_no_verdict():
    row = ResultRow.explore("s", {"n": 3}, 2.0, 4.0)
    assert not row.asserted and row.rel_error == 0.5
    assert row.cells()[-2:] == ["", ""]
    assert ResultRow.explore("s", {}, 1j).cells()[4:] == ["", "", "", "", ""]


def test_bound_rows():
    assert ResultRow.bound("s", {}, 0.9, 1.0).passed
    assert not ResultRow.bound("s", {}, 1.1, 1.0).passed


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "kreinlab", "scenarios"], capture_output=True, text=True)
    assert proc.returncode == 0 and "free-sanity" in proc.stdout
