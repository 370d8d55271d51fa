import json

import pytest

from prestige import cli
from prestige.sim.audit import AuditReport
from prestige.sim.scenario import run_scenario


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"n": 4, "duration_s": 3}))
    return path


def test_simulate_writes_artifacts(tmp_path, config, capsys):
    out = tmp_path / "run"
    assert cli.main(["simulate", "--config", str(config), "--out", str(out), "--trace", "--ledger-dump"]) == 0
    for name in ("metrics.json", "throughput.csv", "rp_trace.csv", "trace.jsonl", "ledger.json", "manifest.json"):
        assert (out / name).exists(), name
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["availability"] == pytest.approx(1.0)
    assert "audit=ok" in capsys.readouterr().out


def test_outputs_are_byte_identical_across_runs(tmp_path, config):
    for d in ("a", "b"):
        assert cli.main(["simulate", "--config", str(config), "--seed", "5", "--out", str(tmp_path / d), "--trace"]) == 0
    for name in ("metrics.json", "throughput.csv", "rp_trace.csv", "trace.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_missing_config_is_usage_error(tmp_path):
    assert cli.main(["simulate", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == cli.EXIT_USAGE


def test_unknown_subcommand_exits_with_usage_code():
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == cli.EXIT_USAGE


def test_audit_failure_has_its_own_exit_code(tmp_path, config, monkeypatch):
    def corrupted(cfg, seed=None, audit=True):
        result = run_scenario(cfg, seed)
        result.audit = AuditReport({"safety": ["n=2: 2 distinct blocks committed"]})
        result.metrics["audit_ok"] = False
        return result

    monkeypatch.setattr(cli, "run_scenario", corrupted)
    assert cli.main(["simulate", "--config", str(config), "--out", str(tmp_path / "x")]) == cli.EXIT_AUDIT


def test_multiple_seeds_get_their_own_directories(tmp_path, config):
    assert cli.main(["baseline", "--config", str(config), "--seed", "3", "--runs", "2", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "seed-3" / "metrics.json").exists()
    assert json.loads((tmp_path / "seed-4" / "metrics.json").read_text())["protocol"] == "passive"


def test_rep_vectors_builtin_pass(capsys):
    assert cli.main(["rep-vectors"]) == 0
    rows = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    assert [r["new_rp"] for r in rows if r["name"].startswith("v")][:5] == [6, 5, 6, 5, 5]


def test_rep_vectors_perturbed_case_fails(tmp_path):
    case = {"name": "perturbed", "ti": 20, "ci": 1, "history": [1, 2, 3, 4, 5], "v": 5, "v_new": 6, "expected_rp": 6}
    path = tmp_path / "cases.json"
    path.write_text(json.dumps([case]))
    assert cli.main(["rep-vectors", "--cases", str(path)]) == cli.EXIT_GOLDEN


def test_split_votes_csv(tmp_path, capsys):
    assert cli.main(["split-votes", "--trials", "5", "--eps", "0", "--attack", "off", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "split_votes.csv").read_text().splitlines()
    assert lines[0] == "n,epsilon,attack,trials,view_changes,split_votes"
    assert len(lines) == 2
