import csv
import json

import pytest

from latqueue import cli, config

MINIMAL = {
    "topology": {"kind": "graph", "adjacency": [[0]]},
    "arrivals": {"kind": "bernoulli", "rate": 0.5},
    "time": {"model": "discrete", "horizon": 100000},
    "run": {"seed": 1, "trace_stride": 5000},
}


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def run_cli(*argv):
    return cli.main(list(argv))


def test_simulate_minimal(tmp_path):
    out = tmp_path / "out"
    code = run_cli("simulate", "--config", write(tmp_path, MINIMAL), "--out", str(out))
    assert code == 0
    dig = config.digest(config.with_overrides(MINIMAL))
    lines = (out / f"{dig}.jsonl").read_text().splitlines()
    recs = [json.loads(s) for s in lines]
    assert [r["type"] for r in recs] == ["replication", "summary"]
    assert all(r["digest"] == dig for r in recs)
    with open(out / f"{dig}-r0-trace.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["slot", "node", "queue_len"]
    assert len(rows) == 1 + 20
    assert rows[2][0] == "5000"


def test_bernoulli_rate_one_is_config_error(tmp_path, capsys):
    doc = json.loads(json.dumps(MINIMAL))
    doc["arrivals"]["rate"] = 1.0
    assert run_cli("simulate", "--config", write(tmp_path, doc), "--out", str(tmp_path)) == 2
    assert "arrivals/rate" in capsys.readouterr().err


def test_unknown_field_reports_path(tmp_path, capsys):
    doc = json.loads(json.dumps(MINIMAL))
    doc["time"]["horizn"] = 5
    assert run_cli("simulate", "--config", write(tmp_path, doc), "--out", str(tmp_path)) == 2
    assert "time" in capsys.readouterr().err


def test_model_error_is_config_error(tmp_path):
    doc = {"topology": {"kind": "torus", "dims": [2]}, "arrivals": {"kind": "bernoulli", "rate": 0.1}}
    assert run_cli("simulate", "--config", write(tmp_path, doc), "--out", str(tmp_path)) == 2


def test_missing_file_is_config_error(tmp_path):
    assert run_cli("simulate", "--config", str(tmp_path / "nope.json")) == 2


def test_statistics_block_is_deterministic(tmp_path):
    cfg = write(tmp_path, MINIMAL)
    blocks = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        assert run_cli("simulate", "--config", cfg, "--out", str(out)) == 0
        (f,) = out.glob("*[0-9a-f].jsonl")
        blocks.append([json.dumps(json.loads(s)["statistics"], sort_keys=True)
                       for s in f.read_text().splitlines()])
    assert blocks[0] == blocks[1]


def test_seed_override_changes_digest(tmp_path):
    cfg = write(tmp_path, MINIMAL)
    run_cli("simulate", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "2")
    run_cli("simulate", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "3")
    assert len(list((tmp_path / "a").glob("*.jsonl"))) == 2


def test_env_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("LATQUEUE_OUT", str(tmp_path / "env"))
    doc = dict(MINIMAL, run={"seed": 1})
    assert run_cli("simulate", "--config", write(tmp_path, doc)) == 0
    assert list((tmp_path / "env").glob("*.jsonl"))


def test_digest_ignores_key_order():
    a = {"topology": {"kind": "graph", "adjacency": [[0]]}, "arrivals": {"kind": "bernoulli", "rate": 0.5}}
    b = {"arrivals": {"rate": 0.5, "kind": "bernoulli"}, "topology": {"adjacency": [[0]], "kind": "graph"}}
    assert config.digest(a) == config.digest(b)
    assert config.digest(a) != config.digest(dict(a, scheduler="D1"))


def test_mixed_digests_rejected(tmp_path):
    for name, dig in (("a.jsonl", "x1"), ("b.jsonl", "x2")):
        (tmp_path / name).write_text(json.dumps({"digest": dig}) + "\n")
    with pytest.raises(cli.DigestMismatch):
        cli.read_records([tmp_path / "a.jsonl", tmp_path / "b.jsonl"])
    assert len(cli.read_records([tmp_path / "a.jsonl"])) == 1


def bounds_rows(out):
    (f,) = out.glob("*-bounds.csv")
    with open(f, newline="") as fh:
        return {r["name"]: r for r in csv.DictReader(fh)}


def test_bounds_thm55_closed_form(tmp_path):
    doc = {
        "topology": {"kind": "torus", "dims": [16]},
        "arrivals": {"kind": "poisson", "rate": 0.125},
        "routing": {"q": 0.5},
        "time": {"model": "continuous", "horizon": 20000},
        "analysis": {"theorems": ["thm55", "thm41"]},
    }
    out = tmp_path / "b"
    assert run_cli("bounds", "--config", write(tmp_path, doc), "--out", str(out)) == 0
    rows = bounds_rows(out)
    assert float(rows["thm55"]["theoretical"]) == pytest.approx(6.0)
    assert rows["thm55"]["verdict"] == "holds"
    assert rows["thm41"]["verdict"] == "inapplicable"


def test_bounds_zero_rate_and_exact(tmp_path):
    doc = {
        "topology": {"kind": "graph", "adjacency": [[0, 1], [1, 0]]},
        "arrivals": {"kind": "bernoulli", "rate": 0.0},
        "analysis": {"theorems": ["thm22", "thm23"],
                     "lyapunov": {"nu": 0.5, "epsilon": 0.1}, "exact": {"cap": 10}},
    }
    out = tmp_path / "b"
    assert run_cli("bounds", "--config", write(tmp_path, doc), "--out", str(out)) == 0
    rows = bounds_rows(out)
    assert rows["thm23"]["verdict"] == "holds"
    assert float(rows["thm23"]["empirical"]) == 0 and float(rows["thm23"]["theoretical"]) == 0
    assert rows["thm22"]["verdict"] == "holds" and float(rows["thm22"]["ci"]) == 0


def test_bounds_need_theorem_list(tmp_path):
    assert run_cli("bounds", "--config", write(tmp_path, MINIMAL), "--out", str(tmp_path)) == 2


def test_verify_suites(tmp_path, capsys):
    doc = {
        "topology": {"kind": "torus", "dims": [8]},
        "arrivals": {"kind": "bernoulli", "rate": 0.25},
        "analysis": {
            "suites": ["fairness", "coupling", "feasibility", "rates"],
            "fairness": {"states": 10, "trials": 200},
            "coupling": {"pairs": 20, "slots": 200},
            "feasibility": [{"lambda": [0.9, 0.01], "cell": [2], "expect": True}],
        },
    }
    assert run_cli("verify", "--config", write(tmp_path, doc), "--out", str(tmp_path)) == 0
    text = capsys.readouterr().out
    assert "feasibility: PASS" in text and "witness" in text


def test_verify_failure_exit_code(tmp_path):
    doc = {
        "topology": {"kind": "torus", "dims": [3]},
        "arrivals": {"kind": "bernoulli", "rate": 0.25},
        "analysis": {"suites": ["feasibility"],
                     "feasibility": [{"lambda": [0.34], "cell": [1], "expect": True}]},
    }
    assert run_cli("verify", "--config", write(tmp_path, doc), "--out", str(tmp_path)) == 1


def test_sweep_and_exact(tmp_path):
    doc = {
        "topology": {"kind": "torus", "dims": [8]},
        "arrivals": {"kind": "bernoulli", "rate": 0.3},
        "time": {"horizon": 20000},
        "analysis": {"sweep": {"lambdas": [0.0, 0.45]}},
    }
    assert run_cli("sweep", "--config", write(tmp_path, doc), "--out", str(tmp_path)) == 0
    (f,) = tmp_path.glob("*-sweep.csv")
    rows = list(csv.DictReader(open(f, newline="")))
    assert [r["verdict"] for r in rows] == ["stabilizing", "growing"]
    exact = dict(MINIMAL, analysis={"exact": {"cap": 8}})
    assert run_cli("exact", "--config", write(tmp_path, exact, "e.json"), "--out", str(tmp_path)) == 0
    (f,) = tmp_path.glob("*-exact.jsonl")
    assert json.loads(f.read_text())["mean_x"] == pytest.approx([0.5])


def test_exact_too_large_is_config_error(tmp_path):
    doc = {"topology": {"kind": "torus", "dims": [8]}, "arrivals": {"kind": "bernoulli", "rate": 0.1},
           "analysis": {"exact": {"cap": 30}}}
    assert run_cli("exact", "--config", write(tmp_path, doc), "--out", str(tmp_path)) == 2


def test_shipped_configs_validate():
    from pathlib import Path
    for p in sorted(Path(__file__).resolve().parents[1].glob("configs/*.json")):
        config.build_scenario(config.load(p))
