import json
import math
from pathlib import Path

import numpy as np
import pytest

from hibarrier.cli import main
from hibarrier.catalog import EXAMPLE_IDS


@pytest.fixture()
def emitted(tmp_path):
    def emit(name: str) -> Path:
        assert main(["examples", "emit", name, "--dir", str(tmp_path)]) == 0
        return tmp_path / f"{name}.json"

    return emit


def test_examples_list(capsys):
    assert main(["examples", "list"]) == 0
    out = capsys.readouterr().out.split()
    assert list(EXAMPLE_IDS) == out
    assert "thermostat" in out and "expCsets" in out


def test_check_thermostat_exit_zero(emitted, tmp_path):
    cfg = emitted("thermostat")
    report = tmp_path / "rep.json"
    code = main(["check", str(cfg), "--theorem", "thm1", "--theorem", "invariance",
                 "--samples", "16", "--seed", "0", "--report", str(report)])
    assert code == 0
    doc = json.loads(report.read_text())
    assert doc["system"] == "thermostat"
    assert {c["check"] for c in doc["checks"]} == {"thm1", "invariance:prop2"}
    assert all(c["status"] == "no_violation_found" for c in doc["checks"])


def test_check_expillu_exit_one_with_witness(emitted, tmp_path):
    cfg = emitted("expillu")
    report = tmp_path / "rep.json"
    code = main(["check", str(cfg), "--theorem", "thm1", "--samples", "12",
                 "--report", str(report)])
    assert code == 1
    doc = json.loads(report.read_text())
    (check,) = doc["checks"]
    assert check["status"] == "violated"
    assert check["witnesses"]


def test_check_inconclusive_exit_two(emitted):
    cfg = emitted("expcount")
    code = main(["check", str(cfg), "--theorem", "boundary", "--option", "c",
                 "--samples", "12"])
    assert code == 2


def test_check_missing_config_exit_three(tmp_path, capsys):
    assert main(["check", str(tmp_path / "nope.json")]) == 3


def test_check_malformed_config_exit_three(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({
        "name": "bad", "dim": 2, "C": "x1 +", "D": "x1", "F": ["0", "0"],
        "G": ["0", "0"], "barrier": ["x1"], "box": [[-1, 1], [-1, 1]],
    }))
    assert main(["check", str(bad)]) == 3


def test_report_reproducible_minus_timing(emitted, tmp_path):
    cfg = emitted("bouncing-ball")
    reps = []
    for tag in ("a", "b"):
        rep = tmp_path / f"rep-{tag}.json"
        code = main(["check", str(cfg), "--theorem", "thm1", "--samples", "12",
                     "--seed", "3", "--report", str(rep)])
        assert code == 0
        doc = json.loads(rep.read_text())
        doc.pop("timing")
        reps.append(json.dumps(doc, sort_keys=True))
    assert reps[0] == reps[1]


def test_simulate_thermostat_matches_closed_form(emitted, tmp_path):
    cfg = emitted("thermostat")
    out = tmp_path / "arc.csv"
    code = main(["simulate", str(cfg), "--x0", "0,1.0", "--horizon", "0.5,2",
                 "--step", "1e-3", "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "t,j,x1,x2,B1,B2,flag"
    worst = 0.0
    for line in lines[1:]:
        cells = line.split(",")
        t, j, z = float(cells[0]), int(cells[1]), float(cells[3])
        if j == 0:
            worst = max(worst, abs(z - math.exp(-t)))
    assert worst < 1e-6


def test_simulate_rejects_bad_x0(emitted):
    cfg = emitted("thermostat")
    assert main(["simulate", str(cfg), "--x0", "0.5,1.0"]) == 3
    assert main(["simulate", str(cfg), "--x0", "0.0"]) == 3


def test_simulate_bouncing_stays_in_k(emitted, tmp_path):
    cfg = emitted("bouncing-ball")
    out = tmp_path / "arc.csv"
    code = main(["simulate", str(cfg), "--x0", "0,1", "--horizon", "5,10",
                 "--step", "1e-3", "--overlap", "jump", "--out", str(out)])
    assert code == 0
    rows = [line.split(",") for line in out.read_text().splitlines()[1:]]
    assert max(int(r[1]) for r in rows) >= 2  # alternating flow and jumps
    assert max(float(r[4]) for r in rows) <= 1e-6  # B stays nonpositive


def test_falsify_expillu_exit_one(emitted, tmp_path):
    cfg = emitted("expillu")
    witness = tmp_path / "w.csv"
    code = main(["falsify", str(cfg), "--budget", "20", "--horizon", "1,2",
                 "--step", "1e-3", "--witness", str(witness)])
    assert code == 1
    assert witness.exists()
    # the witness arc leaves K: its last B1 column is positive
    last = witness.read_text().splitlines()[-1].split(",")
    assert float(last[4]) > 0


def test_falsify_thermostat_exit_zero(emitted):
    cfg = emitted("thermostat")
    code = main(["falsify", str(cfg), "--budget", "30", "--horizon", "1.5,4",
                 "--step", "5e-3"])
    assert code == 0


def test_falsify_contractivity_modes(emitted):
    bb = emitted("bouncing-ball")
    assert main(["falsify", str(bb), "--mode", "contractivity", "--budget", "10",
                 "--tau", "0.05"]) == 1
    rj = emitted("exprj")
    assert main(["falsify", str(rj), "--mode", "contractivity", "--budget", "10",
                 "--tau", "0.05"]) == 0


def test_usage_error_exit_three():
    assert main(["check"]) == 3
    assert main(["frobnicate"]) == 3
    assert main([]) == 3


def test_examples_run_matches_emitted_check(emitted, tmp_path):
    # `emit` then `check` reproduces the statuses `run` compares against
    cfg = emitted("expillu")
    report = tmp_path / "rep.json"
    assert main(["check", str(cfg), "--theorem", "thm1", "--theorem", "external",
                 "--samples", "24", "--seed", "0", "--report", str(report)]) == 1
    doc = json.loads(report.read_text())
    statuses = {c["check"]: c["status"] for c in doc["checks"]}
    assert statuses == {"thm1": "violated", "external": "violated"}
    assert main(["examples", "run", "expillu"]) == 0


def test_examples_run_unknown_name():
    assert main(["examples", "run", "not-a-fixture"]) == 3


def test_examples_run_exp1_prints_note(capsys):
    assert main(["examples", "run", "exp1"]) == 0
    out = capsys.readouterr().out
    assert "note:" in out and "PASS" in out


def test_env_seed_default(emitted, monkeypatch, tmp_path):
    cfg = emitted("bouncing-ball")
    docs = []
    for env in ("123", "123"):
        monkeypatch.setenv("HIBARRIER_SEED", env)
        rep = tmp_path / f"env-{len(docs)}.json"
        assert main(["check", str(cfg), "--theorem", "thm1", "--samples", "10",
                     "--report", str(rep)]) == 0
        doc = json.loads(rep.read_text())
        doc.pop("timing")
        docs.append(json.dumps(doc, sort_keys=True))
        assert '"seed": 123' in docs[-1]
    assert docs[0] == docs[1]


def test_remaining_theorem_ids(emitted):
    thermo = emitted("thermostat")
    assert main(["check", str(thermo), "--theorem", "lipschitz", "--theorem",
                 "relaxed", "--rho", "osgood", "--samples", "10"]) == 0
    csets = emitted("expCsets")
    assert main(["check", str(csets), "--theorem", "cset", "--theorem",
                 "contract-complete", "--samples", "10"]) == 0
    bb = emitted("bouncing-ball")
    assert main(["check", str(bb), "--theorem", "contract-lip",
                 "--samples", "10"]) == 1  # strictness fails on conserved flow


def test_emit_round_trips_catalog(tmp_path):
    from hibarrier.catalog import example_bundle
    from hibarrier.config import load_system
    rng = np.random.default_rng(4)
    for name in EXAMPLE_IDS:
        assert main(["examples", "emit", name, "--dir", str(tmp_path)]) == 0
        loaded = load_system(tmp_path / f"{name}.json")
        ref = example_bundle(name)
        assert loaded.expected == ref.expected
        assert loaded.system.n == ref.system.n
        for _ in range(20):
            x = rng.uniform(-1.5, 1.5, size=ref.system.n)
            assert (loaded.system.C.classify(x, 1e-9)
                    == ref.system.C.classify(x, 1e-9))
            assert np.allclose(loaded.barrier.values(x), ref.barrier.values(x))


def test_check_worker_parity(emitted, tmp_path):
    cfg = emitted("thermostat")
    docs = []
    for workers in ("1", "4"):
        rep = tmp_path / f"w{workers}.json"
        assert main(["check", str(cfg), "--theorem", "thm1", "--samples", "12",
                     "--seed", "2", "--workers", workers, "--report", str(rep)]) == 0
        doc = json.loads(rep.read_text())
        doc.pop("timing")
        for c in doc["checks"]:
            c["config"].pop("workers")
        docs.append(json.dumps(doc, sort_keys=True))
    assert docs[0] == docs[1]
