import json
import subprocess
import sys

import numpy as np
import pytest

from ebtk.channels import constant_channel, dephasing, depolarizing, identity_channel
from ebtk.cli import main
from ebtk.serialization import deserialize, serialize


@pytest.fixture
def docs(tmp_path):
    paths = {}
    for name, c in {
        "identity": identity_channel(2),
        "depol": depolarizing(2, 1.0),
        "copy": dephasing(2),
        "constant": constant_channel(np.diag([0.3, 0.7]), 2),
    }.items():
        p = tmp_path / f"{name}.json"
        p.write_text(serialize(c, indent=2))
        paths[name] = str(p)
    return paths


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def emitted(out):
    text = out.rstrip("\n")
    doc = json.loads(text)
    # every document the CLI writes must survive a read-write cycle unchanged
    kw = {"timings": True} if "timings" in doc.get("eb_report", doc) else {}
    assert serialize(deserialize(text), indent=2, **kw) == text
    return doc


def test_check_eb_identity(docs, capsys):
    code, out, _ = run(capsys, "check-eb", docs["identity"])
    doc = emitted(out)
    assert code == 0 and doc["verdict"] == "NotEB"
    assert abs(doc["ppt"]["min_eigenvalue"] + 0.5) < 1e-12


def test_check_eb_depolarizing(docs, capsys):
    code, out, _ = run(capsys, "check-eb", docs["depol"])
    assert code == 0 and emitted(out)["verdict"] == "EB"


def test_malformed_input(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"type": "channel", "dim_in": 2, "dim_out": 2, "normalization": "trace_one"}')
    code, out, err = run(capsys, "check-eb", str(bad))
    assert code == 2 and out == "" and "choi" in err
    bad.write_text("{not json")
    code, _, err = run(capsys, "check-eb", str(bad))
    assert code == 2 and "invalid JSON" in err
    code, _, err = run(capsys, "check-eb", str(tmp_path / "missing.json"))
    assert code == 2 and "cannot read" in err


def test_joint_subcommand(docs, capsys):
    code, out, _ = run(capsys, "joint", docs["copy"], "--n", "3")
    doc = emitted(out)
    assert code == 0 and doc["verdict"] == "Feasible" and doc["witness"] is not None
    assert len(doc["details"]["marginal_residuals"]) == 3
    assert max(doc["details"]["marginal_residuals"]) < 1e-7
    code, out, _ = run(capsys, "joint", docs["identity"], "--n", "2")
    doc = emitted(out)
    assert code == 0 and doc["verdict"] == "LikelyInfeasible" and doc["window_drop"] is not None
    code, out, _ = run(capsys, "joint", docs["constant"], "--n", "4")
    assert code == 0 and emitted(out)["verdict"] == "Feasible"


def test_joint_rejects_bad_n(docs, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["joint", docs["copy"], "--n", "9"])
    assert exc.value.code == 2


def test_solver_cap_exits_three(docs, capsys):
    code, out, _ = run(capsys, "joint", docs["identity"], "--n", "2", "--max-iters", "5", "--stall-window", "100")
    assert code == 3 and emitted(out)["verdict"] == "Undecided"


def test_order_and_broadcast(docs, capsys):
    code, out, _ = run(capsys, "order", docs["copy"], docs["copy"])
    doc = emitted(out)
    assert code == 0 and doc["verdict"] == "Feasible"
    alpha = deserialize(json.dumps(doc["details"]["alpha"])).channel
    assert np.allclose(alpha.choi, identity_channel(2).choi)
    code, out, _ = run(capsys, "broadcast", docs["copy"])
    doc = emitted(out)
    assert code == 0 and doc["verdict"] == "Feasible" and doc["residual"] < 1e-12


def test_holevo_subcommand(docs, capsys):
    code, out, _ = run(capsys, "holevo", docs["copy"])
    assert code == 0 and emitted(out)["holevo"]["type"] == "holevo"
    code, out, _ = run(capsys, "holevo", docs["identity"])
    assert code == 0 and "holevo" not in emitted(out)


def test_bargmann_subcommand(capsys):
    code, out, _ = run(capsys, "bargmann", "--cutoff", "3")
    doc = emitted(out)
    assert code == 0 and doc["eb_report"]["verdict"] == "EB"
    assert doc["repair_magnitude"] > 0 and doc["cutoff"] == 3


def test_random_is_deterministic(capsys):
    first = run(capsys, "random", "channel", "2", "2", "--seed", "7")[1]
    second = run(capsys, "random", "channel", "2", "2", "--seed", "7")[1]
    assert first == second
    emitted(first)
    other = run(capsys, "random", "channel", "2", "2", "--seed", "8")[1]
    assert other != first
    code, out, _ = run(capsys, "random", "holevo", "3", "2", "--effects", "4", "--seed", "1")
    assert code == 0 and "holevo" in emitted(out)
    code, _, err = run(capsys, "random", "channel", "4", "1", "--rank", "1")
    assert code == 2 and "isometry" in err


def test_reports_are_byte_identical(docs, capsys):
    a = run(capsys, "check-eb", docs["copy"], "--seed", "3")[1]
    b = run(capsys, "check-eb", docs["copy"], "--seed", "3")[1]
    assert a == b
    t = emitted(run(capsys, "check-eb", docs["copy"], "--timings")[1])
    assert set(t["timings"]) >= {"ppt", "joint_2"}


def test_config_precedence(docs, tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"joint_levels": [2], "seed": 5, "max_iters": 2000}))
    doc = emitted(run(capsys, "check-eb", docs["depol"], "--config", str(cfg))[1])
    assert doc["config"]["joint_levels"] == [2] and doc["config"]["seed"] == 5
    doc = emitted(run(capsys, "check-eb", docs["depol"], "--config", str(cfg), "--seed", "11")[1])
    assert doc["config"]["seed"] == 11 and doc["config"]["max_iters"] == 2000
    monkeypatch.setenv("EBTK_CONFIG", str(cfg))
    doc = emitted(run(capsys, "check-eb", docs["depol"])[1])
    assert doc["config"]["seed"] == 5
    cfg.write_text(json.dumps({"joint_levels": [7]}))
    code, _, err = run(capsys, "check-eb", docs["depol"])
    assert code == 2 and "joint_levels" in err


def test_batch(docs, tmp_path, capsys):
    (tmp_path / "zz_broken.json").write_text("[]")
    out_file = tmp_path / "out" / "reports.jsonl"
    out_file.parent.mkdir()
    code = main(["check-eb", "--batch", str(tmp_path), "--joint-levels", "2", "-o", str(out_file)])
    _, err = capsys.readouterr()
    lines = out_file.read_text().splitlines()
    assert code == 2 and "zz_broken" in err
    assert [json.loads(x)["source"] for x in lines] == ["constant.json", "copy.json", "depol.json", "identity.json"]
    for line in lines:
        assert serialize(deserialize(line)) == line


def test_console_script(docs):
    res = subprocess.run(
        [sys.executable, "-m", "ebtk.cli", "check-eb", docs["identity"], "--compact", "--no-broadcast"],
        capture_output=True, text=True, check=False,
    )
    assert res.returncode == 0
    assert json.loads(res.stdout)["broadcast"] is None
