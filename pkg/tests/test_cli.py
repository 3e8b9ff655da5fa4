import json
import subprocess
import sys

import numpy as np
import pytest

from prodshap import __version__
from prodshap.cli import main


def run(capsys, *argv):
    rc = main([str(a) for a in argv])
    out = capsys.readouterr()
    return rc, out.out, out.err


def test_rule(capsys):
    rc, out, _ = run(capsys, "rule", "--order", "2")
    assert rc == 0
    obj = json.loads(out)
    assert obj["order"] == 2 and obj["weights"] == pytest.approx([0.5, 0.5], abs=1e-15)


def test_explain_game_with_oracle(tmp_path, capsys):
    (tmp_path / "u.json").write_text("[2, 3]")
    rc, out, _ = run(capsys, "explain-game", "--factors", tmp_path / "u.json", "--oracle")
    obj = json.loads(out)
    assert rc == 0 and obj["exact"] and obj["budget"] == 1
    np.testing.assert_allclose(obj["phi"], [2, 3], atol=1e-14)
    assert obj["oracle_max_abs_diff"] <= 1e-14


def test_explain_game_log_and_csv(tmp_path, capsys):
    (tmp_path / "u.csv").write_text("2\n0.5\n2\n")
    rc, out, _ = run(capsys, "explain-game", "--factors", tmp_path / "u.csv", "--log")
    assert rc == 0 and json.loads(out)["efficiency_gap"] <= 1e-12
    rc, out, _ = run(capsys, "explain-game", "--factors", tmp_path / "u.csv", "--csv")
    assert out.splitlines()[0] == "feature,phi" and len(out.splitlines()) == 4


def test_gen_explain_verify_tree(tmp_path, capsys):
    rc, out, _ = run(capsys, "gen", "tree", "--out", tmp_path, "--d", 5, "--leaves", 40, "--trees", 2,
                     "--depth", 6, "--instances", 3, "--seed", 4)
    meta = json.loads(out)
    assert rc == 0 and meta["seed"] == 4 and meta["version"] == __version__
    model, data = tmp_path / "model.json", tmp_path / "data.csv"
    rc, out, _ = run(capsys, "explain-tree", "--model", model, "--x", data, "--oracle")
    obj = json.loads(out)
    assert rc == 0 and obj["exact"] and obj["oracle_max_abs_diff"] <= 1e-10
    rc, direct, _ = run(capsys, "explain-tree", "--model", model, "--x", data, "--direct")
    np.testing.assert_allclose(json.loads(direct)["phi"], obj["phi"], atol=1e-10)
    rc, out, _ = run(capsys, "verify", "--model", model, "--data", data)
    rep = json.loads(out)
    assert rc == 0 and rep["passed"] and rep["config"]["tolerance"] == 1e-9
    phi = np.array(obj["phi"])
    phi[0, 0] += 1.0
    (tmp_path / "bad.json").write_text(json.dumps(phi.tolist()))
    rc, _, _ = run(capsys, "verify", "--model", model, "--data", data, "--phi", tmp_path / "bad.json")
    assert rc == 2
    rc, out, _ = run(capsys, "bench", "--model", model, "--data", data, "--repeats", 2, "--threads", 2)
    row = json.loads(out)["rows"][0]
    assert rc == 0 and row["deterministic"] and row["repeats"] == 2


def test_gen_kernel_explain_oracle(tmp_path, capsys):
    run(capsys, "gen", "kernel", "--out", tmp_path, "--d", 5, "--n", 6, "--instances", 2)
    rc, out, _ = run(capsys, "explain-kernel", "--model", tmp_path / "model.json", "--x", tmp_path / "data.csv",
                     "--oracle")
    obj = json.loads(out)
    assert rc == 0 and obj["oracle_max_abs_diff"] <= 1e-10 and "base_value" in obj
    rc, out, _ = run(capsys, "oracle", "--model", tmp_path / "model.json", "--x", tmp_path / "data.csv")
    np.testing.assert_allclose(json.loads(out)["phi"], obj["phi"], atol=1e-10)


def test_convergence_csv(capsys):
    rc, out, _ = run(capsys, "convergence", "--d", 12, "--n", 10, "--instances", 2, "--budgets", "1,3,6", "--csv")
    lines = out.splitlines()
    assert rc == 0 and lines[0] == "budget,mean_l2_error,std_l2_error" and len(lines) == 4
    assert float(lines[-1].split(",")[1]) == 0.0


def test_usage_errors(tmp_path, capsys):
    assert run(capsys, "bogus")[0] == 1
    assert run(capsys, "rule")[0] == 1
    assert run(capsys, "rule", "--order", 0)[0] == 1
    (tmp_path / "empty.csv").write_text("")
    (tmp_path / "m.json").write_text(json.dumps({"feature_count": 1, "trees": [{"nodes": [{"value": 1}]}]}))
    rc, _, err = run(capsys, "verify", "--model", tmp_path / "m.json", "--data", tmp_path / "empty.csv")
    assert rc == 1 and "empty" in err
    rc, _, err = run(capsys, "oracle")
    assert rc == 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "prodshap", "rule", "--order", "1"], capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["nodes"] == [0.5]
