import csv
import json

import pytest

from jointising.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr().err


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--graph", "chain", "--p", "10", "--K", "3", "--rho", "0",
                 "--n", "100", "--seed", "1", "--burnin", "500", "--out", str(out)]) == 0
    return out


def test_simulate_example(simulated):
    names = sorted(p.name for p in simulated.iterdir())
    assert names == ["category1.csv", "category2.csv", "category3.csv", "design.json",
                     "manifest.json"]
    rows = list(csv.reader((simulated / "category1.csv").open()))
    assert len(rows) == 101 and len(rows[0]) == 10
    manifest = json.loads((simulated / "manifest.json").read_text())
    assert manifest["params"]["seed"] == 1 and manifest["params"]["rho"] == 0.0


def test_rerun_from_manifest(tmp_path, simulated, capsys):
    code, _ = run(capsys, "simulate", "--config", simulated / "manifest.json", "--out", tmp_path)
    assert code == 0
    for name in ("design.json", "category1.csv", "category3.csv"):
        assert (tmp_path / name).read_bytes() == (simulated / name).read_bytes()


def test_config_file_with_flag_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"p": 6, "K": 2, "n": [30], "burnin": 100, "seed": 3}))
    code, _ = run(capsys, "simulate", "--config", cfg, "--p", 5, "--out", tmp_path)
    assert code == 0
    params = json.loads((tmp_path / "manifest.json").read_text())["params"]
    assert (params["p"], params["K"], params["seed"]) == (5, 2, 3)
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"colour": 1}))
    code, err = run(capsys, "simulate", "--config", bad, "--out", tmp_path)
    assert code == 2 and "colour" in err


def test_fit_joint_and_separate(tmp_path, simulated, capsys):
    data = [simulated / f"category{k}.csv" for k in (1, 2, 3)]
    code, _ = run(capsys, "fit", "--data", *data, "--lambda", 0.05, "--out", tmp_path / "j")
    assert code == 0
    model = json.loads((tmp_path / "j" / "model.json").read_text())
    assert model["K"] == 3 and model["lambda"] == 0.05
    code, _ = run(capsys, "fit", "--data", *data, "--lambda", 0.05, "--separate",
                  "--out", tmp_path / "s")
    assert code == 0


def test_single_category_separate_equals_joint_without_lla(tmp_path, simulated, capsys):
    one = simulated / "category2.csv"
    run(capsys, "fit", "--data", one, "--lambda", 0.04, "--separate", "--out", tmp_path / "s")
    run(capsys, "fit", "--data", one, "--lambda", 0.04, "--no-lla", "--out", tmp_path / "j")
    s = json.loads((tmp_path / "s" / "model.json").read_text())
    j = json.loads((tmp_path / "j" / "model.json").read_text())
    assert s["thetas"] == j["thetas"]


def test_fit_with_mismatched_headers(tmp_path, simulated, capsys):
    lines = (simulated / "category2.csv").read_text().splitlines()
    header = lines[0].split(",")
    header[3] = "Z9"
    (tmp_path / "bad.csv").write_text("\n".join([",".join(header)] + lines[1:]) + "\n")
    code, err = run(capsys, "fit", "--data", simulated / "category1.csv", tmp_path / "bad.csv",
                    "--lambda", 0.1, "--out", tmp_path)
    assert code == 1
    assert len(err.strip().splitlines()) == 1
    assert err.startswith("error: fit:") and "Z9" in err


@pytest.mark.parametrize("argv", [["bogus"], [], ["simulate", "--p", "ten"],
                                  ["stability", "--alpha", "2", "--data", "x.csv", "--lambda", "1"]])
def test_usage_errors(argv, capsys):
    code, err = run(capsys, *argv)
    assert code == 2 and err


def test_missing_required_flag(capsys, tmp_path):
    code, err = run(capsys, "fit", "--lambda", 0.1, "--out", tmp_path)
    assert code == 2 and "--data" in err


def test_cv_and_stability(tmp_path, simulated, capsys):
    data = [simulated / f"category{k}.csv" for k in (1, 2)]
    code, _ = run(capsys, "cv", "--data", *data, "--grid", 0.2, 0.05, "--folds", 3,
                  "--out", tmp_path)
    assert code == 0
    cv = json.loads((tmp_path / "cv.json").read_text())
    assert cv["best_lambda"] in (0.2, 0.05) and cv["D"] == 3
    code, _ = run(capsys, "stability", "--data", *data, "--lambda", 0.05, "--B", 4,
                  "--alpha", 0.4, "--out", tmp_path)
    assert code == 0
    rep = json.loads((tmp_path / "stability.json").read_text())
    assert rep["B"] == 4 and len(rep["categories"]) == 2


def test_simulate_then_roc_with_both_methods(tmp_path, capsys):
    code, _ = run(capsys, "simulate", "--graph", "chain", "--p", 8, "--K", 3, "--rho", 0.25,
                  "--n", 60, "--burnin", 300, "--out", tmp_path)
    assert code == 0
    code, _ = run(capsys, "roc", "--truth", tmp_path / "design.json", "--grid", 0.3, 0.1, 0.03,
                  "--replicates", 2, "--burnin", 300, "--out", tmp_path)
    assert code == 0
    rows = list(csv.DictReader((tmp_path / "roc.csv").open()))
    assert {r["method"] for r in rows} == {"joint", "separate"}
    summary = json.loads((tmp_path / "roc_summary.json").read_text())
    assert set(summary["auc"]) == {"joint", "separate"}
    assert 0.0 <= summary["auc"]["joint"]["pooled"] <= 1.0


def test_rollcall_command(tmp_path, capsys):
    votes = tmp_path / "v.csv"
    rows = ["bill_id,category,A,B,C,D"]
    pattern = ["1,1,0,0", "0,0,1,1", "1,0,1,0", "1,1,1,0", "0,1,0,NA", "1,1,0,1"]
    for i in range(24):
        rows.append(f"b{i},{'xy'[i % 2]},{pattern[i % 6]}")
    votes.write_text("\n".join(rows) + "\n")
    members = tmp_path / "m.csv"
    members.write_text("name,state,party\nA,CA,D\nB,NY,D\nC,TX,R\nD,UT,R\n")
    code, err = run(capsys, "rollcall", "--votes", votes, "--members", members, "--lambda", 0.05,
                    "--B", 3, "--out", tmp_path / "o")
    assert code == 0, err
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["status"] == "ok" and manifest["params"]["lam2"] == 0.01
    assert (tmp_path / "o" / "category_x.dot").exists()
