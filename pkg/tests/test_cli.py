import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose

from reldep import cli
from reldep import copulas as cop
from reldep import local_dep as ld


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_eval_frank_diagonal(capsys):
    code, out, _ = run(capsys, "eval", "--family", "frank", "--theta", 3, "--diagonal")
    assert code == 0
    table = rows(out)
    assert len(table) == 9
    assert_allclose([float(r["r"]) for r in table], 6.0, atol=1e-8)
    assert_allclose([float(r["u"]) for r in table], np.arange(1, 10) / 10)


def test_eval_points(capsys):
    code, out, _ = run(capsys, "eval", "--family", "fgm", "--theta", 1, "--points", "0.5,0.5")
    assert code == 0
    assert_allclose(float(rows(out)[0]["r"]), 4.0)
    code, out, _ = run(capsys, "eval", "--family", "fgm", "--theta", 1, "--diagonal")
    centre = [r for r in rows(out) if float(r["u"]) == 0.5]
    assert_allclose(float(centre[0]["r"]), 4.0)
    code, out, _ = run(capsys, "eval", "--family", "independence", "--grid-size", 3)
    assert_allclose([float(r["i"]) for r in rows(out)], 0.0)


def test_eval_writes_sidecar(tmp_path, capsys):
    out = tmp_path / "e.csv"
    assert run(capsys, "eval", "--family", "clayton", "--theta", 2, "--out", out)[0] == 0
    side = json.loads((tmp_path / "e.csv.json").read_text())
    assert side["model"]["family"] == "clayton"
    assert "quad_order" in side["config"]


def test_sample_then_estimate(tmp_path, capsys):
    sample = tmp_path / "s.csv"
    assert run(capsys, "sample", "--family", "frank", "--theta", 3, "-n", 2000, "--seed", 4,
               "--out", sample)[0] == 0
    errors = {}
    for method in ("naive", "local-frank"):
        prefix = tmp_path / method
        assert run(capsys, "estimate", "--input", sample, "--method", method,
                   "--out", prefix)[0] == 0
        summary = json.loads((tmp_path / f"{method}.json").read_text())
        errors[method] = summary["error"]
        assert summary["config"]["truth"]["family"] == "frank"
        assert len(rows((tmp_path / f"{method}.csv").read_text())) == 81
    assert errors["local-frank"] < errors["naive"]


def test_estimate_inline_with_explicit_truth(tmp_path, capsys):
    code, _, _ = run(capsys, "estimate", "--family", "independence", "-n", 500, "--seed", 2,
                     "--truth-family", "independence", "--h1", 0.4, "--out", tmp_path / "e")
    assert code == 0
    summary = json.loads((tmp_path / "e.json").read_text())
    assert summary["config"]["h1"] == summary["config"]["h2"] == 0.4
    assert summary["error"] > 0


def test_empty_sample_is_a_parse_error(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    code, _, err = run(capsys, "estimate", "--input", empty, "--out", tmp_path / "x")
    assert code == cli.EXIT_PARSE
    assert "line 1" in err


def test_depmap_parabola(tmp_path, capsys):
    code, _, _ = run(capsys, "depmap", "--scenario", "parabola", "-n", 250, "--seed", 1,
                     "--out", tmp_path / "d")
    assert code == 0
    labels = {r["label"] for r in rows((tmp_path / "d.csv").read_text())}
    assert {"positive", "negative"} <= labels
    cfg = json.loads((tmp_path / "d.json").read_text())["config"]
    assert cfg["B"] == 200 and cfg["bootstrap_seed"] == 1


def test_depmap_requires_seed(tmp_path, capsys):
    code, _, err = run(capsys, "depmap", "--scenario", "parabola", "--out", tmp_path / "d")
    assert code == cli.EXIT_USAGE
    assert "--seed" in err


def test_sample_requires_seed(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["sample", "--family", "frank", "--theta", "3", "-n", "10",
                  "--out", str(tmp_path / "s.csv")])
    assert exc.value.code == 2


def test_unknown_family_and_bad_parameter(capsys):
    assert run(capsys, "eval", "--family", "student", "--theta", 3)[0] == cli.EXIT_USAGE
    assert run(capsys, "eval", "--family", "clayton", "--theta", -1)[0] == cli.EXIT_USAGE


def test_kendall_pq_and_rect(capsys):
    code, out, _ = run(capsys, "kendall", "--family", "clayton", "--theta", 5, "--pq", 0.3, 0.3)
    assert code == 0
    assert_allclose(json.loads(out)["tau_LL"], 5 / 7, atol=1e-3)
    code, out, _ = run(capsys, "kendall", "--family", "independence",
                       "--rect", 0.2, 0.6, 0.1, 0.5)
    payload = json.loads(out)
    assert abs(payload["tau_naive"]) < 1e-12 and abs(payload["tau_modified"]) < 1e-12


def test_kendall_shrinking_modified(capsys):
    code, out, _ = run(capsys, "kendall", "--family", "frank", "--theta", 3, "--shrink", 0.5, 0.5,
                       "--modified", "--sides", "0.08,0.04,0.02,0.01")
    payload = json.loads(out)
    vals = np.array(payload["values"])
    assert np.all(np.diff(np.abs(vals - 1 / 3)) < 0)
    assert_allclose(payload["richardson_limit"], 1 / 3, rtol=0.02)


def test_checkerboard_k0_matches_mics(tmp_path, capsys):
    out = tmp_path / "m.csv"
    code, _, _ = run(capsys, "checkerboard", "--k", 0, "--zeta", 2, "-n", 16,
                     "--relaxation", 1.7, "--out", out)
    assert code == 0
    mass = np.loadtxt(out, delimiter=",")
    assert np.max(np.abs(mass - cop.mics_density(2.0, 16).masses)) < 1e-6
    side = json.loads((tmp_path / "m.csv.json").read_text())
    assert side["converged"] is True and side["config"]["relaxation"] == 1.7


def test_checkerboard_zero_zeta_is_uniform(tmp_path, capsys):
    out = tmp_path / "m.csv"
    assert run(capsys, "checkerboard", "--k", 1, "--zeta", 0, "-n", 6, "--out", out)[0] == 0
    assert_allclose(np.loadtxt(out, delimiter=","), 1 / 36, rtol=0)
    assert json.loads((tmp_path / "m.csv.json").read_text())["sweeps"] == 0


def test_checkerboard_discretize_family(tmp_path, capsys):
    out = tmp_path / "f.csv"
    assert run(capsys, "checkerboard", "--family", "frank", "--theta", 3, "--k", 1, "--zeta", 6,
               "-n", 8, "--out", out)[0] == 0
    assert json.loads((tmp_path / "f.csv.json").read_text())["max_residual"] < 0.05


def test_checkerboard_panel(tmp_path, capsys):
    out = tmp_path / "panel"
    code, _, _ = run(capsys, "checkerboard", "--panel", "--ks", "0,1", "--zetas", "1,2",
                     "-n", 4, "--out", out)
    assert code == 0
    index = json.loads((out / "panel.json").read_text())
    assert len(index["cells"]) == 4
    assert all(cell["converged"] for cell in index["cells"])
    assert sorted(p.name for p in out.iterdir() if p.is_dir()) == [
        "k0_zeta1", "k0_zeta2", "k1_zeta1", "k1_zeta2"]


def test_checkerboard_needs_parameters(capsys):
    assert run(capsys, "checkerboard", "-n", 4)[0] == cli.EXIT_USAGE


def test_outputs_are_deterministic(tmp_path, capsys):
    texts = []
    for tag in ("a", "b"):
        run(capsys, "sample", "--family", "clayton", "--theta", 2, "-n", 300, "--seed", 9,
            "--out", tmp_path / f"{tag}.csv")
        run(capsys, "depmap", "--input", tmp_path / f"{tag}.csv", "--seed", 3, "-B", 60,
            "--out", tmp_path / f"{tag}_map")
        texts.append([(tmp_path / f"{tag}{ext}").read_bytes()
                      for ext in (".csv", "_map.csv")])
    assert texts[0] == texts[1]


def test_verify_single_criterion(capsys, tmp_path):
    code, out, _ = run(capsys, "verify", "--only", "kendall_limits", "--out", tmp_path / "v.json")
    assert code == 0
    assert out.startswith("PASS kendall_limits")
    assert json.loads((tmp_path / "v.json").read_text())["results"][0]["passed"]


def test_verify_list(capsys):
    code, out, _ = run(capsys, "verify", "--list")
    assert code == 0
    assert out.split()[0] == "frank_constancy"


def test_verify_detects_tampered_closed_form(capsys, monkeypatch):
    original = ld._closed_r

    def tampered(model, u, v):
        r = original(model, u, v)
        return r * 1.01 if model.family == "frank" else r

    monkeypatch.setattr(ld, "_closed_r", tampered)
    code, out, _ = run(capsys, "verify", "--only", "frank_constancy")
    assert code == cli.EXIT_FAILURE
    assert out.startswith("FAIL frank_constancy")


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "reldep.cli", "eval", "--family", "frank",
                           "--theta", "2", "--points", "0.3,0.7"],
                          capture_output=True, text=True, check=True)
    assert_allclose(float(rows(proc.stdout)[0]["r"]), 4.0)
