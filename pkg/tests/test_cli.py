import json

import numpy as np
import pytest

from fractal_lq import cli
from fractal_lq.config import PAPER_GERM
from fractal_lq.funcstore import discretize, load_csv
from fractal_lq.rb import FixedPointError


def run(*args):
    return cli.main([str(a) for a in args])


def test_fif_writes_outputs(tmp_path):
    assert run("fif", "--out", tmp_path) == 0
    meta = json.loads((tmp_path / "fif.json").read_text())
    assert meta["converged"] and meta["residual"] <= 1e-6 and meta["iterations"] <= meta["iteration_bound"]
    assert meta["config_hash"] and meta["net_hash"]
    h = load_csv(tmp_path / "fif.csv")
    assert h.shape == (65, 65)
    img = cli.read_pgm(tmp_path / "fif.pgm")
    assert img.shape == (65, 65)


def test_fif_alpha_zero_is_germ(tmp_path, paper_net):
    assert run("fif", "--alpha", "0", "--out", tmp_path) == 0
    h = load_csv(tmp_path / "fif.csv")
    assert np.array_equal(h.values, discretize(PAPER_GERM, paper_net, 16).values)


def test_fif_invalid_alpha(tmp_path, capsys):
    assert run("fif", "--alpha", "1.5", "--out", tmp_path) == 2
    assert "sup norm" in capsys.readouterr().err


def test_fif_non_convergence(tmp_path, monkeypatch, capsys):
    def stuck(f, cfg):
        raise FixedPointError("no fixed point after 7 sweeps", 7, 0.5, 0.25)

    monkeypatch.setattr(cli, "fractal_operator", stuck)
    assert run("fif", "--out", tmp_path) == 1
    meta = json.loads((tmp_path / "fif.json").read_text())
    assert meta == {**meta, "converged": False, "iterations": 7, "residual": 0.25}
    assert "no fixed point" in capsys.readouterr().err


def test_usage_errors(tmp_path):
    with pytest.raises(SystemExit) as err:
        run("bogus")
    assert err.value.code == 2
    with pytest.raises(SystemExit) as err:
        run("fif", "--depth", "x")
    assert err.value.code == 2
    assert run("verify", "--suite", "nonsense", "--out", tmp_path) == 2
    assert run("fif", "--q", "0.5", "--out", tmp_path) == 2
    assert run("fif", "--config", tmp_path / "missing.cfg", "--out", tmp_path) == 2


def test_render(tmp_path, paper_net):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run("render", "--out", out1) == 0
    assert run("render", "--out", out2) == 0
    names = sorted(p.name for p in out1.glob("*.pgm"))
    assert names == ["fis_alpha_0.3.pgm", "fis_alpha_0.5.pgm", "fis_alpha_0.7.pgm", "fis_alpha_0.9.pgm"]
    for name in names + ["render.json"]:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    meta = json.loads((out1 / "render.json").read_text())
    assert [im["alpha"] for im in meta["images"]] == [0.3, 0.5, 0.7, 0.9]
    assert all(im["roughness"] > 0 for im in meta["images"])
    for im in meta["images"]:
        img = cli.read_pgm(out1 / im["file"])
        assert img.shape == (257, 257)
        lo, hi = im["gray"]["min"], im["gray"]["max"]
        germ = discretize(PAPER_GERM, paper_net, 64)
        expected = np.rint((cli.image_rows(germ.values) - lo) * 255 / (hi - lo))
        rows = 256 - 64 * np.arange(5)
        cols = 64 * np.arange(5)
        got = img[np.ix_(rows, cols)].astype(int)
        assert np.max(np.abs(got - expected[np.ix_(rows, cols)])) <= 1


def test_render_needs_2d(tmp_path):
    cfg = tmp_path / "one.cfg"
    cfg.write_text("[net]\naxis1 = 0, 1, 2\n[functions]\ngerm = x\nbase = identity\n")
    assert run("render", "--config", cfg, "--out", tmp_path) == 2


def test_verify_default(tmp_path):
    assert run("verify", "--out", tmp_path) == 0
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["status"] == "PASS"
    assert all(c["config_hash"] == doc["config_hash"] for c in doc["checks"])
    assert (tmp_path / "report.txt").read_text().strip().endswith("overall: PASS")


def test_verify_inverse_skipped(tmp_path):
    assert run("verify", "--suite", "inverse", "--alpha", "0.9", "--out", tmp_path) == 0
    doc = json.loads((tmp_path / "report.json").read_text())
    assert {c["status"] for c in doc["checks"]} == {"SKIPPED"}


def test_verify_corrupted_config(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[net\naxis1 = 0, 1\n")
    assert run("verify", "--config", bad, "--out", tmp_path) == 2


def test_verify_failure_exit(tmp_path, monkeypatch):
    from fractal_lq import analysis as an

    monkeypatch.setitem(cli.SUITES, "perturbation", lambda cfg, rc: [an.BoundCheck("forced", 2.0, 1.0)])
    assert run("verify", "--suite", "perturbation", "--out", tmp_path) == 1
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["checks"][0]["details"]["rerun_s"] == 32


def test_verify_parallel_matches_serial(tmp_path, monkeypatch):
    suites = "perturbation,contraction,lower_bound,measure"
    assert run("verify", "--suite", suites, "--out", tmp_path / "serial") == 0
    monkeypatch.setenv("FRACTAL_LQ_THREADS", "4")
    assert run("verify", "--suite", suites, "--out", tmp_path / "par") == 0
    strip = lambda d: [{k: v for k, v in c.items() if k != "runtime"} for c in d["checks"]]  # noqa: E731
    a = json.loads((tmp_path / "serial" / "report.json").read_text())
    b = json.loads((tmp_path / "par" / "report.json").read_text())
    assert strip(a) == strip(b)


def test_measure_masses(tmp_path):
    assert run("measure", "masses", "--depth", "1", "--out", tmp_path) == 0
    lines = (tmp_path / "masses.csv").read_text().splitlines()
    assert lines[0] == "address,mass" and len(lines) == 17
    assert lines[1] == "1.1,0.0625" and lines[-1] == "4.4,0.0625"
    assert run("measure", "masses", "--depth", "2", "--out", tmp_path) == 0
    assert (tmp_path / "masses.csv").read_text().splitlines()[2] == "1.1.1.2,0.00390625"
    assert run("measure", "masses", "--depth", "7", "--out", tmp_path) == 2


def test_measure_sample_deterministic(tmp_path):
    for d in ("a", "b"):
        assert run("measure", "sample", "-n", "10", "--seed", "7", "--out", tmp_path / d) == 0
    a = (tmp_path / "a" / "samples.csv").read_bytes()
    assert a == (tmp_path / "b" / "samples.csv").read_bytes()
    lines = a.decode().splitlines()
    assert lines[0] == "x_1,x_2" and len(lines) == 11


def test_measure_norm_exact_vs_mc(tmp_path):
    assert run("measure", "norm", "--mc", "1000000", "--depth", "4", "--out", tmp_path) == 0
    rec = json.loads((tmp_path / "norm.json").read_text())
    assert abs(rec["mc"]["integral"] - rec["exact"]["integral"]) <= 4 * rec["mc"]["se"]
