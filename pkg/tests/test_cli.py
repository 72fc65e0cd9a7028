import json
import os
import subprocess
import sys

import numpy as np
import pytest

from spraylab import cli


def run_main(argv, capsys):
    code = cli.main(argv)
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def write_json(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture
def w_spray(tmp_path):
    norm = "sqrt(y1^2+y2^2+y3^2)"
    return write_json(tmp_path / "wspray.json", {
        "format": cli.SPRAY_FORMAT, "dimension": 3, "name": "w-violating",
        "coefficients": [f"-0.5*{norm}*y2*x3", f"0.5*{norm}*y1*x3", "0"]})


def test_analyze_spiral(capsys):
    code, out, _ = run_main(["analyze", "--spray", "spiral", "--points", "20"], capsys)
    doc = json.loads(out)
    assert code == 0
    assert doc["format"] == "spraylab.report/1"
    assert doc["command"] == "analyze" and doc["pass"] is True
    assert doc["verdicts"]["spray"] == "valid"
    assert doc["verdicts"]["flat_curvature"] is False
    assert doc["results"]["weyl_defined"] is True


def test_analyze_flat_has_no_curvature(capsys):
    code, out, _ = run_main(["analyze", "--spray", "flat2", "--points", "10"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["verdicts"]["flat_curvature"] is True
    assert doc["results"]["weyl_defined"] is False


def test_analyze_rejects_non_spray(capsys, tmp_path):
    path = write_json(tmp_path / "s.json", {"format": cli.SPRAY_FORMAT, "dimension": 2,
                                            "coefficients": ["y1", "y2"]})
    code, out, _ = run_main(["analyze", "--spray", path, "--points", "10"], capsys)
    assert code == 1
    assert "not a spray" in json.loads(out)["verdicts"]["spray"]


@pytest.mark.parametrize("argv", [
    ["analyze", "--spray", "nosuchspray"],
    ["analyze"],
    ["geodesic", "--spray", "spiral", "--from", "0,0", "--dir", "1,0,0"],
    ["geodesic", "--spray", "spiral", "--from", "0,0,0", "--dir", "a,b,c"],
    ["convexity", "--spray", "spiral", "--center", "0,0,0", "--r0", "-1"],
    ["convexity", "--spray", "spiral", "--center", "0,0,0", "--tangency", "0.5", "--samples", "256"],
    ["metrize", "--spray", "shen_circle", "--multiplier", "shen_circle"],
    ["metrize", "--spray", "spiral", "--multiplier", "hessian-of:spiral_F", "--chart", "1,-1"],
    ["helmholtz", "--spray", "spiral", "--multiplier", "hessian-of:y1^^2"],
    ["planar", "--tau", "t"],
    ["analyze", "--spray", "spiral", "--tol-jacobi", "abc"],
    ["analyze", "--spray", "spiral", "--bogus"],
])
def test_usage_errors_exit_2(argv):
    code, out, msg = cli.run(argv)
    assert code == 2
    assert out is None


def test_bad_file_format(tmp_path):
    path = write_json(tmp_path / "f.json", {"format": "something-else", "dimension": 3})
    code, _, msg = cli.run(["analyze", "--spray", path])
    assert code == 2 and "expected a document" in msg
    bad = tmp_path / "g.json"
    bad.write_text("{not json")
    code, _, msg = cli.run(["analyze", "--spray", str(bad)])
    assert code == 2 and "not valid JSON" in msg


def test_helmholtz_spiral(capsys):
    code, out, _ = run_main(["helmholtz", "--spray", "spiral", "--multiplier", "spiral", "--points", "30"], capsys)
    doc = json.loads(out)
    assert code == 0
    assert all(doc["verdicts"]["conditions"].values())
    assert doc["verdicts"]["curvature_forms_agree"] is True


def test_helmholtz_multiplier_file(capsys, tmp_path):
    # Hessian of a non-Euclidean norm is not compatible with the spiral spray
    path = write_json(tmp_path / "h.json", {
        "format": cli.MULTIPLIER_FORMAT, "dimension": 3,
        "entries": {"1,1": "(y2^2 + y3^2)/sqrt(y1^2+y2^2+y3^2)^3",
                    "1,2": "-y1*y2/sqrt(y1^2+y2^2+y3^2)^3",
                    "1,3": "-y1*y3/sqrt(y1^2+y2^2+y3^2)^3",
                    "2,2": "(y1^2 + y3^2)/sqrt(y1^2+y2^2+y3^2)^3",
                    "2,3": "-y2*y3/sqrt(y1^2+y2^2+y3^2)^3",
                    "3,3": "(y1^2 + y2^2)/sqrt(y1^2+y2^2+y3^2)^3"}})
    code, out, _ = run_main(["helmholtz", "--spray", "spiral", "--multiplier", path, "--points", "30"], capsys)
    assert code == 0
    assert json.loads(out)["inputs"]["multiplier"]["source"] == "file"
    code, out, _ = run_main(["helmholtz", "--spray", "spiral", "--multiplier",
                             "hessian-of:sqrt(2*y1^2+y2^2+y3^2)", "--points", "30"], capsys)
    assert code == 1
    assert json.loads(out)["pass"] is False


def test_multiplier_entry_key_errors(tmp_path):
    path = write_json(tmp_path / "h.json", {"format": cli.MULTIPLIER_FORMAT, "dimension": 3,
                                            "entries": {"1,4": "0"}})
    code, _, msg = cli.run(["helmholtz", "--spray", "spiral", "--multiplier", path])
    assert code == 2 and "out of range" in msg


def test_tolerance_override_flips_verdict(capsys):
    base = ["analyze", "--spray", "spiral", "--points", "10"]
    code, out, _ = run_main(base, capsys)
    assert code == 0
    code, out, _ = run_main(base + ["--tol-jacobi-kernel", "0"], capsys)
    doc = json.loads(out)
    assert code == 1
    assert doc["results"]["tolerance_overrides"] == {"jacobi-kernel": 0.0}
    rec = [c for c in doc["checks"] if c["name"] == "jacobi_kernel"][0]
    assert rec["tolerance"] == 0.0 and rec["pass"] is False


@pytest.mark.parametrize("form", [["--tol-jacobi_kernel=0"], ["--tol-JACOBI-KERNEL", "0"]])
def test_tolerance_override_spellings(form):
    code, _, _ = cli.run(["analyze", "--spray", "spiral", "--points", "10"] + form)
    assert code == 1


def test_report_file(tmp_path, capsys):
    path = tmp_path / "r.json"
    code, out, _ = run_main(["planar", "--tau", "1", "--report", str(path)], capsys)
    assert code == 0 and out == ""
    assert json.loads(path.read_text())["command"] == "planar"


def test_reports_are_byte_identical(capsys):
    argv = ["analyze", "--spray", "spiral", "--points", "25", "--seed", "5"]
    _, a, _ = run_main(argv, capsys)
    _, b, _ = run_main(argv, capsys)
    assert a == b
    _, c, _ = run_main(argv[:-1] + ["6"], capsys)
    assert c != a


def test_reports_independent_of_thread_count(tmp_path):
    argv = [sys.executable, "-m", "spraylab.cli", "convexity", "--spray", "spiral", "--center", "0,0,0",
            "--samples", "512", "--tangency", "0.3", "--tangency-samples", "40"]
    outs = []
    for threads in ("1", "4"):
        env = dict(os.environ, SPRAYLAB_THREADS=threads)
        outs.append(subprocess.run(argv, capture_output=True, env=env, check=True).stdout)
    assert outs[0] == outs[1]


def test_planar_periodic(capsys):
    code, out, _ = run_main(["planar", "--tau", "1 + 0.5*cos(2*t)", "--table", "8"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["verdicts"]["periodic"] is True
    th = np.array(doc["results"]["phi_table"]["theta"])
    np.testing.assert_allclose(doc["results"]["phi_table"]["phi"], 1 - np.cos(2 * th) / 6, atol=1e-8)


def test_planar_obstructed(capsys):
    code, out, _ = run_main(["planar", "--tau", "cos(t)"], capsys)
    doc = json.loads(out)
    # an obstruction is a finding, not a failed check
    assert code == 0
    assert doc["verdicts"]["periodic"] is False
    assert doc["results"]["k1"] == pytest.approx(1.0)
    assert doc["results"]["secular"]["sin"] == pytest.approx(0.5)


def test_planar_sample_file(tmp_path, capsys):
    t = 2 * np.pi * np.arange(32) / 32
    path = tmp_path / "tau.txt"
    path.write_text("\n".join(f"{v:.17g}" for v in 2 * np.sin(t) + 1))
    code, out, _ = run_main(["planar", "--tau", str(path)], capsys)
    doc = json.loads(out)
    assert doc["results"]["k2"] == pytest.approx(2.0, abs=1e-10)
    assert doc["inputs"]["tau"]["source"] == "file"
    path.write_text("1\nx\n")
    assert cli.run(["planar", "--tau", str(path)])[0] == 2


def test_geodesic_csv(tmp_path, capsys):
    path = tmp_path / "g.csv"
    code, out, _ = run_main(["geodesic", "--spray", "spiral", "--from", "0.3,-0.2,0.1", "--dir", "1,0,0",
                             "--time", str(4 * np.pi), "--tol", "1e-12", "--samples", "9",
                             "--out", str(path)], capsys)
    doc = json.loads(out)
    assert code == 0
    assert doc["results"]["closure_distance"] < 1e-8
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x1,x2,x3,y1,y2,y3" and len(lines) == 10
    assert len(doc["results"]["csv"]["sha256"]) == 64


def test_geodesic_zero_direction():
    code, out, _ = cli.run(["geodesic", "--spray", "spiral", "--from", "0,0,0", "--dir", "0,0,0"])
    assert code == 2


def test_convexity(capsys):
    code, out, _ = run_main(["convexity", "--spray", "spiral", "--center", "0,0,0", "--samples", "1024",
                             "--tangency", "0.3", "--tangency-samples", "30"], capsys)
    doc = json.loads(out)
    assert code == 0
    assert doc["results"]["K"] == pytest.approx(0.525)
    assert doc["checks"][0]["name"] == "second_derivative"


def test_convexity_flat(capsys):
    code, out, _ = run_main(["convexity", "--spray", "flat3", "--center", "0,0,0", "--samples", "128"], capsys)
    doc = json.loads(out)
    assert doc["verdicts"]["unbounded_estimate"] is True
    # JSON has no infinity; non-finite numbers are written as strings
    assert doc["results"]["raw_bound"] == "inf"


def test_metrize_flat_euclid(capsys, tmp_path):
    path = tmp_path / "F.json"
    code, out, _ = run_main(["metrize", "--spray", "flat3", "--multiplier", "euclid_norm3",
                             "--chart=-0.5,0.5", "--points", "8", "--fibre-points", "200",
                             "--out", str(path)], capsys)
    doc = json.loads(out)
    assert code == 0
    assert doc["verdicts"]["chart"] == "Finsler"
    sampled = json.loads(path.read_text())
    assert sampled["format"] == "spraylab.sampled-field/1"
    # F = |y| up to the gauge; on the axis fibres |y| = 1
    F = np.array(sampled["F"])
    Y = np.array(sampled["y"])
    alpha = np.array(sampled["alpha"])
    lin = Y @ alpha
    assert np.all(np.abs(F - lin - (1.0 - Y[:, 0])) < 1e-6)


def test_metrize_w_violation_exit_1(capsys, w_spray):
    code, out, err = run_main(["metrize", "--spray", w_spray, "--multiplier", "hessian-of:euclid_norm",
                               "--points", "5"], capsys)
    doc = json.loads(out)
    assert code == 1
    assert doc["error"]["stage"] == "chi-non-closed"
    assert "chi-non-closed" in err
    assert doc["inputs"]["spray"]["source"] == "file"


def test_main_entry_point_version():
    res = subprocess.run([sys.executable, "-m", "spraylab.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("spraylab ")


@pytest.mark.parametrize("chart, verdict", [
    ("-1,1", "Finsler"),
    ("-2.5,2.5,-2.5,2.5,-0.5,0.5", "pseudo-Finsler"),
])
def test_metrize_spiral_verdicts(chart, verdict):
    code, out, _ = cli.run(["metrize", "--spray", "spiral", "--multiplier", "hessian-of:spiral_F",
                            f"--chart={chart}", "--points", "8", "--fibre-points", "300"])
    assert code == 0
    assert out.verdicts["chart"] == verdict
    # the centre always certifies; positivity fails only where x1^2 + x2^2 >= 4
    probes = out.verdicts["probes"]
    assert probes[0]["verdict"] == "Finsler"
    for p in probes:
        assert (p["verdict"] == "Finsler") == (p["x"][0] ** 2 + p["x"][1] ** 2 < 4)
