import json
import math

import numpy as np
import pytest

from canonsys.cli import main

FREE = {"trace_normalized": True,
        "segments": [{"length": math.pi, "kind": "constant", "matrix": [[0.5, 0.0], [0.0, 0.5]]}]}
SEMI = {"trace_normalized": True,
        "segments": [{"length": "inf", "kind": "constant", "matrix": [[0.5, 0.0], [0.0, 0.5]]}]}
MIXED = {"trace_normalized": True,
         "segments": [{"length": 1.0, "kind": "constant", "matrix": [[0.8, 0.1], [0.1, 0.2]]},
                      {"length": 0.5, "kind": "rank_one", "angle": 0.3}]}
TWO = {"atoms": [{"t": -1.0, "w": 0.4}, {"t": 0.0, "w": 0.6}, {"t": 1.5, "w": 1.1}]}


@pytest.fixture
def files(tmp_path):
    paths = {}
    for name, obj in [("free", FREE), ("semi", SEMI), ("mixed", MIXED), ("two", TWO),
                      ("e", {"e": {"coeffs": [[1, 0], [0, -2], [-1, 0]]}}),
                      ("leb", {"kind": "power", "params": {"c": 1.0, "p": 0.0}}),
                      ("sched", {"N": [8, 16, 32], "s": [8, 16, 32], "x_max": 2.0})]:
        p = tmp_path / f"{name}.json"
        p.write_text(json.dumps(obj))
        paths[name] = str(p)
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    paths["bad"] = str(bad)
    return paths


def run(tmp_path, name, *args):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    report = json.loads((out / "report.json").read_text())
    assert report["exit_code"] == code
    output = out / "output.json"
    return code, report, json.loads(output.read_text()) if output.exists() else None


def test_spectrum_of_free_system(tmp_path, files):
    code, rep, out = run(tmp_path, "spec", "direct", "spectrum", "--h", files["free"],
                         "--alpha", "pi/2", "--window", "-5", "5")
    assert code == 0
    assert out["eigenvalues"] == pytest.approx([-4, -2, 0, 2, 4], abs=1e-8)
    assert rep["residuals"]["boundary_residual"]["ok"]
    assert files["free"] in rep["inputs"]


def test_spectrum_with_decimal_alpha(tmp_path, files):
    # 1.5708 is not pi/2; the eigenvalues move by about 2e-6
    code, _, out = run(tmp_path, "spec", "direct", "spectrum", "--h", files["free"],
                       "--alpha", "1.5708", "--window", "-5", "5")
    assert code == 0
    assert out["eigenvalues"] == pytest.approx([-4, -2, 0, 2, 4], abs=1e-5)


def test_measure_roundtrip_through_files(tmp_path, files):
    code, _, out = run(tmp_path, "inv", "inverse", "measure", "--atoms", files["two"])
    assert code == 0
    hfile = tmp_path / "h.json"
    hfile.write_text(json.dumps(out["hamiltonian"]))
    code, _, back = run(tmp_path, "dir", "direct", "measure", "--h", str(hfile), "--window", "-3", "3")
    assert code == 0
    t = [a["t"] for a in back["atoms"]]
    w = [a["w"] for a in back["atoms"]]
    assert t == pytest.approx([a["t"] for a in TWO["atoms"]], abs=1e-7)
    assert w == pytest.approx([a["w"] for a in TWO["atoms"]], rel=1e-6)


def test_type_exact_and_numeric_agree(tmp_path, files):
    _, _, exact = run(tmp_path, "t1", "type", "--h", files["mixed"])
    _, _, num = run(tmp_path, "t2", "type", "--h", files["mixed"], "--numeric")
    assert exact["exact_type"] == pytest.approx(math.sqrt(0.8 * 0.2 - 0.01))
    assert num["numeric_type"] == pytest.approx(exact["exact_type"], rel=0.02)
    _, _, poly = run(tmp_path, "t3", "type", "--e", files["e"])
    assert abs(poly["numeric_type"]) <= 0.02


def test_inverse_poly_and_length(tmp_path, files):
    code, rep, out = run(tmp_path, "p", "inverse", "poly", "--e", files["e"])
    assert code == 0 and out["length"] == pytest.approx(2.5)
    assert all(r["ok"] for r in rep["residuals"].values())
    _, _, ln = run(tmp_path, "l", "debranges", "length", "--e", files["e"])
    assert ln["length"] == pytest.approx(2.5)


def test_weyl_commands(tmp_path, files):
    code, _, out = run(tmp_path, "d", "weyl", "disk", "--h", files["semi"], "--x", "1", "--x", "2", "--z", "i")
    assert code == 0
    assert [2 * d["radius"] for d in out["disks"]] == pytest.approx([2 / math.sinh(1), 2 / math.sinh(2)])
    code, _, out = run(tmp_path, "m", "weyl", "m", "--h", files["semi"], "--z", "1+2i")
    assert code == 0


def test_csv_output(tmp_path, files):
    out = tmp_path / "csv"
    assert main(["direct", "measure", "--h", files["free"], "--window", "-3", "3",
                 "--format", "csv", "--out", str(out)]) == 0
    lines = (out / "output.csv").read_text().splitlines()
    assert lines[0] == "t,w" and len(lines) == 4


def test_usage_error(tmp_path, files):
    code, rep, _ = run(tmp_path, "u", "direct", "spectrum", "--h", files["free"])
    assert code == 2 and rep["error"]
    assert main(["no-such-command", "--out", str(tmp_path / "x")]) == 2


def test_validation_error(tmp_path, files):
    code, rep, _ = run(tmp_path, "v", "direct", "spectrum", "--h", files["bad"], "--window", "-1", "1")
    assert code == 3 and "not valid JSON" in rep["error"]
    code, _, _ = run(tmp_path, "v2", "inverse", "measure", "--atoms", files["free"])
    assert code == 3


def test_gate_failure(tmp_path, files):
    code, rep, _ = run(tmp_path, "g", "weyl", "inverse", "--measure", files["leb"],
                       "--schedule", files["sched"], "--tol", "1e-6")
    assert code == 4
    assert not rep["residuals"]["herglotz_mismatch"]["ok"]


def test_outputs_are_byte_identical(tmp_path, files):
    args = ["inverse", "measure", "--atoms", files["two"], "--out", str(tmp_path / "same")]
    main(args)
    first = [(tmp_path / "same" / f).read_bytes() for f in ("output.json", "report.json")]
    main(args)
    second = [(tmp_path / "same" / f).read_bytes() for f in ("output.json", "report.json")]
    assert first == second


def test_threads_do_not_change_output(tmp_path, files):
    base = ["weyl", "m", "--h", files["semi"], "--z", "i", "--z", "1+i", "--z", "-2+0.5i"]
    main([*base, "--out", str(tmp_path / "a")])
    main([*base, "--threads", "3", "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "output.json").read_bytes() == (tmp_path / "b" / "output.json").read_bytes()


def test_selftest(tmp_path):
    code, rep, out = run(tmp_path, "s", "selftest")
    assert code == 0 and all(out.values())
    assert np.all([r["ok"] for r in rep["residuals"].values()])
