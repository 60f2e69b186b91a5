import json
import os
import subprocess
import sys

import pytest

from floquet_lab.cli import run
from floquet_lab.reports import verify_manifest


def _load(path, name):
    with open(os.path.join(path, name)) as fh:
        return json.load(fh)


def test_liouville_laplacian(tmp_path):
    assert run(["liouville", "--preset", "laplacian2d", "--nmax", "2", "--out", str(tmp_path)]) == 0
    assert _load(tmp_path, "liouville.json")["d"] == [1, 3, 5]
    assert verify_manifest(str(tmp_path)) == []


def test_qharm(tmp_path, capsys):
    assert run(["qharm", "--n", "2", "--N", "2", "--q", "xi1^2+xi2^2", "--out", str(tmp_path)]) == 0
    out = _load(tmp_path, "qharm.json")
    assert out["dimension"] == 5 and out["h_dim"] == 5
    assert json.loads(capsys.readouterr().out)["dimension"] == 5
    assert run(["qharm", "--n", "2", "--N", "3", "--q-json", "[[[1, 0], 1.0], [[0, 1], [0, 1]]]",
                "--basis", "--out", str(tmp_path)]) == 0
    out = _load(tmp_path, "qharm.json")
    assert out["dimension"] == 4 and len(out["kernel_basis"]["3"]) == 1


def test_homogenize(tmp_path):
    assert run(["homogenize", "--preset", "sin_divform", "--dump-fields", "--out",
                str(tmp_path)]) == 0
    out = _load(tmp_path, "homogenize.json")
    assert out["Q_hom"][0][0] == pytest.approx(1.7320508, abs=1e-7)
    assert out["proportionality_residual"] <= 0.02
    assert (tmp_path / "cell_fields.csv").exists()


def test_bands_and_lambda(tmp_path):
    assert run(["bands", "--preset", "drift1d", "--points", "9", "--bands", "2", "--out",
                str(tmp_path)]) == 0
    out = _load(tmp_path, "bands.json")
    assert out["multiplicities"] == [1] and out["taylor"][0]["l0"] == 1
    header = (tmp_path / "bands.csv").read_text().splitlines()[0]
    assert header == "k1,re_lambda1,im_lambda1,re_lambda2,im_lambda2"
    assert run(["lambda", "--preset", "drift1d", "--out", str(tmp_path)]) == 0
    out = _load(tmp_path, "lambda.json")
    assert out["lambda0"] == pytest.approx(1.0, abs=1e-8)
    assert out["classification"] == "ConvexSurface"
    assert (tmp_path / "lambda_rays.csv").exists()


def test_synthesize(tmp_path):
    measure = json.dumps({"points": [[1.0], [-1.0]], "weights": [0.5, 0.5]})
    assert run(["synthesize", "--preset", "shifted1d", "--measure", measure, "--box", "-1", "1",
                "3", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "synthesis.csv").read_text().splitlines()
    assert rows[0] == "x1,re_u,im_u" and float(rows[2].split(",")[1]) == pytest.approx(1.0)


def test_spec_file(tmp_path):
    spec = tmp_path / "op.json"
    spec.write_text(json.dumps({"kind": "GeneralSecondOrder", "n": 1, "grid_resolution": 4,
                                "coefficients": {"b": [2.0]}}))
    assert run(["liouville", "--spec", str(spec), "--nmax", "3", "--out", str(tmp_path)]) == 0
    assert _load(tmp_path, "liouville.json")["d"] == [1, 1, 1, 1]


def test_exit_codes(tmp_path, capsys):
    out = str(tmp_path)
    assert run(["liouville", "--out", out]) == 2
    assert run(["liouville", "--preset", "mathieu", "--tol.fermi", "-1", "--out", out]) == 2
    assert run(["liouville", "--preset", "bogus", "--out", out]) == 2
    assert run(["qharm", "--n", "2", "--N", "2", "--q", "zz", "--out", out]) == 2
    assert run(["homogenize", "--preset", "shifted1d", "--out", out]) == 1
    err = capsys.readouterr().err
    assert "configuration error" in err and "CNotZero" in err


def test_threads_env(tmp_path, monkeypatch):
    monkeypatch.setenv("FLOQUET_LAB_THREADS", "3")
    assert run(["qharm", "--n", "1", "--N", "2", "--q", "xi1", "--out", str(tmp_path)]) == 0
    assert _load(tmp_path, "manifest.json")["config"]["threads"] == 3
    monkeypatch.setenv("FLOQUET_LAB_THREADS", "x")
    assert run(["qharm", "--n", "1", "--N", "2", "--q", "xi1", "--out", str(tmp_path)]) == 2


def test_deterministic_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(["lambda", "--preset", "shear2d", "--rays", "8", "--seed", "1",
                    "--out", str(d)]) == 0
    for name in ("lambda.json", "lambda_rays.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "floquet_lab", "verify-all", "--only", "1",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "[PASS]  1." in proc.stdout
