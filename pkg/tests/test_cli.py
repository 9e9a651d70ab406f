import json
import os
import subprocess
import sys

import numpy as np
import pytest

SPEC2 = {"n": 2, "a": [3.0, 2.0, 1.0], "A": {"kind": "sqrt"}}
SPEC_BAD = {"n": 2, "a": [1.0, 2.0, 3.0], "A": {"kind": "sqrt"}}
SPEC_CONST = {"n": 3, "a": [4.0, 3.0, 2.0, 1.0], "A": {"kind": "const", "coeffs": [1.0]}}


def run_cli(args):
    return subprocess.run([sys.executable, "-m", "liouville.cli"] + args,
                          capture_output=True, text=True)


@pytest.fixture()
def spec_file(tmp_path):
    p = tmp_path / "spec.json"
    p.write_text(json.dumps(SPEC2))
    return str(p)


def test_periods_table_and_json(spec_file):
    r = run_cli(["periods", "--spec", spec_file])
    assert r.returncode == 0
    assert "alpha_i" in r.stdout and "# spec_hash=" in r.stdout
    rj = run_cli(["periods", "--spec", spec_file, "--json"])
    assert rj.returncode == 0
    data = json.loads(rj.stdout)
    alphas = [row["alpha"] for row in data["periods"]]
    for row, line in zip(data["periods"], r.stdout.splitlines()[5:]):
        assert f"{row['alpha']:.15g}" in line


def test_periods_rejects_bad_spectrum(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(SPEC_BAD))
    r = run_cli(["periods", "--spec", str(p)])
    assert r.returncode == 2
    assert "a[0]" in r.stderr  # names the offending pair


def test_verify_identities_pass(spec_file, tmp_path):
    out = tmp_path / "sum.json"
    r = run_cli(["verify", "--spec", spec_file, "--suite", "identities",
                 "--draws", "20", "--seed", "5", "--json-out", str(out)])
    assert r.returncode == 0
    assert "PASS" in r.stdout
    data = json.loads(out.read_text())
    assert data["results"][0]["passed"]


def test_verify_const_generator_premise(tmp_path):
    p = tmp_path / "const.json"
    p.write_text(json.dumps(SPEC_CONST))
    r = run_cli(["verify", "--spec", str(p), "--suite", "inequalities",
                 "--draws", "2"])
    assert r.returncode == 0
    assert "premise failed" in r.stdout


def test_verify_deterministic(spec_file):
    args = ["verify", "--spec", spec_file, "--suite", "identities",
            "--draws", "15", "--seed", "11"]
    r1, r2 = run_cli(args), run_cli(args)
    assert r1.stdout == r2.stdout


def test_geodesic_zero_horizon_single_row(spec_file):
    r = run_cli(["geodesic", "--spec", spec_file, "--eta", "v:0.6,0.8", "--T", "0"])
    assert r.returncode == 0
    rows = [l for l in r.stdout.splitlines() if l and not l.startswith("#")]
    assert rows[0].startswith("t,x1,x2,xi1,xi2,lambda1,lambda2,sigma1,sigma2,b1")
    assert len(rows) == 2


def test_geodesic_trace_file(tmp_path, spec_file):
    out = tmp_path / "trace.csv"
    r = run_cli(["geodesic", "--spec", spec_file, "--eta", "xi:0.4,0.9",
                 "--T", "2.5", "--samples", "6", "--out", str(out)])
    assert r.returncode == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# spec_hash=")
    data = [l for l in lines if l and not l.startswith("#") and not l.startswith("t,")]
    assert len(data) == 6
    last = np.array([float(v) for v in data[-1].split(",")])
    assert abs(last[0] - 2.5) < 1e-12


def test_conjugate_lines(spec_file):
    r = run_cli(["conjugate", "--spec", spec_file, "--eta", "v:1.0,0.0",
                 "--T", "4.2"])
    assert r.returncode == 0
    rows = [l for l in r.stdout.splitlines() if l and not l.startswith("#")]
    assert rows[0] == "t,multiplicity,family,flags"
    assert len(rows) >= 2
    t, mult = rows[1].split(",")[:2]
    assert float(t) > 0 and int(mult) == 1


def test_unknown_flag_usage_exit(spec_file):
    r = run_cli(["geodesic", "--spec", spec_file, "--bogus", "1"])
    assert r.returncode == 64


def test_missing_spec_input_exit():
    r = run_cli(["periods", "--spec", "/does/not/exist.json"])
    assert r.returncode == 2


def test_spec_dir_env(tmp_path):
    p = tmp_path / "byname.json"
    p.write_text(json.dumps(SPEC2))
    env = dict(os.environ, LIOUVILLE_SPEC_DIR=str(tmp_path))
    r = subprocess.run([sys.executable, "-m", "liouville.cli", "periods",
                        "--spec", "byname.json"],
                       capture_output=True, text=True, env=env)
    assert r.returncode == 0


def test_cutlocus_command_and_determinism(tmp_path, spec_file):
    out1 = tmp_path / "m1.json"
    out2 = tmp_path / "m2.json"
    ply = tmp_path / "m.ply"
    base = ["cut-locus", "--spec", spec_file, "--point", "1.7,0.85",
            "--res", "4x4", "--seed", "3"]
    r1 = run_cli(base + ["--out", f"{out1},{ply}"])
    assert r1.returncode == 0, r1.stderr
    r2 = run_cli(base + ["--out", str(out2), "--workers", "2"])
    assert r2.returncode == 0, r2.stderr
    # byte-identical mesh irrespective of worker count
    assert out1.read_bytes() == out2.read_bytes()
    assert ply.read_text().startswith("ply")
