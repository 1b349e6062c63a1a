import json
import math

import pytest

from hitchin_limits import cli
from hitchin_limits import surface as sf


def run(argv):
    return cli.main(argv)


def test_surface_build_and_validate(tmp_path):
    out = tmp_path / "disk.json"
    assert run(["surface", "build", "--disk", "1", "1.0",
                "--out", str(out)]) == 0
    assert run(["surface", "validate", "--in", str(out)]) == 0


def test_surface_validate_catches_bad_file(tmp_path):
    out = tmp_path / "disk.json"
    run(["surface", "build", "--disk", "1", "1.0", "--out", str(out)])
    data = json.loads(out.read_text())
    data["vertexOrders"] = {"0": 2}
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(data))
    assert run(["surface", "validate", "--in", str(bad)]) == 1


def test_tropical_spectrum_one_segment(tmp_path):
    p = sf.synthesize_path([1.0], turns=[], orders=[], start_angle=0.4)
    pf = tmp_path / "path.json"
    sf.save_path(p, str(pf))
    out = tmp_path / "spec.csv"
    assert run(["tropical", "spectrum", "--path", str(pf),
                "--out", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "segment,nu1,nu2,nu3,run_x1,run_x2,run_x3"
    assert len(lines) == 2


def test_polygon_unipotent_prints(capsys):
    assert run(["polygon", "unipotent", "--n", "4",
                "--theta-in", "0.3", "--theta-out", "4.0"]) == 0
    text = capsys.readouterr().out
    assert "paired entry" in text


def test_polygon_scheme_trace(capsys):
    assert run(["polygon", "scheme", "--n", "7", "--flips", "6"]) == 0
    text = capsys.readouterr().out
    assert "r-1 r0 r1" in text
    assert "r2 r3 r4" in text


def test_wang_solve_csv(tmp_path):
    out = tmp_path / "grid.csv"
    assert run(["wang", "solve", "--k", "0", "--s", "10", "--radius", "1.0",
                "--nr", "30", "--ntheta", "8", "--out", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "r,theta,phi,F,residual"
    assert len(lines) == 1 + 30 * 8


def test_verify_sweep_k0_exact(tmp_path):
    out = tmp_path / "sweep.csv"
    assert run(["verify", "sweep", "--k", "0", "--s", "1e2,1e3",
                "--nr", "30", "--out", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    rows = [list(map(float, ln.split(","))) for ln in lines[1:]]
    for row in rows:
        gaps = row[-3:]
        assert max(gaps) < 1e-8


def test_building_localmodel_deterministic(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    for out in (a, b):
        assert run(["building", "localmodel", "--k", "1", "--samples", "50",
                    "--seed", "7", "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()
    header = a.read_text().splitlines()[0]
    assert header == "sector,re_z,im_z,x1,x2,x3"


def test_building_convexity(capsys):
    assert run(["building", "convexity", "--paths", "25", "--corners", "25",
                "--seed", "3"]) == 0
    text = capsys.readouterr().out
    assert "25/25" in text


def test_trigroup_spectrum_csv(tmp_path):
    out = tmp_path / "spec.csv"
    assert run(["trigroup", "spectrum", "--pqr", "3,3,4", "--maxlen", "1.01",
                "--thetas", "4", "--layers", "9", "--out", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "theta,class,x1,x2,x3"
    assert len(lines) == 1 + 4 * 2


def test_trigroup_boundary(capsys):
    assert run(["trigroup", "boundary", "--pqr", "3,3,4", "--thetas", "6",
                "--layers", "9"]) == 0
    assert "min pairwise" in capsys.readouterr().out


def test_invalid_s_list():
    assert run(["verify", "sweep", "--k", "0", "--s", "1e3,1e2"]) == 1


def test_threads_env_var(tmp_path, monkeypatch):
    monkeypatch.setenv("HITCHIN_LIMITS_THREADS", "2")
    out = tmp_path / "sweep.csv"
    assert run(["verify", "sweep", "--k", "0", "--s", "1e2,4e2",
                "--nr", "25", "--out", str(out)]) == 0
    assert out.read_text().startswith("s,")
