import json
import math
import subprocess
import sys

import numpy as np
import pytest

from vortexre import families as F
from vortexre.cli import main


def write_input(path, gamma, z):
    path.write_text(json.dumps({"gamma": list(gamma), "z": list(map(float, z))}))
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def tri_json(tmp_path):
    return write_input(tmp_path / "tri.json", [1, 1, 1],
                       [1, 0, -0.5, math.sqrt(3) / 2, -0.5, -math.sqrt(3) / 2])


def test_analyze_triangle(capsys, tri_json):
    code, out, _ = run(capsys, "analyze", "--positions-json", tri_json)
    assert code == 0
    d = json.loads(out)
    assert d["spectral"]["classification"] == "LinearlyStable"
    lam = sorted(x[1] for x in d["spectral"]["nontrivial_eigenvalues"])
    assert lam == pytest.approx([-1, 1], abs=1e-8)
    assert (d["morse"]["nullity"], d["morse"]["index"]) == (1, 0)
    assert d["identities"]["equilibrium_eigvec"] < 1e-10


def test_analyze_square(capsys, tmp_path):
    p = write_input(tmp_path / "sq.json", [1, 1, 1, 1], [1, 0, 0, 1, -1, 0, 0, -1])
    code, out, _ = run(capsys, "analyze", "--positions-json", p)
    assert code == 0 and json.loads(out)["spectral"]["classification"] == "LinearlyStable"


def test_analyze_malformed(capsys, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    code, _, err = run(capsys, "analyze", "--positions-json", str(p))
    assert code == 2 and "cannot read" in err


def test_analyze_wrong_sizes(capsys, tmp_path):
    p = write_input(tmp_path / "x.json", [1, 1], [0, 0, 1, 0, 2, 0])
    assert run(capsys, "analyze", "--positions-json", str(p))[0] == 2


def test_analyze_family(capsys):
    code, out, _ = run(capsys, "analyze", "--family", "rhombus", "--branch", "A", "--param", "-0.2")
    d = json.loads(out)
    assert d["spectral"]["classification"] == "LinearlyStable" and d["morse"]["index"] > 0


def test_analyze_nonconvergence(capsys, tmp_path, monkeypatch):
    from vortexre import solver
    from vortexre.errors import ConvergenceError

    def fail(*a, **k):
        raise ConvergenceError("no luck", 1.0, 100)

    monkeypatch.setattr(solver, "refine", fail)
    p = write_input(tmp_path / "x.json", [1, 2, 3, 4], [0, 0, 1, 0.1, 2, -0.3, 0.4, 0.8])
    code, _, err = run(capsys, "analyze", "--positions-json", p)
    assert code == 1 and "no luck" in err


def test_config_supplies_defaults(capsys, tmp_path, tri_json):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"positions_json": tri_json}))
    code, out, _ = run(capsys, "--config", str(cfg), "analyze")
    assert code == 0 and json.loads(out)["spectral"]["classification"] == "LinearlyStable"


def test_config_unknown_key(capsys, tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"bogus": 1}))
    code, _, err = run(capsys, "--config", str(p), "repro")
    assert code == 2 and "bogus" in err


def test_unknown_flag(capsys):
    assert run(capsys, "analyze", "--frobnicate")[0] == 2


def test_family_rhombus_B(capsys):
    code, out, _ = run(capsys, "family", "--family", "rhombusB", "--m-from", "-0.99",
                       "--m-to", "-0.01", "--steps", "200")
    assert code == 0
    rows = out.strip().splitlines()
    head = rows[0].split(",")
    assert len(rows) == 201
    i = head.index("classification")
    t2 = head.index("type2")
    recs = [r.split(",") for r in rows[1:]]
    assert all(r[i] == "Unstable" for r in recs)
    m = np.array([float(r[0]) for r in recs])
    second = [r[t2] for r in recs]
    flips = [k for k in range(len(recs) - 1) if second[k] != second[k + 1]]
    assert len(flips) == 1
    grid = m[1] - m[0]
    k = flips[0]
    assert m[k] - grid <= F.rhombus_constants().m_star <= m[k + 1] + grid


def test_family_trapezoid(capsys):
    code, out, _ = run(capsys, "family", "--family", "trapezoid", "--m-from", "0.01",
                       "--m-to", "5", "--steps", "100")
    rows = out.strip().splitlines()
    assert code == 0 and len(rows) == 101
    i = rows[0].split(",").index("classification")
    assert {r.split(",")[i] for r in rows[1:]} == {"LinearlyStable"}


def test_family_single_step(capsys):
    code, out, _ = run(capsys, "family", "--family", "trapezoid", "--m-from", "1",
                       "--m-to", "2", "--steps", "1")
    assert code == 0 and len(out.strip().splitlines()) == 2
    assert out.splitlines()[1].startswith("1,0.75,")


def test_family_domain_violation(capsys):
    code = run(capsys, "family", "--family", "trapezoid", "--m-from", "-1", "--m-to", "1",
               "--steps", "3")[0]
    assert code == 2


def test_family_unknown(capsys):
    assert run(capsys, "family", "--family", "pentagram", "--m-from", "0", "--m-to", "1")[0] == 2


def test_census_no_seeds(capsys):
    code, out, _ = run(capsys, "census", "--gamma", "1,1,1", "--seeds", "0")
    d = json.loads(out)
    assert code == 0 and len(d["classes"]) == 3
    assert all(c["kind"] == "collinear" and c["classification"] == "Unstable" for c in d["classes"])


def test_census_triangle(capsys):
    code, out, _ = run(capsys, "census", "--gamma", "1,1,1", "--seeds", "100", "--rng-seed", "3")
    d = json.loads(out)
    planar = [c for c in d["classes"] if c["kind"] == "planar"]
    assert len(planar) == 1 and planar[0]["classification"] == "LinearlyStable"
    assert sum(c["kind"] == "collinear" for c in d["classes"]) == 3


def test_census_generic_positive(capsys):
    code, out, _ = run(capsys, "census", "--gamma", "1,1,0.5,0.5", "--seeds", "300")
    d = json.loads(out)
    assert code == 0
    assert any(c["kind"] == "planar" and c["classification"] == "LinearlyStable"
               for c in d["classes"])
    assert sum(c["kind"] == "collinear" for c in d["classes"]) == 12


def test_census_deterministic(capsys):
    a = run(capsys, "census", "--gamma", "1,0.5,0.8", "--seeds", "30", "--rng-seed", "9")[1]
    b = run(capsys, "census", "--gamma", "1,0.5,0.8", "--seeds", "30", "--rng-seed", "9")[1]
    assert a == b


def test_simulate_csv(capsys, tmp_path):
    out = tmp_path / "traj.csv"
    code = run(capsys, "simulate", "--family", "trapezoid", "--param", "1", "--frame", "rotating",
               "--horizon", "2", "--out", str(out))[0]
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "t,x_1,y_1,x_2,y_2,x_3,y_3,x_4,y_4,H,I,G"
    data = np.array([[float(v) for v in l.split(",")] for l in lines[1:]])
    assert np.max(np.abs(data[:, 1:9] - data[0, 1:9])) < 1e-10


def test_simulate_bad_path(capsys):
    code = run(capsys, "simulate", "--family", "trapezoid", "--param", "1",
               "--out", "/nonexistent-dir/x.csv")[0]
    assert code == 2


def test_simulate_deterministic(capsys, tmp_path):
    p = write_input(tmp_path / "r.json", [1, 0.5, 2], [0, 0, 1, 0.2, -0.3, 0.9])
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for o in (a, b):
        assert run(capsys, "simulate", "--positions-json", p, "--horizon", "3", "--out", str(o))[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_probe_trapezoid(capsys):
    code, out, _ = run(capsys, "probe", "--family", "trapezoid", "--param", "1", "--delta", "1e-3",
                       "--horizon", "20", "--samples", "2")
    d = json.loads(out)
    assert code == 0
    assert all(s["max_distance"] < 1e-2 and not s["escaped"] for s in d["samples"])


def test_repro(capsys):
    code, out, _ = run(capsys, "repro", "--steps", "100")
    assert code == 0
    assert out.count("PASS") == 7


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "vortexre", "family", "--family", "ngon",
                        "--m-from", "3", "--m-to", "4"], capture_output=True, text=True)
    assert r.returncode == 0
    assert len(r.stdout.strip().splitlines()) == 3
