import json
import subprocess
import sys

import numpy as np
import pytest

from vnstab import cli
from vnstab.gainlab import read_gain_map_csv
from vnstab.schemes import CATALOG, dumps


def run(tmp_path, *args):
    return cli.main([str(a) for a in args])


def test_parse_range():
    assert list(cli.parse_range("0:1:3")) == [0.0, 0.5, 1.0]
    assert list(cli.parse_range("0.25")) == [0.25]
    for bad in ("1:0:3", "0:1:0", "0:1", "a:b:c", "0:1:1"):
        with pytest.raises(cli.UsageError):
            cli.parse_range(bad)


def test_parse_offsets():
    assert cli.parse_offsets("-4:2") == list(range(-4, 3))
    assert cli.parse_offsets("-1,0,2") == [-1, 0, 2]
    with pytest.raises(cli.UsageError):
        cli.parse_offsets("2:-1")


def test_gain_map_ftbs(tmp_path, capsys):
    out = tmp_path / "gm.csv"
    assert run(tmp_path, "gain-map", "--scheme", "ftbs", "--kh", "0:3.1416:200",
               "--cfl", "0:2:200", "--out", out) == 0
    gm = read_gain_map_csv(out)
    assert gm.gains.shape == (200, 200)
    assert len(out.read_text().splitlines()) == 40001
    j = int(np.argmin(np.abs(gm.cfl_grid - 1.0)))
    assert abs(gm.cfl_grid[j] - 1.0) < 1e-2
    # the cfl grid 0:2:200 does not hit 1 exactly; check the exact column separately
    assert run(tmp_path, "gain-map", "--scheme", "ftbs", "--kh", "0:3.1416:50", "--cfl", "1",
               "--out", tmp_path / "one.csv") == 0
    one = read_gain_map_csv(tmp_path / "one.csv")
    assert np.max(np.abs(one.magnitude - 1)) < 1e-12
    manifest = json.loads((tmp_path / "gm.csv.manifest.json").read_text())
    assert manifest["command"] == "gain-map" and manifest["artifacts"] == [str(out)]
    assert manifest["duration_s"] >= 0


def test_gain_map_errors(tmp_path):
    assert run(tmp_path, "gain-map", "--scheme", "nosuch", "--out", tmp_path / "x.csv") == 2
    assert run(tmp_path, "gain-map", "--scheme", "ftbs", "--kh", "0:9:10",
               "--out", tmp_path / "x.csv") == 3
    assert run(tmp_path, "gain-map", "--scheme", "ftbs", "--cfl", "2:1:4",
               "--out", tmp_path / "x.csv") == 3
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert run(tmp_path, "gain-map", "--scheme", "ftbs", "--out", blocker / "x.csv") == 1


def test_gain_map_ab_roots(tmp_path):
    out = tmp_path / "ab.csv"
    assert run(tmp_path, "gain-map", "--scheme", "ab2-bs2", "--kh", "0:3:5", "--cfl", "0:1:4",
               "--out", out) == 0
    rows = [ln.split(",") for ln in out.read_text().splitlines()[1:]]
    assert {r[5] for r in rows} == {"0", "1"}
    assert len(rows) == 2 * 5 * 4


def test_gain_point(capsys):
    assert cli.main(["gain", "--scheme", "ab2-bs2", "--kh", "0.0628318530717959",
                     "--cfl", "0.4"]) == 0
    out = capsys.readouterr().out
    assert "physical" in out and "root1" in out
    assert cli.main(["gain", "--scheme", "ftbs", "--kh", "1", "--cfl", "1"]) == 0
    assert "|G|=1" in capsys.readouterr().out


def test_simulate_table_row(tmp_path, capsys):
    out = tmp_path / "u.csv"
    assert run(tmp_path, "simulate", "--scheme", "ftbs", "--case", "composite", "--cfl", "0.25",
               "--t", "8", "--points", "1001", "--out", out) == 0
    line = capsys.readouterr().out.strip().splitlines()[-1]
    parts = dict(p.split("=") for p in line.split())
    assert abs(float(parts["L1"]) - 240.4774) / 240.4774 < 0.05
    assert abs(float(parts["Linf"]) - 0.6634) / 0.6634 < 0.02
    assert out.read_text().startswith("x,u\n")
    assert len(out.read_text().splitlines()) == 1001


def test_simulate_divergence_exit(tmp_path, capsys):
    code = run(tmp_path, "simulate", "--scheme", "rk45-demo", "--case", "sine", "--cfl", "4",
               "--t", "1.7", "--points", "101", "--out", tmp_path / "u.csv")
    assert code == 4
    assert "step" in capsys.readouterr().err


def test_simulate_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"case": "gauss-pulse", "scheme": "ssprk3-l2r1", "cfl": 0.5,
                               "t": 2.0, "cells": 64, "protocol": "clean"}))
    assert run(tmp_path, "simulate", "--config", cfg, "--out", tmp_path / "a.csv") == 0
    first = capsys.readouterr().out
    # command-line flags override the file
    assert run(tmp_path, "simulate", "--config", cfg, "--t", "4", "--out", tmp_path / "b.csv") == 0
    assert capsys.readouterr().out != first
    m = json.loads((tmp_path / "b.csv.manifest.json").read_text())
    assert m["params"]["t"] == 4.0 and m["params"]["cells"] == 64
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"case": "sine", "scheme": "ftbs", "grid": 3}))
    assert run(tmp_path, "simulate", "--config", bad, "--out", tmp_path / "c.csv") == 3
    assert run(tmp_path, "simulate", "--case", "sine", "--out", tmp_path / "c.csv") == 3
    assert run(tmp_path, "simulate", "--config", tmp_path / "missing.json") == 1


def test_simulate_2d_and_unknown(tmp_path, capsys):
    assert run(tmp_path, "simulate", "--scheme", "ftbs", "--case", "gauss-2d", "--t", "1",
               "--out", tmp_path / "u2.csv") == 0
    assert (tmp_path / "u2.csv").read_text().startswith("x,y,u\n")
    assert run(tmp_path, "simulate", "--scheme", "nope", "--case", "sine",
               "--out", tmp_path / "u.csv") == 2
    assert run(tmp_path, "simulate", "--scheme", "ftbs", "--case", "vortex") == 3


def test_measure_gain(tmp_path, capsys):
    out = tmp_path / "g.csv"
    assert run(tmp_path, "measure-gain", "--scheme", "ftbs", "--mode", "1", "--points", "101",
               "--cfl", "0.2", "--out", out) == 0
    row = out.read_text().splitlines()[1].split(",")
    assert float(row[5]) < 1e-9
    assert abs(float(row[3]) - 0.9996) < 5e-4 and abs(float(row[4]) + 0.0126) < 5e-4
    assert run(tmp_path, "measure-gain", "--scheme", "ab2-bs2", "--mode", "1", "--points", "101",
               "--cfl", "0.4", "--out", out) == 0
    row = out.read_text().splitlines()[1].split(",")
    assert abs(complex(float(row[3]), float(row[4])) - complex(0.9989, -0.0251)) < 2e-3
    assert run(tmp_path, "measure-gain", "--scheme", "ftbs", "--mode", "0", "--out", out) == 0
    row = out.read_text().splitlines()[1].split(",")
    assert (float(row[3]), float(row[4])) == (1.0, 0.0)
    assert run(tmp_path, "measure-gain", "--scheme", "ftbs", "--mode", "50", "--out", out) == 5
    assert run(tmp_path, "measure-gain", "--scheme", "ftbs", "--cfl", "-1", "--out", out) == 3


def test_verify(tmp_path, capsys):
    assert cli.main(["verify", "--scheme", "rk6-l4r2"]) == 0
    assert "PASS" in capsys.readouterr().out
    bad = tmp_path / "bad.scheme"
    bad.write_text("name = bad\nstages = 1\noffsets = -1, 0\nnumerators = -1, 2\n")
    assert cli.main(["verify", "--scheme", str(bad)]) == 6
    assert "FAIL" in capsys.readouterr().out
    assert cli.main(["verify", "--scheme", "nosuch"]) == 2
    good = tmp_path / "good.scheme"
    good.write_text(dumps(CATALOG["rk4-cd4"]))
    assert cli.main(["verify", "--scheme", str(good)]) == 0
    broken = tmp_path / "broken.scheme"
    broken.write_text("name = x\nstages = 1\nwhat\n")
    assert cli.main(["verify", "--scheme", str(broken)]) == 3


def _optimize(tmp_path, tag, *extra):
    out = tmp_path / f"{tag}.scheme"
    code = run(tmp_path, "optimize", "--stages", "6", "--offsets", "-4:2", "--order", "6",
               "--population", "8", "--generations", "10", "--seed", "7", "--out", out, *extra)
    return code, out


def test_optimize_deterministic(tmp_path, capsys):
    code, a = _optimize(tmp_path, "a")
    assert code == 0
    code, b = _optimize(tmp_path, "b")
    assert code == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.trace.csv").read_bytes() == (tmp_path / "b.trace.csv").read_bytes()


def test_optimize_seeded_baseline(tmp_path, capsys):
    from vnstab import optimizer as op
    code, out = _optimize(tmp_path, "s", "--seed-fractions", "0.16666666666666666,0.2,0.25,"
                          "0.3333333333333333,0.5,1")
    assert code == 0
    final = float(capsys.readouterr().out.split("objective=")[1].split()[0])
    rk6 = CATALOG["rk6-l4r2"]
    base = op.dissipation_objective((rk6.time, rk6.stencil), op.ObjectiveConfig.uniform(2.0, 64))
    assert final <= base * (1 + 1e-9)


def test_optimize_infeasible(tmp_path):
    assert run(tmp_path, "optimize", "--offsets", "-1:0", "--order", "3",
               "--out", tmp_path / "x.scheme") == 3
    assert run(tmp_path, "optimize", "--population", "2", "--out", tmp_path / "x.scheme") == 3


def test_replay_reproduces_bytes(tmp_path, capsys):
    code, out = _optimize(tmp_path, "r")
    assert code == 0
    before = out.read_bytes(), (tmp_path / "r.trace.csv").read_bytes()
    out.unlink()
    assert cli.main(["replay", str(tmp_path / "r.scheme.manifest.json")]) == 0
    assert (out.read_bytes(), (tmp_path / "r.trace.csv").read_bytes()) == before

    gm = tmp_path / "m.csv"
    assert run(tmp_path, "gain-map", "--scheme", "rk4-cd4", "--kh", "0:3:20", "--cfl", "0:2:9",
               "--out", gm) == 0
    first = gm.read_bytes()
    gm.unlink()
    assert cli.main(["replay", str(tmp_path / "m.csv.manifest.json")]) == 0
    assert gm.read_bytes() == first


def test_bad_usage_exit_code():
    assert cli.main([]) == 3
    assert cli.main(["gain-map"]) == 3
    assert cli.main(["--help"]) == 0


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "vnstab.cli", "verify", "--scheme", "ftbs"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "PASS" in r.stdout
