import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vnstab import gainlab as gl
from vnstab.schemes import CATALOG, catalog_lookup

ONE_LEVEL = sorted(n for n, s in CATALOG.items() if not s.is_multilevel)


# -- transforms -----------------------------------------------------------------


def test_dft_single_mode():
    n = 100
    u = np.sin(2 * np.pi * np.arange(n) / n)
    s = gl.dft(u)
    assert abs(abs(s[1]) - n / 2) < 1e-9
    others = np.abs(s[2: n // 2 + 1])
    assert np.max(others) < 1e-9 and abs(s[0]) < 1e-9


def test_dft_constant():
    s = gl.dft(np.full(37, 1.5))
    assert s[0] == pytest.approx(37 * 1.5)
    assert np.max(np.abs(s[1:])) < 1e-12


@pytest.mark.parametrize("n", [2, 7, 100, 1000, 1001])
def test_dft_matches_numpy_fft(n):
    u = np.random.default_rng(n).normal(size=n)
    assert np.max(np.abs(gl.dft(u) - np.fft.fft(u))) < 1e-9 * max(n, 10)


def test_inverse_round_trip_and_parseval():
    u = np.random.default_rng(4).normal(size=123)
    s = gl.dft(u)
    assert np.max(np.abs(gl.idft(s) - u)) < 1e-10
    assert np.sum(u**2) == pytest.approx(np.sum(np.abs(s) ** 2) / u.size, rel=1e-8)


def test_dft_shift_is_phase_ramp():
    n = 64
    u = np.random.default_rng(5).normal(size=n)
    k = np.arange(n)
    shifted = np.roll(u, 3)
    ramp = gl.dft(u) * np.exp(-2j * np.pi * k * 3 / n)
    assert np.max(np.abs(gl.dft(shifted) - ramp)) < 1e-10


def test_dft_rejects_tiny():
    with pytest.raises(ValueError):
        gl.dft([1.0])


# -- measured gains ------------------------------------------------------------------


def test_measured_gain_identity_and_floor():
    u = np.sin(2 * np.pi * np.arange(50) / 50)
    assert gl.measured_gain(u, u, 1) == pytest.approx(1 + 0j, abs=1e-15)
    with pytest.raises(gl.ModeExtinctError):
        gl.measured_gain(u, u, 3)


@pytest.mark.parametrize("cfl, re, im", [(0.2, 0.9996, -0.0126), (0.8, 0.9984, -0.0502)])
def test_ftbs_measured_published_digits(cfl, re, im):
    c = gl.compare_gain(gl.sine_config("ftbs", 101, cfl), 1)
    assert abs(c.measured.real - re) < 5e-4 and abs(c.measured.imag - im) < 5e-4
    assert c.abs_diff < 1e-9


def test_ssprk3_and_rk6_compare():
    for name in ("ssprk3-l2r1", "rk6-l4r2"):
        c = gl.compare_gain(gl.sine_config(name, 101, 0.5), 1)
        assert c.abs_diff < 1e-9
        assert abs(c.theory.imag + 0.0314) < 1e-4


def test_ab_compare():
    c = gl.compare_gain(gl.sine_config("ab2-bs2", 101, 0.4), 1)
    assert abs(c.measured - complex(0.9989, -0.0251)) < 2e-3
    assert c.abs_diff < 1e-7
    assert abs(c.fitted - c.theory) < 1e-7


def test_mode_zero_gain_is_one():
    c = gl.compare_gain(gl.sine_config("ssprk3-l2r1", 101, 0.5), 0)
    assert c.measured == 1 and c.theory == 1


def test_mode_extinct_for_nyquist_sine():
    # a sine at the Nyquist mode samples to zero
    with pytest.raises(gl.ModeExtinctError):
        gl.compare_gain(gl.sine_config("ftbs", 101, 0.5), 50)


@pytest.mark.parametrize("name", ONE_LEVEL)
def test_interlock_random_cases(name):
    spec = CATALOG[name]
    limit = spec.documented_cfl_limit or 1.0
    rng = np.random.default_rng(ONE_LEVEL.index(name))
    for _ in range(10):
        mode = int(rng.integers(1, 50))
        cfl = float(rng.uniform(0.05, limit))
        c = gl.compare_gain(gl.sine_config(spec, 101, cfl), mode)
        assert c.abs_diff < 1e-9


@settings(max_examples=10, deadline=None)
@given(st.sampled_from(["ftbs", "ssprk3-l2r1", "rk4-cd4", "rk6-l4r2"]), st.integers(1, 5))
def test_gain_power_law(name, mode):
    cfg = gl.sine_config(name, 101, 0.3)
    measured, theory = gl.power_law_ratio(cfg, mode, 100)
    assert abs(measured - theory) < 1e-8 * abs(theory)


# -- gain maps ---------------------------------------------------------------------


def test_ftbs_map_cfl1_column():
    gm = gl.gain_map(catalog_lookup("ftbs"), np.linspace(0, math.pi, 200), [0.5, 1.0])
    assert np.max(np.abs(gm.magnitude[:, 1] - 1)) < 1e-12
    assert gm.gains.shape == (200, 2)


def test_ssprk3_stable_to_documented_limit():
    gm = gl.gain_map(catalog_lookup("ssprk3-l2r1"), np.arange(0, math.pi, 1e-2),
                     np.linspace(0, 1.6, 33))
    assert gm.magnitude.max() <= 1 + 1e-9


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_zero_cfl_row(name):
    gm = gl.gain_map(CATALOG[name], np.linspace(0, math.pi, 9), [0.0])
    assert np.all(gm.magnitude == 1)


def test_ab_map_roots():
    gm = gl.gain_map(catalog_lookup("ab2-bs2"), [0.0, 2 * math.pi / 100, 1.0], [0.0, 0.4])
    assert gm.roots.shape == (3, 2, 2)
    assert gm.roots[0, 0, 0] == 1 and gm.roots[0, 0, 1] == 0
    assert abs(gm.gains[1, 1] - complex(0.9997, -0.0252)) < 1e-3
    assert abs(gm.corrector[1, 1] - complex(0.9989, -0.0251)) < 2e-3


def test_map_validation():
    with pytest.raises(ValueError):
        gl.gain_map(catalog_lookup("ftbs"), [], [0.5])
    with pytest.raises(ValueError):
        gl.gain_map(catalog_lookup("ftbs"), [0.1], [-0.5])
    with pytest.raises(ValueError):
        gl.GainMap(np.zeros(2), np.zeros(3), np.zeros((3, 2)))


# -- CSV -----------------------------------------------------------------------------


@pytest.mark.parametrize("name", ["rk6-l4r2", "ab2-bs2"])
def test_gain_map_csv_round_trip(tmp_path, name):
    gm = gl.gain_map(catalog_lookup(name), np.linspace(0, math.pi, 13), np.linspace(0, 2, 7))
    p = gl.write_gain_map_csv(tmp_path / "m.csv", gm)
    back = gl.read_gain_map_csv(p)
    assert np.array_equal(back.kh_grid, gm.kh_grid)
    assert np.array_equal(back.cfl_grid, gm.cfl_grid)
    assert np.array_equal(back.gains, gm.gains)
    if gm.roots is not None:
        assert np.array_equal(back.roots, gm.roots)
        assert np.array_equal(back.physical, gm.physical)
    header = p.read_text().splitlines()[0]
    assert header == ("kh,cfl,re,im,abs,root_index,physical" if gm.roots is not None
                      else "kh,cfl,re,im,abs")


def test_comparison_csv(tmp_path):
    c = gl.compare_gain(gl.sine_config("ftbs", 101, 0.2), 1)
    p = gl.write_comparison_csv(tmp_path / "c.csv", [c])
    lines = p.read_text().splitlines()
    assert lines[0] == "mode,theory_re,theory_im,meas_re,meas_im,abs_diff"
    row = lines[1].split(",")
    assert int(row[0]) == 1 and float(row[1]) == c.theory.real and float(row[5]) == c.abs_diff
