"""Measured versus theoretical gains.

The measured gain of Fourier mode ``k`` is the ratio of its DFT amplitude after
one step to the amplitude before.  For a linear, translation-invariant scheme
on a periodic grid that ratio is exactly the theoretical amplification factor,
so the two routes must agree to rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _io
from .schemes import SchemeSpec, catalog_lookup
from .simulate import Grid1D, SimConfig, Sine, derivative, march
from .spectral import (AnalysisError, GainSet, WaveSample, multilevel_gain, staged_gain)

AMPLITUDE_FLOOR = 1e-12
WARMUP_STEPS = 5
FIT_STEPS = 20


class ModeExtinctError(ArithmeticError):
    def __init__(self, mode, amplitude):
        self.mode = mode
        self.amplitude = amplitude
        super().__init__(f"mode {mode} amplitude {amplitude:.3e} is below {AMPLITUDE_FLOOR:g}")


# -- transforms ------------------------------------------------------------


def _values(field):
    return np.asarray(getattr(field, "values", field), dtype=float)


def dft(field) -> np.ndarray:
    """Direct ``U_k = sum_j u_j exp(-2 pi i j k / n)`` for any ``n >= 2``."""
    u = _values(field)
    n = u.size
    if n < 2:
        raise ValueError("DFT needs at least 2 samples")
    j = np.arange(n)
    # reduce j*k mod n before scaling to keep the phase argument small
    w = np.exp(-2j * np.pi * (np.outer(j, j) % n) / n)
    return w @ u.astype(complex)


def idft(spectrum) -> np.ndarray:
    s = np.asarray(spectrum, dtype=complex)
    n = s.size
    j = np.arange(n)
    w = np.exp(2j * np.pi * (np.outer(j, j) % n) / n)
    return (w @ s) / n


def mode_amplitude(field, mode: int) -> complex:
    u = _values(field)
    n = u.size
    j = np.arange(n)
    return complex(np.exp(-2j * np.pi * ((j * mode) % n) / n) @ u)


def measured_gain(prev, next_, mode: int) -> complex:
    """``U_next(mode) / U_prev(mode)``."""
    a = mode_amplitude(prev, mode)
    if abs(a) < AMPLITUDE_FLOOR:
        raise ModeExtinctError(mode, abs(a))
    return mode_amplitude(next_, mode) / a


# -- theory vs measurement --------------------------------------------------------


@dataclass(frozen=True)
class GainComparison:
    mode: int
    theory: complex
    measured: complex
    fitted: complex | None = None

    @property
    def abs_diff(self) -> float:
        return abs(self.theory - self.measured)


def sine_config(scheme, points: int = 101, cfl: float = 0.2, length: float = 2 * math.pi,
                closed: bool = False) -> SimConfig:
    """Periodic sine study on ``[0, length]``.

    With ``closed=False`` the last of ``points`` samples is the wrapped copy of
    the first, leaving ``points - 1`` distinct nodes.
    """
    if isinstance(scheme, str):
        scheme = catalog_lookup(scheme)
    grid = Grid1D.from_points(0.0, length, points, closed=closed)
    return SimConfig(scheme, grid, Sine(1), cfl, 0.0)


def theory_gain(scheme: SchemeSpec, kh: float, cfl: float) -> complex:
    """Single-step gain; the physical corrector gain for multi-level schemes."""
    sample = WaveSample(kh, cfl)
    if scheme.is_multilevel:
        return multilevel_gain(scheme.time, scheme.stencil, sample)[1]
    return complex(staged_gain(scheme.time, scheme.stencil, sample))


def _sine_history(config: SimConfig, mode: int, n_steps: int):
    g = config.grid
    x = g.x
    u0 = np.sin(2 * math.pi * mode * (x - g.x_min) / (g.n_points * g.h))
    if mode == 0:
        u0 = np.ones_like(x)
    snaps = [u0]
    stencil, h, c = config.scheme.stencil, g.h, config.c

    def rhs(v):
        return -c * derivative(v, stencil, h)

    march(u0, config.scheme, rhs, [config.dt] * n_steps,
          lambda k, t, dt, u: snaps.append(np.array(u)))
    return snaps


def compare_gain(config: SimConfig, mode: int = 1, steps: int | None = None) -> GainComparison:
    """Theory against the DFT-measured gain of a pure sine mode.

    The sine is built on the grid's own discrete period so that it is an exact
    eigenvector of the periodic operator.  One-level schemes are measured over
    a single full step.  Multi-level schemes skip the start-up transient and
    compare the step ratio after ``WARMUP_STEPS`` steps; a least-squares
    single-root fit over ``FIT_STEPS`` steps is reported alongside.
    """
    scheme = config.scheme
    n = config.grid.n_points
    kh = 2 * math.pi * mode / n
    theory = theory_gain(scheme, kh, config.cfl) if mode % n else 1.0 + 0j
    if scheme.is_multilevel:
        total = steps or (WARMUP_STEPS + FIT_STEPS)
        snaps = _sine_history(config, mode, total)
        amps = np.array([mode_amplitude(s, mode) for s in snaps])
        if np.min(np.abs(amps)) < AMPLITUDE_FLOOR:
            raise ModeExtinctError(mode, float(np.min(np.abs(amps))))
        k = min(WARMUP_STEPS, total - 1)
        measured = amps[k + 1] / amps[k]
        a, b = amps[k:-1], amps[k + 1:]
        fitted = complex(np.vdot(a, b) / np.vdot(a, a))
        return GainComparison(mode, complex(theory), complex(measured), fitted)
    snaps = _sine_history(config, mode, steps or 1)
    return GainComparison(mode, complex(theory), measured_gain(snaps[-2], snaps[-1], mode))


def power_law_ratio(config: SimConfig, mode: int, n_steps: int) -> tuple[complex, complex]:
    """Measured amplitude ratio after ``n_steps`` and the theory gain raised to that power."""
    snaps = _sine_history(config, mode, n_steps)
    n = config.grid.n_points
    g = theory_gain(config.scheme, 2 * math.pi * mode / n, config.cfl)
    return mode_amplitude(snaps[-1], mode) / mode_amplitude(snaps[0], mode), g**n_steps


# -- gain maps ------------------------------------------------------------------


@dataclass
class GainMap:
    """Theory gains on a ``kh x cfl`` grid.

    ``gains[i, j]`` belongs to ``kh_grid[i]`` and ``cfl_grid[j]``.  For
    multi-level schemes ``roots[i, j, r]`` holds every characteristic root,
    ``physical[i, j]`` the index of the physical one, ``gains`` that root and
    ``corrector`` the full predictor-corrector step gain built from it.
    """

    kh_grid: np.ndarray
    cfl_grid: np.ndarray
    gains: np.ndarray
    roots: np.ndarray | None = None
    physical: np.ndarray | None = None
    corrector: np.ndarray | None = None

    def __post_init__(self):
        shape = (len(self.kh_grid), len(self.cfl_grid))
        if self.gains.shape != shape:
            raise ValueError("gain matrix does not match the grids")

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.gains)


def gain_map(scheme: SchemeSpec, kh_grid, cfl_grid) -> GainMap:
    kh = np.asarray(kh_grid, dtype=float)
    cfl = np.asarray(cfl_grid, dtype=float)
    if kh.size == 0 or cfl.size == 0:
        raise ValueError("grids must be non-empty")
    if np.any(cfl < 0):
        raise ValueError("cfl values must be non-negative")
    K, C = np.meshgrid(kh, cfl, indexing="ij")
    if not scheme.is_multilevel:
        g = staged_gain(scheme.time, scheme.stencil, WaveSample(K, C))
        return GainMap(kh, cfl, np.asarray(g, dtype=complex))
    roots = np.zeros(K.shape + (2,), dtype=complex)
    phys = np.zeros(K.shape, dtype=int)
    corr = np.zeros(K.shape, dtype=complex)
    for i in range(K.shape[0]):
        for j in range(K.shape[1]):
            try:
                gs, g = multilevel_gain(scheme.time, scheme.stencil, WaveSample(K[i, j], C[i, j]))
            except AnalysisError:
                # zero symbol: the quadratic collapses to g (g - 1) = 0
                gs, g = GainSet((1.0 + 0j, 0j), 0), 1.0 + 0j
            roots[i, j] = gs.roots
            phys[i, j] = gs.physical_index
            corr[i, j] = g
    gains = np.take_along_axis(roots, phys[..., None], axis=2)[..., 0]
    return GainMap(kh, cfl, gains, roots, phys, corr)


GAIN_MAP_HEADER = ["kh", "cfl", "re", "im", "abs"]
COMPARISON_HEADER = ["mode", "theory_re", "theory_im", "meas_re", "meas_im", "abs_diff"]


def gain_map_rows(gm: GainMap):
    for i, k in enumerate(gm.kh_grid):
        for j, c in enumerate(gm.cfl_grid):
            if gm.roots is None:
                g = complex(gm.gains[i, j])
                yield [float(k), float(c), g.real, g.imag, abs(g)]
            else:
                for r, g in enumerate(gm.roots[i, j]):
                    g = complex(g)
                    yield [float(k), float(c), g.real, g.imag, abs(g), r,
                           int(r == gm.physical[i, j])]


def write_gain_map_csv(path, gm: GainMap):
    header = GAIN_MAP_HEADER + (["root_index", "physical"] if gm.roots is not None else [])
    return _io.write_csv(path, header, gain_map_rows(gm))


def read_gain_map_csv(path) -> GainMap:
    header, rows = _io.read_csv(path)
    multi = "root_index" in header
    kh = sorted({float(r[0]) for r in rows})
    cfl = sorted({float(r[1]) for r in rows})
    ki = {v: i for i, v in enumerate(kh)}
    ci = {v: i for i, v in enumerate(cfl)}
    gains = np.zeros((len(kh), len(cfl)), dtype=complex)
    roots = np.zeros((len(kh), len(cfl), 2), dtype=complex) if multi else None
    phys = np.zeros((len(kh), len(cfl)), dtype=int) if multi else None
    for r in rows:
        i, j = ki[float(r[0])], ci[float(r[1])]
        g = complex(float(r[2]), float(r[3]))
        if multi:
            roots[i, j, int(r[5])] = g
            if int(r[6]):
                phys[i, j] = int(r[5])
        else:
            gains[i, j] = g
    if multi:
        gains = np.take_along_axis(roots, phys[..., None], axis=2)[..., 0]
    return GainMap(np.array(kh), np.array(cfl), gains, roots, phys)


def write_comparison_csv(path, comparisons):
    rows = ([c.mode, c.theory.real, c.theory.imag, c.measured.real, c.measured.imag,
             c.abs_diff] for c in comparisons)
    return _io.write_csv(path, COMPARISON_HEADER, rows)
