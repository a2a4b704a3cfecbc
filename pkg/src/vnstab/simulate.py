"""Periodic 1D/2D linear advection with any cataloged scheme.

Solves ``u_t + c u_x = 0`` (and ``u_t + c_x u_x + c_y u_y = 0``) on periodic
grids and reports L1/Linf errors against the initial condition re-evaluated at
the shifted, wrapped coordinate.

Two knobs reproduce how the published tables were generated:

``Grid1D.registration``
    ``"node"``   n distinct nodes ``x_min + i h`` with ``h = L/n``;
    ``"cell"``   cell centres ``x_min + (i + 1/2) h``;
    ``"closed"`` every point of ``linspace(x_min, x_max, n)`` is kept as a
    distinct unknown, so the discrete period is ``L + h`` while the exact
    solution still wraps at ``L``.

``step_policy``
    ``"exact"``      full steps then one shrunken step landing on ``end_time``;
    ``"accumulate"`` ``while t < end_time: t += dt`` with a fixed ``dt``.
    The error is always measured against the exact solution at ``end_time``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from . import _io
from .schemes import SchemeSpec, catalog_lookup
from .spectral import AdamsBashforthPC, ShuOsherRK, SpatialStencil

DIVERGENCE_THRESHOLD = 1e10


class DivergenceError(RuntimeError):
    def __init__(self, step: int, t: float, max_abs: float):
        self.step = step
        self.t = t
        self.max_abs = max_abs
        super().__init__(f"solution diverged at step {step} (t={t:.6g}, max|u|={max_abs:.3e})")


# -- grids and fields -------------------------------------------------------


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    x_max: float
    n_points: int
    registration: str = "node"

    def __post_init__(self):
        if self.registration not in ("node", "cell", "closed"):
            raise ValueError(f"unknown registration {self.registration!r}")
        if self.n_points < 8:
            raise ValueError("grid needs at least 8 points")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")

    @classmethod
    def from_points(cls, x_min, x_max, points: int, closed: bool = False) -> "Grid1D":
        """``points`` samples including both ends.

        By default the last point is the periodic image of the first and is
        dropped; with ``closed=True`` it is kept as its own unknown.
        """
        if closed:
            return cls(x_min, x_max, points, "closed")
        return cls(x_min, x_max, points - 1, "node")

    @classmethod
    def from_cells(cls, x_min, x_max, cells: int, centered: bool = False) -> "Grid1D":
        return cls(x_min, x_max, cells, "cell" if centered else "node")

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def h(self) -> float:
        if self.registration == "closed":
            return self.length / (self.n_points - 1)
        return self.length / self.n_points

    @property
    def x(self) -> np.ndarray:
        shift = 0.5 if self.registration == "cell" else 0.0
        return self.x_min + (np.arange(self.n_points) + shift) * self.h

    def wrap(self, x):
        """Map coordinates into ``[x_min, x_max)`` with period ``x_max - x_min``."""
        return self.x_min + np.mod(np.asarray(x) - self.x_min, self.length)


@dataclass(frozen=True)
class Grid2D:
    x: Grid1D
    y: Grid1D


@dataclass
class Field1D:
    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_points,):
            raise ValueError("values do not match the grid")


@dataclass
class Field2D:
    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.x.n_points, self.grid.y.n_points):
            raise ValueError("values do not match the grid")


# -- initial conditions ---------------------------------------------------------


@dataclass(frozen=True)
class Sine:
    """``sin(2 pi k (x - x_min) / L)``; on ``[0, 2 pi]`` this is ``sin(k x)``."""

    wavenumber: int = 1


@dataclass(frozen=True)
class GaussianPulse:
    """``exp(-((x - center) / width)**2)``."""

    width: float = 3.0
    center: float = 0.0


def _default_beta(delta):
    return math.log(2) / (36 * delta**2)


@dataclass(frozen=True)
class CompositeWave:
    """Gaussian, square, triangle and ellipse pulses side by side on ``[-1, 1]``."""

    a: float = 0.5
    z: float = -0.7
    delta: float = 0.005
    alpha: float = 10.0
    beta: float = _default_beta(0.005)

    @classmethod
    def table_variant(cls) -> "CompositeWave":
        # base-10 log in beta; reproduces the published FTBS row
        return cls(beta=math.log10(2) / (36 * 0.005**2))


@dataclass(frozen=True)
class Gaussian2D:
    """``exp(-(x/w)**2) exp(-(y/w)**2)``."""

    width: float = 1.0


InitialCondition = Union[Sine, GaussianPulse, CompositeWave, Gaussian2D]


def _composite(ic: CompositeWave, x: np.ndarray) -> np.ndarray:
    def H(x, z):
        return np.exp(-ic.beta * (x - z) ** 2)

    def L(x, a):
        return np.sqrt(np.maximum(1 - ic.alpha**2 * (x - a) ** 2, 0.0))

    d = ic.delta
    return np.select(
        [(x >= -0.8) & (x <= -0.6),
         (x >= -0.4) & (x <= -0.2),
         (x >= 0.0) & (x <= 0.2),
         (x >= 0.4) & (x <= 0.6)],
        [(H(x, ic.z - d) + H(x, ic.z + d) + 4 * H(x, ic.z)) / 6,
         np.ones_like(x),
         1 - np.abs(10 * (x - 0.1)),
         (L(x, ic.a - d) + L(x, ic.a + d) + 4 * L(x, ic.a)) / 6],
        default=0.0,
    )


def eval_ic(ic: InitialCondition, x, y=None, domain=(0.0, 2 * math.pi)):
    """Evaluate an initial condition pointwise (vectorized over ``x``)."""
    x = np.asarray(x, dtype=float)
    if isinstance(ic, Sine):
        lo, hi = domain
        out = np.sin(2 * math.pi * ic.wavenumber * (x - lo) / (hi - lo))
    elif isinstance(ic, GaussianPulse):
        out = np.exp(-(((x - ic.center) / ic.width) ** 2))
    elif isinstance(ic, CompositeWave):
        out = _composite(ic, x)
    elif isinstance(ic, Gaussian2D):
        if y is None:
            raise ValueError("Gaussian2D needs y")
        y = np.asarray(y, dtype=float)
        out = np.exp(-((x / ic.width) ** 2)) * np.exp(-((y / ic.width) ** 2))
    else:
        raise TypeError(f"unknown initial condition {ic!r}")
    return float(out) if out.ndim == 0 else out


# -- spatial operator ---------------------------------------------------------------


def derivative(values: np.ndarray, stencil: SpatialStencil, h: float, axis: int = 0) -> np.ndarray:
    """Periodic ``(1/(h divisor)) sum_j num_j u[(i + j) mod n]`` along ``axis``."""
    n = values.shape[axis]
    if stencil.width > n:
        raise ValueError(f"stencil of width {stencil.width} does not fit a grid of {n} points")
    out = np.zeros_like(values, dtype=float)
    for j, c in zip(stencil.offsets, stencil.coefficients):
        if c:
            out += c * np.roll(values, -j, axis=axis)
    return out / h


def apply_derivative(field: Field1D, stencil: SpatialStencil) -> Field1D:
    return Field1D(field.grid, derivative(field.values, stencil, field.grid.h))


# -- configs and results ---------------------------------------------------------------


@dataclass(frozen=True)
class SimConfig:
    scheme: SchemeSpec
    grid: Grid1D
    ic: InitialCondition
    cfl: float
    end_time: float
    c: float = 1.0
    step_policy: str = "exact"

    def __post_init__(self):
        if not self.cfl > 0:
            raise ValueError("cfl must be positive")
        if self.end_time < 0:
            raise ValueError("end_time must be non-negative")
        if self.step_policy not in ("exact", "accumulate"):
            raise ValueError(f"unknown step policy {self.step_policy!r}")

    @property
    def dt(self) -> float:
        return self.cfl * self.grid.h / abs(self.c) if self.c else math.inf


@dataclass(frozen=True)
class SimConfig2D:
    scheme: SchemeSpec
    grid: Grid2D
    ic: InitialCondition
    cfl: float
    end_time: float
    c: tuple[float, float] = (1.0, 0.0)
    step_policy: str = "exact"

    def __post_init__(self):
        if not self.cfl > 0:
            raise ValueError("cfl must be positive")
        if self.end_time < 0:
            raise ValueError("end_time must be non-negative")
        if self.step_policy not in ("exact", "accumulate"):
            raise ValueError(f"unknown step policy {self.step_policy!r}")

    @property
    def dt(self) -> float:
        # cfl = (|cx|/hx + |cy|/hy) dt, i.e. (|cx|+|cy|) dt/h on square cells
        rate = abs(self.c[0]) / self.grid.x.h + abs(self.c[1]) / self.grid.y.h
        return self.cfl / rate if rate else math.inf


@dataclass(frozen=True)
class ErrorReport:
    l1: float
    linf: float


@dataclass
class SimResult:
    field: Union[Field1D, Field2D]
    errors: ErrorReport
    exact: np.ndarray
    n_steps: int
    t_final: float
    dt: float


def error_norms(numerical, exact, cell_volume: float | None = None) -> ErrorReport:
    """``l1 = sum |diff|`` (no grid weighting) and ``linf = max |diff|``.

    Pass ``cell_volume`` (``h`` in 1D, ``hx*hy`` in 2D) to get the
    grid-weighted ``h * sum |diff|`` instead.
    """
    a = np.asarray(getattr(numerical, "values", numerical), dtype=float)
    b = np.asarray(getattr(exact, "values", exact), dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    diff = np.abs(a - b)
    l1 = float(diff.sum())
    if cell_volume is not None:
        l1 *= cell_volume
    return ErrorReport(l1, float(diff.max()) if diff.size else 0.0)


# -- time marching -------------------------------------------------------------------


StepHook = Callable[[int, float, float, np.ndarray], None]


def step_schedule(dt: float, end_time: float, policy: str) -> list[float]:
    """Step sizes that take the solution from 0 to ``end_time``."""
    if end_time == 0 or math.isinf(dt):
        return []
    if policy == "accumulate":
        sizes, t = [], 0.0
        while t < end_time:
            sizes.append(dt)
            t += dt
        return sizes
    ratio = end_time / dt
    n_full = round(ratio) if abs(ratio - round(ratio)) < 1e-9 * max(ratio, 1) else math.floor(ratio)
    sizes = [dt] * n_full
    rest = end_time - n_full * dt
    if rest > 1e-12 * end_time:
        sizes.append(rest)
    return sizes


def _rk_step(u, scheme: ShuOsherRK, rhs, dt):
    levels = [u]
    slopes = {}
    for row in scheme.stages:
        acc = None
        for level, alpha, beta in row:
            term = None
            if alpha:
                term = alpha * levels[level]
            if beta:
                if level not in slopes:
                    slopes[level] = rhs(levels[level])
                s = (dt * beta) * slopes[level]
                term = s if term is None else term + s
            if term is not None:
                acc = term if acc is None else acc + term
        levels.append(acc)
    return levels[-1]


def _heun_step(u, rhs, dt):
    u1 = u + dt * rhs(u)
    return 0.5 * u + 0.5 * (u1 + dt * rhs(u1))


def march(u0: np.ndarray, scheme: SchemeSpec, rhs, steps: list[float],
          on_step: StepHook | None = None) -> np.ndarray:
    """Advance ``u0`` through the given step sizes.

    Multi-level schemes start with one Heun step and also use Heun for a
    step whose size differs from the nominal one.
    """
    u = np.array(u0, dtype=float)
    t = 0.0
    ab = scheme.time if isinstance(scheme.time, AdamsBashforthPC) else None
    nominal = steps[0] if steps else 0.0
    u_old = f_old = None
    for k, dt in enumerate(steps, start=1):
        if ab is None:
            u_new = _rk_step(u, scheme.time, rhs, dt)
        elif u_old is None or dt != nominal:
            u_new = _heun_step(u, rhs, dt)
            f_old = None
        else:
            f = rhs(u)
            if f_old is None:
                f_old = rhs(u_old)
            pred = u + dt * (ab.predictor_new * f + ab.predictor_old * f_old)
            u_new = u + dt * (ab.corrector_new * rhs(pred) + ab.corrector_old * f)
            f_old = f
        u_old, u = u, u_new
        t += dt
        peak = float(np.max(np.abs(u))) if u.size else 0.0
        if not math.isfinite(peak) or peak > DIVERGENCE_THRESHOLD:
            raise DivergenceError(k, t, peak)
        if on_step is not None:
            on_step(k, t, dt, u)
    return u


def run_1d(config: SimConfig, on_step: StepHook | None = None,
           normalized_l1: bool = False) -> SimResult:
    """March a 1D configuration and measure the error at ``end_time``.

    ``on_step(step, t, dt, values)`` sees the field after every step.
    """
    g = config.grid
    x = g.x
    domain = (g.x_min, g.x_max)
    u0 = eval_ic(config.ic, x, domain=domain)
    dt = config.dt
    steps = step_schedule(dt, config.end_time, config.step_policy)
    if isinstance(config.scheme.time, AdamsBashforthPC) and len(steps) < 2:
        raise ValueError("the multi-level scheme needs at least 2 steps")
    stencil, h, c = config.scheme.stencil, g.h, config.c

    def rhs(v):
        return -c * derivative(v, stencil, h)

    u = march(u0, config.scheme, rhs, steps, on_step)
    exact = eval_ic(config.ic, g.wrap(x - c * config.end_time), domain=domain)
    errs = error_norms(u, exact, h if normalized_l1 else None)
    return SimResult(Field1D(g, u), errs, exact, len(steps), float(sum(steps)), dt)


def run_2d(config: SimConfig2D, normalized_l1: bool = False) -> SimResult:
    gx, gy = config.grid.x, config.grid.y
    X, Y = np.meshgrid(gx.x, gy.x, indexing="ij")
    u0 = eval_ic(config.ic, X, Y)
    cx, cy = config.c
    dt = config.dt
    steps = step_schedule(dt, config.end_time, config.step_policy)
    if isinstance(config.scheme.time, AdamsBashforthPC) and len(steps) < 2 and steps:
        raise ValueError("the multi-level scheme needs at least 2 steps")
    stencil = config.scheme.stencil

    def rhs(v):
        out = np.zeros_like(v)
        if cx:
            out -= cx * derivative(v, stencil, gx.h, axis=0)
        if cy:
            out -= cy * derivative(v, stencil, gy.h, axis=1)
        return out

    u = march(u0, config.scheme, rhs, steps)
    T = config.end_time
    exact = eval_ic(config.ic, gx.wrap(X - cx * T), gy.wrap(Y - cy * T))
    errs = error_norms(u, exact, gx.h * gy.h if normalized_l1 else None)
    return SimResult(Field2D(config.grid, u), errs, exact, len(steps), float(sum(steps)),
                     dt)


# -- named test cases -------------------------------------------------------------

CASES = ("sine", "gauss-pulse", "composite", "gauss-2d")

# per-case defaults: (cfl, end_time)
CASE_DEFAULTS = {
    "sine": (0.2, 2 * math.pi),
    "gauss-pulse": (0.1, 300.0),
    "composite": (0.25, 8.0),
    "gauss-2d": (0.1, 20.0),
}


def named_case(case: str, scheme, cfl: float | None = None, end_time: float | None = None,
               points: int | None = None, cells: int | None = None,
               protocol: str = "published"):
    """Build the configuration of one of the published test cases.

    ``protocol="published"`` reproduces the grid registration, composite-wave
    constant and step counting that the published tables correspond to;
    ``protocol="clean"`` uses the textbook choices (open periodic grids,
    natural-log constant, exact landing on ``end_time``).
    """
    if protocol not in ("published", "clean"):
        raise ValueError(f"unknown protocol {protocol!r}")
    if case not in CASES:
        raise ValueError(f"unknown case {case!r}; choose from {', '.join(CASES)}")
    if isinstance(scheme, str):
        scheme = catalog_lookup(scheme)
    d_cfl, d_t = CASE_DEFAULTS[case]
    cfl = d_cfl if cfl is None else cfl
    end_time = d_t if end_time is None else end_time
    published = protocol == "published"

    if case == "sine":
        n = points or 101
        grid = Grid1D.from_points(0.0, 2 * math.pi, n, closed=published)
        return SimConfig(scheme, grid, Sine(1), cfl, end_time)
    if case == "gauss-pulse":
        if points is not None:
            grid = Grid1D.from_points(-15.0, 15.0, points)
        else:
            grid = Grid1D.from_cells(-15.0, 15.0, cells or 200, centered=not published)
        return SimConfig(scheme, grid, GaussianPulse(3.0), cfl, end_time)
    if case == "composite":
        if cells is not None:
            grid = Grid1D.from_cells(-1.0, 1.0, cells)
        else:
            grid = Grid1D.from_points(-1.0, 1.0, points or 1001)
        ic = CompositeWave.table_variant() if published else CompositeWave()
        return SimConfig(scheme, grid, ic, cfl, end_time,
                         step_policy="accumulate" if published else "exact")
    # gauss-2d
    if points is not None:
        gx = Grid1D.from_points(-10.0, 10.0, points, closed=published)
        gy = Grid1D.from_points(-10.0, 10.0, points)
    else:
        n = cells or 100
        gx = Grid1D.from_points(-10.0, 10.0, n + 1, closed=True) if published \
            else Grid1D.from_cells(-10.0, 10.0, n)
        gy = Grid1D.from_cells(-10.0, 10.0, n)
    return SimConfig2D(scheme, Grid2D(gx, gy), Gaussian2D(1.0), cfl, end_time,
                       step_policy="accumulate" if published else "exact")


# -- CSV output ---------------------------------------------------------------


def write_field_csv(path, field_: Union[Field1D, Field2D]):
    if isinstance(field_, Field1D):
        rows = ((float(x), float(u)) for x, u in zip(field_.grid.x, field_.values))
        return _io.write_csv(path, ["x", "u"], rows)
    xs, ys = field_.grid.x.x, field_.grid.y.x
    rows = ((float(xs[i]), float(ys[j]), float(field_.values[i, j]))
            for i in range(len(xs)) for j in range(len(ys)))
    return _io.write_csv(path, ["x", "y", "u"], rows)
