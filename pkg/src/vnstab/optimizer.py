"""Evolutionary search for low-dissipation iterated RK / stencil pairs.

A design is a vector of stage fractions plus the free coordinates of a
stencil.  The stencil is decoded by solving its moment equations exactly, so
every candidate has the requested order by construction and the search runs
only over the null space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import _io
from .schemes import SchemeSpec, dumps
from .spectral import ShuOsherRK, SpatialStencil, WaveSample, _as_fraction, staged_gain


class SingularMomentSystem(ValueError):
    pass


@dataclass(frozen=True)
class DesignVector:
    stage_fractions: tuple[float, ...]
    free_stencil_params: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "stage_fractions", tuple(float(f) for f in self.stage_fractions))
        object.__setattr__(self, "free_stencil_params",
                           tuple(float(p) for p in self.free_stencil_params))
        if not self.stage_fractions:
            raise ValueError("at least one stage is required")
        if any(not f > 0 for f in self.stage_fractions):
            raise ValueError("stage fractions must be positive")
        if self.stage_fractions[-1] != 1.0:
            raise ValueError("the last stage fraction is fixed to 1")

    def as_array(self) -> np.ndarray:
        return np.array(self.stage_fractions[:-1] + self.free_stencil_params)

    @classmethod
    def from_array(cls, arr, n_stages: int) -> "DesignVector":
        arr = [float(a) for a in arr]
        k = n_stages - 1
        return cls(tuple(arr[:k]) + (1.0,), tuple(arr[k:]))


@dataclass(frozen=True)
class ObjectiveConfig:
    kh_samples: tuple[float, ...]
    cfl_targets: tuple[float, ...] = (0.5,)
    stability_penalty_weight: float = 1e6
    overshoot_tolerance: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "kh_samples", tuple(float(k) for k in self.kh_samples))
        object.__setattr__(self, "cfl_targets", tuple(float(c) for c in self.cfl_targets))
        if not self.kh_samples or not self.cfl_targets:
            raise ValueError("sample sets must be non-empty")
        if any(not 0 < k <= math.pi for k in self.kh_samples):
            raise ValueError("kh samples must lie in (0, pi]")
        if any(c < 0 for c in self.cfl_targets):
            raise ValueError("cfl targets must be non-negative")
        if self.stability_penalty_weight < 0:
            raise ValueError("penalty weight must be non-negative")

    @classmethod
    def uniform(cls, kh_max: float = 2.0, n: int = 64, **kw) -> "ObjectiveConfig":
        return cls(tuple(np.linspace(kh_max / n, kh_max, n)), **kw)


@dataclass(frozen=True)
class EAConfig:
    population: int = 32
    generations: int = 200
    mutation_scale: float = 0.05
    crossover_rate: float = 0.9
    rng_seed: int = 0
    blend_alpha: float = 0.5

    def __post_init__(self):
        if self.population < 4:
            raise ValueError("population must be at least 4")
        if self.generations < 1:
            raise ValueError("generations must be at least 1")
        if not 0 <= self.crossover_rate <= 1:
            raise ValueError("crossover rate must lie in [0, 1]")
        if self.mutation_scale < 0:
            raise ValueError("mutation scale must be non-negative")


# -- decoding --------------------------------------------------------------


def _solve_exact(a: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    n = len(b)
    m = [row[:] + [rhs] for row, rhs in zip(a, b)]
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            raise SingularMomentSystem("moment system is singular for these offsets")
        m[col], m[piv] = m[piv], m[col]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col] / m[col][col]
                m[r] = [x - f * y for x, y in zip(m[r], m[col])]
    return [m[i][n] / m[i][i] for i in range(n)]


def stencil_for(offsets: Sequence[int], enforced_order: int,
                free_params: Sequence = ()) -> SpatialStencil:
    """Stencil whose moments ``0..enforced_order`` match a first derivative.

    The first ``enforced_order + 1`` offsets carry the solved coefficients and
    ``free_params`` fill the rest in order.
    """
    offsets = [int(o) for o in offsets]
    n_fixed = enforced_order + 1
    if enforced_order < 1 or len(offsets) < n_fixed:
        raise ValueError(f"{len(offsets)} offsets cannot carry order {enforced_order}")
    if len(free_params) != len(offsets) - n_fixed:
        raise ValueError(f"expected {len(offsets) - n_fixed} free parameters, got {len(free_params)}")
    free = [_as_fraction(p) for p in free_params]
    fixed, rest = offsets[:n_fixed], offsets[n_fixed:]
    a = [[Fraction(j) ** m for j in fixed] for m in range(n_fixed)]
    b = [Fraction(int(m == 1)) - sum((Fraction(j) ** m * p for j, p in zip(rest, free)), Fraction(0))
         for m in range(n_fixed)]
    coeffs = dict(zip(fixed, _solve_exact(a, b)))
    coeffs.update(zip(rest, free))
    ordered = sorted(offsets)
    return SpatialStencil.from_coefficients(ordered, [coeffs[o] for o in ordered])


def decode(vec: DesignVector, offsets: Sequence[int],
           enforced_order: int) -> tuple[ShuOsherRK, SpatialStencil]:
    return (ShuOsherRK.iterated(list(vec.stage_fractions)),
            stencil_for(offsets, enforced_order, vec.free_stencil_params))


# -- objective -------------------------------------------------------------


def _magnitudes(candidate, cfg: ObjectiveConfig) -> np.ndarray:
    time, stencil = candidate
    kh, cfl = np.meshgrid(cfg.kh_samples, cfg.cfl_targets, indexing="ij")
    with np.errstate(all="ignore"):
        return np.abs(staged_gain(time, stencil, WaveSample(kh, cfl)))


def dissipation_objective(candidate, cfg: ObjectiveConfig) -> float:
    """Squared departure of ``|G|`` from 1 plus a one-sided overshoot penalty."""
    mag = _magnitudes(candidate, cfg)
    if not np.all(np.isfinite(mag)):
        return math.inf
    over = np.maximum(0.0, mag - 1.0 - cfg.overshoot_tolerance)
    j = float(np.sum((mag - 1.0) ** 2) + cfg.stability_penalty_weight * np.sum(over**2))
    return j if math.isfinite(j) else math.inf


def max_gain(candidate, cfg: ObjectiveConfig) -> float:
    return float(np.max(_magnitudes(candidate, cfg)))


# -- evolutionary loop ---------------------------------------------------------


@dataclass
class EvolutionResult:
    best: DesignVector
    best_objective: float
    trace: list[float] = field(default_factory=list)
    offsets: tuple[int, ...] = ()
    enforced_order: int = 1

    def scheme(self, name: str = "optimized") -> SchemeSpec:
        time, stencil = decode(self.best, self.offsets, self.enforced_order)
        return SchemeSpec(name, time, stencil, temporal_order(self.best.stage_fractions),
                          self.enforced_order)


def temporal_order(fractions: Sequence[float], tol: float = 1e-12) -> int:
    """Order of accuracy of the iterated scheme on linear problems.

    The gain polynomial coefficient of ``z**k`` is the product of the last
    ``k`` fractions; the order is how many of them match ``1/k!``.
    """
    coeff, order = 1.0, 0
    for k, f in enumerate(reversed(fractions), start=1):
        coeff *= f
        if abs(coeff - 1 / math.factorial(k)) > tol * max(1.0, 1 / math.factorial(k)):
            break
        order = k
    return max(order, 1)


def evolve(offsets: Sequence[int], stages: int, enforced_order: int, obj: ObjectiveConfig,
           ea: EAConfig, seed_designs: Sequence[DesignVector] = ()) -> EvolutionResult:
    """(mu + lambda) real-coded search with elitism.

    Parents are picked by size-2 tournaments, recombined by BLX-alpha blending
    with probability ``crossover_rate`` and perturbed by Gaussian noise.  The
    next generation is the best ``population`` of parents and children.  Stage
    fractions are reflected back into ``(0, 1]``.  All randomness comes from
    one generator seeded with ``ea.rng_seed``.
    """
    offsets = tuple(int(o) for o in offsets)
    if stages < 1:
        raise ValueError("stages must be at least 1")
    n_free = len(offsets) - (enforced_order + 1)
    if enforced_order < 1 or n_free < 0:
        raise ValueError(f"{len(offsets)} offsets cannot carry order {enforced_order}")
    n_frac = stages - 1
    dim = n_frac + n_free
    rng = np.random.default_rng(ea.rng_seed)

    def clip(x):
        x = np.array(x, dtype=float)
        f = np.abs(x[:n_frac])
        f = np.where(f > 1.0, 2.0 - f, f)
        x[:n_frac] = np.clip(f, 1e-6, 1.0)
        return x

    def score(x):
        try:
            return dissipation_objective(decode(DesignVector.from_array(x, stages), offsets,
                                                enforced_order), obj)
        except (ValueError, ZeroDivisionError, OverflowError):
            return math.inf

    pop = [clip(np.concatenate([rng.uniform(0.05, 1.0, n_frac), rng.normal(0.0, 0.1, n_free)]))
           for _ in range(ea.population)]
    for i, d in enumerate(list(seed_designs)[: ea.population]):
        if len(d.stage_fractions) != stages or len(d.free_stencil_params) != n_free:
            raise ValueError("seed design does not match the search dimensions")
        pop[i] = d.as_array()
    fit = [score(x) for x in pop]

    def order_key(i):
        return (fit[i], i)

    def tournament():
        a, b = rng.integers(0, len(pop), 2)
        return pop[a] if order_key(a) <= order_key(b) else pop[b]

    best_i = min(range(len(pop)), key=order_key)
    trace = [fit[best_i]]
    for _ in range(ea.generations):
        children = []
        while len(children) < ea.population:
            p1, p2 = tournament(), tournament()
            if dim and rng.random() < ea.crossover_rate:
                lo, hi = np.minimum(p1, p2), np.maximum(p1, p2)
                span = hi - lo
                u = rng.uniform(lo - ea.blend_alpha * span, hi + ea.blend_alpha * span)
            else:
                u = p1.copy()
            u = u + rng.normal(0.0, ea.mutation_scale, dim)
            children.append(clip(u))
        cfit = [score(x) for x in children]
        merged = pop + children
        mfit = fit + cfit
        keep = sorted(range(len(merged)), key=lambda i: (mfit[i], i))[: ea.population]
        pop = [merged[i] for i in keep]
        fit = [mfit[i] for i in keep]
        trace.append(fit[0])
    best = DesignVector.from_array(pop[0], stages)
    return EvolutionResult(best, fit[0], trace, offsets, enforced_order)


def write_trace_csv(path, trace: Sequence[float]):
    return _io.write_csv(path, ["generation", "best_objective"],
                         ([g, float(v)] for g, v in enumerate(trace)))


def write_best_scheme(path, result: EvolutionResult, name: str = "optimized"):
    return _io.atomic_write_text(path, dumps(result.scheme(name)))
