"""Amplification factors, modified wavenumbers and phase diagnostics.

Everything here is a pure function of a stencil, a time scheme and a wave
sample ``(kh, cfl)``.  Gains are plain Python/numpy complex numbers; the
functions broadcast over numpy arrays of ``kh`` and ``cfl`` so the same code
serves point evaluations and whole gain maps.

Sign conventions
----------------
The advection operator is ``du/dt = -c du/dx``.  A stencil's Fourier symbol
``A(kh) = sum_j c_j exp(i j kh)`` stands in for ``h d/dx``, so one explicit
Euler step multiplies a mode by ``1 - cfl*A(kh)``.  The phase shift is taken
as ``beta = -atan2(Im G, Re G)`` so that the exact gain ``exp(-i kh cfl)``
has a phase speed of exactly +1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np


class AnalysisError(ValueError):
    """Raised when a gain or phase quantity is undefined for the input."""


# -- domain types ---------------------------------------------------------


@dataclass(frozen=True)
class WaveSample:
    """A nondimensional wavenumber ``kh`` and Courant number ``cfl``."""

    kh: float
    cfl: float

    def __post_init__(self):
        if np.any(np.asarray(self.cfl) < 0):
            raise ValueError(f"cfl must be non-negative, got {self.cfl!r}")


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        # exact binary value of the float, not its decimal repr
        return Fraction(value)
    return Fraction(value)


@dataclass(frozen=True)
class SpatialStencil:
    """First-derivative stencil ``h u'_i ~ (1/divisor) sum_j num_j u_{i+j}``.

    Numerators and divisor are held as :class:`fractions.Fraction` so that the
    moment conditions can be checked exactly.  Floats are converted through
    their exact binary value.
    """

    offsets: tuple[int, ...]
    numerators: tuple[Fraction, ...]
    divisor: Fraction = Fraction(1)

    def __init__(self, offsets, numerators, divisor=1):
        offsets = tuple(int(o) for o in offsets)
        numerators = tuple(_as_fraction(c) for c in numerators)
        divisor = _as_fraction(divisor)
        if len(offsets) != len(numerators):
            raise ValueError("offsets and numerators differ in length")
        if not offsets:
            raise ValueError("empty stencil")
        if any(b <= a for a, b in zip(offsets, offsets[1:])):
            raise ValueError(f"offsets must be strictly increasing: {offsets}")
        if divisor <= 0:
            raise ValueError("divisor must be positive")
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "numerators", numerators)
        object.__setattr__(self, "divisor", divisor)

    @classmethod
    def from_coefficients(cls, offsets, coefficients) -> "SpatialStencil":
        """Build from normalized coefficients, choosing an integer divisor."""
        coeffs = [_as_fraction(c) for c in coefficients]
        divisor = 1
        for c in coeffs:
            divisor = divisor * c.denominator // math.gcd(divisor, c.denominator)
        return cls(offsets, [c * divisor for c in coeffs], divisor)

    @property
    def coefficients(self) -> np.ndarray:
        """Normalized float coefficients ``num_j / divisor``."""
        return np.array([float(c / self.divisor) for c in self.numerators])

    @property
    def exact_coefficients(self) -> tuple[Fraction, ...]:
        return tuple(c / self.divisor for c in self.numerators)

    @property
    def width(self) -> int:
        return self.offsets[-1] - self.offsets[0] + 1

    def moment(self, m: int) -> Fraction:
        """Exact ``sum_j num_j * j**m``."""
        return sum((c * Fraction(j) ** m for j, c in zip(self.offsets, self.numerators)),
                   Fraction(0))

    def is_consistent(self) -> bool:
        return self.moment(0) == 0 and self.moment(1) == self.divisor

    def __eq__(self, other):
        if not isinstance(other, SpatialStencil):
            return NotImplemented
        return (self.offsets == other.offsets
                and self.exact_coefficients == other.exact_coefficients)

    def __hash__(self):
        return hash((self.offsets, self.exact_coefficients))


@dataclass(frozen=True)
class ShuOsherRK:
    """Explicit Runge-Kutta scheme in Shu-Osher form.

    ``stages[i]`` lists ``(level, alpha, beta)`` triples; stage ``i+1`` is

        u^(i+1) = sum alpha * u^(level) + dt * beta * F(u^(level))

    with level 0 the solution at the start of the step.  The last stage is the
    new time level.
    """

    stages: tuple[tuple[tuple[int, float, float], ...], ...]

    def __post_init__(self):
        stages = tuple(tuple((int(l), float(a), float(b)) for l, a, b in row)
                       for row in self.stages)
        object.__setattr__(self, "stages", stages)
        if not stages:
            raise ValueError("scheme needs at least one stage")
        for i, row in enumerate(stages, start=1):
            if not row:
                raise ValueError(f"stage {i} is empty")
            if any(not 0 <= level < i for level, _, _ in row):
                raise ValueError(f"stage {i} references a level that is not earlier")
            total = math.fsum(a for _, a, _ in row)
            if abs(total - 1.0) > 1e-12:
                raise ValueError(f"stage {i} alpha weights sum to {total}, not 1")

    @classmethod
    def iterated(cls, fractions: Sequence[float]) -> "ShuOsherRK":
        """Low-storage form ``u^(s) = u^n + f_s dt F(u^(s-1))``."""
        fractions = [float(f) for f in fractions]
        if not fractions:
            raise ValueError("need at least one stage fraction")
        rows = [((0, 1.0, fractions[0]),)]
        for s, f in enumerate(fractions[1:], start=2):
            rows.append(((0, 1.0, 0.0), (s - 1, 0.0, f)))
        return cls(tuple(rows))

    @property
    def n_stages(self) -> int:
        return len(self.stages)

    def stage_fractions(self) -> tuple[float, ...] | None:
        """Return the fractions if the scheme has the iterated form, else None."""
        fr = []
        for s, row in enumerate(self.stages, start=1):
            if s == 1:
                if len(row) != 1 or row[0][0] != 0:
                    return None
                fr.append(row[0][2])
                continue
            terms = {level: (a, b) for level, a, b in row}
            prev = terms.get(s - 1)
            if len(row) != 2 or terms.get(0) != (1.0, 0.0) or prev is None or prev[0] != 0.0:
                return None
            fr.append(prev[1])
        return tuple(fr)


@dataclass(frozen=True)
class AdamsBashforthPC:
    """Two-level Adams-Bashforth predictor with trapezoidal corrector.

    With ``D`` the discrete derivative and ``c`` the wave speed:

        u*      = u^{n+1} - c dt (p_new D u^{n+1} + p_old D u^n)
        u^{n+2} = u^{n+1} - c dt (c_new D u* + c_old D u^{n+1})
    """

    predictor_new: float = 1.5
    predictor_old: float = -0.5
    corrector_new: float = 0.5
    corrector_old: float = 0.5

    def __post_init__(self):
        if abs(self.predictor_new + self.predictor_old - 1) > 1e-12:
            raise ValueError("predictor weights must sum to 1")
        if abs(self.corrector_new + self.corrector_old - 1) > 1e-12:
            raise ValueError("corrector weights must sum to 1")


@dataclass(frozen=True)
class GainSet:
    """Characteristic roots of a multi-level scheme."""

    roots: tuple[complex, ...]
    physical_index: int

    def __post_init__(self):
        if not self.roots:
            raise ValueError("GainSet needs at least one root")
        if not 0 <= self.physical_index < len(self.roots):
            raise ValueError("physical_index out of range")

    @property
    def physical(self) -> complex:
        return self.roots[self.physical_index]

    @property
    def spurious(self) -> tuple[complex, ...]:
        return tuple(r for i, r in enumerate(self.roots) if i != self.physical_index)


# -- symbols ----------------------------------------------------------------


def spatial_symbol(stencil: SpatialStencil, kh):
    """Fourier symbol ``A(kh) = sum_j (c_j/divisor) exp(i j kh)``.

    ``A(0) = 0`` exactly for a consistent stencil since the sum is formed on
    the exact zeroth moment.
    """
    kh = np.asarray(kh, dtype=float)
    acc = np.zeros(kh.shape, dtype=complex)
    for j, c in zip(stencil.offsets, stencil.coefficients):
        acc = acc + c * np.exp(1j * j * kh)
    # pin kh == 0 to the exact zeroth moment
    acc = np.where(kh == 0, float(stencil.moment(0) / stencil.divisor), acc)
    return complex(acc) if acc.ndim == 0 else acc


def modified_wavenumber(stencil: SpatialStencil, kh):
    """Scaled modified wavenumber ``k_num h = -i A(kh)``.

    The real part carries dispersion, the imaginary part dissipation.
    """
    return -1j * spatial_symbol(stencil, kh)


def temporal_gain(weights: Sequence[float], z):
    """``G = 1 + sum_{j>=1} w_j z^j`` evaluated in Horner order."""
    if len(weights) == 0:
        raise ValueError("weights must be non-empty")
    z = np.asarray(z, dtype=complex)
    acc = np.zeros(z.shape, dtype=complex)
    for w in reversed(list(weights)):
        acc = (acc + w) * z
    out = 1.0 + acc
    return complex(out) if out.ndim == 0 else out


def exact_gain(sample: WaveSample):
    """Exact per-step factor ``exp(-i kh cfl)``."""
    phase = np.asarray(sample.kh, dtype=float) * np.asarray(sample.cfl, dtype=float)
    out = np.cos(phase) - 1j * np.sin(phase)
    return complex(out) if np.ndim(out) == 0 else out


def order_based_gain(order: int, a):
    """Order-collapsed RK gain ``sum_{j=0}^{p} (-a)^j / j!``.

    This depends only on the order, which is the shortcoming the staged
    gain fixes.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    weights = [(-1) ** j / math.factorial(j) for j in range(1, order + 1)]
    return temporal_gain(weights, a)


def staged_gain(scheme: ShuOsherRK, stencil: SpatialStencil, sample: WaveSample):
    """Exact single-step gain of a Shu-Osher scheme with a given stencil.

    Runs the stage recursion ``G_i = sum_j (alpha_ij - cfl beta_ij A) G_j``
    starting from ``G_0 = 1``.
    """
    a = spatial_symbol(stencil, sample.kh)
    return _staged_from_symbol(scheme, np.asarray(sample.cfl, dtype=float) * a)


def _staged_from_symbol(scheme: ShuOsherRK, ca):
    # ca = cfl * A(kh)
    ca = np.asarray(ca, dtype=complex)
    levels = [np.ones(ca.shape, dtype=complex)]
    for row in scheme.stages:
        g = np.zeros(ca.shape, dtype=complex)
        for level, alpha, beta in row:
            if alpha:
                g = g + alpha * levels[level]
            if beta:
                g = g - beta * ca * levels[level]
        levels.append(g)
    out = levels[-1]
    return complex(out) if out.ndim == 0 else out


def multilevel_roots(scheme: AdamsBashforthPC, stencil: SpatialStencil, sample: WaveSample):
    """Both roots of the predictor characteristic quadratic.

    With a constant level-to-level ratio ``g`` the predictor gives

        g**2 - (1 - cfl p_new A) g + cfl p_old A = 0.
    """
    ca = complex(sample.cfl * spatial_symbol(stencil, sample.kh))
    if abs(ca) < 1e-300:
        raise AnalysisError("degenerate characteristic polynomial: cfl*A(kh) is zero")
    b = -(1 - scheme.predictor_new * ca)
    c = scheme.predictor_old * ca
    disc = np.sqrt(complex(b * b - 4 * c))
    # numerically stable pairing: big root first, small root from the product
    q = -0.5 * (b + disc if (b.conjugate() * disc).real >= 0 else b - disc)
    r1 = q
    r2 = c / q
    return r1, r2


def corrector_gain(scheme: AdamsBashforthPC, stencil: SpatialStencil, sample: WaveSample, g1):
    """Corrector-step gain for a given predictor ratio ``g1``."""
    ca = sample.cfl * spatial_symbol(stencil, sample.kh)
    return 1 - ca * (scheme.corrector_new * g1 + scheme.corrector_old)


def multilevel_gain(scheme: AdamsBashforthPC, stencil: SpatialStencil, sample: WaveSample):
    """Root set of the multi-level scheme and the corrector gain of the physical root.

    The physical root is the one closest to :func:`exact_gain`.

    Raises
    ------
    AnalysisError
        If ``cfl * A(kh)`` vanishes and the quadratic degenerates to
        ``g (g - 1) = 0``.
    """
    if sample.cfl <= 0:
        raise AnalysisError("degenerate characteristic polynomial: cfl must be > 0")
    roots = multilevel_roots(scheme, stencil, sample)
    target = exact_gain(sample)
    phys = int(np.argmin([abs(r - target) for r in roots]))
    gs = GainSet(tuple(complex(r) for r in roots), phys)
    return gs, complex(corrector_gain(scheme, stencil, sample, gs.physical))


def characteristic_residual(scheme: AdamsBashforthPC, stencil: SpatialStencil,
                            sample: WaveSample, g) -> complex:
    ca = sample.cfl * spatial_symbol(stencil, sample.kh)
    return g * g - (1 - scheme.predictor_new * ca) * g + scheme.predictor_old * ca


# -- phase diagnostics --------------------------------------------------------


def phase_shift(g) -> float:
    """Per-step phase shift ``beta = -atan2(Im G, Re G)`` in ``(-pi, pi]``."""
    g = complex(g)
    if g == 0:
        raise AnalysisError("zero gain: the mode is annihilated, phase undefined")
    beta = -math.atan2(g.imag, g.real)
    return math.pi if beta == -math.pi else beta


def phase_speed(g, sample: WaveSample) -> float:
    """Numerical over physical phase speed ``beta / (kh cfl)``."""
    denom = float(sample.kh) * float(sample.cfl)
    if denom == 0:
        raise AnalysisError("phase speed undefined for kh*cfl == 0")
    return phase_shift(g) / denom


def group_velocity(beta_samples, cfl: float) -> list[tuple[float, float]]:
    """Normalized group velocity ``(1/cfl) d beta / d kh`` on the caller's grid.

    ``beta_samples`` is a sequence of ``(kh, beta)`` pairs with strictly
    increasing ``kh``.  The phase is unwrapped before differencing; interior
    points use second-order central differences and the ends second-order
    one-sided ones.
    """
    pts = list(beta_samples)
    if len(pts) < 3:
        raise ValueError("group velocity needs at least 3 samples")
    kh = np.array([p[0] for p in pts], dtype=float)
    if np.any(np.diff(kh) <= 0):
        raise ValueError("kh grid must be strictly increasing")
    if cfl <= 0:
        raise AnalysisError("group velocity undefined for cfl <= 0")
    beta = np.unwrap(np.array([p[1] for p in pts], dtype=float))
    dbeta = np.gradient(beta, kh, edge_order=2)
    return [(float(k), float(v / cfl)) for k, v in zip(kh, dbeta)]
