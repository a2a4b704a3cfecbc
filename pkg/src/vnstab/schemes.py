"""Named (time scheme, stencil) pairs and stencil order checks.

The catalog is built once at import and never mutated.  Schemes can also be
written to and read from a small line-oriented text format::

    # comment
    name = rk6-l4r2
    stages = 1/6, 1/5, 1/4, 1/3, 1/2, 1
    offsets = -4, -3, -2, -1, 0, 1, 2
    numerators = 1, -8, 30, -80, 35, 24, -2
    divisor = 60

General Shu-Osher schemes use one ``shu_osher`` line per stage with
``level:alpha:beta`` terms separated by ``;``.  The Adams-Bashforth
predictor-corrector is ``adams_bashforth = p_new, p_old, c_new, c_old``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Union

from .spectral import AdamsBashforthPC, ShuOsherRK, SpatialStencil

TimeScheme = Union[ShuOsherRK, AdamsBashforthPC]


class UnknownSchemeError(KeyError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown scheme {name!r}; valid names: {', '.join(CATALOG)}")

    def __str__(self):
        return self.args[0]


class SchemeFormatError(ValueError):
    """Scheme-spec text that cannot be parsed; carries the offending line."""

    def __init__(self, message, line=None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class SchemeSpec:
    name: str
    time: TimeScheme
    stencil: SpatialStencil
    formal_temporal_order: int
    formal_spatial_order: int
    documented_cfl_limit: float | None = None

    @property
    def is_multilevel(self) -> bool:
        return isinstance(self.time, AdamsBashforthPC)


# -- order verification ---------------------------------------------------


@dataclass(frozen=True)
class MomentCheck:
    m: int
    value: Fraction
    expected: Fraction

    @property
    def passed(self) -> bool:
        return self.value == self.expected


@dataclass
class StencilReport:
    claimed_order: int
    checks: list[MomentCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def first_failure(self) -> int | None:
        for c in self.checks:
            if not c.passed:
                return c.m
        return None

    def lines(self) -> list[str]:
        return [f"m={c.m:<2d} sum={c.value!s:>12} expected={c.expected!s:>6} "
                f"{'pass' if c.passed else 'FAIL'}" for c in self.checks]


def verify_stencil_order(stencil: SpatialStencil, claimed_order: int) -> StencilReport:
    """Check the moment conditions up to ``claimed_order`` in exact arithmetic.

    Moment 1 must equal the divisor, all other moments ``0..p`` must vanish.
    Failures are reported as entries, never raised.
    """
    if claimed_order < 1:
        raise ValueError("claimed_order must be >= 1")
    report = StencilReport(claimed_order)
    for m in range(claimed_order + 1):
        expected = stencil.divisor if m == 1 else Fraction(0)
        report.checks.append(MomentCheck(m, stencil.moment(m), expected))
    return report


# -- catalog ----------------------------------------------------------------

BS1 = SpatialStencil((-1, 0), (-1, 1), 1)
BS2 = SpatialStencil((-2, -1, 0), (1, -4, 3), 2)
L2R1 = SpatialStencil((-2, -1, 0, 1), (1, -6, 3, 2), 6)
CD4 = SpatialStencil((-2, -1, 0, 1, 2), (1, -8, 0, 8, -1), 12)
L4R2 = SpatialStencil(range(-4, 3), (1, -8, 30, -80, 35, 24, -2), 60)

FORWARD_EULER = ShuOsherRK.iterated([1.0])
SSPRK3 = ShuOsherRK((
    ((0, 1.0, 1.0),),
    ((0, 0.75, 0.0), (1, 0.25, 0.25)),
    ((0, 1 / 3, 0.0), (2, 2 / 3, 2 / 3)),
))
RK4 = ShuOsherRK((
    ((0, 1.0, 0.5),),
    ((0, 1.0, 0.0), (1, 0.0, 0.5)),
    ((0, 1.0, 0.0), (2, 0.0, 1.0)),
    ((0, -1 / 3, 0.0), (1, 1 / 3, 0.0), (2, 2 / 3, 0.0), (3, 1 / 3, 1 / 6)),
))
RK45_DEMO = ShuOsherRK.iterated([0.18856248, 1 / 4, 1 / 3, 1 / 2, 1.0])
RK6_LOW_STORAGE = ShuOsherRK.iterated([1 / 6, 1 / 5, 1 / 4, 1 / 3, 1 / 2, 1.0])

CATALOG: dict[str, SchemeSpec] = {
    s.name: s for s in (
        SchemeSpec("ftbs", FORWARD_EULER, BS1, 1, 1, 1.0),
        SchemeSpec("ssprk3-l2r1", SSPRK3, L2R1, 3, 3, 1.6),
        SchemeSpec("rk45-demo", RK45_DEMO, BS1, 4, 1),
        # stand-in for the HRK4-CD4 rows: all 4-stage 4th-order RK share one
        # linear stability polynomial
        SchemeSpec("rk4-cd4", RK4, CD4, 4, 4),
        SchemeSpec("rk6-l4r2", RK6_LOW_STORAGE, L4R2, 6, 6),
        SchemeSpec("ab2-bs2", AdamsBashforthPC(), BS2, 2, 2),
    )
}


def catalog_lookup(name: str) -> SchemeSpec:
    try:
        return CATALOG[name]
    except KeyError:
        raise UnknownSchemeError(name) from None


def verify_scheme(spec: SchemeSpec) -> list[tuple[str, bool, str]]:
    """All invariant checks for a scheme as ``(label, passed, detail)`` rows."""
    rows = []
    st = spec.stencil
    rows.append(("zeroth moment", st.moment(0) == 0, f"sum c_j = {st.moment(0)}"))
    rows.append(("first moment", st.moment(1) == st.divisor,
                 f"sum c_j j = {st.moment(1)}, divisor = {st.divisor}"))
    rep = verify_stencil_order(st, max(spec.formal_spatial_order, 1))
    failed = rep.first_failure
    rows.append((f"spatial order {spec.formal_spatial_order}", rep.passed,
                 "all moments pass" if failed is None else f"fails at m={failed}"))
    if isinstance(spec.time, ShuOsherRK):
        rows.append(("explicit stages", True, f"{spec.time.n_stages} stages"))
    return rows


# -- text format --------------------------------------------------------------


def _fmt_num(x) -> str:
    if isinstance(x, Fraction):
        return str(x)
    f = float(x)
    if f.is_integer() and abs(f) < 2**53:
        return str(int(f))
    return repr(f)


def _parse_fraction(tok: str, line: int) -> Fraction:
    try:
        return Fraction(tok.strip())
    except (ValueError, ZeroDivisionError):
        raise SchemeFormatError(f"bad number {tok.strip()!r}", line) from None


def _parse_float(tok: str, line: int) -> float:
    return float(_parse_fraction(tok, line))


def dumps(spec: SchemeSpec) -> str:
    """Serialize a scheme to the text format (round-trips exactly)."""
    out = [f"name = {spec.name}"]
    t = spec.time
    if isinstance(t, AdamsBashforthPC):
        out.append("adams_bashforth = " + ", ".join(
            _fmt_num(v) for v in (t.predictor_new, t.predictor_old,
                                  t.corrector_new, t.corrector_old)))
    elif t.stage_fractions() is not None:
        out.append("stages = " + ", ".join(_fmt_num(f) for f in t.stage_fractions()))
    else:
        for row in t.stages:
            out.append("shu_osher = " + "; ".join(
                f"{l}:{_fmt_num(a)}:{_fmt_num(b)}" for l, a, b in row))
    st = spec.stencil
    out.append("offsets = " + ", ".join(str(o) for o in st.offsets))
    out.append("numerators = " + ", ".join(_fmt_num(c) for c in st.numerators))
    out.append(f"divisor = {_fmt_num(st.divisor)}")
    out.append(f"temporal_order = {spec.formal_temporal_order}")
    out.append(f"spatial_order = {spec.formal_spatial_order}")
    if spec.documented_cfl_limit is not None:
        out.append(f"cfl_limit = {_fmt_num(spec.documented_cfl_limit)}")
    return "\n".join(out) + "\n"


def loads(text: str, check: bool = True) -> SchemeSpec:
    """Parse the text format.

    With ``check=False`` the stencil consistency checks are skipped so that a
    broken file can still be loaded and reported on by ``verify``.
    """
    fields: dict[str, tuple[str, int]] = {}
    so_rows: list[tuple[str, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SchemeFormatError("expected 'key = value'", lineno)
        key, value = (p.strip() for p in line.split("=", 1))
        if key == "shu_osher":
            so_rows.append((value, lineno))
        elif key in ("name", "stages", "adams_bashforth", "offsets", "numerators",
                     "divisor", "temporal_order", "spatial_order", "cfl_limit"):
            if key in fields:
                raise SchemeFormatError(f"duplicate key {key!r}", lineno)
            fields[key] = (value, lineno)
        else:
            raise SchemeFormatError(f"unknown key {key!r}", lineno)

    for key in ("name", "offsets", "numerators"):
        if key not in fields:
            raise SchemeFormatError(f"missing required key {key!r}")
    n_time = sum(k in fields for k in ("stages", "adams_bashforth")) + bool(so_rows)
    if n_time != 1:
        raise SchemeFormatError("exactly one of stages / shu_osher / adams_bashforth is required")

    def split(key):
        value, ln = fields[key]
        return [t for t in value.split(",") if t.strip()], ln

    name = fields["name"][0]
    try:
        if "stages" in fields:
            toks, ln = split("stages")
            time = ShuOsherRK.iterated([_parse_float(t, ln) for t in toks])
        elif "adams_bashforth" in fields:
            toks, ln = split("adams_bashforth")
            if len(toks) != 4:
                raise SchemeFormatError("adams_bashforth needs 4 weights", ln)
            time = AdamsBashforthPC(*(_parse_float(t, ln) for t in toks))
        else:
            rows = []
            for value, ln in so_rows:
                row = []
                for term in value.split(";"):
                    parts = term.split(":")
                    if len(parts) != 3:
                        raise SchemeFormatError(f"bad stage term {term.strip()!r}", ln)
                    row.append((int(parts[0]), _parse_float(parts[1], ln),
                                _parse_float(parts[2], ln)))
                rows.append(tuple(row))
            ln = so_rows[0][1]
            time = ShuOsherRK(tuple(rows))
    except SchemeFormatError:
        raise
    except ValueError as exc:
        raise SchemeFormatError(str(exc), ln) from None

    toks, ln = split("offsets")
    try:
        offsets = [int(t) for t in toks]
    except ValueError:
        raise SchemeFormatError("offsets must be integers", ln) from None
    toks, ln_num = split("numerators")
    nums = [_parse_fraction(t, ln_num) for t in toks]
    divisor = _parse_fraction(fields["divisor"][0], fields["divisor"][1]) if "divisor" in fields else Fraction(1)
    try:
        stencil = SpatialStencil(offsets, nums, divisor)
    except ValueError as exc:
        raise SchemeFormatError(str(exc), ln_num) from None
    if check and not stencil.is_consistent():
        raise SchemeFormatError("stencil fails the consistency moments (sum c = 0, sum c j = divisor)", ln_num)

    def intfield(key, default):
        if key not in fields:
            return default
        value, ln = fields[key]
        try:
            return int(value)
        except ValueError:
            raise SchemeFormatError(f"{key} must be an integer", ln) from None

    limit = None
    if "cfl_limit" in fields:
        limit = _parse_float(*fields["cfl_limit"])
    return SchemeSpec(name, time, stencil,
                      intfield("temporal_order", 1), intfield("spatial_order", 1), limit)


def load_scheme_file(path, check: bool = True) -> SchemeSpec:
    return loads(Path(path).read_text(), check=check)


def resolve(ref: str, check: bool = True) -> SchemeSpec:
    """A catalog name, or a path to a scheme-spec file."""
    if ref in CATALOG:
        return CATALOG[ref]
    p = Path(ref)
    if p.is_file():
        return load_scheme_file(p, check=check)
    raise UnknownSchemeError(ref)
