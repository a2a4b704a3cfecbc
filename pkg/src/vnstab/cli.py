"""``vnstab`` command line.

Every command writes its CSV outputs atomically plus a ``.manifest.json``
next to the primary output.  ``vnstab replay MANIFEST`` reruns the recorded
command line.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import _io, gainlab, optimizer, schemes, simulate
from .spectral import AnalysisError, WaveSample, multilevel_gain

EXIT_OK = 0
EXIT_IO = 1
EXIT_UNKNOWN_SCHEME = 2
EXIT_BAD_INPUT = 3
EXIT_DIVERGED = 4
EXIT_MODE_EXTINCT = 5
EXIT_VERIFY_FAILED = 6

# lets a rounded pi such as 3.1416 through as the upper kh bound
KH_SLACK = 1e-3


class UsageError(ValueError):
    """Bad numeric range or configuration (exit 3)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_BAD_INPUT)


def parse_range(text: str) -> np.ndarray:
    """``min:max:steps`` (inclusive, ``steps`` samples) or a single value."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return np.array([float(parts[0])])
        if len(parts) != 3:
            raise ValueError
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"bad range {text!r}; expected min:max:steps") from None
    if n < 1 or not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo or (n == 1 and hi != lo):
        raise UsageError(f"bad range {text!r}")
    return np.linspace(lo, hi, n)


def parse_offsets(text: str) -> list[int]:
    try:
        if ":" in text:
            lo, hi = (int(p) for p in text.split(":"))
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(p) for p in text.split(",")]
    except ValueError:
        raise UsageError(f"bad offsets {text!r}; use lo:hi or a comma list") from None


def manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def write_manifest(command: str, params: dict, argv: list[str], artifacts: list[Path],
                   started: float) -> Path:
    primary = Path(artifacts[0])
    doc = {
        "command": command,
        "params": params,
        "argv": argv,
        "artifacts": [str(a) for a in artifacts],
        "duration_s": time.perf_counter() - started,
    }
    return _io.atomic_write_text(manifest_path(primary), json.dumps(doc, indent=2) + "\n")


def _fmtc(g: complex) -> str:
    return f"{g.real:.10g}{'+' if g.imag >= 0 else '-'}{abs(g.imag):.10g}i"


# -- commands ------------------------------------------------------------------


def cmd_gain_map(a, argv, t0):
    scheme = schemes.resolve(a.scheme)
    kh, cfl = parse_range(a.kh), parse_range(a.cfl)
    if kh.min() < 0 or kh.max() > math.pi + KH_SLACK or cfl.min() < 0:
        raise UsageError("kh must lie in [0, pi] and cfl must be non-negative")
    gm = gainlab.gain_map(scheme, kh, cfl)
    out = gainlab.write_gain_map_csv(a.out, gm)
    write_manifest("gain-map", {"scheme": a.scheme, "kh": a.kh, "cfl": a.cfl}, argv, [out], t0)
    print(f"wrote {out} ({kh.size * cfl.size} nodes), max|G|={float(gm.magnitude.max()):.10g}")
    return EXIT_OK


def cmd_gain(a, argv, t0):
    scheme = schemes.resolve(a.scheme)
    if a.cfl < 0:
        raise UsageError("cfl must be non-negative")
    sample = WaveSample(a.kh, a.cfl)
    if scheme.is_multilevel:
        gs, g = multilevel_gain(scheme.time, scheme.stencil, sample)
        for i, r in enumerate(gs.roots):
            tag = " (physical)" if i == gs.physical_index else ""
            print(f"root{i}={_fmtc(r)} |root{i}|={abs(r):.10g}{tag}")
        print(f"G={_fmtc(g)} |G|={abs(g):.10g}")
    else:
        g = gainlab.theory_gain(scheme, a.kh, a.cfl)
        print(f"G={_fmtc(g)} |G|={abs(g):.10g}")
    return EXIT_OK


SIM_KEYS = {"case", "scheme", "cfl", "t", "points", "cells", "protocol", "c", "step_policy",
            "normalized_l1"}


def _sim_params(a) -> dict:
    params = {}
    if a.config:
        try:
            cfg = json.loads(Path(a.config).read_text())
        except json.JSONDecodeError as e:
            raise UsageError(f"config {a.config}: {e}") from None
        if not isinstance(cfg, dict) or set(cfg) - SIM_KEYS:
            extra = sorted(set(cfg) - SIM_KEYS) if isinstance(cfg, dict) else cfg
            raise UsageError(f"config {a.config}: unknown keys {extra}")
        params.update(cfg)
    for key in ("case", "scheme", "cfl", "t", "points", "cells", "protocol"):
        v = getattr(a, key)
        if v is not None:
            params[key] = v
    if a.normalized_l1:
        params["normalized_l1"] = True
    params.setdefault("protocol", "published")
    params.setdefault("normalized_l1", False)
    for key in ("case", "scheme"):
        if key not in params:
            raise UsageError(f"--{key} is required")
    return params


def cmd_simulate(a, argv, t0):
    p = _sim_params(a)
    scheme = schemes.resolve(p["scheme"])
    if p["case"] not in simulate.CASES:
        raise UsageError(f"unknown case {p['case']!r}; choose from {', '.join(simulate.CASES)}")
    cfg = simulate.named_case(p["case"], scheme, p.get("cfl"), p.get("t"), p.get("points"),
                              p.get("cells"), p["protocol"])
    overrides = {}
    if "c" in p:
        overrides["c"] = tuple(p["c"]) if isinstance(p["c"], list) else float(p["c"])
    if "step_policy" in p:
        overrides["step_policy"] = p["step_policy"]
    if overrides:
        cfg = replace(cfg, **overrides)
    run = simulate.run_2d if isinstance(cfg, simulate.SimConfig2D) else simulate.run_1d
    res = run(cfg, normalized_l1=bool(p["normalized_l1"]))
    out = simulate.write_field_csv(a.out, res.field)
    p.update(cfl=cfg.cfl, t=cfg.end_time, steps=res.n_steps, dt=res.dt)
    write_manifest("simulate", p, argv, [out], t0)
    print(f"L1={res.errors.l1:.10g} Linf={res.errors.linf:.10g}")
    return EXIT_OK


def cmd_measure_gain(a, argv, t0):
    scheme = schemes.resolve(a.scheme)
    points = a.cells + 1 if a.cells is not None else a.points
    if points < 9 or not a.cfl > 0 or (a.steps is not None and a.steps < 1):
        raise UsageError("need points >= 9, cfl > 0 and steps >= 1")
    cfg = gainlab.sine_config(scheme, points, a.cfl)
    comp = gainlab.compare_gain(cfg, a.mode, a.steps)
    out = gainlab.write_comparison_csv(a.out, [comp])
    write_manifest("measure-gain", {"scheme": a.scheme, "mode": a.mode, "points": points,
                                    "cfl": a.cfl, "steps": a.steps}, argv, [out], t0)
    print(f"theory={_fmtc(comp.theory)} measured={_fmtc(comp.measured)} "
          f"abs_diff={comp.abs_diff:.3e}")
    if comp.fitted is not None:
        print(f"fitted={_fmtc(comp.fitted)}")
    return EXIT_OK


def cmd_verify(a, argv, t0):
    scheme = schemes.resolve(a.scheme, check=False)
    rows = schemes.verify_scheme(scheme)
    width = max(len(r[0]) for r in rows)
    for label, ok, detail in rows:
        print(f"{label:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}")
    return EXIT_OK if all(r[1] for r in rows) else EXIT_VERIFY_FAILED


def cmd_optimize(a, argv, t0):
    offsets = parse_offsets(a.offsets)
    kh = parse_range(a.kh)
    try:
        obj = optimizer.ObjectiveConfig(tuple(kh), tuple(parse_range(a.cfl)),
                                        a.penalty, a.tolerance)
        ea = optimizer.EAConfig(a.population, a.generations, a.mutation, a.crossover, a.seed)
        seeds = [optimizer.DesignVector(tuple(float(f) for f in s.split(",")))
                 for s in a.seed_fractions]
        if len(offsets) < a.order + 1 or a.order < 1:
            raise ValueError(f"{len(offsets)} offsets cannot carry order {a.order}")
        res = optimizer.evolve(offsets, a.stages, a.order, obj, ea, seeds)
    except ValueError as e:
        raise UsageError(str(e)) from None
    out = optimizer.write_best_scheme(a.out, res, a.name)
    trace = optimizer.write_trace_csv(a.trace or out.with_suffix(".trace.csv"), res.trace)
    write_manifest("optimize", {k: v for k, v in vars(a).items() if k != "func"}, argv,
                   [out, trace], t0)
    print(f"objective={res.best_objective:.10g} fractions="
          + ",".join(f"{f:.10g}" for f in res.best.stage_fractions))
    return EXIT_OK


def cmd_replay(a, argv, t0):
    doc = json.loads(Path(a.manifest).read_text())
    recorded = doc.get("argv")
    if not isinstance(recorded, list) or not recorded or recorded[0] == "replay":
        raise UsageError("manifest carries no replayable command line")
    return main(recorded)


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="vnstab", description="Von Neumann gain analysis for advection schemes")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gain-map", help="theory |G| over a kh x cfl grid")
    p.add_argument("--scheme", required=True)
    p.add_argument("--kh", default="0:3.141592653589793:100")
    p.add_argument("--cfl", default="0:2:100")
    p.add_argument("--out", default="gain_map.csv")
    p.set_defaults(func=cmd_gain_map)

    p = sub.add_parser("gain", help="theory gain at one (kh, cfl)")
    p.add_argument("--scheme", required=True)
    p.add_argument("--kh", type=float, required=True)
    p.add_argument("--cfl", type=float, required=True)
    p.set_defaults(func=cmd_gain)

    p = sub.add_parser("simulate", help="run a named test case")
    p.add_argument("--scheme")
    p.add_argument("--case", choices=simulate.CASES)
    p.add_argument("--config", help="JSON file with any of: " + ", ".join(sorted(SIM_KEYS)))
    p.add_argument("--cfl", type=float)
    p.add_argument("--t", type=float)
    p.add_argument("--points", type=int)
    p.add_argument("--cells", type=int)
    p.add_argument("--protocol", choices=("published", "clean"))
    p.add_argument("--normalized-l1", action="store_true")
    p.add_argument("--out", default="solution.csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("measure-gain", help="DFT-measured gain against theory")
    p.add_argument("--scheme", required=True)
    p.add_argument("--mode", type=int, default=1)
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--cells", type=int)
    p.add_argument("--cfl", type=float, default=0.2)
    p.add_argument("--steps", type=int, help="steps to march (default 1, or 25 for multi-level)")
    p.add_argument("--out", default="gain.csv")
    p.set_defaults(func=cmd_measure_gain)

    p = sub.add_parser("verify", help="check stencil moments and scheme invariants")
    p.add_argument("--scheme", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("optimize", help="evolutionary low-dissipation search")
    p.add_argument("--offsets", default="-4:2")
    p.add_argument("--stages", type=int, default=6)
    p.add_argument("--order", type=int, default=6)
    p.add_argument("--kh", default="0.03125:2:64")
    p.add_argument("--cfl", default="0.5")
    p.add_argument("--penalty", type=float, default=1e6)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--population", type=int, default=32)
    p.add_argument("--generations", type=int, default=200)
    p.add_argument("--mutation", type=float, default=0.05)
    p.add_argument("--crossover", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seed-fractions", action="append", default=[],
                   help="comma list of stage fractions to place in the initial population")
    p.add_argument("--name", default="optimized")
    p.add_argument("--out", default="optimized.scheme")
    p.add_argument("--trace")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("replay", help="rerun the command recorded in a manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)
    return ap


def _glue_negative_values(argv: list[str]) -> list[str]:
    # argparse takes "-4:2" for an option; bind it to its flag explicitly
    out, it = [], iter(argv)
    for tok in it:
        if tok == "--offsets":
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        a = build_parser().parse_args(_glue_negative_values(argv))
    except SystemExit as e:
        return int(e.code or 0)
    t0 = time.perf_counter()
    try:
        return a.func(a, argv, t0)
    except schemes.UnknownSchemeError as e:
        print(f"error: {e.args[0] if e.args else e}", file=sys.stderr)
        return EXIT_UNKNOWN_SCHEME
    except simulate.DivergenceError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except gainlab.ModeExtinctError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_MODE_EXTINCT
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, AnalysisError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
