"""Command-line entry points.

    crystalflow run <config.json>      -- execute a flow / level-set run
    crystalflow verify <fast|full>     -- run the acceptance suite
    crystalflow converge <config.json> -- step-size convergence study

All outputs land in the directory given by --out (default: alongside the
config).  Exit codes: 0 success, 1 failed verification, 2 configuration
error, 3 numerical failure (hard-fail mode).  Errors are also emitted as
JSON lines on stderr.

Environment: CRYSTALFLOW_THREADS overrides the configured thread count.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import acceptance
from .errors import ConfigError, InputError, NumericalError
from .flow import FlowConfig, ForcingTerm, run_flow
from .grids import Grid, ScalarField, SetMask, halfspace_mask, mask_gauge_radii, wulff_mask
from .gridio import write_csv, write_field, write_mask, write_metrics_csv
from .levelset import fattening_report, level_grid, run_levelset, solve_via_approximation
from .norms import norm_from_spec
from .resolvent import SolverParams


def _err(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": message, "kind": kind}) + "\n")


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}")
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    if "config" in doc and "mode" not in doc:
        doc = doc["config"]  # accept a previously written report.json
    return doc


def _resolve_threads(doc: dict) -> int:
    threads = int(doc.get("threads", 1))
    env = os.environ.get("CRYSTALFLOW_THREADS")
    if env:
        threads = int(env)
    if doc.get("deterministic", True):
        threads = 1
    return max(threads, 1)


def _build_grid(doc: dict) -> Grid:
    gspec = doc.get("grid")
    if not gspec or "cells" not in gspec:
        raise ConfigError("config needs grid.cells")
    return Grid.centered(
        int(gspec["cells"]), float(gspec.get("half_width", 1.0)), int(doc.get("dim", 2))
    )


def _build_forcing(doc: dict) -> ForcingTerm:
    fspec = doc.get("forcing", {"kind": "zero"})
    kind = fspec.get("kind", "zero")
    if kind == "zero":
        return ForcingTerm()
    if kind == "constant":
        return ForcingTerm(kind="constant", value=float(fspec["value"]))
    if kind == "profile":
        return ForcingTerm(
            kind="profile",
            times=tuple(float(t) for t in fspec["times"]),
            values=tuple(float(v) for v in fspec["values"]),
        )
    raise ConfigError(f"forcing kind '{kind}' is not available from JSON configs")


def _build_solver(doc: dict) -> SolverParams:
    s = doc.get("solver", {})
    kwargs = {}
    for key in (
        "max_iterations",
        "tolerance",
        "alignment_tolerance",
        "step_ratio",
        "over_relaxation",
        "check_every",
    ):
        if key in s:
            kwargs[key] = s[key]
    if "accelerate" in s:
        kwargs["accelerate"] = bool(s["accelerate"])
    return SolverParams(**kwargs)


def _flow_config(doc: dict) -> FlowConfig:
    grid = _build_grid(doc)
    dim = grid.dim
    if "phi" not in doc:
        raise ConfigError("config needs an anisotropy 'phi'")
    phi = norm_from_spec(doc["phi"], dim)
    psi = norm_from_spec(doc["psi"], dim) if "psi" in doc else None
    if "h" not in doc or "T" not in doc:
        raise ConfigError("config needs 'h' and 'T'")
    return FlowConfig(
        phi=phi,
        psi=psi,
        grid=grid,
        h=float(doc["h"]),
        T=float(doc["T"]),
        band=doc.get("band"),
        forcing=_build_forcing(doc),
        solver=_build_solver(doc),
        strict_sublevel=bool(doc.get("strict_sublevel", False)),
        hard_fail=bool(doc.get("hard_fail", False)),
        mobility_interior_radius=doc.get("mobility_interior_radius"),
    )


def _initial_mask(doc: dict, cfg: FlowConfig) -> SetMask:
    spec = doc.get("initial")
    if not spec:
        raise ConfigError("config needs an 'initial' set")
    kind = spec.get("kind")
    if kind == "wulff":
        return wulff_mask(cfg.grid, cfg.phi, spec.get("center", [0.0] * cfg.grid.dim),
                          float(spec["radius"]))
    if kind == "halfspace":
        return halfspace_mask(cfg.grid, spec["normal"], float(spec.get("offset", 0.0)))
    if kind == "union":
        cells = np.zeros(cfg.grid.shape, dtype=bool)
        for part in spec.get("parts", []):
            cells |= _initial_mask({"initial": part}, cfg).cells
        return SetMask(cfg.grid, cells)
    raise ConfigError(f"unknown initial set kind '{kind}'")


def _initial_function(doc: dict, cfg: FlowConfig) -> ScalarField:
    spec = doc.get("initial")
    if not spec:
        raise ConfigError("config needs an 'initial' function")
    kind = spec.get("kind")
    pts = cfg.grid.centers()
    if kind == "wulff_gauge":
        which = spec.get("norm", "phi")
        norm = cfg.phi if which == "phi" else cfg.psi
        return ScalarField(cfg.grid, norm.polar_field(pts) - float(spec.get("radius", 0.0)))
    if kind == "expression":
        namespace = {
            "phi_polar": cfg.phi.polar_field(pts),
            "psi_polar": cfg.psi.polar_field(pts),
            "np": np,
        }
        for a in range(cfg.grid.dim):
            namespace[f"x{a}"] = pts[a]
        try:
            values = eval(spec["formula"], {"__builtins__": {}}, namespace)  # noqa: S307
        except Exception as exc:
            raise ConfigError(f"bad initial expression: {exc}")
        return ScalarField(cfg.grid, np.broadcast_to(values, cfg.grid.shape).astype(float))
    raise ConfigError(f"unknown initial function kind '{kind}'")


def _resolved_config(doc: dict, cfg: FlowConfig, threads: int) -> dict:
    out = dict(doc)
    out["phi"] = cfg.phi.spec()
    out["psi"] = cfg.psi.spec()
    out["band"] = cfg.band
    out["threads"] = threads
    out.setdefault("deterministic", True)
    return out


def _write_report(out_dir: Path, payload: dict) -> None:
    with open(out_dir / "report.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_command(config_path: str, out_dir: str | None = None) -> int:
    """Execute the run described by a JSON config; exit-code semantics."""
    try:
        doc = _load_config(config_path)
        cfg = _flow_config(doc)
        threads = _resolve_threads(doc)
        out = Path(out_dir) if out_dir else Path(config_path).resolve().parent / "out"
        out.mkdir(parents=True, exist_ok=True)
        mode = doc.get("mode", "flow")
        stride = int(doc.get("snapshot_stride", 0))
        if mode == "flow":
            result = _run_flow_mode(doc, cfg, out, stride)
        elif mode == "levelset":
            result = _run_levelset_mode(doc, cfg, out, stride, threads)
        elif mode == "approximation":
            result = _run_approximation_mode(doc, cfg, out, threads)
        else:
            raise ConfigError(f"unknown mode '{mode}'")
        _write_report(out, {"config": _resolved_config(doc, cfg, threads), "results": result})
        return 0
    except (ConfigError, InputError) as exc:
        _err("config", str(exc))
        return 2
    except NumericalError as exc:
        _err("numerical", str(exc))
        return 3


def _run_flow_mode(doc, cfg, out, stride):
    E0 = _initial_mask(doc, cfg)
    trace = run_flow(E0, cfg)
    write_metrics_csv(out / "metrics.csv", trace.metrics)
    if stride > 0:
        for k, mask in enumerate(trace.masks):
            if k % stride == 0 or k == len(trace.masks) - 1:
                write_mask(out / f"mask_{k:06d}.f64grid", mask, time=trace.times[k])
    return {
        "steps": len(trace.masks) - 1,
        "extinction_time": trace.extinction_time,
        "fullspace_time": trace.fullspace_time,
        "validity": trace.validity,
        "final_volume": trace.metrics[-1]["volume"],
    }


def _run_levelset_mode(doc, cfg, out, stride, threads):
    u0 = _initial_function(doc, cfg)
    lspec = doc.get("levels", {"count": 64})
    if "values" in lspec:
        levels = np.asarray(lspec["values"], dtype=float)
    else:
        levels = level_grid(u0, int(lspec.get("count", 64)))
    lsf = run_levelset(u0, cfg, levels, threads=threads)
    rows = []
    for j in range(len(lsf.times)):
        for i, lam in enumerate(lsf.levels):
            mask = lsf.mask(i, j)
            if mask.is_empty or mask.is_full:
                inr = outr = 0.0
            else:
                inr, outr = mask_gauge_radii(mask, cfg.psi_polar)
            gap = int((lsf.level_index[j] == i).sum()) * cfg.grid.spacing**cfg.grid.dim
            rows.append(
                {
                    "stamp": j,
                    "t": lsf.times[j],
                    "lambda": float(lam),
                    "volume": mask.volume(),
                    "inradius": inr,
                    "outradius": outr,
                    "fattening_gap": gap,
                }
            )
    write_csv(out / "levelset_metrics.csv", rows,
              ["stamp", "t", "lambda", "volume", "inradius", "outradius", "fattening_gap"])
    if stride > 0:
        for j in range(len(lsf.times)):
            if j % stride == 0 or j == len(lsf.times) - 1:
                write_field(out / f"levelset_{j:06d}.f64grid", lsf.field(j),
                            "levelset", time=lsf.times[j])
    suspects = [r for r in fattening_report(lsf) if r["suspect"]]
    return {
        "stamps": len(lsf.times),
        "levels": len(lsf.levels),
        "nesting": "verified",
        "fattening_suspects": len(suspects),
    }


def _run_approximation_mode(doc, cfg, out, threads):
    u0 = _initial_function(doc, cfg)
    schedule = doc.get("delta_schedule")
    if not schedule:
        raise ConfigError("approximation mode needs 'delta_schedule'")
    lspec = doc.get("levels", {"count": 64})
    levels = (
        np.asarray(lspec["values"], dtype=float)
        if "values" in lspec
        else level_grid(u0, int(lspec.get("count", 64)))
    )
    rep = solve_via_approximation(
        u0, cfg.psi, cfg.phi, schedule, cfg, levels=levels, threads=threads
    )
    payload = {
        "delta_schedule": list(rep.schedule),
        "differences": rep.diffs,
        "floor": rep.floor,
        "converged": rep.converged,
        "notes": rep.notes,
    }
    with open(out / "approximation_report.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for j in range(len(rep.limit.times)):
        if j == 0 or j == len(rep.limit.times) - 1:
            write_field(out / f"levelset_limit_{j:06d}.f64grid", rep.limit.field(j),
                        "levelset", time=rep.limit.times[j])
    return payload


def verify_command(selector: str, out_dir: str | None = None) -> int:
    """Run the acceptance suite; exit 0 iff every criterion passes."""
    if selector not in ("fast", "full"):
        _err("config", f"unknown verify selector '{selector}' (use fast or full)")
        return 2
    results, ok = acceptance.run_suite(selector)
    print(f"suite '{selector}': {sum(r.passed for r in results)}/{len(results)} criteria passed")
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        payload = [
            {
                "criterion": r.cid,
                "name": r.name,
                "passed": r.passed,
                "measured": r.measured,
                "expected": r.expected,
                "tolerance": r.tolerance,
                "runtime_s": r.runtime,
            }
            for r in results
        ]
        with open(out / "verify_report.json", "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0 if ok else 1


def convergence_study(config_path: str, out_dir: str | None = None) -> int:
    """Run the same shrink problem across an h ladder and fit the rate."""
    try:
        doc = _load_config(config_path)
        ladder = doc.get("h_ladder")
        if not ladder or len(ladder) < 3:
            raise InputError("convergence study needs an h_ladder with at least 3 values")
        if len(set(float(h) for h in ladder)) != len(ladder):
            raise InputError("h_ladder values must be distinct")
        gspec = doc.get("grid", {})
        rows = acceptance.convergence_ladder(
            h_values=tuple(float(h) for h in ladder),
            cells=int(gspec.get("cells", 256)),
            half_width=float(gspec.get("half_width", 0.5)),
            R0=float(doc.get("radius", 0.35)),
            T=float(doc.get("T", 0.048)),
        )
        rate = acceptance.fit_rate([r["h"] for r in rows], [r["err_vs_law"] for r in rows])
        out = Path(out_dir) if out_dir else Path(config_path).resolve().parent / "out"
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "convergence.csv", rows,
                  ["h", "dx", "steps", "radius_sim", "radius_recursion", "radius_law",
                   "err_vs_law", "err_vs_recursion"])
        print(f"fitted rate in h (radius error vs law): {rate:.3f}")
        _write_report(out, {"config": doc, "results": {"rate": rate, "ladder": rows}})
        return 0
    except (ConfigError, InputError) as exc:
        _err("config", str(exc))
        return 2
    except NumericalError as exc:
        _err("numerical", str(exc))
        return 3


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="crystalflow", description=__doc__)
    parser.add_argument("--out", default=None, help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a configured run")
    p_run.add_argument("config")
    p_ver = sub.add_parser("verify", help="run the acceptance suite")
    p_ver.add_argument("selector", help="fast or full")
    p_con = sub.add_parser("converge", help="step-size convergence study")
    p_con.add_argument("config")
    args = parser.parse_args(argv)
    if args.command == "run":
        return run_command(args.config, args.out)
    if args.command == "verify":
        return verify_command(args.selector, args.out)
    return convergence_study(args.config, args.out)


if __name__ == "__main__":
    sys.exit(main())
