"""Acceptance criteria: quantitative checks against the closed-form oracles.

Each criterion is a function returning a CriterionResult with the measured
value, the expected value, the tolerance, and a pass flag.  The "fast"
subset is (1, 2, 5, 6); "full" runs everything.  Results of the flow runs
shared between criteria are cached per process.

Comparison domains: the computational box models all of space only away
from its boundary (no-flux conditions there), so closed-form comparisons
exclude a boundary layer of width ~2.5*sqrt(h) where the box solution
legitimately differs; tolerances themselves are never loosened.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .closedforms import OracleParams, resolvent_closed_form, wulff_radius_law, wulff_step_radius
from .flow import FlowConfig, ForcingTerm, atw_step, run_flow
from .grids import (
    Grid,
    ScalarField,
    SetMask,
    hausdorff_distance,
    mask_gauge_radii,
    sublevel_mask,
    wulff_mask,
)
from .levelset import compare_levelset_functions, level_grid, run_levelset, solve_via_approximation
from .norms import EuclideanNorm, crystalline_l1, regularize_mobility
from .resolvent import ResolventProblem, SolverParams, solve_resolvent

FAST = (1, 2, 5, 6)

_cache: dict = {}


@dataclass
class CriterionResult:
    cid: int
    name: str
    passed: bool
    measured: float
    expected: float
    tolerance: float
    runtime: float = 0.0
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"[{status}] criterion {self.cid:2d} {self.name}: "
            f"measured={self.measured:.6g} expected={self.expected:.6g} "
            f"tol={self.tolerance:.3g} ({self.runtime:.1f}s)"
        )


def _phi():
    return crystalline_l1(2)


def _measured_radius(mask: SetMask, gauge) -> float:
    """Midpoint of (inradius, outradius) around the origin: half-cell accurate."""
    inr, outr = mask_gauge_radii(mask, gauge, center=[0.0, 0.0])
    return 0.5 * (inr + outr)


def _crossing_radius(u: ScalarField) -> float:
    """Zero crossing of u along +x in the row nearest y = 0 (subcell)."""
    grid = u.grid
    j = grid.shape[1] // 2
    x = grid.axes()[0]
    vals = u.values[:, j]
    sign_change = np.where((vals[:-1] <= 0) & (vals[1:] > 0))[0]
    if len(sign_change) == 0:
        return 0.0
    i = sign_change[-1]
    return float(x[i] - vals[i] * (x[i + 1] - x[i]) / (vals[i + 1] - vals[i]))


# ---------------------------------------------------------------------------
# Criterion 1: per-step closed form
# ---------------------------------------------------------------------------

def criterion_1() -> CriterionResult:
    t0 = time.time()
    phi = _phi()
    grid = Grid.centered(256, 1.0)
    dx = grid.spacing
    h = 0.004
    pts = grid.centers()
    rho = phi.polar().eval_field(pts)
    f = ScalarField(grid, rho - 0.5)
    sol = solve_resolvent(ResolventProblem(f, h, phi), SolverParams())
    params = OracleParams(N=2, R=0.5, h=h)
    ref = np.empty_like(rho)
    flat = rho.ravel()
    out = ref.ravel()
    for i in range(flat.size):
        out[i] = resolvent_closed_form(flat[i], params)
    kink = math.sqrt(h * 3)
    layer = 2.5 * math.sqrt(h)  # no-flux boundary layer of the box
    region = (np.abs(rho - kink) > 3 * dx) & (rho <= 1.0 - layer)
    err = float(np.abs(sol.u.values - ref)[region].max())
    center = np.unravel_index(np.argmin(rho), rho.shape)
    plateau = float(sol.u.values[center])
    plateau_ref = resolvent_closed_form(0.0, params)
    passed = err <= 2 * dx and abs(plateau - plateau_ref) <= 2 * dx
    return CriterionResult(
        1,
        "per-step closed form",
        passed,
        err,
        0.0,
        2 * dx,
        time.time() - t0,
        {
            "plateau": plateau,
            "plateau_expected": plateau_ref,
            "plateau_tolerance": 2 * dx,
            "solver_iterations": sol.iterations,
            "residual": sol.residual,
            "excluded_boundary_layer": layer,
        },
    )


# ---------------------------------------------------------------------------
# Criterion 2: one-step Wulff radius
# ---------------------------------------------------------------------------

def _one_step_run():
    if "one_step" not in _cache:
        phi = _phi()
        grid = Grid.centered(256, 1.0)
        cfg = FlowConfig(phi=phi, grid=grid, h=0.004, T=0.004, band=0.25)
        E = wulff_mask(grid, phi, [0, 0], 0.5)
        _cache["one_step"] = (cfg, atw_step(E, cfg, 0))
    return _cache["one_step"]


def criterion_2() -> CriterionResult:
    t0 = time.time()
    cfg, (E1, diag) = _one_step_run()
    r = _measured_radius(E1, cfg.phi.polar())
    rbar = wulff_step_radius(0.5, OracleParams(N=2, R=0.5, h=cfg.h)).radius
    dx = cfg.grid.spacing
    passed = abs(r - rbar) <= dx
    return CriterionResult(
        2,
        "one-step Wulff radius",
        passed,
        r,
        rbar,
        dx,
        time.time() - t0,
        {"iterations": diag.iterations, "residual": diag.residual},
    )


# ---------------------------------------------------------------------------
# Criterion 3: multi-step radius law and extinction
# ---------------------------------------------------------------------------

def _shrink_run():
    if "shrink" not in _cache:
        phi = _phi()
        grid = Grid.centered(128, 0.5)
        cfg = FlowConfig(phi=phi, grid=grid, h=0.002, T=0.06, band=0.12)
        _cache["shrink"] = (cfg, run_flow(wulff_mask(grid, phi, [0, 0], 0.3), cfg))
    return _cache["shrink"]


def criterion_3() -> CriterionResult:
    t0 = time.time()
    cfg, trace = _shrink_run()
    dx = cfg.grid.spacing
    t_probe = 0.03
    law = wulff_radius_law(0.3, t_probe, 2, 0.0).radius
    r = _measured_radius(trace.mask_at(t_probe), cfg.phi.polar())
    tol_r = 3 * dx + 5 * cfg.h / law
    t_ext_expected = 0.3**2 / 2.0
    tol_ext = max(3 * cfg.h, 0.1 * t_ext_expected)
    t_ext = trace.extinction_time if trace.extinction_time is not None else math.inf
    passed = abs(r - law) <= tol_r and abs(t_ext - t_ext_expected) <= tol_ext
    return CriterionResult(
        3,
        "multi-step Wulff law",
        passed,
        r,
        law,
        tol_r,
        time.time() - t0,
        {
            "extinction_time": t_ext,
            "extinction_expected": t_ext_expected,
            "extinction_tolerance": tol_ext,
        },
    )


# ---------------------------------------------------------------------------
# Criterion 4: stationary forcing
# ---------------------------------------------------------------------------

def _stationary_run():
    if "stationary" not in _cache:
        phi = _phi()
        grid = Grid.centered(128, 1.0)
        R0 = 0.4
        cfg = FlowConfig(
            phi=phi,
            grid=grid,
            h=0.005,
            T=0.1,
            band=0.2,
            forcing=ForcingTerm(kind="constant", value=-(2 - 1) / R0),
        )
        _cache["stationary"] = (cfg, run_flow(wulff_mask(grid, phi, [0, 0], R0), cfg))
    return _cache["stationary"]


def criterion_4() -> CriterionResult:
    t0 = time.time()
    cfg, trace = _stationary_run()
    psi_polar = cfg.psi_polar
    drift = max(
        hausdorff_distance(m, trace.masks[0], psi_polar, band=0.15) for m in trace.masks[1:]
    )
    tol = 2 * cfg.grid.spacing + 2 * cfg.h
    return CriterionResult(
        4,
        "stationary forcing",
        drift <= tol,
        drift,
        0.0,
        tol,
        time.time() - t0,
        {"steps": len(trace.masks) - 1},
    )


# ---------------------------------------------------------------------------
# Criterion 5: discrete comparison on random nested pairs
# ---------------------------------------------------------------------------

def criterion_5(pairs: int = 100, steps: int = 20) -> CriterionResult:
    t0 = time.time()
    phi = _phi()
    grid = Grid.centered(32, 1.0)
    h = 0.004
    cfg = FlowConfig(phi=phi, grid=grid, h=h, T=steps * h, band=0.4)
    rng = np.random.default_rng(12345)
    violations = 0
    checked = 0
    for _ in range(pairs):
        m = int(rng.integers(1, 4))
        inner = np.zeros(grid.shape, dtype=bool)
        outer = np.zeros(grid.shape, dtype=bool)
        for _ in range(m):
            c = rng.uniform(-0.35, 0.35, size=2)
            r = float(rng.uniform(0.08, 0.25))
            grow = float(rng.uniform(0.05, 0.15))
            inner |= wulff_mask(grid, phi, c, r).cells
            outer |= wulff_mask(grid, phi, c, r + grow).cells
        if rng.uniform() < 0.5:
            c = rng.uniform(-0.35, 0.35, size=2)
            outer |= wulff_mask(grid, phi, c, float(rng.uniform(0.08, 0.2))).cells
        tr_e = run_flow(SetMask(grid, inner), cfg)
        tr_f = run_flow(SetMask(grid, outer), cfg)
        for k in range(steps + 1):
            t = k * h
            e = tr_e.mask_at(t).cells
            fm = tr_f.mask_at(t).cells
            checked += 1
            if np.any(e & ~fm):
                violations += 1
    return CriterionResult(
        5,
        "discrete comparison",
        violations == 0,
        float(violations),
        0.0,
        0.0,
        time.time() - t0,
        {"pairs": pairs, "steps": steps, "mask_checks": checked},
    )


# ---------------------------------------------------------------------------
# Criterion 6: Lipschitz bound across the criterion 2-4 runs
# ---------------------------------------------------------------------------

def criterion_6() -> CriterionResult:
    t0 = time.time()
    worst = 0.0
    for run in (_one_step_run, _shrink_run, _stationary_run):
        item = run()
        if run is _one_step_run:
            diags = [item[1][1]]
        else:
            diags = item[1].step_diagnostics
        for d in diags:
            if not d.short_circuit:
                worst = max(worst, d.max_psi_grad)
    bound = 1.0 + 0.0 + 0.05  # L = 0 for all three runs
    return CriterionResult(
        6,
        "Lipschitz bound",
        worst <= bound,
        worst,
        1.0,
        0.05,
        time.time() - t0,
    )


# ---------------------------------------------------------------------------
# Criterion 7: div z bound for a regular mobility
# ---------------------------------------------------------------------------

def criterion_7() -> CriterionResult:
    t0 = time.time()
    phi = _phi()
    eps0 = 0.2
    psi = regularize_mobility(EuclideanNorm(2), eps0, phi)
    grid = Grid.centered(96, 1.0)
    cfg = FlowConfig(
        phi=phi,
        psi=psi,
        grid=grid,
        h=0.004,
        T=0.04,
        band=0.3,
        mobility_interior_radius=eps0,
    )
    trace = run_flow(wulff_mask(grid, phi, [0, 0], 0.4), cfg)
    delta = 0.2
    vals = [
        d.max_divz[delta]
        for d in trace.step_diagnostics
        if not d.short_circuit and math.isfinite(d.max_divz.get(delta, math.nan))
    ]
    worst = max(vals)
    bound_value = (2 - 1) / min(eps0 * delta, 1.0)  # = 25 for N = 2
    bound = bound_value * 1.2
    return CriterionResult(
        7,
        "div z bound (regular mobility)",
        worst <= bound,
        worst,
        bound_value,
        bound - bound_value,
        time.time() - t0,
        {"steps": len(vals)},
    )


# ---------------------------------------------------------------------------
# Criterion 8: mobility stability (approximation Cauchy behaviour)
# ---------------------------------------------------------------------------

def criterion_8() -> CriterionResult:
    t0 = time.time()
    phi = _phi()
    psi = EuclideanNorm(2)
    grid = Grid.centered(64, 1.0)
    pts = grid.centers()
    u0 = ScalarField(grid, phi.polar().eval_field(pts) - 0.5)
    cfg = FlowConfig(phi=phi, grid=grid, h=0.004, T=0.02, band=0.3)
    levels = level_grid(u0, 64)
    dlam = float(np.max(np.diff(levels)))
    floor = 2e-4 + dlam + 2 * grid.spacing
    rep_a = solve_via_approximation(
        u0, psi, phi, [0.2, 0.1, 0.05, 0.025], cfg, levels=levels, acceptance_gap=floor
    )
    rep_b = solve_via_approximation(
        u0, psi, phi, [0.2, 0.025], cfg, levels=levels, acceptance_gap=floor
    )
    final_gap = compare_levelset_functions(rep_a.limit, rep_b.limit)
    diffs_ok = rep_a.converged
    passed = diffs_ok and final_gap <= 2 * floor
    measured = max(rep_a.diffs) if rep_a.diffs else 0.0
    return CriterionResult(
        8,
        "mobility stability",
        passed,
        measured,
        0.0,
        floor,
        time.time() - t0,
        {
            "diffs": rep_a.diffs,
            "floor": floor,
            "schedule_agreement": final_gap,
            "agreement_tolerance": 2 * floor,
        },
    )


# ---------------------------------------------------------------------------
# Criterion 9: level-set structure
# ---------------------------------------------------------------------------

def criterion_9() -> CriterionResult:
    t0 = time.time()
    phi = _phi()
    grid = Grid.centered(48, 1.0)
    pts = grid.centers()
    u0 = ScalarField(grid, phi.polar().eval_field(pts) - 0.5)
    cfg = FlowConfig(phi=phi, grid=grid, h=0.004, T=0.02, band=0.3)
    levels = level_grid(u0, 16)
    lsf = run_levelset(u0, cfg, levels)  # nesting verified internally (hard error)

    # monotone relabeling: piecewise-linear increasing f with a kink at 0
    def relabel(s):
        return np.where(s < 0, s, 2.0 * s)

    u0_r = ScalarField(grid, relabel(u0.values))
    lsf_r = run_levelset(u0_r, cfg, relabel(levels))
    relabel_exact = all(
        np.array_equal(lsf.level_index[j], lsf_r.level_index[j]) for j in range(len(lsf.times))
    )

    # comparison across initial data: u0 <= v0 => u <= v + dlam
    bump = 0.12 * (0.5 + 0.5 * np.cos(np.pi * pts[0]) * np.cos(np.pi * pts[1]))
    v0 = ScalarField(grid, u0.values + bump)
    levels_v = level_grid(v0, 16)
    lsf_v = run_levelset(v0, cfg, levels_v)
    dlam = max(float(np.max(np.diff(levels))), float(np.max(np.diff(levels_v))))
    probe = lsf.probe(cfg.band)
    comp_gap = 0.0
    for j in range(len(lsf.times)):
        sel = probe[j]
        comp_gap = max(comp_gap, float((lsf.values(j) - lsf_v.values(j))[sel].max()))
    comparison_ok = comp_gap <= dlam + 1e-12

    passed = relabel_exact and comparison_ok
    return CriterionResult(
        9,
        "level-set structure",
        passed,
        comp_gap,
        0.0,
        dlam,
        time.time() - t0,
        {"relabel_exact": relabel_exact, "nesting": "verified"},
    )


# ---------------------------------------------------------------------------
# Criterion 10: convergence rate in h
# ---------------------------------------------------------------------------

def convergence_ladder(
    h_values=(8e-3, 4e-3, 2e-3, 1e-3),
    cells: int = 256,
    half_width: float = 0.5,
    R0: float = 0.35,
    T: float = 0.036,
) -> list:
    """Wulff-shrink runs across an h ladder; errors against the radius law
    and against the per-step recursion, with a subcell crossing measurement
    of the final radius."""
    phi = _phi()
    grid = Grid.centered(cells, half_width)
    solver = SolverParams(alignment_tolerance=0.004)
    band = max(0.1, 5 * grid.spacing + 8 * max(h_values) + 0.01)
    rows = []
    for h in h_values:
        cfg = FlowConfig(phi=phi, grid=grid, h=h, T=T, band=band, solver=solver)
        trace = run_flow(wulff_mask(grid, phi, [0, 0], R0), cfg)
        # redo the final step with retained fields for a subcell crossing
        prev = trace.masks[-2]
        cfg_keep = FlowConfig(
            phi=phi, grid=grid, h=h, T=h, band=band, solver=solver, retain_fields=True
        )
        _, diag = atw_step(prev, cfg_keep, len(trace.masks) - 2)
        r_sim = _crossing_radius(diag.fields["u"])
        steps = len(trace.masks) - 1
        r_rec = R0
        for _ in range(steps):
            r_rec = wulff_step_radius(r_rec, OracleParams(N=2, R=max(r_rec, 1e-9), h=h)).radius
        t_end = steps * h
        r_law = wulff_radius_law(R0, t_end, 2, 0.0).radius
        rows.append(
            {
                "h": h,
                "dx": grid.spacing,
                "steps": steps,
                "radius_sim": r_sim,
                "radius_recursion": r_rec,
                "radius_law": r_law,
                "err_vs_law": abs(r_sim - r_law),
                "err_vs_recursion": abs(r_sim - r_rec),
            }
        )
    return rows


def spacing_ladder(
    dx_cells=(64, 128, 256),
    h: float = 4e-3,
    half_width: float = 0.5,
    R0: float = 0.35,
    T: float = 0.036,
) -> list:
    """Fixed h, refined grids: the radius error vs the per-step recursion
    shrinks with dx while the error vs the continuum law plateaus at the
    O(h) level (two-source error model)."""
    phi = _phi()
    rows = []
    for cells in dx_cells:
        grid = Grid.centered(cells, half_width)
        cfg = FlowConfig(
            phi=phi, grid=grid, h=h, T=T, band=0.1,
            solver=SolverParams(alignment_tolerance=0.004),
        )
        trace = run_flow(wulff_mask(grid, phi, [0, 0], R0), cfg)
        prev = trace.masks[-2]
        cfg_keep = FlowConfig(
            phi=phi, grid=grid, h=h, T=h, band=0.1,
            solver=SolverParams(alignment_tolerance=0.004), retain_fields=True,
        )
        _, diag = atw_step(prev, cfg_keep, len(trace.masks) - 2)
        r_sim = _crossing_radius(diag.fields["u"])
        steps = len(trace.masks) - 1
        r_rec = R0
        for _ in range(steps):
            r_rec = wulff_step_radius(r_rec, OracleParams(N=2, R=max(r_rec, 1e-9), h=h)).radius
        r_law = wulff_radius_law(R0, steps * h, 2, 0.0).radius
        rows.append(
            {
                "h": h,
                "dx": grid.spacing,
                "steps": steps,
                "radius_sim": r_sim,
                "radius_recursion": r_rec,
                "radius_law": r_law,
                "err_vs_law": abs(r_sim - r_law),
                "err_vs_recursion": abs(r_sim - r_rec),
            }
        )
    return rows


def fit_rate(hs, errs) -> float:
    hs = np.asarray(hs, dtype=float)
    errs = np.maximum(np.asarray(errs, dtype=float), 1e-15)
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    return float(slope)


def criterion_10() -> CriterionResult:
    """Rate of the radius error in h at fixed dx = 1/256.

    Known limitation, kept as an honest check: the per-step lattice bias of
    the mask-state scheme (order dx/6 for the crystal, ~sqrt(h)/60 for the
    smooth Wulff shape) accumulates over T/h steps and dominates the O(h)
    step bias of the recursion for h below ~1e-2 at this dx, so the fitted
    rate degrades at the small-h end of the ladder.  See the spacing ladder
    for the complementary fixed-h refinement picture.
    """
    t0 = time.time()
    rows = convergence_ladder()
    rate = fit_rate([r["h"] for r in rows], [r["err_vs_law"] for r in rows])
    passed = rate >= 0.9
    return CriterionResult(
        10,
        "convergence rate in h",
        passed,
        rate,
        1.0,
        0.1,
        time.time() - t0,
        {"ladder": rows},
    )


# ---------------------------------------------------------------------------
# Suite driver
# ---------------------------------------------------------------------------

CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
}


def run_suite(selector: str = "full", printer=print) -> tuple[list, bool]:
    if selector == "fast":
        ids = FAST
    elif selector == "full":
        ids = tuple(sorted(CRITERIA))
    else:
        raise ValueError(f"unknown suite selector '{selector}' (use 'fast' or 'full')")
    results = []
    for cid in ids:
        res = CRITERIA[cid]()
        results.append(res)
        if printer:
            printer(res.line())
    return results, all(r.passed for r in results)
