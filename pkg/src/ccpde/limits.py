"""Large-p harness: energy sweeps, limit comparisons, and AMLE checks.

p_sweep solves the Dirichlet problem along an increasing p-list with warm
starts and records normalized energies and distances to the limit candidate
(the boundary-distance field when the source is strictly positive, the
largest-p solution otherwise).  The remaining operations turn those records
into verdicts: energy monotonicity, two-sided limit bounds, the gradient
bound for boundary-value problems, sub-box minimality, and the residuals of
the limiting Eikonal / infinity-Laplace system.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import binary_dilation, generate_binary_structure

from .errors import ParameterError
from .grid import Grid, x_gradient
from .ppoisson import SolveConfig, SolveReport, _data_field, energy, solve_p_poisson
from .viscosity import eikonal_residual, infinity_laplacian

DEFAULT_P_LIST = (4, 8, 16, 32, 64)
TOL_MONO_REL = 1e-6
TOL_LIP = 0.05
TOL_AMLE = 0.05


@dataclass
class SweepReport:
    """Per-p records of a sweep plus the limit candidate."""

    grid: Grid
    mode: str  # 'source' (f >= 0, zero boundary) or 'boundary' (f = 0)
    p_list: list
    f: np.ndarray
    g: np.ndarray
    solves: list  # SolveReport per p
    E_p: list
    N_p: list
    sup_gap: list
    runtime_s: list
    limit_candidate: np.ndarray
    limit_descriptor: str

    def to_dict(self) -> dict:
        return {
            "frame": self.grid.frame.name,
            "resolution": list(self.grid.resolution),
            "mode": self.mode,
            "p": list(self.p_list),
            "E_p": [float(e) for e in self.E_p],
            "N_p": [float(nn) for nn in self.N_p],
            "sup_gap": [float(s) for s in self.sup_gap],
            "runtime_s": [float(t) for t in self.runtime_s],
            "limit_candidate": self.limit_descriptor,
        }


def _domain_volume(grid: Grid) -> float:
    return grid.cell_volume * int(grid.interior_mask.sum())


def p_sweep(
    grid: Grid,
    f=None,
    g=None,
    p_list=DEFAULT_P_LIST,
    cfg: SolveConfig | None = None,
    limit_candidate=None,
) -> SweepReport:
    """Warm-started solves along p_list with per-p limit statistics.

    Source mode (f nonzero): f must be >= 0 and g must vanish; the limit
    candidate defaults to the boundary-distance field when f > 0 on the
    whole interior.  Boundary mode (f absent/zero): g supplies Dirichlet
    data and the candidate is the largest-p solution.
    """
    p_list = [float(p) for p in p_list]
    if any(a >= b for a, b in zip(p_list, p_list[1:])) or not p_list:
        raise ParameterError("p_list must be strictly increasing and non-empty")
    if p_list[0] < 4:
        raise ParameterError("sweeps start at p >= 4 (limit statements need large p)")
    f_field = _data_field(grid, f)
    g_field = _data_field(grid, g)
    source_mode = bool(np.any(f_field[grid.interior_mask] != 0.0))
    if source_mode:
        if np.any(f_field[grid.interior_mask] < 0.0):
            raise ParameterError("source mode requires f >= 0 (sign hypothesis of the limit)")
        if np.any(g_field[grid.boundary_mask] != 0.0):
            raise ParameterError("source mode requires zero boundary data")

    solves, eps, nps, gaps, times = [], [], [], [], []
    warm = None
    vol = _domain_volume(grid)
    for p in p_list:
        t0 = time.perf_counter()
        solve_cfg = cfg if warm is None else _with_warm_start(cfg, warm)
        rep = solve_p_poisson(grid, p, f_field, g_field, solve_cfg)
        warm = rep.u
        solves.append(rep)
        eps.append(rep.E_p)
        nps.append((max(rep.E_p, 0.0) / vol) ** ((p - 1.0) / p))
        times.append(time.perf_counter() - t0)

    if limit_candidate is not None:
        candidate = grid.check_scalar(
            limit_candidate.d if hasattr(limit_candidate, "d") else limit_candidate
        )
        descriptor = "supplied"
    elif source_mode and np.all(f_field[grid.interior_mask] > 0.0):
        from .eikonal import solve_eikonal

        candidate = solve_eikonal(grid, "boundary").d
        descriptor = "boundary_distance"
    else:
        candidate = solves[-1].u
        descriptor = f"u_p at p={p_list[-1]:g}"
    dm = grid.domain_mask
    gaps = [float(np.abs(rep.u - candidate)[dm].max()) for rep in solves]

    return SweepReport(
        grid=grid,
        mode="source" if source_mode else "boundary",
        p_list=p_list,
        f=f_field,
        g=g_field,
        solves=solves,
        E_p=eps,
        N_p=nps,
        sup_gap=gaps,
        runtime_s=times,
        limit_candidate=candidate,
        limit_descriptor=descriptor,
    )


def _with_warm_start(cfg: SolveConfig | None, warm) -> SolveConfig:
    base = cfg or SolveConfig()
    return SolveConfig(
        eps_schedule=base.eps_schedule,
        eps_final=base.eps_final,
        max_iters=base.max_iters,
        grad_tol=base.grad_tol,
        backtrack=base.backtrack,
        decrease=base.decrease,
        warm_start=warm,
    )


def monotonicity_check(report: SweepReport, tol_rel: float = TOL_MONO_REL) -> dict:
    """Normalized energies must not increase along the sweep (small slack)."""
    violations = []
    for (pa, na), (pb, nb) in zip(
        zip(report.p_list, report.N_p), zip(report.p_list[1:], report.N_p[1:])
    ):
        slack = tol_rel * (1.0 + nb)
        if nb > na + slack:
            violations.append({"p_from": pa, "p_to": pb, "increase": nb - na, "slack": slack})
    return {"passed": not violations, "violations": violations, "N_p": list(report.N_p)}


def limit_compare(report: SweepReport, target=None, tol_limit: float | None = None) -> dict:
    """Per-p distance to the target plus the two-sided bound and energy gap.

    The limiting energy is represented by the load integral of the largest-p
    solution (no rate is assumed, so nothing is extrapolated); einf_gap
    compares it with the load integral of the target.
    """
    grid = report.grid
    if target is None:
        target = report.limit_candidate
    target = grid.check_scalar(target.d if hasattr(target, "d") else target)
    if tol_limit is None:
        p_max = report.p_list[-1]
        tail = float(np.abs(target[grid.domain_mask]).max()) / p_max
        tol_limit = 3.0 * grid.h + tail
    dm = grid.domain_mask
    sup_gaps = [float(np.abs(rep.u - target)[dm].max()) for rep in report.solves]

    load_last = _load_integral(grid, report.f, report.solves[-1].u)
    load_target = _load_integral(grid, report.f, target)
    einf_gap = abs(load_last - load_target)

    lower_ok = all(float(rep.u[dm].min()) >= -tol_limit for rep in report.solves)
    upper_worst = float((report.solves[-1].u - target)[dm].max())
    return {
        "sup_gaps": sup_gaps,
        "einf_gap": einf_gap,
        "lower_bound_ok": bool(lower_ok),
        "upper_bound_ok": bool(upper_worst <= tol_limit),
        "upper_worst": upper_worst,
        "tol_limit": float(tol_limit),
    }


def _load_integral(grid: Grid, f_field, u) -> float:
    mask = grid.interior_mask
    return grid.cell_volume * float((f_field[mask] * u[mask]).sum())


def lipschitz_bound_check(report: SweepReport, tol_lip: float = TOL_LIP) -> dict:
    """sup |Xu_{p_max}| <= sup |Xg| + tol, plus the per-p energy bound.

    Requires boundary mode with g given on the whole grid so its gradient
    is computable.
    """
    if report.mode != "boundary":
        raise ParameterError("gradient bound applies to boundary mode sweeps")
    grid = report.grid
    g = report.g
    if not np.all(np.isfinite(g)):
        raise ParameterError("g must be supplied (finite) on the whole grid")
    interior = grid.interior_mask
    xg_sup = float(np.linalg.norm(x_gradient(grid, g), axis=-1)[interior].max())
    xu_sup = float(
        np.linalg.norm(x_gradient(grid, report.solves[-1].u), axis=-1)[interior].max()
    )
    margin = xg_sup + tol_lip - xu_sup

    energy_bounds = []
    for p, rep in zip(report.p_list, report.solves):
        eu = rep.E_p
        eg = p * energy(grid, g, p, 0.0, eps=0.0)
        energy_bounds.append(
            {"p": p, "E_u": eu, "E_g": eg, "ok": bool(eu <= eg + 1e-8 * (1.0 + abs(eg)))}
        )
    return {
        "passed": bool(margin >= 0.0 and all(b["ok"] for b in energy_bounds)),
        "xg_sup": xg_sup,
        "xu_sup": xu_sup,
        "margin": margin,
        "tol_lip": tol_lip,
        "energy_bounds": energy_bounds,
    }


def _sub_grid(grid: Grid, sub_box):
    """Node-aligned sub-grid strictly inside the parent domain."""
    sub_box = [(float(a), float(b)) for a, b in sub_box]
    if len(sub_box) != grid.n:
        raise ParameterError("sub-box dimension mismatch")
    slices, box = [], []
    for k, (a, b) in enumerate(sub_box):
        lo, hi = grid.box[k]
        i0 = int(np.ceil((a - lo) / grid.spacing[k] - 1e-9))
        i1 = int(np.floor((b - lo) / grid.spacing[k] + 1e-9))
        if i0 < 1 or i1 > grid.shape[k] - 2 or i1 - i0 < 2:
            raise ParameterError(
                f"sub-box {sub_box} must be strictly interior with >= 3 nodes per axis"
            )
        slices.append(slice(i0, i1 + 1))
        box.append((lo + i0 * grid.spacing[k], lo + i1 * grid.spacing[k]))
    sub = Grid(
        grid.frame.with_box(box) if hasattr(grid.frame, "with_box") else grid.frame,
        [s.stop - s.start for s in slices],
        box=box,
    )
    return sub, tuple(slices)


def amle_spot_check(
    grid: Grid,
    u_inf,
    subdomains,
    p_check: float = 32.0,
    tol_amle: float = TOL_AMLE,
    cfg: SolveConfig | None = None,
) -> dict:
    """Local minimality: on each sub-box, resolving with u_inf's own trace
    must not find a competitor with smaller gradient sup-norm."""
    if p_check < 32:
        raise ParameterError("p_check must be >= 32 for a meaningful gradient sup-norm")
    u_inf = grid.check_scalar(u_inf)
    results = []
    for sub_box in subdomains:
        sub, slices = _sub_grid(grid, sub_box)
        trace = u_inf[slices]
        rep = solve_p_poisson(sub, p_check, 0.0, trace, cfg)
        interior = sub.interior_mask
        xu = float(np.linalg.norm(x_gradient(sub, trace), axis=-1)[interior].max())
        xv = float(np.linalg.norm(x_gradient(sub, rep.u), axis=-1)[interior].max())
        margin = xv + tol_amle - xu
        results.append(
            {"sub_box": [list(map(float, ab)) for ab in sub_box],
             "xu_sup": xu, "xv_sup": xv, "margin": margin, "ok": bool(margin >= 0.0)}
        )
    return {"passed": all(r["ok"] for r in results), "subdomains": results, "tol_amle": tol_amle}


def limit_system_residuals(grid: Grid, u_inf, f) -> dict:
    """Eikonal residual on {f > 0} and infinity-Laplacian off its closure.

    Masks are restricted to nodes two cells inside; a two-cell buffer around
    {f > 0} separates the regions.  Thresholds belong to the caller.
    """
    u_inf = grid.check_scalar(u_inf)
    f_field = _data_field(grid, f)
    deep = grid.deep_interior_mask(2)
    pos = f_field > 0.0
    struct = generate_binary_structure(grid.n, 1)
    buffered = binary_dilation(pos, structure=struct, iterations=2)
    return {
        "eikonal_field": eikonal_residual(grid, u_inf),
        "inf_lap_field": infinity_laplacian(grid, u_inf),
        "eikonal_mask": pos & deep,
        "inf_lap_mask": (~buffered) & deep,
    }
