import numpy as np
import pytest

from ccpde.errors import ParameterError
from ccpde.frames import euclidean, heisenberg1
from ccpde.grid import Grid
from ccpde.ppoisson import (
    SolveConfig,
    comparison_check,
    dirichlet_flux_check,
    energy,
    ep_identities,
    solve_p_poisson,
)


def exact_1d(x, p):
    """Minimizer for -(|u'|^{p-2} u')' = 1 on (0,1) with zero boundary data."""
    q = p / (p - 1.0)
    return (p - 1.0) / p * (0.5 ** q - np.abs(x - 0.5) ** q)


def test_1d_closed_form_p4():
    g = Grid(euclidean(1), 129, box=((0.0, 1.0),))
    rep = solve_p_poisson(g, 4.0, 1.0, 0.0)
    exact = exact_1d(g.points[..., 0], 4.0)
    assert np.abs(rep.u - exact).max() <= 1e-3
    assert rep.converged


def test_affine_data_reproduced_exactly():
    g = Grid(euclidean(2), (17, 17), box=((0, 1), (0, 1)))
    aff = 1.2 * g.points[..., 0] - 0.7 * g.points[..., 1] + 0.3
    rep = solve_p_poisson(g, 8.0, 0.0, aff)
    assert np.abs(rep.u - aff).max() <= 1e-8


def test_constant_data_reproduced_exactly():
    g = Grid(euclidean(2), (17, 17), box=((0, 1), (0, 1)))
    rep = solve_p_poisson(g, 4.0, 0.0, 2.5)
    assert np.abs(rep.u - 2.5).max() <= 1e-10


def test_energy_identities_small_gap():
    g = Grid(euclidean(2), (33, 33), box=((0, 1), (0, 1)))
    f = g.constant_field(1.0)
    rep = solve_p_poisson(g, 4.0, f, 0.0)
    gap_weak, gap_thompson = ep_identities(rep, f)
    assert abs(gap_weak) <= 1e-6
    assert abs(gap_thompson) <= 1e-6


def test_solution_positive_for_positive_source():
    g = Grid(euclidean(2), (33, 33), box=((0, 1), (0, 1)))
    rep = solve_p_poisson(g, 4.0, 1.0, 0.0)
    assert rep.u[g.interior_mask].min() > 0.0
    assert np.abs(rep.u[g.boundary_mask]).max() == 0.0


def test_energy_of_zero_field_is_load_only():
    g = Grid(euclidean(2), (17, 17), box=((0, 1), (0, 1)))
    assert energy(g, g.constant_field(0.0), 4.0, 1.0) == 0.0


def test_warm_start_agrees_with_cold_start():
    g = Grid(euclidean(2), (33, 33), box=((0, 1), (0, 1)))
    cold4 = solve_p_poisson(g, 4.0, 1.0, 0.0)
    cold8 = solve_p_poisson(g, 8.0, 1.0, 0.0)
    warm8 = solve_p_poisson(g, 8.0, 1.0, 0.0, SolveConfig(warm_start=cold4.u))
    assert np.abs(warm8.u - cold8.u).max() <= 1e-6


def test_comparison_principle_ordered_pair():
    g = Grid(euclidean(2), (33, 33), box=((0, 1), (0, 1)))
    X = g.points
    glo = np.sin(2 * np.pi * X[..., 0]) * 0.2
    ghi = glo + 0.3 + 0.1 * X[..., 1]
    lo = solve_p_poisson(g, 4.0, 1.0, glo)
    hi = solve_p_poisson(g, 4.0, 1.0, ghi)
    verdict = comparison_check(lo, hi)
    assert verdict["passed"], verdict


def test_comparison_check_requires_matching_p():
    g = Grid(euclidean(2), (17, 17), box=((0, 1), (0, 1)))
    a = solve_p_poisson(g, 4.0, 1.0, 0.0)
    b = solve_p_poisson(g, 8.0, 1.0, 0.0)
    with pytest.raises(ParameterError):
        comparison_check(a, b)


def test_flux_check_1d_closed_form():
    # V = |u'|^{p-2} u' = 1/2 - x exactly, so -V' = 1 up to stencil error
    g = Grid(euclidean(1), 129, box=((0.0, 1.0),))
    f = g.constant_field(1.0)
    rep = solve_p_poisson(g, 4.0, f, 0.0)
    flux_residual, gap = dirichlet_flux_check(rep, f)
    assert flux_residual <= 5.0 * g.h
    assert gap <= 1e-8


def test_report_serialization_round():
    g = Grid(euclidean(2), (17, 17), box=((0, 1), (0, 1)))
    rep = solve_p_poisson(g, 4.0, 1.0, 0.0)
    d = rep.to_dict()
    assert d["p"] == 4.0
    assert d["converged"] is True
    assert d["E_p"] > 0.0
    assert d["iterations"] >= 1


def test_heisenberg_solve_converges():
    g = Grid(heisenberg1(), (17, 17, 17), box=((-1, 1), (-1, 1), (-1, 1)))
    rep = solve_p_poisson(g, 4.0, 1.0, 0.0)
    assert rep.converged
    assert rep.E_p > 0.0
    gap_weak, _ = ep_identities(rep, g.constant_field(1.0))
    assert abs(gap_weak) <= 1e-6


def test_invalid_eps_schedule_rejected():
    g = Grid(euclidean(2), (17, 17), box=((0, 1), (0, 1)))
    with pytest.raises(ParameterError):
        solve_p_poisson(g, 4.0, 1.0, 0.0, SolveConfig(eps_schedule=(1e-3, 1e-1)))
