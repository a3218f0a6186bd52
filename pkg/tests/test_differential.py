import numpy as np
import pytest

from ccpde.differential import export_profile_csv, remainder_profile, x_differential
from ccpde.errors import StencilError
from ccpde.frames import euclidean, heisenberg1
from ccpde.grid import Grid, x_gradient


@pytest.fixture
def heis_grid():
    return Grid(heisenberg1(), (33, 33, 33), box=((-1, 1), (-1, 1), (-1, 1)))


def test_differential_of_t_at_unit_x(heis_grid):
    # u = t on the Heisenberg group at (1, 0, 0): Xu = (0, 1), and the
    # X-differential acts as L(z) = 0.5 z2 + 0.5 z3 there
    g = Grid(heisenberg1(), (33, 33, 33), box=((0, 2), (-1, 1), (-1, 1)))
    u = g.points[..., 2]
    L = x_differential(g, u, (1.0, 0.0, 0.0))
    assert np.allclose(L.L, [0.0, 0.5, 0.5], atol=1e-10)
    assert np.isclose(L((0.0, 2.0, 0.0)), 1.0)


def test_differential_consistency_with_gradient(heis_grid):
    g = heis_grid
    X = g.points
    u = np.sin(X[..., 0]) * X[..., 1] + 0.3 * X[..., 2]
    x0 = (0.25, -0.25, 0.0)
    L = x_differential(g, u, x0)
    idx = tuple(int(round((c + 1) / g.spacing[k])) for k, c in enumerate(x0))
    Xu = x_gradient(g, u)[idx]
    # applying L to the columns of C(x0)^T recovers Xu(x0)
    C = g.coeff[idx]
    recovered = np.array([L(C[j]) for j in range(g.m)])
    assert np.allclose(recovered, Xu, atol=1e-10)


def test_differential_requires_interior_point(heis_grid):
    u = heis_grid.points[..., 0]
    with pytest.raises(StencilError):
        x_differential(heis_grid, u, (1.0, 0.0, 0.0))  # box edge


def test_affine_remainder_identically_zero(heis_grid):
    g = heis_grid
    X = g.points
    u = 0.7 * X[..., 0] - 0.2 * X[..., 1]
    rows = remainder_profile(g, u, (0.0, 0.0, 0.0), [0.4, 0.2])
    assert rows
    for _, worst, status in rows:
        if status == "ok":
            assert worst <= 1e-10


def test_remainder_profile_decreases_for_smooth_field():
    # quadratic remainder gives worst_ratio ~ r; radii sit above the 3h/r
    # floor so every row carries an honest ratio
    g = Grid(euclidean(2), (129, 129), box=((-1, 1), (-1, 1)))
    X = g.points
    u = X[..., 0] ** 2 + 0.5 * X[..., 1] ** 2
    rows = remainder_profile(g, u, (0.0, 0.0), [0.6, 0.4, 0.25])
    ratios = [w for _, w, s in rows if s == "ok"]
    assert len(ratios) >= 2
    assert all(b <= a + 1e-12 for a, b in zip(ratios, ratios[1:]))


def test_profile_csv_export(tmp_path):
    g = Grid(euclidean(2), (33, 33), box=((-1, 1), (-1, 1)))
    u = g.points[..., 0] ** 2
    rows = remainder_profile(g, u, (0.0, 0.0), [0.4, 0.2])
    path = tmp_path / "profile.csv"
    export_profile_csv(rows, path)
    text = path.read_text().strip().splitlines()
    assert text[0].startswith("r,")
    assert len(text) == len(rows) + 1
