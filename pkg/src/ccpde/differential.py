"""First-order horizontal differentials and remainder profiles.

The differential of u at a node is represented by the covector
L = Xu(x) * Ctilde(x), so that L applied to a displacement z approximates
u(x+z) - u(x) to first order in the control distance.  remainder_profile
measures exactly that: the worst normalized Taylor remainder over annuli of
the numerically computed control distance around the base point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, StencilError
from .frames import left_inverse
from .grid import Grid, x_gradient

FLOOR_FACTOR = 3.0  # ratios below FLOOR_FACTOR * h / r are discretization noise


@dataclass(frozen=True)
class XDifferential:
    """Covector representing the horizontal differential at a node."""

    point: tuple
    L: np.ndarray  # (n,)
    Xu: np.ndarray  # (m,)
    c_tilde: np.ndarray  # (m, n)

    def __call__(self, z) -> float:
        return float(self.L @ np.asarray(z, dtype=float))


def _node_index(grid: Grid, x) -> tuple:
    """Resolve a node index tuple or a coordinate point to an index."""
    x = np.asarray(x)
    if x.dtype.kind in "iu":
        idx = tuple(int(k) for k in x)
        if len(idx) != grid.n or not all(0 <= k < grid.shape[a] for a, k in enumerate(idx)):
            raise ParameterError(f"node index {idx} out of range for {grid.shape}")
        return idx
    pt = np.asarray(x, dtype=float)
    if pt.shape != (grid.n,):
        raise ParameterError(f"expected a node index or point of length {grid.n}")
    idx = []
    for k in range(grid.n):
        a, b = grid.box[k]
        j = int(round((pt[k] - a) / grid.spacing[k]))
        if not (0 <= j < grid.shape[k]) or abs(a + j * grid.spacing[k] - pt[k]) > 1e-9 * (b - a):
            raise ParameterError(f"point {tuple(pt)} is not a grid node")
        idx.append(j)
    return tuple(idx)


def x_differential(grid: Grid, u, x) -> XDifferential:
    """Differential covector L = Xu(x) * Ctilde(x) at an interior node.

    Raises SingularFrameError where the frame loses pointwise independence
    (left_inverse performs the check) and StencilError on boundary nodes.
    """
    idx = _node_index(grid, x)
    if not grid.interior_mask[idx]:
        raise StencilError(f"node {idx} is not interior")
    pt = grid.points[idx]
    ct = left_inverse(grid.frame, pt)
    Xu = x_gradient(grid, u)[idx]
    return XDifferential(point=tuple(pt), L=Xu @ ct, Xu=Xu, c_tilde=ct)


def remainder_profile(grid: Grid, u, x, radii, distance=None) -> list:
    """Worst normalized Taylor remainders over control-distance annuli.

    For each r in radii (decreasing) the annulus is {y: d(x,y) in [r, 2r]}
    with d the point-source control distance (computed here unless a
    DistanceField is passed in).  Each row is (r, worst_ratio, status) with
    status 'ok', 'floor' when the ratio is below the discretization floor
    FLOOR_FACTOR*h/r, or 'empty' when the annulus contains no nodes.
    """
    from .eikonal import solve_eikonal

    u = grid.check_scalar(u)
    radii = [float(r) for r in radii]
    if any(a < b for a, b in zip(radii, radii[1:])):
        raise ParameterError("radii must be decreasing")
    diff = x_differential(grid, u, x)
    idx = _node_index(grid, x)
    base = grid.points[idx]
    d = distance if distance is not None else solve_eikonal(grid, base)
    dvals = d.d if hasattr(d, "d") else grid.check_scalar(d)

    rows = []
    for r in radii:
        ann = (dvals >= r) & (dvals <= 2.0 * r) & grid.domain_mask
        ann[idx] = False
        if not ann.any():
            rows.append((r, float("nan"), "empty"))
            continue
        z = grid.points[ann] - base
        rem = np.abs(u[ann] - u[idx] - z @ diff.L)
        ratio = float((rem / dvals[ann]).max())
        floor = FLOOR_FACTOR * grid.h / r
        rows.append((r, ratio, "floor" if ratio < floor else "ok"))
    return rows


def export_profile_csv(rows, path):
    """Write remainder-profile rows as `r,worst_ratio,status`."""
    with open(path, "w") as fh:
        fh.write("r,worst_ratio,status\n")
        for r, ratio, status in rows:
            fh.write(f"{r:.17g},{ratio:.17g},{status}\n")
