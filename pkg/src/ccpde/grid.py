"""Uniform tensor grids and discrete horizontal calculus.

Scalar fields are numpy arrays of shape ``grid.shape``; horizontal fields
carry a trailing component axis of length m.  The horizontal gradient uses
centered differences (first-order one-sided at box-edge nodes) and the
horizontal divergence is its exact negative adjoint under the h^n-weighted
interior inner product, so summation by parts holds to machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.ndimage import binary_dilation, binary_erosion, generate_binary_structure

from .errors import ParameterError, StencilError
from .frames import Frame


def _diff1d(N: int, h: float, kind: str) -> sp.csr_matrix:
    """1D difference matrix: 'c' centered, 'f' forward, 'b' backward.

    Edge rows fall back to the available one-sided stencil so every kind
    is exact on affine data at every node.
    """
    if N < 3:
        raise ParameterError("need at least 3 nodes per axis")
    D = sp.lil_matrix((N, N))
    if kind == "c":
        for k in range(1, N - 1):
            D[k, k - 1] = -0.5 / h
            D[k, k + 1] = 0.5 / h
        D[0, 0], D[0, 1] = -1.0 / h, 1.0 / h
        D[N - 1, N - 2], D[N - 1, N - 1] = -1.0 / h, 1.0 / h
    elif kind == "f":
        for k in range(N - 1):
            D[k, k] = -1.0 / h
            D[k, k + 1] = 1.0 / h
        D[N - 1, N - 2], D[N - 1, N - 1] = -1.0 / h, 1.0 / h
    elif kind == "b":
        for k in range(1, N):
            D[k, k - 1] = -1.0 / h
            D[k, k] = 1.0 / h
        D[0, 0], D[0, 1] = -1.0 / h, 1.0 / h
    else:
        raise ParameterError(f"unknown difference kind {kind!r}")
    return D.tocsr()


class Grid:
    """Uniform tensor-product grid tied to a frame.

    Parameters
    ----------
    frame : Frame
    resolution : int or sequence of ints, nodes per axis (>= 3).
    box : optional override of the frame's working box.
    mask : optional boolean array over nodes (or callable on points)
        carving the domain out of the box; the boundary then consists of
        box-edge domain nodes and masked-out neighbors of domain nodes.
    """

    def __init__(self, frame: Frame, resolution, box=None, mask=None):
        self.frame = frame
        n = frame.n
        if np.isscalar(resolution):
            resolution = [int(resolution)] * n
        self.resolution = tuple(int(r) for r in resolution)
        if len(self.resolution) != n or any(r < 3 for r in self.resolution):
            raise ParameterError(f"resolution {resolution} invalid for n={n}")
        self.box = tuple((float(a), float(b)) for a, b in (box or frame.box))
        if len(self.box) != n:
            raise ParameterError("box dimension mismatch")
        self.shape = self.resolution
        self.n = n
        self.m = frame.m
        self.spacing = np.array(
            [(b - a) / (r - 1) for (a, b), r in zip(self.box, self.resolution)]
        )
        self.h = float(self.spacing.min())
        self.cell_volume = float(np.prod(self.spacing))
        self.axes = [
            np.linspace(a, b, r) for (a, b), r in zip(self.box, self.resolution)
        ]
        mesh = np.meshgrid(*self.axes, indexing="ij")
        self.points = np.stack(mesh, axis=-1)  # (*shape, n)
        self.num_nodes = int(np.prod(self.shape))

        # coefficient matrices at every node, (*shape, m, n)
        self.coeff = np.asarray(frame.coeff(self.points), dtype=float)
        if self.coeff.shape != self.shape + (self.m, n):
            raise ParameterError("frame.coeff does not broadcast over point arrays")

        edge = np.zeros(self.shape, dtype=bool)
        for ax in range(n):
            sl = [slice(None)] * n
            sl[ax] = 0
            edge[tuple(sl)] = True
            sl[ax] = -1
            edge[tuple(sl)] = True

        if mask is None:
            domain = np.ones(self.shape, dtype=bool)
        elif callable(mask):
            domain = np.asarray(mask(self.points), dtype=bool)
        else:
            domain = np.asarray(mask, dtype=bool)
            if domain.shape != self.shape:
                raise ParameterError("mask shape mismatch")

        struct = generate_binary_structure(n, 1)
        inner = binary_erosion(domain, structure=struct, border_value=0)
        self.interior_mask = domain & ~edge & inner
        adjacent = binary_dilation(self.interior_mask, structure=struct) & ~self.interior_mask
        self.boundary_mask = (domain & ~self.interior_mask & (edge | ~inner)) | (~domain & adjacent)
        self.domain_mask = self.interior_mask | self.boundary_mask
        if not self.interior_mask.any():
            raise ParameterError("mask leaves no interior nodes")

        self._diff_cache: dict = {}
        self._op_cache: dict = {}
        self._interior_idx = np.flatnonzero(self.interior_mask.ravel())

    # -- sparse operator plumbing ------------------------------------------

    def _lifted_diff(self, axis: int, kind: str) -> sp.csr_matrix:
        key = (axis, kind)
        if key not in self._diff_cache:
            D = _diff1d(self.resolution[axis], self.spacing[axis], kind)
            left = int(np.prod(self.resolution[:axis], dtype=int))
            right = int(np.prod(self.resolution[axis + 1:], dtype=int))
            op = sp.kron(sp.identity(left), sp.kron(D, sp.identity(right)))
            self._diff_cache[key] = op.tocsr()
        return self._diff_cache[key]

    def gradient_operator(self, signs=None) -> sp.csr_matrix:
        """Sparse map u (N,) -> Xu stacked component-major (m*N,).

        signs=None gives the centered scheme; a tuple in {'f','b'}^n picks
        one-sided differences per axis (used by the energy solver).
        """
        key = "c" if signs is None else tuple(signs)
        if key not in self._op_cache:
            kinds = ["c"] * self.n if signs is None else list(signs)
            blocks = []
            for j in range(self.m):
                op = None
                for i in range(self.n):
                    cji = self.coeff[..., j, i].ravel()
                    if not np.any(cji):
                        continue
                    term = sp.diags(cji) @ self._lifted_diff(i, kinds[i])
                    op = term if op is None else op + term
                if op is None:
                    op = sp.csr_matrix((self.num_nodes, self.num_nodes))
                blocks.append(op)
            self._op_cache[key] = sp.vstack(blocks).tocsr()
        return self._op_cache[key]

    def deep_interior_mask(self, depth: int = 2) -> np.ndarray:
        """Interior nodes at least `depth` cells from any non-interior node."""
        struct = generate_binary_structure(self.n, 1)
        return binary_erosion(
            self.interior_mask, structure=struct, iterations=depth, border_value=0
        )

    # -- field helpers ------------------------------------------------------

    def constant_field(self, value: float) -> np.ndarray:
        return np.full(self.shape, float(value))

    def field_from_function(self, fn) -> np.ndarray:
        return np.asarray(fn(self.points), dtype=float).reshape(self.shape)

    def check_scalar(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != self.shape:
            raise ParameterError(f"scalar field shape {u.shape} != {self.shape}")
        return u

    def check_horizontal(self, F) -> np.ndarray:
        F = np.asarray(F, dtype=float)
        if F.shape != self.shape + (self.m,):
            raise ParameterError(f"horizontal field shape {F.shape} != {self.shape + (self.m,)}")
        return F


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------


def x_gradient(grid: Grid, u) -> np.ndarray:
    """Horizontal gradient Xu, shape (*shape, m), centered differences."""
    u = grid.check_scalar(u)
    A = grid.gradient_operator()
    Xu = (A @ u.ravel()).reshape((grid.m,) + grid.shape)
    return np.moveaxis(Xu, 0, -1)


def x_divergence(grid: Grid, F) -> np.ndarray:
    """Exact negative adjoint of x_gradient under the interior inner product.

    Values are meaningful on interior nodes (zero elsewhere); for trace-zero
    u the identity  sum_int Xu.F h^n = -sum_int u div_X(F) h^n  is exact.
    """
    F = grid.check_horizontal(F)
    A = grid.gradient_operator()
    Fm = np.moveaxis(F, -1, 0).copy()
    Fm[:, ~grid.interior_mask] = 0.0
    div = -(A.T @ Fm.reshape(grid.m * grid.num_nodes))
    out = div.reshape(grid.shape)
    out[~grid.interior_mask] = 0.0
    return out


def x_hessian(grid: Grid, u) -> np.ndarray:
    """Symmetrized second horizontal derivatives, shape (*shape, m, m).

    Built by composing x_gradient with itself; trustworthy only on nodes
    at least two cells inside (see deep_interior_mask).
    """
    Xu = x_gradient(grid, u)
    H = np.empty(grid.shape + (grid.m, grid.m))
    for j in range(grid.m):
        H[..., :, j] = x_gradient(grid, Xu[..., j])
    return 0.5 * (H + np.swapaxes(H, -1, -2))


def x_hessian_at(grid: Grid, u, index) -> np.ndarray:
    """Hessian at a single node; raises StencilError near the boundary."""
    if not grid.deep_interior_mask(2)[tuple(index)]:
        raise StencilError(f"node {tuple(index)} is within 2 cells of the boundary")
    return x_hessian(grid, u)[tuple(index)]


def integrate(grid: Grid, u) -> float:
    """h^n-weighted sum of u over interior nodes."""
    u = grid.check_scalar(u)
    return float(grid.cell_volume * u[grid.interior_mask].sum())


def pointwise_norm(grid: Grid, F) -> np.ndarray:
    """Euclidean length |F| of a horizontal field (scalar fields pass through)."""
    F = np.asarray(F, dtype=float)
    if F.shape == grid.shape:
        return np.abs(F)
    return np.linalg.norm(grid.check_horizontal(F), axis=-1)


def lp_norm(grid: Grid, F, p: float) -> float:
    """Interior L^p norm of a scalar or horizontal field, p in [1, inf)."""
    if not (1 <= p < np.inf):
        raise ParameterError(f"p must be in [1, inf), got {p}")
    mag = pointwise_norm(grid, F)[grid.interior_mask]
    if mag.size == 0:
        return 0.0
    top = mag.max()
    if top == 0.0:
        return 0.0
    # scale before powering so large p does not overflow
    return float(top * (grid.cell_volume * ((mag / top) ** p).sum()) ** (1.0 / p))


def sup_norm(grid: Grid, u) -> float:
    """Max of |u| (or |F| for horizontal fields) over all domain nodes."""
    mag = pointwise_norm(grid, u)
    return float(mag[grid.domain_mask].max())


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------


def export_scalar_csv(grid: Grid, u, path, extra_columns=None):
    """Write `x1,...,xn,value` rows (lexicographic node order, 17 digits).

    extra_columns: optional dict name -> field, appended as 0/1 or float
    columns (used for residual and ridge masks).
    """
    u = grid.check_scalar(u)
    extra = extra_columns or {}
    cols = [grid.points[..., k].ravel() for k in range(grid.n)] + [u.ravel()]
    header = [f"x{k + 1}" for k in range(grid.n)] + ["value"]
    for name, fld in extra.items():
        cols.append(np.asarray(fld, dtype=float).ravel())
        header.append(name)
    _write_csv(path, header, cols)


def export_horizontal_csv(grid: Grid, F, path):
    """Write `x1,...,xn,v1,...,vm` rows in lexicographic node order."""
    F = grid.check_horizontal(F)
    cols = [grid.points[..., k].ravel() for k in range(grid.n)]
    cols += [F[..., j].ravel() for j in range(grid.m)]
    header = [f"x{k + 1}" for k in range(grid.n)] + [f"v{j + 1}" for j in range(grid.m)]
    _write_csv(path, header, cols)


def _write_csv(path, header, cols):
    data = np.column_stack(cols)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in data:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
