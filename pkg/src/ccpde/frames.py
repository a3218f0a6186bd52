"""Horizontal frames: coefficient matrices, left inverses, rank and bracket probes.

A frame is a family X_1..X_m of smooth vector fields on a box in R^n,
encoded row-wise by the m x n coefficient matrix C(x).  Built-ins cover
the Euclidean frame, the first Heisenberg group, the Grushin plane, and
a flat-bump frame whose brackets vanish to infinite order on {x1 = 0}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, ExpressionError, ParameterError, SingularFrameError
from .expressions import compile_expression

RANK_RTOL = 1e-8          # relative singular-value cutoff for rank decisions
MAX_BRACKET_DEPTH = 6


@dataclass(frozen=True)
class Frame:
    """A horizontal frame on an axis-aligned box.

    coeff maps a point (n,) to the m x n coefficient matrix C(x); it must
    also accept batched points of shape (..., n) and return (..., m, n).
    coeff_deriv returns the (m, n, n) array d[j, i, k] = dC[j, i]/dx_k.
    """

    name: str
    n: int
    m: int
    coeff: Callable[[np.ndarray], np.ndarray]
    coeff_deriv: Callable[[np.ndarray], np.ndarray]
    box: tuple = field(default=None)

    def __post_init__(self):
        if not (1 <= self.m <= self.n):
            raise ParameterError(f"need 1 <= m <= n, got m={self.m}, n={self.n}")
        if self.box is None:
            object.__setattr__(self, "box", tuple((0.0, 1.0) for _ in range(self.n)))
        box = tuple((float(a), float(b)) for a, b in self.box)
        if len(box) != self.n or any(b <= a for a, b in box):
            raise ParameterError(f"bad box {self.box}")
        object.__setattr__(self, "box", box)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(
            x.shape == (self.n,)
            and all(a - 1e-12 <= xi <= b + 1e-12 for xi, (a, b) in zip(x, self.box))
        )

    def with_box(self, box) -> "Frame":
        return Frame(self.name, self.n, self.m, self.coeff, self.coeff_deriv, tuple(box))

    def box_diameter(self) -> float:
        return float(np.linalg.norm([b - a for a, b in self.box]))


def _check_point(frame: Frame, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (frame.n,):
        raise ParameterError(f"point shape {x.shape} != ({frame.n},)")
    if not frame.contains(x):
        raise DomainError(f"point {tuple(x)} outside box {frame.box} of frame {frame.name!r}")
    return x


def eval_coeff(frame: Frame, x) -> np.ndarray:
    """Coefficient matrix C(x), shape (m, n)."""
    x = _check_point(frame, x)
    C = np.asarray(frame.coeff(x), dtype=float)
    if C.shape != (frame.m, frame.n):
        raise ParameterError(f"coeff returned shape {C.shape}, expected {(frame.m, frame.n)}")
    if not np.all(np.isfinite(C)):
        raise ParameterError(f"non-finite coefficients at {tuple(x)}")
    return C


def eval_coeff_deriv(frame: Frame, x) -> np.ndarray:
    """First derivatives d[j, i, k] = dC[j, i]/dx_k, shape (m, n, n)."""
    x = _check_point(frame, x)
    D = np.asarray(frame.coeff_deriv(x), dtype=float)
    if D.shape != (frame.m, frame.n, frame.n):
        raise ParameterError(f"coeff_deriv returned shape {D.shape}")
    return D


def div_correction(frame: Frame, x) -> np.ndarray:
    """The vector (sum_i dC[j,i]/dx_i)_j entering div_X and Delta_X."""
    D = eval_coeff_deriv(frame, x)
    return np.einsum("jii->j", D)


def lic_check(frame: Frame, x) -> tuple[int, float]:
    """Numerical rank of C(x) under the relative cutoff, and smallest sv."""
    C = eval_coeff(frame, x)
    sv = np.linalg.svd(C, compute_uv=False)
    if sv[0] == 0.0:
        return 0, 0.0
    rank = int(np.sum(sv > RANK_RTOL * sv[0]))
    return rank, float(sv[-1])


def left_inverse(frame: Frame, x) -> np.ndarray:
    """The left inverse (C C^T)^(-1) C of C(x)^T; requires full row rank."""
    C = eval_coeff(frame, x)
    sv = np.linalg.svd(C, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] < RANK_RTOL * sv[0]:
        raise SingularFrameError(x, sv[-1])
    return np.linalg.solve(C @ C.T, C)


def _field_callables(frame: Frame):
    """Frame rows as vector-field callables R^n -> R^n."""

    def make(j):
        def f(y):
            return np.asarray(frame.coeff(np.asarray(y, dtype=float)), dtype=float)[j]

        return f

    return [make(j) for j in range(frame.m)]


def _fd_jacobian(f, x, h):
    n = x.size
    J = np.empty((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        J[:, k] = (np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2.0 * h)
    return J


def hormander_probe(frame: Frame, x, max_depth: int, step: float | None = None) -> list[int]:
    """Rank of the span of the frame plus iterated brackets, per depth.

    Brackets are finite-difference commutators [V, W](x) = JW(x) V(x) -
    JV(x) W(x).  Entry k of the result is the rank using commutators of
    length up to k+1; the final entry equal to n certifies the Hormander
    condition at x up to step max_depth.
    """
    x = _check_point(frame, x)
    if max_depth < 1:
        raise ParameterError("max_depth must be >= 1")
    max_depth = min(max_depth, MAX_BRACKET_DEPTH)
    if step is None:
        step = 1e-4 * max(b - a for a, b in frame.box)
    margin = 2.0 * max_depth * step
    for xi, (a, b) in zip(x, frame.box):
        if xi - a < margin or b - xi < margin:
            raise DomainError(
                f"point {tuple(x)} within bracket stencil width {margin:.2e} of the box boundary"
            )

    base = _field_callables(frame)
    generations = [list(base)]
    all_fields = list(base)
    ranks = []
    for depth in range(1, max_depth + 1):
        if depth > 1:
            new = []
            for v in base:
                for w in generations[-1]:
                    def bracket(y, v=v, w=w):
                        y = np.asarray(y, dtype=float)
                        return _fd_jacobian(w, y, step) @ np.asarray(v(y)) - _fd_jacobian(
                            v, y, step
                        ) @ np.asarray(w(y))

                    new.append(bracket)
            generations.append(new)
            all_fields.extend(new)
        M = np.array([f(x) for f in all_fields])
        sv = np.linalg.svd(M, compute_uv=False)
        if sv[0] == 0.0:
            ranks.append(0)
        else:
            ranks.append(int(np.sum(sv > RANK_RTOL * sv[0])))
        if ranks[-1] >= frame.n:
            ranks.extend([frame.n] * (max_depth - depth))
            break
    return ranks


# ---------------------------------------------------------------------------
# built-in frames
# ---------------------------------------------------------------------------


def euclidean(n: int, box=None) -> Frame:
    """The coordinate frame X_j = d/dx_j (m = n)."""
    eye = np.eye(n)
    zeros = np.zeros((n, n, n))

    def coeff(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(eye, x.shape[:-1] + (n, n)).copy()

    def coeff_deriv(x):
        return zeros.copy()

    return Frame(f"euclidean{n}", n, n, coeff, coeff_deriv, box or tuple((0.0, 1.0) for _ in range(n)))


def heisenberg1(box=None) -> Frame:
    """First Heisenberg group: X = d/dx - y d/dt, Y = d/dy + x d/dt."""

    def coeff(x):
        x = np.asarray(x, dtype=float)
        C = np.zeros(x.shape[:-1] + (2, 3))
        C[..., 0, 0] = 1.0
        C[..., 0, 2] = -x[..., 1]
        C[..., 1, 1] = 1.0
        C[..., 1, 2] = x[..., 0]
        return C

    def coeff_deriv(x):
        D = np.zeros((2, 3, 3))
        D[0, 2, 1] = -1.0   # d(-y)/dy
        D[1, 2, 0] = 1.0    # d(x)/dx
        return D

    return Frame("heisenberg1", 3, 2, coeff, coeff_deriv, box or ((-1, 1), (-1, 1), (-1, 1)))


def grushin(box=None) -> Frame:
    """Grushin plane: X = d/dx, Y = x d/dy; degenerate on {x = 0}."""

    def coeff(x):
        x = np.asarray(x, dtype=float)
        C = np.zeros(x.shape[:-1] + (2, 2))
        C[..., 0, 0] = 1.0
        C[..., 1, 1] = x[..., 0]
        return C

    def coeff_deriv(x):
        D = np.zeros((2, 2, 2))
        D[1, 1, 0] = 1.0
        return D

    return Frame("grushin", 2, 2, coeff, coeff_deriv, box or ((-1, 1), (-1, 1)))


def _psi(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def _psi_prime(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos]) / t[pos] ** 2
    return out


def flat_phi(box=None) -> Frame:
    """X = d/dx, Y = d/dy + phi(x) d/dz with phi flat at x = 0.

    All brackets vanish to infinite order on {x = 0}, so the frame fails
    the Hormander condition there while staying pointwise independent.
    """

    def phi(t):
        return _psi(t) + _psi(-t)

    def phi_prime(t):
        return _psi_prime(t) - _psi_prime(-t)

    def coeff(x):
        x = np.asarray(x, dtype=float)
        C = np.zeros(x.shape[:-1] + (2, 3))
        C[..., 0, 0] = 1.0
        C[..., 1, 1] = 1.0
        C[..., 1, 2] = phi(np.atleast_1d(x[..., 0])).reshape(x[..., 0].shape)
        return C

    def coeff_deriv(x):
        x = np.asarray(x, dtype=float)
        D = np.zeros((2, 3, 3))
        D[1, 2, 0] = float(phi_prime(np.atleast_1d(x[0]))[0])
        return D

    return Frame("flat_phi", 3, 2, coeff, coeff_deriv, box or ((-1, 1), (-1, 1), (-1, 1)))


_BUILTINS = {
    "heisenberg1": heisenberg1,
    "grushin": grushin,
    "flat_phi": flat_phi,
}


def frame_by_name(name: str, box=None) -> Frame:
    """Look up a built-in frame; 'euclideanN' selects the N-dim identity frame."""
    if name in _BUILTINS:
        return _BUILTINS[name](box=box)
    if name.startswith("euclidean"):
        suffix = name[len("euclidean"):]
        if suffix.isdigit() and int(suffix) >= 1:
            return euclidean(int(suffix), box=box)
    raise ParameterError(
        f"unknown frame {name!r}; built-ins: euclideanN, {', '.join(sorted(_BUILTINS))}"
    )


def fd_coeff_deriv(coeff, n: int, m: int, step: float):
    """Central finite-difference derivative closure for custom frames."""

    def deriv(x):
        x = np.asarray(x, dtype=float)
        D = np.empty((m, n, n))
        for k in range(n):
            e = np.zeros(n)
            e[k] = step
            D[:, :, k] = (np.asarray(coeff(x + e)) - np.asarray(coeff(x - e))) / (2.0 * step)
        return D

    return deriv


def custom_frame(name: str, n: int, m: int, entries: Sequence[Sequence[str]], box) -> Frame:
    """Build a frame from per-entry coefficient expressions in x1..xn."""
    if len(entries) != m or any(len(row) != n for row in entries):
        raise ParameterError(f"need {m} rows of {n} expressions")
    fns = [[compile_expression(str(e), n) for e in row] for row in entries]

    def coeff(x):
        x = np.asarray(x, dtype=float)
        C = np.empty(x.shape[:-1] + (m, n))
        for j in range(m):
            for i in range(n):
                C[..., j, i] = fns[j][i](x)
        return C

    frame = Frame(name, n, m, coeff, lambda x: None, tuple(box))
    step = 1e-5 * frame.box_diameter()
    return Frame(name, n, m, coeff, fd_coeff_deriv(coeff, n, m, step), tuple(box))


def load_frame(path: str) -> Frame:
    """Load a custom frame from a JSON definition file.

    Expected keys: name, n, m, box ([[a1,b1],...]), coeff (m lists of n
    expression strings in the variables x1..xn).
    """
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ExpressionError(f"cannot read frame file {path!r}: {exc}") from exc
    for key in ("n", "m", "coeff", "box"):
        if key not in data:
            raise ExpressionError(f"frame file {path!r} missing key {key!r}")
    return custom_frame(
        str(data.get("name", "custom")),
        int(data["n"]),
        int(data["m"]),
        data["coeff"],
        [tuple(map(float, ab)) for ab in data["box"]],
    )
