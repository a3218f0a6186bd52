import json

import numpy as np
import pytest

from ccpde.errors import ParameterError, SingularFrameError
from ccpde.frames import (
    custom_frame,
    div_correction,
    euclidean,
    eval_coeff,
    eval_coeff_deriv,
    flat_phi,
    frame_by_name,
    grushin,
    heisenberg1,
    hormander_probe,
    left_inverse,
    lic_check,
    load_frame,
)


def test_euclidean_coeff_is_identity():
    fr = euclidean(3)
    C = eval_coeff(fr, np.array([0.2, 0.1, 0.4]))
    assert np.allclose(C, np.eye(3))
    assert np.allclose(eval_coeff_deriv(fr, np.array([0.2, 0.1, 0.4])), 0.0)


def test_heisenberg_coeff_rows():
    fr = heisenberg1()
    x = np.array([0.3, -0.2, 0.5])
    C = eval_coeff(fr, x)
    assert np.allclose(C[0], [1.0, 0.0, 0.2])   # (1, 0, -y)
    assert np.allclose(C[1], [0.0, 1.0, 0.3])   # (0, 1,  x)


def test_heisenberg_coeff_deriv_exact():
    fr = heisenberg1()
    x = np.array([0.3, -0.2, 0.5])
    D = eval_coeff_deriv(fr, x)
    # d c_{1,3}/d x2 = -1 and d c_{2,3}/d x1 = +1; all else zero
    expect = np.zeros((2, 3, 3))
    expect[0, 2, 1] = -1.0
    expect[1, 2, 0] = 1.0
    assert np.allclose(D, expect)


def test_heisenberg_div_correction_vanishes():
    fr = heisenberg1()
    assert np.allclose(div_correction(fr, np.array([0.4, 0.1, -0.3])), 0.0)


def test_grushin_coeff_and_rank_drop():
    fr = grushin()
    C = eval_coeff(fr, np.array([0.5, 0.2]))
    assert np.allclose(C, [[1.0, 0.0], [0.0, 0.5]])
    rank_off, sv_off = lic_check(fr, np.array([0.5, 0.2]))
    rank_on, _ = lic_check(fr, np.array([0.0, 0.2]))
    assert rank_off == 2 and sv_off > 0
    assert rank_on == 1


def test_left_inverse_identity_random_points():
    rng = np.random.default_rng(3)
    for fr in (euclidean(2), heisenberg1()):
        lo = np.array([a for a, _ in fr.box])
        hi = np.array([b for _, b in fr.box])
        for _ in range(50):
            x = rng.uniform(lo + 0.05, hi - 0.05)
            gap = np.abs(left_inverse(fr, x) @ eval_coeff(fr, x).T - np.eye(fr.m)).max()
            assert gap <= 1e-10


def test_left_inverse_singular_point_raises():
    with pytest.raises(SingularFrameError):
        left_inverse(grushin(), np.array([0.0, 0.3]))


def test_hormander_probe_heisenberg_fills_at_depth_2():
    ranks = hormander_probe(heisenberg1(), np.array([0.1, 0.2, 0.0]), 3)
    assert ranks[0] == 2
    assert ranks[1] == 3
    assert all(a <= b for a, b in zip(ranks, ranks[1:]))


def test_hormander_probe_grushin_on_degenerate_line():
    ranks = hormander_probe(grushin(), np.array([0.0, 0.1]), 3)
    assert ranks[0] == 1
    assert ranks[-1] == 2


def test_flat_phi_brackets_flat_on_critical_line():
    fr = flat_phi()
    # phi vanishes to infinite order at x = 0: brackets never fill rank 3
    ranks = hormander_probe(fr, np.array([0.0, 0.0, 0.0]), 4)
    assert ranks[0] == 2
    assert ranks[-1] == 2
    # away from the line the bracket [X1, X2] = phi'(x) d/dx3 kicks in
    ranks_off = hormander_probe(fr, np.array([-0.5, 0.0, 0.0]), 3)
    assert ranks_off[-1] == 3


def test_frame_by_name_euclidean_suffix_and_errors():
    assert frame_by_name("euclidean3").n == 3
    assert frame_by_name("heisenberg1").m == 2
    with pytest.raises(ParameterError):
        frame_by_name("nosuchframe")


def test_custom_frame_matches_builtin_heisenberg():
    entries = [["1", "0", "0 - x2"], ["0", "1", "x1"]]
    fr = custom_frame("h1", 3, 2, entries, ((-1, 1), (-1, 1), (-1, 1)))
    ref = heisenberg1()
    rng = np.random.default_rng(5)
    for _ in range(10):
        x = rng.uniform(-0.9, 0.9, size=3)
        assert np.allclose(eval_coeff(fr, x), eval_coeff(ref, x))
        assert np.allclose(eval_coeff_deriv(fr, x), eval_coeff_deriv(ref, x), atol=1e-6)


def test_load_frame_roundtrip(tmp_path):
    path = tmp_path / "frame.json"
    path.write_text(json.dumps({
        "name": "diag",
        "n": 2,
        "m": 2,
        "box": [[-1, 1], [-1, 1]],
        "coeff": [["1", "0"], ["0", "exp(x1)"]],
    }))
    fr = load_frame(str(path))
    C = eval_coeff(fr, np.array([0.5, 0.0]))
    assert np.allclose(C, [[1.0, 0.0], [0.0, np.exp(0.5)]])
