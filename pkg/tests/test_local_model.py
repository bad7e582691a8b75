import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from laplace_bounds.local_model import (
    LocalExpansion,
    NotPositiveDefinite,
    D_constant,
    as_third_tensor,
    cholesky_upper,
    d3f_eval,
    determinant,
    min_eigenvalue,
    symmetrize_tensor,
)


def random_spd(rng, d):
    M = rng.normal(size=(d, d))
    return M @ M.T + d * np.eye(d)


def make_local(d=2, **kw):
    args = dict(
        H=2.0 * np.eye(d),
        T3=np.zeros((d, d, d)),
        C=1.0,
        alpha=2.0,
        r=0.5,
        delta=0.5,
        Delta=0.1,
        n1=1.0,
        I_n1=3.0,
    )
    args.update(kw)
    return LocalExpansion(**args)


@pytest.mark.parametrize("d", [2, 3, 4, 6])
@pytest.mark.parametrize("seed", range(5))
def test_cholesky_reconstructs(d, seed):
    H = random_spd(np.random.default_rng(seed), d)
    U = cholesky_upper(H)
    assert np.allclose(np.triu(U), U)
    assert np.all(np.diag(U) > 0)
    assert np.max(np.abs(U.T @ U - H)) < 1e-12 * np.max(np.abs(H))


def test_cholesky_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite):
        cholesky_upper(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_asymmetric_matrix_rejected():
    with pytest.raises(ValueError):
        cholesky_upper(np.array([[2.0, 1.0], [0.0, 2.0]]))


@pytest.mark.parametrize("seed", range(4))
def test_determinant_and_eigenvalue_match_numpy(seed):
    H = random_spd(np.random.default_rng(seed), 4)
    assert determinant(H) == pytest.approx(np.linalg.det(H), rel=1e-12)
    assert min_eigenvalue(H) == pytest.approx(min(np.linalg.eigvals(H).real), rel=1e-10)


def test_d3f_matches_explicit_sum():
    rng = np.random.default_rng(3)
    T = symmetrize_tensor(rng.normal(size=(3, 3, 3)))
    t = rng.normal(size=3)
    explicit = sum(T[i, j, k] * t[i] * t[j] * t[k] for i in range(3) for j in range(3) for k in range(3))
    assert d3f_eval(T, t) == pytest.approx(explicit, rel=1e-13)


def test_d3f_batched_and_mismatch():
    T = symmetrize_tensor(np.random.default_rng(0).normal(size=(2, 2, 2)))
    pts = np.random.default_rng(1).normal(size=(5, 7, 2))
    out = d3f_eval(T, pts)
    assert out.shape == (5, 7)
    assert out[2, 3] == pytest.approx(d3f_eval(T, pts[2, 3]))
    with pytest.raises(ValueError, match="dimension mismatch"):
        d3f_eval(T, np.ones(3))


def test_third_tensor_symmetry_check():
    T = np.zeros((2, 2, 2))
    T[0, 0, 1] = 1.0
    with pytest.raises(ValueError):
        as_third_tensor(T)
    S = as_third_tensor(symmetrize_tensor(T))
    assert np.allclose(S, np.transpose(S, (2, 0, 1)))


@given(st.lists(st.floats(-5, 5), min_size=8, max_size=8))
@settings(max_examples=50, deadline=None)
def test_D_constant_scales_with_max_entry(vals):
    T = symmetrize_tensor(np.array(vals).reshape(2, 2, 2))
    assert D_constant(T) == pytest.approx(2**1.5 / 6 * np.max(np.abs(T)))
    assert D_constant(2 * T) == pytest.approx(2 * D_constant(T))


@pytest.mark.parametrize(
    "bad",
    [
        {"alpha": 1.0},
        {"alpha": 2.5},
        {"C": 0.0},
        {"Delta": -0.1},
        {"I_n1": float("inf")},
        {"H": -np.eye(2)},
        {"H": np.eye(1), "T3": np.zeros((1, 1, 1))},
        {"T3": np.zeros((3, 3, 3))},
    ],
)
def test_local_expansion_validation(bad):
    with pytest.raises(ValueError):
        make_local(**bad)


def test_local_expansion_properties():
    H = np.array([[2.0, 0.5], [0.5, 1.0]])
    loc = make_local(H=H)
    assert loc.d == 2
    assert loc.det_H == pytest.approx(1.75)
    assert loc.lambda_min == pytest.approx((3 - math.sqrt(2)) / 2)
    with pytest.raises(ValueError):
        loc.H[0, 0] = 5.0


def test_json_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    loc = make_local(d=3, H=random_spd(rng, 3), T3=symmetrize_tensor(rng.normal(size=(3, 3, 3))))
    again = LocalExpansion.from_json(loc.to_json())
    assert np.array_equal(again.H, loc.H)
    assert np.array_equal(again.T3, loc.T3)
    assert again.I_n1 == loc.I_n1
    path = tmp_path / "local.json"
    path.write_text(json.dumps(loc.to_dict()))
    assert LocalExpansion.load(path).C == loc.C
