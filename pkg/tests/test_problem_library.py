import math

import numpy as np
import pytest

from laplace_bounds.bounds_engine import theorem1_constants
from laplace_bounds.local_model import d3f_eval
from laplace_bounds.oracle import integrate_nd
from laplace_bounds.problem_library import (
    DIXON2_PUBLISHED,
    DeltaNonpositive,
    DixonSpec,
    convexity_gap,
    dixon2_published_constants,
    dixon2_transformed,
    dixon_exponent,
    dixon_identity,
    dixon_integral_log_factor,
    dixon_leading,
    dixon_max_eta,
    dixon_remainder_constant,
    dixon_sum_exact,
    parse_value,
    resolve,
    separable_cubic,
)

LIBRARY = [
    "separable-cubic:d=2,gamma=0.5",
    "separable-cubic:d=3,gamma=0.25",
    "dixon:d=2,eta=1/3",
    "dixon:d=3,eta=0.2",
    "dixon2:r2=pi2/108",
]


def fd_hessian(f, d, h=1e-4):
    H = np.zeros((d, d))
    E = np.eye(d) * h
    for i in range(d):
        for j in range(d):
            H[i, j] = (f(E[i] + E[j]) - f(E[i] - E[j]) - f(E[j] - E[i]) + f(-E[i] - E[j])) / (4 * h * h)
    return H


def fd_third(f, d, h=1e-3):
    T = np.zeros((d, d, d))
    E = np.eye(d) * h
    for i in range(d):
        for j in range(d):
            for k in range(d):
                acc = 0.0
                for si in (1, -1):
                    for sj in (1, -1):
                        for sk in (1, -1):
                            acc += si * sj * sk * f(si * E[i] + sj * E[j] + sk * E[k])
                T[i, j, k] = acc / (8 * h**3)
    return T


@pytest.mark.parametrize("selector", LIBRARY)
def test_local_data_matches_finite_differences(selector):
    p = resolve(selector)
    d = p.d
    f = lambda t: float(p.f_eval(np.asarray(t)))  # noqa: E731
    assert f(np.zeros(d)) == 0.0
    # the difference quotient error scales with the remainder's order h^alpha
    assert np.allclose(fd_hessian(f, d), p.local.H, atol=1e-6 + 20 * 1e-4**p.local.alpha)
    assert np.allclose(fd_third(f, d), p.local.T3, atol=2e-4)


def sample_ball(rng, d, r, m):
    u = rng.normal(size=(m, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return u * r * rng.uniform(0, 1, size=(m, 1)) ** (1 / d)


@pytest.mark.parametrize("selector", LIBRARY)
def test_remainder_bound_on_ball(selector):
    """|f - t'Ht/2 - d3f/6| <= C |t|^(2+alpha) at 10^3 points of B_r."""
    p = resolve(selector)
    loc = p.local
    t = sample_ball(np.random.default_rng(11), p.d, loc.r, 1000)
    f = p.f_eval(t)
    model = 0.5 * np.einsum("mi,ij,mj->m", t, loc.H, t) + d3f_eval(loc.T3, t) / 6
    bound = loc.C * np.linalg.norm(t, axis=1) ** (2 + loc.alpha)
    assert np.all(np.abs(f - model) <= bound * (1 + 1e-9) + 1e-15)


@pytest.mark.parametrize("selector", LIBRARY)
def test_gap_outside_ball(selector):
    p = resolve(selector)
    loc = p.local
    rng = np.random.default_rng(5)
    u = rng.normal(size=(4000, p.d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    t = u * loc.r * rng.uniform(1.0, 6.0, size=(4000, 1))
    t = t[p.domain.contains(t)]
    assert len(t) > 500
    assert np.all(p.f_eval(t) >= loc.Delta * (1 - 1e-12))


def test_separable_radius_maximises_gap():
    p = separable_cubic(2, 0.5)
    r = p.local.r
    loc = p.local
    g = lambda x: convexity_gap(2.0, loc.D, 1.0, 1.5, x)  # noqa: E731
    assert g(r) >= max(g(r * 0.99), g(r * 1.01))
    assert r == pytest.approx(0.19907, abs=1e-5)
    assert loc.Delta == pytest.approx(0.013796, abs=1e-6)


def test_separable_explicit_radius_and_errors():
    assert separable_cubic(2, 0.5, r=0.1).local.r == 0.1
    with pytest.raises(DeltaNonpositive):
        separable_cubic(2, 0.5, r=1.0)
    with pytest.raises(ValueError):
        separable_cubic(1, 0.5)
    with pytest.raises(ValueError):
        separable_cubic(2, 1.5)


def test_dixon_remainder_constant_example_value():
    # the printed 7.7 corresponds to eta = 0.36; eta = 1/3 gives 6.72
    assert dixon_remainder_constant(2, 1 / 3) == pytest.approx(6.72, abs=5e-3)
    assert dixon_remainder_constant(2, 0.36) == pytest.approx(7.7, abs=0.05)


def test_dixon_largest_eta():
    m = dixon_max_eta(2)
    assert m == pytest.approx(0.34772, abs=1e-5)
    dixon_exponent(DixonSpec(2, m - 1e-6))
    with pytest.raises(DeltaNonpositive) as exc:
        dixon_exponent(DixonSpec(2, 0.36))
    assert exc.value.max_eta == pytest.approx(m)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_dixon_closed_forms_vs_general_formula(d):
    p = dixon_exponent(DixonSpec(d, 0.2))
    c = theorem1_constants(p.local)
    cf = p.notes["example_closed_forms"]
    assert cf["K_alpha1"] == pytest.approx(c.K_alpha1, rel=1e-12)
    assert cf["K_alpha2"] == pytest.approx(c.K_alpha2, rel=1e-12)
    assert cf["K_1"] == pytest.approx(9 * c.K_1, rel=1e-12)


def test_dixon2_constants_and_domain():
    p = dixon2_transformed()
    assert p.local.C == pytest.approx(0.9238, abs=5e-4)
    assert p.local.Delta == pytest.approx(0.06863, abs=5e-4)
    assert p.local.D == pytest.approx(2 * math.sqrt(6) / 9, rel=1e-12)
    V = p.domain.vertices()
    assert len(V) == 3
    assert np.allclose(np.linalg.norm(V, axis=1), 2 * math.pi / 3)
    with pytest.raises(ValueError):
        dixon2_transformed(2.0)


def test_dixon2_published_constants():
    c = dixon2_published_constants()
    assert c.K_alpha1 == pytest.approx(1.8476)
    assert c.K_1 == pytest.approx(0.2964)
    assert c.K_l == pytest.approx(1.084)
    assert c.K_u == pytest.approx(1.276)
    assert (c.n0, c.det_H) == (DIXON2_PUBLISHED["n0"], 4.0)


# --- exact sums --------------------------------------------------------------


def test_dixon_sum_small_cases():
    assert dixon_sum_exact(3, 1) == 6
    assert all(dixon_sum_exact(1, n) == 0 for n in range(1, 30))
    assert all(dixon_sum_exact(2, n) == math.comb(2 * n, n) for n in range(1, 30))
    assert [dixon_sum_exact(3, n) for n in range(1, 5)] == [6, 90, 1680, 34650]


def test_dixon_identity_matches_sum():
    for n in list(range(1, 60)) + [137, 400]:
        assert dixon_sum_exact(3, n) == dixon_identity(n)


@pytest.mark.parametrize("n", [1, 5, 40, 10**4, 10**6])
def test_dixon_leading_d2(n):
    expected = (3 * n + 0.5) * math.log(3) - math.log(2 * math.pi * n)
    assert dixon_leading(2, n) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("n", [1, 2, 3, 6])
def test_dixon_integral_representation_d2(n):
    """Quadrature of the exponent reproduces the exact integer in both coordinates."""
    S = dixon_sum_exact(3, n)
    plain = integrate_nd(resolve("dixon:d=2,eta=0.3"), n)
    rotated = integrate_nd(dixon2_transformed(), n) * (math.sqrt(3) / 2)
    log_f = dixon_integral_log_factor(2, n)
    assert math.exp(log_f) * plain == pytest.approx(S, rel=1e-10)
    assert math.exp(log_f) * rotated == pytest.approx(S, rel=1e-10)


def test_dixon_sum_rejects_bad_input():
    with pytest.raises(ValueError):
        dixon_sum_exact(3, 0)
    with pytest.raises(ValueError):
        dixon_leading(1, 3)


# --- selectors ---------------------------------------------------------------


@pytest.mark.parametrize(
    "text,value",
    [("0.5", 0.5), ("1/3", 1 / 3), ("pi2/108", math.pi**2 / 108), ("pi/6", math.pi / 6), ("2*pi", 2 * math.pi), ("1e-3", 1e-3)],
)
def test_parse_value(text, value):
    assert parse_value(text) == pytest.approx(value, rel=1e-15)


@pytest.mark.parametrize("text", ["", "abc", "/3", "1+2"])
def test_parse_value_rejects(text):
    with pytest.raises(ValueError):
        parse_value(text)


def test_resolve_variants():
    assert resolve("dixon2:r=0.25").local.r == 0.25
    assert resolve("dixon2").local.r == pytest.approx(math.pi / math.sqrt(108))
    assert resolve("dixon:d=3,eta=0.2").exponent_scale == 2.0
    assert resolve("separable-cubic").d == 2
    assert resolve("dixon").local.r == pytest.approx(math.sqrt(2) * math.pi / 18)
    for bad in ["nope:d=2", "dixon:d", "dixon:d=2,eta=0.9"]:
        with pytest.raises(ValueError):
            resolve(bad)
