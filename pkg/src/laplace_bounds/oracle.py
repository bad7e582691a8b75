"""Independent ground truth for the Laplace integrals.

Two quadrature routes (adaptive Gauss-Kronrod in 1D for separable
exponents, composite tensor Gauss-Legendre for d <= 3) and an exact-integer
route for the Dixon sums.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad

from .bounds_engine import TheoremOneConstants, bracket_I, leading_term
from .local_model import d3f_eval, min_eigenvalue
from .problem_library import (
    dixon_integral_log_factor,
    dixon_leading,
    dixon_identity,
    dixon_sum_exact,
)

if TYPE_CHECKING:
    from .problem_library import Problem

GL_NODES = 16
_X, _W = leggauss(GL_NODES)
_CHUNK = 2_000_000
# the literal alternating sum costs about n^2.5; beyond this it is replaced
# by Dixon's identity (s = 3) or by quadrature (s > 3)
EXACT_SUM_MAX_N = 4000


class NoConvergence(RuntimeError):
    pass


class DimensionTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-10
    box_halfwidth: Optional[float] = None
    max_panels: int = 512
    max_nodes: float = 3e8

    def __post_init__(self):
        if not 0 < self.rel_tol <= 1e-4:
            raise ValueError(f"rel_tol must lie in (0, 1e-4], got {self.rel_tol}")
        if self.box_halfwidth is not None and self.box_halfwidth <= 0:
            raise ValueError("box_halfwidth must be positive")


@dataclass(frozen=True)
class EmpiricalError:
    n: float
    I_oracle: float
    leading: float
    E: float
    method: str

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


# --- 1D separable route ----------------------------------------------------


def _separable_line(gamma: float, n: float, L: float, tol: float) -> float:
    # u = sqrt(n) x keeps the integrand O(1) for every n
    sn = math.sqrt(n)
    c3 = 1.0 / sn
    cg = n ** (-(1 + gamma) / 2)

    def h(u):
        return math.exp(-(u * u + c3 * u**3 + cg * abs(u) ** (3 + gamma)))

    total, err = 0.0, 0.0
    for a, b in ((-L, 0.0), (0.0, L)):
        v, e = quad(h, a, b, epsabs=0.0, epsrel=tol / 10, limit=400)
        total += v
        err += e
    if err > tol * total:
        raise NoConvergence(f"1D quadrature error estimate {err:.3g} exceeds tolerance")
    return total / sn


def integrate_separable(gamma: float, d: int, n: float, spec: QuadratureSpec | None = None) -> float:
    """(int_R exp(-n (x^2 + x^3 + |x|^(3+gamma))) dx)^d."""
    spec = spec or QuadratureSpec()
    if n <= 0:
        raise ValueError("n must be positive")
    tol = spec.rel_tol
    # x^2 + x^3 + |x|^(3+gamma) >= 0.85 x^2 for all x, so the tail beyond L
    # in the scaled variable is below exp(-0.85 L^2)
    L = spec.box_halfwidth * math.sqrt(n) if spec.box_halfwidth else math.sqrt((-math.log(tol) + 10.0) / 0.85)
    i1 = _separable_line(gamma, n, L, tol)
    i2 = _separable_line(gamma, n, 2 * L, tol)
    if abs(i2 - i1) > tol * i2:
        raise NoConvergence("truncation check failed: doubling the box changed the value")
    return i2**d


# --- tensor Gauss-Legendre route --------------------------------------------


def _composite(edges: np.ndarray, panels: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite GL nodes/weights: each [edges[i], edges[i+1]] split into panels."""
    cuts = np.concatenate(
        [np.linspace(a, b, panels + 1)[:-1] for a, b in zip(edges[:-1], edges[1:])] + [edges[-1:]]
    )
    lo, hi = cuts[:-1, None], cuts[1:, None]
    half = (hi - lo) / 2
    nodes = (lo + half * (_X + 1)).ravel()
    weights = (half * _W).ravel()
    return nodes, weights


def _edges(lo: float, hi: float, extra) -> np.ndarray:
    pts = [lo, hi] + [p for p in extra if lo < p < hi]
    return np.unique(np.array(pts, dtype=float))


def _box(problem: "Problem", N: float, spec: QuadratureSpec):
    d = problem.d
    if spec.box_halfwidth is not None:
        L = spec.box_halfwidth
    else:
        lam = min_eigenvalue(problem.local.H)
        L = math.sqrt(2 * (-math.log(spec.rel_tol) + 5.0 * d + 5.0) / (N * lam))
    lo, hi = np.full(d, -L), np.full(d, L)
    clipped = np.zeros(d, dtype=bool)
    breaks = [[0.0] for _ in range(d)]
    if not problem.domain.is_whole:
        V = problem.domain.vertices()
        vlo, vhi = V.min(axis=0), V.max(axis=0)
        clipped = (vlo >= lo) & (vhi <= hi)
        lo, hi = np.maximum(lo, vlo), np.minimum(hi, vhi)
        for k in range(d):
            breaks[k] += list(V[:, k])
    return lo, hi, breaks, bool(np.all(clipped)), L


def _inner_limits(problem: "Problem", outer: np.ndarray, lo: float, hi: float):
    """Exact interval of the last coordinate inside the domain for each outer point."""
    m = outer.shape[0]
    a = np.full(m, lo)
    b = np.full(m, hi)
    keep = np.ones(m, dtype=bool)
    dom = problem.domain
    if not dom.is_whole:
        for row, rhs in zip(dom.A, dom.b):
            c = row[-1]
            slack = rhs - outer @ row[:-1]
            if abs(c) < 1e-14:
                keep &= slack > 0
            elif c > 0:
                b = np.minimum(b, slack / c)
            else:
                a = np.maximum(a, slack / c)
    b = np.where(keep, np.maximum(b, a), a)
    return a, b


def _tensor_rule(problem: "Problem", N: float, lo, hi, breaks, panels: int, exclude: float | None = None) -> float:
    """Tensor rule over the box intersected with the domain.

    With ``exclude`` set, only nodes outside the cube [-exclude, exclude]^d
    contribute; the cube faces are breakpoints so no panel straddles them.
    """
    d = problem.d
    f = problem.f_eval
    splits = [0.0] if exclude is None else [-exclude, 0.0, exclude]
    if exclude is not None:
        breaks = [list(b) + [-exclude, exclude] for b in breaks]
    outer_rules = [_composite(_edges(lo[k], hi[k], breaks[k]), panels) for k in range(d - 1)]
    mesh = np.meshgrid(*[r[0] for r in outer_rules], indexing="ij")
    wmesh = np.meshgrid(*[r[1] for r in outer_rules], indexing="ij")
    outer = np.stack([m.ravel() for m in mesh], axis=-1)
    w_outer = np.prod(np.stack([w.ravel() for w in wmesh], axis=-1), axis=-1)

    a, b = _inner_limits(problem, outer, lo[-1], hi[-1])
    cuts = [a] + [np.clip(p, a, b) for p in splits] + [b]
    # segments between consecutive cuts, each with `panels` equal sub-panels
    t = (np.arange(panels)[:, None] + (_X[None, :] + 1) / 2).ravel() / panels
    wt = np.tile(_W / 2, panels) / panels
    k = t.size * (len(cuts) - 1)
    step = max(1, _CHUNK // k)
    sums = []
    for i in range(0, outer.shape[0], step):
        sl = slice(i, i + step)
        nodes, weights = [], []
        for s, e in zip(cuts[:-1], cuts[1:]):
            length = (e[sl] - s[sl])[:, None]
            nodes.append(s[sl, None] + length * t[None, :])
            weights.append(length * wt[None, :])
        inner = np.concatenate(nodes, axis=1)
        w_inner = np.concatenate(weights, axis=1)
        o = outer[sl]
        pts = np.concatenate([np.repeat(o[:, None, :], k, axis=1), inner[:, :, None]], axis=-1)
        vals = np.exp(-N * f(pts))
        if exclude is not None:
            vals = np.where(np.all(np.abs(pts) <= exclude * (1 + 1e-12), axis=-1), 0.0, vals)
        sums.append(math.fsum((vals * w_inner * w_outer[sl, None]).ravel()))
    return math.fsum(sums)


def _converged_tensor(problem: "Problem", N: float, lo, hi, breaks, spec: QuadratureSpec) -> float:
    panels = 1
    prev = _tensor_rule(problem, N, lo, hi, breaks, panels)
    while True:
        panels *= 2
        nodes = np.prod([(len(_edges(lo[k], hi[k], breaks[k])) + 1) * panels * GL_NODES for k in range(problem.d)])
        if panels > spec.max_panels or nodes > spec.max_nodes:
            raise NoConvergence(f"no convergence at {panels // 2} panels per segment")
        cur = _tensor_rule(problem, N, lo, hi, breaks, panels)
        if abs(cur - prev) <= spec.rel_tol * abs(cur):
            return cur
        prev = cur


def integrate_nd(problem: "Problem", n: float, spec: QuadratureSpec | None = None) -> float:
    """I(n) = int_domain exp(-s n f(t)) dt by composite tensor Gauss-Legendre.

    Breakpoints sit at the vertex coordinates, so for d = 2 the integrand is
    smooth on every panel.  For d = 3 the inner limits switch constraints
    along oblique lines; convergence there is slow whenever the integrand
    is not negligible near them (small n), and NoConvergence is raised once
    the node budget is exhausted.

    The box is truncated where exp(-s n lambda_min |t|^2 / 2) is negligible.
    The truncation is validated by integrating the shell between the box and
    its double with a coarse rule; the box is doubled while the shell mass
    is not negligible.
    """
    spec = spec or QuadratureSpec()
    d = problem.d
    if d > 3:
        raise DimensionTooLarge(f"tensor quadrature supports d <= 3, got {d}")
    if problem.f_eval is None:
        raise ValueError(f"problem {problem.name} has no evaluator")
    N = problem.theorem_n(n)
    lo, hi, breaks, covers_domain, L = _box(problem, N, spec)
    for _ in range(6):
        value = _converged_tensor(problem, N, lo, hi, breaks, spec)
        if covers_domain or spec.box_halfwidth is not None:
            return value
        lo2, hi2, breaks2, covers_domain, _ = _box(problem, N, QuadratureSpec(spec.rel_tol, 2 * L, spec.max_panels, spec.max_nodes))
        shell = _tensor_rule(problem, N, lo2, hi2, breaks2, 1, exclude=L)
        if abs(shell) <= spec.rel_tol * abs(value):
            return value + shell
        L *= 2
        lo, hi, breaks = lo2, hi2, breaks2
    raise NoConvergence("truncation check failed: mass outside the box does not vanish")


# --- empirical relative error -----------------------------------------------


def log_abs_int(x: int) -> float:
    """log|x| for an arbitrarily large nonzero integer."""
    if x == 0:
        raise ValueError("log of zero")
    return math.log(abs(x))


def dixon_exact(d: int, n: int) -> tuple[int, str]:
    """Exact S(d + 1, n) together with the route used to obtain it."""
    if n <= EXACT_SUM_MAX_N:
        return dixon_sum_exact(d + 1, n), "exact_sum"
    if d == 2:
        return dixon_identity(n), "dixon_identity"
    raise ValueError(f"exact S({d + 1}, {n}) is too expensive; n must be <= {EXACT_SUM_MAX_N}")


def empirical_error(problem: "Problem", n: float, spec: QuadratureSpec | None = None) -> EmpiricalError:
    """Oracle value of I(n) and the relative error of the Laplace leading term."""
    N = problem.theorem_n(n)
    leading = leading_term(N, problem.local.det_H, problem.d)
    d = problem.d
    if (
        problem.exact_hook == "dixon_sum"
        and float(n).is_integer()
        and (d == 2 or n <= EXACT_SUM_MAX_N)
    ):
        n = int(n)
        S, method = dixon_exact(d, n)
        if S <= 0:
            raise ValueError(f"S({d + 1}, {n}) = {S} is not positive")
        log_s = log_abs_int(S)
        log_i = log_s - dixon_integral_log_factor(d, n) - math.log(problem.params.get("jacobian", 1.0))
        E = math.expm1(log_s - dixon_leading(d, n))
        return EmpiricalError(float(n), math.exp(log_i), leading, E, method)
    if problem.exact_hook == "separable":
        p = problem.params
        value = integrate_separable(p["gamma"], p["d"], N, spec)
    else:
        value = integrate_nd(problem, n, spec)
    return EmpiricalError(float(n), value, leading, value / leading - 1.0, "quadrature")


def verify_point(problem: "Problem", n: float, consts: TheoremOneConstants, spec: QuadratureSpec | None = None):
    """Bracket at the problem's n, the oracle error there, and whether it is contained."""
    br = bracket_I(problem.theorem_n(n), consts)
    err = empirical_error(problem, n, spec)
    return br, err, br.contains_rel(err.E)


# --- odd third-moment check --------------------------------------------------


def _sphere_rule(d: int, panels: int):
    """Points on S^{d-1} with weights (product GL in angles, uniform panels
    so the rule is invariant under u -> -u)."""
    if d == 2:
        th, w = _composite(np.array([0.0, 2 * math.pi]), 2 * panels)
        return np.stack([np.cos(th), np.sin(th)], axis=-1), w
    if d == 3:
        th, wt = _composite(np.array([0.0, math.pi]), 2 * panels)
        ph, wp = _composite(np.array([0.0, 2 * math.pi]), 2 * panels)
        T, P = np.meshgrid(th, ph, indexing="ij")
        W = np.outer(wt * np.sin(th), wp)
        pts = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1)
        return pts.reshape(-1, 3), W.ravel()
    raise DimensionTooLarge(f"odd-moment check supports d in (2, 3), got {d}")


def odd_moment_check(T3, A, beta: float, R: float, absolute: bool = False, panels: int = 32) -> float:
    """int_{B_R} exp(-|u|^2/2) |u|^beta d3f(0, A u) du (or with |d3f| if absolute).

    In polar coordinates the integrand factors into a radial part and
    d3f(0, A w) over the unit sphere.
    """
    T3 = np.asarray(T3, dtype=float)
    A = np.asarray(A, dtype=float)
    d = T3.shape[0]
    if beta < 0 or R <= 0:
        raise ValueError("need beta >= 0 and R > 0")
    rho, wr = _composite(np.array([0.0, R]), panels)
    radial = math.fsum(wr * np.exp(-(rho**2) / 2) * rho ** (beta + d + 2))
    omega, wo = _sphere_rule(d, panels)
    vals = d3f_eval(T3, omega @ A.T)
    if absolute:
        vals = np.abs(vals)
    return radial * math.fsum(vals * wo)
