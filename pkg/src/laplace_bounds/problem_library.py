"""Built-in problems: the separable cubic exponent and the Dixon-sum exponents."""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .bounds_engine import GData, RelaxationParams, TheoremOneConstants, xi
from .local_model import D_constant, LocalExpansion


class DeltaNonpositive(ValueError):
    """Raised when the convexity gap recipe gives Delta <= 0."""

    def __init__(self, message: str, max_eta: float | None = None):
        super().__init__(message)
        self.max_eta = max_eta


@dataclass(frozen=True)
class Domain:
    """Integration domain: all of R^d, or the open polytope {t : A t < b}."""

    d: int
    A: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None

    @property
    def is_whole(self) -> bool:
        return self.A is None

    def contains(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.is_whole:
            return np.ones(t.shape[:-1], dtype=bool)
        return np.all(t @ self.A.T < self.b, axis=-1)

    def vertices(self) -> np.ndarray:
        """Vertices of a bounded polytope (enumerates d-subsets of facets)."""
        if self.is_whole:
            raise ValueError("whole space has no vertices")
        pts = []
        for rows in itertools.combinations(range(len(self.b)), self.d):
            M = self.A[list(rows)]
            if abs(np.linalg.det(M)) < 1e-12:
                continue
            p = np.linalg.solve(M, self.b[list(rows)])
            if np.all(self.A @ p <= self.b + 1e-9):
                pts.append(p)
        return np.array(pts)

    def describe(self) -> str:
        if self.is_whole:
            return f"R^{self.d}"
        return f"polytope with {len(self.b)} facets in R^{self.d}"


@dataclass(frozen=True)
class Problem:
    """An exponent f with f(0) = 0 minimal, its local data and oracle hooks.

    The integral of interest is I(n) = int_domain exp(-exponent_scale * n * f).
    """

    name: str
    local: LocalExpansion
    exponent_scale: float = 1.0
    f_eval: Optional[Callable[[np.ndarray], np.ndarray]] = None
    domain: Optional[Domain] = None
    g_eval: Optional[Callable[[np.ndarray], np.ndarray]] = None
    gdata: Optional[GData] = None
    exact_hook: Optional[str] = None
    params: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.exponent_scale < 1:
            raise ValueError("exponent_scale must be >= 1")
        if self.domain is None:
            object.__setattr__(self, "domain", Domain(self.local.d))

    @property
    def d(self) -> int:
        return self.local.d

    def theorem_n(self, n: float) -> float:
        """Large parameter seen by the bounds for the problem's own n."""
        return self.exponent_scale * n


def convexity_gap(lambda_min: float, D: float, C: float, alpha: float, r: float) -> float:
    """Lower bound of f on the sphere |t| = r from the cubic model and its remainder."""
    return lambda_min * r**2 / 2 - D * r**3 - C * r ** (2 + alpha)


# --- separable cubic -------------------------------------------------------


def separable_cubic_1d(x, gamma: float):
    x = np.asarray(x, dtype=float)
    return x**2 + x**3 + np.abs(x) ** (3 + gamma)


def separable_cubic(d: int, gamma: float, r: float | None = None) -> Problem:
    """f(t) = sum t_i^2 + sum t_i^3 + sum |t_i|^(3+gamma) on R^d.

    ``r`` defaults to the radius maximising the convexity gap Delta(r).
    """
    from .oracle import integrate_separable

    if d < 2:
        raise ValueError("dimension must be at least 2")
    if not 0 < gamma < 1:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    H = 2.0 * np.eye(d)
    T3 = np.zeros((d, d, d))
    for i in range(d):
        T3[i, i, i] = 6.0
    C, alpha = 1.0, 1.0 + gamma
    D = D_constant(T3)
    if r is None:
        res = minimize_scalar(
            lambda x: -convexity_gap(2.0, D, C, alpha, x),
            bounds=(1e-6, 1.0 / D),
            method="bounded",
            options={"xatol": 1e-12},
        )
        r = float(res.x)
    Delta = convexity_gap(2.0, D, C, alpha, r)
    if Delta <= 0:
        raise DeltaNonpositive(f"Delta = {Delta} <= 0 for r = {r}")
    local = LocalExpansion(
        H=H,
        T3=T3,
        C=C,
        alpha=alpha,
        r=r,
        delta=r,
        Delta=Delta,
        n1=1.0,
        I_n1=integrate_separable(gamma, d, 1.0),
    )

    def f_eval(t):
        return np.sum(separable_cubic_1d(t, gamma), axis=-1)

    return Problem(
        name=f"separable-cubic:d={d},gamma={gamma:g}",
        local=local,
        exponent_scale=1.0,
        f_eval=f_eval,
        domain=Domain(d),
        exact_hook="separable",
        params={"d": d, "gamma": gamma, "r": r},
    )


# --- Dixon sums ------------------------------------------------------------


@dataclass(frozen=True)
class DixonSpec:
    d: int
    eta: float

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("dimension must be at least 2")
        if not 0 < self.eta < 1:
            raise ValueError(f"eta must lie in (0, 1), got {self.eta}")


def _u(x):
    """(1 + 2 sin^2) / cos^4, the fourth derivative of -log cos divided by 2."""
    return (1 + 2 * np.sin(x) ** 2) / np.cos(x) ** 4


def _neg_log_cos_ratio(x, a):
    """-log(cos(x + a) / cos(a)) without cancellation for small x."""
    with np.errstate(invalid="ignore", divide="ignore"):
        u = -2 * np.sin(x / 2) ** 2 - np.tan(a) * np.sin(x)
        return -np.log1p(np.maximum(u, -1.0))


def dixon_minimizer(d: int) -> float:
    return math.pi / (2 * (d + 1))


def dixon_remainder_constant(d: int, eta: float) -> float:
    a = dixon_minimizer(d)
    return float(d**2 / 12 * (_u((eta * d + 1) * a) + _u((eta * math.sqrt(d) + 1) * a)))


def _dixon_local_terms(d: int, eta: float):
    a = dixon_minimizer(d)
    lam = math.cos(a) ** -2
    D = d**1.5 / 3 * math.sin(a) / math.cos(a) ** 3
    C = dixon_remainder_constant(d, eta)
    r = eta * math.sqrt(d) * a
    return lam, D, C, r


def dixon_delta(d: int, eta: float) -> float:
    lam, D, C, r = _dixon_local_terms(d, eta)
    return convexity_gap(lam, D, C, 2.0, r)


def dixon_max_eta(d: int) -> float:
    """Largest eta in (0, 1) with a positive convexity gap."""
    hi = 1.0 - 1e-12
    if dixon_delta(d, hi) > 0:
        return hi
    return brentq(lambda e: dixon_delta(d, e), 1e-6, hi, xtol=1e-14)


def dixon_hessian(d: int) -> np.ndarray:
    a = dixon_minimizer(d)
    return (np.eye(d) + 1.0) / math.cos(a) ** 2


def dixon_third_tensor(d: int) -> np.ndarray:
    a = dixon_minimizer(d)
    T3 = np.full((d, d, d), -2.0 * math.sin(a) / math.cos(a) ** 3)
    for i in range(d):
        T3[i, i, i] = 0.0
    return T3


def dixon_example_closed_forms(d: int, C: float) -> dict:
    """Closed-form K_{alpha,1}, K_1, K_{alpha,2} as printed for the general Dixon
    exponent (alpha = 2). K_1 there is 9 times the general-formula value."""
    a = dixon_minimizer(d)
    c, s = math.cos(a), math.sin(a)
    return {
        "K_alpha1": C * c**4 * d * (d + 2),
        "K_1": s**2 * d**4 * (d + 2) * (d + 4),
        "K_alpha2": C**2 * c**8 * d * (d + 2) * (d + 4) * (d + 6),
    }


def dixon_I1_bound(d: int) -> float:
    """Upper bound of int_Omega exp(-2 f) used for the tail constant."""
    return (2**d - 1) * (math.pi / 4) ** d


def dixon_exponent(spec: DixonSpec) -> Problem:
    """Exponent of the integral representation of S(d+1, n), centred at its minimizer.

    The integrand is exp(-2 n f); thresholds refer to N = 2 n.
    """
    d, eta = spec.d, spec.eta
    a = dixon_minimizer(d)
    lam, D, C, r = _dixon_local_terms(d, eta)
    Delta = convexity_gap(lam, D, C, 2.0, r)
    if Delta <= 0:
        m = dixon_max_eta(d)
        raise DeltaNonpositive(f"Delta = {Delta:.6g} <= 0 for eta = {eta}; largest feasible eta is {m:.6f}", m)
    local = LocalExpansion(
        H=dixon_hessian(d),
        T3=dixon_third_tensor(d),
        C=C,
        alpha=2.0,
        r=r,
        delta=r,
        Delta=Delta,
        n1=2.0,
        I_n1=dixon_I1_bound(d),
    )
    def f_eval(t):
        t = np.asarray(t, dtype=float)
        z = np.concatenate([t, np.sum(t, axis=-1, keepdims=True)], axis=-1)
        shift = np.concatenate([np.full(d, a), [-a]])
        inside = np.all(np.abs(z + shift) < math.pi / 2, axis=-1)
        return np.where(inside, np.sum(_neg_log_cos_ratio(z, shift), axis=-1), np.inf)

    A = np.vstack([np.eye(d), -np.ones((1, d))])
    b = np.full(d + 1, d * a)
    return Problem(
        name=f"dixon:d={d},eta={eta:g}",
        local=local,
        exponent_scale=2.0,
        f_eval=f_eval,
        domain=Domain(d, A, b),
        exact_hook="dixon_sum",
        params={"d": d, "eta": eta, "jacobian": 1.0},
        notes={"example_closed_forms": dixon_example_closed_forms(d, C)},
    )


SQRT3 = math.sqrt(3.0)


def dixon2_cubic_tensor() -> np.ndarray:
    """Third partials of (sqrt(3)/9)(y^3 - 3 x^2 y), times 6 in the d3f convention."""
    # d3f/6 = c y^3 - 3 c x^2 y with c = sqrt(3)/9:
    # T_yyy = 6 c, and 3 T_xxy = -18 c  =>  T_xxy = -6 c
    c = SQRT3 / 9
    T3 = np.zeros((2, 2, 2))
    T3[1, 1, 1] = 6 * c
    for idx in ((0, 0, 1), (0, 1, 0), (1, 0, 0)):
        T3[idx] = -6 * c
    return T3


def dixon2_remainder_constant(r: float) -> float:
    return 3.0 / 32.0 * float(_u(r + math.pi / 6))


def dixon2_transformed(r: float = math.pi / math.sqrt(108.0)) -> Problem:
    """d = 2 Dixon exponent after the linear change of variables that removes
    the cross term; S(3, n) = 3^(3n+1/2) / pi^2 * int exp(-2 n f)."""
    if not 0 < r < math.pi / 3:
        raise ValueError(f"r must lie in (0, pi/3), got {r}")
    T3 = dixon2_cubic_tensor()
    C = dixon2_remainder_constant(r)
    Delta = convexity_gap(2.0, D_constant(T3), C, 2.0, r)
    if Delta <= 0:
        raise DeltaNonpositive(f"Delta = {Delta:.6g} <= 0 for r = {r}")
    local = LocalExpansion(
        H=2.0 * np.eye(2),
        T3=T3,
        C=C,
        alpha=2.0,
        r=r,
        delta=r,
        Delta=Delta,
        n1=2.0,
        # exact: S(3, 1) = 6
        I_n1=6.0 * math.pi**2 / 3**3.5,
    )
    p = math.pi / 6

    def f_eval(t):
        t = np.asarray(t, dtype=float)
        x, y = t[..., 0], t[..., 1]
        z = np.stack([SQRT3 / 2 * x - y / 2, -SQRT3 / 2 * x - y / 2, y], axis=-1)
        inside = np.all(z + p < math.pi / 2, axis=-1)
        return np.where(inside, np.sum(_neg_log_cos_ratio(z, p), axis=-1), np.inf)

    A = np.array([[SQRT3 / 2, -0.5], [0.0, 1.0], [-SQRT3 / 2, -0.5]])
    b = np.full(3, math.pi / 3)
    return Problem(
        name=f"dixon2:r={r:.17g}",
        local=local,
        exponent_scale=2.0,
        f_eval=f_eval,
        domain=Domain(2, A, b),
        exact_hook="dixon_sum",
        params={"d": 2, "r": r, "jacobian": SQRT3 / 2},
    )


# Published values for the transformed Dixon example (d = 2, r^2 = pi^2/108, bounds written in n with N = 2n)
DIXON2_PUBLISHED = {
    "C": 0.9238,
    "Delta": 0.06863,
    "K_alpha1/2": 0.9238,
    "(K_alpha1+K_1)/2": 1.072,
    "K_l/8": 0.1355,
    "K_alpha2": 20.48,
    "(K_alpha2+K_u)/4": 5.439,
    "n0": 1479.0,
    "n0 (N1 alone)": 240.0,
    "relaxed a": 1.2,
    "relaxed x_a": 3.39,
    "relaxed n0": 240.0,
    "relaxed (K_alpha1+K_1)/2": 1.2497,
    "relaxed (K_alpha2+K_u)/4": 11.5833,
}


def dixon2_published_constants(problem: Problem | None = None) -> TheoremOneConstants:
    """Theorem constants rebuilt from the published composite values.

    Only the combinations that enter the bracket are published, so K_1 and
    K_u are recovered from them.
    """
    p = DIXON2_PUBLISHED
    local = (problem or dixon2_transformed()).local
    K_alpha1 = 2 * p["K_alpha1/2"]
    return TheoremOneConstants(
        K_alpha1=K_alpha1,
        K_alpha2=p["K_alpha2"],
        K_1=2 * p["(K_alpha1+K_1)/2"] - K_alpha1,
        K_l=8 * p["K_l/8"],
        K_u=4 * p["(K_alpha2+K_u)/4"] - p["K_alpha2"],
        xi=xi(local),
        n0=p["n0"],
        n2=p["n0 (N1 alone)"],
        alpha=2.0,
        d=2,
        det_H=4.0,
        relaxation=RelaxationParams.base(),
    )


def dixon_sum_exact(s: int, n: int) -> int:
    """S(s, n) = sum_{k=0}^{2n} (-1)^(k+n) C(2n, k)^s in exact integer arithmetic."""
    if s < 1 or n < 1:
        raise ValueError("s and n must be positive integers")
    m = 2 * n
    total = 0
    c = 1
    for k in range(m + 1):
        total += (-1) ** (k + n) * c**s
        c = c * (m - k) // (k + 1)
    return total


def dixon_identity(n: int) -> int:
    """(3n)! / (n!)^3, equal to S(3, n) by Dixon's identity."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    return math.factorial(3 * n) // math.factorial(n) ** 3


def dixon_leading(d: int, n: int) -> float:
    """log of the leading-order approximation of S(d+1, n)."""
    if d < 2 or n < 1:
        raise ValueError("need d >= 2 and n >= 1")
    a = dixon_minimizer(d)
    log_cos = math.log(math.cos(a))
    return (
        math.log(2)
        + 2 * n * (d + 1) * math.log(2)
        - d * math.log(math.pi)
        + 2 * n * (d + 1) * log_cos
        + d / 2 * math.log(math.pi / n)
        - 0.5 * (math.log(d + 1) - 2 * d * log_cos)
    )


def dixon_integral_log_factor(d: int, n: int) -> float:
    """log of F with S(d+1, n) = F * int_Omega exp(-2 n f) in the original
    coordinates (divide the integral by the Jacobian for transformed ones)."""
    a = dixon_minimizer(d)
    return math.log(2) + 2 * n * (d + 1) * (math.log(2) + math.log(math.cos(a))) - d * math.log(math.pi)


# --- selectors -------------------------------------------------------------

_TOKEN = re.compile(r"\s*(pi2|pi|[0-9.]+(?:e[-+]?[0-9]+)?|[*/])")


def parse_value(text: str) -> float:
    """Parse a number such as '0.5', '1/3', 'pi2/108' (pi^2/108) or 'pi/6'."""
    pos, parts = 0, []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ValueError(f"cannot parse value {text!r}")
        parts.append(m.group(1))
        pos = m.end()
    if not parts or parts[0] in "*/":
        raise ValueError(f"cannot parse value {text!r}")
    value, op = None, "*"
    for tok in parts:
        if tok in ("*", "/"):
            op = tok
            continue
        x = {"pi": math.pi, "pi2": math.pi**2}.get(tok)
        x = float(Fraction(tok)) if x is None else x
        value = x if value is None else (value * x if op == "*" else value / x)
    return value


def resolve(selector: str) -> Problem:
    """Build a library problem from a selector like 'dixon:d=3,eta=0.2'."""
    kind, _, rest = selector.partition(":")
    kw = {}
    for item in filter(None, rest.split(",")):
        key, sep, val = item.partition("=")
        if not sep:
            raise ValueError(f"bad parameter {item!r} in {selector!r}")
        kw[key.strip()] = val.strip()
    if kind == "separable-cubic":
        r = parse_value(kw["r"]) if "r" in kw else None
        return separable_cubic(int(kw.get("d", 2)), parse_value(kw.get("gamma", "0.5")), r)
    if kind == "dixon":
        return dixon_exponent(DixonSpec(int(kw.get("d", 2)), parse_value(kw.get("eta", "1/3"))))
    if kind == "dixon2":
        if "r2" in kw:
            r = math.sqrt(parse_value(kw["r2"]))
        elif "r" in kw:
            r = parse_value(kw["r"])
        else:
            r = math.pi / math.sqrt(108.0)
        return dixon2_transformed(r)
    raise ValueError(f"unknown problem kind {kind!r}")
