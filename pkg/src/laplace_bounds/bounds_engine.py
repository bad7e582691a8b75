"""Error constants, validity thresholds and certified brackets.

All quantities here refer to the integral I(N) = int exp(-N f) over the
domain, with N the large parameter seen by the bounds. A problem whose
integrand is exp(-s n f) uses N = s n; see ``scaled_coefficients``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from .local_model import LocalExpansion

BASE_THRESHOLD = 7.0 / 4.0


class Unreachable(ValueError):
    """Raised when a threshold condition can never be met."""


def pochhammer(x: float, a: float) -> float:
    """Rising factorial (x)_a = Gamma(x + a) / Gamma(x) for real a >= 0."""
    if x <= 0:
        raise ValueError(f"pochhammer needs x > 0, got {x}")
    if a < 0:
        raise ValueError(f"pochhammer needs a >= 0, got {a}")
    if a == 0:
        return 1.0
    if x + a < 170.0:
        return math.gamma(x + a) / math.gamma(x)
    return math.exp(math.lgamma(x + a) - math.lgamma(x))


def solve_xa(a: float) -> float:
    """Positive root of exp(x) = 1 + x + (1 + a) x^2.

    For x below the root the inequality exp(x) <= 1 + x + (1 + a) x^2 holds,
    above it it fails.
    """
    if a <= -0.5:
        raise ValueError(f"relaxation parameter must exceed -1/2, got {a}")

    def gap(x):
        return math.expm1(x) - x - (1.0 + a) * x * x

    hi = 1.0
    while gap(hi) <= 0:
        hi *= 2.0
    # gap < 0 on (0, root): start just above 0 where the x^2 term dominates
    lo = min(1e-3, hi / 2)
    return brentq(gap, lo, hi, xtol=1e-14, rtol=1e-15)


@dataclass(frozen=True)
class RelaxationParams:
    """Quadratic-inequality slack used when bounding exp(x) from above.

    ``a = 0`` with threshold 7/4 is the unrelaxed case (exp(x) <= 1 + x + x^2
    on (-inf, 7/4]). Any other ``a`` uses the exact root ``x_a``.
    """

    a: float = 0.0
    x_a: float = BASE_THRESHOLD

    @classmethod
    def base(cls) -> "RelaxationParams":
        return cls()

    @classmethod
    def for_a(cls, a: float) -> "RelaxationParams":
        return cls(a=float(a), x_a=solve_xa(a))

    @property
    def quad_factor(self) -> float:
        """Multiplier for the constants coming from the quadratic term."""
        return 1.0 + self.a

    @property
    def tail_factor(self) -> float:
        """Multiplier for K_u: the threshold x_a replaces 7/4."""
        return self.x_a / BASE_THRESHOLD


@dataclass(frozen=True)
class TheoremOneConstants:
    K_alpha1: float
    K_alpha2: float
    K_1: float
    K_l: float
    K_u: float
    xi: float
    n0: float
    n2: float
    alpha: float
    d: int
    det_H: float
    relaxation: RelaxationParams = field(default_factory=RelaxationParams)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["relaxation"] = {"a": self.relaxation.a, "x_a": self.relaxation.x_a}
        return out


@dataclass(frozen=True)
class GData:
    """Amplitude data: g(0), its gradient, the quadratic remainder constant M,
    and n3 with int exp(-n3 f)|g| (or an upper bound of it).

    ``nonnegative`` declares g >= 0 on the whole domain. The tail integral
    outside the ball is then nonnegative and the lower bound does not need
    the K_ul term.
    """

    g0: float
    grad_g0: np.ndarray
    M: float
    n3: float
    Jabs_n3: float
    nonnegative: bool = False

    def __post_init__(self):
        grad = np.array(self.grad_g0, dtype=float).ravel()
        if self.g0 == 0:
            raise ValueError("g(0) must be nonzero")
        if self.M < 0:
            raise ValueError("M must be nonnegative")
        if self.n3 <= 0 or self.Jabs_n3 < 0:
            raise ValueError("n3 must be positive and Jabs_n3 nonnegative")
        object.__setattr__(self, "grad_g0", grad)


@dataclass(frozen=True)
class GConstants:
    K_2: float
    K_3: float
    K_alpha3: float
    K_4: float
    K_alpha5: float
    K_alpha6: float
    K_ul: float
    n4: float
    g0: float
    tail_in_lower: bool = True

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Bracket:
    n: float
    leading: float
    rel_lo: float
    rel_hi: float
    abs_lo: float
    abs_hi: float
    valid: bool

    def to_dict(self) -> dict:
        return asdict(self)

    def contains(self, value: float) -> bool:
        return self.abs_lo <= value <= self.abs_hi

    def contains_rel(self, E: float) -> bool:
        return self.rel_lo <= E <= self.rel_hi


def xi(local: LocalExpansion) -> float:
    return min(local.r**2 * local.lambda_min, 2.0 * local.Delta)


def _last_crossing(excess, start: float, mono_from: float, grid: int = 4000) -> float:
    """Smallest n >= start with excess(n') <= 0 for every n' >= n.

    ``excess`` must be nonincreasing on [mono_from, inf) and eventually
    nonpositive; on [start, mono_from] it is scanned on a log grid.
    """
    a = max(start, mono_from)
    if excess(a) > 0:
        hi = 2.0 * a
        while excess(hi) > 0:
            hi *= 2.0
            if hi > 1e300:
                raise Unreachable("condition never holds")
        return brentq(excess, a, hi, xtol=1e-12, rtol=1e-14)
    if start >= mono_from:
        return start
    pts = np.geomspace(start, mono_from, grid)
    bad = [i for i, p in enumerate(pts) if excess(p) > 0]
    if not bad:
        return start
    i = bad[-1]
    return brentq(excess, pts[i], pts[i + 1], xtol=1e-12, rtol=1e-14)


def n2_threshold(local: LocalExpansion) -> float:
    """Smallest n >= max(1, n1) from which d <= (d+2 alpha) log n <= xi n holds."""
    d, alpha = local.d, local.alpha
    k = d + 2.0 * alpha
    xi_value = xi(local)
    if xi_value <= 0:
        raise Unreachable("xi must be positive")
    start = max(1.0, local.n1, math.exp(d / k))
    # k log n - xi n is concave with its maximum at k / xi
    return _last_crossing(lambda n: k * math.log(n) - xi_value * n, start, k / xi_value)


def n0_residual(local: LocalExpansion, n: float) -> float:
    """Exponent bound on the shrinking ellipsoid; must stay <= x_a."""
    d, alpha, lam = local.d, local.alpha, local.lambda_min
    k = (d + 2.0 * alpha) / lam
    L = math.log(n)
    if L <= 0:
        return 0.0
    return (
        local.D * k**1.5 * L**1.5 / math.sqrt(n)
        + local.C * k ** (1 + alpha / 2) * L ** (1 + alpha / 2) / n ** (alpha / 2)
    )


def n1_holds(local: LocalExpansion, n: float) -> bool:
    k = local.d + 2.0 * local.alpha
    return n >= 1 and local.d <= k * math.log(n) <= xi(local) * n


def n0_threshold(local: LocalExpansion, relax: RelaxationParams | None = None) -> tuple[float, float]:
    """Return (n0, n2).

    n2 is where the logarithmic condition starts to hold for good; n0 >= n2
    additionally keeps the cubic/remainder exponent below the relaxation
    threshold for all larger n.
    """
    relax = relax or RelaxationParams.base()
    n2 = n2_threshold(local)
    # log^p n / n^q decreases beyond e^(p/q); p/q <= 3 for both terms when alpha >= 1
    mono_from = math.exp(3.0)
    n0 = _last_crossing(lambda n: n0_residual(local, n) - relax.x_a, n2, mono_from)
    return n0, n2


def theorem1_constants(local: LocalExpansion, relax: RelaxationParams | None = None) -> TheoremOneConstants:
    relax = relax or RelaxationParams.base()
    d, alpha, lam, C, D = local.d, local.alpha, local.lambda_min, local.C, local.D
    half_d = d / 2.0
    q = 2.0 / lam
    xi_value = xi(local)
    det_H = local.det_H

    K_alpha1 = C * q ** (1 + alpha / 2) * pochhammer(half_d, 1 + alpha / 2)
    K_alpha2 = C**2 * q ** (2 + alpha) * pochhammer(half_d, 2 + alpha)
    K_1 = D**2 * q**3 * pochhammer(half_d, 3)
    K_l = (math.e / 2) * math.sqrt(d / math.pi) * (1 + 2 * alpha / d) ** (d / 2 - 1)
    K_u = (
        BASE_THRESHOLD
        * math.sqrt(det_H)
        / (2 * math.pi) ** (d / 2)
        * local.I_n1
        * math.exp(xi_value * local.n1 / 2)
    )
    n0, n2 = n0_threshold(local, relax)
    return TheoremOneConstants(
        K_alpha1=K_alpha1,
        K_alpha2=relax.quad_factor * K_alpha2,
        K_1=relax.quad_factor * K_1,
        K_l=K_l,
        K_u=relax.tail_factor * K_u,
        xi=xi_value,
        n0=n0,
        n2=n2,
        alpha=alpha,
        d=d,
        det_H=det_H,
        relaxation=relax,
    )


def leading_term(n: float, det_H: float, d: int, g0: float = 1.0) -> float:
    return g0 / math.sqrt(det_H) * (2 * math.pi / n) ** (d / 2)


def _make_bracket(n, leading, lo, hi, valid) -> Bracket:
    a, b = leading * (1 + lo), leading * (1 + hi)
    return Bracket(
        n=float(n),
        leading=leading,
        rel_lo=lo,
        rel_hi=hi,
        abs_lo=min(a, b),
        abs_hi=max(a, b),
        valid=bool(valid),
    )


def bracket_I(n: float, consts: TheoremOneConstants, det_H: float | None = None, d: int | None = None) -> Bracket:
    """Certified enclosure of I(n) and of its relative error (valid for n >= n0).

    Below n0 the bracket is still computed and returned with valid=False.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    det_H = consts.det_H if det_H is None else det_H
    d = consts.d if d is None else d
    a = consts.alpha
    lo = -consts.K_alpha1 / n ** (a / 2) - consts.K_l / n ** (1 + a)
    hi = consts.K_alpha1 / n ** (a / 2) + consts.K_1 / n + (consts.K_alpha2 + consts.K_u) / n**a
    return _make_bracket(n, leading_term(n, det_H, d), lo, hi, n >= consts.n0)


def theorem2_constants(local: LocalExpansion, gdata: GData, consts: TheoremOneConstants | None = None) -> GConstants:
    consts = consts or theorem1_constants(local)
    d, alpha, lam, C, D = local.d, local.alpha, local.lambda_min, local.C, local.D
    half_d = d / 2.0
    q = 2.0 / lam
    g_abs = abs(gdata.g0)
    M = gdata.M
    grad = float(np.linalg.norm(gdata.grad_g0))

    K_2 = M * q * pochhammer(half_d, 1) / g_abs
    K_3 = D * grad * q**2 * pochhammer(half_d, 2) / g_abs
    K_alpha3 = C * M * q ** (2 + alpha / 2) * pochhammer(half_d, 2 + alpha / 2) / g_abs
    K_4 = M * D**2 * q**4 * pochhammer(half_d, 4) / g_abs
    K_alpha5 = C**2 * M * q ** (1 + alpha) * pochhammer(half_d, 1 + alpha) / g_abs
    K_alpha6 = 2 * C * D * grad * q ** ((3 + alpha) / 2) * pochhammer(half_d, (3 + alpha) / 2) / g_abs
    K_ul = (
        consts.relaxation.tail_factor
        * BASE_THRESHOLD
        * math.sqrt(consts.det_H)
        / (g_abs * (2 * math.pi) ** (d / 2))
        * math.exp(gdata.n3 * consts.xi / 2)
        * gdata.Jabs_n3
    )
    n4 = n4_threshold(local, gdata, consts.n0)
    return GConstants(
        K_2=K_2,
        K_3=K_3,
        K_alpha3=K_alpha3,
        K_4=K_4,
        K_alpha5=K_alpha5,
        K_alpha6=K_alpha6,
        K_ul=K_ul,
        n4=n4,
        g0=gdata.g0,
        tail_in_lower=not gdata.nonnegative,
    )


def n4_residual(local: LocalExpansion, gdata: GData, n: float) -> float:
    """Left side of the amplitude-positivity condition minus g(0)."""
    d, alpha, lam = local.d, local.alpha, local.lambda_min
    k = d + 2.0 * alpha
    ratio = max(math.log(n), 0.0) / n
    grad = float(np.linalg.norm(gdata.grad_g0))
    return gdata.M * k / lam * ratio + grad * math.sqrt(d * k / lam) * math.sqrt(ratio) - gdata.g0


def n4_threshold(local: LocalExpansion, gdata: GData, n0: float) -> float:
    """Smallest n >= n0 from which the amplitude bounds stay nonnegative.

    Only g(0) > 0 is supported; negate g otherwise (E(n) does not change).
    """
    if gdata.g0 <= 0:
        raise Unreachable("n4 requires g(0) > 0; negate g to use a negative amplitude")
    # log n / n decreases beyond e
    return _last_crossing(lambda n: n4_residual(local, gdata, n), n0, math.e)


def bracket_E_g(n: float, consts: TheoremOneConstants, gconsts: GConstants) -> Bracket:
    """Certified bounds on the relative error of the amplitude-weighted integral."""
    if n <= 0:
        raise ValueError("n must be positive")
    a = consts.alpha
    g = gconsts
    lo = (
        -consts.K_alpha1 / n ** (a / 2)
        - (g.K_2 + g.K_3) / n
        - g.K_alpha3 / n ** (1 + a / 2)
        - (g.K_ul / n**a if g.tail_in_lower else 0.0)
        - consts.K_l / n ** (1 + a)
    )
    hi = (
        consts.K_alpha1 / n ** (a / 2)
        + (consts.K_1 + g.K_2 + g.K_3) / n
        + (consts.K_alpha2 + g.K_ul) / n**a
        + g.K_alpha3 / n ** (1 + a / 2)
        + g.K_4 / n**2
        + g.K_alpha5 / n ** (1 + a)
        + g.K_alpha6 / n ** ((3 + a) / 2)
    )
    leading = leading_term(n, consts.det_H, consts.d, g.g0)
    return _make_bracket(n, leading, lo, hi, n >= g.n4)


def mcw_reference(n: float) -> float:
    """Error radius of the earlier two-dimensional bound for the Dixon sum S(3, n)."""
    if n <= 0:
        raise ValueError("n must be positive")
    return 1.8245 / n + (7.0 / 3.0) * math.exp(-n * math.pi**2 / 72)


def scaled_coefficients(consts: TheoremOneConstants, s: float) -> dict:
    """Coefficients of the bracket written in the problem's own parameter n,
    where the bounds are evaluated at N = s n."""
    a = consts.alpha
    return {
        "K_alpha1": consts.K_alpha1 / s ** (a / 2),
        "K_1": consts.K_1 / s,
        "K_alpha1+K_1": consts.K_alpha1 / s ** (a / 2) + consts.K_1 / s,
        "K_alpha2": consts.K_alpha2 / s**a,
        "K_u": consts.K_u / s**a,
        "K_alpha2+K_u": (consts.K_alpha2 + consts.K_u) / s**a,
        "K_l": consts.K_l / s ** (1 + a),
    }
