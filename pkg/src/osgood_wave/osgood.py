"""Blow-up criterion integral T(alpha, beta) with certified-as-possible verdicts.

The criterion integral is

    T(alpha, beta) = int_alpha^inf [ beta^2 + 2 * B(s) ]^{-1/2} ds,
    B(s) = int_alpha^s b(r) dr,

finite iff the associated second-order dynamics blow up in finite time.
The convention 1/0 = inf applies: beta = 0 with b vanishing at alpha gives
a divergent integral and verdict Infinite.

Verdicts are decided from the integrand's decay measured on a geometric
ladder of probe points up to ``s_max_cap``, independently of ``rel_tol``:

* steep decay (local log-log slope q >= 1.1, stable): Finite, with the
  truncated integral completed by a power-law tail extrapolation whose
  stability across dyadic truncation points feeds the error estimate;
* borderline decay (q near 1): the integrand is re-examined in w = log s,
  where drifts of the family x * logp(x)^d again show power-law decay with
  exponent d/2; the same slope test in w space separates convergent
  (d > 2) from divergent (d < 2) cases;
* decay slower than 1/s over the probed decades: Infinite.

The Finite verdict's value is certified by stabilisation of the
truncation-plus-extrapolation estimate; for steep (power-like) drifts the
reported ``abs_error`` meets ``rel_tol * value``.  For borderline drifts
the convergence is logarithmic and dominated by mass far beyond any
floating-point range; the verdict is still sound, but ``abs_error`` is an
honest (larger) extrapolation-stability estimate.

The Infinite verdict is heuristic (probe-based), never a proof; genuinely
ambiguous decay yields Inconclusive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from statistics import median

import numpy as np
from scipy.integrate import quad

from .drift import DriftFunction

__all__ = [
    "Verdict",
    "NonFiniteDrift",
    "OsgoodQuery",
    "OsgoodResult",
    "inner_integral",
    "osgood_integral",
    "time_to_infinity",
    "linear_growth_tail_scale",
    "scaling_check",
    "ScalingReport",
]


class Verdict(Enum):
    FINITE = "Finite"
    INFINITE = "Infinite"
    INCONCLUSIVE = "Inconclusive"


class NonFiniteDrift(ArithmeticError):
    """The drift evaluated to +-inf or NaN inside a quadrature panel."""


@dataclass(frozen=True)
class OsgoodQuery:
    alpha: float
    beta: float
    drift: DriftFunction
    rel_tol: float = 1e-8
    s_max_cap: float = 1e12

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if not (0.0 < self.rel_tol <= 1e-2):
            raise ValueError("rel_tol must lie in (0, 1e-2]")
        if self.s_max_cap <= self.alpha:
            raise ValueError("s_max_cap must exceed alpha")


@dataclass(frozen=True)
class OsgoodResult:
    verdict: Verdict
    value: float                   # meaningful iff verdict is Finite (inf if Infinite)
    abs_error: float
    tail_exponent_estimate: float  # local decay exponent of the integrand at truncation
    truncation_point: float

    def csv_row(self) -> str:
        return (f"{self.verdict.value},{self.value!r},{self.abs_error!r},"
                f"{self.truncation_point!r}")


def _checked(b: DriftFunction):
    def f(r: float) -> float:
        v = b(r)
        if not math.isfinite(v):
            raise NonFiniteDrift(f"drift not finite at r={r!r}: {v!r}")
        return v
    return f


def inner_integral(b: DriftFunction, alpha: float, s: float,
                   rel_tol: float = 1e-9) -> float:
    """B(s) = int_alpha^s b(r) dr by adaptive quadrature.

    Monotone nondecreasing in s when b >= 0.  Raises ``NonFiniteDrift``
    if b blows up on the panel.
    """
    if s < alpha:
        raise ValueError("s must be >= alpha")
    if s == alpha:
        return 0.0
    val, _ = quad(_checked(b), alpha, s, epsrel=rel_tol, limit=200)
    return val


# ---------------------------------------------------------------------------
# Geometric probe ladder with cumulative B

class _Ladder:
    """Probe points alpha = s_0 < s_1 < ... with cumulative B and f values."""

    def __init__(self, b: DriftFunction, alpha: float, beta: float,
                 cap: float, inner_tol: float, start: float | None = None):
        self.b = _checked(b)
        self.alpha = alpha
        self.beta2 = beta * beta
        self.inner_tol = inner_tol
        base = start if start is not None else alpha
        # at least 24 rungs inside [base, cap]; factor at most 2
        n_min = 24
        factor = min(2.0, (cap / base) ** (1.0 / n_min))
        self.s = [base]
        self.B = [0.0 if start is None else self._b_from_alpha(base)]
        self.quad_err = 0.0
        s = base
        while s < cap * 0.999:
            s = min(s * factor, cap)
            inc, err = quad(self.b, self.s[-1], s, epsrel=inner_tol, limit=200)
            self.s.append(s)
            self.B.append(self.B[-1] + inc)
            self.quad_err += err
        self.f = [self._f_of_B(Bv) for Bv in self.B]

    def _b_from_alpha(self, s: float) -> float:
        # cumulative B(s) from alpha via its own geometric panels
        total = 0.0
        lo = self.alpha
        while lo < s * 0.999999:
            hi = min(lo * 2.0, s)
            inc, _ = quad(self.b, lo, hi, epsrel=self.inner_tol, limit=200)
            total += inc
            lo = hi
        return total

    def _f_of_B(self, B: float) -> float:
        den = self.beta2 + 2.0 * B
        if den <= 0.0:
            return math.inf
        if math.isinf(den):
            return 0.0
        return 1.0 / math.sqrt(den)

    def f_at(self, s: float, k: int) -> float:
        """Integrand at s inside panel (s_{k-1}, s_k]."""
        inc, _ = quad(self.b, self.s[k - 1], s, epsrel=self.inner_tol, limit=200)
        return self._f_of_B(self.B[k - 1] + inc)


def _local_slopes(xs, ys):
    """Slopes -d(log y)/d(log x) between consecutive points."""
    out = []
    for i in range(1, len(xs)):
        dx = math.log(xs[i]) - math.log(xs[i - 1])
        if ys[i] <= 0.0 or ys[i - 1] <= 0.0 or dx <= 0.0:
            out.append(math.inf)
        else:
            out.append(-(math.log(ys[i]) - math.log(ys[i - 1])) / dx)
    return out


_STEEP_Q = 1.10
_BORDER_MU_HI = 1.10
_BORDER_MU_LO = 0.90
_TREND_CAP = 0.015


def _classify(ladder: _Ladder):
    """Return (verdict, q_hat, mu_hat) from the ladder's decay profile."""
    s, f = ladder.s, ladder.f
    if any(v == 0.0 for v in f):
        # B overflowed: the integrand is numerically zero beyond that rung
        return Verdict.FINITE, math.inf, math.inf

    q = _local_slopes(s, f)
    q_tail = q[-5:] if len(q) >= 5 else q
    q_med = median(q_tail)
    q_spread = max(q_tail) - min(q_tail)

    if q_med >= _STEEP_Q and q_spread <= 0.05:
        return Verdict.FINITE, q_med, math.nan

    # borderline: examine h(w) = s f(s) against w = log s, using rungs far
    # enough out that log s is comfortably positive
    idx = [i for i in range(len(s)) if s[i] >= max(8.0, 8.0 * ladder.alpha)]
    if len(idx) < 5:
        return Verdict.INCONCLUSIVE, q_med, math.nan
    w = [math.log(s[i]) for i in idx]
    h = [s[i] * f[i] for i in idx]
    mu = _local_slopes(w, h)
    mu_tail = mu[-4:] if len(mu) >= 4 else mu
    mu_med = median(mu_tail)
    trend = (mu_tail[-1] - mu_tail[0]) / max(len(mu_tail) - 1, 1)

    if mu_med >= _BORDER_MU_HI:
        return Verdict.FINITE, q_med, mu_med
    if mu_med <= _BORDER_MU_LO and trend <= _TREND_CAP:
        return Verdict.INFINITE, q_med, mu_med
    return Verdict.INCONCLUSIVE, q_med, mu_med


def _window_slope(xs, ys, k: int) -> float:
    lo = max(1, k - 3)
    return median(_local_slopes(xs[lo:k + 1], ys[lo:k + 1]))


def _tail_estimate(ladder: _Ladder, k: int, steep: bool) -> tuple[float, float, float]:
    """(tail beyond s_k, tail uncertainty, local exponent).

    Steep branch extrapolates f ~ s^{-q}.  Borderline branch extrapolates
    h(w) = s f ~ w^{-mu} in w = log s (exact for clamped-log drift
    families, which is what lands there); the local exponent mu(w) drifts
    like mu_inf + a/w, so it is Richardson-extrapolated from two windows
    and the spread of the two resulting tails is returned as the
    uncertainty -- they bracket the true remainder.
    """
    s, f = ladder.s, ladder.f
    if f[k] == 0.0:
        return 0.0, 0.0, math.inf
    if steep:
        q_loc = _window_slope(s, f, k)
        if not q_loc > 1.02:
            return math.inf, math.inf, q_loc
        return f[k] * s[k] / (q_loc - 1.0), 0.0, q_loc
    w = [math.log(v) for v in s[:k + 1]]
    h = [s[i] * f[i] for i in range(k + 1)]
    mu_loc = _window_slope(w, h, k)
    if not mu_loc > 1.02:
        return math.inf, math.inf, mu_loc
    tail_loc = h[k] * w[k] / (mu_loc - 1.0)
    k_in = k - 4
    if k_in >= 5:
        mu_in = _window_slope(w, h, k_in)
        w_out, w_in = w[k], w[k_in]
        mu_inf = (mu_loc * w_out - mu_in * w_in) / (w_out - w_in)
        if mu_inf > 1.02:
            tail_inf = h[k] * w[k] / (mu_inf - 1.0)
            mid = 0.5 * (tail_loc + tail_inf)
            return mid, 0.5 * abs(tail_inf - tail_loc), mu_loc
    return tail_loc, 0.25 * tail_loc, mu_loc


def _integrate_ladder(ladder: _Ladder, steep: bool, rel_tol: float):
    """March the truncation point out until value + tail stabilises.

    Returns (value, abs_error, exponent, truncation_point).
    """
    s = ladder.s
    cum = [0.0]
    err = 0.0  # outer panel error; B's error enters relatively, added below
    ests: list[float] = []
    k_accept = None
    for k in range(1, len(s)):
        fk = lambda t, kk=k: ladder.f_at(t, kk)
        inc, e = quad(fk, s[k - 1], s[k], epsrel=rel_tol / 4.0, limit=200)
        cum.append(cum[-1] + inc)
        err += e
        if k < 5:
            ests.append(math.nan)
            continue
        tail, _ = _tail_estimate(ladder, k, steep)
        est = cum[-1] + tail
        ests.append(est)
        if (k >= 8 and math.isfinite(est) and len(ests) >= 3
                and math.isfinite(ests[-2]) and math.isfinite(ests[-3])):
            d1 = abs(est - ests[-2])
            d2 = abs(est - ests[-3])
            if d1 <= 0.2 * rel_tol * abs(est) and d2 <= 0.4 * rel_tol * abs(est):
                k_accept = k
                break
    if k_accept is None:
        k_accept = len(s) - 1
    tail, expo = _tail_estimate(ladder, k_accept, steep)
    value = cum[k_accept] + (tail if math.isfinite(tail) else 0.0)
    stab = 0.0
    if len(ests) >= 2 and math.isfinite(ests[-1]) and math.isfinite(ests[-2]):
        stab = abs(ests[-1] - ests[-2])
    if len(ests) >= 3 and math.isfinite(ests[-3]):
        stab = max(stab, abs(ests[-1] - ests[-3]))
    # the inner B tolerance perturbs the integrand by at most half its
    # relative error, hence a relative contribution to the value
    abs_error = err + stab + (0.5 * ladder.inner_tol + 4e-16) * abs(value)
    return value, abs_error, expo, s[k_accept]


def osgood_integral(q: OsgoodQuery) -> OsgoodResult:
    """Evaluate T(alpha, beta) with a Finite / Infinite / Inconclusive verdict.

    The verdict does not depend on ``rel_tol``; see the module docstring
    for the decision rules and the error-reporting contract.
    """
    b = _checked(q.drift)
    if q.beta == 0.0 and b(q.alpha) <= 0.0:
        # 1/0 = inf on an initial segment: divergent by convention.  (Even
        # if b turns positive immediately after alpha, local Lipschitz
        # growth gives B(s) = O((s-alpha)^2) and a non-integrable endpoint.)
        return OsgoodResult(Verdict.INFINITE, math.inf, math.inf,
                            0.0, q.alpha)

    cap = max(q.s_max_cap, 256.0 * q.alpha)  # keep enough rungs to classify
    ladder = _Ladder(q.drift, q.alpha, q.beta, cap, q.rel_tol / 10.0)
    verdict, q_hat, mu_hat = _classify(ladder)

    if verdict is Verdict.INFINITE:
        return OsgoodResult(Verdict.INFINITE, math.inf, math.inf,
                            q_hat, ladder.s[-1])
    if verdict is Verdict.INCONCLUSIVE:
        return OsgoodResult(Verdict.INCONCLUSIVE, math.nan, math.nan,
                            q_hat, ladder.s[-1])

    steep = not (math.isfinite(mu_hat) and mu_hat >= _BORDER_MU_HI)
    value, abs_error, expo, s_trunc = _integrate_ladder(ladder, steep, q.rel_tol)
    return OsgoodResult(Verdict.FINITE, value, abs_error, expo, s_trunc)


def time_to_infinity(b: DriftFunction, alpha: float, beta: float,
                     level: float, rel_tol: float = 1e-6,
                     span: float = 2.0 ** 40) -> float:
    """Remaining criterion mass int_level^inf [beta^2 + 2 B(s)]^{-1/2} ds.

    This is the time a blowing-up trajectory with data (alpha, beta)
    spends above ``level``; solvers add it to threshold-crossing times.
    Uses the same ladder-plus-extrapolation machinery as
    :func:`osgood_integral` beyond the level.
    """
    if level <= alpha:
        raise ValueError("level must exceed alpha")
    ladder = _Ladder(b, alpha, beta, level * span, rel_tol / 10.0, start=level)
    # decide the extrapolation family from the decay beyond the level
    qs = _local_slopes(ladder.s, ladder.f)
    steep = median(qs[-5:]) >= _STEEP_Q if len(qs) >= 5 else True
    value, abs_error, _, _ = _integrate_ladder(ladder, steep, rel_tol)
    return value


def linear_growth_tail_scale(b: DriftFunction, alpha: float, beta: float,
                             level: float) -> float:
    """Diagnostic scale sqrt(beta^2 + 2 B(level)) / b(level).

    The velocity-over-acceleration time scale at the level: the order of
    magnitude of the residence time above it for drifts growing at least
    linearly.  Reported alongside threshold sensitivity; not a bound.
    """
    bl = b(level)
    if bl <= 0.0:
        return math.inf
    B = inner_integral(b, alpha, level, rel_tol=1e-8)
    return math.sqrt(beta * beta + 2.0 * B) / bl


# ---------------------------------------------------------------------------
# Monotonicity / scaling cross-checks

@dataclass(frozen=True)
class ScalingReport:
    t_beta1: OsgoodResult
    t_beta2: OsgoodResult
    t_alpha2: OsgoodResult | None
    beta_ordering_ok: bool
    beta_ratio_ok: bool
    alpha_ordering_ok: bool | None

    @property
    def all_ok(self) -> bool:
        checks = [self.beta_ordering_ok, self.beta_ratio_ok]
        if self.alpha_ordering_ok is not None:
            checks.append(self.alpha_ordering_ok)
        return all(checks)


def scaling_check(b: DriftFunction, alpha: float, beta1: float, beta2: float,
                  alpha2: float | None = None, rel_tol: float = 1e-8) -> ScalingReport:
    """Check T(alpha, beta2) <= T(alpha, beta1) <= (beta2/beta1) T(alpha, beta2)
    and, when ``alpha2 >= alpha`` is given, T(alpha2, beta1) <= T(alpha, beta1).

    Inequalities are asserted within twice the combined quadrature error.
    Both queries must come back Finite.
    """
    if not (0.0 < beta1 <= beta2):
        raise ValueError("need 0 < beta1 <= beta2")
    r1 = osgood_integral(OsgoodQuery(alpha, beta1, b, rel_tol=rel_tol))
    r2 = osgood_integral(OsgoodQuery(alpha, beta2, b, rel_tol=rel_tol))
    if r1.verdict is not Verdict.FINITE or r2.verdict is not Verdict.FINITE:
        raise ValueError("scaling check requires Finite verdicts on both queries")
    slack = 2.0 * (r1.abs_error + r2.abs_error)
    ordering = r2.value <= r1.value + slack
    ratio = r1.value <= (beta2 / beta1) * r2.value + slack
    r3 = None
    alpha_ok = None
    if alpha2 is not None:
        if alpha2 < alpha:
            raise ValueError("alpha2 must be >= alpha")
        r3 = osgood_integral(OsgoodQuery(alpha2, beta1, b, rel_tol=rel_tol))
        if r3.verdict is not Verdict.FINITE:
            raise ValueError("scaling check requires a Finite verdict at alpha2")
        alpha_ok = r3.value <= r1.value + 2.0 * (r1.abs_error + r3.abs_error)
    return ScalingReport(r1, r2, r3, ordering, ratio, alpha_ok)
