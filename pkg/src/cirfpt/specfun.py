"""Extended-precision special functions.

Every routine takes a :class:`PrecisionContext`, which owns a private
``mpmath.MPContext``.  Using a dedicated context instead of the global
``mpmath.mp`` keeps the working precision local to the caller, so two
computations at different precisions can run side by side.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from numbers import Rational

import mpmath
import numpy as np

from .errors import InvalidB, NonConvergent

__all__ = [
    "PrecisionContext",
    "default_context",
    "context_for",
    "context_of",
    "to_real",
    "rising_factorial",
    "binomial_real",
    "kummer_phi",
    "upper_incomplete_gamma",
    "lower_incomplete_gamma",
    "regularized_lower_gamma",
    "laguerre",
    "laguerre_table",
    "orthonormal_q",
    "unsigned_stirling_first",
    "stirling_row",
]

PRECISION_ENV = "CIRFPT_PRECISION"
DEFAULT_DIGITS = 256


def _default_series_tol(digits: int) -> float:
    # 1e-30 up to 256 bits; finer for higher precision so the extra bits are not wasted
    if digits <= 256:
        return 1e-30
    return float(2.0 ** (-(3 * digits) // 8))


@dataclass(frozen=True)
class PrecisionContext:
    """Working precision and series stopping policy.

    Parameters
    ----------
    digits : int
        Binary digits of the mantissa (>= 53).
    series_tol : float, optional
        Relative increment below which an infinite series is considered
        converged (two consecutive increments must satisfy it).
    max_terms : int
        Hard cap on the number of series terms.
    """

    digits: int = DEFAULT_DIGITS
    series_tol: float | None = None
    max_terms: int = 10_000

    def __post_init__(self):
        if int(self.digits) < 53:
            raise ValueError("precision must be at least 53 binary digits")
        if self.series_tol is None:
            object.__setattr__(self, "series_tol", _default_series_tol(int(self.digits)))
        if not 0 < self.series_tol < 1:
            raise ValueError("series_tol must lie in (0, 1)")
        if self.max_terms < 1:
            raise ValueError("max_terms must be >= 1")

    @cached_property
    def mp(self) -> mpmath.MPContext:
        ctx = mpmath.MPContext()
        ctx.prec = int(self.digits)
        return ctx

    @cached_property
    def tol(self):
        return self.mp.mpf(self.series_tol)

    def real(self, x):
        return to_real(x, self)

    def with_digits(self, digits: int) -> "PrecisionContext":
        tol = None if digits != self.digits else self.series_tol
        return PrecisionContext(digits=digits, series_tol=tol, max_terms=self.max_terms)


def default_context() -> PrecisionContext:
    """Context at the precision named by ``$CIRFPT_PRECISION`` (default 256)."""
    return context_for(int(os.environ.get(PRECISION_ENV, DEFAULT_DIGITS)))


@lru_cache(maxsize=None)
def context_for(digits: int) -> PrecisionContext:
    """Shared default-policy context at ``digits`` binary digits."""
    return PrecisionContext(digits=digits)


def context_of(x) -> PrecisionContext:
    """Context matching the precision of an mpf ``x``; the default otherwise."""
    mpctx = getattr(x, "context", None)
    if mpctx is None:
        return default_context()
    return context_for(int(mpctx.prec))


def _ctx(ctx):
    return default_context() if ctx is None else ctx


def to_real(x, ctx: PrecisionContext | None = None):
    """Convert ``x`` to an mpf of ``ctx``; rationals and ``"p/q"`` strings are exact."""
    mp = _ctx(ctx).mp
    if isinstance(x, str):
        x = Fraction(x.strip())
    if isinstance(x, Rational) and not isinstance(x, (bool, int)):
        return mp.mpf(x.numerator) / mp.mpf(x.denominator)
    return mp.mpf(x)


def rising_factorial(x, n: int, ctx: PrecisionContext | None = None):
    """Pochhammer symbol <x>_n = x (x+1) ... (x+n-1), with <x>_0 = 1.

    Without a context the product is taken in the type of ``x`` (exact for
    ints and Fractions).
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if ctx is not None:
        x = to_real(x, ctx)
        out = ctx.mp.one
    else:
        out = 1
    for i in range(n):
        out *= x + i
    return out


def binomial_real(x, k: int, ctx: PrecisionContext | None = None):
    """Generalized binomial C(x, k) = x (x-1) ... (x-k+1) / k! for real x."""
    if k < 0:
        return 0 if ctx is None else ctx.mp.zero
    if ctx is not None:
        x = to_real(x, ctx)
        num = ctx.mp.one
    else:
        num = 1
    for i in range(k):
        num *= x - i
    fact = 1
    for i in range(2, k + 1):
        fact *= i
    return num / fact


def kummer_phi(a, b, z, ctx: PrecisionContext | None = None):
    """Confluent hypergeometric function Phi(a, b, z) = 1F1(a; b; z).

    Summed term by term until two consecutive relative increments drop below
    ``ctx.series_tol``.  Negative arguments go through Kummer's transformation
    Phi(a, b, z) = e^z Phi(b - a, b, -z) so the series never alternates.
    """
    ctx = _ctx(ctx)
    mp = ctx.mp
    a, b, z = to_real(a, ctx), to_real(b, ctx), to_real(z, ctx)
    if b <= 0 and b == mp.floor(b):
        raise InvalidB(f"b = {b} is zero or a negative integer")
    if z == 0:
        return mp.one
    if z < 0:
        return mp.exp(z) * kummer_phi(b - a, b, -z, ctx)
    term = mp.one
    total = mp.one
    quiet = 0
    for n in range(ctx.max_terms):
        term = term * (a + n) * z / ((b + n) * (n + 1))
        total += term
        if term == 0 or abs(term) <= ctx.tol * abs(total):
            quiet += 1
            if quiet >= 2:
                return total
        else:
            quiet = 0
    raise NonConvergent(f"Kummer series for ({a}, {b}, {z}) exceeded {ctx.max_terms} terms")


def _lower_gamma_series(a, t, ctx):
    mp = ctx.mp
    term = 1 / a
    total = term
    quiet = 0
    for n in range(1, ctx.max_terms):
        term = term * t / (a + n)
        total += term
        if abs(term) <= ctx.tol * abs(total):
            quiet += 1
            if quiet >= 2:
                return total * mp.exp(-t + a * mp.log(t))
        else:
            quiet = 0
    raise NonConvergent(f"incomplete gamma series for a={a}, t={t} did not converge")


def _upper_gamma_cf(a, t, ctx):
    # modified Lentz evaluation of the Legendre continued fraction
    mp = ctx.mp
    tiny = mp.mpf(2) ** (-4 * ctx.digits)
    b = t + 1 - a
    c = 1 / tiny
    d = 1 / b
    h = d
    quiet = 0
    for i in range(1, ctx.max_terms):
        an = -i * (i - a)
        b += 2
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1 / d
        delta = d * c
        h *= delta
        if abs(delta - 1) <= ctx.tol:
            quiet += 1
            if quiet >= 2:
                return h * mp.exp(-t + a * mp.log(t))
        else:
            quiet = 0
    raise NonConvergent(f"incomplete gamma continued fraction for a={a}, t={t} did not converge")


def upper_incomplete_gamma(a, t, ctx: PrecisionContext | None = None):
    """Gamma(a, t) = integral_t^inf u^(a-1) e^(-u) du for a > 0, t >= 0."""
    ctx = _ctx(ctx)
    mp = ctx.mp
    a, t = to_real(a, ctx), to_real(t, ctx)
    if a <= 0:
        raise ValueError("a must be positive")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return mp.gamma(a)
    if t <= a + 1:
        return mp.gamma(a) - _lower_gamma_series(a, t, ctx)
    return _upper_gamma_cf(a, t, ctx)


def lower_incomplete_gamma(a, t, ctx: PrecisionContext | None = None):
    """gamma(a, t) = Gamma(a) - Gamma(a, t), computed without cancellation for small t."""
    ctx = _ctx(ctx)
    mp = ctx.mp
    a, t = to_real(a, ctx), to_real(t, ctx)
    if a <= 0:
        raise ValueError("a must be positive")
    if t <= 0:
        return mp.zero
    if t <= a + 1:
        return _lower_gamma_series(a, t, ctx)
    return mp.gamma(a) - _upper_gamma_cf(a, t, ctx)


def regularized_lower_gamma(a, t, ctx: PrecisionContext | None = None):
    """P(a, t) = gamma(a, t) / Gamma(a)."""
    ctx = _ctx(ctx)
    return lower_incomplete_gamma(a, t, ctx) / ctx.mp.gamma(to_real(a, ctx))


def laguerre(k: int, alpha, t, ctx: PrecisionContext | None = None):
    """Generalized Laguerre polynomial L_k^(alpha)(t) by its explicit sum."""
    ctx = _ctx(ctx)
    mp = ctx.mp
    alpha, t = to_real(alpha, ctx), to_real(t, ctx)
    if k == 0:
        return mp.one
    total = mp.zero
    power = mp.one  # (-t)^i / i!
    for i in range(k + 1):
        total += binomial_real(k + alpha, k - i, ctx) * power
        power = power * (-t) / (i + 1)
    return total


def laguerre_table(kmax: int, alpha: float, x) -> np.ndarray:
    """All L_0..L_kmax at float points ``x`` via the three-term recurrence.

    Returns an array of shape ``(kmax + 1,) + np.shape(x)``.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((kmax + 1,) + x.shape)
    out[0] = 1.0
    if kmax >= 1:
        out[1] = alpha + 1.0 - x
    for k in range(1, kmax):
        out[k + 1] = ((2 * k + alpha + 1.0 - x) * out[k] - (k + alpha) * out[k - 1]) / (k + 1)
    return out


def _q_norm(k: int, alpha, ctx):
    # Gamma(alpha+1+k) / (k! Gamma(alpha+1)) = C(k + alpha, k)
    return binomial_real(k + alpha, k, ctx)


def orthonormal_q(k: int, alpha, t, ctx: PrecisionContext | None = None):
    """Q_k^(alpha)(t): Laguerre polynomial orthonormal under the Gamma(alpha+1, 1) law."""
    ctx = _ctx(ctx)
    alpha = to_real(alpha, ctx)
    sign = -1 if k % 2 else 1
    return sign * laguerre(k, alpha, t, ctx) / ctx.mp.sqrt(_q_norm(k, alpha, ctx))


_stirling_rows: list[list[int]] = [[1]]
_stirling_lock = threading.Lock()


def stirling_row(n: int) -> list[int]:
    """Row n of the unsigned Stirling numbers of the first kind, [n 0] .. [n n]."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    rows = _stirling_rows
    if n < len(rows):
        return rows[n]
    with _stirling_lock:
        while len(rows) <= n:
            m = len(rows) - 1
            prev = rows[m]
            new = [0] * (m + 2)
            for j in range(1, m + 2):
                new[j] = prev[j - 1] + (m * prev[j] if j <= m else 0)
            rows.append(new)
    return rows[n]


def unsigned_stirling_first(n: int, j: int) -> int:
    """[n j]: permutations of n elements with exactly j cycles (exact integer)."""
    if j < 0 or j > n:
        return 0
    return stirling_row(n)[j]
