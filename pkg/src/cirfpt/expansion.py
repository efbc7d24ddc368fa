"""Truncated Laguerre-Gamma expansion of the FPT density.

The density is approximated as

    g_n(t) = f_{alpha,beta}(t) sum_{k=0}^n B_k L_k^(alpha)(beta t)
           = f_{alpha,beta}(t) sum_{k=0}^n h_{n,k} (-beta t)^k / k!,

with f_{alpha,beta} the gamma reference density.  Coefficients are built in
extended precision; the float methods on :class:`LaguerreGammaExpansion`
evaluate through stable three-term recurrences for plotting and quadrature.

Coefficients are scaled so that B_0 = 1:

    B_k = sum_j C(k, j) (-beta)^j E[T^j] / <alpha+1>_j .
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from math import comb, factorial

import numpy as np
from scipy import special

from .cir import CirParams, CumulantVector, MomentVector, cumulants_to_moments, fpt_cumulants
from .errors import InvalidReference, NoValidOrder, PrecisionLoss
from .specfun import (
    PrecisionContext,
    binomial_real,
    context_of,
    default_context,
    laguerre_table,
    lower_incomplete_gamma,
    rising_factorial,
    to_real,
    upper_incomplete_gamma,
)

__all__ = [
    "GammaReference",
    "LaguerreGammaExpansion",
    "DispersionReport",
    "OrderRecord",
    "select_gamma_params",
    "standardize",
    "coeff_B_direct",
    "coeff_B_recursive",
    "coeff_h_update",
    "h_from_B",
    "pdf_eval",
    "cdf_eval",
    "cdf_increment",
    "normalization_residual",
    "build_expansion",
    "expansion_from_params",
    "fourier_coefficient_a",
    "a_from_B",
    "tail_error_estimate",
]

DEFAULT_EPS = 1e-3
DEFAULT_N_MAX = 60
CHECK_TOL = 1e-10


def _sqrt(x):
    mpctx = getattr(x, "context", None)
    return mpctx.sqrt(x) if mpctx is not None else x**0.5


def _mpstr(x) -> str:
    mpctx = getattr(x, "context", None)
    if mpctx is None:
        return repr(float(x))
    digits = int(mpctx.prec * 0.30103) + 2
    return mpctx.nstr(x, digits)


@dataclass(frozen=True)
class GammaReference:
    """Gamma reference density f(t) = beta (beta t)^alpha e^(-beta t) / Gamma(alpha+1).

    ``sigma_T`` is the time scale used for standardization (1 if none).
    """

    alpha: object
    beta: object
    sigma_T: object = 1

    def __post_init__(self):
        if not self.alpha > -1:
            raise InvalidReference(f"alpha = {float(self.alpha):.6g} must exceed -1")
        if not self.beta > 0:
            raise InvalidReference("beta must be positive")
        if not self.sigma_T > 0:
            raise InvalidReference("sigma_T must be positive")

    @property
    def mean(self):
        return (self.alpha + 1) / self.beta

    @property
    def variance(self):
        return (self.alpha + 1) / self.beta**2

    def pdf(self, t) -> np.ndarray:
        """Float evaluation of the reference density."""
        a, b = float(self.alpha), float(self.beta)
        return _gamma_pdf(np.asarray(t, dtype=float), a, b)

    def as_dict(self) -> dict:
        return {"alpha": _mpstr(self.alpha), "beta": _mpstr(self.beta), "sigma_T": _mpstr(self.sigma_T)}


def _gamma_pdf(t: np.ndarray, a: float, b: float) -> np.ndarray:
    x = b * t
    with np.errstate(divide="ignore", invalid="ignore"):
        logf = np.log(b) + a * np.log(x) - x - special.gammaln(a + 1.0)
        out = np.exp(logf)
    at0 = np.inf if a < 0 else (b / special.gamma(a + 1.0) if a == 0 else 0.0)
    out = np.where(t > 0, out, np.where(t == 0, at0, 0.0))
    return out


@dataclass(frozen=True)
class DispersionReport:
    """Coefficient of variation and entropy-based dispersion of an FPT law."""

    c_v: float
    c_h: float
    mean: float
    variance: float

    def __post_init__(self):
        if not (self.c_v > 0 and self.c_h > 0):
            raise ValueError("dispersion coefficients must be positive")


@dataclass(frozen=True)
class OrderRecord:
    """Diagnostics for one truncation order visited by the builder."""

    n: int
    residual: float
    h0: float
    hn_signed: float  # (-1)^n h_{n,n}

    @property
    def signs_ok(self) -> bool:
        return self.h0 > 0 and self.hn_signed > 0


@dataclass(frozen=True)
class LaguerreGammaExpansion:
    """Truncated expansion of order ``n``.

    ``B`` and ``h`` hold extended-precision coefficients; ``moments`` are the
    (possibly standardized) moments that produced them.  ``reached_n_max``
    is set when the order scan ran out of room before stopping on its own.
    """

    ref: GammaReference
    n: int
    B: tuple
    h: tuple
    moments: MomentVector | None = None
    reached_n_max: bool = False
    trace: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if len(self.B) != self.n + 1 or len(self.h) != self.n + 1:
            raise ValueError("B and h must have n + 1 entries")

    # float machinery -----------------------------------------------------
    @cached_property
    def _af(self) -> float:
        return float(self.ref.alpha)

    @cached_property
    def _bf(self) -> float:
        return float(self.ref.beta)

    @cached_property
    def _Bf(self) -> np.ndarray:
        return np.array([float(b) for b in self.B])

    @property
    def sigma_T(self) -> float:
        return float(self.ref.sigma_T)

    def poly(self, t) -> np.ndarray:
        """p_n(t) = sum_k B_k L_k(beta t)."""
        x = self._bf * np.asarray(t, dtype=float)
        L = laguerre_table(self.n, self._af, x)
        return np.tensordot(self._Bf, L, axes=1)

    def poly_prime(self, t) -> np.ndarray:
        """d p_n / dt using dL_k^(a)/dx = -L_{k-1}^(a+1)."""
        t = np.asarray(t, dtype=float)
        if self.n == 0:
            return np.zeros_like(t)
        L1 = laguerre_table(self.n - 1, self._af + 1.0, self._bf * t)
        return -self._bf * np.tensordot(self._Bf[1:], L1, axes=1)

    def pdf(self, t) -> np.ndarray:
        """g_n(t) in standardized time units (may be negative)."""
        t = np.asarray(t, dtype=float)
        return _gamma_pdf(t, self._af, self._bf) * self.poly(t)

    def pdf_prime(self, t) -> np.ndarray:
        """Analytic derivative of :meth:`pdf` for t > 0."""
        t = np.asarray(t, dtype=float)
        f = _gamma_pdf(t, self._af, self._bf)
        with np.errstate(divide="ignore", invalid="ignore"):
            fp = f * (self._af / t - self._bf)
        return fp * self.poly(t) + f * self.poly_prime(t)

    def cdf(self, t) -> np.ndarray:
        """G_n(t) through P(alpha+1, x) plus a Laguerre correction, x = beta t."""
        t = np.asarray(t, dtype=float)
        x = self._bf * np.clip(t, 0.0, None)
        a1 = self._af + 1.0
        base = special.gammainc(a1, x)
        if self.n == 0:
            return np.where(t > 0, base, 0.0)
        L1 = laguerre_table(self.n - 1, a1, x)
        k = np.arange(1, self.n + 1, dtype=float)
        corr = np.tensordot(self._Bf[1:] / k, L1, axes=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.exp(a1 * np.log(x) - x - special.gammaln(a1))
        out = base + np.where(x > 0, w, 0.0) * corr
        return np.where(t > 0, out, 0.0)

    def pdf_time(self, t) -> np.ndarray:
        """Density of the unstandardized FPT, (1/sigma_T) g_n(t / sigma_T)."""
        s = self.sigma_T
        return self.pdf(np.asarray(t, dtype=float) / s) / s

    def cdf_time(self, t) -> np.ndarray:
        """Distribution function of the unstandardized FPT."""
        return self.cdf(np.asarray(t, dtype=float) / self.sigma_T)

    def support_hint(self, mass: float = 0.9999) -> float:
        """Standardized time covering ``mass`` of the reference gamma law."""
        return float(special.gammaincinv(self._af + 1.0, mass) / self._bf)

    @property
    def signs_ok(self) -> bool:
        return bool(self.h[0] > 0 and (-1) ** self.n * self.h[self.n] > 0)

    # serialization ---------------------------------------------------------
    def as_dict(self) -> dict:
        d = self.ref.as_dict()
        d.update(
            n=self.n,
            B=[_mpstr(b) for b in self.B],
            h=[_mpstr(v) for v in self.h],
            reached_n_max=self.reached_n_max,
        )
        if self.moments is not None:
            d["moments"] = [_mpstr(m) for m in self.moments.values]
        return d

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.as_dict(), indent=indent)

    @classmethod
    def from_dict(cls, d: dict, ctx: PrecisionContext | None = None) -> "LaguerreGammaExpansion":
        ctx = ctx or default_context()
        mpf = ctx.mp.mpf
        ref = GammaReference(mpf(d["alpha"]), mpf(d["beta"]), mpf(d.get("sigma_T", "1")))
        moments = None
        if "moments" in d:
            moments = MomentVector(tuple(mpf(m) for m in d["moments"]))
        return cls(
            ref=ref,
            n=int(d["n"]),
            B=tuple(mpf(b) for b in d["B"]),
            h=tuple(mpf(v) for v in d["h"]),
            moments=moments,
            reached_n_max=bool(d.get("reached_n_max", False)),
        )

    @classmethod
    def from_json(cls, text: str, ctx: PrecisionContext | None = None) -> "LaguerreGammaExpansion":
        return cls.from_dict(json.loads(text), ctx)


def select_gamma_params(c1, c2) -> GammaReference:
    """Method-of-moments gamma reference: alpha = c1^2/c2 - 1, beta = c1/c2."""
    if not (c1 > 0 and c2 > 0):
        raise InvalidReference("c1 and c2 must be positive")
    return GammaReference(alpha=c1 * c1 / c2 - 1, beta=c1 / c2, sigma_T=1)


def standardize(c: CumulantVector) -> tuple[CumulantVector, object]:
    """Cumulants of T / sigma_T with sigma_T = sqrt(c_2); the new c_2 is exactly 1."""
    c2 = c.values[1]
    if not c2 > 0:
        raise ValueError("c_2 must be positive")
    sigma = _sqrt(c2)
    vals = list(c.scaled(sigma).values)
    vals[1] = c2 / c2
    return CumulantVector(tuple(vals)), sigma


def _ctx_for(moments: MomentVector, ctx):
    if ctx is not None:
        return ctx
    return context_of(moments.values[0]) if moments.K else default_context()


def _ab(ref, ctx):
    return to_real(ref.alpha, ctx), to_real(ref.beta, ctx)


def coeff_B_direct(k: int, moments: MomentVector, ref: GammaReference, ctx: PrecisionContext | None = None):
    """B_k = sum_{j=0}^k C(k, j) (-beta)^j E[T^j] / <alpha+1>_j  (B_0 = 1)."""
    ctx = _ctx_for(moments, ctx)
    if k > moments.K:
        raise ValueError(f"need {k} moments, have {moments.K}")
    alpha, beta = _ab(ref, ctx)
    total = ctx.mp.zero
    poch = ctx.mp.one
    for j in range(k + 1):
        if j:
            poch *= alpha + j
        mj = ctx.mp.one if j == 0 else to_real(moments.raw(j), ctx)
        total += comb(k, j) * (-beta) ** j * mj / poch
    return total


def coeff_B_recursive(k: int, B_prev, moments: MomentVector, ref: GammaReference, ctx: PrecisionContext | None = None):
    """B_k from B_0..B_{k-1}.

    B_k = sum_{j=1}^k C(k, j) (-1)^(j+1) B_{k-j} + (-beta)^k E[T^k] / <alpha+1>_k.
    """
    ctx = _ctx_for(moments, ctx)
    if len(B_prev) < k:
        raise ValueError("B_0..B_{k-1} required")
    if k == 0:
        return ctx.mp.one
    alpha, beta = _ab(ref, ctx)
    acc = ctx.mp.zero
    for j in range(1, k + 1):
        sign = 1 if j % 2 else -1
        acc += sign * comb(k, j) * B_prev[k - j]
    return acc + (-beta) ** k * to_real(moments.raw(k), ctx) / rising_factorial(alpha + 1, k, ctx)


def coeff_h_update(h_prev, B_next, ref: GammaReference, ctx: PrecisionContext | None = None) -> list:
    """h_{n+1, .} from h_{n, .} and B_{n+1}."""
    ctx = ctx or context_of(B_next)
    n = len(h_prev) - 1
    alpha = to_real(ref.alpha, ctx)
    out = [h_prev[i] + B_next * binomial_real(alpha + n + 1, n + 1 - i, ctx) for i in range(n + 1)]
    out.append(B_next)
    return out


def h_from_B(B, ref: GammaReference, ctx: PrecisionContext | None = None) -> list:
    """Direct sum h_{n,k} = sum_{j=k}^n B_j C(alpha+j, j-k)."""
    ctx = ctx or context_of(B[0])
    n = len(B) - 1
    alpha = to_real(ref.alpha, ctx)
    return [
        sum((B[j] * binomial_real(alpha + j, j - k, ctx) for j in range(k, n + 1)), ctx.mp.zero)
        for k in range(n + 1)
    ]


def _residual(h, alpha, ctx):
    total = ctx.mp.zero
    poch = ctx.mp.one
    for i, hi in enumerate(h):
        if i:
            poch *= alpha + i
        total += (-1) ** i * hi * poch / factorial(i)
    return abs(total - 1)


def normalization_residual(e: LaguerreGammaExpansion, ctx: PrecisionContext | None = None):
    """|sum_i (-1)^i h_{n,i} <alpha+1>_i / i! - 1|; zero for exact arithmetic."""
    ctx = ctx or context_of(e.h[0])
    return _residual(e.h, to_real(e.ref.alpha, ctx), ctx)


def pdf_eval(e: LaguerreGammaExpansion, t, ctx: PrecisionContext | None = None):
    """g_n(t) in extended precision, p_n by nested products over h."""
    ctx = ctx or context_of(e.h[0])
    mp = ctx.mp
    t = to_real(t, ctx)
    if not t > 0:
        raise ValueError("t must be positive")
    alpha, beta = _ab(e.ref, ctx)
    x = beta * t
    acc = e.h[e.n]
    for k in range(e.n - 1, -1, -1):
        acc = e.h[k] + acc * (-x) / (k + 1)
    f = beta * mp.exp(alpha * mp.log(x) - x - mp.loggamma(alpha + 1))
    return f * acc


def cdf_eval(e: LaguerreGammaExpansion, t, ctx: PrecisionContext | None = None):
    """G_n(t) = (1/Gamma(alpha+1)) sum_k (-1)^k h_{n,k} gamma(alpha+k+1, beta t) / k!."""
    ctx = ctx or context_of(e.h[0])
    mp = ctx.mp
    t = to_real(t, ctx)
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return mp.zero
    alpha, beta = _ab(e.ref, ctx)
    x = beta * t
    total = mp.zero
    for k in range(e.n + 1):
        total += (-1) ** k * e.h[k] * lower_incomplete_gamma(alpha + k + 1, x, ctx) / factorial(k)
    return total / mp.gamma(alpha + 1)


def cdf_increment(e: LaguerreGammaExpansion, t, dt, ctx: PrecisionContext | None = None):
    """G_n(t + dt) - G_n(t) through differences of upper incomplete gammas."""
    ctx = ctx or context_of(e.h[0])
    mp = ctx.mp
    t, dt = to_real(t, ctx), to_real(dt, ctx)
    if t < 0 or not dt > 0:
        raise ValueError("need t >= 0 and dt > 0")
    alpha, beta = _ab(e.ref, ctx)
    x0, x1 = beta * t, beta * (t + dt)
    total = mp.zero
    for k in range(e.n + 1):
        a = alpha + k + 1
        diff = upper_incomplete_gamma(a, x0, ctx) - upper_incomplete_gamma(a, x1, ctx)
        total += (-1) ** k * e.h[k] * diff / factorial(k)
    return total / mp.gamma(alpha + 1)


def _agree(d, r, tol) -> bool:
    scale = max(abs(d), abs(r), 1)
    return abs(d - r) <= tol * scale


def build_expansion(
    moments: MomentVector,
    ref: GammaReference,
    eps: float = DEFAULT_EPS,
    n_max: int = DEFAULT_N_MAX,
    *,
    n_min: int = 1,
    n_fixed: int | None = None,
    ctx: PrecisionContext | None = None,
    check_tol: float = CHECK_TOL,
) -> LaguerreGammaExpansion:
    """Grow the expansion order by order and pick the truncation.

    Each B_k is computed both directly and by the recursion; disagreement
    beyond ``check_tol`` raises :class:`PrecisionLoss`.  The scan stops at
    the first order whose normalization residual exceeds ``eps`` or whose
    h_{n,0} is not positive.  The returned order is the largest scanned n >=
    ``n_min`` with h_{n,0} > 0, (-1)^n h_{n,n} > 0 and residual <= ``eps``.
    ``n_fixed`` skips the selection and returns that order.
    """
    ctx = _ctx_for(moments, ctx)
    top = n_max if n_fixed is None else n_fixed
    if top > moments.K:
        raise ValueError(f"need {top} moments, have {moments.K}")
    alpha = to_real(ref.alpha, ctx)
    mp = ctx.mp
    B = [mp.one]
    h = [mp.one]
    states = [(tuple(B), tuple(h))]
    trace = []
    stopped = False
    for n in range(top + 1):
        if n:
            bd = coeff_B_direct(n, moments, ref, ctx)
            br = coeff_B_recursive(n, B, moments, ref, ctx)
            if not _agree(bd, br, check_tol):
                raise PrecisionLoss(
                    f"B_{n}: direct {mp.nstr(bd, 12)} vs recursive {mp.nstr(br, 12)} at {ctx.digits} bits"
                )
            B.append(bd)
            h = coeff_h_update(h, bd, ref, ctx)
            states.append((tuple(B), tuple(h)))
        res = _residual(h, alpha, ctx)
        trace.append(OrderRecord(n, float(res), float(h[0]), float((-1) ** n * h[n])))
        if n_fixed is None and n >= 1 and (res > eps or not h[0] > 0):
            stopped = True
            break
    trace = tuple(trace)
    if n_fixed is not None:
        Bn, hn = states[n_fixed]
        return LaguerreGammaExpansion(ref, n_fixed, Bn, hn, moments, False, trace)
    ok = [r.n for r in trace if r.n >= n_min and r.signs_ok and r.residual <= eps]
    if not ok:
        raise NoValidOrder(f"no order in [{n_min}, {trace[-1].n}] satisfies the sign conditions")
    n = ok[-1]
    reached = not stopped
    if reached:
        warnings.warn(f"order scan reached n_max = {n_max} without stopping", RuntimeWarning, stacklevel=2)
    Bn, hn = states[n]
    return LaguerreGammaExpansion(ref, n, Bn, hn, moments, reached, trace)


def expansion_from_params(
    p: CirParams,
    eps: float = DEFAULT_EPS,
    n_max: int = DEFAULT_N_MAX,
    *,
    standardized: bool = True,
    n_fixed: int | None = None,
    n_min: int = 1,
    ctx: PrecisionContext | None = None,
    max_digits: int = 4096,
) -> LaguerreGammaExpansion:
    """Cumulants -> (standardized) moments -> expansion, doubling precision on loss."""
    ctx = ctx or default_context()
    K = n_max if n_fixed is None else n_fixed
    K = max(K, 2)
    while True:
        try:
            c = fpt_cumulants(p, K, ctx)
            sigma = 1
            if standardized:
                c, sigma = standardize(c)
            ref = select_gamma_params(c.values[0], c.values[1])
            ref = GammaReference(ref.alpha, ref.beta, sigma)
            m = cumulants_to_moments(c)
            return build_expansion(m, ref, eps, n_max, n_min=n_min, n_fixed=n_fixed, ctx=ctx)
        except PrecisionLoss:
            if ctx.digits * 2 > max_digits:
                raise
            ctx = ctx.with_digits(ctx.digits * 2)


def fourier_coefficient_a(k: int, moments: MomentVector, ref: GammaReference, ctx: PrecisionContext | None = None):
    """a_k = E[Q_k(beta T)] with Q_k expanded as a polynomial in beta T."""
    ctx = _ctx_for(moments, ctx)
    if k > moments.K:
        raise ValueError(f"need {k} moments, have {moments.K}")
    alpha, beta = _ab(ref, ctx)
    mp = ctx.mp
    total = mp.zero
    for i in range(k + 1):
        mi = mp.one if i == 0 else to_real(moments.raw(i), ctx)
        total += binomial_real(k + alpha, k - i, ctx) * (-beta) ** i * mi / factorial(i)
    sign = -1 if k % 2 else 1
    return sign * total / mp.sqrt(binomial_real(k + alpha, k, ctx))


def a_from_B(k: int, Bk, alpha, ctx: PrecisionContext | None = None):
    """a_k = (-1)^k B_k sqrt(Gamma(alpha+1+k) / (k! Gamma(alpha+1)))."""
    ctx = ctx or context_of(Bk)
    sign = -1 if k % 2 else 1
    return sign * Bk * ctx.mp.sqrt(binomial_real(to_real(alpha, ctx) + k, k, ctx))


def tail_error_estimate(moments: MomentVector, ref: GammaReference, n: int, k_max: int, ctx: PrecisionContext | None = None):
    """sqrt(sum_{k=n+1}^{k_max} a_k^2), a lower bound on the L2 truncation error."""
    if k_max <= n:
        raise ValueError("k_max must exceed n")
    ctx = _ctx_for(moments, ctx)
    s = sum((fourier_coefficient_a(k, moments, ref, ctx) ** 2 for k in range(n + 1, k_max + 1)), ctx.mp.zero)
    return ctx.mp.sqrt(s)
