"""CIR model, boundary classification and exact first-passage cumulants.

The process is dY = (-tau Y + mu) dt + sigma sqrt(Y - c) dW on (c, inf).
For an upcrossing y0 < S, the first-passage time T through S has cumulants

    c_k(T) = (-tau)^(-k) [c*_k(y0) - c*_k(S)],

where c*_k(w) is the k-th logarithmic polynomial of h_1..h_k evaluated at
2 tau (w - c) / sigma^2, and h_j are Stirling-weighted Kummer-type series.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from fractions import Fraction
from math import comb, factorial
from pathlib import Path

from .bell import complete_bell_sequence, log_partition_poly, log_partition_sequence
from .errors import (
    DegenerateStart,
    EntranceViolation,
    InvalidParams,
    NonConvergent,
    UnsupportedConfiguration,
)
from .specfun import PrecisionContext, default_context, kummer_phi, stirling_row, to_real

__all__ = [
    "CirParams",
    "CASES",
    "CumulantVector",
    "MomentVector",
    "boundary_index",
    "h_series",
    "h_series_vector",
    "c_star",
    "c_star_vector",
    "fpt_cumulants",
    "cumulants_to_moments",
    "moments_to_cumulants",
    "fpt_moments_bell",
    "laplace_transform",
    "MAX_ORDER",
]

MAX_ORDER = 64


@dataclass(frozen=True)
class CirParams:
    """SDE parameters plus start value and threshold.

    Numeric fields accept ints, floats, Fractions or ``"p/q"`` strings;
    rationals are carried exactly into extended-precision arithmetic.
    """

    tau: float
    mu: float
    sigma: float
    c: float
    y0: float
    S: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, str):
                object.__setattr__(self, f.name, Fraction(v.strip()))
        if not self.sigma > 0:
            raise InvalidParams("sigma must be positive")
        if not self.tau > 0:
            raise InvalidParams("tau must be positive")
        if not self.c <= 0:
            raise InvalidParams("c must be nonpositive")
        if not self.y0 > self.c:
            raise InvalidParams("y0 must lie above the lower boundary c")
        if not self.S > self.c:
            raise InvalidParams("S must lie above the lower boundary c")
        s = self.s
        if s < 1:
            raise EntranceViolation(f"boundary index s = {float(s):.6g} < 1: c is not an entrance boundary")

    @property
    def s(self):
        """Boundary index 2 (mu - c tau) / sigma^2 (exact for rational inputs)."""
        return 2 * (_exact(self.mu) - _exact(self.c) * _exact(self.tau)) / _exact(self.sigma) ** 2

    def as_dict(self) -> dict:
        return {f.name: float(getattr(self, f.name)) for f in fields(self)}

    def to_json(self) -> str:
        return json.dumps(self.as_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "CirParams":
        missing = [f.name for f in fields(cls) if f.name not in d]
        if missing:
            raise InvalidParams(f"missing parameter(s): {', '.join(missing)}")
        return cls(**{f.name: d[f.name] for f in fields(cls)})

    @classmethod
    def from_json(cls, text: str) -> "CirParams":
        # decimal literals are parsed exactly, so "0.2" means 1/5
        return cls.from_dict(json.loads(text, parse_float=Fraction))

    @classmethod
    def load(cls, path) -> "CirParams":
        return cls.from_json(Path(path).read_text())


def _exact(x):
    if isinstance(x, float):
        return Fraction(x)
    return x


def _dec(s: str) -> Fraction:
    return Fraction(s)


CASES = {
    "A": CirParams(tau=Fraction(2, 3), mu=_dec("0.9"), sigma=_dec("1.2"), c=0, y0=_dec("0.2"), S=1),
    "B": CirParams(tau=_dec("0.25"), mu=_dec("0.005"), sigma=_dec("0.1"), c=0, y0=_dec("0.01"), S=_dec("0.02")),
    "C": CirParams(tau=_dec("0.2"), mu=3, sigma=_dec("1.2"), c=-10, y0=0, S=10),
}


def boundary_index(p: CirParams, ctx: PrecisionContext | None = None):
    """s = 2 (mu - c tau) / sigma^2; float without a context, mpf with one."""
    s = p.s
    if s < 1:
        raise EntranceViolation(f"s = {float(s):.6g} < 1")
    return float(s) if ctx is None else to_real(s, ctx)


@dataclass(frozen=True)
class CumulantVector:
    """Cumulants c_1..c_K; ``values[k-1]`` holds c_k."""

    values: tuple

    @property
    def K(self) -> int:
        return len(self.values)

    def __len__(self):
        return len(self.values)

    @property
    def mean(self):
        return self.values[0]

    @property
    def variance(self):
        return self.values[1]

    @property
    def cv(self):
        return self.values[1] ** 0.5 / self.values[0]

    @property
    def skewness(self):
        return self.values[2] / self.values[1] ** 1.5

    @property
    def excess_kurtosis(self):
        return self.values[3] / self.values[1] ** 2

    def scaled(self, scale) -> "CumulantVector":
        """Cumulants of T / scale."""
        return CumulantVector(tuple(v / scale ** (k + 1) for k, v in enumerate(self.values)))


@dataclass(frozen=True)
class MomentVector:
    """Raw moments m_1..m_K; ``values[k-1]`` holds E[T^k]."""

    values: tuple

    @property
    def K(self) -> int:
        return len(self.values)

    def __len__(self):
        return len(self.values)

    def raw(self, k: int):
        """E[T^k] including the k = 0 convention E[T^0] = 1."""
        if k == 0:
            return self.values[0] * 0 + 1
        return self.values[k - 1]

    def _central(self, k: int):
        m1 = self.values[0]
        return sum(comb(k, i) * self.raw(i) * (-m1) ** (k - i) for i in range(k + 1))

    @property
    def mean(self):
        return self.values[0]

    @property
    def variance(self):
        return self.values[1] - self.values[0] ** 2

    @property
    def cv(self):
        return self.variance ** 0.5 / self.mean

    @property
    def skewness(self):
        return self._central(3) / self.variance ** 1.5

    @property
    def kurtosis(self):
        return self._central(4) / self.variance ** 2

    @property
    def excess_kurtosis(self):
        return self.kurtosis - 3

    def hankel_ok(self) -> bool:
        """Positive-definiteness of the Hankel moment matrices up to order 4."""
        m = [self.raw(i) for i in range(min(self.K, 4) + 1)]
        ok = True
        if len(m) > 2:
            ok = ok and m[2] * m[0] - m[1] ** 2 > 0
        if len(m) > 4:
            det3 = (
                m[0] * (m[2] * m[4] - m[3] ** 2)
                - m[1] * (m[1] * m[4] - m[3] * m[2])
                + m[2] * (m[1] * m[3] - m[2] ** 2)
            )
            ok = ok and det3 > 0
        return bool(ok)


def _series_done(incs, totals, tol) -> bool:
    for inc, tot in zip(incs, totals):
        if inc != 0 and abs(inc) > tol * abs(tot):
            return False
    return True


def h_series_vector(y, s, K: int, ctx: PrecisionContext | None = None) -> list:
    """[h_0, h_1, ..., h_K] at argument y, with h_0 = 1.

    h_j(y) = j! sum_{n>=j} [n j] y^n / (n! <s>_n).  All orders are summed in a
    single pass over n; the pass stops once every order has had two
    consecutive relative increments below the series tolerance.
    """
    ctx = ctx or default_context()
    mp = ctx.mp
    y, s = to_real(y, ctx), to_real(s, ctx)
    if y < 0:
        raise ValueError("y must be nonnegative")
    h = [mp.one] + [mp.zero] * K
    if y == 0 or K == 0:
        return h
    jfact = [factorial(j) for j in range(K + 1)]
    base = mp.one  # y^n / (n! <s>_n)
    quiet = 0
    for n in range(1, ctx.max_terms + 1):
        base = base * y / (n * (s + n - 1))
        row = stirling_row(n)
        top = min(n, K)
        incs = []
        for j in range(1, top + 1):
            inc = (jfact[j] * row[j]) * base
            h[j] += inc
            incs.append(inc)
        if n >= K and _series_done(incs, h[1 : top + 1], ctx.tol):
            quiet += 1
            if quiet >= 2:
                return h
        else:
            quiet = 0
    raise NonConvergent(f"h-series at y={y} exceeded {ctx.max_terms} terms")


def h_series(j: int, y, s, ctx: PrecisionContext | None = None):
    """Single h_j(y); see :func:`h_series_vector`."""
    if j < 1:
        raise ValueError("j must be positive")
    ctx = ctx or default_context()
    mp = ctx.mp
    y, s = to_real(y, ctx), to_real(s, ctx)
    if y < 0:
        raise ValueError("y must be nonnegative")
    if y == 0:
        return mp.zero
    # y^j / <s>_j times [n j] j!/n! y^(n-j) / ((s+j)...(s+n-1)), built incrementally
    base = mp.one
    for n in range(1, j + 1):
        base = base * y / (n * (s + n - 1))
    total = mp.zero
    quiet = 0
    jf = factorial(j)
    for n in range(j, j + ctx.max_terms):
        if n > j:
            base = base * y / (n * (s + n - 1))
        inc = (jf * stirling_row(n)[j]) * base
        total += inc
        if abs(inc) <= ctx.tol * abs(total):
            quiet += 1
            if quiet >= 2:
                return total
        else:
            quiet = 0
    raise NonConvergent(f"h_{j} series at y={y} exceeded {ctx.max_terms} terms")


def _scaled_state(w, p: CirParams, ctx):
    tau, c, sigma = (to_real(v, ctx) for v in (p.tau, p.c, p.sigma))
    return 2 * tau * (to_real(w, ctx) - c) / sigma**2


def c_star_vector(w, p: CirParams, K: int, ctx: PrecisionContext | None = None) -> list:
    """[c*_1(w), ..., c*_K(w)]."""
    ctx = ctx or default_context()
    if w < p.c:
        raise ValueError("w must not lie below c")
    h = h_series_vector(_scaled_state(w, p, ctx), to_real(p.s, ctx), K, ctx)
    return log_partition_sequence(h[1:], K)


def c_star(k: int, w, p: CirParams, ctx: PrecisionContext | None = None):
    """c*_k(w) = P_k[h_1(x), ..., h_k(x)] with x = 2 tau (w - c) / sigma^2."""
    ctx = ctx or default_context()
    if w < p.c:
        raise ValueError("w must not lie below c")
    h = h_series_vector(_scaled_state(w, p, ctx), to_real(p.s, ctx), k, ctx)
    if k <= 20:
        return log_partition_poly(k, h[1:])
    return log_partition_sequence(h[1:], k)[k - 1]


def _check_order(K: int, ctx: PrecisionContext):
    if K < 1:
        raise ValueError("order K must be positive")
    if K > MAX_ORDER and ctx.digits <= 256:
        raise ValueError(f"K = {K} > {MAX_ORDER} needs precision above 256 bits")


def _check_direction(p: CirParams) -> bool:
    """True when the start coincides with the threshold."""
    if p.y0 == p.S:
        return True
    if p.y0 > p.S:
        raise UnsupportedConfiguration("only upcrossings (y0 < S) are supported")
    return False


def fpt_cumulants(p: CirParams, K: int, ctx: PrecisionContext | None = None) -> CumulantVector:
    """Exact FPT cumulants c_1(T)..c_K(T) for an upcrossing.

    A start on the threshold gives T = 0 and all-zero cumulants.
    """
    ctx = ctx or default_context()
    _check_order(K, ctx)
    mp = ctx.mp
    if _check_direction(p):
        return CumulantVector(tuple(mp.zero for _ in range(K)))
    tau = to_real(p.tau, ctx)
    lo = c_star_vector(p.y0, p, K, ctx)
    hi = c_star_vector(p.S, p, K, ctx)
    vals = tuple((lo[k - 1] - hi[k - 1]) / (-tau) ** k for k in range(1, K + 1))
    if not vals[0] > 0:
        raise NonConvergent("first cumulant is not positive; series precision too low")
    return CumulantVector(vals)


def cumulants_to_moments(c: CumulantVector) -> MomentVector:
    """m_k = c_k + sum_{i=1}^{k-1} C(k-1, i-1) c_i m_{k-i}."""
    K = c.K
    m = []
    for k in range(1, K + 1):
        acc = c.values[k - 1]
        for i in range(1, k):
            acc = acc + comb(k - 1, i - 1) * c.values[i - 1] * m[k - i - 1]
        m.append(acc)
    return MomentVector(tuple(m))


def moments_to_cumulants(m: MomentVector) -> CumulantVector:
    """Inverse of :func:`cumulants_to_moments`."""
    return CumulantVector(tuple(log_partition_sequence(list(m.values), m.K)))


def fpt_moments_bell(p: CirParams, K: int, ctx: PrecisionContext | None = None) -> MomentVector:
    """FPT moments through the double complete-Bell convolution.

    E[T^k] = (-1)^k / tau^k sum_i C(k, i) Y_{k-i}[c*(y0)] Y_i[-c*(S)].
    Independent of :func:`cumulants_to_moments`, so the two cross-check.
    """
    ctx = ctx or default_context()
    _check_order(K, ctx)
    mp = ctx.mp
    if _check_direction(p):
        return MomentVector(tuple(mp.zero for _ in range(K)))
    tau = to_real(p.tau, ctx)
    Y0 = complete_bell_sequence(c_star_vector(p.y0, p, K, ctx), K, one=mp.one)
    YS = complete_bell_sequence([-v for v in c_star_vector(p.S, p, K, ctx)], K, one=mp.one)
    out = []
    for k in range(1, K + 1):
        acc = mp.zero
        for i in range(k + 1):
            acc += comb(k, i) * Y0[k - i] * YS[i]
        out.append((-1) ** k * acc / tau**k)
    return MomentVector(tuple(out))


def laplace_transform(z, p: CirParams, ctx: PrecisionContext | None = None):
    """E[exp(-z T)] as a ratio of Kummer functions (diagnostic)."""
    ctx = ctx or default_context()
    z = to_real(z, ctx)
    if not z > 0:
        raise ValueError("z must be positive")
    if p.y0 == p.S:
        return ctx.mp.one
    tau = to_real(p.tau, ctx)
    s = to_real(p.s, ctx)
    num = kummer_phi(z / tau, s, _scaled_state(p.y0, p, ctx), ctx)
    den = kummer_phi(z / tau, s, _scaled_state(p.S, p, ctx), ctx)
    return num / den


def require_nondegenerate(p: CirParams):
    if p.y0 == p.S:
        raise DegenerateStart("y0 = S: the first-passage time is identically zero")
