"""Positivity and monotonicity repairs for a truncated expansion.

Negative lobes of g_n left of the mode are replaced by a power law a t^delta
on (0, t'_2); lobes right of the mode by an exponential a e^(b t) on
(t'_1, t'_2).  A non-monotone cdf grid is repaired by straight-line bridges.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .errors import FitFailure
from .expansion import LaguerreGammaExpansion

__all__ = [
    "NegativeInterval",
    "Patch",
    "CorrectedPdf",
    "default_t_hi",
    "scan_grid",
    "find_negative_intervals",
    "find_mode",
    "correct_origin",
    "correct_tail",
    "correct_pdf",
    "correct_cdf_monotone",
]

GRID_POINTS = 4096


def default_t_hi(e: LaguerreGammaExpansion, tail: float = 1e-6) -> float:
    """Standardized time leaving ``tail`` mass of the reference gamma law beyond it."""
    return float(special.gammainccinv(e._af + 1.0, tail) / e._bf)


def scan_grid(t_hi: float, points: int = GRID_POINTS) -> np.ndarray:
    """Scan grid on (0, t_hi]: a quarter log-spaced near 0, the rest uniform."""
    n_log = points // 4
    lo = np.geomspace(t_hi * 1e-9, t_hi * 1e-2, n_log, endpoint=False)
    hi = np.linspace(t_hi * 1e-2, t_hi, points - n_log)
    return np.concatenate([lo, hi])


@dataclass(frozen=True)
class NegativeInterval:
    """Maximal interval where g_n < 0.  ``t1_neg == 0`` marks a lobe touching the origin."""

    t1_neg: float
    t2_neg: float

    def __post_init__(self):
        if not 0 <= self.t1_neg < self.t2_neg:
            raise ValueError("need 0 <= t1_neg < t2_neg")

    @property
    def at_origin(self) -> bool:
        return self.t1_neg == 0


@dataclass(frozen=True)
class Patch:
    """Replacement of g_n on [t_start, t_end] by a t^delta or a e^(b t)."""

    kind: str  # "power" or "exp"
    t_start: float
    t_end: float
    a: float
    exponent: float  # delta for "power", b for "exp"
    slope_matched: bool = True

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "power":
            with np.errstate(divide="ignore", invalid="ignore"):
                return self.a * np.where(t > 0, t, 0.0) ** self.exponent
        return self.a * np.exp(self.exponent * t)

    def integral(self, lo: float, hi: float) -> float:
        """Integral of the patch function over [lo, hi]."""
        if self.kind == "power":
            d = self.exponent + 1.0
            return self.a * (hi**d - lo**d) / d
        b = self.exponent
        return self.a * (np.exp(b * hi) - np.exp(b * lo)) / b

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "t_start": repr(self.t_start),
            "t_end": repr(self.t_end),
            "a": repr(self.a),
            "exponent": repr(self.exponent),
            "slope_matched": self.slope_matched,
        }


@dataclass(frozen=True)
class CorrectedPdf:
    """Expansion with nonoverlapping patches, sorted by position.

    Beyond ``t_hi`` the remaining (tiny) negative values of g_n are clipped
    to zero; :meth:`cdf` does not account for that clipped mass.
    """

    base: LaguerreGammaExpansion
    patches: tuple = ()
    t_hi: float = np.inf
    intervals: tuple = field(default=(), compare=False)

    def __post_init__(self):
        ends = [(p.t_start, p.t_end) for p in self.patches]
        for (a0, a1), (b0, b1) in zip(ends, ends[1:]):
            if not (a0 < a1 <= b0 < b1):
                raise ValueError("patches must be sorted and disjoint")

    def pdf(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.asarray(self.base.pdf(t), dtype=float).copy()
        for p in self.patches:
            m = (t >= p.t_start) & (t <= p.t_end)
            if np.any(m):
                out = np.where(m, p(t), out)
        out = np.where(t > self.t_hi, np.maximum(out, 0.0), out)
        return out

    def cdf(self, t) -> np.ndarray:
        """cdf of the patched density (base cdf plus patch mass differences)."""
        t = np.asarray(t, dtype=float)
        out = np.asarray(self.base.cdf(t), dtype=float).copy()
        for p in self.patches:
            hi = np.clip(t, p.t_start, p.t_end)
            base_part = self.base.cdf(hi) - self.base.cdf(p.t_start)
            patch_part = np.vectorize(lambda u: p.integral(p.t_start, u))(hi)
            out = out + np.where(t > p.t_start, patch_part - base_part, 0.0)
        return out

    def mass_change(self) -> float:
        """Total mass added by the patches (negative if removed)."""
        total = 0.0
        for p in self.patches:
            total += p.integral(p.t_start, p.t_end) - float(self.base.cdf(p.t_end) - self.base.cdf(p.t_start))
        return total

    def pdf_time(self, t) -> np.ndarray:
        s = self.base.sigma_T
        return self.pdf(np.asarray(t, dtype=float) / s) / s

    def cdf_time(self, t) -> np.ndarray:
        return self.cdf(np.asarray(t, dtype=float) / self.base.sigma_T)

    def as_dict(self) -> dict:
        return {
            "expansion": self.base.as_dict(),
            "t_hi": repr(self.t_hi),
            "patches": [p.as_dict() for p in self.patches],
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.as_dict(), indent=indent)


def _bisect_sign(f, lo, hi):
    return optimize.brentq(f, lo, hi, xtol=1e-300, rtol=1e-12 * 4, maxiter=500)


def find_negative_intervals(e: LaguerreGammaExpansion, t_hi: float | None = None, points: int = GRID_POINTS) -> list:
    """Intervals in (0, t_hi) where g_n < 0, located by grid scan and root refinement.

    The sign of g_n equals that of p_n, which is evaluated instead so that
    the search is not affected by the decay of the reference density.
    """
    if e.n == 0:
        return []
    t_hi = default_t_hi(e) if t_hi is None else t_hi
    grid = scan_grid(t_hi, points)
    p = e.poly(grid)
    poly = lambda u: float(e.poly(u))
    neg = p < 0
    out = []
    i = 0
    while i < len(grid):
        if not neg[i]:
            i += 1
            continue
        j = i
        while j + 1 < len(grid) and neg[j + 1]:
            j += 1
        if i == 0:
            t1 = 0.0 if float(e.h[0]) < 0 else _bisect_sign(poly, 0.0, grid[0])
        else:
            t1 = _bisect_sign(poly, grid[i - 1], grid[i])
        t2 = t_hi if j + 1 >= len(grid) else _bisect_sign(poly, grid[j], grid[j + 1])
        out.append(NegativeInterval(t1, t2))
        i = j + 1
    return out


def find_mode(e: LaguerreGammaExpansion, t_hi: float | None = None, points: int = GRID_POINTS) -> float:
    """Mode of g_n by golden-section search around the highest interior grid maximum.

    With alpha < 0 the density diverges at 0; that boundary spike is not
    treated as the mode.
    """
    t_hi = default_t_hi(e) if t_hi is None else t_hi
    grid = scan_grid(t_hi, points)
    g = e.pdf(grid)
    g = np.where(np.isfinite(g), g, -np.inf)
    interior = np.nonzero((g[1:-1] > g[:-2]) & (g[1:-1] >= g[2:]))[0] + 1
    if len(interior) == 0:
        return float(grid[int(np.argmax(g))])
    k = int(interior[np.argmax(g[interior])])
    res = optimize.minimize_scalar(
        lambda u: -float(e.pdf(u)), bracket=(grid[k - 1], grid[k], grid[k + 1]), method="golden", tol=1e-10
    )
    return float(res.x)


def correct_origin(e: LaguerreGammaExpansion, neg: NegativeInterval, mode: float | None = None) -> Patch:
    """Power-law patch a t^delta on (0, t'_2].

    t'_2 is the first t past the lobe where the running integral of g_n turns
    positive.  (a, delta) match value and slope there; if that gives
    delta <= alpha/2 + 1, delta is set to alpha/2 + 1.1 and only the value is
    matched.
    """
    mode = find_mode(e) if mode is None else mode
    if neg.t2_neg >= mode:
        raise FitFailure("origin lobe must lie left of the mode")
    G = lambda u: float(e.cdf(u))
    lo = neg.t2_neg
    if G(lo) > 0:
        # lobe detached from the origin with positive mass before it
        t2 = lo * (1 + 1e-6)
    else:
        hi = lo
        while G(hi) <= 0:
            hi = hi + (mode - lo) / 64
            if hi >= mode:
                raise FitFailure("running integral stays nonpositive up to the mode")
        t2 = optimize.brentq(G, lo, hi, xtol=1e-300, rtol=1e-15, maxiter=500)
        # push just past the root so g_n > 0 and the integral is positive
        t2 = t2 * (1 + 1e-9)
    g2 = float(e.pdf(t2))
    d2 = float(e.pdf_prime(t2))
    if not g2 > 0:
        raise FitFailure("g_n is not positive at the origin junction")
    floor = e._af / 2 + 1
    delta = t2 * d2 / g2
    matched = True
    if not delta > floor:
        delta = floor + 0.1
        matched = False
    a = g2 / t2**delta
    if not (np.isfinite(a) and a > 0):
        raise FitFailure("origin patch amplitude is not positive and finite")
    return Patch("power", 0.0, t2, a, delta, matched)


def _first_decreasing(e, start, limit, step):
    # first point past start where g_n' < 0 and g_n > 0
    t = start
    while t < limit:
        nxt = t + step
        if float(e.pdf_prime(nxt)) < 0 and float(e.pdf(nxt)) > 0:
            if float(e.pdf_prime(t)) >= 0:
                return optimize.brentq(lambda u: float(e.pdf_prime(u)), t, nxt, rtol=1e-15, maxiter=500) * (1 + 1e-12)
            return nxt
        t = nxt
    return None


def correct_tail(
    e: LaguerreGammaExpansion,
    neg: NegativeInterval,
    *,
    lower: float | None = None,
    t_limit: float | None = None,
) -> Patch:
    """Exponential patch a e^(b t) on [t'_1, t'_2] over a lobe right of the mode.

    t'_2 is the first point past the lobe where g_n decreases (the top of the
    next hump); t'_1 is found by scanning leftward from the lobe start,
    within (t1_neg/10, t1_neg) and above ``lower``, for the first point with
    g_n(t'_1) > g_n(t'_2).  Both values are matched, so b < 0.
    """
    t_limit = 4 * default_t_hi(e) if t_limit is None else t_limit
    width = neg.t2_neg - neg.t1_neg
    t2 = _first_decreasing(e, neg.t2_neg, t_limit, max(width / 64, 1e-6))
    if t2 is None:
        raise FitFailure("no decreasing positive point found right of the lobe")
    g2 = float(e.pdf(t2))
    if not g2 > 0:
        raise FitFailure("g_n is not positive at the right anchor")
    lo = max(neg.t1_neg / 10, lower if lower is not None else 0.0)
    grid = np.linspace(neg.t1_neg, lo, 2049)[1:]
    vals = e.pdf(grid)
    hit = np.nonzero(vals > g2)[0]
    if len(hit) == 0:
        raise FitFailure("no left anchor above the right anchor value")
    t1 = float(grid[hit[0]])
    g1 = float(vals[hit[0]])
    b = (np.log(g2) - np.log(g1)) / (t2 - t1)
    a = g1 * np.exp(-b * t1)
    return Patch("exp", t1, t2, float(a), float(b), False)


def correct_pdf(e: LaguerreGammaExpansion, t_hi: float | None = None, points: int = GRID_POINTS) -> CorrectedPdf:
    """Patch every negative lobe of g_n in (0, t_hi)."""
    t_hi = default_t_hi(e) if t_hi is None else t_hi
    intervals = find_negative_intervals(e, t_hi, points)
    if not intervals:
        return CorrectedPdf(e, (), t_hi, ())
    mode = find_mode(e, t_hi, points)
    patches = []
    tail = []
    for iv in intervals:
        if iv.t2_neg < mode:
            patches.append(correct_origin(e, iv, mode))
        else:
            tail.append(iv)
    lower = max([p.t_end for p in patches], default=mode)
    lower = max(lower, mode)
    i = 0
    while i < len(tail):
        iv = tail[i]
        j = i
        while True:
            merged = NegativeInterval(iv.t1_neg, tail[j].t2_neg)
            try:
                patch = correct_tail(e, merged, lower=lower, t_limit=4 * t_hi)
            except FitFailure:
                if j + 1 < len(tail):
                    j += 1
                    continue
                raise
            # absorb lobes the patch already spans
            while j + 1 < len(tail) and tail[j + 1].t1_neg < patch.t_end:
                j += 1
            if j + 1 < len(tail) and tail[j + 1].t1_neg <= patch.t_end:
                j += 1
                continue
            break
        patches.append(patch)
        lower = patch.t_end
        i = j + 1
    patches.sort(key=lambda p: p.t_start)
    return CorrectedPdf(e, tuple(patches), t_hi, tuple(intervals))


def correct_cdf_monotone(t, G) -> np.ndarray:
    """Make a cdf grid nondecreasing with straight-line bridges, clamped to [0, 1].

    A bridge starts at the last point before a decrease and ends at the
    first later point whose value exceeds the start value; without such a
    point the remainder is held flat.
    """
    t = np.asarray(t, dtype=float)
    G = np.asarray(G, dtype=float).copy()
    if t.shape != G.shape or t.ndim != 1:
        raise ValueError("t and G must be 1-D arrays of equal length")
    if np.any(np.diff(t) <= 0):
        raise ValueError("t must be strictly increasing")
    n = len(G)
    i = 0
    while i < n - 1:
        if G[i + 1] >= G[i]:
            i += 1
            continue
        start = i
        j = i + 1
        while j < n and G[j] <= G[start]:
            j += 1
        if j == n:
            G[start:] = G[start]
            break
        frac = (t[start : j + 1] - t[start]) / (t[j] - t[start])
        G[start : j + 1] = G[start] + frac * (G[j] - G[start])
        i = j
    return np.clip(G, 0.0, 1.0)
