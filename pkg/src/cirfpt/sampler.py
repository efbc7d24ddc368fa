"""Acceptance-rejection sampling of first-passage times from a corrected expansion.

Below a cut-off C, proposals come from the reference gamma law truncated to
(0, C] and are accepted with probability p(G) / max_{[0, C]} p, where
p = g_n / f is the (corrected) polynomial factor.  With probability eps a
draw is instead taken from a shifted exponential on (C, inf).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize, special

from .cir import CirParams
from .correction import CorrectedPdf, correct_cdf_monotone, correct_pdf
from .errors import ConfigError, EnvelopeViolation, InvalidEnvelope
from .expansion import GammaReference, LaguerreGammaExpansion
from .montecarlo import FptSample

__all__ = [
    "ArConfig",
    "vp_radius",
    "cutoff",
    "envelope_constant",
    "prepare",
    "sample_truncated_gamma",
    "sample_truncated_exponential",
    "ar_sample",
    "mixture_cdf",
]

ENVELOPE_GRID = 1024
CDF_STEP = 1e-3


@dataclass(frozen=True)
class ArConfig:
    """Sampler settings; ``C`` and ``M`` are filled in by :func:`prepare`."""

    eps: float = 0.05
    N: int = 10_000
    seed: int = 0
    C: float | None = None
    M: float | None = None

    def __post_init__(self):
        if not 0 < self.eps <= 1:
            raise ConfigError("eps must lie in (0, 1]")
        if self.N < 1:
            raise ConfigError("N must be positive")
        if self.C is not None and not self.C > 0:
            raise ConfigError("C must be positive")
        if self.M is not None and not self.M >= 1 - 1e-9:
            raise ConfigError("M must be at least 1")


def vp_radius(eps: float, sigma2: float) -> float:
    """One-sided Vysochanskij-Petunin radius r with P(X - mean >= r) <= eps."""
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    if eps <= 1 / 6:
        return float(np.sqrt(4 * sigma2 / (9 * eps) - sigma2))
    return float(np.sqrt(max(4 * sigma2 / (1 + 3 * eps) - sigma2, 0.0)))


def _base(e) -> LaguerreGammaExpansion:
    return e.base if isinstance(e, CorrectedPdf) else e


def _mean_var(e) -> tuple[float, float]:
    m = _base(e).moments
    m1, m2 = float(m.raw(1)), float(m.raw(2))
    return m1, m2 - m1 * m1


def cutoff(e, eps: float) -> float:
    """C = E[T] + r(eps) in the units of the expansion."""
    m1, var = _mean_var(e)
    return m1 + vp_radius(eps, var)


def _ratio_fn(e):
    base = _base(e)
    ref = base.ref
    if isinstance(e, CorrectedPdf):
        return lambda t: e.pdf(t) / ref.pdf(t)
    return base.poly


def _prob_below(e, C: float) -> float:
    # monotonicity-repaired cdf of the base expansion at C
    grid = np.arange(CDF_STEP, C + CDF_STEP / 2, CDF_STEP)
    grid[-1] = C
    G = correct_cdf_monotone(grid, _base(e).cdf(grid))
    return float(G[-1])


def envelope_constant(e, C: float, grid: int = ENVELOPE_GRID) -> float:
    """M = P(T_n <= C) / P(X <= C) * max_{[0, C]} p.

    ``e`` may be a :class:`CorrectedPdf` (p = corrected g_n / f) or a raw
    expansion (p = p_n).
    """
    if not C > 0:
        raise ValueError("C must be positive")
    base = _base(e)
    ratio = _ratio_fn(e)
    ts = np.linspace(C / grid, C, grid)
    vals = np.asarray(ratio(ts), dtype=float)
    vals = np.where(np.isfinite(vals), vals, -np.inf)
    k = int(np.argmax(vals))
    pmax = float(vals[k])
    # the ratio at the origin is h_{n,0} for a raw expansion
    if not isinstance(e, CorrectedPdf):
        pmax = max(pmax, float(base.h[0]))
    if 0 < k < grid - 1:
        res = optimize.minimize_scalar(
            lambda u: -float(ratio(u)), bracket=(ts[k - 1], ts[k], ts[k + 1]), method="golden", tol=1e-10
        )
        pmax = max(pmax, -float(res.fun))
    pX = float(special.gammainc(base._af + 1.0, base._bf * C))
    M = _prob_below(e, C) / pX * pmax
    if M < 1 - 1e-9:
        raise InvalidEnvelope(f"M = {M:.6g} < 1")
    return float(M)


def prepare(e, cfg: ArConfig) -> ArConfig:
    """Fill in C (Vysochanskij-Petunin cut-off) and M (envelope constant)."""
    C = cutoff(e, cfg.eps) if cfg.C is None else cfg.C
    M = envelope_constant(e, C) if cfg.M is None else cfg.M
    return replace(cfg, C=C, M=M)


def _open_uniform(rng: np.random.Generator, size) -> np.ndarray:
    # strictly inside (0, 1)
    return (rng.integers(0, 2**53, size=size) + 0.5) / 2.0**53


def sample_truncated_gamma(ref: GammaReference, C: float, rng: np.random.Generator, size=None):
    """Exact draws from the reference gamma law conditioned on (0, C]."""
    if not C > 0:
        raise ValueError("C must be positive")
    a, b = float(ref.alpha) + 1.0, float(ref.beta)
    u = _open_uniform(rng, size) * special.gammainc(a, b * C)
    x = special.gammaincinv(a, u) / b
    x = np.clip(x, np.nextafter(0.0, 1.0), C)
    return float(x) if size is None else x


def sample_truncated_exponential(C: float, mean: float, rng: np.random.Generator, size=None):
    """C - mean * log(1 - u): exponential with the given mean shifted to (C, inf)."""
    if not mean > 0:
        raise ValueError("mean must be positive")
    u = _open_uniform(rng, size)
    t = C - mean * np.log1p(-u)
    return float(t) if size is None else t


def ar_sample(e, cfg: ArConfig, p: CirParams | None = None, rng: np.random.Generator | None = None) -> FptSample:
    """Draw ``cfg.N`` first-passage times; output is in the original time units.

    ``e`` should be a :class:`CorrectedPdf`; a bare expansion is corrected
    first.  Returned metadata carry C, M, the tail count and the number of
    proposals used.
    """
    if isinstance(e, LaguerreGammaExpansion):
        e = correct_pdf(e)
    cfg = prepare(e, cfg)
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    base = e.base
    ref = base.ref
    mean, _ = _mean_var(e)
    C, M = cfg.C, cfg.M
    ratio = _ratio_fn(e)
    pmax = M * special.gammainc(base._af + 1.0, base._bf * C) / _prob_below(e, C)

    tail = rng.random(cfg.N) < cfg.eps
    n_tail = int(tail.sum())
    out = np.empty(cfg.N)
    out[tail] = sample_truncated_exponential(C, mean, rng, n_tail)

    need = cfg.N - n_tail
    accepted = []
    proposals = 0
    while need > 0:
        batch = int(max(64, np.ceil(need * M * 1.2)))
        G = sample_truncated_gamma(ref, C, rng, batch)
        U = _open_uniform(rng, batch)
        r = np.asarray(ratio(G), dtype=float) / pmax
        if np.any(r > 1 + 1e-9):
            raise EnvelopeViolation(f"acceptance ratio {r.max():.6g} exceeds 1; M underestimated")
        ok = np.nonzero(U <= r)[0]
        if ok.size >= need:
            last = ok[need - 1]
            accepted.append(G[ok[:need]])
            proposals += int(last) + 1
            need = 0
        else:
            accepted.append(G[ok])
            proposals += batch
            need -= ok.size
    out[~tail] = np.concatenate(accepted) if accepted else np.empty(0)
    meta = {
        "eps": cfg.eps,
        "C": C,
        "M": M,
        "seed": int(cfg.seed),
        "tail": n_tail,
        "proposals": proposals,
        "accepted": cfg.N - n_tail,
        "sigma_T": base.sigma_T,
    }
    if p is not None:
        meta["params"] = p.as_dict()
    return FptSample(out * base.sigma_T, 0, "ar", meta)


def mixture_cdf(e: CorrectedPdf, cfg: ArConfig, t) -> np.ndarray:
    """Law of the sampler output in standardized units.

    eps [1 - exp(-(t - C)/E[T])]_+ + (1 - eps) P(T_n <= min(t, C)) / P(T_n <= C).
    """
    if cfg.C is None:
        cfg = prepare(e, cfg)
    t = np.asarray(t, dtype=float)
    mean, _ = _mean_var(e)
    C = cfg.C
    tail = np.where(t > C, -np.expm1(-(t - C) / mean), 0.0)
    GC = float(e.cdf(C))
    body = np.asarray(e.cdf(np.clip(t, 0.0, C)), dtype=float) / GC
    return cfg.eps * tail + (1 - cfg.eps) * body
