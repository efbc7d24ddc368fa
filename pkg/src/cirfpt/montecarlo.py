"""Monte Carlo first-passage times and sample-based estimators.

Paths are simulated in fixed-size chunks; chunk ``j`` draws all of its
randomness from ``SeedSequence([seed, j])``, so a sample depends only on the
seed and the configuration, never on how chunks are scheduled.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import special, stats

from .cir import CirParams, CumulantVector, MomentVector, fpt_cumulants, moments_to_cumulants
from .errors import ConfigError, EmptySample
from .expansion import DispersionReport, GammaReference
from .specfun import context_for, laguerre_table

__all__ = [
    "SimulationConfig",
    "FptSample",
    "EmpiricalCdf",
    "SeriesEstimate",
    "simulate",
    "simulate_fpt_milstein",
    "simulate_fpt_transition",
    "transition_step",
    "empirical_cdf",
    "ks_statistic",
    "ks_two_sample",
    "sup_cdf_error",
    "sample_moments",
    "sample_cumulants",
    "orthogonal_series_estimate",
    "mise_first_term",
    "vasicek_entropy",
    "dispersion_report",
]

METHODS = ("milstein", "transition")


@dataclass(frozen=True)
class SimulationConfig:
    """Discretization and sampling settings.

    ``t_max=None`` means 40 times the exact mean first-passage time.
    ``bridge`` adds the Brownian-bridge probability of an unobserved
    crossing inside each step, which removes most of the discrete-monitoring
    bias of a plain endpoint check.
    """

    dt: float = 1e-3
    t_max: float | None = None
    n_paths: int = 10_000
    seed: int = 0
    method: str = "milstein"
    bridge: bool = True
    chunk_size: int = 1024
    block_steps: int = 256

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.t_max is not None and not self.t_max > self.dt:
            raise ConfigError("t_max must exceed dt")
        if self.n_paths < 1:
            raise ConfigError("n_paths must be >= 1")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}")
        if self.chunk_size < 1 or self.block_steps < 1:
            raise ConfigError("chunk_size and block_steps must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must fit in 64 unsigned bits")

    def resolved(self, p: CirParams) -> "SimulationConfig":
        if self.t_max is not None:
            return self
        mean = float(fpt_cumulants(p, 1, context_for(128)).mean) if p.y0 < p.S else 1.0
        return SimulationConfig(**{**asdict(self), "t_max": 40.0 * mean})

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SimulationConfig":
        return cls(**json.loads(text))

    def digest(self, p: CirParams | None = None) -> str:
        payload = self.to_json() + ("" if p is None else p.to_json())
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class FptSample:
    """First-passage times of the paths that crossed, plus the censored count."""

    times: np.ndarray
    censored: int = 0
    method: str = "unknown"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", t)
        if t.ndim != 1:
            raise ValueError("times must be one-dimensional")
        if np.any(t < 0) or not np.all(np.isfinite(t)):
            raise ValueError("times must be finite and nonnegative")
        if self.censored < 0:
            raise ValueError("censored must be nonnegative")

    @property
    def N(self) -> int:
        return int(self.times.size)

    @property
    def provenance(self) -> str:
        return f"{self.method}:{self.meta.get('config_hash', '-')}"

    def scaled(self, scale: float) -> "FptSample":
        return FptSample(self.times / scale, self.censored, self.method, dict(self.meta))

    def save(self, path) -> None:
        lines = [f"# method: {self.method}", f"# censored: {self.censored}", f"# n: {self.N}"]
        for k, v in self.meta.items():
            lines.append(f"# {k}: {v if isinstance(v, str) else json.dumps(v)}")
        lines.extend(repr(float(t)) for t in self.times)
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "FptSample":
        method, censored, meta, times = "unknown", 0, {}, []
        for raw in Path(path).read_text().splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                key, val = key.strip(), val.strip()
                if key == "method":
                    method = val
                elif key == "censored":
                    censored = int(val)
                elif key != "n":
                    try:
                        meta[key] = json.loads(val)
                    except json.JSONDecodeError:
                        meta[key] = val
                continue
            times.append(float(line))
        return cls(np.array(times), censored, method, meta)


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(chunk)]))


def _chunks(n: int, size: int):
    for j, start in enumerate(range(0, n, size)):
        yield j, min(size, n - start)


def _bridge_hit(S, y, y_new, sig2_dt, u):
    # probability that a Brownian bridge with local volatility crosses S inside the step
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        prob = np.exp(-2.0 * (S - y) * (S - y_new) / sig2_dt)
    return u < prob


def _run_milstein_chunk(p: CirParams, cfg: SimulationConfig, rng, m: int):
    tau, mu, sig, c, S = (float(v) for v in (p.tau, p.mu, p.sigma, p.c, p.S))
    dt = cfg.dt
    n_steps = int(np.ceil(cfg.t_max / dt))
    floor = c + 1e-12 * max(1.0, abs(c))
    y = np.full(m, float(p.y0))
    out = np.full(m, np.nan)
    alive = np.arange(m)
    clamps = 0
    sdt = np.sqrt(dt)
    step = 0
    while step < n_steps and alive.size:
        nb = min(cfg.block_steps, n_steps - step)
        dW = rng.standard_normal((nb, m)) * sdt
        U = rng.random((nb, m)) if cfg.bridge else None
        for b in range(nb):
            if not alive.size:
                break
            ya = y[alive]
            w = dW[b, alive]
            vol = sig * np.sqrt(ya - c)
            yn = ya + (-tau * ya + mu) * dt + vol * w + 0.25 * sig * sig * (w * w - dt)
            low = yn < floor
            if low.any():
                clamps += int(low.sum())
                yn = np.where(low, floor, yn)
            t0 = (step + b) * dt
            hit = yn >= S
            when = np.where(hit, t0 + dt * (S - ya) / np.where(hit, yn - ya, 1.0), np.nan)
            if cfg.bridge:
                bh = ~hit & _bridge_hit(S, ya, yn, sig * sig * (ya - c) * dt, U[b, alive])
                when = np.where(bh, t0 + 0.5 * dt, when)
                hit = hit | bh
            y[alive] = yn
            if hit.any():
                out[alive[hit]] = when[hit]
                alive = alive[~hit]
        step += nb
    return out, clamps


def transition_step(p: CirParams, y, dt: float, rng: np.random.Generator) -> np.ndarray:
    """Exact draw of Y_{t+dt} given Y_t = y (noncentral chi-square law of Y - c)."""
    c = float(p.c)
    return c + _chi2_draw(np.asarray(y, dtype=float) - c, *_transition_law(p, dt), rng)


def _transition_law(p: CirParams, dt: float):
    tau, mu, sig, c = (float(v) for v in (p.tau, p.mu, p.sigma, p.c))
    decay = np.exp(-tau * dt)
    scale = sig * sig * (1.0 - decay) / (4.0 * tau)
    df = 4.0 * (mu - tau * c) / (sig * sig)
    return decay, scale, df


def _chi2_draw(x, decay, scale, df, rng):
    # Poisson mixture of central chi-squares: exact noncentral chi-square draw
    k = rng.poisson(0.5 * x * decay / scale)
    return scale * rng.chisquare(df + 2.0 * k)


def _run_transition_chunk(p: CirParams, cfg: SimulationConfig, rng, m: int):
    sig, c, S = (float(v) for v in (p.sigma, p.c, p.S))
    dt = cfg.dt
    n_steps = int(np.ceil(cfg.t_max / dt))
    law = _transition_law(p, dt)
    x = np.full(m, float(p.y0) - c)
    xs = S - c
    out = np.full(m, np.nan)
    alive = np.arange(m)
    for step in range(n_steps):
        if not alive.size:
            break
        xa = x[alive]
        xn = _chi2_draw(xa, *law, rng)
        t0 = step * dt
        hit = xn >= xs
        when = np.where(hit, t0 + dt * (xs - xa) / np.where(hit, xn - xa, 1.0), np.nan)
        if cfg.bridge:
            u = rng.random(alive.size)
            bh = ~hit & _bridge_hit(xs, xa, xn, sig * sig * xa * dt, u)
            when = np.where(bh, t0 + 0.5 * dt, when)
            hit = hit | bh
        x[alive] = xn
        if hit.any():
            out[alive[hit]] = when[hit]
            alive = alive[~hit]
    return out, 0


def simulate(p: CirParams, cfg: SimulationConfig) -> FptSample:
    """Simulate ``cfg.n_paths`` first-passage times with ``cfg.method``."""
    cfg = cfg.resolved(p)
    meta = {
        "dt": cfg.dt,
        "t_max": cfg.t_max,
        "seed": int(cfg.seed),
        "bridge": cfg.bridge,
        "params": p.as_dict(),
        "config_hash": cfg.digest(p),
    }
    if p.y0 >= p.S:
        return FptSample(np.zeros(cfg.n_paths), 0, cfg.method, meta)
    run = _run_milstein_chunk if cfg.method == "milstein" else _run_transition_chunk
    parts, clamps = [], 0
    for j, m in _chunks(cfg.n_paths, cfg.chunk_size):
        t, k = run(p, cfg, _chunk_rng(cfg.seed, j), m)
        parts.append(t)
        clamps += k
    times = np.concatenate(parts)
    done = np.isfinite(times)
    meta["clamps"] = clamps
    return FptSample(times[done], int((~done).sum()), cfg.method, meta)


def simulate_fpt_milstein(p: CirParams, cfg: SimulationConfig) -> FptSample:
    """Milstein scheme with linear-interpolated crossing times."""
    return simulate(p, SimulationConfig(**{**asdict(cfg), "method": "milstein"}))


def simulate_fpt_transition(p: CirParams, cfg: SimulationConfig) -> FptSample:
    """Exact stepping through the noncentral chi-square transition law."""
    return simulate(p, SimulationConfig(**{**asdict(cfg), "method": "transition"}))


@dataclass(frozen=True)
class EmpiricalCdf:
    """Right-continuous empirical distribution function of the observed times."""

    points: np.ndarray

    def __call__(self, t):
        return np.searchsorted(self.points, np.asarray(t, dtype=float), side="right") / self.points.size


def _require(s: FptSample):
    if s.N == 0:
        raise EmptySample("sample has no observed first-passage times")


def empirical_cdf(s: FptSample) -> EmpiricalCdf:
    """Empirical cdf over the uncensored times (censored paths are dropped)."""
    _require(s)
    if s.censored:
        warnings.warn(f"{s.censored} censored path(s) excluded from the empirical cdf", RuntimeWarning, stacklevel=2)
    return EmpiricalCdf(np.sort(s.times))


def ks_statistic(s: FptSample, cdf) -> float:
    """One-sample Kolmogorov-Smirnov distance between ``s`` and a cdf callable."""
    _require(s)
    return float(stats.kstest(s.times, lambda t: np.asarray(cdf(t), dtype=float)).statistic)


def ks_two_sample(a: FptSample, b: FptSample) -> float:
    _require(a)
    _require(b)
    return float(stats.ks_2samp(a.times, b.times).statistic)


def sup_cdf_error(cdf, s: FptSample) -> tuple[float, float]:
    """sup_t |cdf(t) - F_N(t)| and the t where it is attained."""
    _require(s)
    x = np.sort(s.times)
    n = x.size
    G = np.asarray(cdf(x), dtype=float)
    upper = np.arange(1, n + 1) / n - G
    lower = G - np.arange(0, n) / n
    iu, il = int(np.argmax(np.abs(upper))), int(np.argmax(lower))
    if abs(upper[iu]) >= lower[il]:
        return float(abs(upper[iu])), float(x[iu])
    return float(lower[il]), float(x[il])


def sample_moments(s: FptSample, K: int) -> MomentVector:
    """Raw sample moments m_1..m_K."""
    _require(s)
    if not 1 <= K <= 10:
        raise ValueError("K must lie in 1..10")
    if s.N < 10 * K:
        raise ValueError(f"need at least {10 * K} observations for K = {K}")
    return MomentVector(tuple(float(np.mean(s.times**k)) for k in range(1, K + 1)))


def sample_cumulants(s: FptSample, K: int) -> CumulantVector:
    """Cumulants from the raw sample moments through the moment recursion."""
    return moments_to_cumulants(sample_moments(s, K))


def _b_weights(n: int, alpha: float) -> np.ndarray:
    k = np.arange(1, n + 1)
    # k! Gamma(alpha+1) / Gamma(alpha+1+k) = 1 / C(k+alpha, k)
    return np.exp(special.gammaln(k + 1) + special.gammaln(alpha + 1) - special.gammaln(alpha + 1 + k))


@dataclass(frozen=True)
class SeriesEstimate:
    """Orthogonal-series density estimate in the time units of the reference."""

    ref: GammaReference
    lbar: np.ndarray  # sample means of L_k(beta T), k = 1..n
    weights: np.ndarray  # b_k

    @property
    def n(self) -> int:
        return int(self.lbar.size)

    @property
    def B(self) -> np.ndarray:
        return np.concatenate([[1.0], self.lbar * self.weights])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        a, b = float(self.ref.alpha), float(self.ref.beta)
        L = laguerre_table(self.n, a, b * t)
        return self.ref.pdf(t) * np.tensordot(self.B, L, axes=1)


def _laguerre_sample(s: FptSample, ref: GammaReference, n: int) -> np.ndarray:
    x = float(ref.beta) * s.times / float(ref.sigma_T)
    return laguerre_table(n, float(ref.alpha), x)[1:]


def orthogonal_series_estimate(s: FptSample, ref: GammaReference, n: int) -> SeriesEstimate:
    """f(t)(1 + sum_k lbar_k b_k L_k(beta t)) with lbar_k = mean of L_k(beta T_i).

    Times are divided by ``ref.sigma_T``, so the estimate lives in the
    standardized units of the reference.
    """
    _require(s)
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return SeriesEstimate(ref, np.zeros(0), np.zeros(0))
    L = _laguerre_sample(s, ref, n)
    return SeriesEstimate(ref, L.mean(axis=1), _b_weights(n, float(ref.alpha)))


def mise_first_term(s: FptSample, ref: GammaReference, n: int) -> float:
    """(1/N) sum_{k=1}^n b_k Var[L_k(beta T)], the estimable part of the MISE."""
    _require(s)
    if n <= 0:
        return 0.0
    L = _laguerre_sample(s, ref, n)
    return float(np.sum(_b_weights(n, float(ref.alpha)) * L.var(axis=1, ddof=1)) / s.N)


def vasicek_entropy(s: FptSample, m: int | None = None) -> float:
    """Vasicek spacing estimator of differential entropy, window floor(sqrt(N)) by default."""
    _require(s)
    x = np.sort(s.times)
    N = x.size
    m = int(np.floor(np.sqrt(N))) if m is None else int(m)
    if m < 1 or N < 4 * m:
        raise ValueError("need m >= 1 and N >= 4 m")
    i = np.arange(N)
    spacing = x[np.minimum(i + m, N - 1)] - x[np.maximum(i - m, 0)]
    spacing = np.maximum(spacing, np.finfo(float).tiny)
    return float(np.mean(np.log(N / (2.0 * m) * spacing)))


def dispersion_report(s: FptSample, m: int | None = None) -> DispersionReport:
    """Sample c_v and entropy-based c_h = exp(H - 1) / mean."""
    _require(s)
    mean = float(np.mean(s.times))
    var = float(np.var(s.times, ddof=1))
    H = vasicek_entropy(s, m)
    return DispersionReport(c_v=np.sqrt(var) / mean, c_h=float(np.exp(H - 1.0) / mean), mean=mean, variance=var)
