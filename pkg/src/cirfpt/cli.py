"""Command-line front end.

Exit codes: 0 success, 1 input error, 2 model-invariant violation,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .cir import CirParams, boundary_index, cumulants_to_moments, fpt_cumulants
from .correction import correct_cdf_monotone, correct_pdf
from .errors import (
    ConfigError,
    DegenerateStart,
    EmptySample,
    EntranceViolation,
    EnvelopeViolation,
    FitFailure,
    InvalidEnvelope,
    InvalidParams,
    InvalidReference,
    NonConvergent,
    NoValidOrder,
    PrecisionLoss,
    UnsupportedConfiguration,
)
from .expansion import (
    LaguerreGammaExpansion,
    _mpstr,
    expansion_from_params,
    select_gamma_params,
    standardize,
)
from .montecarlo import (
    FptSample,
    SimulationConfig,
    empirical_cdf,
    ks_statistic,
    orthogonal_series_estimate,
    sample_cumulants,
    simulate,
    sup_cdf_error,
)
from .sampler import ArConfig, ar_sample
from .specfun import PRECISION_ENV, PrecisionContext, default_context

EXIT_OK, EXIT_INPUT, EXIT_MODEL, EXIT_NUMERIC = 0, 1, 2, 3

_MODEL_ERRORS = (EntranceViolation, InvalidParams, UnsupportedConfiguration, DegenerateStart, InvalidReference)
_NUMERIC_ERRORS = (NonConvergent, NoValidOrder, PrecisionLoss, FitFailure, InvalidEnvelope, EnvelopeViolation)


def _now() -> str:
    # SOURCE_DATE_EPOCH pins the timestamp so repeated runs give identical files
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = float(epoch) if epoch is not None else time.time()
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


def _manifest(args, ctx: PrecisionContext | None, params_file=None, extra: dict | None = None) -> dict:
    opts = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out", "out_json", "out_csv")}
    payload = json.dumps(opts, sort_keys=True, default=str)
    if params_file is not None:
        payload += Path(params_file).read_text()
    m = {
        "command": args.command,
        "params_file": None if params_file is None else str(params_file),
        "config_hash": hashlib.sha256(payload.encode()).hexdigest()[:16],
        "tool_version": __version__,
        "precision_digits": None if ctx is None else ctx.digits,
        "created": _now(),
    }
    if extra:
        m.update(extra)
    return m


def _header(manifest: dict) -> list[str]:
    return [f"# {k}: {json.dumps(v)}" for k, v in manifest.items()]


def _ctx(args) -> PrecisionContext:
    if getattr(args, "digits", None):
        tol = getattr(args, "tol", None)
        return PrecisionContext(digits=args.digits, series_tol=tol)
    if getattr(args, "tol", None):
        return PrecisionContext(digits=default_context().digits, series_tol=args.tol)
    return default_context()


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _write_csv(path, manifest: dict, columns: list[str], rows) -> None:
    lines = _header(manifest) + [",".join(columns)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_moments(args) -> int:
    p = CirParams.load(args.params)
    ctx = _ctx(args)
    c = fpt_cumulants(p, args.order, ctx)
    m = cumulants_to_moments(c)
    out = {
        "manifest": _manifest(args, ctx, args.params),
        "s": float(boundary_index(p)),
        "cumulants": [_mpstr(v) for v in c.values],
        "moments": [_mpstr(v) for v in m.values],
        "mean": float(c.mean),
    }
    if args.order >= 2 and c.variance > 0:
        cs, sigma = standardize(c)
        ref = select_gamma_params(cs.values[0], cs.values[1])
        raw = select_gamma_params(c.values[0], c.values[1])
        out.update(
            variance=float(c.variance),
            c_v=float(c.cv),
            sigma_T=float(sigma),
            alpha=float(ref.alpha),
            beta=float(ref.beta),
            beta_unstandardized=float(raw.beta),
        )
    if args.order >= 4 and c.variance > 0:
        out.update(skewness=float(c.skewness), excess_kurtosis=float(c.excess_kurtosis))
    _emit(json.dumps(out, indent=2) + "\n", args.out)
    return EXIT_OK


def _grid(e: LaguerreGammaExpansion, points: int, t_max: float | None) -> np.ndarray:
    hi = t_max if t_max is not None else e.support_hint(1 - 1e-6) * e.sigma_T
    return np.linspace(hi / points, hi, points)


def cmd_expand(args) -> int:
    p = CirParams.load(args.params)
    ctx = _ctx(args)
    e = expansion_from_params(
        p, args.eps, args.nmax, standardized=args.standardize, n_fixed=args.n, ctx=ctx
    )
    manifest = _manifest(args, ctx, args.params, {"n": e.n, "reached_n_max": e.reached_n_max})
    doc = {"manifest": manifest, "expansion": e.as_dict()}
    t = _grid(e, args.points, args.tmax)
    raw_pdf = e.pdf_time(t)
    flag = (raw_pdf < 0).astype(int)
    if args.correct:
        cp = correct_pdf(e)
        doc["patches"] = [q.as_dict() for q in cp.patches]
        doc["t_hi"] = repr(cp.t_hi)
        pdf = cp.pdf_time(t)
        cdf = correct_cdf_monotone(t, e.cdf_time(t))
    else:
        pdf, cdf = raw_pdf, e.cdf_time(t)
    text = json.dumps(doc, indent=2) + "\n"
    if args.out_json:
        Path(args.out_json).write_text(text)
    if args.out_csv:
        _write_csv(args.out_csv, manifest, ["t", "pdf", "cdf", "negative"], zip(t, pdf, cdf, (str(f) for f in flag)))
    print(
        f"n={e.n} alpha={float(e.ref.alpha):.6g} beta={float(e.ref.beta):.6g} "
        f"sigma_T={e.sigma_T:.6g} negative_points={int(flag.sum())}"
    )
    if not args.out_json:
        sys.stdout.write(text)
    return EXIT_OK


def _write_sample(s: FptSample, manifest: dict, out) -> None:
    s = FptSample(s.times, s.censored, s.method, {**s.meta, "manifest": manifest})
    if out:
        s.save(out)
    else:
        tmp = [f"# method: {s.method}", f"# censored: {s.censored}"]
        tmp += [f"# {k}: {json.dumps(v)}" for k, v in s.meta.items()]
        sys.stdout.write("\n".join(tmp + [repr(float(x)) for x in s.times]) + "\n")


def cmd_simulate(args) -> int:
    p = CirParams.load(args.params)
    cfg = SimulationConfig(
        dt=args.dt, t_max=args.tmax, n_paths=args.n, seed=args.seed, method=args.method, bridge=args.bridge
    )
    s = simulate(p, cfg)
    _write_sample(s, _manifest(args, None, args.params), args.out)
    print(f"observed={s.N} censored={s.censored} mean={np.mean(s.times):.6g}", file=sys.stderr)
    return EXIT_OK


def cmd_ar(args) -> int:
    p = CirParams.load(args.params)
    ctx = _ctx(args)
    e = expansion_from_params(p, args.eps_order, args.nmax, n_fixed=args.order, ctx=ctx)
    cp = correct_pdf(e)
    s = ar_sample(cp, ArConfig(eps=args.eps, N=args.n, seed=args.seed), p)
    _write_sample(s, _manifest(args, ctx, args.params, {"n": e.n}), args.out)
    print(
        f"n={e.n} C={s.meta['C']:.6g} M={s.meta['M']:.6g} tail={s.meta['tail']} "
        f"acceptance={s.meta['accepted'] / max(s.meta['proposals'], 1):.4f}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_estimate(args) -> int:
    s = FptSample.load(args.sample)
    if s.N == 0:
        raise EmptySample(f"{args.sample} holds no observations")
    if args.expansion:
        ref = _load_expansion(args.expansion).ref
    else:
        c, sigma = standardize(sample_cumulants(s, 2))
        ref = select_gamma_params(c.values[0], c.values[1])
        ref = replace(ref, sigma_T=sigma)
    est = orthogonal_series_estimate(s, ref, args.order)
    sigma = float(ref.sigma_T)
    hi = args.tmax if args.tmax is not None else float(np.quantile(s.times, 0.999))
    t = np.linspace(hi / args.points, hi, args.points)
    vals = est(t / sigma) / sigma
    manifest = _manifest(args, None, None, {"alpha": float(ref.alpha), "beta": float(ref.beta), "sigma_T": sigma})
    if args.out:
        _write_csv(args.out, manifest, ["t", "value"], zip(t, vals))
    else:
        sys.stdout.write("\n".join(_header(manifest) + ["t,value"] + [f"{a!r},{b!r}" for a, b in zip(t, vals)]) + "\n")
    return EXIT_OK


def _load_expansion(path) -> LaguerreGammaExpansion:
    doc = json.loads(Path(path).read_text())
    body = doc.get("expansion", doc)
    digits = (doc.get("manifest") or {}).get("precision_digits") or default_context().digits
    return LaguerreGammaExpansion.from_dict(body, PrecisionContext(digits=int(digits)))


def cmd_validate(args) -> int:
    e = _load_expansion(args.expansion)
    s = FptSample.load(args.sample)
    if s.N == 0:
        raise EmptySample(f"{args.sample} holds no observations")
    cp = correct_pdf(e)
    hi = max(float(np.max(s.times)), e.support_hint(1 - 1e-6) * e.sigma_T)
    grid = np.arange(args.dt, hi + args.dt, args.dt) if hi / args.dt <= 2e6 else np.linspace(0, hi, 2_000_001)[1:]
    G = correct_cdf_monotone(grid, e.cdf_time(grid))

    def cdf(t):
        return np.interp(t, grid, G, left=0.0, right=G[-1])

    eps_a, where = sup_cdf_error(cdf, s)
    report = {
        "manifest": _manifest(args, None, None),
        "n": e.n,
        "ks": ks_statistic(s, cdf),
        "eps_a": eps_a,
        "argmax_t": where,
        "argmax_t_standardized": where / e.sigma_T,
        "patched_ks": ks_statistic(s, cp.cdf_time),
        "observed": s.N,
        "censored": s.censored,
    }
    empirical_cdf(s)  # surfaces the censoring warning
    _emit(json.dumps(report, indent=2) + "\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cirfpt", description="CIR first-passage-time approximation toolkit")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def prec(sp):
        sp.add_argument("--digits", type=int, default=None, help=f"binary precision (default ${PRECISION_ENV} or 256)")
        sp.add_argument("--tol", type=float, default=None, help="series stopping tolerance")

    sp = sub.add_parser("moments", help="exact FPT cumulants and moments")
    sp.add_argument("params")
    sp.add_argument("--order", "-K", type=int, default=8)
    sp.add_argument("--out")
    prec(sp)
    sp.set_defaults(func=cmd_moments)

    sp = sub.add_parser("expand", help="build the Laguerre-Gamma expansion")
    sp.add_argument("params")
    sp.add_argument("--eps", type=float, default=1e-3)
    sp.add_argument("--nmax", type=int, default=60)
    sp.add_argument("--n", type=int, default=None, help="fixed order, bypassing the stopping rule")
    sp.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=True)
    sp.add_argument("--correct", action=argparse.BooleanOptionalAction, default=True)
    sp.add_argument("--points", type=int, default=2000)
    sp.add_argument("--tmax", type=float, default=None)
    sp.add_argument("--out-json")
    sp.add_argument("--out-csv")
    prec(sp)
    sp.set_defaults(func=cmd_expand)

    sp = sub.add_parser("simulate", help="Monte Carlo first-passage sample")
    sp.add_argument("params")
    sp.add_argument("--method", choices=["milstein", "transition"], default="milstein")
    sp.add_argument("--n", type=int, default=10_000)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--tmax", type=float, default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--bridge", action=argparse.BooleanOptionalAction, default=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("ar", help="acceptance-rejection sample from the corrected expansion")
    sp.add_argument("params")
    sp.add_argument("--eps", type=float, default=0.05, help="tail probability budget")
    sp.add_argument("--n", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--order", type=int, default=None, help="fixed expansion order")
    sp.add_argument("--eps-order", type=float, default=1e-3, help="stopping tolerance for the order scan")
    sp.add_argument("--nmax", type=int, default=60)
    sp.add_argument("--out")
    prec(sp)
    sp.set_defaults(func=cmd_ar)

    sp = sub.add_parser("estimate", help="orthogonal-series density estimate from a sample")
    sp.add_argument("sample")
    sp.add_argument("--order", type=int, default=10)
    sp.add_argument("--expansion", help="take (alpha, beta, sigma_T) from an expansion JSON")
    sp.add_argument("--points", type=int, default=1000)
    sp.add_argument("--tmax", type=float, default=None)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("validate", help="compare an expansion with a sample")
    sp.add_argument("expansion")
    sp.add_argument("sample")
    sp.add_argument("--dt", type=float, default=1e-3, help="cdf grid step for the monotone repair")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _MODEL_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except _NUMERIC_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except json.JSONDecodeError as exc:
        print(f"error: malformed JSON: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, ConfigError, EmptySample, ValueError, KeyError, TypeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
