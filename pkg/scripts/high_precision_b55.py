"""Case B at order 55: residual, precision and negative-lobe repair."""

import argparse
import time

import numpy as np

from cirfpt.cir import CASES
from cirfpt.correction import correct_pdf
from cirfpt.expansion import expansion_from_params, normalization_residual
from cirfpt.specfun import context_for


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=55)
    ap.add_argument("--digits", type=int, nargs="+", default=[128, 256, 512])
    args = ap.parse_args()

    for digits in args.digits:
        t0 = time.perf_counter()
        e = expansion_from_params(CASES["B"], n_fixed=args.n, ctx=context_for(digits))
        res = float(normalization_residual(e))
        print(f"{digits:4d} bits requested, {e.h[0].context.prec} used: residual {res:.2e}, {time.perf_counter() - t0:.2f}s")
    cp = correct_pdf(e)
    grid = np.linspace(1e-9, cp.t_hi, 100_000)
    print(f"patches: {[(p.kind, round(p.t_start, 4), round(p.t_end, 4)) for p in cp.patches]}")
    print(f"min corrected pdf {cp.pdf(grid).min():.3e}, mass change {cp.mass_change():+.2e}")


if __name__ == "__main__":
    main()
