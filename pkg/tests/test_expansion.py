import json
import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from cirfpt.cir import CASES, CumulantVector, MomentVector, cumulants_to_moments, fpt_cumulants, fpt_moments_bell
from cirfpt.errors import InvalidReference, NoValidOrder, PrecisionLoss
from cirfpt.expansion import (
    GammaReference,
    LaguerreGammaExpansion,
    a_from_B,
    build_expansion,
    cdf_eval,
    cdf_increment,
    coeff_B_direct,
    coeff_B_recursive,
    coeff_h_update,
    expansion_from_params,
    fourier_coefficient_a,
    h_from_B,
    normalization_residual,
    pdf_eval,
    select_gamma_params,
    standardize,
    tail_error_estimate,
)
from cirfpt.specfun import context_for, default_context

CTX = default_context()
mp = CTX.mp

# frozen after cross-checking against an independent mpmath computation (see test below)
TAIL_ERROR_A_10_20 = 0.11457099143163460


@pytest.fixture(scope="module")
def full():
    """Default-order expansions carrying 60 standardized moments."""
    return {k: expansion_from_params(CASES[k]) for k in "ABC"}


def test_gamma_reference_validation():
    with pytest.raises(InvalidReference):
        GammaReference(-1.0, 1.0)
    with pytest.raises(InvalidReference):
        GammaReference(0.5, 0.0)
    with pytest.raises(InvalidReference):
        select_gamma_params(-1, 1)


def test_select_gamma_params_examples(full):
    ref = select_gamma_params(1, 1)
    assert (ref.alpha, ref.beta) == (0, 1)
    assert float(full["A"].ref.alpha) == pytest.approx(0.367, abs=5e-3)
    assert float(full["A"].ref.beta) == pytest.approx(1.17, abs=5e-3)
    assert float(full["B"].ref.alpha) == pytest.approx(-0.34, abs=5e-3)
    assert float(full["B"].ref.beta) == pytest.approx(0.812, abs=5e-3)


@settings(max_examples=40, deadline=None)
@given(c1=st.fractions(min_value=0.01, max_value=50), c2=st.fractions(min_value=0.01, max_value=50))
def test_reference_matches_two_moments(c1, c2):
    ref = select_gamma_params(c1, c2)
    assert (ref.alpha + 1) / ref.beta == c1
    assert (ref.alpha + 1) / ref.beta**2 == c2


def test_standardize_examples():
    c, sigma = standardize(CumulantVector((2.0, 4.0, 8.0)))
    assert sigma == 2
    assert c.values == (1.0, 1.0, 1.0)
    cA = fpt_cumulants(CASES["A"], 4)
    sA, s = standardize(cA)
    assert sA.values[1] == 1
    again, s2 = standardize(sA)
    assert again.values == sA.values and s2 == 1
    assert float(sA.values[0]) == pytest.approx(1.17, abs=5e-3)


def test_B_direct_examples(full):
    e = full["A"]
    assert coeff_B_direct(0, e.moments, e.ref) == 1
    assert abs(coeff_B_direct(1, e.moments, e.ref)) < 1e-25
    assert abs(coeff_B_direct(2, e.moments, e.ref)) < 1e-25
    B = [coeff_B_direct(k, e.moments, e.ref) for k in range(3)]
    assert abs(coeff_B_recursive(3, B, e.moments, e.ref) - coeff_B_direct(3, e.moments, e.ref)) < 1e-60


def test_B_recursive_generic_first_order():
    m = MomentVector((mp.mpf(2), mp.mpf(7)))
    ref = GammaReference(mp.mpf("0.3"), mp.mpf("1.4"))
    assert abs(coeff_B_recursive(1, [mp.one], m, ref) - coeff_B_direct(1, m, ref)) < 1e-70


@pytest.mark.parametrize("case", "ABC")
def test_B_direct_recursive_agree(case, full):
    e = full[case]
    B = [mp.one]
    for k in range(1, 16):
        d = coeff_B_direct(k, e.moments, e.ref)
        r = coeff_B_recursive(k, B, e.moments, e.ref)
        assert abs(d - r) <= 1e-10 * max(abs(d), 1)
        B.append(d)
    if case == "A":
        assert abs(B[10] - coeff_B_recursive(10, B[:10], e.moments, e.ref)) < 1e-20


def test_B_matches_laguerre_expectation(full):
    """B_k = E[L_k(beta T)] / C(k+alpha, k) with L_k expanded by scipy coefficients."""
    e = full["C"]
    a, b = float(e.ref.alpha), float(e.ref.beta)
    m = [1.0] + [float(e.moments.raw(j)) for j in range(1, 9)]
    for k in range(9):
        coeffs = [special.binom(k + a, k - i) * (-b) ** i / math.factorial(i) for i in range(k + 1)]
        expect = sum(c * m[i] for i, c in enumerate(coeffs)) / special.binom(k + a, k)
        assert float(coeff_B_direct(k, e.moments, e.ref)) == pytest.approx(expect, abs=1e-9)


def test_h_update_examples():
    ref = GammaReference(mp.mpf("0.4"), mp.one)
    B1 = mp.mpf("0.25")
    h1 = coeff_h_update([mp.one], B1, ref)
    assert h1[1] == B1
    assert abs(h1[0] - (1 + B1 * mp.mpf("1.4"))) < 1e-70
    h2 = coeff_h_update(coeff_h_update([mp.one], mp.zero, ref), mp.zero, ref)
    assert h2 == [mp.one, 0, 0]


@pytest.mark.parametrize("case", "ABC")
def test_h_incremental_matches_direct(case, full):
    e = full[case]
    B = [coeff_B_direct(k, e.moments, e.ref) for k in range(13)]
    h = [mp.one]
    for n in range(1, 13):
        h = coeff_h_update(h, B[n], e.ref)
        direct = h_from_B(B[: n + 1], e.ref)
        for x, y in zip(h, direct):
            assert abs(x - y) <= 1e-60 * max(1, abs(y))


def test_h_hypothesis_random_B():
    @settings(max_examples=30, deadline=None)
    @given(B=st.lists(st.floats(-5, 5), min_size=1, max_size=13), alpha=st.floats(-0.9, 3))
    def check(B, alpha):
        ref = GammaReference(mp.mpf(alpha), mp.one)
        Bm = [mp.one] + [mp.mpf(b) for b in B]
        h = [mp.one]
        for b in Bm[1:]:
            h = coeff_h_update(h, b, ref)
        for x, y in zip(h, h_from_B(Bm, ref)):
            assert abs(x - y) <= 1e-50 * max(1, abs(y))

    check()


def test_pdf_n0_is_gamma(expansion):
    e = expansion("A", 0)
    a, b = float(e.ref.alpha), float(e.ref.beta)
    for t in (0.1, 1.0, 3.7):
        ref = b ** (a + 1) * t**a * math.exp(-b * t) / math.gamma(a + 1)
        assert float(pdf_eval(e, t)) == pytest.approx(ref, rel=1e-13)
        assert float(cdf_eval(e, t)) == pytest.approx(special.gammainc(a + 1, b * t), rel=1e-13)


@pytest.mark.parametrize("case,n", [("A", 10), ("A", 11), ("B", 10), ("C", 7), ("C", 9)])
def test_unit_mass_and_moments(case, n, expansion):
    """Quadrature of g_n over (0, inf) reproduces mass 1 and the first n moments."""
    e = expansion(case, n)
    brk = [0, 0.5, 1, 2, 4, 8, 16, 40 / float(e.ref.beta)]
    f = lambda t: float(e.pdf(t))
    for k in range(0, n + 1):
        total = sum(integrate.quad(lambda t: t**k * f(t), lo, hi, limit=200, epsabs=1e-13, epsrel=1e-11)[0] for lo, hi in zip(brk, brk[1:]))
        total += integrate.quad(lambda t: t**k * f(t), brk[-1], np.inf, limit=200)[0]
        target = 1.0 if k == 0 else float(e.moments.raw(k))
        assert total == pytest.approx(target, rel=1e-6), k


def test_unit_mass_40_over_beta(expansion):
    e = expansion("A", 10)
    total, _ = integrate.quad(lambda t: float(e.pdf(t)), 0, 40 / float(e.ref.beta), limit=400, epsabs=1e-12)
    assert abs(total - 1) < 1e-6


def test_cdf_examples(expansion):
    e = expansion("A", 10)
    assert cdf_eval(e, 0) == 0
    grid = np.linspace(0.05, 6, 50)
    for t in grid:
        quad, _ = integrate.quad(lambda u: float(pdf_eval(e, u)), 0, t, epsabs=1e-13, epsrel=1e-12, limit=200)
        assert abs(float(cdf_eval(e, t)) - quad) < 1e-8
    assert abs(float(cdf_eval(e, 200)) - 1) < 1e-20


@pytest.mark.parametrize("case,n", [("A", 10), ("B", 41), ("C", 9)])
def test_float_paths_match_mp(case, n, expansion):
    e = expansion(case, n)
    for t in (0.03, 0.4, 1.3, 2.9, 6.5):
        p, c = float(pdf_eval(e, t)), float(cdf_eval(e, t))
        assert float(e.pdf(t)) == pytest.approx(p, abs=1e-12)
        assert float(e.cdf(t)) == pytest.approx(c, abs=1e-12)


def test_pdf_prime_finite_difference(expansion):
    e = expansion("C", 9)
    for t in (0.2, 1.0, 2.5, 5.0):
        h = 1e-6
        fd = (float(e.pdf(t + h)) - float(e.pdf(t - h))) / (2 * h)
        assert float(e.pdf_prime(t)) == pytest.approx(fd, abs=1e-7)


def test_cdf_increment_telescopes(expansion):
    e = expansion("A", 10)
    dt, steps = mp.mpf("1e-3"), 60
    total = mp.fsum(cdf_increment(e, k * dt, dt) for k in range(steps))
    assert abs(total - cdf_eval(e, steps * dt)) < 1e-10


def test_cdf_increment_limits(expansion):
    e = expansion("A", 10)
    t, dt = mp.mpf("1.3"), mp.mpf("1e-8")
    central = (cdf_increment(e, t, dt / 2) + cdf_increment(e, t - dt / 2, dt / 2)) / dt
    assert abs(central / pdf_eval(e, t) - 1) < 1e-4
    expo = LaguerreGammaExpansion(GammaReference(mp.zero, mp.one), 0, (mp.one,), (mp.one,))
    t, dt = mp.mpf("0.7"), mp.mpf("0.2")
    assert abs(cdf_increment(expo, t, dt) - (mp.exp(-t) - mp.exp(-t - dt))) < 1e-28


def test_normalization_residual_examples(expansion):
    assert normalization_residual(expansion("A", 0)) == 0
    e = expansion("A", 10)
    assert normalization_residual(e) < 1e-12
    h = list(e.h)
    h[3] *= 1 + mp.mpf("1e-6")
    bad = LaguerreGammaExpansion(e.ref, e.n, e.B, tuple(h), e.moments)
    assert normalization_residual(bad) > 1e-12


def test_order_selection_defaults(full):
    A, B, C = full["A"], full["B"], full["C"]
    assert (A.n, B.n, C.n) == (11, 41, 7)
    for e in full.values():
        assert e.signs_ok
        assert float(normalization_residual(e)) <= 1e-3
        assert not e.reached_n_max


def test_sign_valid_orders(full):
    valid = {k: [r.n for r in e.trace if r.signs_ok] for k, e in full.items()}
    assert valid["A"] == [0, 3, 5, 7, 9, 11]
    assert valid["C"] == [0, 3, 5, 7]
    assert 10 not in valid["A"] and 10 not in valid["B"] and 9 not in valid["C"]


def test_no_valid_order():
    m = cumulants_to_moments(standardize(fpt_cumulants(CASES["A"], 3))[0])
    ref = select_gamma_params(m.values[0], m.variance)
    with pytest.raises(NoValidOrder):
        build_expansion(m, ref, n_max=2)


def test_reached_n_max_flag():
    c, _ = standardize(fpt_cumulants(CASES["B"], 20))
    m = cumulants_to_moments(c)
    ref = select_gamma_params(c.values[0], c.values[1])
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        e = build_expansion(m, ref, n_max=20)
    assert e.reached_n_max and e.n == 19
    assert any(issubclass(x.category, RuntimeWarning) for x in w)


def test_precision_loss_detection():
    m = cumulants_to_moments(standardize(fpt_cumulants(CASES["B"], 50))[0])
    ref = select_gamma_params(m.values[0], m.variance)
    with pytest.raises(PrecisionLoss):
        build_expansion(m, ref, n_max=50, ctx=context_for(64), check_tol=1e-10)


def test_precision_doubling_recovers():
    e = expansion_from_params(CASES["B"], n_fixed=40, ctx=context_for(64))
    assert e.h[0].context.prec > 64
    assert float(normalization_residual(e)) < 1e-3


def test_high_precision_b55():
    e = expansion_from_params(CASES["B"], n_fixed=55)
    assert float(normalization_residual(e)) <= 1e-3
    assert np.all(np.isfinite(e.pdf(np.linspace(0.01, 20, 500))))


def test_json_round_trip(expansion):
    e = expansion("C", 9)
    back = LaguerreGammaExpansion.from_json(e.to_json())
    assert back.n == e.n
    for x, y in zip(back.h, e.h):
        assert abs(x - y) <= 1e-70 * max(1, abs(y))
    d = json.loads(e.to_json())
    assert {"alpha", "beta", "sigma_T", "n", "B", "h"} <= d.keys()
    assert all(isinstance(v, str) for v in d["B"])


def test_fourier_coefficients(full):
    e = full["A"]
    assert abs(fourier_coefficient_a(0, e.moments, e.ref) - 1) < 1e-70
    assert abs(fourier_coefficient_a(1, e.moments, e.ref)) < 1e-25
    assert abs(fourier_coefficient_a(2, e.moments, e.ref)) < 1e-25
    for k in range(16):
        a = fourier_coefficient_a(k, e.moments, e.ref)
        b = a_from_B(k, coeff_B_direct(k, e.moments, e.ref), e.ref.alpha)
        assert abs(a - b) <= 1e-12 * max(abs(a), 1e-30)


def test_coefficient_decay(full):
    e = full["A"]
    ka = [k * abs(float(fourier_coefficient_a(k, e.moments, e.ref))) for k in range(5, 21)]
    assert max(ka) <= 10 * float(np.median(ka))
    ka3 = [k * abs(float(fourier_coefficient_a(k, e.moments, e.ref))) for k in range(3, 21)]
    assert max(ka3) < 1.0


def test_tail_error_examples(full):
    e = full["A"]
    a20 = fourier_coefficient_a(20, e.moments, e.ref)
    assert abs(tail_error_estimate(e.moments, e.ref, 19, 20) - abs(a20)) < 1e-60
    vals = [float(tail_error_estimate(e.moments, e.ref, n, 20)) for n in range(0, 20)]
    assert all(x >= y for x, y in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        tail_error_estimate(e.moments, e.ref, 5, 5)


def test_tail_error_golden_value(full):
    """Golden value, first validated against an independent mpmath evaluation."""
    e = full["A"]
    assert float(tail_error_estimate(e.moments, e.ref, 10, 20)) == pytest.approx(TAIL_ERROR_A_10_20, rel=1e-12)
    with mpmath.workdps(60):
        raw = fpt_moments_bell(CASES["A"], 20)
        sig = mpmath.sqrt(mpmath.mpf(raw.variance))
        mom = [mpmath.mpf(1)] + [mpmath.mpf(raw.raw(j)) / sig**j for j in range(1, 21)]
        b = mom[1]
        a = mom[1] ** 2 - 1
        total = 0
        for k in range(11, 21):
            ek = mpmath.fsum(mpmath.binomial(k + a, k - i) * (-b) ** i * mom[i] / mpmath.factorial(i) for i in range(k + 1))
            total += ek**2 / mpmath.binomial(k + a, k)
        oracle = float(mpmath.sqrt(total))
    assert oracle == pytest.approx(TAIL_ERROR_A_10_20, rel=1e-12)


def test_standardization_invariance(expansion):
    e = expansion("A", 10)
    c1 = float(fpt_cumulants(CASES["A"], 1).values[0])
    f = lambda t: float(e.pdf_time(t))
    mass = integrate.quad(f, 0, np.inf, limit=400)[0]
    mean = integrate.quad(lambda t: t * f(t), 0, np.inf, limit=400)[0]
    assert mass == pytest.approx(1, abs=1e-6)
    assert mean == pytest.approx(c1, rel=1e-6)


def test_unstandardized_build():
    e = expansion_from_params(CASES["A"], standardized=False, n_fixed=8)
    assert e.sigma_T == 1
    c = fpt_cumulants(CASES["A"], 2)
    assert float(e.ref.beta) == pytest.approx(float(c.values[0] / c.values[1]), rel=1e-14)
