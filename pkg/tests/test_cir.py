import json
import time
from fractions import Fraction
from math import factorial

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cirfpt.cir import (
    CASES,
    CirParams,
    CumulantVector,
    MomentVector,
    boundary_index,
    c_star,
    cumulants_to_moments,
    fpt_cumulants,
    fpt_moments_bell,
    h_series,
    h_series_vector,
    laplace_transform,
    moments_to_cumulants,
    require_nondegenerate,
)
from cirfpt.errors import DegenerateStart, EntranceViolation, InvalidParams, UnsupportedConfiguration
from cirfpt.specfun import context_for, default_context, rising_factorial, unsigned_stirling_first

CTX = default_context()
REFERENCE_STATS = {"A": (1.16, 0.855), "B": (2.991, 1.231), "C": (3.937, 0.765)}


def test_boundary_index_examples():
    assert boundary_index(CASES["A"]) == pytest.approx(1.25, abs=1e-15)
    assert boundary_index(CASES["C"]) == pytest.approx(2 * 5 / 1.44, abs=1e-12)
    with pytest.raises(EntranceViolation):
        CirParams(tau=1, mu=0.5, sigma=2, c=0, y0=0.1, S=1)


def test_params_validation():
    with pytest.raises(InvalidParams):
        CirParams(tau=-1, mu=1, sigma=1, c=0, y0=0.1, S=1)
    with pytest.raises(InvalidParams):
        CirParams(tau=1, mu=1, sigma=1, c=0.5, y0=1, S=2)
    with pytest.raises(InvalidParams):
        CirParams(tau=1, mu=1, sigma=1, c=0, y0=-1, S=2)
    with pytest.raises(InvalidParams):
        CirParams.from_dict({"tau": 1})


def test_params_json_round_trip(tmp_path):
    p = CASES["C"]
    q = CirParams.from_json(p.to_json())
    assert q == p
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"tau": 0.2, "mu": 3, "sigma": 1.2, "c": -10, "y0": 0, "S": 10}))
    assert CirParams.load(path).s == Fraction(2 * 5, 1) / Fraction(144, 100)


def test_rational_strings():
    p = CirParams(tau="2/3", mu="0.9", sigma="1.2", c=0, y0="0.2", S=1)
    assert p == CASES["A"]
    assert p.s == Fraction(5, 4)


def test_h_series_examples():
    assert h_series(1, 0, 2) == 0
    mp = CTX.mp
    direct = mp.fsum(mp.one / (n * rising_factorial(2, n, CTX)) for n in range(1, 200))
    assert abs(h_series(1, 1, 2) - direct) < 1e-28
    direct2 = 2 * mp.fsum(unsigned_stirling_first(n, 2) / (mp.factorial(n) * rising_factorial(2, n, CTX)) for n in range(2, 200))
    assert abs(h_series(2, 1, 2) - direct2) < 1e-28


@settings(max_examples=25, deadline=None)
@given(y=st.floats(0, 40), s=st.floats(1, 12))
def test_h_vector_matches_single(y, s):
    vec = h_series_vector(y, s, 6)
    for j in range(1, 7):
        single = h_series(j, y, s)
        assert abs(vec[j] - single) <= 1e-26 * max(1, abs(single))


def test_h1_is_kummer_derivative():
    """h_1(y) = d/dz log Phi(z, s, y) at z = 0 gives sum y^n / (n <s>_n)."""
    y, s = 3.3, 1.7
    with mpmath.workdps(40):
        d = mpmath.diff(lambda z: mpmath.hyp1f1(z, s, y), 0)
    assert abs(float(h_series(1, y, s)) - float(d)) < 1e-12


def test_c_star_examples():
    p = CASES["A"]
    assert c_star(1, p.c, p) == 0
    x = 2 * CTX.real(p.tau) * (CTX.real(0.5) - 0) / CTX.real(p.sigma) ** 2
    h1 = h_series(1, x, CTX.real(p.s))
    h2 = h_series(2, x, CTX.real(p.s))
    assert abs(c_star(1, CTX.real(0.5), p) - h1) < 1e-60
    assert abs(c_star(2, CTX.real(0.5), p) - (h2 - h1**2)) < 1e-28


@pytest.mark.parametrize("case", "ABC")
def test_reference_mean_cv(case):
    t0 = time.perf_counter()
    c = fpt_cumulants(CASES[case], 20)
    elapsed = time.perf_counter() - t0
    mean, cv = REFERENCE_STATS[case]
    assert float(c.mean) == pytest.approx(mean, rel=5e-3)
    assert float(c.cv) == pytest.approx(cv, rel=5e-3)
    assert elapsed < 30


def test_reference_variance_column():
    # the column printed as a standard deviation holds the variance
    m = fpt_moments_bell(CASES["A"], 2)
    assert float(m.raw(2)) == pytest.approx(0.984 + 1.16**2, rel=3e-3)
    for case, var in (("A", 0.984), ("B", 13.56), ("C", 9.085)):
        assert float(fpt_cumulants(CASES[case], 2).variance) == pytest.approx(var, rel=2e-3)


def test_degenerate_start():
    p = CirParams(tau=1, mu=2, sigma=1, c=0, y0=1, S=1)
    assert all(v == 0 for v in fpt_cumulants(p, 5).values)
    assert all(v == 0 for v in fpt_moments_bell(p, 5).values)
    assert laplace_transform(2, p) == 1
    with pytest.raises(DegenerateStart):
        require_nondegenerate(p)


def test_downcrossing_rejected():
    p = CirParams(tau=1, mu=2, sigma=1, c=0, y0=2, S=1)
    with pytest.raises(UnsupportedConfiguration):
        fpt_cumulants(p, 3)


def test_order_cap():
    with pytest.raises(ValueError):
        fpt_cumulants(CASES["A"], 65)


def test_cumulants_to_moments_examples():
    assert cumulants_to_moments(CumulantVector((Fraction(3, 2),))).values == (Fraction(3, 2),)
    expo = CumulantVector(tuple(Fraction(factorial(k - 1)) for k in range(1, 4)))
    assert cumulants_to_moments(expo).values[2] == 6
    assert cumulants_to_moments(CumulantVector((1, 1))).values[1] == 2


def test_moments_bell_k1():
    p = CASES["B"]
    tau = CTX.real(p.tau)
    m1 = -(c_star(1, p.y0, p) - c_star(1, p.S, p)) / tau
    assert abs(fpt_moments_bell(p, 1).values[0] - m1) < 1e-60


@pytest.mark.parametrize("case", "ABC")
def test_bell_path_agrees_with_recursion(case):
    K = 10
    a = fpt_moments_bell(CASES[case], K)
    b = cumulants_to_moments(fpt_cumulants(CASES[case], K))
    for x, y in zip(a.values, b.values):
        assert abs(x - y) <= 1e-10 * abs(y)


@pytest.mark.parametrize("case", "ABC")
def test_sign_and_hankel(case):
    c = fpt_cumulants(CASES[case], 6)
    assert c.values[0] > 0 and c.values[1] > 0
    assert cumulants_to_moments(c).hankel_ok()


@settings(max_examples=15, deadline=None)
@given(
    tau=st.floats(0.1, 2),
    sigma=st.floats(0.2, 2),
    s=st.floats(1, 8),
    y0=st.floats(0.05, 2),
    gap=st.floats(0.05, 2),
)
def test_upcrossing_cumulants_positive(tau, sigma, s, y0, gap):
    mu = s * sigma**2 / 2
    p = CirParams(tau=tau, mu=mu, sigma=sigma, c=0, y0=y0, S=y0 + gap)
    c = fpt_cumulants(p, 4, context_for(128))
    assert c.values[0] > 0 and c.values[1] > 0


def test_scale_covariance():
    c = fpt_cumulants(CASES["A"], 8)
    sig = CTX.mp.sqrt(c.values[1])
    sc = c.scaled(sig)
    for k in range(1, 9):
        assert abs(sc.values[k - 1] - c.values[k - 1] / sig**k) == 0
    assert abs(sc.values[1] - 1) < 1e-70


def test_moment_cumulant_round_trip():
    m = fpt_moments_bell(CASES["C"], 10)
    back = cumulants_to_moments(moments_to_cumulants(m))
    for x, y in zip(back.values, m.values):
        assert abs(x - y) <= 1e-12 * abs(y)


def test_laplace_transform_limits():
    p = CASES["A"]
    assert abs(float(laplace_transform(1e-8, p)) - 1) < 1e-6
    v = float(laplace_transform(1, p))
    assert 0 < v < 1


def test_laplace_derivatives_reproduce_cumulants():
    """Extrapolated difference quotients of -log L(z) at 0+ give c_1 and c_2."""
    p = CASES["A"]
    c = fpt_cumulants(p, 2)
    mp = CTX.mp
    hs = [mp.mpf("1e-3") / 2**i for i in range(4)]
    # -log L(h) / h = c1 - c2 h / 2 + O(h^2)
    y = np.array([float(-mp.log(laplace_transform(h, p)) / h) for h in hs])
    A = np.array([[1.0, float(h), float(h) ** 2] for h in hs])
    coef = np.linalg.lstsq(A, y, rcond=None)[0]
    assert coef[0] == pytest.approx(float(c.values[0]), rel=1e-3)
    assert -2 * coef[1] == pytest.approx(float(c.values[1]), rel=1e-3)


def test_laplace_transform_matches_cumulant_series():
    p = CASES["C"]
    c = fpt_cumulants(p, 30)
    z = CTX.real("0.05")
    series = sum(c.values[k - 1] * (-z) ** k / CTX.mp.factorial(k) for k in range(1, 31))
    assert abs(CTX.mp.log(laplace_transform(z, p)) - series) < 1e-12


@pytest.mark.slow
def test_laplace_transform_monte_carlo():
    from cirfpt.montecarlo import SimulationConfig, simulate

    p = CASES["A"]
    s = simulate(p, SimulationConfig(n_paths=4000, dt=2e-3, seed=11, method="transition"))
    e = np.exp(-s.times)
    est, se = e.mean(), e.std(ddof=1) / np.sqrt(e.size)
    assert abs(est - float(laplace_transform(1, p))) < 4 * se


def test_moment_vector_stats():
    m = MomentVector((Fraction(2), Fraction(5), Fraction(14), Fraction(44)))
    assert m.variance == 1
    assert m.mean == 2
    assert m.raw(0) == 1
    c = moments_to_cumulants(m)
    assert c.values[:2] == (2, 1)
