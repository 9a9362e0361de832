import math

import numpy as np
import pytest
from scipy import stats as sps

from copoly import analysis, engine
from copoly.analysis import (LOG_C_PRIME, BracketError, CriticalCurvePoint, FitCriterion,
                             bound_exponent, certify_point, checkpoint_growth_scan, estimate_h_hat,
                             fit_m, log_grid, meander_distance, meander_target, relative_errors,
                             stretch_certificate)
from copoly.disorder import Environment, generate
from copoly.engine import first_return_law
from copoly.model import BERNOULLI, GAUSSIAN, PolymerParams, h_lower, h_m, h_upper, optimal_q


# --- meander ----------------------------------------------------------------------

def test_meander_target_mass():
    for N in (10_000, 100_000):
        assert abs(meander_target(N).sum() - 1.0) < 5e-3
    t = meander_target(100)
    assert np.all(t[:50] == 0) and np.all(t >= 0)


def test_meander_free_walk_closed_form():
    N = 10_000
    env = generate(BERNOULLI, N, 0, 0)
    res = meander_distance(env, PolymerParams(0.0, 0.0), N, window=None)
    x = np.arange(-N, N + 1, 2)
    p = sps.binom.pmf((N + x) // 2, N, 0.5)
    expected = np.abs(p - meander_target(N)).sum()
    assert res.distance == pytest.approx(expected, abs=1e-12)
    assert 0.5 < res.distance < 2.0
    assert res.env_id == (0, 0) and res.system_size == N


def test_meander_decreasing_deep_delocalized():
    assert 0.5 > 3 * h_upper(BERNOULLI, 0.1)
    env = generate(BERNOULLI, 32_000, 3, 0)
    p = PolymerParams(0.1, 0.5)
    d = [meander_distance(env, p, N, window=None).distance for N in (2000, 4000, 8000, 16000, 32000)]
    assert all(a > b for a, b in zip(d, d[1:]))
    assert all(0 <= v <= 2 for v in d)


def test_meander_uses_backward_environment():
    env = generate(GAUSSIAN, 2000, 1, 0)
    p = PolymerParams(0.5, 0.6, GAUSSIAN)
    direct = engine.sweep(Environment(env.charges[:2000][::-1].copy(), GAUSSIAN), p, 2000,
                          want_profile=True).profile.endpoint_law()
    expected = np.abs(direct - meander_target(2000)).sum()
    assert meander_distance(env, p, 2000, window=None).distance == pytest.approx(expected, abs=1e-14)


# --- critical curve ------------------------------------------------------------

def test_h_hat_lambda_zero():
    with pytest.raises(BracketError):
        estimate_h_hat(generate(BERNOULLI, 100, 0, 0), 0.0, 100)


def test_h_hat_certificate_and_reproducibility():
    env = generate(BERNOULLI, 20_000, 4, 0)
    for lam in (0.3, 1.0, 3.0):
        pt = estimate_h_hat(env, lam, 20_000, tol=1e-7)
        assert 0 < pt.h_hat < 1 and pt.h_sat == 1.0 and not pt.saturated
        assert pt.bisection_width < 1e-7
        above, below = certify_point(env, pt)
        assert above > 0 > below
        again = estimate_h_hat(generate(BERNOULLI, 20_000, 4, 0), lam, 20_000, tol=1e-7)
        assert again.h_hat == pt.h_hat


def test_h_hat_gaussian_saturation():
    env = generate(GAUSSIAN, 200, 0, 0)
    h_sat = analysis.saturation_level(env, 200)
    # a bracket reaching past h_sat is clipped there
    pts = [estimate_h_hat(env, lam, 200, h_bracket=(0.0, 5.0), window=None) for lam in (2.0, 10.0, 40.0, 100.0)]
    gaps = [h_sat - p.h_hat for p in pts]
    assert all(g > 0 for g in gaps) and all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 0.05
    assert all(p.h_sat == h_sat for p in pts)


def test_h_hat_bad_bracket():
    env = generate(BERNOULLI, 2000, 4, 0)
    with pytest.raises(BracketError):
        estimate_h_hat(env, 1.0, 2000, h_bracket=(0.9, 0.95))
    with pytest.raises(BracketError):
        estimate_h_hat(env, 1.0, 2000, h_bracket=(0.5, 0.5))
    with pytest.raises(ValueError):
        estimate_h_hat(env, 1.0, 2002)


def test_fit_max_ratio_gaussian():
    pts = [CriticalCurvePoint(l, 0.8 * l, 100, (0, 0), 1e-7) for l in (0.1, 0.5, 1.0, 4.0)]
    fit = fit_m(pts, GAUSSIAN, "max_ratio")
    assert fit.m == pytest.approx(0.8, abs=1e-15)
    assert all(abs(r) < 1e-14 for _, r in fit.relative_errors)
    rng = np.random.default_rng(3)
    noisy = [CriticalCurvePoint(l, 0.8 * l + rng.uniform(-1e-6, 1e-6), 100, (0, 0), 1e-7)
             for l in (0.5, 1.0, 2.0, 4.0)]
    assert fit_m(noisy, GAUSSIAN, FitCriterion.MAX_RATIO).m == pytest.approx(0.8, abs=1e-5)


def test_fit_anchor_single_point():
    pt = CriticalCurvePoint(4.0, 0.79, 100, (0, 0), 1e-7)
    fit = fit_m([pt], BERNOULLI)
    assert h_m(BERNOULLI, fit.m, 4.0) == pytest.approx(0.79, abs=1e-12)
    assert fit_m([pt], BERNOULLI, "max_ratio").m == pytest.approx(0.79 / 4.0)
    pts = [pt, CriticalCurvePoint(1.0, 0.5, 100, (0, 0), 1e-7)]
    fit = fit_m(pts, BERNOULLI, anchor=4.0)
    lam, r = fit.relative_errors[1]
    assert r == pytest.approx((h_m(BERNOULLI, fit.m, 1.0) - 0.5) / 0.5)
    assert relative_errors(pts, BERNOULLI, fit.m) == fit.relative_errors
    with pytest.raises(ValueError):
        fit_m(pts, BERNOULLI)  # anchor required
    with pytest.raises(ValueError):
        fit_m([CriticalCurvePoint(4.0, 1.5, 100, (0, 0), 1e-7)], BERNOULLI)
    with pytest.raises(ValueError):
        fit_m([], BERNOULLI)


def test_h_m_monotone_in_m():
    ms = np.linspace(0.05, 2.0, 40)
    vals = [h_m(BERNOULLI, m, 4.0) for m in ms]
    assert all(a < b for a, b in zip(vals, vals[1:]))


# --- growth traces ------------------------------------------------------------------

def test_growth_scan_free_walk():
    env = generate(BERNOULLI, 100_000, 0, 0)
    grid = log_grid(10, 100_000, 30)
    scan = checkpoint_growth_scan(env, PolymerParams(0.0, 0.2), 100_000, grid)
    n = scan.sizes
    exact = np.array([math.lgamma(k + 1) - 2 * math.lgamma(k / 2 + 1) - k * math.log(2) for k in n])
    assert np.allclose(scan.log_z0, exact, atol=1e-10)
    # Stirling: log P(S_N = 0) + (1/2) log N -> log sqrt(2/pi)
    assert scan.log_z0[-1] + 0.5 * math.log(n[-1]) == pytest.approx(0.5 * math.log(2 / math.pi), abs=1e-5)
    assert not scan.spike_flag and scan.spike_statistic < 0.1


def test_growth_scan_grid_validation():
    env = generate(BERNOULLI, 100, 0, 0)
    with pytest.raises(ValueError):
        checkpoint_growth_scan(env, PolymerParams(0.5, 0.2), 100, [3])
    with pytest.raises(ValueError):
        checkpoint_growth_scan(env, PolymerParams(0.5, 0.2), 100, [102])


def test_log_grid():
    g = log_grid(10, 10_000, 20)
    assert all(v % 2 == 0 for v in g) and g == sorted(set(g)) and g[-1] == 10_000


def test_growth_scan_localized_linear():
    env = generate(BERNOULLI, 40_000, 2, 0)
    scan = checkpoint_growth_scan(env, PolymerParams(1.0, 0.2), 40_000, [10_000, 20_000, 40_000])
    v = scan.log_z0
    assert v[2] - v[1] == pytest.approx(2 * (v[1] - v[0]), rel=0.1)


# --- stretches --------------------------------------------------------------------

def test_c_prime_constant():
    K = first_return_law(400)
    seq = [n ** 1.5 * float(K[n]) for n in (1, 10, 100, 400)]
    assert all(a > b for a, b in zip(seq, seq[1:]))
    c = 0.5 / math.sqrt(math.pi)
    assert seq[-1] == pytest.approx(c, rel=1e-3) and seq[-1] > c
    assert LOG_C_PRIME == pytest.approx(math.log(c * c / (8 * math.sqrt(2))), abs=1e-15)


def test_bound_exponent_forms_agree():
    for law in (BERNOULLI, GAUSSIAN):
        q0 = optimal_q(law, 0.6)
        assert bound_exponent(law, 0.6, 0.3, 100, 0.01) == pytest.approx(
            bound_exponent(law, 0.6, 0.3, 100, 0.01, q0), abs=1e-10)


def test_bound_exponent_signs():
    lam = 0.6
    assert 0.3 < h_lower(BERNOULLI, lam)
    assert bound_exponent(BERNOULLI, lam, 0.30, 1000, 0.01) > 0
    for A in (10, 100, 1000, 10 ** 6):
        assert bound_exponent(BERNOULLI, lam, 0.55, A, 1e-6) < 0
    # the bracketed rate grows with A once A > e (log A / A decreasing)
    rates = [bound_exponent(BERNOULLI, lam, h, A, 0.01) / (1.5 * A) for h in (0.3, 0.55) for A in range(4, 400, 2)]
    for block in (rates[:198], rates[198:]):
        assert all(a < b for a, b in zip(block, block[1:]))


def test_stretch_certificate_localized():
    params = PolymerParams(0.6, 0.30)
    certified = 0
    for s in range(20):
        env = generate(BERNOULLI, 200_000, 21, s)
        cert = stretch_certificate(env, params, 20, 0.3, 200_000)
        assert not cert.censored
        rec = cert.record
        assert rec.T == rec.tau_M and rec.ell >= 20
        assert cert.log_z_T == pytest.approx(engine.sweep(env, params, rec.T, window=engine.DEFAULT_WINDOW).pinned_log)
        certified += cert.certified
    assert certified == 20


def test_stretch_certificate_censored():
    env = generate(BERNOULLI, 200, 21, 0)
    cert = stretch_certificate(env, PolymerParams(0.6, 0.3), 100, 0.01, 200)
    assert cert.censored and cert.log_z_T is None and not cert.certified


def test_stretch_extension_decays():
    params = PolymerParams(0.6, 0.44)
    decays = 0
    for s in range(10):
        env = generate(BERNOULLI, 400_000, 5, s)
        cert = stretch_certificate(env, params, 16, 0.3, 200_000, extend=100_000)
        assert len(cert.extension) > 10
        ext = np.array([v for _, v in cert.extension])
        decays += ext[-1] < cert.log_z_T
    assert decays >= 8
