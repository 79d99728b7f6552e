import math

import mpmath as mp
import numpy as np
import pytest
from scipy.integrate import quad

import eigenwave as ew
from eigenwave.errors import ConfigError
from eigenwave.filters import SchemeKind

# frozen oracle values, computed with mpmath at 40 digits
ALPHA_D_TENTH = 0.4472135954999579    # tan(pi/10)/tan(pi/5)
ADJUSTED_RATIO_10 = 0.9144212940876390


def test_beta_peak_is_one():
    for np_ in (1, 2, 4, 8):
        assert ew.beta(3.7, 3.7, np_) == pytest.approx(1.0, abs=1e-14)


def test_beta_at_zero_is_minus_half():
    assert ew.beta(0.0, 5.0, 1) == pytest.approx(-0.5, abs=1e-14)


def test_beta_zero_at_integer_multiples():
    for k in range(2, 6):
        assert abs(ew.beta(k * 4.0, 4.0, 1)) <= 1e-14


def test_beta_range_over_dense_sampling():
    lam = np.linspace(0.0, 20.0, 100_000)
    for np_ in (1, 2, 4, 8):
        vals = ew.beta(lam, 1.0, np_)
        assert vals.min() >= -0.5 - 1e-12
        assert vals.max() <= 1.0 + 1e-12


def test_beta_matches_direct_quadrature():
    # the three-sinc closed form equals the defining weighted time integral
    rng = np.random.default_rng(11)
    omega = 2.3
    t_final = 2 * np.pi / omega
    for lam in rng.uniform(0.0, 6 * omega, 100):
        val, _ = quad(lambda t: (np.cos(omega * t) - 0.25) * np.cos(lam * t),
                      0.0, t_final, epsabs=1e-12, epsrel=1e-12, limit=400)
        assert ew.beta(lam, omega, 1) == pytest.approx(2.0 / t_final * val,
                                                       abs=1e-10)


def test_beta_depends_on_ratio_only():
    lam = np.linspace(0.0, 30.0, 301)
    base = ew.beta(lam, 1.0, 2)
    for s in (0.5, 2.0, 10.0):
        assert np.allclose(ew.beta(s * lam, s, 2), base, atol=1e-12)


def test_peak_width_halves_when_periods_double():
    def width(n_periods):
        lam = np.linspace(0.5, 1.5, 200_001)
        vals = ew.beta(lam, 1.0, n_periods)
        above = lam[vals >= 0.5]
        return above.max() - above.min()

    w1, w2, w4 = width(1), width(2), width(4)
    assert w1 / w2 == pytest.approx(2.0, rel=0.1)
    assert w2 / w4 == pytest.approx(2.0, rel=0.1)


def test_beta_rejects_bad_arguments():
    with pytest.raises(ValueError):
        ew.beta(1.0, -1.0)
    with pytest.raises(ValueError):
        ew.beta(-1.0, 1.0)


def test_sigma_weights():
    w = ew.sigma_weights(2, 0.5)
    assert np.array_equal(w, [0.25, 0.5, 0.25])
    w = ew.sigma_weights(10, 0.1)
    assert w.sum() == pytest.approx(1.0, abs=1e-15)


def test_sigma_quadrature_accuracy_on_cos_squared():
    omega = 3.0
    for n in (20, 40, 80):
        t_final = 2 * np.pi / omega
        dt = t_final / n
        t = np.arange(n + 1) * dt
        approx = (ew.sigma_weights(n, dt) * np.cos(omega * t) ** 2).sum()
        assert abs(approx - t_final / 2) <= 10.0 * dt ** 2 * t_final


def test_alpha_d_frozen_value():
    assert ew.alpha_d(2 * np.pi / 10) == pytest.approx(ALPHA_D_TENTH, abs=1e-15)


def test_alpha_d_small_step_limit():
    # tends to 1/2, recovering the continuous filter coefficient 1/4 = a/2
    assert ew.alpha_d(1e-6) == pytest.approx(0.5, abs=1e-9)
    assert ew.alpha_d(1e-4) / 2 == pytest.approx(0.25, abs=1e-8)


def test_alpha_d_domain_and_tan_equivalence():
    for bad in (0.0, np.pi, 4.0, -0.3):
        with pytest.raises(ValueError):
            ew.alpha_d(bad)
    # matches the tan ratio away from its removable singularity
    for x in (0.3, 1.0, 1.5):
        assert ew.alpha_d(x) == pytest.approx(
            math.tan(x / 2) / math.tan(x), rel=1e-13)
    assert ew.alpha_d(np.pi / 2) == pytest.approx(0.0, abs=1e-15)


def test_lambda_tilde_small_step_limit():
    for scheme in SchemeKind:
        for lam in (0.5, 2.0, 7.0):
            dt = 1e-4 / lam
            lt = ew.lambda_tilde(lam, dt, scheme)
            assert abs(lt - lam) / lam <= (lam * dt) ** 2


def test_lambda_tilde_explicit_stability_boundary():
    lam, dt = 4.0, 0.5
    assert ew.lambda_tilde(lam, dt, SchemeKind.EXPLICIT) == pytest.approx(
        np.pi / dt, rel=1e-14)
    with pytest.raises(ValueError):
        ew.lambda_tilde(4.1, dt, SchemeKind.EXPLICIT)


def test_lambda_tilde_implicit_matches_scalar_recurrence():
    # integrate the trapezoidal two-step recurrence for a single mode and
    # compare against cos(lambda_tilde t^n)
    lam, dt = 1.0, 0.1
    lt = ew.lambda_tilde(lam, dt, SchemeKind.IMPLICIT)
    denom = 1.0 + 0.5 * lam ** 2 * dt ** 2
    w_prev, w = 1.0, 1.0 / denom
    for n in range(2, 101):
        w_prev, w = w, (2.0 * w - w_prev + 0.5 * dt ** 2 * (-lam ** 2) * w_prev) / denom
        assert abs(w - math.cos(lt * n * dt)) <= 1e-10


def test_lambda_tilde_explicit_matches_scalar_recurrence():
    lam, dt = 3.0, 0.05
    lt = ew.lambda_tilde(lam, dt, SchemeKind.EXPLICIT)
    w_prev, w = 1.0, 1.0 - 0.5 * (lam * dt) ** 2
    for n in range(2, 101):
        w_prev, w = w, 2.0 * w - w_prev - (lam * dt) ** 2 * w
        assert abs(w - math.cos(lt * n * dt)) <= 1e-10


def test_filter_spec_derived_quantities():
    spec = ew.FilterSpec(4.0, 2, 30)
    assert spec.t_final == pytest.approx(2 * 2 * np.pi / 4.0, rel=1e-15)
    assert spec.dt == pytest.approx(spec.t_final / 30, rel=1e-15)
    assert spec.sigma.sum() == pytest.approx(spec.t_final, rel=1e-14)
    assert spec.steps_per_period == 15


def test_filter_spec_rejects_coarse_stepping():
    with pytest.raises(ConfigError):
        ew.FilterSpec(4.0, 1, 2)   # two steps per period: alpha_d undefined


def test_beta_discrete_is_one_at_omega():
    for n_its in range(5, 21):
        for n_periods in (1, 2):
            spec = ew.FilterSpec(7.3, n_periods, n_periods * n_its)
            assert ew.beta_discrete(7.3, spec) == pytest.approx(1.0, abs=1e-12)


def test_beta_discrete_at_zero_matches_extended_precision_sum():
    spec = ew.FilterSpec(3.0, 1, 10)
    with mp.workdps(40):
        om = mp.mpf(3)
        t_final = 2 * mp.pi / om
        dt = t_final / 10
        alpha = mp.tan(om * dt / 2) / mp.tan(om * dt)
        total = mp.mpf(0)
        for n in range(11):
            sig = dt / 2 if n in (0, 10) else dt
            total += sig * (mp.cos(om * n * dt) - alpha / 2)
        expected = float(2 / t_final * total)
    assert ew.beta_discrete(0.0, spec) == pytest.approx(expected, abs=1e-14)
    assert expected == pytest.approx(-spec.alpha, abs=1e-14)


def test_beta_discrete_second_order_in_dt():
    omega = 2.0
    # at half-integer ratios both filters sit exactly on a common zero
    spec = ew.FilterSpec(omega, 1, 40)
    for r in (0.5, 1.5, 3.0):
        assert abs(ew.beta(r * omega, omega, 1)) <= 1e-14
        assert abs(ew.beta_discrete(r * omega, spec)) <= 1e-14
    # away from the zeros the quadrature error decays at second order
    errs = []
    for nt in (40, 80, 160):
        spec = ew.FilterSpec(omega, 1, nt)
        errs.append(max(abs(ew.beta_discrete(r * omega, spec)
                            - ew.beta(r * omega, omega, 1))
                        for r in (0.55, 1.37, 2.71)))
    slopes = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(slopes > 1.7) and np.all(slopes < 2.5)


def test_beta_tilde_matches_continuous_for_tiny_steps():
    omega = 5.0
    spec = ew.FilterSpec(omega, 1, 4000)
    lam = np.linspace(0.0, 2.0 * omega, 100)
    disc = ew.beta_tilde_d(lam, spec, SchemeKind.EXPLICIT)
    assert np.max(np.abs(disc - ew.beta(lam, omega, 1))) <= 1e-6


def test_beta_tilde_peak_narrows_with_more_steps():
    # few implicit steps per period produce a visibly broader main peak
    omega = 1.0
    lam = np.linspace(0.3, 4.0, 40_001)

    def halfwidth(n_its):
        spec = ew.FilterSpec(omega, 1, n_its)
        vals = ew.beta_tilde_d(lam, spec, SchemeKind.IMPLICIT)
        above = lam[vals >= 0.5]
        return above.max() - above.min()

    w_cont = 2 * (np.ptp(np.array([l for l in lam
                                   if ew.beta(l, omega, 1) >= 0.5])) / 2)
    assert halfwidth(4) > 1.5 * w_cont
    assert halfwidth(5) > 1.3 * w_cont
    assert abs(halfwidth(10) - w_cont) <= 0.35 * w_cont
    assert abs(halfwidth(20) - w_cont) <= 0.1 * w_cont


def test_beta_tilde_implicit_peak_sits_above_omega():
    omega = 1.0
    spec = ew.FilterSpec(omega, 1, 10)
    lam = np.linspace(0.5, 2.0, 20_001)
    vals = ew.beta_tilde_d(lam, spec, SchemeKind.IMPLICIT)
    assert lam[np.argmax(vals)] > omega * 1.02


def test_adjusted_omega_frozen_ratio_and_recentering():
    ratio = ew.adjusted_omega(1.0, 10)
    assert ratio == pytest.approx(ADJUSTED_RATIO_10, abs=1e-12)
    omega = 12.0
    spec = ew.FilterSpec(ratio * omega, 1, 10)
    lam = np.linspace(0.5 * omega, 1.5 * omega, 10_000)
    vals = ew.beta_tilde_d(lam, spec, SchemeKind.IMPLICIT)
    peak = lam[np.argmax(vals)]
    assert abs(peak - omega) <= (lam[1] - lam[0]) * 1.000001


def test_adjusted_omega_limits_and_domain():
    assert ew.adjusted_omega(2.0, 100_000) == pytest.approx(2.0, rel=1e-9)
    with pytest.raises(ValueError):
        ew.adjusted_omega(1.0, 4)


def test_adjusted_omega_step_product_invariant():
    # omega * dt is unchanged by retargeting: both equal 2 pi / n_its
    omega, n_its = 9.0, 12
    om_t = ew.adjusted_omega(omega, n_its)
    spec = ew.FilterSpec(om_t, 1, n_its)
    assert om_t * spec.dt == pytest.approx(2 * np.pi / n_its, rel=1e-14)
    assert omega * (2 * np.pi / omega / n_its) == pytest.approx(
        om_t * spec.dt, rel=1e-14)


def test_sinc_series_branch_smooth():
    xs = np.array([-2e-4, -1e-7, 0.0, 1e-9, 5e-5, 2e-4])
    vals = ew.sinc(xs)
    with mp.workdps(40):
        exact = [float(mp.sin(mp.mpf(float(x))) / mp.mpf(float(x))) if x else 1.0
                 for x in xs]
    assert np.allclose(vals, exact, rtol=1e-15, atol=1e-15)
