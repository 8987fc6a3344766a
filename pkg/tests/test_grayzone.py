import math

import mpmath as mp
import numpy as np
import pytest

from oracles import classical_gray_zone, quantum_gray_zone

from jjgrayzone import model
from jjgrayzone.coeffs import PropagatorCoeffs, classical_kernel
from jjgrayzone.errors import ConfigurationError, RegimeError
from jjgrayzone.grayzone import (InitialState, check_plateau, evaluate, gray_zone_asymptotic,
                                 gray_zone_full, initial_thermal_state, plateau_series,
                                 stretch, switching_probability)
from jjgrayzone.model import DimensionlessParams


def coeffs(**kw):
    base = dict(K1=0.0, K2=0.0, N=0.0, L=0.0, Q1=2 * math.sqrt(math.pi), Q2=0.0,
                A=0.0, B=0.0, C=1.0)
    base.update(kw)
    return PropagatorCoeffs(**base)


ZERO = InitialState(0.0, 0.0)
P1 = DimensionlessParams(beta_c=1.0, q=500.0, mu_initial=1.0)


class TestInitialState:
    def test_zero_point(self):
        s = initial_thermal_state(DimensionlessParams(beta_c=1, q=500, mu_initial=0.64))
        assert s.phi_var_i == pytest.approx(1 / (4 * 500 * 0.8), rel=1e-15)
        assert s.phi_dot_var_i == pytest.approx(0.64 * s.phi_var_i, rel=1e-15)

    def test_classical_limit(self):
        s = initial_thermal_state(DimensionlessParams(beta_c=1, q=500, theta=1e4, mu_initial=0.5))
        assert s.phi_var_i == pytest.approx(1e4 / (2 * 500 * 0.5), rel=1e-8)

    def test_fig2_numbers(self):
        s = initial_thermal_state(DimensionlessParams(beta_c=1, q=498, theta=0.60, mu_initial=1))
        ref = mp.coth(mp.mpf(1) / (2 * mp.mpf("0.60"))) / 1992
        assert s.phi_var_i == pytest.approx(float(ref), rel=1e-14)

    def test_needs_mu(self):
        with pytest.raises(ConfigurationError):
            initial_thermal_state(DimensionlessParams(beta_c=1, q=500))


class TestFormulas:
    def test_unit_examples(self):
        assert gray_zone_full(coeffs(), ZERO, P1).delta_ix_over_ic == pytest.approx(1.0)
        assert gray_zone_asymptotic(coeffs()).delta_ix_over_ic == pytest.approx(1.0)

    def test_sqrt_scaling(self):
        assert gray_zone_asymptotic(coeffs(C=4.0)).delta_ix_over_ic == pytest.approx(2.0)

    def test_initial_state_irrelevant_without_k1(self):
        s1 = InitialState(1e-3, 0.0)
        s2 = InitialState(2e-3, 0.0)
        a = gray_zone_full(coeffs(), s1, P1).delta_ix_over_ic
        b = gray_zone_full(coeffs(), s2, P1).delta_ix_over_ic
        assert a == b

    def test_full_formula_terms(self):
        c = coeffs(K1=3.0, C=2.0, Q1=5.0)
        s = InitialState(0.01, 0.02)
        p = DimensionlessParams(beta_c=4.0, q=10.0, mu_initial=0.5)
        br = 2.0 + 4 * 9 * 0.01 + (10 / 2) ** 2 * 0.02
        ref = 2 * math.sqrt(math.pi) * math.sqrt(br) / (3 / 0.5 + 5)
        assert gray_zone_full(c, s, p).delta_ix_over_ic == pytest.approx(ref, rel=1e-15)

    def test_regime_errors(self):
        with pytest.raises(RegimeError):
            gray_zone_asymptotic(coeffs(Q1=0.0))
        with pytest.raises(RegimeError):
            gray_zone_full(coeffs(K1=-1.0, Q1=1.0), ZERO, P1)

    def test_mc_error_propagation(self):
        r = gray_zone_asymptotic(coeffs(C=4.0, mc_error_C=0.4))
        assert r.error == pytest.approx(0.5 * 2.0 * 0.1)


class TestProbability:
    def test_shape(self):
        c = coeffs(C=0.01)
        w = gray_zone_full(c, ZERO, P1).delta_ix_over_ic
        x = np.linspace(-3 * w, 3 * w, 41)
        p = switching_probability(c, ZERO, P1, x)
        assert switching_probability(c, ZERO, P1, 0.0) == 0.5
        assert np.all(np.diff(p) < 0)
        assert np.allclose(p + p[::-1], 1.0, atol=1e-12)
        assert switching_probability(c, ZERO, P1, 10 * w) < 1e-10

    def test_slope_defines_width(self):
        c = coeffs(C=0.01)
        w = gray_zone_full(c, ZERO, P1).delta_ix_over_ic
        d = 1e-4 * w
        slope = (switching_probability(c, ZERO, P1, d) - switching_probability(c, ZERO, P1, -d)) / (2 * d)
        assert 1 / abs(slope) == pytest.approx(w, rel=1e-6)


class TestPlateau:
    def test_constant(self):
        m = check_plateau([(1, 2.0), (2, 2.0), (3, 2.0)])
        assert m.spread == 0 and m.ok

    def test_varying(self):
        assert not check_plateau([(1, 1.0), (2, 1.1), (3, 1.2)]).ok

    def test_too_short(self):
        with pytest.raises(ConfigurationError):
            check_plateau([(1, 1.0), (2, 1.0)])

    def test_standard_step(self):
        series = [(t, evaluate(model.step(t), P1).result.delta_ix_over_ic) for t in (20, 40, 80)]
        assert check_plateau(series).ok


@pytest.mark.parametrize("beta_c", [0.1, 1.0, 10.0])
@pytest.mark.parametrize("theta", [0.0, 1.0])
def test_quantum_langevin_oracle(beta_c, theta):
    t_end = 2 * model.default_duration(beta_c)[0]
    p = DimensionlessParams(beta_c=beta_c, q=500.0, theta=theta)
    got = evaluate(model.step(t_end), p).result.delta_ix_over_ic
    ref = quantum_gray_zone(beta_c, theta, 500.0, t_end, t_end / 2)
    assert got == pytest.approx(ref, rel=2e-4)


@pytest.mark.parametrize("beta_c", [0.3, 3.0])
def test_classical_langevin_oracle(beta_c):
    t_end = 2 * model.default_duration(beta_c)[0]
    p = DimensionlessParams(beta_c=beta_c, q=500.0, theta=5.0)
    got = evaluate(model.step(t_end), p, kernel=classical_kernel,
                   variant="full_eq13").result.delta_ix_over_ic
    ref = classical_gray_zone(beta_c, 5.0, 500.0, t_end, t_end / 2)
    assert got == pytest.approx(ref, rel=2e-4)


def test_full_and_asymptotic_agree():
    w = model.step(40.0)
    a = evaluate(w, P1).result.delta_ix_over_ic
    f = evaluate(w, P1, variant="full_eq13").result.delta_ix_over_ic
    assert abs(a / f - 1) < 1e-2


def test_time_shift_invariance():
    w = model.step(40.0, 20.0)
    base = evaluate(w, P1).result.delta_ix_over_ic
    moved = evaluate(w.shifted(7.0), P1).result.delta_ix_over_ic
    assert abs(moved / base - 1) < 5e-3


def test_q_scaling():
    w = model.step(40.0)
    a = evaluate(w, DimensionlessParams(beta_c=1, q=500)).result.delta_ix_over_ic
    b = evaluate(w, DimensionlessParams(beta_c=1, q=1000)).result.delta_ix_over_ic
    assert a / b == pytest.approx(math.sqrt(2), rel=1e-9)


def test_theta_nondecreasing():
    w = model.step(40.0)
    vals = [evaluate(w, DimensionlessParams(beta_c=1, q=500, theta=t)).result.delta_ix_over_ic
            for t in (0.0, 0.3, 1.0, 3.0)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_no_instability_refused():
    w = model.renormalize_inductance(model.step(40.0), 0.4)
    with pytest.raises(RegimeError, match="no instability"):
        evaluate(w, P1)


def test_inductive_source_runs():
    w = model.renormalize_inductance(model.step(40.0), 1.0)
    r = evaluate(w, DimensionlessParams(beta_c=1, q=500)).result
    assert r.delta_ix_over_ic > 0


def test_stretch_and_series():
    w = model.step(40.0, 20.0)
    s = stretch(w, 2.0)
    assert (s.t_end, s.t_inv) == (80.0, 40.0)
    series = plateau_series(w, P1)
    assert [t for t, _ in series] == [40.0, 80.0, 160.0]


def test_result_in_amperes():
    r = gray_zone_asymptotic(coeffs()).with_current(145e-6)
    assert r.delta_ix == pytest.approx(145e-6)


def test_variant_aliases():
    w = model.step(40.0)
    assert evaluate(w, P1, variant="full").result.variant == "full_eq13"
    with pytest.raises(ConfigurationError):
        evaluate(w, P1, variant="exact")
