import math

import numpy as np
from hypothesis import given, settings, strategies as st

from jjgrayzone import model
from jjgrayzone.coeffs import PropagatorCoeffs
from jjgrayzone.grayzone import InitialState, switching_probability
from jjgrayzone.model import DimensionlessParams, PhysicalParams, to_dimensionless

pos = st.floats(min_value=0.05, max_value=20.0)

COEFFS = PropagatorCoeffs(K1=0.0, K2=0.0, N=0.0, L=0.0, Q1=-3.0e4, Q2=0.0, A=0.0, B=0.0,
                          C=2.0e4)
P1 = DimensionlessParams(beta_c=1.0, q=500.0, mu_initial=1.0)
ZERO = InitialState(0.0, 0.0)


@given(st.floats(min_value=-0.5, max_value=0.5))
def test_probability_symmetry(x):
    p = switching_probability(COEFFS, ZERO, P1, x)
    m = switching_probability(COEFFS, ZERO, P1, -x)
    assert abs(p + m - 1) <= 1e-12
    if abs(x) > 1e-9:
        assert (p < 0.5) == (x > 0)


@given(st.lists(st.floats(min_value=-3.0, max_value=3.0), min_size=2, max_size=40, unique=True))
def test_probability_decreasing(xs):
    xs = np.sort(xs)
    p = switching_probability(COEFFS, ZERO, P1, xs)
    assert np.all(np.diff(p) <= 0)


@given(pos, pos)
def test_renormalize_additive(l1, l2):
    w = model.step(40.0)
    twice = model.renormalize_inductance(model.renormalize_inductance(w, l1), l2)
    once = model.renormalize_inductance(w, 1 / (1 / l1 + 1 / l2))
    assert math.isclose(twice.offset, once.offset, rel_tol=1e-12)
    t = np.linspace(0, 40, 9)
    assert np.allclose(twice(t), once(t), rtol=1e-12, atol=1e-12)


phase = st.floats(min_value=0.0, max_value=6.0)


@given(st.floats(min_value=0.0, max_value=3.0), st.lists(phase, max_size=28),
       st.floats(min_value=3.3, max_value=6.0))
def test_phase_table_exact(first, middle, last):
    phis = [first, *middle, last]
    times = np.arange(len(phis), dtype=float)
    text = "t,phi_e\n" + "".join(f"{t!r},{ph!r}\n" for t, ph in zip(times.tolist(), phis))
    w = model.load_waveform_table(text.encode())
    assert np.array_equal(w(times), np.cos(np.asarray(phis) / 2))


@given(st.floats(min_value=1e-6, max_value=1e-3), st.floats(min_value=0.5, max_value=50.0),
       st.floats(min_value=0.1, max_value=10.0))
def test_beta_c_scale_consistent(ic, r, k):
    a = to_dimensionless(PhysicalParams(critical_current=ic, shunt_resistance=r,
                                        plasma_frequency=1e12))
    b = to_dimensionless(PhysicalParams(critical_current=k * ic, shunt_resistance=r / k,
                                        plasma_frequency=1e12))
    assert math.isclose(a.beta_c, b.beta_c, rel_tol=1e-12)


@given(st.floats(min_value=0.01, max_value=0.9), st.floats(min_value=0.5, max_value=4.0))
@settings(deadline=None)
def test_inversion_time_grows_with_shift(shift, width):
    w = model.tanh_ramp(40.0, 20.0, width=width)
    moved = model.renormalize_inductance(w, 1 / (2 * shift))
    assert model.inversion_time(moved) > model.inversion_time(w)
