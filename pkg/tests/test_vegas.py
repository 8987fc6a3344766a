import math

import numpy as np
import pytest

from jjgrayzone import model
from jjgrayzone.bvp import default_grid, solve_all
from jjgrayzone.coeffs import compute_coeffs, compute_noise_quadrature
from jjgrayzone.errors import ConfigurationError
from jjgrayzone.model import DimensionlessParams
from jjgrayzone.vegas import AxisMap, McConfig, compute_noise_vegas, vegas_integrate


def peaked(x):
    # narrow Gaussian in 3-D, integral over [0,1]^3 known to double precision
    s = 0.05
    r2 = ((x - 0.3) ** 2).sum(axis=1)
    return np.exp(-r2 / (2 * s * s)) / (2 * math.pi * s * s) ** 1.5


BOX = [(0.0, 1.0)] * 3


def test_config_validation():
    with pytest.raises(ConfigurationError):
        McConfig(sample_budget=100)
    with pytest.raises(ConfigurationError):
        McConfig(n_final_iterations=0)
    with pytest.raises(ConfigurationError):
        McConfig(adapt_fraction=1.0)


def test_axis_map_is_bijective():
    m = AxisMap(0.0, 2.0, 8)
    y = np.linspace(0, 1, 1001)[:-1]
    x0, jac0, _ = m(y)
    assert np.allclose(x0, 2 * y) and np.allclose(jac0, 2.0)
    m.refine(np.r_[np.full(4, 10.0), np.full(4, 1.0)], alpha=1.0)
    x, jac, _ = m(y)
    assert np.all(np.diff(x) > 0) and x[0] == 0.0
    assert m.edges[-1] == 2.0
    # bins crowd where the weight was
    assert m.edges[4] < 1.0
    # Jacobian integrates to the interval length
    assert np.mean(jac) == pytest.approx(2.0, rel=1e-2)


def test_integrates_peak():
    r = vegas_integrate(peaked, BOX, McConfig(sample_budget=200_000))
    assert abs(r.value - 1.0) < 4 * r.error
    assert r.error < 5e-3


def test_adaptation_beats_plain_sampling():
    plain = vegas_integrate(peaked, BOX, McConfig(sample_budget=100_000, n_adapt_iterations=0,
                                                  strata=1))
    adapt = vegas_integrate(peaked, BOX, McConfig(sample_budget=100_000))
    assert adapt.error < 0.3 * plain.error


def test_deterministic_and_worker_independent():
    cfg = McConfig(sample_budget=50_000, rng_seed=7)
    a = vegas_integrate(peaked, BOX, cfg)
    b = vegas_integrate(peaked, BOX, cfg)
    c = vegas_integrate(peaked, BOX, McConfig(sample_budget=50_000, rng_seed=7, workers=3))
    assert a.value == b.value == c.value and a.error == c.error
    d = vegas_integrate(peaked, BOX, McConfig(sample_budget=50_000, rng_seed=8))
    assert d.value != a.value


def test_zero_integrand():
    r = vegas_integrate(lambda x: np.zeros(len(x)), BOX, McConfig(sample_budget=20_000))
    assert r.value == 0.0 and r.error == 0.0


@pytest.fixture(scope="module")
def standard():
    w = model.step(40.0)
    p = DimensionlessParams(beta_c=1.0, q=500.0, theta=1.0, mu_initial=1.0)
    return w, p, solve_all(w, default_grid(w, 1.0), 1.0)


def test_noise_vegas_matches_quadrature(standard):
    w, p, sol = standard
    ref = compute_noise_quadrature(sol, p)
    r = compute_noise_vegas(sol, p, McConfig(sample_budget=200_000), waveform=w)
    for name, v, e, q in zip("ABC", r.values, r.errors, ref):
        scale = abs(q) if name != "B" else 2 * math.sqrt(ref[0] * ref[2])
        assert abs(v - q) <= 4 * e, name
        assert abs(v - q) <= 0.02 * scale, name
    assert {b["coefficient"] for b in r.bands} == {"A", "B", "C"}


def test_noise_vegas_only_c(standard):
    w, p, sol = standard
    r = compute_noise_vegas(sol, p, McConfig(sample_budget=50_000), waveform=w, which=("C",))
    assert math.isnan(r.values[0]) and r.values[2] > 0 and r.errors[2] > 0


def test_mc_coeffs_carry_errors(standard):
    w, p, sol = standard
    c = compute_coeffs(sol, w, p, method="monte_carlo", mc_config=McConfig(sample_budget=50_000))
    assert c.method_tag == "monte_carlo" and c.mc_error_C > 0 and c.mc_error_A > 0
