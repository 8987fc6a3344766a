"""Propagator coefficients of the reduced density-matrix kernel.

In plasma units the bilinear coefficients are

    K1 = q * int[a1' b1' - mu a1 b1 + (a1 b1' - a1' b1) / (2 sqrt(beta_c))] + q / (2 sqrt(beta_c))
    Q1 = q * int[a' b1' - mu a b1 + (a b1' - a' b1) / (2 sqrt(beta_c)) + b1]

(K2, N, L, Q2 analogously; K2 carries -q / (2 sqrt(beta_c)), N and L a minus sign) and the noise coefficients are

    C = q / (pi sqrt(beta_c)) * int_0^Omega dnu nu coth(nu / 2 theta)
            * int int b1(t) b1(s) cos(nu (t - s)) dt ds

with b2 b2 for A and the symmetrised b1 b2 product for B.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad_vec

from .bvp import BvpSolution
from .errors import ConfigurationError, NumericalError
from .model import DimensionlessParams

METHODS = ("quadrature", "monte_carlo")
BILINEAR_RULES = ("on_shell", "trapezoid")


@dataclass(frozen=True)
class PropagatorCoeffs:
    K1: float
    K2: float
    N: float
    L: float
    Q1: float
    Q2: float
    A: float
    B: float
    C: float
    mc_error_A: float = 0.0
    mc_error_B: float = 0.0
    mc_error_C: float = 0.0
    method_tag: str = "quadrature"

    def check(self, rtol: float = 1e-9) -> None:
        values = [self.K1, self.K2, self.N, self.L, self.Q1, self.Q2, self.A, self.B, self.C]
        if not all(math.isfinite(v) for v in values):
            raise NumericalError("non-finite propagator coefficient")
        slack = 3 * (self.mc_error_A + self.mc_error_C) + rtol * (abs(self.A) + abs(self.C))
        if self.A < -slack or self.C < -slack:
            raise NumericalError(f"negative noise coefficient (A={self.A:g}, C={self.C:g})")

    def scaled(self, factor: float) -> "PropagatorCoeffs":
        names = ("K1", "K2", "N", "L", "Q1", "Q2", "A", "B", "C",
                 "mc_error_A", "mc_error_B", "mc_error_C")
        kw = {n: factor * getattr(self, n) for n in names}
        return PropagatorCoeffs(**kw, method_tag=self.method_tag)


def trapezoid(y: np.ndarray, h: float) -> float:
    return float(h * (y.sum() - 0.5 * (y[0] + y[-1])))


def compute_bilinear(sol: BvpSolution, w, p: DimensionlessParams, rule: str = "on_shell"):
    """(K1, K2, N, L, Q1, Q2).

    ``trapezoid`` integrates the quadratic forms node by node.  ``on_shell``
    (default) uses that b1, b2 solve the reversed-damping equation, so for
    any u the form collapses to the boundary term [u v' - (g/2) u v]_0^T;
    this avoids the heavy cancellation between u'v' and mu u v when
    beta_c is large.  Only the plain integrals of b1, b2 remain.
    """
    if rule not in BILINEAR_RULES:
        raise ConfigurationError(f"unknown bilinear rule {rule!r}")
    if w is not None and abs(w.t_end - sol.grid.t_end) > 1e-12 * max(1.0, w.t_end):
        raise ConfigurationError("BVP grid and waveform cover different intervals")
    if abs(sol.beta_c - p.beta_c) > 1e-12 * p.beta_c:
        raise ConfigurationError("BVP solution was computed for a different beta_c")
    h = sol.grid.h
    g = 1.0 / math.sqrt(p.beta_c)
    half_g = 0.5 * g
    q = p.q
    if rule == "on_shell":
        out = (q * (g - sol.db1[0]), q * (sol.db2[-1] - g), -q * sol.db1[-1],
               q * sol.db2[0], q * trapezoid(sol.b1, h), q * trapezoid(sol.b2, h))
        return tuple(float(x) for x in out)
    mu = sol.mu

    def form(u, du, v, dv):
        return trapezoid(du * dv - mu * u * v + half_g * (u * dv - du * v), h)

    K1 = q * (form(sol.a1, sol.da1, sol.b1, sol.db1) + half_g)
    K2 = q * (form(sol.a2, sol.da2, sol.b2, sol.db2) - half_g)
    N = -q * form(sol.a2, sol.da2, sol.b1, sol.db1)
    L = -q * form(sol.a1, sol.da1, sol.b2, sol.db2)
    Q1 = q * (form(sol.a, sol.da, sol.b1, sol.db1) + trapezoid(sol.b1, h))
    Q2 = q * (form(sol.a, sol.da, sol.b2, sol.db2) + trapezoid(sol.b2, h))
    return tuple(float(x) for x in (K1, K2, N, L, Q1, Q2))


def coth_kernel(nu, theta: float, series_below: float = 1e-4):
    """Bath spectral weight nu * coth(nu / 2 theta), finite (= 2 theta) at nu = 0."""
    nu = np.asarray(nu, dtype=float)
    if theta == 0:
        return nu.copy() if nu.ndim else float(nu)
    x = nu / (2.0 * theta)
    small = np.abs(x) < 0.5 * series_below
    xs = np.where(small, 1.0, x)
    out = np.where(small, 2.0 * theta * (1.0 + x * x / 3.0), 2.0 * theta * xs / np.tanh(xs))
    return out if out.ndim else float(out)


def classical_kernel(nu, theta: float):
    """White-noise limit of ``coth_kernel``."""
    return np.full_like(np.asarray(nu, dtype=float), 2.0 * theta)


def noise_prefactor(p: DimensionlessParams) -> float:
    return p.q / (math.pi * math.sqrt(p.beta_c))


def _linear_filon_weights(theta):
    """Weights (w0, w1) with int_0^1 ((1-s) f0 + s f1) e^{i theta s} ds = w0 f0 + w1 f1."""
    theta = np.asarray(theta, dtype=float)
    small = np.abs(theta) < 1e-3
    th = np.where(small, 1.0, theta)
    e = np.exp(1j * th)
    w1 = e * (1.0 / (1j * th) + 1.0 / th ** 2) - 1.0 / th ** 2
    w0 = (e - 1.0) / (1j * th) - w1
    t2 = theta * theta
    w0s = 0.5 + 1j * theta / 6 - t2 / 24 - 1j * theta * t2 / 120
    w1s = 0.5 + 1j * theta / 3 - t2 / 8 - 1j * theta * t2 / 30
    return np.where(small, w0s, w0), np.where(small, w1s, w1)


def fourier_transform(u: np.ndarray, h: float, nu) -> np.ndarray:
    """int_0^T u(t) e^{i nu t} dt for the piecewise-linear interpolant of nodal ``u``.

    Exact for that interpolant at any nu; reduces to the trapezoidal rule
    as nu h -> 0.  ``u`` may be 2-D (nodes, k) to transform several functions.
    """
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    u2 = u if u.ndim == 2 else u[:, None]
    n = u2.shape[0] - 1
    t = h * np.arange(n + 1)
    out = np.empty((nu.size, u2.shape[1]), dtype=complex)
    # blocks keep the (nu, t) phase matrix small
    block = max(1, 2_000_000 // (n + 1))
    for start in range(0, nu.size, block):
        v = nu[start:start + block]
        phase = np.exp(1j * np.outer(v, t))
        s_all = phase @ u2
        s0 = s_all - phase[:, -1:] * u2[-1]
        s1 = s_all - phase[:, :1] * u2[0]
        w0, w1 = _linear_filon_weights(v * h)
        out[start:start + block] = h * (w0[:, None] * s0
                                         + (w1 * np.exp(-1j * v * h))[:, None] * s1)
    return out if u.ndim == 2 else out[:, 0]


def noise_spectrum(sol: BvpSolution, nu) -> np.ndarray:
    """Kernel-free nu-integrands for (A, B, C): |F b2|^2, 2 Re(F b1 conj F b2), |F b1|^2."""
    f = fourier_transform(np.column_stack([sol.b1, sol.b2]), sol.grid.h, nu)
    f1, f2 = f[:, 0], f[:, 1]
    return np.stack([np.abs(f2) ** 2, 2.0 * (f1 * np.conj(f2)).real, np.abs(f1) ** 2], axis=-1)


@dataclass
class QuadratureReport:
    values: np.ndarray
    abs_error: np.ndarray
    n_evals: int
    n_panels: int


def compute_noise_quadrature(sol: BvpSolution, p: DimensionlessParams, rtol: float = 1e-6,
                             kernel=None, max_panels: int = 4000, report: bool = False):
    """(A, B, C) from the separable cos(nu(t-s)) factorisation.

    The remaining nu-integral over [0, omega_cut] is done by adaptive
    Gauss-Kronrod panels.  ``kernel(nu, theta)`` replaces the coth weight
    (e.g. ``classical_kernel``).
    """
    kernel = coth_kernel if kernel is None else kernel
    h = sol.grid.h
    b = np.column_stack([sol.b1, sol.b2])
    t_end = sol.grid.t_end
    counter = [0]

    def integrand(nu):
        counter[0] += 1
        f = fourier_transform(b, h, nu)[0]
        w = kernel(nu, p.theta)
        return w * np.array([abs(f[1]) ** 2, 2.0 * (f[0] * np.conj(f[1])).real, abs(f[0]) ** 2])

    # panel breaks at the spectral scale of the record and at O(1) plasma scales
    breaks = sorted({x for x in (0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0)
                     if x < p.omega_cut})
    res, err, info = quad_vec(integrand, 0.0, p.omega_cut, epsrel=rtol, epsabs=0.0,
                              norm="max", limit=max_panels, points=breaks,
                              full_output=True)
    if info.status == 2:
        raise NumericalError("non-finite value in the noise integrand")
    if info.status == 1 or not info.success:
        raise NumericalError(
            f"noise quadrature did not reach rtol={rtol:g} within {max_panels} panels; "
            f"achieved C={res[2]:.6g} +/- {err:.2g}")
    pref = noise_prefactor(p)
    A, B, C = (pref * res).tolist()
    if report:
        return (A, B, C), QuadratureReport(pref * res, pref * np.full(3, err), counter[0],
                                           len(info.intervals))
    return A, B, C


def compute_coeffs(sol: BvpSolution, w, p: DimensionlessParams, method: str = "quadrature",
                   mc_config=None, kernel=None, rule: str = "on_shell") -> PropagatorCoeffs:
    """All nine coefficients; ``w`` (the waveform) may be None."""
    K1, K2, N, L, Q1, Q2 = compute_bilinear(sol, w, p, rule=rule)
    if method == "quadrature":
        A, B, C = compute_noise_quadrature(sol, p, kernel=kernel)
        errs = (0.0, 0.0, 0.0)
    elif method == "monte_carlo":
        from .vegas import compute_noise_vegas, McConfig
        res = compute_noise_vegas(sol, p, mc_config or McConfig(), waveform=w,
                                  kernel=kernel)
        A, B, C = res.values
        errs = res.errors
    else:
        raise ConfigurationError(f"unknown method {method!r}")
    out = PropagatorCoeffs(K1, K2, N, L, Q1, Q2, A, B, C, *errs, method_tag=method)
    out.check()
    return out
