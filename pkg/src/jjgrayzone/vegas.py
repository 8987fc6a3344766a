"""Adaptive stratified Monte Carlo for the noise coefficients.

A VEGAS-style integrator over the box (nu, t, s) in [0, omega_cut] x [0, T]^2:

* each axis carries a piecewise-linear importance map with ``n_bins`` bins,
  refined between iterations from the accumulated |f| histogram (Lepage's
  smoothing and damping exponent ``alpha``),
* the unit cube is split into ``strata**3`` equal hypercubes with the same
  number of points in each, so the variance estimate is the stratified one,
* the grid is trained for ``n_adapt_iterations`` iterations, then frozen; only
  the frozen-grid iterations enter the reported value and error.

Random streams are spawned per (iteration, chunk) from ``rng_seed`` so the
result does not depend on how chunks are distributed over workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericalError

MIN_BUDGET = 10_000


@dataclass(frozen=True)
class McConfig:
    sample_budget: int = 1_000_000
    n_adapt_iterations: int = 5
    adapt_fraction: float = 0.25
    n_final_iterations: int = 5
    n_bins: int = 64
    strata: int = 8
    alpha: float = 1.0
    rng_seed: int = 20_020_412
    workers: int = 1

    def __post_init__(self):
        if self.sample_budget < MIN_BUDGET:
            raise ConfigurationError(f"sample_budget must be at least {MIN_BUDGET}")
        if self.n_adapt_iterations < 0 or self.n_final_iterations < 1:
            raise ConfigurationError("need >= 0 adaptation and >= 1 final iterations")
        if not 0 <= self.adapt_fraction < 1:
            raise ConfigurationError("adapt_fraction must lie in [0, 1)")
        if self.strata < 1 or self.n_bins < 2:
            raise ConfigurationError("strata >= 1 and n_bins >= 2 required")


@dataclass
class VegasResult:
    value: float
    error: float
    chi2_dof: float
    iterations: list = field(default_factory=list)


class AxisMap:
    """Piecewise-linear map y in [0,1] -> x in [lo, hi] with equal-probability bins."""

    def __init__(self, lo, hi, n_bins, edges=None):
        self.lo, self.hi = float(lo), float(hi)
        self.n_bins = n_bins
        self.edges = np.linspace(lo, hi, n_bins + 1) if edges is None else np.asarray(edges)

    def __call__(self, y):
        pos = y * self.n_bins
        idx = np.minimum(pos.astype(np.int64), self.n_bins - 1)
        width = np.diff(self.edges)[idx]
        x = self.edges[idx] + (pos - idx) * width
        jac = width * self.n_bins
        return x, jac, idx

    def refine(self, weight, alpha):
        """Move edges so each bin carries equal smoothed ``weight``."""
        w = np.asarray(weight, dtype=float)
        if not np.any(w > 0):
            return
        # neighbour smoothing, then Lepage compression
        sm = np.empty_like(w)
        sm[0] = (7 * w[0] + w[1]) / 8
        sm[-1] = (w[-2] + 7 * w[-1]) / 8
        sm[1:-1] = (w[:-2] + 6 * w[1:-1] + w[2:]) / 8
        sm /= sm.sum()
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(sm > 0, ((1 - sm) / np.log(1 / sm)) ** alpha, 0.0)
        r = np.where(np.isfinite(r), r, 0.0)
        if r.sum() <= 0:
            return
        cum = np.concatenate([[0.0], np.cumsum(r)])
        targets = np.linspace(0.0, cum[-1], self.n_bins + 1)
        new = np.interp(targets, cum, self.edges)
        new[0], new[-1] = self.lo, self.hi
        self.edges = new


def vegas_integrate(f, bounds, cfg: McConfig) -> VegasResult:
    """Integrate vectorised ``f(x) -> (n,)`` over a 3-D box ``bounds``."""
    dim = len(bounds)
    maps = [AxisMap(lo, hi, cfg.n_bins) for lo, hi in bounds]
    n_cubes = cfg.strata ** dim
    n_adapt = cfg.n_adapt_iterations
    budget_adapt = int(cfg.sample_budget * cfg.adapt_fraction) if n_adapt else 0
    budget_final = cfg.sample_budget - budget_adapt
    seeds = np.random.SeedSequence(cfg.rng_seed).spawn(n_adapt + cfg.n_final_iterations)

    finals = []
    for it in range(n_adapt + cfg.n_final_iterations):
        adapting = it < n_adapt
        n_it = (budget_adapt // n_adapt) if adapting else (budget_final // cfg.n_final_iterations)
        per_cube = max(2, n_it // n_cubes)
        est, var, hist = _iteration(f, maps, cfg, per_cube, seeds[it], want_hist=adapting)
        if not math.isfinite(est) or not math.isfinite(var):
            raise NumericalError("non-finite Monte Carlo sample")
        if adapting:
            for m, h in zip(maps, hist):
                m.refine(h, cfg.alpha)
        else:
            finals.append((est, var))

    ests = np.array([e for e, _ in finals])
    vars_ = np.array([v for _, v in finals])
    if np.any(vars_ <= 0):
        if np.all(ests == 0):
            return VegasResult(0.0, 0.0, 0.0, finals)
        raise NumericalError("non-positive Monte Carlo variance estimate")
    wts = 1.0 / vars_
    mean = float(np.sum(wts * ests) / wts.sum())
    err = float(math.sqrt(1.0 / wts.sum()))
    dof = len(finals) - 1
    chi2 = float(np.sum((ests - mean) ** 2 * wts) / dof) if dof else 0.0
    return VegasResult(mean, err, chi2, finals)


def _iteration(f, maps, cfg, per_cube, seed, want_hist):
    dim = len(maps)
    s = cfg.strata
    n_cubes = s ** dim
    cube_ids = np.arange(n_cubes)
    # fixed chunking: results are identical for any worker count
    chunk = max(1, min(n_cubes, 200_000 // per_cube))
    starts = list(range(0, n_cubes, chunk))
    child = seed.spawn(len(starts))

    def work(k):
        ids = cube_ids[starts[k]:starts[k] + chunk]
        rng = np.random.default_rng(child[k])
        m = ids.size * per_cube
        corner = np.stack(np.unravel_index(ids, (s,) * dim), axis=1).astype(float)
        y = (np.repeat(corner, per_cube, axis=0) + rng.random((m, dim))) / s
        xs, jac, bins = [], np.ones(m), []
        for d in range(dim):
            x, j, b = maps[d](y[:, d])
            xs.append(x)
            jac *= j
            bins.append(b)
        fx = f(np.stack(xs, axis=1)) * jac
        if not np.all(np.isfinite(fx)):
            raise NumericalError("NaN or infinite Monte Carlo sample")
        fx = fx.reshape(ids.size, per_cube)
        cube_mean = fx.mean(axis=1)
        cube_var = fx.var(axis=1, ddof=1) / per_cube
        hist = None
        if want_hist:
            flat = np.abs(fx.ravel())
            hist = [np.bincount(b, weights=flat, minlength=cfg.n_bins) for b in bins]
        return cube_mean.sum(), cube_var.sum(), hist

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            parts = list(pool.map(work, range(len(starts))))
    else:
        parts = [work(k) for k in range(len(starts))]
    est = sum(p[0] for p in parts) / n_cubes
    var = sum(p[1] for p in parts) / n_cubes ** 2
    hist = None
    if want_hist:
        hist = [sum(p[2][d] for p in parts) for d in range(dim)]
    return est, var, hist


# --------------------------------------------------------------------------
# noise coefficients


#: Frequency band edges (plasma units) below the bath cutoff.
BAND_EDGES = (0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0)
PAIRS = {"A": ("b2", "b2"), "B": ("b1", "b2"), "C": ("b1", "b1")}


@dataclass
class NoiseMcResult:
    values: tuple
    errors: tuple
    bands: list = field(default_factory=list)


class _Transform:
    """F(nu) = int b e^{i nu t} dt rewritten after ``order`` integrations by parts.

    F = alpha(nu) + w(nu) * int g(t) e^{i nu t} dt with g = b, b' or b''
    (b'' from the reversed-damping equation b'' = g b' - mu b).  Each
    integration by parts trades a factor 1/nu for a derivative, which kills
    the cancelling high-frequency oscillations the raw cosine kernel has;
    near nu = 0 the raw form is kept because 1/nu would blow up there.
    """

    def __init__(self, sol, waveform, name, order):
        self.t = sol.t
        self.T = sol.grid.t_end
        self.u = getattr(sol, name)
        self.du = getattr(sol, "d" + name)
        self.order = order
        self.damping = 1.0 / math.sqrt(sol.beta_c)
        self.waveform = waveform
        self.mu_nodes = sol.mu

    def mu(self, t):
        if self.waveform is not None:
            return self.waveform(t)
        return np.interp(t, self.t, self.mu_nodes)

    def alpha(self, nu):
        if self.order == 0:
            return np.zeros_like(nu, dtype=complex)
        eT = np.exp(1j * nu * self.T)
        out = (self.u[-1] * eT - self.u[0]) / (1j * nu)
        if self.order == 2:
            out = out + (self.du[-1] * eT - self.du[0]) / nu ** 2
        return out

    def weight(self, nu):
        if self.order == 0:
            return np.ones_like(nu, dtype=complex)
        if self.order == 1:
            return -1.0 / (1j * nu)
        return -1.0 / nu ** 2 + 0j

    def density(self, t):
        u = np.interp(t, self.t, self.u)
        if self.order == 0:
            return u
        du = np.interp(t, self.t, self.du)
        if self.order == 1:
            return du
        return self.damping * du - self.mu(t) * u


def _pair_integrand(fx, fy, kernel, theta):
    """3-D integrand whose integral over (nu, t, s) is int K Re[F_x conj F_y] dnu."""
    T = fx.T

    def f(x):
        nu, tt, ss = x[:, 0], x[:, 1], x[:, 2]
        ax, ay = fx.alpha(nu), fy.alpha(nu)
        gx = fx.weight(nu) * np.exp(1j * nu * tt) * fx.density(tt)
        gy = fy.weight(nu) * np.exp(1j * nu * ss) * fy.density(ss)
        # constant and single-integral parts are spread uniformly over the (t, s) square
        val = (ax * np.conj(ay)).real / T ** 2 + (ax * np.conj(gy)).real / T \
            + (gx * np.conj(ay)).real / T + (gx * np.conj(gy)).real
        return kernel(nu, theta) * val

    return f


def compute_noise_vegas(sol, p, cfg: McConfig = McConfig(), waveform=None, kernel=None,
                        which=("A", "B", "C"), pilot_fraction: float = 0.15,
                        orders=(0, 1, 2)) -> NoiseMcResult:
    """(A, B, C) with one-sigma errors by banded 3-D VEGAS integration.

    ``cfg.sample_budget`` is spent per coefficient.  [0, omega_cut] is cut
    into bands; a pilot run in every band picks the integration-by-parts
    order with the smallest variance (the lowest band always uses the raw
    kernel), and the remaining budget is split between bands in proportion
    to their pilot standard deviations.
    """
    from .coeffs import coth_kernel, noise_prefactor

    kernel = coth_kernel if kernel is None else kernel
    T = sol.grid.t_end
    edges = [0.0] + [e for e in BAND_EDGES if e < p.omega_cut] + [p.omega_cut]
    bands = list(zip(edges[:-1], edges[1:]))
    pref = noise_prefactor(p)
    seq = np.random.SeedSequence(cfg.rng_seed)
    coef_seeds = dict(zip(("A", "B", "C"), seq.spawn(3)))

    values, errors, report = {}, {}, []
    for name in which:
        x_name, y_name = PAIRS[name]
        band_seeds = coef_seeds[name].spawn(2 * len(bands))
        pilot_total = int(cfg.sample_budget * pilot_fraction)
        choices = []
        for k, (lo, hi) in enumerate(bands):
            allowed = (0,) if lo == 0.0 else orders
            per = max(MIN_BUDGET, pilot_total // (len(bands) * len(allowed)))
            best = None
            pilot_seeds = band_seeds[2 * k].spawn(len(allowed))
            for order, sd in zip(allowed, pilot_seeds):
                f = _pair_integrand(_Transform(sol, waveform, x_name, order),
                                    _Transform(sol, waveform, y_name, order), kernel, p.theta)
                pcfg = McConfig(sample_budget=per, n_adapt_iterations=2, n_final_iterations=2,
                                n_bins=cfg.n_bins, strata=min(cfg.strata, 4), alpha=cfg.alpha,
                                rng_seed=int(sd.generate_state(1)[0]), workers=cfg.workers)
                r = vegas_integrate(f, [(lo, hi), (0.0, T), (0.0, T)], pcfg)
                spread = r.error * math.sqrt(per)
                if best is None or spread < best[1]:
                    best = (order, spread, f)
            choices.append(best)

        remaining = cfg.sample_budget - pilot_total
        spreads = np.array([c[1] for c in choices])
        if spreads.sum() > 0:
            share = spreads / spreads.sum()
        else:
            share = np.full(len(bands), 1.0 / len(bands))
        total, var = 0.0, 0.0
        for k, ((lo, hi), (order, spread, f)) in enumerate(zip(bands, choices)):
            n_k = max(MIN_BUDGET, int(remaining * share[k]))
            bcfg = McConfig(sample_budget=n_k, n_adapt_iterations=cfg.n_adapt_iterations,
                            adapt_fraction=cfg.adapt_fraction,
                            n_final_iterations=cfg.n_final_iterations, n_bins=cfg.n_bins,
                            strata=cfg.strata if n_k >= 50 * cfg.strata ** 3 else 4,
                            alpha=cfg.alpha,
                            rng_seed=int(band_seeds[2 * k + 1].generate_state(1)[0]),
                            workers=cfg.workers)
            r = vegas_integrate(f, [(lo, hi), (0.0, T), (0.0, T)], bcfg)
            total += r.value
            var += r.error ** 2
            report.append(dict(coefficient=name, band=(lo, hi), order=order, samples=n_k,
                               value=pref * r.value, error=pref * r.error,
                               chi2_dof=r.chi2_dof))
        scale = 2.0 if name == "B" else 1.0
        values[name] = scale * pref * total
        errors[name] = scale * pref * math.sqrt(var)

    return NoiseMcResult(values=tuple(values.get(n, float("nan")) for n in ("A", "B", "C")),
                         errors=tuple(errors.get(n, float("nan")) for n in ("A", "B", "C")),
                         bands=report)
