"""Gray-zone width and switching probability from the propagator coefficients.

The final phase distribution is Gaussian, so the switching probability is
a normal CDF in Ix whose slope at Ix = 0 defines the gray-zone width

    dIx / Ic = 2 sqrt(pi) sqrt(C + 4 K1^2 <phi^2>_i + (q / sqrt(beta_c))^2 <phidot^2>_i)
               / |K1 / mu_i + Q1|

which reduces to 2 sqrt(pi) sqrt(C) / |Q1| once the initial state has been
forgotten (C >> 1, Q1 >> K1).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtr

from . import model
from .bvp import BvpSolution, default_grid, solve_all
from .coeffs import PropagatorCoeffs, compute_coeffs
from .errors import ConfigurationError, RegimeError
from .model import DimensionlessParams, Waveform

PLATEAU_TOL = 5e-3
PLATEAU_FACTORS = (1.0, 2.0, 4.0)
VARIANTS = ("full_eq13", "asymptotic_eq14")
VARIANT_ALIASES = {"full": "full_eq13", "asymptotic": "asymptotic_eq14"}


@dataclass(frozen=True)
class InitialState:
    phi_var_i: float
    phi_dot_var_i: float

    def __post_init__(self):
        if self.phi_var_i < 0 or self.phi_dot_var_i < 0:
            raise ConfigurationError("initial variances must be non-negative")


@dataclass
class GrayZoneResult:
    delta_ix_over_ic: float
    variant: str
    error: float = 0.0
    C: float = float("nan")
    Q1: float = float("nan")
    K1: float = float("nan")
    mc_error_C: float = 0.0
    plateau_ok: Optional[bool] = None
    warnings: list = field(default_factory=list)
    delta_ix: Optional[float] = None

    def with_current(self, critical_current: float) -> "GrayZoneResult":
        """Copy with the width (and error) converted to amperes."""
        out = GrayZoneResult(**{k: getattr(self, k) for k in self.__dataclass_fields__})
        out.delta_ix = self.delta_ix_over_ic * critical_current
        out.warnings = list(self.warnings)
        return out


def initial_thermal_state(p: DimensionlessParams) -> InitialState:
    """Equilibrium Gaussian of the undamped oscillator with curvature mu_i."""
    mu_i = p.mu_initial
    if mu_i is None or not mu_i > 0:
        raise ConfigurationError("initial state needs mu_initial > 0")
    w = math.sqrt(mu_i)
    coth = 1.0 if p.theta == 0 else 1.0 / math.tanh(w / (2.0 * p.theta))
    var = coth / (4.0 * p.q * w)
    return InitialState(var, mu_i * var)


def _bracket(c: PropagatorCoeffs, s: InitialState, p: DimensionlessParams) -> float:
    return (c.C + 4.0 * c.K1 ** 2 * s.phi_var_i
            + (p.q / math.sqrt(p.beta_c)) ** 2 * s.phi_dot_var_i)


def _denominator(c: PropagatorCoeffs, p: DimensionlessParams) -> float:
    den = c.K1 / p.mu_initial + c.Q1
    # the overall sign of Q1 follows the orientation of the b-functions; only
    # a vanishing (or cancelling) gain means the comparator cannot decide
    if not math.isfinite(den) or abs(den) <= 1e-12 * (abs(c.K1 / p.mu_initial) + abs(c.Q1)):
        raise RegimeError("no deterministic switching gain; waveform or duration invalid")
    return abs(den)


def gray_zone_full(c: PropagatorCoeffs, s: InitialState, p: DimensionlessParams) -> GrayZoneResult:
    if p.mu_initial is None:
        raise ConfigurationError("gray_zone_full needs mu_initial")
    den = _denominator(c, p)
    br = _bracket(c, s, p)
    if not br > 0:
        raise RegimeError(f"non-positive variance bracket {br:g}")
    val = 2.0 * math.sqrt(math.pi) * math.sqrt(br) / den
    err = 0.5 * val * c.mc_error_C / br
    return GrayZoneResult(val, "full_eq13", err, c.C, c.Q1, c.K1, c.mc_error_C,
                          warnings=p.regime_warnings())


def gray_zone_asymptotic(c: PropagatorCoeffs, p: Optional[DimensionlessParams] = None) -> GrayZoneResult:
    if not math.isfinite(c.Q1) or c.Q1 == 0:
        raise RegimeError("no deterministic switching gain (Q1 = 0)")
    if not c.C > 0:
        raise RegimeError(f"noise coefficient C={c.C:g} is not positive")
    val = 2.0 * math.sqrt(math.pi) * math.sqrt(c.C) / abs(c.Q1)
    err = 0.5 * val * c.mc_error_C / c.C
    warn = p.regime_warnings() if p is not None else []
    return GrayZoneResult(val, "asymptotic_eq14", err, c.C, c.Q1, c.K1, c.mc_error_C,
                          warnings=warn)


def switching_probability(c: PropagatorCoeffs, s: InitialState, p: DimensionlessParams,
                          ix_over_ic):
    """Probability of the phase ending in the lower well, decreasing in Ix."""
    width = gray_zone_full(c, s, p).delta_ix_over_ic
    x = np.asarray(ix_over_ic, dtype=float)
    out = ndtr(-math.sqrt(2.0 * math.pi) * x / width)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class PlateauMetric:
    spread: float
    ok: bool


def check_plateau(series: Sequence[tuple]) -> PlateauMetric:
    """Relative spread (max - min) / mean of the last half of (duration, width) pairs."""
    pts = sorted((float(t), float(v)) for t, v in series)
    if len(pts) < 3:
        raise ConfigurationError("plateau check needs at least three durations")
    tail = np.array([v for _, v in pts[len(pts) // 2:]])
    spread = float((tail.max() - tail.min()) / abs(tail.mean()))
    return PlateauMetric(spread, spread < PLATEAU_TOL)


# --------------------------------------------------------------------------
# pipeline


@dataclass
class Evaluation:
    result: GrayZoneResult
    coeffs: PropagatorCoeffs
    solution: BvpSolution
    params: DimensionlessParams
    waveform: Waveform


def evaluate(w: Waveform, p: DimensionlessParams, method: str = "quadrature",
             variant: str = "asymptotic_eq14", h: Optional[float] = None,
             scheme: str = "fitted", mc_config=None, kernel=None) -> Evaluation:
    """waveform -> BVP -> coefficients -> gray-zone width for one configuration."""
    variant = VARIANT_ALIASES.get(variant, variant)
    if variant not in VARIANTS:
        raise ConfigurationError(f"unknown variant {variant!r}")
    if not w.has_instability:
        raise RegimeError("no instability: mu stays non-negative at the end of the run "
                          "(source inductance too low?)")
    p = p.with_waveform(w)
    for msg in p.regime_warnings():
        warnings.warn(msg, model.RegimeWarning, stacklevel=2)
    sol = solve_all(w, default_grid(w, p.beta_c, h), p.beta_c, scheme=scheme)
    c = compute_coeffs(sol, w, p, method=method, mc_config=mc_config, kernel=kernel)
    if variant == "full_eq13":
        res = gray_zone_full(c, initial_thermal_state(p), p)
    else:
        res = gray_zone_asymptotic(c, p)
    return Evaluation(res, c, sol, p, w)


def stretch(w: Waveform, factor: float) -> Waveform:
    """Waveform padded equally at both ends to ``factor`` times its duration."""
    if factor == 1.0:
        return w
    pad = 0.5 * (factor - 1.0) * w.t_end
    return w.shifted(pad, t_end=w.t_end + 2 * pad)


def plateau_series(w: Waveform, p: DimensionlessParams, factors=PLATEAU_FACTORS,
                   **kw) -> list:
    """[(duration, dIx/Ic)] for the waveform stretched by each factor."""
    out = []
    for f in factors:
        wf = stretch(w, f)
        out.append((wf.t_end, evaluate(wf, p, **kw).result.delta_ix_over_ic))
    return out
