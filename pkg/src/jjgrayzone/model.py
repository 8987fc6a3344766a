"""Physical parameters, their reduction to plasma units, and drive waveforms.

Everything downstream of this module works in scaled time ``t = omega_p * tau``
where the equation of motion reads ``phi'' + phi'/sqrt(beta_c) + mu(t) phi = ...``.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import constants

from .errors import ConfigurationError, DomainError, IngestionError

E_CHARGE = constants.e
HBAR = constants.hbar
K_B = constants.k

#: Regime check threshold for I_Q/I_c and I_T/I_c.
REGIME_RATIO = 0.1


class RegimeWarning(UserWarning):
    pass


class PlateauWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PhysicalParams:
    """Junction parameters in SI units.

    Give exactly one of ``junction_capacitance`` / ``plasma_frequency`` and
    exactly one of ``shunt_resistance`` / ``beta_c``.
    """

    critical_current: float
    temperature: float = 0.0
    shunt_resistance: Optional[float] = None
    beta_c: Optional[float] = None
    junction_capacitance: Optional[float] = None
    plasma_frequency: Optional[float] = None
    cutoff_multiplier: float = 50.0

    def __post_init__(self):
        if not self.critical_current > 0:
            raise ConfigurationError("critical_current must be positive")
        if not self.temperature >= 0:
            raise ConfigurationError("temperature must be non-negative")
        if (self.junction_capacitance is None) == (self.plasma_frequency is None):
            raise ConfigurationError(
                "supply exactly one of junction_capacitance, plasma_frequency")
        if (self.shunt_resistance is None) == (self.beta_c is None):
            raise ConfigurationError("supply exactly one of shunt_resistance, beta_c")
        for name in ("shunt_resistance", "beta_c", "junction_capacitance",
                     "plasma_frequency"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ConfigurationError(f"{name} must be positive")

    @property
    def omega_p(self) -> float:
        if self.plasma_frequency is not None:
            return self.plasma_frequency
        return math.sqrt(2 * E_CHARGE * self.critical_current
                         / (HBAR * self.junction_capacitance))

    @property
    def omega_c(self) -> float:
        if self.shunt_resistance is not None:
            return 2 * E_CHARGE * self.critical_current * self.shunt_resistance / HBAR
        return self.omega_p * math.sqrt(self.beta_c)


@dataclass(frozen=True)
class DimensionlessParams:
    """The reduced problem: damping, classicality, temperature, bath cutoff.

    ``q = E_J / hbar omega_p`` and ``theta = k_B T / hbar omega_p``.
    ``mu_initial=None`` means "read it off the waveform".
    """

    beta_c: float
    q: float
    theta: float = 0.0
    omega_cut: float = 50.0
    mu_initial: Optional[float] = None

    def __post_init__(self):
        if not self.beta_c > 0:
            raise ConfigurationError("beta_c must be positive")
        if not self.q > 0:
            raise ConfigurationError("q must be positive")
        if not self.theta >= 0 or not math.isfinite(self.theta):
            raise ConfigurationError("theta must be finite and non-negative")
        if not self.omega_cut >= 10:
            raise ConfigurationError("omega_cut must be at least 10")
        if self.omega_cut < 50:
            warnings.warn(f"omega_cut={self.omega_cut} is below the recommended 50",
                          RegimeWarning, stacklevel=3)
        # values above 1 only arise from the source-inductance shift
        if self.mu_initial is not None and not 0 < self.mu_initial < math.inf:
            raise ConfigurationError("mu_initial must be positive")

    @property
    def damping(self) -> float:
        """Damping coefficient of the scaled equation of motion, 1/sqrt(beta_c)."""
        return 1.0 / math.sqrt(self.beta_c)

    def regime_warnings(self) -> list[str]:
        out = []
        if 1.0 / self.q > REGIME_RATIO:
            out.append(f"I_Q/I_c = 1/q = {1 / self.q:.3g} is not small")
        if self.theta / self.q > REGIME_RATIO:
            out.append(f"I_T/I_c = theta/q = {self.theta / self.q:.3g} is not small")
        return out

    def with_waveform(self, waveform: "Waveform", rtol: float = 1e-9):
        mu0 = waveform.mu_initial
        upper = math.inf if waveform.offset else 1.0 + rtol
        if self.mu_initial is None:
            if not 0 < mu0 <= upper:
                raise IngestionError(f"waveform starts at mu={mu0:g}, outside (0, 1]")
            return replace(self, mu_initial=mu0 if waveform.offset else min(mu0, 1.0))
        if abs(mu0 - self.mu_initial) > rtol * max(1.0, abs(mu0)):
            raise IngestionError(
                f"mu_initial={self.mu_initial:g} disagrees with waveform mu(0)={mu0:g}")
        return self


def to_dimensionless(p: PhysicalParams) -> DimensionlessParams:
    wp = p.omega_p
    beta_c = p.beta_c if p.beta_c is not None else (p.omega_c / wp) ** 2
    return DimensionlessParams(
        beta_c=beta_c,
        q=p.critical_current / (2 * E_CHARGE * wp),
        theta=K_B * p.temperature / (HBAR * wp),
        omega_cut=p.cutoff_multiplier,
    )


# --------------------------------------------------------------------------
# waveforms


@dataclass(frozen=True)
class Waveform:
    """Base for drive curvature functions mu(t) on [0, t_end].

    ``offset`` is a constant added to mu (used by the source-inductance
    correction); physical waveforms have offset 0.
    """

    t_end: float
    offset: float = field(default=0.0, kw_only=True)

    kind = "abstract"

    def _base(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self._base(t) + self.offset

    @property
    def mu_initial(self) -> float:
        return float(self(0.0))

    @property
    def mu_final(self) -> float:
        return float(self(self.t_end))

    @property
    def has_instability(self) -> bool:
        return self.mu_final < 0

    @property
    def discontinuities(self) -> tuple:
        return ()

    def nodal_values(self, t: np.ndarray) -> np.ndarray:
        """mu on grid nodes; at a jump the two one-sided limits are averaged."""
        mu = self(t)
        for tj in self.discontinuities:
            idx = np.flatnonzero(np.isclose(t, tj, rtol=0, atol=1e-9 * max(1.0, self.t_end)))
            if idx.size:
                mu[idx] = 0.5 * (self._left(tj) + self._right(tj)) + self.offset
        return mu

    def shifted(self, dt: float, t_end: Optional[float] = None) -> "Waveform":
        raise NotImplementedError


@dataclass(frozen=True)
class StepWaveform(Waveform):
    """Instantaneous jump from ``mu_i`` to ``mu_f`` at ``t_inv``.

    mu(t_inv) takes the final value; ``nodal_values`` averages at the jump.
    """

    t_inv: float = 10.0
    mu_i: float = 1.0
    mu_f: float = -1.0

    kind = "instantaneous_step"

    def __post_init__(self):
        if not 0 < self.t_inv < self.t_end:
            raise ConfigurationError("step time must lie strictly inside (0, t_end)")

    def _base(self, t):
        return np.where(t < self.t_inv, self.mu_i, self.mu_f)

    def _left(self, t):
        return self.mu_i

    def _right(self, t):
        return self.mu_f

    @property
    def discontinuities(self):
        return (self.t_inv,)

    def shifted(self, dt, t_end=None):
        return replace(self, t_inv=self.t_inv + dt,
                       t_end=self.t_end + dt if t_end is None else t_end)


@dataclass(frozen=True)
class TanhWaveform(Waveform):
    """Smooth ramp mu(t) = m - d * tanh((t - t_center) / width)."""

    t_center: float = 10.0
    width: float = 1.0
    mu_i: float = 1.0
    mu_f: float = -1.0

    kind = "tanh_ramp"

    def __post_init__(self):
        if not self.width > 0:
            raise ConfigurationError("ramp width must be positive")

    def _base(self, t):
        mid = 0.5 * (self.mu_i + self.mu_f)
        half = 0.5 * (self.mu_i - self.mu_f)
        return mid - half * np.tanh((t - self.t_center) / self.width)

    def shifted(self, dt, t_end=None):
        return replace(self, t_center=self.t_center + dt,
                       t_end=self.t_end + dt if t_end is None else t_end)


@dataclass(frozen=True)
class TableWaveform(Waveform):
    """Piecewise-linear mu through sampled points; end values held outside."""

    times: tuple = ()
    values: tuple = ()

    kind = "piecewise_linear_table"

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size < 2:
            raise IngestionError("table needs at least two (t, mu) samples")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise IngestionError("table contains non-finite values")
        if np.any(np.diff(t) <= 0):
            raise IngestionError("table times must be strictly increasing")

    @classmethod
    def from_arrays(cls, times, values, t_end=None, offset=0.0):
        times = tuple(float(x) for x in times)
        values = tuple(float(x) for x in values)
        if t_end is None:
            t_end = times[-1] if times else 0.0
        return cls(t_end=t_end, times=times, values=values, offset=offset)

    def _base(self, t):
        return np.interp(t, self.times, self.values)

    def shifted(self, dt, t_end=None):
        times = (0.0,) + tuple(x + dt for x in self.times)
        values = (self.values[0],) + self.values
        if dt == 0:
            times, values = self.times, self.values
        return replace(self, times=times, values=values,
                       t_end=self.t_end + dt if t_end is None else t_end)


def phase_to_mu(phi_e):
    """Curvature of the linearized comparator potential for external phase phi_e."""
    return np.cos(np.asarray(phi_e, dtype=float) / 2)


def waveform_eval(w: Waveform, t):
    t_arr = np.asarray(t, dtype=float)
    tol = 1e-12 * max(1.0, w.t_end)
    if np.any(t_arr < -tol) or np.any(t_arr > w.t_end + tol):
        raise DomainError(f"t outside [0, {w.t_end:g}]")
    out = w(t_arr)
    return float(out) if out.ndim == 0 else out


def load_waveform_table(source, column_kind: Optional[str] = None,
                        t_end: Optional[float] = None) -> TableWaveform:
    """Read a ``t,mu`` or ``t,phi_e`` CSV table.

    ``source`` may be a path, a text/bytes stream, or raw bytes.  When
    ``column_kind`` is None it is taken from the header.  Phase columns are
    mapped through cos(phi_e / 2) at load time.
    """
    text = _read_text(source)
    rows = []
    header = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = next(csv.reader([stripped]))
        if header is None:
            header = [f.strip().lower() for f in fields]
            if len(header) != 2 or header[0] != "t" or header[1] not in ("mu", "phi_e"):
                raise IngestionError(f"expected header 't,mu' or 't,phi_e', got {stripped!r}",
                                     row=lineno)
            continue
        if len(fields) != 2:
            raise IngestionError("expected two columns", row=lineno)
        try:
            t_val, y_val = float(fields[0]), float(fields[1])
        except ValueError:
            raise IngestionError(f"unparseable number in {stripped!r}", row=lineno) from None
        if not (math.isfinite(t_val) and math.isfinite(y_val)):
            raise IngestionError("non-finite value", row=lineno)
        if rows and t_val <= rows[-1][1]:
            raise IngestionError("time is not strictly increasing", row=lineno)
        rows.append((lineno, t_val, y_val))

    if header is None:
        raise IngestionError("empty table")
    kind = column_kind or header[1]
    if kind not in ("mu", "phi_e"):
        raise ConfigurationError(f"unknown column kind {kind!r}")
    if kind != header[1]:
        raise IngestionError(f"header column {header[1]!r} does not match {kind!r}", row=None)
    if len(rows) < 2:
        raise IngestionError(f"need at least 2 data rows, got {len(rows)}")
    if rows[0][1] != 0.0:
        raise IngestionError("table must start at t = 0", row=rows[0][0])

    times = [r[1] for r in rows]
    values = [r[2] for r in rows]
    if kind == "phi_e":
        values = phase_to_mu(values).tolist()
    if not values[0] > 0:
        raise IngestionError(f"mu(0) = {values[0]:g} is not positive", row=rows[0][0])
    if not values[-1] < 0:
        raise IngestionError("waveform never inverts the potential curvature (mu_f >= 0)",
                             row=rows[-1][0])
    return TableWaveform.from_arrays(times, values, t_end=t_end)


def _read_text(source) -> str:
    if isinstance(source, (bytes, bytearray)):
        return bytes(source).decode("utf-8")
    if hasattr(source, "read"):
        data = source.read()
        return data.decode("utf-8") if isinstance(data, bytes) else data
    with open(source, "r", encoding="utf-8") as fh:
        return fh.read()


def inversion_time(w: Waveform, rtol: float = 1e-10) -> float:
    """First zero crossing of mu(t), by bracketing on a fine scan then bisection."""
    if w.mu_initial <= 0:
        raise DomainError("mu(0) must be positive")
    for tj in w.discontinuities:
        lo_val = w._left(tj) + w.offset
        hi_val = w._right(tj) + w.offset
        # the jump is the crossing if mu is positive up to it
        if lo_val > 0 >= hi_val and _positive_on(w, 0.0, tj):
            return float(tj)
    scan = np.linspace(0.0, w.t_end, 4097)
    if isinstance(w, TableWaveform):
        scan = np.union1d(scan, np.clip(w.times, 0.0, w.t_end))
    vals = w(scan)
    hits = np.flatnonzero(vals <= 0)
    if hits.size == 0:
        raise DomainError("mu(t) never changes sign on [0, t_end]")
    k = hits[0]
    if vals[k] == 0:
        return float(scan[k])
    lo, hi = scan[k - 1], scan[k]
    tol = rtol * w.t_end
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if w(mid) > 0:
            lo = mid
        else:
            hi = mid
    return float(0.5 * (lo + hi))


def _positive_on(w, a, b):
    s = np.linspace(a, b, 257)[:-1]
    return bool(np.all(w(s) > 0))


def renormalize_inductance(w: Waveform, lam: Optional[float]) -> Waveform:
    """Shift mu by 1/(2*lam) for a signal source with inductance lam = 2 pi L I_c / Phi_0.

    ``lam=None`` or ``inf`` is an ideal current source (no shift).  Check
    ``has_instability`` on the result before using it.
    """
    if lam is None or math.isinf(lam):
        return w
    if not lam > 0:
        raise DomainError("source inductance lambda must be positive")
    return replace(w, offset=w.offset + 1.0 / (2.0 * lam))


def bandwidth_time(beta_c: float) -> float:
    """Reciprocal oscillator bandwidth in plasma units, max(sqrt(beta_c), 2/sqrt(beta_c))."""
    s = math.sqrt(beta_c)
    return max(s, 2.0 / s)


def default_duration(beta_c: float, margin: float = 10.0) -> tuple[float, float]:
    """(t_inv, t_end) with ``margin`` bandwidth times on both sides of the inversion."""
    t_inv = margin * bandwidth_time(beta_c)
    return t_inv, 2 * t_inv


def check_duration(w: Waveform, beta_c: float, margin: float = 10.0) -> bool:
    t_inv = inversion_time(w)
    need = margin * bandwidth_time(beta_c)
    ok = t_inv >= need and (w.t_end - t_inv) >= need
    if not ok:
        warnings.warn(
            f"inversion at t={t_inv:.3g}, run ends at {w.t_end:.3g}; both margins should "
            f"exceed {need:.3g} for an initial-state independent result",
            PlateauWarning, stacklevel=2)
    return ok


def step(t_end: float, t_inv: Optional[float] = None, mu_i: float = 1.0,
         mu_f: Optional[float] = None) -> StepWaveform:
    if t_inv is None:
        t_inv = 0.5 * t_end
    return StepWaveform(t_end=t_end, t_inv=t_inv, mu_i=mu_i,
                        mu_f=-mu_i if mu_f is None else mu_f)


def tanh_ramp(t_end: float, t_center: Optional[float] = None, width: float = 1.0,
              mu_i: float = 1.0, mu_f: Optional[float] = None) -> TanhWaveform:
    if t_center is None:
        t_center = 0.5 * t_end
    return TanhWaveform(t_end=t_end, t_center=t_center, width=width, mu_i=mu_i,
                        mu_f=-mu_i if mu_f is None else mu_f)


def table(times: Sequence[float], mu: Sequence[float], t_end=None) -> TableWaveform:
    return TableWaveform.from_arrays(times, mu, t_end=t_end)
