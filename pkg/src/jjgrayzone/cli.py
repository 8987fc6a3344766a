"""Batch front-end: single points, parameter sweeps, probability curves.

Configuration is a JSON object, e.g.::

    {"params": {"beta_c": 1, "q": 500, "theta": 0},
     "waveform": {"kind": "instantaneous_step"},
     "sweep": {"axis": "theta", "values": [3, 10, 30]},
     "method": "quadrature"}

``params`` may be replaced by ``physical`` (PhysicalParams fields, plus the
convenience key ``inverse_plasma_frequency`` in seconds).  Waveforms without
``t_end`` get the default duration for the current beta_c, with the
inversion centered.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import sys
import traceback
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.constants import e as E_CHARGE, k as K_B

from . import model
from .errors import ConfigurationError, DomainError, GrayZoneError, IngestionError
from .grayzone import (check_plateau, evaluate, initial_thermal_state, plateau_series,
                       switching_probability)
from .vegas import McConfig

log = logging.getLogger("jjgrayzone")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
AXES = ("temperature", "theta", "beta_c", "duration", "lambda")
CSV_HEADER = ["axis", "value", "delta_ix_over_ic", "delta_ix_amperes", "err", "plateau_ok",
              "C", "Q1", "K1", "status"]
METHOD_ALIASES = {"quadrature": "quadrature", "mc": "monte_carlo",
                  "monte_carlo": "monte_carlo"}
REMEDIES = {
    "model": "check the parameter block and the waveform definition",
    "bvp": "change the grid step or perturb n_steps",
    "coeffs": "raise the quadrature panel limit or the Monte Carlo budget",
    "vegas": "raise the Monte Carlo budget",
    "grayzone": "lengthen the run or check that the waveform inverts the potential",
    "cli": "check the configuration file",
}


# --------------------------------------------------------------------------
# Ic(T)


def bcs_gap(t, tc, delta0):
    """Interpolated BCS gap, delta0 * tanh(1.74 sqrt(Tc/T - 1))."""
    if t >= tc:
        raise DomainError(f"T={t:g} K is not below Tc={tc:g} K")
    if t <= 0:
        return delta0
    return delta0 * math.tanh(1.74 * math.sqrt(tc / t - 1.0))


def _ab_product(t, tc, delta0):
    # Ic R (up to the constant pi / 2e)
    gap = bcs_gap(t, tc, delta0)
    if t <= 0:
        return gap
    return gap * math.tanh(gap / (2.0 * K_B * t))


def ic_of_temperature(ic_model: Optional[dict], t: float) -> float:
    """Ic(T) / Ic(T_ref); ``{"kind": "constant"}`` (or None) gives 1.

    Ambegaokar-Baratoff: ``{"kind": "ambegaokar_baratoff", "tc": K,
    "delta0": J (default 1.764 k_B Tc), "t_ref": K (default 4.2)}``.
    """
    if ic_model is None or ic_model.get("kind", "constant") == "constant":
        return 1.0
    if ic_model["kind"] != "ambegaokar_baratoff":
        raise ConfigurationError(f"unknown Ic(T) model {ic_model['kind']!r}")
    tc = float(ic_model["tc"])
    delta0 = float(ic_model.get("delta0", 1.764 * K_B * tc))
    t_ref = float(ic_model.get("t_ref", 4.2))
    if t < 0:
        raise DomainError("temperature must be non-negative")
    return _ab_product(t, tc, delta0) / _ab_product(t_ref, tc, delta0)


# --------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    params: Optional[dict] = None
    physical: Optional[dict] = None
    waveform: dict = field(default_factory=lambda: {"kind": "instantaneous_step"})
    lam: Optional[float] = None
    sweep: Optional[dict] = None
    method: str = "quadrature"
    variant: str = "asymptotic_eq14"
    mc: dict = field(default_factory=dict)
    step: Optional[float] = None
    plateau_check: bool = True
    ic_temperature_model: Optional[dict] = None
    workers: int = 1
    ix_values: Optional[list] = None
    output: dict = field(default_factory=dict)
    base_dir: str = "."

    def __post_init__(self):
        if (self.params is None) == (self.physical is None):
            raise ConfigurationError("give exactly one of 'params' and 'physical'")
        self.method = METHOD_ALIASES.get(self.method, self.method)
        if self.method not in ("quadrature", "monte_carlo"):
            raise ConfigurationError(f"unknown method {self.method!r}")
        if self.sweep is not None:
            axis = self.sweep.get("axis")
            if axis not in AXES:
                raise ConfigurationError(f"sweep axis must be one of {AXES}, got {axis!r}")
            vals = sweep_values(self.sweep)
            if not vals or not all(math.isfinite(v) for v in vals):
                raise ConfigurationError("sweep values must be a nonempty list of finite numbers")
            if axis == "temperature" and self.physical is None:
                raise ConfigurationError("temperature sweeps need a 'physical' block; "
                                         "use axis 'theta' for dimensionless runs")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")

    @classmethod
    def from_dict(cls, d: dict, base_dir: str = ".") -> "RunConfig":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigurationError(f"unknown configuration keys: {sorted(unknown)}")
        d.setdefault("base_dir", base_dir)
        return cls(**d)

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            d = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read configuration {path}: {exc}") from exc
        return cls.from_dict(d, base_dir=str(path.parent))

    def mc_config(self) -> McConfig:
        try:
            return McConfig(**self.mc)
        except TypeError as exc:
            raise ConfigurationError(f"bad Monte Carlo settings: {exc}") from exc


def sweep_values(sweep: dict) -> list:
    if "values" in sweep:
        vals = [float(v) for v in sweep["values"]]
    elif {"start", "stop", "num"} <= set(sweep):
        make = np.geomspace if sweep.get("log") else np.linspace
        vals = make(float(sweep["start"]), float(sweep["stop"]), int(sweep["num"])).tolist()
    else:
        raise ConfigurationError("sweep needs 'values' or 'start', 'stop', 'num'")
    return sorted(vals)


def _physical(cfg: RunConfig, temperature=None) -> model.PhysicalParams:
    d = dict(cfg.physical)
    inv = d.pop("inverse_plasma_frequency", None)
    if inv is not None:
        d["plasma_frequency"] = 1.0 / float(inv)
    if temperature is not None:
        d["temperature"] = temperature
        # q (and omega_p when a capacitance is given) follow Ic(T)
        d["critical_current"] = float(d.get("critical_current", 0.0)) * ic_of_temperature(
            cfg.ic_temperature_model, temperature)
    try:
        return model.PhysicalParams(**d)
    except TypeError as exc:
        raise ConfigurationError(f"bad physical parameter block: {exc}") from exc


def build_params(cfg: RunConfig, axis=None, value=None) -> model.DimensionlessParams:
    if cfg.physical is not None:
        p = model.to_dimensionless(_physical(cfg, value if axis == "temperature" else None))
    else:
        try:
            p = model.DimensionlessParams(**cfg.params)
        except TypeError as exc:
            raise ConfigurationError(f"bad parameter block: {exc}") from exc
    if axis == "theta":
        p = replace(p, theta=value)
    elif axis == "beta_c":
        p = replace(p, beta_c=value)
    return p


def build_waveform(cfg: RunConfig, beta_c: float, axis=None, value=None) -> model.Waveform:
    spec = dict(cfg.waveform)
    kind = spec.pop("kind", "instantaneous_step")
    if kind == "piecewise_linear_table":
        path = Path(cfg.base_dir) / spec.pop("path")
        w = model.load_waveform_table(path.read_bytes(), spec.pop("column_kind", None),
                                      t_end=spec.pop("t_end", None))
    else:
        t_end = spec.pop("t_end", None)
        if axis == "duration":
            t_end = value
        if t_end is None:
            t_end = model.default_duration(beta_c)[1]
        if kind == "instantaneous_step":
            w = model.step(t_end, spec.pop("t_inv", None), **spec)
        elif kind == "tanh_ramp":
            w = model.tanh_ramp(t_end, spec.pop("t_center", None), **spec)
        else:
            raise ConfigurationError(f"unknown waveform kind {kind!r}")
    if kind == "piecewise_linear_table" and axis == "duration":
        from .grayzone import stretch
        w = stretch(w, value / w.t_end)
    lam = value if axis == "lambda" else cfg.lam
    return model.renormalize_inductance(w, lam)


# --------------------------------------------------------------------------
# runs


@dataclass
class SweepRow:
    axis: str
    value: Optional[float]
    delta_ix_over_ic: float = float("nan")
    delta_ix_amperes: Optional[float] = None
    err: float = 0.0
    plateau_ok: Optional[bool] = None
    C: float = float("nan")
    Q1: float = float("nan")
    K1: float = float("nan")
    status: str = "ok"

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def _point(cfg: RunConfig, axis=None, value=None, dump_bvp=None):
    p = build_params(cfg, axis, value)
    w = build_waveform(cfg, p.beta_c, axis, value)
    kw = dict(method=cfg.method, variant=cfg.variant, h=cfg.step,
              mc_config=cfg.mc_config() if cfg.method == "monte_carlo" else None)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", model.PlateauWarning)
        ev = evaluate(w, p, **kw)
    if dump_bvp:
        ev.solution.to_csv(dump_bvp)
    return ev, w, p, kw


def run_single(cfg: RunConfig, axis=None, value=None, dump_bvp=None) -> SweepRow:
    """One configuration through model -> bvp -> coeffs -> grayzone."""
    ev, w, p, kw = _point(cfg, axis, value, dump_bvp)
    res = ev.result
    plateau = None
    if cfg.plateau_check:
        series = [(w.t_end, res.delta_ix_over_ic)]
        series += plateau_series(w, p, factors=(2.0, 4.0), **kw)
        plateau = check_plateau(series).ok
    amps = None
    if cfg.physical is not None:
        ic = _physical(cfg, value if axis == "temperature" else None).critical_current
        amps = res.delta_ix_over_ic * ic
    return SweepRow(axis or "none", value, res.delta_ix_over_ic, amps, res.error, plateau,
                    res.C, res.Q1, res.K1, "ok")


def _row_or_failure(cfg, axis, value):
    try:
        return run_single(cfg, axis, value)
    except GrayZoneError as exc:
        return SweepRow(axis, value, status=f"error: {describe(exc)}")


def run_sweep(cfg: RunConfig) -> list:
    """One row per sweep value, ordered by value; failing rows carry a status message."""
    if cfg.sweep is None:
        raise ConfigurationError("configuration has no sweep block")
    axis = cfg.sweep["axis"]
    values = sweep_values(cfg.sweep)
    if len(values) < 2:
        raise ConfigurationError("a sweep needs at least two values")
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            return list(pool.map(lambda v: _row_or_failure(cfg, axis, v), values))
    return [_row_or_failure(cfg, axis, v) for v in values]


def probability_curve(cfg: RunConfig, ix_values) -> list:
    """[(Ix/Ic, p)] for the full-form width of a single configuration."""
    ev, _, _, _ = _point(cfg)
    s = initial_thermal_state(ev.params)
    x = np.asarray(ix_values, dtype=float)
    p = np.atleast_1d(switching_probability(ev.coeffs, s, ev.params, x))
    return list(zip(x.tolist(), p.tolist()))


def waveform_info(cfg: RunConfig) -> dict:
    p = build_params(cfg)
    w = build_waveform(cfg, p.beta_c)
    info = {"kind": w.kind, "t_end": w.t_end, "mu_initial": w.mu_initial,
            "mu_final": w.mu_final, "has_instability": w.has_instability,
            "bandwidth_time": model.bandwidth_time(p.beta_c)}
    if w.has_instability:
        info["t_inv"] = model.inversion_time(w)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", model.PlateauWarning)
            info["duration_ok"] = model.check_duration(w, p.beta_c)
    return info


# --------------------------------------------------------------------------
# output


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(CSV_HEADER)
    for r in rows:
        d = r.as_dict()
        wr.writerow([_fmt(d[k]) for k in CSV_HEADER])
    return buf.getvalue()


def rows_to_json(rows) -> str:
    return json.dumps([r.as_dict() for r in rows], indent=1)


def rows_from_json(text: str) -> list:
    return [SweepRow(**d) for d in json.loads(text)]


def _emit(text: str, out: Optional[str]):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def describe(exc: BaseException) -> str:
    """Message prefixed with the package module that raised it, plus a remedy hint."""
    where = "cli"
    for frame in traceback.extract_tb(exc.__traceback__):
        stem = Path(frame.filename).stem
        if "jjgrayzone" in frame.filename and stem in REMEDIES:
            where = stem
    return f"[{where}] {exc} (hint: {REMEDIES[where]})"


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="jjgrayzone",
                                 description="Gray-zone width of a Josephson comparator")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run configuration")
    common.add_argument("--method", choices=["quadrature", "mc"],
                        help="noise integration method (overrides the config)")
    common.add_argument("--seed", type=int, help="Monte Carlo seed")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--format", choices=["csv", "json"], help="output format")
    common.add_argument("--dump-bvp", metavar="PATH", help="write the basis functions as CSV")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("gray-zone", parents=[common], help="single configuration")
    sub.add_parser("sweep", parents=[common], help="sweep one axis")
    pc = sub.add_parser("prob-curve", parents=[common], help="switching probability vs Ix")
    pc.add_argument("--ix", help="start:stop:num grid of Ix/Ic (default from config)")
    sub.add_parser("waveform-info", parents=[common], help="describe the drive waveform")
    return ap


def _load(args) -> RunConfig:
    cfg = RunConfig.load(args.config)
    if args.method:
        cfg.method = METHOD_ALIASES[args.method]
    if args.seed is not None:
        cfg.mc = {**cfg.mc, "rng_seed": args.seed}
    return cfg


def _ix_grid(args, cfg, width):
    if getattr(args, "ix", None):
        try:
            a, b, n = args.ix.split(":")
            return np.linspace(float(a), float(b), int(n)).tolist()
        except ValueError as exc:
            raise ConfigurationError("--ix expects start:stop:num") from exc
    if cfg.ix_values:
        return [float(v) for v in cfg.ix_values]
    return np.linspace(-3 * width, 3 * width, 61).tolist()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
        fmt = args.format or cfg.output.get("format", "csv")
        out = args.out or cfg.output.get("path")
        if args.command == "waveform-info":
            info = waveform_info(cfg)
            if fmt == "json":
                text = json.dumps(info, indent=1)
            else:
                text = "".join(f"{k},{_fmt(v)}\n" for k, v in info.items())
            _emit(text, out)
            return EXIT_OK
        if args.command == "gray-zone":
            rows = [run_single(cfg, dump_bvp=args.dump_bvp)]
        elif args.command == "sweep":
            rows = run_sweep(cfg)
        else:
            ev, _, _, _ = _point(cfg, dump_bvp=args.dump_bvp)
            width = ev.result.delta_ix_over_ic
            curve = probability_curve(cfg, _ix_grid(args, cfg, width))
            if fmt == "json":
                text = json.dumps([{"ix_over_ic": x, "p": p} for x, p in curve], indent=1)
            else:
                text = "ix_over_ic,p\n" + "".join(f"{x!r},{p!r}\n" for x, p in curve)
            _emit(text, out)
            return EXIT_OK
    except (ConfigurationError, IngestionError, DomainError) as exc:
        print(f"error: {describe(exc)}", file=sys.stderr)
        return EXIT_CONFIG
    except GrayZoneError as exc:
        print(f"error: {describe(exc)}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, KeyError) as exc:
        print(f"error: [cli] {exc!r} (hint: {REMEDIES['cli']})", file=sys.stderr)
        return EXIT_CONFIG
    _emit(rows_to_json(rows) if fmt == "json" else rows_to_csv(rows), out)
    for r in rows:
        if r.status != "ok":
            print(f"warning: {r.axis}={r.value}: {r.status}", file=sys.stderr)
    if all(r.status != "ok" for r in rows):
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
