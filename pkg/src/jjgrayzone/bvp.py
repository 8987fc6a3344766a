"""Extremal-path basis functions from global (relaxation-type) BVP solves.

The five functions live on a uniform grid over [0, t_end]:

* ``a1, a2``: u'' + g u' + mu u = 0, data (1, 0) and (0, 1)
* ``a``: u'' + g u' + mu u = 1, data (0, 0)
* ``b1, b2``: u'' - g u' + mu u = 0, data (1, 0) and (0, 1)

with ``g = 1/sqrt(beta_c)``.  Shooting is hopeless here because the
solutions are exponential near both ends, so each problem is posed as one
tridiagonal system over all nodes and solved directly.  For a linear ODE
the relaxation (Newton) iteration converges in that single step.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg.lapack import dgttrf, dgttrs

from .errors import ConfigurationError, SingularSystemError
from .model import Waveform

log = logging.getLogger(__name__)

SCHEMES = ("fitted", "central")


class ResolutionWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Grid:
    t_end: float
    n_steps: int

    def __post_init__(self):
        if self.n_steps < 100:
            raise ConfigurationError("grid needs at least 100 steps")
        if not self.t_end > 0:
            raise ConfigurationError("t_end must be positive")

    @property
    def h(self) -> float:
        return self.t_end / self.n_steps

    @property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_steps + 1)

    def check_resolution(self, beta_c: float) -> bool:
        ok = self.h * max(1.0, 1.0 / math.sqrt(beta_c)) <= 0.1
        if not ok:
            warnings.warn(f"step h={self.h:.3g} is coarse for beta_c={beta_c:g}",
                          ResolutionWarning, stacklevel=2)
        return ok


def default_step(beta_c: float) -> float:
    return min(0.01, 0.05 * math.sqrt(beta_c))


def default_grid(w: Waveform, beta_c: float, h: Optional[float] = None) -> Grid:
    """Uniform grid with step close to ``h``, placing any mu jump exactly on a node."""
    h = default_step(beta_c) if h is None else h
    n = max(100, int(math.ceil(w.t_end / h)))
    for tj in w.discontinuities:
        # smallest n >= n for which tj/h_n is an integer (rational jump positions only)
        frac = tj / w.t_end
        for m in range(n, n + 100000):
            if abs(frac * m - round(frac * m)) < 1e-9:
                n = m
                break
    return Grid(w.t_end, n)


@dataclass(frozen=True)
class BvpSolution:
    grid: Grid
    beta_c: float
    mu: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    a: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    da1: np.ndarray
    da2: np.ndarray
    da: np.ndarray
    db1: np.ndarray
    db2: np.ndarray

    NAMES = ("a1", "a2", "a", "b1", "b2")

    @property
    def t(self) -> np.ndarray:
        return self.grid.t

    def to_csv(self, path_or_buf) -> None:
        cols = ["t", "mu", *self.NAMES, *("d" + n for n in self.NAMES)]
        data = np.column_stack([self.t, self.mu] + [getattr(self, c) for c in cols[2:]])
        np.savetxt(path_or_buf, data, delimiter=",", header=",".join(cols), comments="",
                   fmt="%.17g")


def _stencil(mu, g, h, scheme):
    """Row coefficients at interior nodes in split form.

    Each row reads ``(u[i+1] - 2u[i] + u[i-1]) + c_lo u[i-1] + c_0 u[i]
    + c_up u[i+1] = f * weight``; keeping the O(h) corrections apart from the
    second difference avoids the cancellation in ``2 - mu h^2``.

    ``fitted`` reproduces constant-coefficient solutions exactly: with r1, r2
    the characteristic roots at the node, u[i+1] - (e^{r1 h} + e^{r2 h}) u[i]
    + e^{-g h} u[i-1] = f h^2 E(r1 h) E(r2 h), where E(z) = expm1(z)/z.
    """
    h2 = h * h
    if scheme == "central":
        c_lo = np.full_like(mu, -0.5 * g * h)
        c_up = np.full_like(mu, 0.5 * g * h)
        return c_lo, mu * h2, c_up, np.full_like(mu, h2)
    disc = np.sqrt((0.25 * g * g - mu).astype(complex))
    z1 = (-0.5 * g + disc) * h
    z2 = (-0.5 * g - disc) * h
    c_0 = -(np.expm1(z1) + np.expm1(z2)).real
    c_lo = np.full_like(mu, math.expm1(-g * h))
    weight = h2 * (_expm1_over(z1) * _expm1_over(z2)).real
    return c_lo, c_0, np.zeros_like(mu), weight


def _expm1_over(z):
    small = np.abs(z) < 1e-8
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 + 0.5 * z, np.expm1(safe) / safe)


def _row_terms(u, c_lo, c_0, c_up, dtype=float):
    u = u.astype(dtype)
    lower, centre, upper = u[:-2], u[1:-1], u[2:]
    second = (upper - centre) - (centre - lower)
    return second, c_lo.astype(dtype) * lower, c_0.astype(dtype) * centre, \
        c_up.astype(dtype) * upper


def solve_linear_bvp(w, grid: Grid, beta_c: float, damping_sign: int, rhs: float,
                     left_bc: float, right_bc: float, scheme: str = "fitted",
                     mu: Optional[np.ndarray] = None) -> np.ndarray:
    """Solve u'' + s*g*u' + mu(t) u = rhs on the grid with Dirichlet data.

    ``w`` may be None when nodal ``mu`` is passed directly.  Endpoint values
    of the result are the boundary data verbatim.  ``damping_sign=0`` drops the
    first-derivative term.
    """
    out = solve_bvp_columns(w, grid, beta_c, damping_sign,
                            [(rhs, left_bc, right_bc)], scheme=scheme, mu=mu)
    return out[:, 0]


def solve_bvp_columns(w, grid, beta_c, damping_sign, problems, scheme="fitted", mu=None,
                      refine=2):
    """Several (rhs, left, right) problems sharing one operator; returns (n+1, k).

    The direct solve is followed by ``refine`` rounds of iterative refinement
    with residuals accumulated in extended precision.
    """
    if scheme not in SCHEMES:
        raise ConfigurationError(f"unknown scheme {scheme!r}")
    if damping_sign not in (-1, 0, 1):
        raise ConfigurationError("damping_sign must be -1, 0 or +1")
    if mu is None:
        if abs(w.t_end - grid.t_end) > 1e-12 * w.t_end:
            raise ConfigurationError("grid does not span the waveform interval")
        mu = w.nodal_values(grid.t)
    g = damping_sign / math.sqrt(beta_c)
    c_lo, c_0, c_up, weight = _stencil(np.asarray(mu[1:-1], dtype=float), g, grid.h, scheme)
    lo = 1.0 + c_lo
    up = 1.0 + c_up
    diag = c_0 - 2.0
    lu = _factor(lo[1:], diag, up[:-1])

    u = np.empty((grid.n_steps + 1, len(problems)))
    f = np.empty((grid.n_steps - 1, len(problems)))
    for k, (rhs, left, right) in enumerate(problems):
        u[0, k] = left
        u[-1, k] = right
        f[:, k] = rhs * weight
    b = f.copy()
    b[0] -= lo[0] * u[0]
    b[-1] -= up[-1] * u[-1]
    u[1:-1] = _lu_solve(lu, b)
    for _ in range(refine):
        res = sum(_row_terms(u, c_lo[:, None], c_0[:, None], c_up[:, None], np.longdouble))
        res = (f.astype(np.longdouble) - res).astype(float)
        u[1:-1] += _lu_solve(lu, res)
    return u


def _factor(sub, diag, sup):
    lu = dgttrf(sub, diag, sup)
    info = lu[-1]
    if info > 0:
        raise SingularSystemError(
            f"tridiagonal system singular at pivot {info}; perturb n_steps by one",
            pivot=int(info))
    return lu


def _lu_solve(lu, b):
    dl, d, du, du2, ipiv, _ = lu
    x, info = dgttrs(dl, d, du, du2, ipiv, b)
    if info != 0:
        raise SingularSystemError(f"dgttrs failed with info={info}")
    return x


def derivative(u: np.ndarray, h: float, jumps=()) -> np.ndarray:
    """Second-order central differences, one-sided second-order at the ends.

    At nodes listed in ``jumps`` (where mu, hence u'', is discontinuous) the
    left and right one-sided formulas are averaged instead.
    """
    du = np.gradient(u, h, edge_order=2)
    for i in jumps:
        if 2 <= i <= len(u) - 3:
            left = (3 * u[i] - 4 * u[i - 1] + u[i - 2]) / (2 * h)
            right = (-3 * u[i] + 4 * u[i + 1] - u[i + 2]) / (2 * h)
            du[i] = 0.5 * (left + right)
    return du


def _jump_nodes(w, grid):
    out = []
    for tj in w.discontinuities:
        i = int(round(tj / grid.h))
        if abs(i * grid.h - tj) < 1e-9 * max(1.0, grid.t_end):
            out.append(i)
    return out


def residual(u, mu, beta_c, damping_sign, rhs, h, scheme="fitted", resolved_only=True):
    """Discrete residual at interior nodes, relative to the largest term of each row.

    With ``resolved_only`` rows whose terms all lie below eps * max|term|
    are reported as zero: basis functions span hundreds of decades, and a
    value that small is below the resolution of the solution in double
    precision, so its own equation cannot be enforced.
    """
    g = damping_sign / math.sqrt(beta_c)
    c_lo, c_0, c_up, weight = _stencil(np.asarray(mu[1:-1], float), g, h, scheme)
    lower, centre, upper = u[:-2], u[1:-1], u[2:]
    terms = np.stack([lower * (1 + c_lo), centre * (c_0 - 2), upper * (1 + c_up),
                      rhs * weight])
    res = sum(_row_terms(np.asarray(u, float), c_lo, c_0, c_up, np.longdouble))
    res = (res - rhs * weight).astype(float)
    scale = np.abs(terms).max(axis=0)
    out = res / np.where(scale == 0, 1.0, scale)
    if resolved_only:
        out[scale <= np.finfo(float).eps * scale.max()] = 0.0
    return out


def solve_all(w: Waveform, grid: Grid, beta_c: float, scheme: str = "fitted",
              retry: bool = True) -> BvpSolution:
    """All five basis functions and their derivatives on ``grid``."""
    try:
        mu = w.nodal_values(grid.t)
        fwd = solve_bvp_columns(None, grid, beta_c, +1,
                                [(0.0, 1.0, 0.0), (0.0, 0.0, 1.0), (1.0, 0.0, 0.0)],
                                scheme=scheme, mu=mu)
        rev = solve_bvp_columns(None, grid, beta_c, -1,
                                [(0.0, 1.0, 0.0), (0.0, 0.0, 1.0)], scheme=scheme, mu=mu)
    except SingularSystemError as exc:
        if not retry or w.discontinuities:
            raise
        log.warning("%s; retrying with n_steps=%d", exc, grid.n_steps + 1)
        return solve_all(w, Grid(grid.t_end, grid.n_steps + 1), beta_c, scheme, retry=False)
    h = grid.h
    cols = dict(a1=fwd[:, 0], a2=fwd[:, 1], a=fwd[:, 2], b1=rev[:, 0], b2=rev[:, 1])
    jumps = _jump_nodes(w, grid)
    derivs = {"d" + k: derivative(v, h, jumps) for k, v in cols.items()}
    return BvpSolution(grid=grid, beta_c=beta_c, mu=mu, **cols, **derivs)
