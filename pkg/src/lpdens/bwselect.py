"""Bandwidth selectors: normal-reference rules of thumb and direct plug-in.

The plug-in selectors follow a two-stage recipe. Integrated rule-of-thumb
pilots (computed on the sample's 19-point quantile grid) feed higher-order
local polynomial fits for ``F^(p+1)`` and ``F^(p+2)``; the finite-sample
variance and bias constants are evaluated at the pilot ``h_IROT(nu=1, p=2)``;
the resulting (I)MSE objective is minimized over ``log h`` by golden-section
search.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import hermite_e
from scipy.stats import norm

from .ecdf import Sample, effective_n, quantile_grid
from .kernel import MAX_ORDER, KernelKind, kernel_constants
from .lpfit import SingularFitError, Target, bias_constants, fit_point, influence_matrix

log = logging.getLogger(__name__)

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
DERIV_FLOOR = 0.01
BRACKET = 50.0
SEARCH_TOL = 1e-6


class BwMethod(str, Enum):
    MSE_DPI = "mse-dpi"
    IMSE_DPI = "imse-dpi"
    MSE_ROT = "mse-rot"
    IMSE_ROT = "imse-rot"
    USER = "user"

    @property
    def integrated(self) -> bool:
        return self in (BwMethod.IMSE_DPI, BwMethod.IMSE_ROT)


@dataclass
class BandwidthResult:
    grid: np.ndarray
    h: np.ndarray
    method: BwMethod
    regularized: np.ndarray
    eff_n: np.ndarray
    p: int = 2
    nu: int = 1
    kernel: KernelKind = KernelKind.TRIANGULAR
    notes: list[str] = field(default_factory=list)


def default_minimum(p: int) -> int:
    return 20 + p + 1


# --------------------------------------------------------------------------
# normal reference model


def _normal_fit(s: Sample) -> tuple[float, float]:
    mu = float(np.sum(s.w * s.x) / s.n)
    var = float(np.sum(s.w * (s.x - mu) ** 2) / s.n)
    sigma = math.sqrt(var)
    if not sigma > 0:
        raise ValueError("sample has zero standard deviation")
    return mu, sigma


def normal_cdf_derivative(k: int, x, mu: float, sigma: float):
    """``k``-th derivative (``k >= 1``) of the N(mu, sigma^2) CDF at ``x``."""
    if k < 1:
        raise ValueError("derivative order must be at least 1")
    z = (np.asarray(x, dtype=float) - mu) / sigma
    coef = np.zeros(k)
    coef[-1] = 1.0
    # d^m/dz^m phi(z) = (-1)^m He_m(z) phi(z)
    val = (-1) ** (k - 1) * hermite_e.hermeval(z, coef) * norm.pdf(z) / sigma**k
    return val


def _floored(k: int, x, mu: float, sigma: float) -> np.ndarray:
    d = np.atleast_1d(normal_cdf_derivative(k, x, mu, sigma))
    floor = DERIV_FLOOR * sigma ** (-k)
    return np.where(np.abs(d) < floor, np.copysign(floor, d), d)


def _rot_closed_form(s: Sample, xs: np.ndarray, p: int, nu: int, kernel) -> float:
    if not 0 <= nu <= p:
        raise ValueError(f"derivative order nu={nu} must satisfy 0 <= nu <= p={p}")
    mu, sigma = _normal_fit(s)
    consts = kernel_constants(kernel, p)
    b1, b2 = consts.bias_constants(nu)
    dens = norm.pdf(xs, mu, sigma)
    v = np.sum(dens) * consts.variance_constant(nu)
    if (p - nu) % 2 == 1:
        lead, bconst, gamma = p + 1, b1, 2 * p + 1
    else:
        lead, bconst, gamma = p + 2, b2, 2 * p + 3
    deriv = _floored(lead, xs, mu, sigma)
    bias2 = np.sum((deriv * bconst) ** 2)
    h = ((2 * nu - 1) * v / (2 * (lead - nu) * s.n * bias2)) ** (1.0 / gamma)
    if not (np.isfinite(h) and h > 0):
        raise ValueError(f"rule-of-thumb bandwidth is not positive and finite (got {h})")
    return float(h)


def rot_bandwidth(s: Sample, x: float, p: int = 2, nu: int = 1,
                  kernel: KernelKind | str = KernelKind.TRIANGULAR) -> float:
    """Pointwise MSE-optimal bandwidth under a fitted normal reference."""
    return _rot_closed_form(s, np.atleast_1d(float(x)), p, nu, kernel)


def irot_bandwidth(s: Sample, grid: Sequence[float], p: int = 2, nu: int = 1,
                   kernel: KernelKind | str = KernelKind.TRIANGULAR) -> float:
    """Rule-of-thumb bandwidth minimizing the summed normal-reference MSE."""
    return _rot_closed_form(s, np.atleast_1d(np.asarray(grid, dtype=float)), p, nu, kernel)


# --------------------------------------------------------------------------
# regularization


def _kth_distance(arr: np.ndarray, x: float, k: int) -> float:
    d = np.abs(arr - x)
    if k >= d.size:
        return float(d.max())
    return float(np.partition(d, k - 1)[k - 1])


def regularize_bandwidth(
    s: Sample,
    x: float,
    h: float,
    p: int = 2,
    n_local_min: int | None = None,
    n_unique_min: int | None = None,
    enabled: bool = True,
) -> float:
    """Enlarge ``h`` until ``[x-h, x+h]`` holds the minimum local sample.

    Both the raw count and the count of distinct values are checked. When
    the sample itself is smaller than a minimum, the window is widened to
    cover every observation and a warning is issued.
    """
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    if not enabled:
        return float(h)
    n_local_min = default_minimum(p) if n_local_min is None else int(n_local_min)
    n_unique_min = default_minimum(p) if n_unique_min is None else int(n_unique_min)
    out = float(h)
    if n_local_min > 0 and effective_n(s, x, out) < n_local_min:
        if s.n < n_local_min:
            warnings.warn(f"sample of {s.n} is below the local minimum {n_local_min}",
                          RuntimeWarning, stacklevel=2)
        out = max(out, _kth_distance(s.x, x, n_local_min))
    if n_unique_min > 0 and effective_n(s, x, out, unique=True) < n_unique_min:
        if s.unique_x.size < n_unique_min:
            warnings.warn(f"{s.unique_x.size} distinct values is below the minimum {n_unique_min}",
                          RuntimeWarning, stacklevel=2)
        out = max(out, _kth_distance(s.unique_x, x, n_unique_min))
    return out


# --------------------------------------------------------------------------
# direct plug-in


def golden_section_min(f: Callable[[float], float], a: float, b: float,
                       tol: float = SEARCH_TOL) -> float:
    """Minimize a unimodal ``f`` on ``[a, b]`` to interval width ``tol``."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


@dataclass(frozen=True)
class _Pilots:
    h_c: float
    h_d1: float
    h_d2: float


@dataclass(frozen=True)
class _PointTerms:
    h_c: float
    var_c: float
    d1: float
    d2: float
    b1: float
    b2: float


def _check_dpi_order(p: int, nu: int):
    if not 0 <= nu <= p:
        raise ValueError(f"derivative order nu={nu} must satisfy 0 <= nu <= p={p}")
    if p + 3 > MAX_ORDER:
        raise ValueError(f"plug-in selectors need p + 3 <= {MAX_ORDER}, got p={p}")


def _pilots(s: Sample, p: int, kernel, pilot_grid) -> _Pilots:
    grid = quantile_grid(s) if pilot_grid is None else np.atleast_1d(pilot_grid)
    return _Pilots(
        h_c=irot_bandwidth(s, grid, 2, 1, kernel),
        h_d1=irot_bandwidth(s, grid, p + 2, p + 1, kernel),
        h_d2=irot_bandwidth(s, grid, p + 3, p + 2, kernel),
    )


def _point_terms(s: Sample, x: float, p: int, nu: int, kernel, pilots: _Pilots,
                 regularize: bool, mass_points: bool) -> _PointTerms:
    def reg(h, order):
        return regularize_bandwidth(s, x, h, order, enabled=regularize)

    h_d1 = reg(pilots.h_d1, p + 2)
    h_d2 = reg(pilots.h_d2, p + 3)
    d1 = fit_point(s, x, h_d1, p + 2, p + 1, kernel, mass_points=mass_points).est
    d2 = fit_point(s, x, h_d2, p + 3, p + 2, kernel, mass_points=mass_points).est

    h_c = reg(pilots.h_c, p)
    psi = influence_matrix(s, [Target(x, h_c, p, nu, kernel)], mass_points=mass_points)[:, 0]
    var_c = float(np.sum((s.w * psi) ** 2) / s.n**2)
    if nu == 0:
        # only the h-dependent part of the CDF variance enters the tradeoff
        raw = (s.x <= x).astype(float) - float(np.sum(s.w * (s.x <= x)) / s.n)
        var_c -= float(np.sum((s.w * raw) ** 2) / s.n**2)
    b1, b2 = bias_constants(s, x, h_c, p, nu, kernel, mass_points=mass_points)
    return _PointTerms(h_c, var_c, d1, d2, b1, b2)


def _objective(terms: Sequence[_PointTerms], p: int, nu: int) -> Callable[[float], float]:
    h_c = np.array([t.h_c for t in terms])
    var_c = np.array([t.var_c for t in terms])
    lead = np.array([t.d1 * t.b1 for t in terms])
    second = np.array([t.d2 * t.b2 for t in terms])
    expo = 2 * nu - 1

    def f(log_h: float) -> float:
        h = math.exp(log_h)
        var = var_c * (h_c / h) ** expo
        bias = h ** (p - nu + 1) * (lead + h * second)
        return float(np.sum(var + bias**2))

    return f


def _minimize(terms: Sequence[_PointTerms], p: int, nu: int, h_ref: float) -> float:
    f = _objective(terms, p, nu)
    lo, hi = math.log(h_ref / BRACKET), math.log(h_ref * BRACKET)
    if not np.isfinite(f(lo)) or not np.isfinite(f(hi)):
        raise FloatingPointError("plug-in objective is not finite on the search bracket")
    return math.exp(golden_section_min(f, lo, hi))


def mse_dpi(
    s: Sample,
    x: float,
    p: int = 2,
    nu: int = 1,
    kernel: KernelKind | str = KernelKind.TRIANGULAR,
    *,
    pilot_grid: Sequence[float] | None = None,
    regularize: bool = True,
    mass_points: bool = True,
) -> float:
    """Direct plug-in MSE-optimal bandwidth at ``x`` (before regularization)."""
    _check_dpi_order(p, nu)
    pilots = _pilots(s, p, kernel, pilot_grid)
    terms = _point_terms(s, float(x), p, nu, kernel, pilots, regularize, mass_points)
    return _minimize([terms], p, nu, pilots.h_c)


def imse_dpi(
    s: Sample,
    grid: Sequence[float],
    p: int = 2,
    nu: int = 1,
    kernel: KernelKind | str = KernelKind.TRIANGULAR,
    *,
    pilot_grid: Sequence[float] | None = None,
    regularize: bool = True,
    mass_points: bool = True,
) -> float:
    """Direct plug-in bandwidth minimizing the MSE summed over ``grid``.

    Points whose pilot fits are singular are dropped with a warning.
    """
    _check_dpi_order(p, nu)
    pilots = _pilots(s, p, kernel, pilot_grid)
    terms = []
    for x in np.atleast_1d(np.asarray(grid, dtype=float)):
        try:
            terms.append(_point_terms(s, float(x), p, nu, kernel, pilots, regularize, mass_points))
        except SingularFitError as exc:
            warnings.warn(f"dropping grid point from IMSE objective: {exc}",
                          RuntimeWarning, stacklevel=2)
    if not terms:
        raise SingularFitError(float("nan"), pilots.h_c, "pilot fits failed at every grid point")
    return _minimize(terms, p, nu, pilots.h_c)


# --------------------------------------------------------------------------


def select_bandwidth(
    s: Sample,
    grid: Sequence[float],
    method: BwMethod | str = BwMethod.MSE_DPI,
    p: int = 2,
    nu: int = 1,
    kernel: KernelKind | str = KernelKind.TRIANGULAR,
    *,
    bw: float | Sequence[float] | None = None,
    regularize: bool = True,
    n_local_min: int | None = None,
    n_unique_min: int | None = None,
    mass_points: bool = True,
    pilot_grid: Sequence[float] | None = None,
    imse_grid: Sequence[float] | None = None,
) -> BandwidthResult:
    """Bandwidths over ``grid`` for any selector.

    User bandwidths are taken as given (never regularized). For the
    integrated selectors ``imse_grid`` overrides the points entering the
    objective; the scalar result is regularized at every grid point and the
    largest value is used everywhere so the bandwidth stays constant.
    """
    method = BwMethod(method)
    kernel = KernelKind.parse(kernel)
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise ValueError("empty evaluation grid")
    notes: list[str] = []

    def reg(x, h):
        return regularize_bandwidth(s, x, h, p, n_local_min, n_unique_min, enabled=regularize)

    if method is BwMethod.USER or bw is not None:
        if bw is None:
            raise ValueError("user bandwidth method requires bw")
        raw = np.broadcast_to(np.asarray(bw, dtype=float), grid.shape).copy()
        if np.any(~np.isfinite(raw)) or np.any(raw <= 0):
            raise ValueError("user bandwidths must be positive and finite")
        h = raw
        method = BwMethod.USER
    elif method.integrated:
        obj_grid = grid if imse_grid is None else np.atleast_1d(np.asarray(imse_grid, float))
        if method is BwMethod.IMSE_ROT:
            h0 = irot_bandwidth(s, obj_grid, p, nu, kernel)
        else:
            h0 = imse_dpi(s, obj_grid, p, nu, kernel, pilot_grid=pilot_grid,
                          regularize=regularize, mass_points=mass_points)
        raw = np.full(grid.shape, h0)
        h = np.full(grid.shape, max(reg(x, h0) for x in grid))
    else:
        raw = np.empty(grid.shape)
        pilots = None
        for i, x in enumerate(grid):
            if method is BwMethod.MSE_ROT:
                raw[i] = rot_bandwidth(s, x, p, nu, kernel)
                continue
            if pilots is None:
                _check_dpi_order(p, nu)
                pilots = _pilots(s, p, kernel, pilot_grid)
            try:
                terms = _point_terms(s, float(x), p, nu, kernel, pilots, regularize, mass_points)
                raw[i] = _minimize([terms], p, nu, pilots.h_c)
            except SingularFitError as exc:
                log.warning("plug-in failed at x=%g, falling back to rule of thumb: %s", x, exc)
                notes.append(f"x={x:g}: plug-in failed, used mse-rot")
                raw[i] = rot_bandwidth(s, x, p, nu, kernel)
        h = np.array([reg(x, hi) for x, hi in zip(grid, raw)])

    eff = np.array([effective_n(s, x, hi) for x, hi in zip(grid, h)])
    return BandwidthResult(grid=grid, h=h, method=method, regularized=h > raw,
                           eff_n=eff, p=p, nu=nu, kernel=kernel, notes=notes)
