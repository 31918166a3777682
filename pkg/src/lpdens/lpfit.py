"""Local polynomial smoothing of the empirical CDF.

All fits use the scaled basis ``r_p((X - x)/h)``; coefficients are mapped
back to derivative estimates through ``nu! / h**nu``. The response is the
ECDF evaluated at the design points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import linalg

from .ecdf import Sample, effective_n
from .kernel import KernelKind, kernel_eval

COND_LIMIT = 1e12


class SingularFitError(ArithmeticError):
    """Local design matrix is singular or too ill-conditioned to solve."""

    def __init__(self, x: float, h: float, reason: str):
        self.x = x
        self.h = h
        super().__init__(f"singular local fit at x={x:.6g}, h={h:.6g}: {reason}")


@dataclass(frozen=True)
class LocalSystem:
    x: float
    h: float
    p: int
    s_matrix: np.ndarray
    m_vec: tuple[np.ndarray, np.ndarray]
    c_hat: np.ndarray
    cond: float
    # window rows: design points, merged weights times kernel, ECDF values
    xs: np.ndarray = field(repr=False)
    kw: np.ndarray = field(repr=False)
    ys: np.ndarray = field(repr=False)
    _factor: tuple = field(repr=False, default=())
    _scale: float = field(repr=False, default=1.0)

    def solve(self, v: np.ndarray) -> np.ndarray:
        """Apply ``S^{-1}`` through the pivoted QR factor of the design."""
        r, piv = self._factor
        v = np.asarray(v, dtype=float)[piv]
        z = linalg.solve_triangular(r, v, trans="T", lower=False)
        z = linalg.solve_triangular(r, z, lower=False)
        out = np.empty_like(z)
        out[piv] = z
        return out * self._scale


@dataclass
class PointFit:
    x: float
    h: float
    p: int
    nu: int
    eff_n: int
    est: float
    se: float = float("nan")
    coefficients: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)


class Target(NamedTuple):
    x: float
    h: float
    p: int
    nu: int
    kernel: KernelKind | str = KernelKind.TRIANGULAR


def _window(s: Sample, x: float, h: float, mass_points: bool):
    if mass_points:
        xs, ws, fs = s.unique_x, s.unique_w, s.unique_fhat
    else:
        xs, ws, fs = s.x, s.w, s.fhat
    lo = np.searchsorted(xs, x - h, side="left")
    hi = np.searchsorted(xs, x + h, side="right")
    return xs[lo:hi], ws[lo:hi], fs[lo:hi]


def design_system(
    s: Sample,
    x: float,
    h: float,
    p: int,
    kernel: KernelKind | str = KernelKind.TRIANGULAR,
    *,
    mass_points: bool = True,
    response: Callable[[np.ndarray], np.ndarray] | None = None,
) -> LocalSystem:
    """Assemble and solve the kernel-weighted least-squares system at ``x``.

    ``response`` replaces the ECDF values by ``response(X_j)``, which is
    handy for checking exact polynomial reproduction.

    Raises
    ------
    SingularFitError
        Fewer than ``p + 1`` support points with positive kernel weight or
        a moment matrix with condition number above ``COND_LIMIT``.
    """
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    x = float(x)
    h = float(h)
    xs, ws, ys = _window(s, x, h, mass_points)
    u = (xs - x) / h
    kw = ws * kernel_eval(kernel, u)
    if response is not None:
        ys = np.asarray(response(xs), dtype=float)
    if np.count_nonzero(kw > 0) < p + 1:
        raise SingularFitError(x, h, f"fewer than {p + 1} support points in window")

    nh = s.n * h
    powers = u[:, None] ** np.arange(p + 3)
    basis = powers[:, : p + 1]
    sw = np.sqrt(kw)
    q, r, piv = linalg.qr(basis * sw[:, None], mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.min() == 0.0:
        raise SingularFitError(x, h, "rank-deficient design")
    cond = np.linalg.cond(r) ** 2
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularFitError(x, h, f"condition number {cond:.3g} exceeds {COND_LIMIT:.0e}")

    c_perm = linalg.solve_triangular(r, q.T @ (sw * ys), lower=False)
    c_hat = np.empty(p + 1)
    c_hat[piv] = c_perm

    weighted = basis * kw[:, None]
    s_matrix = weighted.T @ basis / nh
    m_vec = (weighted.T @ powers[:, p + 1] / nh, weighted.T @ powers[:, p + 2] / nh)
    return LocalSystem(
        x=x, h=h, p=p, s_matrix=s_matrix, m_vec=m_vec, c_hat=c_hat, cond=float(cond),
        xs=xs, kw=kw, ys=ys, _factor=(r, piv), _scale=nh,
    )


def _check_orders(p: int, nu: int):
    if p < 0:
        raise ValueError("polynomial order must be nonnegative")
    if not 0 <= nu <= p:
        raise ValueError(f"derivative order nu={nu} must satisfy 0 <= nu <= p={p}")


def fit_point(
    s: Sample,
    x: float,
    h: float,
    p: int = 2,
    nu: int = 1,
    kernel: KernelKind | str = KernelKind.TRIANGULAR,
    *,
    mass_points: bool = True,
) -> PointFit:
    """Point estimate of the ``nu``-th derivative of the CDF at ``x``.

    The standard error is left as NaN; see :func:`fit_points` or
    :func:`influence_covariance`.
    """
    _check_orders(p, nu)
    system = design_system(s, x, h, p, kernel, mass_points=mass_points)
    est = factorial(nu) * system.c_hat[nu] / h**nu
    return PointFit(
        x=float(x), h=float(h), p=p, nu=nu, eff_n=effective_n(s, x, h), est=float(est),
        coefficients=system.c_hat / h ** np.arange(p + 1),
    )


def _influence_column(s: Sample, t: Target, mass_points: bool) -> np.ndarray:
    system = design_system(s, t.x, t.h, t.p, t.kernel, mass_points=mass_points)
    e = np.zeros(t.p + 1)
    e[t.nu] = 1.0
    g = system.solve(e)
    u = (system.xs - t.x) / t.h
    alpha = system.kw * (np.vander(u, t.p + 1, increasing=True) @ g) / (s.n * t.h)
    # sum_j alpha_j 1(X_i <= X_j) is a suffix sum over the sorted window
    suffix = np.concatenate((np.cumsum(alpha[::-1])[::-1], [0.0]))
    pos = np.searchsorted(system.xs, s.x, side="left")
    lin = suffix[pos] - alpha @ system.ys
    return factorial(t.nu) * t.h ** (-t.nu) * lin


def influence_matrix(
    s: Sample, targets: Sequence[Target], *, mass_points: bool = True
) -> np.ndarray:
    """Per-observation influence values, shape ``(n, len(targets))``.

    Column ``t`` holds ``psi_i(t)``; the estimator's linearization is
    ``(1/n) sum_i w_i psi_i(t)``.
    """
    targets = [Target(*t) for t in targets]
    for t in targets:
        _check_orders(t.p, t.nu)
    out = np.empty((s.n, len(targets)))
    for k, t in enumerate(targets):
        out[:, k] = _influence_column(s, t, mass_points)
    return out


def covariance_from_influence(s: Sample, psi: np.ndarray) -> np.ndarray:
    a = psi * s.w[:, None]
    cov = a.T @ a / s.n**2
    return 0.5 * (cov + cov.T)


def influence_covariance(
    s: Sample, targets: Sequence[Target], *, mass_points: bool = True
) -> np.ndarray:
    """Covariance of the derivative estimates across ``targets``.

    Built as a Gram matrix of weighted influence vectors, hence symmetric
    positive semidefinite.
    """
    return covariance_from_influence(s, influence_matrix(s, targets, mass_points=mass_points))


def fit_points(
    s: Sample,
    xs: Sequence[float],
    hs: Sequence[float] | float,
    p: int = 2,
    nu: int = 1,
    kernel: KernelKind | str = KernelKind.TRIANGULAR,
    *,
    mass_points: bool = True,
) -> list[PointFit]:
    """Estimates and standard errors over several evaluation points."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    hs = np.broadcast_to(np.asarray(hs, dtype=float), xs.shape)
    fits = []
    for x, h in zip(xs, hs):
        fit = fit_point(s, x, h, p, nu, kernel, mass_points=mass_points)
        psi = _influence_column(s, Target(x, h, p, nu, kernel), mass_points)
        fit.se = float(np.sqrt(np.sum((s.w * psi) ** 2)) / s.n)
        fits.append(fit)
    return fits


def bias_constants(
    s: Sample,
    x: float,
    h: float,
    p: int = 2,
    nu: int = 1,
    kernel: KernelKind | str = KernelKind.TRIANGULAR,
    *,
    mass_points: bool = True,
) -> tuple[float, float]:
    """Finite-sample leading and second-order bias constants at ``x``.

    The bias of the order-``p`` estimate is approximately
    ``h^(p-nu+1) * (F^(p+1)(x) B1 + h F^(p+2)(x) B2)``.
    """
    _check_orders(p, nu)
    system = design_system(s, x, h, p, kernel, mass_points=mass_points)
    e = np.zeros(p + 1)
    e[nu] = 1.0
    g = system.solve(e)
    b1 = factorial(nu) / factorial(p + 1) * float(g @ system.m_vec[0])
    b2 = factorial(nu) / factorial(p + 2) * float(g @ system.m_vec[1])
    return b1, b2


def rbc_estimate(
    s: Sample,
    x: float,
    h_p: float,
    p: int = 2,
    q: int | None = None,
    nu: int = 1,
    kernel: KernelKind | str = KernelKind.TRIANGULAR,
    *,
    mass_points: bool = True,
) -> PointFit:
    """Order-``q`` estimate and standard error at the order-``p`` bandwidth."""
    q = p + 1 if q is None else q
    if q < p:
        raise ValueError(f"inference order q={q} must be at least p={p}")
    if q < nu:
        raise ValueError(f"inference order q={q} is below derivative order nu={nu}")
    return fit_points(s, [x], h_p, q, nu, kernel, mass_points=mass_points)[0]
