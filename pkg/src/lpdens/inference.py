"""Robust bias-corrected confidence intervals and uniform bands."""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .bwselect import BandwidthResult
from .ecdf import Sample
from .kernel import KernelKind
from .lpfit import SingularFitError, Target, fit_point, influence_matrix

log = logging.getLogger(__name__)

SIM_BLOCK = 1000


@dataclass
class InferenceTable:
    grid: np.ndarray
    h: np.ndarray
    eff_n: np.ndarray
    est_p: np.ndarray
    se_p: np.ndarray
    est_q: np.ndarray
    se_q: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    alpha: float
    p: int
    q: int
    nu: int
    kernel: KernelKind
    uniform: bool = False
    band_crit: float | None = None
    scale: float = 1.0
    failed: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    bw_method: str = "user"
    n: int = 0

    @property
    def crit(self) -> float:
        return self.band_crit if self.uniform else normal_critical(self.alpha)

    def records(self) -> list[dict]:
        rows = []
        for i in range(self.grid.size):
            rows.append({
                "grid": float(self.grid[i]), "bw": float(self.h[i]),
                "eff_n": int(self.eff_n[i]),
                "est_p": _num(self.est_p[i]), "se_p": _num(self.se_p[i]),
                "est_q": _num(self.est_q[i]), "se_q": _num(self.se_q[i]),
                "ci_lo": _num(self.ci_lo[i]), "ci_hi": _num(self.ci_hi[i]),
                "failed": bool(self.failed[i]),
            })
        return rows


def _num(v):
    v = float(v)
    return v if math.isfinite(v) else None


def normal_critical(alpha: float) -> float:
    return float(norm.ppf(1.0 - alpha / 2.0))


def _check(alpha: float, p: int, q: int, nu: int):
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if not 0 <= nu <= p <= q:
        raise ValueError(f"need 0 <= nu <= p <= q, got nu={nu}, p={p}, q={q}")


def _estimate_grid(s: Sample, bw: BandwidthResult, p: int, q: int, nu: int, kernel,
                   mass_points: bool):
    """Order-p and order-q fits plus the order-q influence matrix on the grid."""
    g = bw.grid.size
    est_p, se_p, est_q, se_q = (np.full(g, np.nan) for _ in range(4))
    failed = np.zeros(g, dtype=bool)
    psi_q = np.zeros((s.n, g))
    for i, (x, h) in enumerate(zip(bw.grid, bw.h)):
        try:
            est_p[i] = fit_point(s, x, h, p, nu, kernel, mass_points=mass_points).est
            est_q[i] = fit_point(s, x, h, q, nu, kernel, mass_points=mass_points).est
            psi = influence_matrix(s, [Target(x, h, p, nu, kernel), Target(x, h, q, nu, kernel)],
                                   mass_points=mass_points)
        except SingularFitError as exc:
            log.warning("grid point %d flagged: %s", i + 1, exc)
            failed[i] = True
            est_p[i] = est_q[i] = np.nan
            continue
        wpsi = psi * s.w[:, None]
        se_p[i], se_q[i] = np.sqrt(np.sum(wpsi**2, axis=0)) / s.n
        psi_q[:, i] = psi[:, 1]
    return est_p, se_p, est_q, se_q, failed, psi_q


def _table(s, bw, est_p, se_p, est_q, se_q, failed, crit, alpha, p, q, nu, kernel,
           uniform, band_crit) -> InferenceTable:
    return InferenceTable(
        grid=bw.grid.copy(), h=np.asarray(bw.h, float).copy(), eff_n=np.asarray(bw.eff_n).copy(),
        est_p=est_p, se_p=se_p, est_q=est_q, se_q=se_q,
        ci_lo=est_q - crit * se_q, ci_hi=est_q + crit * se_q,
        alpha=alpha, p=p, q=q, nu=nu, kernel=KernelKind.parse(kernel),
        uniform=uniform, band_crit=band_crit, failed=failed,
        bw_method=bw.method.value, n=s.n,
    )


def rbc_pointwise(
    s: Sample,
    bw: BandwidthResult,
    p: int = 2,
    q: int | None = None,
    nu: int = 1,
    kernel: KernelKind | str = KernelKind.TRIANGULAR,
    alpha: float = 0.05,
    *,
    mass_points: bool = True,
) -> InferenceTable:
    """Pointwise intervals ``est_q +- z * se_q`` at the order-``p`` bandwidths."""
    q = p + 1 if q is None else q
    _check(alpha, p, q, nu)
    est_p, se_p, est_q, se_q, failed, _ = _estimate_grid(s, bw, p, q, nu, kernel, mass_points)
    return _table(s, bw, est_p, se_p, est_q, se_q, failed, normal_critical(alpha),
                  alpha, p, q, nu, kernel, False, None)


def multiplier_sup_quantile(
    s: Sample, psi: np.ndarray, se: np.ndarray, alpha: float, n_sim: int, seed
) -> float:
    """Gaussian multiplier bootstrap of ``max_g |t*_g|``, upper ``alpha`` quantile.

    Draws are generated in fixed blocks of ``SIM_BLOCK`` replications, each
    from its own Philox substream keyed by ``(seed, block)``.
    """
    if n_sim < 1:
        raise ValueError("n_sim must be positive")
    if np.any(~(se > 0)):
        raise ValueError("uniform band needs strictly positive standard errors")
    scaled = psi * (s.w / s.n)[:, None] / se[None, :]
    sups = np.empty(n_sim)
    root = np.random.SeedSequence(seed)
    n_blocks = -(-n_sim // SIM_BLOCK)
    for b, child in zip(range(n_blocks), root.spawn(n_blocks)):
        lo = b * SIM_BLOCK
        hi = min(lo + SIM_BLOCK, n_sim)
        rng = np.random.Generator(np.random.Philox(child))
        xi = rng.standard_normal((hi - lo, s.n))
        sups[lo:hi] = np.max(np.abs(xi @ scaled), axis=1)
    k = math.ceil((1.0 - alpha) * n_sim)
    return float(np.sort(sups)[max(k, 1) - 1])


def uniform_band(
    s: Sample,
    bw: BandwidthResult,
    p: int = 2,
    q: int | None = None,
    nu: int = 1,
    kernel: KernelKind | str = KernelKind.TRIANGULAR,
    alpha: float = 0.05,
    n_sim: int = 2000,
    seed=None,
    *,
    mass_points: bool = True,
) -> InferenceTable:
    """Simultaneous band over the grid with a simulated critical value.

    Grid points whose fits fail are flagged and left out of the supremum.
    """
    q = p + 1 if q is None else q
    _check(alpha, p, q, nu)
    if n_sim < 100:
        raise ValueError("n_sim must be at least 100")
    est_p, se_p, est_q, se_q, failed, psi_q = _estimate_grid(s, bw, p, q, nu, kernel, mass_points)
    ok = ~failed
    if not ok.any():
        raise SingularFitError(float("nan"), float("nan"), "every grid point failed")
    crit = multiplier_sup_quantile(s, psi_q[:, ok], se_q[ok], alpha, n_sim, seed)
    return _table(s, bw, est_p, se_p, est_q, se_q, failed, crit, alpha, p, q, nu, kernel,
                  True, crit)


def scale_results(t: InferenceTable, scale: float) -> InferenceTable:
    """Multiply estimates, standard errors and interval ends by ``scale``."""
    if not scale > 0:
        raise ValueError("scale must be positive")
    return dataclasses.replace(
        t,
        est_p=t.est_p * scale, se_p=t.se_p * scale,
        est_q=t.est_q * scale, se_q=t.se_q * scale,
        ci_lo=t.ci_lo * scale, ci_hi=t.ci_hi * scale,
        scale=t.scale * scale,
    )
