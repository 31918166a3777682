"""Compact-support kernels and their interior moment constants."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

MAX_ORDER = 7

_GL_NODES, _GL_WEIGHTS = leggauss(64)


class KernelKind(str, Enum):
    TRIANGULAR = "triangular"
    UNIFORM = "uniform"
    EPANECHNIKOV = "epanechnikov"

    @classmethod
    def parse(cls, value: "KernelKind | str") -> "KernelKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown kernel {value!r}; expected one of {names}") from None


def kernel_eval(kind: KernelKind | str, u):
    """Evaluate a kernel normalized to integrate to one on [-1, 1].

    Accepts scalars or arrays; returns the same shape. Zero outside [-1, 1].
    """
    kind = KernelKind.parse(kind)
    u = np.asarray(u, dtype=float)
    au = np.abs(u)
    inside = au <= 1.0
    if kind is KernelKind.TRIANGULAR:
        out = np.where(inside, 1.0 - au, 0.0)
    elif kind is KernelKind.UNIFORM:
        out = np.where(inside, 0.5, 0.0)
    else:
        out = np.where(inside, 0.75 * (1.0 - u * u), 0.0)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class KernelConstants:
    """Interior moment matrices of a kernel for polynomial order ``p``.

    Attributes
    ----------
    gamma : ndarray, shape (p+1, p+1)
        ``int K(u) r(u) r(u)' du``.
    m_next, m_next2 : ndarray, shape (p+1,)
        ``int K(u) r(u) u^(p+1) du`` and ``int K(u) r(u) u^(p+2) du``.
    tmat : ndarray, shape (p+1, p+1)
        ``int int K(u) K(v) u^j v^k min(u, v) du dv``.
    """

    kind: KernelKind
    p: int
    gamma: np.ndarray
    m_next: np.ndarray
    m_next2: np.ndarray
    tmat: np.ndarray

    def variance_constant(self, nu: int) -> float:
        """``nu!^2 e' G^-1 T G^-1 e`` with ``e`` the ``nu``-th unit vector."""
        g = np.linalg.solve(self.gamma, _unit(self.p, nu))
        return _factorial(nu) ** 2 * float(g @ self.tmat @ g)

    def bias_constants(self, nu: int) -> tuple[float, float]:
        g = np.linalg.solve(self.gamma, _unit(self.p, nu))
        b1 = _factorial(nu) / _factorial(self.p + 1) * float(g @ self.m_next)
        b2 = _factorial(nu) / _factorial(self.p + 2) * float(g @ self.m_next2)
        return b1, b2


def _factorial(k: int) -> float:
    return float(np.prod(np.arange(1, k + 1, dtype=float)))


def _unit(p: int, nu: int) -> np.ndarray:
    e = np.zeros(p + 1)
    e[nu] = 1.0
    return e


def _panels(a: float, b: float, breaks=(0.0,)):
    """Gauss-Legendre nodes/weights over [a, b], split at interior kinks."""
    cuts = [a] + [c for c in breaks if a < c < b] + [b]
    nodes, weights = [], []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        half = 0.5 * (hi - lo)
        nodes.append(lo + half * (_GL_NODES + 1.0))
        weights.append(half * _GL_WEIGHTS)
    return np.concatenate(nodes), np.concatenate(weights)


@lru_cache(maxsize=None)
def _constants(kind: KernelKind, p: int) -> KernelConstants:
    u, wu = _panels(-1.0, 1.0)
    ku = kernel_eval(kind, u) * wu
    powers = u[:, None] ** np.arange(p + 3)
    r = powers[:, : p + 1]
    gamma = (r * ku[:, None]).T @ r
    m_next = (r * ku[:, None]).T @ powers[:, p + 1]
    m_next2 = (r * ku[:, None]).T @ powers[:, p + 2]

    # inner(u)_k = int K(v) v^k min(u, v) dv, split at v = u and at the kink
    inner = np.empty((u.size, p + 1))
    ks = np.arange(p + 1)
    for i, ui in enumerate(u):
        v1, w1 = _panels(-1.0, ui)
        v2, w2 = _panels(ui, 1.0)
        below = (kernel_eval(kind, v1) * w1) @ (v1[:, None] ** (ks + 1))
        above = ui * ((kernel_eval(kind, v2) * w2) @ (v2[:, None] ** ks))
        inner[i] = below + above
    tmat = (r * ku[:, None]).T @ inner
    tmat = 0.5 * (tmat + tmat.T)

    for arr in (gamma, m_next, m_next2, tmat):
        arr.setflags(write=False)
    return KernelConstants(kind, p, gamma, m_next, m_next2, tmat)


def kernel_constants(kind: KernelKind | str, p: int) -> KernelConstants:
    """Interior kernel constants for orders ``0 <= p <= 7`` (cached)."""
    if not 0 <= int(p) <= MAX_ORDER:
        raise ValueError(f"polynomial order must be in [0, {MAX_ORDER}], got {p}")
    return _constants(KernelKind.parse(kind), int(p))
