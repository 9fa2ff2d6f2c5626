"""Centered occupations, block averages, fluctuation fields and discrete derivatives.

Positions are logical sites on the ring (see :class:`slowbond.lattice.Ring`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import Config, ModelParams, Ring

TAIL_TOL = 1e-10


class BoxOverflow(ValueError):
    pass


class TailError(ValueError):
    pass


def centered(config: Config, x, rho: float):
    """``eta(x) - rho``."""
    return config[x] - rho


def _window(ring: Ring) -> tuple[int, int]:
    lo = -ring.origin
    return lo, lo + ring.N - 1


def empirical_average(config: Config, x: int, L: int, rho: float, side: str = "right") -> float:
    """Mean of ``eta - rho`` over the ``L`` sites right (``x+1..x+L``) or left (``x-L..x-1``) of ``x``."""
    if L < 1:
        raise ValueError("L must be positive")
    lo, hi = _window(config.ring)
    if side == "right":
        first, last = x + 1, x + L
    elif side == "left":
        first, last = x - L, x - 1
    else:
        raise ValueError("side must be 'right' or 'left'")
    if first < lo or last > hi:
        raise BoxOverflow(f"box [{first}, {last}] leaves the ring window [{lo}, {hi}]")
    return float(np.mean(config[np.arange(first, last + 1)]) - rho)


def transport_shift(p: ModelParams, t: float) -> float:
    """Lattice displacement ``n^(2 - gamma) a (1 - 2 rho) t`` of the moving frame."""
    return p.n ** (2.0 - p.gamma) * p.a * (1.0 - 2.0 * p.rho) * t


def field_positions(ring: Ring, p: ModelParams, t: float = 0.0) -> np.ndarray:
    """Macroscopic arguments ``(x - shift) / n`` per ring index, wrapped into the window."""
    x = ring.logical().astype(float)
    shift = transport_shift(p, t)
    if shift:
        x = (x - shift + ring.origin) % ring.N - ring.origin
    return x / p.n


def check_tails(phi, ring: Ring, p: ModelParams, tol: float = TAIL_TOL) -> None:
    """Raise :class:`TailError` if ``phi`` is not negligible at the ring's edge."""
    edge = ring.origin / p.n
    tail = getattr(phi, "tail_sup", None)
    if tail is None:
        return
    size = getattr(phi, "seminorm", None)
    scale = max(1.0, size(0, 0)) if size else 1.0
    if tail(edge) > tol * scale:
        raise TailError(f"test function tail {tail(edge):.2e} beyond |u| = {edge} exceeds {tol}")


def field_weights(phi, ring: Ring, p: ModelParams, t: float = 0.0, tol: float = TAIL_TOL) -> np.ndarray:
    """Per-site weights ``n^(-1/2) phi((x - shift)/n)`` so that ``Y = sum w (eta - rho)``."""
    check_tails(phi, ring, p, tol)
    return np.asarray(phi(field_positions(ring, p, t)), dtype=float) / math.sqrt(p.n)


def fluctuation_field(config: Config, phi, p: ModelParams, t: float = 0.0, tol: float = TAIL_TOL) -> float:
    """``Y_t(phi) = n^(-1/2) sum_x (eta(x) - rho) phi((x - n^(2-gamma) a (1-2 rho) t) / n)``."""
    w = field_weights(phi, config.ring, p, t, tol)
    return math.fsum(w * (config.occ - p.rho))


def discrete_derivative(phi, x, n: int, order: int = 1):
    """``n (phi((x+1)/n) - phi(x/n))`` or ``n^2 (phi((x+1)/n) - 2 phi(x/n) + phi((x-1)/n))``."""
    x = np.asarray(x, dtype=float)
    if order == 1:
        return n * (phi((x + 1) / n) - phi(x / n))
    if order == 2:
        return n * n * (phi((x + 1) / n) - 2 * phi(x / n) + phi((x - 1) / n))
    raise ValueError("order must be 1 or 2")


def box_indicator(k: int, L: int, n: int):
    """``u -> (n/L) 1{k/n < u <= (k+L)/n}``, the lattice box of length ``L`` right of ``k``."""
    lo, hi = k / n, (k + L) / n
    eps = L / n

    def f(u):
        u = np.asarray(u, dtype=float)
        return np.where((u > lo) & (u <= hi), 1.0 / eps, 0.0)

    return f


@dataclass
class WeightSequence:
    """Weights ``v(x)`` on logical sites ``start, start+1, ...``."""

    start: int
    values: np.ndarray
    n: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        v2 = self.values**2
        self.norm_sq = math.fsum(v2) / self.n
        off = self.positions != -1
        self.norm_sq_off_slow = math.fsum(v2[off]) / self.n

    @property
    def positions(self) -> np.ndarray:
        return self.start + np.arange(self.values.size)

    @classmethod
    def from_function(cls, f, n: int, lo: int, hi: int) -> "WeightSequence":
        x = np.arange(lo, hi + 1)
        return cls(lo, np.asarray(f(x), dtype=float), n)

    def on_ring(self, ring: Ring) -> np.ndarray:
        """Dense array indexed by ring index."""
        out = np.zeros(ring.N)
        lo = -ring.origin
        if self.start < lo or self.start + self.values.size - 1 > lo + ring.N - 1:
            raise BoxOverflow("weights leave the ring window")
        out[ring.index(self.positions)] = self.values
        return out
