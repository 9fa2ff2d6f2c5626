"""Model parameters, ring geometry, jump rates and exact generator oracles.

Sites carry logical labels on Z; the slow bond joins the logical sites -1
and 0. On a ring of ``N`` sites the logical site ``x`` lives at array index
``x + N // 2`` so that the slow bond is the bond with left index
``N // 2 - 1``.

Local functions are dense truth tables over a window of consecutive
logical sites. Bit ``i`` of a table index is the occupation of the site
``start + i``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Sequence

import numpy as np

MAX_WIDTH = 16  # widest enlarged window handled by dense tables
MAX_RING = 14


class ParameterError(ValueError):
    """Raised when model parameters violate the rate positivity condition."""


class WindowError(ValueError):
    """Raised when a local function window does not fit."""


def positivity_violations(n, alpha, beta, gamma, a, rho=0.5) -> list[str]:
    """Return the list of violated clauses (empty when the parameters are valid)."""
    bad = []
    vals = dict(n=n, alpha=alpha, beta=beta, gamma=gamma, a=a, rho=rho)
    for name, v in vals.items():
        if not math.isfinite(v):
            bad.append(f"{name} must be finite")
    if bad:
        return bad
    if n < 1 or int(n) != n:
        bad.append("n must be a positive integer")
    if alpha <= 0:
        bad.append("alpha must be > 0")
    if beta < 0:
        bad.append("beta must be >= 0")
    if gamma < 0.5:
        bad.append("gamma must be >= 1/2")
    if a < 0:
        bad.append("a must be >= 0")
    if not 0 < rho < 1:
        bad.append("rho must lie in (0, 1)")
    if gamma < beta:
        bad.append("gamma < beta: slow-bond left rate turns negative")
    elif gamma == beta and alpha < a:
        bad.append("beta == gamma requires alpha >= a")
    if not bad:
        right, left = raw_rates(n, alpha, beta, gamma, a)
        if min(right + left) < 0:
            bad.append(f"negative jump rate at n={n}")
    return bad


def raw_rates(n, alpha, beta, gamma, a):
    """Jump rates without any validation.

    Returns ``((right, right_slow), (left, left_slow))`` where ``right`` is the
    rate x -> x+1 on a regular bond and ``right_slow`` the rate -1 -> 0.
    """
    drift = a / (2.0 * n**gamma)
    slow = alpha / (2.0 * n**beta)
    return (0.5 + drift, slow + drift), (0.5 - drift, slow - drift)


@dataclass(frozen=True)
class ModelParams:
    n: int
    alpha: float = 1.0
    beta: float = 0.0
    gamma: float = 1.0
    a: float = 0.0
    rho: float = 0.5

    def __post_init__(self):
        validate_params(self)

    @property
    def chi(self) -> float:
        """Static compressibility rho (1 - rho)."""
        return self.rho * (1.0 - self.rho)

    @property
    def drift(self) -> float:
        return self.a / (2.0 * self.n**self.gamma)

    def right_rate(self, x: int) -> float:
        """Rate of a jump x -> x+1 (logical sites)."""
        return (self.alpha / (2.0 * self.n**self.beta) if x == -1 else 0.5) + self.drift

    def left_rate(self, x: int) -> float:
        """Rate of a jump x+1 -> x across the bond {x, x+1}."""
        return (self.alpha / (2.0 * self.n**self.beta) if x == -1 else 0.5) - self.drift

    def bond_coefficient(self, x: int) -> float:
        """Dirichlet-form coefficient of the bond {x, x+1}."""
        return self.right_rate(x)

    @property
    def max_rate(self) -> float:
        return max(0.5, self.alpha / (2.0 * self.n**self.beta)) + self.drift

    def replace(self, **kw) -> "ModelParams":
        d = dict(n=self.n, alpha=self.alpha, beta=self.beta, gamma=self.gamma, a=self.a, rho=self.rho)
        d.update(kw)
        return ModelParams(**d)


def validate_params(p: ModelParams) -> None:
    """Raise :class:`ParameterError` naming every violated clause."""
    bad = positivity_violations(p.n, p.alpha, p.beta, p.gamma, p.a, p.rho)
    if bad:
        raise ParameterError("; ".join(bad))


@dataclass(frozen=True)
class Ring:
    """Ring of ``N`` sites with the slow bond between logical sites -1 and 0."""

    N: int

    def __post_init__(self):
        if self.N < 3:
            raise ValueError("ring needs at least 3 sites")

    @property
    def origin(self) -> int:
        return self.N // 2

    @property
    def slow_bond(self) -> int:
        """Array index of the left site of the slow bond."""
        return self.origin - 1

    def index(self, x):
        return (np.asarray(x) + self.origin) % self.N

    def logical(self, i=None):
        """Logical labels, in the range [-N//2, N - N//2)."""
        i = np.arange(self.N) if i is None else np.asarray(i)
        return i - self.origin

    def rates(self, p: ModelParams) -> tuple[np.ndarray, np.ndarray]:
        """Per-bond (right, left) jump rates; bond ``b`` joins ``b`` and ``b+1 mod N``."""
        right = np.full(self.N, 0.5 + p.drift)
        left = np.full(self.N, 0.5 - p.drift)
        right[self.slow_bond] = p.right_rate(-1)
        left[self.slow_bond] = p.left_rate(-1)
        return right, left


@dataclass
class Config:
    """Occupation variables on a ring; ``particle_count`` is kept in sync by the simulator."""

    occ: np.ndarray
    particle_count: int = field(default=-1)

    def __post_init__(self):
        self.occ = np.ascontiguousarray(self.occ, dtype=np.uint8)
        if self.particle_count < 0:
            self.particle_count = int(self.occ.sum())

    @property
    def ring(self) -> Ring:
        return Ring(self.occ.size)

    def __getitem__(self, x):
        """Occupation at logical site(s) ``x``."""
        return self.occ[self.ring.index(x)]

    def copy(self) -> "Config":
        return Config(self.occ.copy(), self.particle_count)


def swap_rate(p: ModelParams, config: Config, x: int) -> float:
    """Total rate at which the contents of the bond {x, x+1} (logical) swap."""
    ring = config.ring
    i, j = ring.index(x), ring.index(x + 1)
    b = ring.logical(i)
    ex, ey = int(config.occ[i]), int(config.occ[j])
    return p.right_rate(b) * ex * (1 - ey) + p.left_rate(b) * ey * (1 - ex)


# ---------------------------------------------------------------------------
# Local functions


@dataclass(frozen=True)
class LocalFunction:
    """Function of the occupations of ``width`` consecutive sites starting at ``start``."""

    start: int
    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        w = int(round(math.log2(t.size))) if t.size else -1
        if w < 0 or 2**w != t.size:
            raise ValueError("table must have 2**width entries")
        object.__setattr__(self, "table", t)

    @property
    def width(self) -> int:
        return int(round(math.log2(self.table.size)))

    @property
    def support(self) -> range:
        return range(self.start, self.start + self.width)

    @classmethod
    def from_callable(cls, start: int, width: int, func: Callable[[tuple], float]):
        """Tabulate ``func(occupations)`` where occupations is a tuple indexed like the window."""
        table = np.empty(2**width)
        for idx in range(2**width):
            table[idx] = func(tuple((idx >> i) & 1 for i in range(width)))
        return cls(start, table)

    @classmethod
    def constant(cls, c: float, start: int = 0):
        return cls(start, np.array([c, c]))

    @classmethod
    def monomial(cls, sites: Sequence[int]):
        """The product of occupations over ``sites``."""
        lo, hi = min(sites), max(sites)
        offs = [s - lo for s in sites]
        return cls.from_callable(lo, hi - lo + 1, lambda e: float(np.prod([e[o] for o in offs])))

    def __call__(self, config: Config) -> float:
        bits = config[np.arange(self.start, self.start + self.width)]
        return float(self.table[int(np.dot(bits, 1 << np.arange(self.width)))])

    def embed(self, start: int, width: int) -> np.ndarray:
        """Values of ``self`` for every pattern of a larger window."""
        off = self.start - start
        if off < 0 or off + self.width > width:
            raise WindowError("window does not contain the support")
        idx = np.arange(2**width)
        return self.table[(idx >> off) & (2**self.width - 1)]


def _bits(width: int) -> np.ndarray:
    idx = np.arange(2**width)
    return (idx[:, None] >> np.arange(width)) & 1


def bernoulli_weights(width: int, rho: float) -> np.ndarray:
    """Product Bernoulli probabilities of every pattern on a window."""
    b = _bits(width)
    return np.prod(np.where(b == 1, rho, 1.0 - rho), axis=1)


def _enlarge(f: LocalFunction, max_width: int):
    start, width = f.start - 1, f.width + 2
    if width > max_width:
        raise WindowError(f"enlarged window of width {width} exceeds {max_width}")
    return start, width


def generator_apply(p: ModelParams, f: LocalFunction, max_width: int = MAX_WIDTH) -> LocalFunction:
    """Exact ``L_n f`` on the window enlarged by one site on each side."""
    start, width = _enlarge(f, max_width)
    vals = f.embed(start, width)
    idx = np.arange(2**width)
    out = np.zeros(2**width)
    for j in range(width - 1):
        x = start + j
        bj, bk = (idx >> j) & 1, (idx >> (j + 1)) & 1
        rate = p.right_rate(x) * bj * (1 - bk) + p.left_rate(x) * bk * (1 - bj)
        swapped = idx ^ ((1 << j) | (1 << (j + 1)))
        out += rate * (vals[swapped] - vals)
    return LocalFunction(start, out)


def invariance_residual(p: ModelParams, f: LocalFunction, max_width: int = MAX_WIDTH) -> float:
    """Expectation of ``L_n f`` under the product Bernoulli measure (should vanish)."""
    g = generator_apply(p, f, max_width)
    w = bernoulli_weights(g.width, p.rho)
    return math.fsum(w * g.table)


def bond_increments(f: LocalFunction, p: ModelParams, max_width: int = MAX_WIDTH):
    """Yield ``(x, I_{x,x+1}(f))`` for every bond touching the support of ``f``."""
    start, width = _enlarge(f, max_width)
    vals = f.embed(start, width)
    w = bernoulli_weights(width, p.rho)
    idx = np.arange(2**width)
    for j in range(width - 1):
        differ = ((idx >> j) ^ (idx >> (j + 1))) & 1
        swapped = idx ^ (differ * ((1 << j) | (1 << (j + 1))))
        yield start + j, math.fsum(w * (vals - vals[swapped]) ** 2)


def dirichlet_form(p: ModelParams, f: LocalFunction, max_width: int = MAX_WIDTH) -> float:
    """``D_n(f) = sum_x Xi_{x,x+1} I_{x,x+1}(f)`` computed exactly."""
    return math.fsum(p.bond_coefficient(x) * I for x, I in bond_increments(f, p, max_width))


# ---------------------------------------------------------------------------
# Exact small-ring chains


def ring_states(N: int, k: int | None = None) -> np.ndarray:
    """Bitmask states of an N-ring, optionally restricted to ``k`` particles."""
    states = np.arange(2**N, dtype=np.int64)
    if k is not None:
        pop = np.array([bin(s).count("1") for s in states])
        states = states[pop == k]
    return states


def ring_generator(p: ModelParams, N: int, k: int | None = None, diffusive: bool = False):
    """Dense generator matrix of the exclusion process on an N-ring.

    Bit ``i`` of a state is the occupation of array index ``i``. Returns
    ``(states, Q)``; rows of ``Q`` sum to zero. With ``diffusive`` the rates are
    multiplied by ``n**2``.
    """
    if N > MAX_RING:
        raise WindowError(f"ring of {N} sites is too large for exact enumeration (max {MAX_RING})")
    ring = Ring(N)
    right, left = ring.rates(p)
    states = ring_states(N, k)
    pos = {int(s): i for i, s in enumerate(states)}
    Q = np.zeros((states.size, states.size))
    for i, s in enumerate(states):
        s = int(s)
        for b in range(N):
            c = (b + 1) % N
            eb, ec = (s >> b) & 1, (s >> c) & 1
            if eb == ec:
                continue
            rate = right[b] if eb else left[b]
            j = pos[s ^ ((1 << b) | (1 << c))]
            Q[i, j] += rate
            Q[i, i] -= rate
    if diffusive:
        Q *= p.n**2
    return states, Q


def ring_stationary_residual(p: ModelParams, N: int, k: int) -> float:
    """Max-norm of ``Q^T 1`` on the k-particle sector (zero iff uniform is stationary)."""
    if not 0 <= k <= N:
        raise ValueError("particle number out of range")
    _, Q = ring_generator(p, N, k)
    return float(np.max(np.abs(Q.sum(axis=0)))) if Q.size else 0.0


def state_to_config(state: int, N: int) -> Config:
    return Config(np.array([(state >> i) & 1 for i in range(N)], dtype=np.uint8))


def config_to_state(config: Config) -> int:
    return int(np.dot(config.occ.astype(np.int64), 1 << np.arange(config.occ.size, dtype=np.int64)))


def all_patterns(width: int):
    return product((0, 1), repeat=width)
