"""Path statistics built on exactly integrated observables.

Every estimator comes in two halves: a ``register_*`` function that adds the
needed observables to an :class:`~slowbond.simulator.ObservableSet` before the
run, and an evaluation function that reads the finished
:class:`~slowbond.simulator.PathRecord` (or a list of them, one per replica).

Martingale decomposition on the ring
------------------------------------
For ``Y = n^(-1/2) sum_x phi(x/n) (eta(x) - rho)`` the generator splits into a
symmetric part acting on ``phi`` and a current part. With bond conductances
``c_b = (p_b + q_b) / 2`` and ``d = a / (2 n^gamma)`` one has, exactly,

    n^2 L Y = sum_x eta(x) w_drift(x) + sum_b F_b(eta) grad_b phi,
    w_drift(x) = n^(3/2) (c_x (phi_{x+1} - phi_x) - c_{x-1} (phi_x - phi_{x-1})),
    F_b = (a sqrt(n) / (2 n^gamma)) ((eta(b+1) - eta(b))^2 - 2 chi),

because ``sum_b grad_b phi = 0`` on a ring. The predictable quadratic
variation of the compensated martingale has density
``(1/n) sum_b (grad_b phi)^2 swap_rate_b``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as st

from .fields import WeightSequence, field_weights, transport_shift
from .lattice import ModelParams, Ring
from .simulator import ObservableSet, PathRecord
from .stats import StatSummary

# pattern index 2 eta(x) + eta(x+1): 00, 01, 10, 11
_DIFF_SQ = np.array([0.0, 1.0, 1.0, 0.0])


class MovingFrameError(NotImplementedError):
    """Time-integrated field observables need a frame that does not move."""


def _require_static_frame(p: ModelParams):
    if transport_shift(p, 1.0) != 0.0:
        raise MovingFrameError("time-integrated field estimators need a = 0 or rho = 1/2")


def _phi_on_ring(phi, ring: Ring, n: int) -> np.ndarray:
    return np.asarray(phi(ring.logical() / n), dtype=float)


def bond_gradient(phi, ring: Ring, n: int) -> np.ndarray:
    """``n (phi((x+1)/n) - phi(x/n))`` per bond, cyclic over ring indices."""
    v = _phi_on_ring(phi, ring, n)
    return n * (np.roll(v, -1) - v)


@dataclass
class FieldFamily:
    """Observables needed for the martingale decomposition of ``Y(phi)``."""

    phi: object
    p: ModelParams
    ring: Ring
    prefix: str = "phi"

    def __post_init__(self):
        self.weights = field_weights(self.phi, self.ring, self.p)
        self.grad = bond_gradient(self.phi, self.ring, self.p.n)

    def key(self, part: str) -> str:
        return f"{self.prefix}:{part}"

    def register(self, obs: ObservableSet, parts=("Y", "drift", "B", "qv", "qv_exact")) -> "FieldFamily":
        p, ring, n = self.p, self.ring, self.p.n
        if "Y" in parts:
            obs.add_site(self.key("Y"), self.weights, const=-p.rho * math.fsum(self.weights))
        if any(q in parts for q in ("drift", "B", "qv", "qv_exact")):
            _require_static_frame(p)
        right, left = ring.rates(p)
        cond = 0.5 * (right + left)
        vals = _phi_on_ring(self.phi, ring, n)
        flux = cond * (np.roll(vals, -1) - vals)
        if "drift" in parts:
            obs.add_site(self.key("drift"), n**1.5 * (flux - np.roll(flux, 1)))
        if "B" in parts:
            coef = p.a * math.sqrt(n) / (2.0 * n**p.gamma) * self.grad
            obs.add_pair(self.key("B"), coef[:, None] * (_DIFF_SQ - 2 * p.chi)[None, :])
        if "qv" in parts:
            obs.add_pair(self.key("qv"), self._qv_table())
        if "qv_exact" in parts:
            tab = np.zeros((ring.N, 4))
            tab[:, 1] = left
            tab[:, 2] = right
            obs.add_pair(self.key("qv_exact"), (self.grad**2 / n)[:, None] * tab)
        return self

    def _qv_table(self) -> np.ndarray:
        """``(1/2n) (grad phi)^2`` times ``G_n`` off the slow bond and ``H_n`` on it."""
        p, ring, n = self.p, self.ring, self.p.n
        drift = p.a / n**p.gamma
        G = np.array([0.0, 1.0 + drift, 1.0, 0.0])
        slow = p.alpha / n**p.beta
        H = np.array([0.0, slow + drift, slow, 0.0])
        tab = np.tile(G, (ring.N, 1))
        tab[ring.slow_bond] = H
        return (self.grad**2 / (2.0 * n))[:, None] * tab


def field_value(path: PathRecord, fam: FieldFamily, t: float | None = None) -> float:
    return path.value(fam.key("Y"), t)


def quadratic_variation(path: PathRecord, fam: FieldFamily, p: ModelParams | None = None,
                        t: float | None = None) -> float:
    """Time integral of the quadratic-variation integrand built from ``G_n`` and ``H_n``."""
    return path.integral(fam.key("qv"), t)


def compensator(path: PathRecord, fam: FieldFamily, t: float | None = None) -> float:
    """Exact predictable quadratic variation ``int (1/n) sum_b (grad_b phi)^2 swap_rate_b ds``."""
    return path.integral(fam.key("qv_exact"), t)


def b_field(path: PathRecord, fam: FieldFamily, p: ModelParams | None = None, t: float | None = None) -> float:
    """``int_0^t sum_b F_b(eta_s) grad_b phi ds``."""
    return path.integral(fam.key("B"), t)


def martingale_residual(path: PathRecord, fam: FieldFamily, p: ModelParams | None = None,
                        t: float | None = None) -> float:
    """``Y_t - Y_0 - int_0^t (symmetric drift) ds - B_t``."""
    y = path.value(fam.key("Y"), t) - path.value(fam.key("Y"), 0.0)
    return y - path.integral(fam.key("drift"), t) - path.integral(fam.key("B"), t)


# ---------------------------------------------------------------------------
# Boltzmann-Gibbs


@dataclass
class BGSpec:
    v: WeightSequence
    L: int
    t: float
    params: ModelParams
    name: str = "bg"

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("L must be at least 1")


def register_bg(obs: ObservableSet, spec: BGSpec, ring: Ring) -> None:
    """Integrand ``sum_x v(x) {eta_bar(x) eta_bar(x+1) - (right average over L)^2 + chi / L}``."""
    p = spec.params
    if spec.L + spec.v.values.size >= ring.N:
        raise ValueError("box and weight support do not fit in the ring")
    v = spec.v.on_ring(ring)
    rho = p.rho
    prod = np.array([rho * rho, -rho * (1 - rho), -rho * (1 - rho), (1 - rho) ** 2])
    obs.add_pair(spec.name + ":pair", v[:, None] * prod[None, :], const=p.chi / spec.L * math.fsum(v))
    obs.add_block(spec.name + ":block", spec.L, -v)


def bg_integral(path: PathRecord, spec: BGSpec, t: float | None = None) -> float:
    return path.integral(spec.name + ":pair", t) + path.integral(spec.name + ":block", t)


def bg_statistic(spec: BGSpec, runs) -> StatSummary:
    """Replica summary of the squared time integral."""
    return StatSummary.from_samples([bg_integral(r, spec, spec.t) ** 2 for r in runs])


def bg_bound(spec: BGSpec) -> float:
    """``t {L/n + n^b/(a n) + t n/L^2} |v|^2 + t n^b (log2 L)^2 / (a n) |v|^2_{off slow bond}`` (C = 1)."""
    p, L, t = spec.params, spec.L, spec.t
    n = p.n
    slow = n**p.beta / (p.alpha * n)
    first = t * (L / n + slow + t * n / L**2) * spec.v.norm_sq
    second = t * slow * math.log2(L) ** 2 * spec.v.norm_sq_off_slow
    return first + second


# ---------------------------------------------------------------------------
# energy, pair and two-block statistics


def energy_name(eps_n: int) -> str:
    return f"energy[{eps_n}]"


def register_energy(obs: ObservableSet, phi, p: ModelParams, ring: Ring, eps: float) -> int:
    """Integrand ``sum_x (right average over eps n at x)^2 phi'(x/n)``; returns the box length."""
    L = int(math.floor(eps * p.n + 1e-9))
    if L < 1:
        raise ValueError("eps * n must be at least 1")
    dphi = np.asarray(phi.deriv(ring.logical() / p.n, 1), dtype=float)
    obs.add_block(energy_name(L), L, dphi)
    return L


def energy_quadratic(path: PathRecord, L: int, s: float, t: float) -> float:
    """``A^eps_{s,t}`` for the box length ``L = eps n`` registered by :func:`register_energy`."""
    if L < 1:
        raise ValueError("eps * n must be at least 1")
    return path.integral(energy_name(L), t) - path.integral(energy_name(L), s)


def register_pair(obs: ObservableSet, ring: Ring, p: ModelParams, name: str = "pair") -> None:
    """``eta_bar(-1) eta_bar(0)`` across the slow bond."""
    rho = p.rho
    tab = np.zeros((ring.N, 4))
    tab[ring.slow_bond] = [rho * rho, -rho * (1 - rho), -rho * (1 - rho), (1 - rho) ** 2]
    obs.add_pair(name, tab)


def pair_statistic(runs, t: float, p: ModelParams | None = None, name: str = "pair") -> StatSummary:
    """Replica summary of ``(int_0^t eta_bar(0) eta_bar(-1) ds)^2``."""
    return StatSummary.from_samples([r.integral(name, t) ** 2 for r in runs])


def two_block_name(L: int) -> str:
    return f"two_block[{L}]"


def two_block_weights(phi, p: ModelParams, ring: Ring, L: int) -> np.ndarray:
    """Site weights of ``sqrt(n) sum_{x in L Z} phi'(x/n) {avg(x) - avg(x+L)}`` (right averages)."""
    x = ring.logical()
    lo, hi = x.min(), x.max()
    w = np.zeros(ring.N)
    for j in range(lo // L, hi // L + 1):
        base = j * L
        d = float(phi.deriv(base / p.n, 1)) / L
        if d == 0.0:
            continue
        first = np.arange(base + 1, base + L + 1)
        second = first + L
        for sites, sgn in ((first, 1.0), (second, -1.0)):
            ok = (sites >= lo) & (sites <= hi)
            np.add.at(w, ring.index(sites[ok]), sgn * d)
    return math.sqrt(p.n) * w


def register_two_block(obs: ObservableSet, phi, p: ModelParams, ring: Ring, eps: float) -> int:
    L = int(math.floor(eps * p.n + 1e-9))
    if L < 1:
        raise ValueError("eps * n must be at least 1")
    w = two_block_weights(phi, p, ring, L)
    obs.add_site(two_block_name(L), w, const=-p.rho * math.fsum(w))
    return L


def two_block_statistic(runs, phi, eps: float, t: float, p: ModelParams) -> StatSummary:
    L = int(math.floor(eps * p.n + 1e-9))
    return StatSummary.from_samples([r.integral(two_block_name(L), t) ** 2 for r in runs])


def two_block_bound(phi, eps: float, t: float, p: ModelParams, radius: float | None = None) -> float:
    """``t {(L/n) sum_{x in L Z} v(x)^2 + n^beta/(alpha n) (v(-L)^2 + v(-2L)^2)}`` with ``v = phi'(x/n)`` (C = 1)."""
    n = p.n
    L = int(math.floor(eps * n + 1e-9))
    R = radius if radius is not None else getattr(phi, "radius", 20.0)
    J = int(math.ceil(R * n / L)) + 1
    x = np.arange(-J, J + 1) * L
    v = np.asarray(phi.deriv(x / n, 1), dtype=float)
    vm = np.asarray(phi.deriv(np.array([-L, -2 * L]) / n, 1), dtype=float)
    return t * (L / n * math.fsum(v**2) + n**p.beta / (p.alpha * n) * math.fsum(vm**2))


# ---------------------------------------------------------------------------
# Gaussianity


@dataclass
class MomentReport:
    count: int
    skew_z: float
    kurtosis_z: float
    threshold: float = 4.0
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = abs(self.skew_z) <= self.threshold and abs(self.kurtosis_z) <= self.threshold


def moment_tests(samples, threshold: float = 4.0) -> MomentReport:
    """Standardized skewness and excess-kurtosis z statistics (pass when both are within ``threshold``)."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 100:
        raise ValueError("moment tests need at least 100 samples")
    return MomentReport(int(x.size), float(st.skewtest(x).statistic), float(st.kurtosistest(x).statistic),
                        threshold)
