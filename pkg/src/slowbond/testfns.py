"""Test functions for the three slow-bond regimes and their norms.

A :class:`TestFunction` is smooth away from 0 and right-continuous at 0. It
carries a regime tag:

* ``smooth``: smooth across 0 (Schwartz class)
* ``robin``: odd side derivatives at 0 equal ``alpha`` times the jump of
  the preceding even derivative
* ``neumann``: odd side derivatives vanish at 0

Members of the robin class are produced by running the Robin semigroup for
a short time from a Schwartz seed. Their values and derivatives are stored
as piecewise Chebyshev interpolants built from closed-form kernel
derivatives.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial import chebyshev as cheb
from scipy import integrate

from .lattice import ModelParams

REGIMES = ("smooth", "robin", "neumann")
K_MAX = 4
CONSTRUCTION_TOL = 1e-6


class ConstructionError(ValueError):
    pass


class TestFunction:
    """Function on the line with separate smooth branches on ``u >= 0`` and ``u < 0``.

    Parameters
    ----------
    pos, neg : callable
        ``pos(u, k)`` gives the k-th derivative of the right branch at ``u``
        (used for ``u >= 0``); ``neg(u, k)`` that of the left branch (used
        for ``u < 0``). Both are evaluated at ``u = 0`` to obtain side limits.
    regime : str or None
        One of ``smooth``, ``robin``, ``neumann``; ``None`` leaves it untagged.
    radius : float
        Beyond ``|u| > radius`` the function and its derivatives are below
        double-precision relevance and treated as zero by quadratures.
    """

    __test__ = False  # not a pytest class

    def __init__(self, pos, neg, regime=None, alpha=None, radius=10.0, name="phi", k_max=K_MAX):
        if regime is not None and regime not in REGIMES:
            raise ValueError(f"unknown regime {regime!r}")
        if regime == "robin" and not (alpha and alpha > 0):
            raise ValueError("robin regime needs alpha > 0")
        self._pos = pos
        self._neg = neg
        self.regime = regime
        self.alpha = alpha
        self.radius = float(radius)
        self.name = name
        self.k_max = k_max

    def __repr__(self):
        return f"TestFunction({self.name}, regime={self.regime})"

    def deriv(self, u, k: int = 0):
        """k-th derivative; at ``u = 0`` the right limit."""
        if k < 0:
            raise ValueError("negative derivative order")
        u = np.asarray(u, dtype=float)
        scalar = u.ndim == 0
        u = np.atleast_1d(u)
        out = np.empty(u.shape)
        right = u >= 0
        if right.any():
            out[right] = self._pos(u[right], k)
        if (~right).any():
            out[~right] = self._neg(u[~right], k)
        return float(out[0]) if scalar else out

    def __call__(self, u):
        return self.deriv(u, 0)

    def side_limits(self, k: int = 0) -> tuple[float, float]:
        """``(phi^(k)(0-), phi^(k)(0+))``."""
        z = np.zeros(1)
        return float(self._neg(z, k)[0]), float(self._pos(z, k)[0])

    def derivative(self, k: int = 1) -> "TestFunction":
        """The k-th derivative as a new function (regime kept for even k)."""
        pos, neg = self._pos, self._neg
        regime = self.regime if k % 2 == 0 else None
        return TestFunction(lambda u, j: pos(u, j + k), lambda u, j: neg(u, j + k), regime, self.alpha,
                            self.radius, f"{self.name}^({k})", max(self.k_max - k, 0))

    def scaled(self, c: float) -> "TestFunction":
        pos, neg = self._pos, self._neg
        return TestFunction(lambda u, j: c * pos(u, j), lambda u, j: c * neg(u, j), self.regime, self.alpha,
                            self.radius, f"{c}*{self.name}", self.k_max)

    def sample_grid(self, U: float | None = None, m: int = 4001) -> np.ndarray:
        U = self.radius if U is None else U
        g = np.linspace(-U, U, m)
        return np.concatenate([g, [-1e-12, 1e-12]])

    def seminorm(self, k: int, ell: int, U: float | None = None) -> float:
        """Sampled ``sup (1 + |u|^ell) |phi^(k)(u)|`` over ``|u| <= U`` and both side limits."""
        u = self.sample_grid(U)
        vals = (1 + np.abs(u) ** ell) * np.abs(self.deriv(u, k))
        return float(max(vals.max(), *map(abs, self.side_limits(k))))

    def tail_sup(self, U: float, k: int = 0, ell: int = 0) -> float:
        """Sampled ``sup_{|u| > U} (1 + |u|^ell) |phi^(k)(u)|``; zero past the radius."""
        hi = max(self.radius, U) + 1.0
        u = np.linspace(U, hi, 2001)
        u = np.concatenate([u, -u])
        return float(np.max((1 + np.abs(u) ** ell) * np.abs(self.deriv(u, k))))


# ---------------------------------------------------------------------------
# polynomial times Gaussian


class _PolyGauss:
    """``P(u) exp(-(u - c)^2 / (2 s^2))`` with all derivatives in closed form."""

    def __init__(self, poly: Polynomial, center: float, sigma: float):
        self.center = center
        self.sigma = sigma
        self.polys = [poly]
        lin = Polynomial([-center, 1.0]) / sigma**2
        for _ in range(K_MAX + 6):
            q = self.polys[-1]
            self.polys.append(q.deriv() - q * lin)

    def __call__(self, u, k):
        u = np.asarray(u, dtype=float)
        while k >= len(self.polys):
            q = self.polys[-1]
            self.polys.append(q.deriv() - q * Polynomial([-self.center, 1.0]) / self.sigma**2)
        z = (u - self.center) / self.sigma
        return self.polys[k](u) * np.exp(-0.5 * z * z)

    def radius(self) -> float:
        deg = self.polys[0].degree()
        return abs(self.center) + self.sigma * (math.sqrt(2 * 40 * math.log(10)) + 2 * deg + 2)


def gaussian(sigma: float = 1.0, center: float = 0.0, amplitude: float = 1.0) -> TestFunction:
    """``amplitude * exp(-(u - center)^2 / (2 sigma^2))``."""
    pg = _PolyGauss(Polynomial([amplitude]), center, sigma)
    return TestFunction(pg, pg, "smooth", radius=pg.radius(), name=f"gaussian({sigma},{center})")


def hermite_gaussian(order: int, sigma: float = 1.0, center: float = 0.0, amplitude: float = 1.0) -> TestFunction:
    """``amplitude * He_order(z) exp(-z^2 / 2)`` with ``z = (u - center) / sigma``."""
    he = np.polynomial.hermite_e.herme2poly([0] * order + [1])
    poly = Polynomial(he)
    # substitute z = (u - c) / sigma
    lin = Polynomial([-center / sigma, 1.0 / sigma])
    p_u = sum((coef * lin**j for j, coef in enumerate(poly.coef)), Polynomial([0.0]))
    pg = _PolyGauss(amplitude * p_u, center, sigma)
    return TestFunction(pg, pg, "smooth", radius=pg.radius(), name=f"hermite_gaussian({order},{sigma},{center})")


def neumann_pair(A: float = 1.0, B: float = -1.0, sigma: float = 1 / math.sqrt(2)) -> TestFunction:
    """``A exp(-u^2/(2 sigma^2))`` for ``u >= 0`` and ``B exp(-u^2/(2 sigma^2))`` for ``u < 0``."""
    right = _PolyGauss(Polynomial([A]), 0.0, sigma)
    left = _PolyGauss(Polynomial([B]), 0.0, sigma)
    return TestFunction(right, left, "neumann", radius=right.radius(), name=f"neumann_pair({A},{B})")


class _HalfLineInterpolant:
    """Piecewise Chebyshev interpolation of ``v -> f(v)`` on ``[0, U]``, zero beyond."""

    def __init__(self, f: Callable, U: float, width: float = 0.25, degree: int = 24):
        self.U = U
        self.npan = max(1, int(math.ceil(U / width)))
        self.width = U / self.npan
        nodes = np.cos(np.pi * (np.arange(degree + 1) + 0.5) / (degree + 1))[::-1]
        V = cheb.chebvander(nodes, degree)
        left = self.width * np.arange(self.npan)
        pts = left[:, None] + self.width * (nodes[None, :] + 1) / 2
        vals = f(pts.ravel()).reshape(self.npan, degree + 1)
        self.coef = np.linalg.solve(V, vals.T)  # (degree+1, npan)

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        idx = np.clip((v / self.width).astype(int), 0, self.npan - 1)
        loc = 2 * (v - idx * self.width) / self.width - 1
        out = cheb.chebval(loc, self.coef[:, idx], tensor=False)
        return np.where(v > self.U, 0.0, out)


def robin_smoothed(seed: TestFunction, s: float, alpha: float, quad_tol: float = 1e-10,
                   k_max: int = K_MAX) -> TestFunction:
    """``T^alpha_s seed`` for the Robin semigroup, as a member of the robin regime."""
    from .semigroup import KernelSpec, semigroup_apply

    if s <= 0:
        raise ConstructionError("smoothing time must be positive")
    spec = KernelSpec("robin", alpha, quad_tol)
    U = seed.radius + spec.window * math.sqrt(s) + 1.0
    width = min(0.25, 0.75 * math.sqrt(s))
    pos, neg = [], []
    for k in range(k_max + 3):
        pos.append(_HalfLineInterpolant(lambda v, k=k: semigroup_apply(seed, s, v, spec, k), U, width))
        neg.append(_HalfLineInterpolant(
            lambda v, k=k: semigroup_apply(seed, s, -v, spec, k, side=-1.0), U, width))
    lim_pos = [semigroup_apply(seed, s, np.zeros(1), spec, k, side=1.0)[0] for k in range(k_max + 3)]
    lim_neg = [semigroup_apply(seed, s, np.zeros(1), spec, k, side=-1.0)[0] for k in range(k_max + 3)]

    def f_pos(u, k):
        u = np.asarray(u, dtype=float)
        return np.where(u == 0, lim_pos[k], pos[k](u))

    def f_neg(u, k):
        u = np.asarray(u, dtype=float)
        return np.where(u == 0, lim_neg[k], neg[k](-u))

    return TestFunction(f_pos, f_neg, "robin", alpha, radius=U, name=f"robin_smoothed({seed.name},{s},{alpha})",
                        k_max=k_max)


def make_test_function(kind: str, **params) -> TestFunction:
    """Build a named family member and verify its boundary conditions.

    Kinds: ``gaussian``, ``hermite-gaussian``, ``neumann-pair``,
    ``robin-smoothed`` (params ``seed`` (a TestFunction or a dict of
    gaussian/hermite-gaussian params), ``s``, ``alpha``).
    """
    kind = kind.replace("_", "-")
    if kind == "gaussian":
        phi = gaussian(**params)
    elif kind == "hermite-gaussian":
        phi = hermite_gaussian(**params)
    elif kind == "neumann-pair":
        phi = neumann_pair(**params)
    elif kind == "robin-smoothed":
        params = dict(params)
        seed = params.pop("seed", None)
        if seed is None:
            seed = gaussian(0.5, 0.4)
        elif isinstance(seed, dict):
            seed = dict(seed)
            seed_kind = seed.pop("kind", "gaussian")
            seed = make_test_function(seed_kind, **seed)
        phi = robin_smoothed(seed, **params)
    else:
        raise ConstructionError(f"unknown test function kind {kind!r}")
    res = boundary_residual(phi, phi.alpha)
    if res > CONSTRUCTION_TOL:
        raise ConstructionError(f"{phi.name}: boundary residual {res:.3e} exceeds {CONSTRUCTION_TOL}")
    return phi


def _fd_side_derivatives(phi: TestFunction, k_max: int, h: float = 1e-3):
    """One-sided fourth-order finite-difference side derivatives at 0."""
    # forward difference weights for the first derivative, order 4
    w1 = np.array([-25, 48, -36, 16, -3]) / 12.0
    out = []
    for k in range(k_max + 1):
        if k == 0:
            out.append(phi.side_limits(0))
            continue
        base = phi.derivative(k - 1)
        pts = h * np.arange(5)
        right = float(np.dot(w1, base.deriv(pts + 0.0, 0)) / h)
        left = float(-np.dot(w1, base.deriv(-pts - 1e-300, 0)) / h)
        out.append((left, right))
    return out


def boundary_residual(phi: TestFunction, alpha: float | None = None, k_max: int = K_MAX,
                      side_derivs: list | None = None) -> float:
    """Largest violation of the declared regime's boundary conditions up to order ``k_max``."""
    if phi.regime is None:
        raise ValueError("untagged function has no boundary conditions")
    lim = side_derivs if side_derivs is not None else [phi.side_limits(k) for k in range(k_max + 1)]
    res = 0.0
    if phi.regime == "smooth":
        for lo, hi in lim:
            res = max(res, abs(hi - lo))
    elif phi.regime == "neumann":
        for k in range(1, k_max + 1, 2):
            res = max(res, abs(lim[k][0]), abs(lim[k][1]))
    else:
        a = phi.alpha if alpha is None else alpha
        for k in range(0, k_max, 2):
            jump = lim[k][1] - lim[k][0]
            lo, hi = lim[k + 1]
            res = max(res, abs(hi - a * jump), abs(lo - a * jump))
    return float(res)


def norm_2beta(phi: TestFunction, p: ModelParams, tol: float = 1e-9) -> float:
    """``int phi^2 + 1_{beta=1} (phi(0+)^2 / alpha + 1_{gamma=1} a phi(0+)^2 / alpha^2)``."""
    R = phi.radius
    f = lambda u: float(phi(u)) ** 2
    pts = None
    parts = []
    for lo, hi in ((-R, 0.0), (0.0, R)):
        val, err = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=tol, limit=400, points=pts)
        if err > 10 * tol * max(abs(val), 1e-300) and err > 1e-15:
            raise ArithmeticError("quadrature did not converge")
        parts.append(val)
    val = math.fsum(parts)
    if p.beta == 1:
        v0 = phi.side_limits(0)[1]
        val += v0**2 / p.alpha + (p.a * v0**2 / p.alpha**2 if p.gamma == 1 else 0.0)
    return val


def preset(name: str, alpha: float | None = None) -> TestFunction:
    """Named test functions referenced by experiment configs.

    Robin presets are built for the slow-bond strength ``alpha`` (default 1).
    """
    al = 1.0 if alpha is None else alpha
    table = {
        "gauss": lambda: gaussian(1.0 / math.sqrt(2)),
        "gauss-narrow": lambda: gaussian(0.5),
        "gauss-shifted": lambda: gaussian(0.4, 0.3),
        "hermite1": lambda: hermite_gaussian(1, 0.4),
        "neumann": lambda: neumann_pair(1.0, -1.0, 0.5),
        "neumann-even": lambda: neumann_pair(1.0, 1.0, 0.5),
        "neumann-half": lambda: neumann_pair(1.0, 0.5, 0.5),
        "robin": lambda: robin_smoothed(gaussian(0.35, 0.3), 0.05, al),
        "robin-odd": lambda: robin_smoothed(hermite_gaussian(1, 0.35), 0.05, al),
    }
    if name not in table:
        raise KeyError(f"unknown test function preset {name!r}")
    return table[name]()


PRESET_NAMES = ("gauss", "gauss-narrow", "gauss-shifted", "hermite1", "neumann", "neumann-even", "neumann-half",
                "robin", "robin-odd")
