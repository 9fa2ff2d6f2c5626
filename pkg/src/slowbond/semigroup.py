"""Heat semigroups on the line with free, Neumann, Dirichlet or Robin behavior at 0.

All semigroups solve ``u_t = u_xx / 2``. Every kernel is written as an
integral over ``y >= 0`` against ``g(y)`` and ``g(-y)``, which keeps the
one-sided kernels and the free kernel on one code path.

Robin kernel
------------
For the flux condition ``u_x(0+) = u_x(0-) = alpha (u(0+) - u(0-))`` the even
part of ``g`` evolves freely and the odd part solves the half-line problem
``v_x(0) = 2 alpha v(0)``. The half-line kernel is the Neumann kernel minus

    R(x, y) = 2 alpha * erfcx(B) * exp(-(x + y)^2 / 2t),
    B = (x + y + 2 alpha t) / sqrt(2 t),

which follows from integrating the exponential-weighted image source in
closed form. For ``x > 0`` this gives

    T g(x) = int_0^inf N(x, y) g(y) dy - int_0^inf R(x, y) g_odd(y) dy

with ``N(x, y) = G(x - y) + G(x + y)``; for ``x < 0`` replace ``g(y)`` by
``g(-y)``, ``x`` by ``|x|`` and flip the sign of the ``R`` term.
:func:`robin_double_integral` evaluates the nested-integral form of the same
semigroup and serves as an independent check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, special

from .lattice import ModelParams

KINDS = ("free", "neumann", "dirichlet", "robin")
SMALL_T = 1e-4
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_CHUNK = 256


class QuadratureError(RuntimeError):
    pass


class RegimeMismatch(ValueError):
    pass


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "free"
    alpha: float | None = None
    quad_tol: float = 1e-8

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if not 0 < self.quad_tol <= 1e-4:
            raise ValueError("quad_tol must lie in (0, 1e-4]")
        if self.kind == "robin" and not (self.alpha and self.alpha > 0):
            raise ValueError("robin kernel needs alpha > 0")

    @property
    def window(self) -> float:
        """Gaussian tail cutoff in units of sqrt(t)."""
        return math.sqrt(2.0 * math.log(1.0 / self.quad_tol) + 2.0 * math.log(1e4))


def kernel_for(p: ModelParams, quad_tol: float = 1e-8) -> KernelSpec:
    """Kernel of the limiting equation in the slow-bond regime of ``p``."""
    if p.beta < 1:
        return KernelSpec("free", quad_tol=quad_tol)
    if p.beta == 1:
        return KernelSpec("robin", p.alpha, quad_tol)
    return KernelSpec("neumann", quad_tol=quad_tol)


def regime_for(p: ModelParams) -> str:
    return {"free": "smooth", "robin": "robin", "neumann": "neumann"}[kernel_for(p).kind]


# ---------------------------------------------------------------------------
# kernel derivatives


def _gauss_deriv(z, t, k):
    """k-th derivative of the centered Gaussian density with variance t."""
    s = math.sqrt(2.0 * t)
    w = z / s
    base = np.exp(-w * w) / math.sqrt(2.0 * math.pi * t)
    if k == 0:
        return base
    h = special.eval_hermite(k, w)
    return (-1.0 / s) ** k * h * base


def _robin_deriv(s_, t, alpha, k):
    """k-th derivative in s of R = 2 alpha erfcx(B) exp(-s^2/2t)."""
    a2 = 2.0 * alpha
    B = (s_ + a2 * t) / math.sqrt(2.0 * t)
    f = special.erfcx(B) * np.exp(-s_ * s_ / (2.0 * t))
    out = a2**k * f
    if k:
        c = 2.0 / math.sqrt(2.0 * math.pi * t)
        sq = math.sqrt(2.0 * t)
        w = s_ / sq
        e = np.exp(-w * w)
        for j in range(k):
            ej = e if j == 0 else (-1.0 / sq) ** j * special.eval_hermite(j, w) * e
            out = out - c * a2 ** (k - 1 - j) * ej
    return a2 * out


def _kernel_terms(spec: KernelSpec, t: float, x, y, k: int, side):
    """Kernels multiplying g(y), g(-y) and g_odd(y) for evaluation points x.

    ``x`` is |x| for one-sided kernels; ``side`` (+1/-1) selects the branch.
    """
    if spec.kind == "free":
        return _gauss_deriv(x - y, t, k), _gauss_deriv(x + y, t, k), None
    sign = side if k % 2 else 1.0  # d^k/dx^k of F(|x|) for x < 0
    gm, gp = _gauss_deriv(x - y, t, k), _gauss_deriv(x + y, t, k)
    if spec.kind == "neumann":
        ker = sign * (gm + gp)
    elif spec.kind == "dirichlet":
        ker = sign * (gm - gp)
    else:
        ker = sign * (gm + gp)
        odd = -side * sign * _robin_deriv(x + y, t, spec.alpha, k)
        pos = np.where(side > 0, ker, 0.0)
        neg = np.where(side > 0, 0.0, ker)
        return pos, neg, odd
    pos = np.where(side > 0, ker, 0.0)
    neg = np.where(side > 0, 0.0, ker)
    return pos, neg, None


def _radius(g) -> float:
    return float(getattr(g, "radius", 30.0))


def _panel_grid(a, b, m):
    h = (b - a) / m
    left = a[:, None] + h[:, None] * np.arange(m)[None, :]
    nodes = left[:, :, None] + h[:, None, None] * (_GL_X + 1.0) / 2.0
    weights = np.broadcast_to(h[:, None, None] * _GL_W / 2.0, nodes.shape)
    return nodes.reshape(a.size, -1), weights.reshape(a.size, -1)


def _quad_chunk(g, t, x, spec, k, side):
    """Composite Gauss-Legendre over y >= 0 with panel doubling."""
    xa = np.abs(x) if spec.kind != "free" else x
    centre = np.abs(x)
    W = spec.window * math.sqrt(t)
    Rg = _radius(g)
    a = np.maximum(0.0, centre - W)
    b = np.minimum(centre + W, Rg)
    empty = b <= a
    a = np.where(empty, 0.0, a)
    b = np.where(empty, 1.0, b)

    def integral(m):
        y, w = _panel_grid(a, b, m)
        gp, gn = g(y), g(-y)
        pos, neg, odd = _kernel_terms(spec, t, xa[:, None], y, k, side[:, None])
        val = pos * gp + neg * gn
        if odd is not None:
            val = val + odd * 0.5 * (gp - gn)
        return np.sum(w * val, axis=1)

    m = 4
    prev = integral(m)
    while True:
        m *= 2
        cur = integral(m)
        scale = max(float(np.max(np.abs(cur))), 1e-300)
        err = float(np.max(np.abs(cur - prev)))
        if err <= spec.quad_tol * 1e-2 * scale or m >= 1024:
            break
        prev = cur
    if err > spec.quad_tol * scale:
        raise QuadratureError(f"semigroup quadrature did not converge (err {err:.2e})")
    return np.where(empty, 0.0, cur)


def semigroup_apply(g: Callable, t: float, x, spec: KernelSpec = KernelSpec(), deriv: int = 0, side=None):
    """``d^k/dx^k (T_t g)(x)``; one-sided kernels evaluate ``x = 0`` as ``0+``.

    ``side`` may force the branch (+1 or -1) for points at 0, which gives
    the left limit at the origin.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    if side is None:
        sd = np.where(x_arr < 0, -1.0, 1.0)
    else:
        sd = np.broadcast_to(np.asarray(side, dtype=float), x_arr.shape).copy()
    if t < SMALL_T and hasattr(g, "deriv"):
        out = _small_t(g, t, x_arr, deriv, sd)
    elif t == 0:
        raise QuadratureError("t = 0 needs a function with a deriv method")
    else:
        out = np.concatenate([_quad_chunk(g, t, x_arr[i:i + _CHUNK], spec, deriv, sd[i:i + _CHUNK])
                              for i in range(0, x_arr.size, _CHUNK)]) if x_arr.size else x_arr
    return float(out[0]) if np.ndim(x) == 0 else out


def _small_t(g, t, x, k, side):
    at0 = x == 0
    xe = np.where(at0, np.where(side < 0, -0.0, 0.0), x)
    val = g.deriv(xe, k)
    if t:
        val = val + 0.5 * t * g.deriv(xe, k + 2)
    if np.any(at0 & (side < 0)):
        lo = g.side_limits(k)[0] + (0.5 * t * g.side_limits(k + 2)[0] if t else 0.0)
        val = np.where(at0 & (side < 0), lo, val)
    return val


def side_limits(g, t: float, spec: KernelSpec, deriv: int = 0) -> tuple[float, float]:
    """``(d^k T_t g(0-), d^k T_t g(0+))``."""
    lo = semigroup_apply(g, t, np.array([0.0]), spec, deriv, side=-1.0)[0]
    hi = semigroup_apply(g, t, np.array([0.0]), spec, deriv, side=1.0)[0]
    return float(lo), float(hi)


def robin_double_integral(g: Callable, t: float, x: float, alpha: float, tol: float = 1e-10) -> float:
    """Nested-integral form of the Robin semigroup at a single point.

    Slow, used only to check :func:`semigroup_apply`. Even part by a free
    Gaussian convolution, odd part through the Dirichlet problem for
    ``2 alpha u - u_x`` integrated back against ``exp(-2 alpha (z - |x|))``.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    st = math.sqrt(t)
    Rg = _radius(g)
    c = 1.0 / math.sqrt(2.0 * math.pi * t)

    def even(y):
        return 0.5 * (g(y) + g(-y))

    def odd(y):
        return 0.5 * (g(y) - g(-y))

    even_part = c * integrate.quad(lambda y: math.exp(-(x - y) ** 2 / (2 * t)) * even(y),
                                   x - 10 * st, x + 10 * st, epsabs=tol, epsrel=tol, limit=200)[0]

    def inner(z):
        lo, hi = max(0.0, z - 9 * st), min(Rg, z + 9 * st)
        if hi <= lo:
            return 0.0

        def f(y):
            return (((z - y + 2 * alpha * t) / t) * math.exp(-(z - y) ** 2 / (2 * t))
                    + ((z + y - 2 * alpha * t) / t) * math.exp(-(z + y) ** 2 / (2 * t))) * odd(y)

        return integrate.quad(f, lo, hi, epsabs=tol * 1e-2, epsrel=tol, limit=200)[0]

    xa = abs(x)
    zmax = min(xa + math.log(1.0 / tol) / (2 * alpha), Rg + 10 * st)
    if zmax <= xa:
        outer = 0.0
    else:
        outer = integrate.quad(lambda z: math.exp(-2 * alpha * (z - xa)) * inner(z), xa, zmax,
                               epsabs=tol, epsrel=tol, limit=200)[0]
    return even_part + (c * outer if x >= 0 else -c * outer)


# ---------------------------------------------------------------------------
# OU predictors


def _gl_integral(f, lo, hi, tol, m0=16):
    """Composite Gauss-Legendre on [lo, hi] with doubling until stable."""
    if hi <= lo:
        return 0.0

    def run(m):
        y, w = _panel_grid(np.array([lo]), np.array([hi]), m)
        return float(np.sum(w[0] * f(y[0])))

    m, prev = m0, run(m0)
    while True:
        m *= 2
        cur = run(m)
        if abs(cur - prev) <= tol * max(abs(cur), 1e-300) or m >= 4096:
            if abs(cur - prev) > 10 * tol * max(abs(cur), 1e-300) and abs(cur - prev) > 1e-14:
                raise QuadratureError("line integral did not converge")
            return cur
        prev = cur


def _line_integral(f, radius, tol):
    """Integral over the line split at 0."""
    return _gl_integral(f, -radius, 0.0, tol) + _gl_integral(f, 0.0, radius, tol)


def check_regime(phi, p: ModelParams):
    want = regime_for(p)
    got = getattr(phi, "regime", None)
    if got is not None and got != want:
        if not (got == "smooth" and want == "neumann" and _is_even_smooth(phi)):
            raise RegimeMismatch(f"test function regime {got!r} does not match {want!r}")


def _is_even_smooth(phi) -> bool:
    u = np.linspace(0.01, 3.0, 7)
    return bool(np.allclose(phi(u), phi(-u), rtol=0, atol=1e-12))


def ou_covariance(phi, psi, t: float, p: ModelParams, spec: KernelSpec | None = None) -> float:
    """``chi(rho) * int (T_t phi)(u) psi(u) du``."""
    check_regime(phi, p)
    check_regime(psi, p)
    spec = spec or kernel_for(p)
    R = _radius(psi)
    if t == 0:
        f = lambda u: phi(u) * psi(u)
    else:
        f = lambda u: semigroup_apply(phi, t, u, spec) * psi(u)
    return p.chi * _line_integral(f, R, spec.quad_tol * 0.1)


def gradient_norm_sq(phi, t: float, p: ModelParams, spec: KernelSpec | None = None) -> float:
    """``|| grad_beta T_t phi ||^2_{2,beta}`` including the point mass at 0 when beta = 1."""
    spec = spec or kernel_for(p)
    R = _radius(phi) + spec.window * math.sqrt(t)
    if t == 0:
        d = lambda u: phi.deriv(u, 1)
        d0 = phi.deriv(np.array([0.0]), 1)[0]
    else:
        d = lambda u: semigroup_apply(phi, t, u, spec, deriv=1)
        d0 = semigroup_apply(phi, t, np.array([0.0]), spec, deriv=1)[0]
    val = _line_integral(lambda u: d(u) ** 2, R, spec.quad_tol * 0.1)
    if p.beta == 1:
        val += d0**2 / p.alpha + (p.a * d0**2 / p.alpha**2 if p.gamma == 1 else 0.0)
    return val


def ou_variance(phi, t: float, p: ModelParams, spec: KernelSpec | None = None) -> float:
    """``int_0^t || grad_beta T_r phi ||^2_{2,beta} dr`` (no chi(rho) factor)."""
    check_regime(phi, p)
    if t == 0:
        return 0.0
    spec = spec or kernel_for(p)
    val, err = integrate.quad(lambda r: gradient_norm_sq(phi, r, p, spec), 0.0, t, epsrel=1e-6, epsabs=0.0,
                              limit=100)
    if err > 1e-5 * abs(val):
        raise QuadratureError("time quadrature did not converge")
    return val
