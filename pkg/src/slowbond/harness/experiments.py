"""Experiment kinds: each turns a config into report rows with verdicts."""
from __future__ import annotations

import math
import time
from functools import lru_cache

import numpy as np
from scipy import linalg

from .. import estimators as est
from ..fields import WeightSequence, field_weights, fluctuation_field, transport_shift
from ..lattice import LocalFunction, config_to_state, invariance_residual, ring_generator, \
    ring_stationary_residual, state_to_config
from ..semigroup import (KernelSpec, RegimeMismatch, gradient_norm_sq, ou_covariance, regime_for, semigroup_apply,
                         side_limits)
from ..simulator import ObservableSet, SimSpec, advance, replica_rng, run_paths
from ..stats import StatSummary
from ..testfns import gaussian, hermite_gaussian, preset
from .config import REGIONS, BudgetExceeded, ConfigError, ExperimentConfig, dumps
from .report import Report, Row

AUTO_PHI = {"smooth": "gauss-narrow", "robin": "robin", "neumann": "neumann"}
AUTO_PSI = {"smooth": "gauss-shifted", "robin": "robin-odd", "neumann": "neumann-half"}
DEFAULT_TOL = {"invariance": 1e-13, "ring": 1e-12, "qv": 0.05, "z": 3.0}
DEFAULT_FACTOR = {"crossover-scan": 1.3, "pair-decay": 1.8}
DEFAULT_SPREAD = {"crossover-scan": 0.25, "bg-scan": 2.0, "energy": 2.0}
MOMENT_THRESHOLD = 4.0


@lru_cache(maxsize=32)
def test_function(name: str, alpha: float):
    return preset(name, alpha=alpha)


def function_for(name: str, p, auto: dict):
    if name in ("", "auto"):
        name = auto[regime_for(p)]
    return test_function(name, float(p.alpha))


def point_seed(master: int, index: int) -> int:
    """Seed of grid point ``index``, derived so that grid points use unrelated streams."""
    return int(np.random.SeedSequence([master, index]).generate_state(1, np.uint64)[0] >> 1)


def _opt(x: float, default: float) -> float:
    return default if math.isnan(x) else x


def _regions(cfg: ExperimentConfig) -> tuple:
    if cfg.grid_regions:
        return cfg.grid_regions
    return (cfg.region,) if cfg.region else ("",)


def _label(region: str, **extra) -> str:
    parts = [region] if region else []
    parts += [f"{k}={v}" for k, v in extra.items()]
    return "[" + ",".join(parts) + "]" if parts else ""


# ---------------------------------------------------------------------------
# cost


def _sim_points(cfg: ExperimentConfig):
    """``(params, ring_size, t_final)`` of every simulated grid point."""
    kind = cfg.kind
    if kind in ("invariance", "semigroup"):
        return []
    tmax = max(cfg.grid_t)
    out = []
    if kind == "exactness":
        for r in _regions(cfg):
            for N in cfg.grid_ring or (6,):
                out.append((cfg.params_at(cfg.ns[0], region=r or None), N, cfg.grid_t[0]))
        return out
    gammas = cfg.grid_gamma if kind == "crossover-scan" else (None,)
    for r in _regions(cfg):
        for g in gammas:
            for n in cfg.ns:
                out.append((cfg.params_at(n, g, r or None), cfg.K * n, tmax))
    return out


def estimate_events(cfg: ExperimentConfig) -> float:
    """Upper bound on attempted swaps: replicas x ring size x n^2 x t x largest rate."""
    return float(sum(cfg.replicas * N * p.n**2 * t * p.max_rate for p, N, t in _sim_points(cfg)))


def check_budget(cfg: ExperimentConfig) -> float:
    cost = estimate_events(cfg)
    if cost > cfg.budget_events:
        raise BudgetExceeded(f"estimated {cost:.3g} events exceeds the budget of {cfg.budget_events:.3g}")
    return cost


# ---------------------------------------------------------------------------
# exact kinds


def random_local_function(rng: np.random.Generator, max_width: int = 4) -> LocalFunction:
    width = int(rng.integers(1, max_width + 1))
    start = int(rng.integers(-max_width, 2))
    return LocalFunction(start, rng.standard_normal(2**width))


def run_invariance(cfg: ExperimentConfig, report: Report):
    tol = _opt(cfg.tol, DEFAULT_TOL["invariance"])
    regions = cfg.grid_regions or tuple(REGIONS)
    for r in regions:
        for n in cfg.ns:
            p = cfg.params_at(n, region=r or None)
            if cfg.grid_functions:
                rng = np.random.default_rng(_seed(cfg, report, f"invariance{_label(r, n=n)}"))
                worst = max(abs(invariance_residual(p, random_local_function(rng)))
                            for _ in range(cfg.grid_functions))
                report.add(Row(f"invariance_residual{_label(r)}", worst, 0.0, rule=f"abs<={tol!r}", n=n, L=4))
            for N in cfg.grid_ring:
                res = max(ring_stationary_residual(p, N, k) for k in range(N + 1))
                report.add(Row(f"ring_stationary_residual{_label(r, N=N)}", res, 0.0,
                               rule=f"abs<={DEFAULT_TOL['ring']!r}", n=n, L=N))


def transition_row(p, N: int, t: float, start: int) -> np.ndarray:
    """Exact law of the state at time ``t`` from ``start`` (index = state bitmask)."""
    _, Q = ring_generator(p, N, diffusive=True)
    return linalg.expm(Q * t)[start]


def run_exactness(cfg: ExperimentConfig, report: Report):
    t = cfg.grid_t[0]
    R = cfg.replicas
    for r in _regions(cfg):
        for N in cfg.grid_ring or (6,):
            p = cfg.params_at(cfg.ns[0], region=r or None)
            seed = _seed(cfg, report, f"exactness{_label(r, N=N)}")
            exact = transition_row(p, N, t, cfg.grid_start)
            init = state_to_config(cfg.grid_start, N)
            counts = np.zeros(2**N)
            for k in range(R):
                final, _ = advance(init, p, t, replica_rng(seed, k))
                counts[config_to_state(final)] += 1
            tv = 0.5 * float(np.abs(counts / R - exact).sum())
            bound = 4.0 * math.sqrt(2**N / R)
            report.add(Row(f"tv_distance{_label(r, N=N)}", tv, bound, rule="le", n=p.n, L=N, t=t))


# ---------------------------------------------------------------------------
# semigroup oracle suite


class _Evolved:
    """``u -> (T_t g)(u)`` as a plain callable for nested semigroup checks."""

    def __init__(self, g, t, spec):
        self.g, self.t, self.spec = g, t, spec
        self.radius = float(getattr(g, "radius", 30.0)) + spec.window * math.sqrt(t)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return np.asarray(semigroup_apply(self.g, self.t, u.ravel(), self.spec)).reshape(u.shape)


def semigroup_checks(alpha: float = 1.0, quad_tol: float = 1e-10) -> list[Row]:
    rows = []
    free = KernelSpec("free", quad_tol=quad_tol)
    neu = KernelSpec("neumann", quad_tol=quad_tol)
    dirichlet = KernelSpec("dirichlet", quad_tol=quad_tol)
    rob = KernelSpec("robin", alpha, quad_tol)
    x = np.linspace(-2.0, 2.0, 9)

    sigma = 0.5
    g = gaussian(sigma)
    worst = 0.0
    for t in (0.05, 0.5, 2.0):
        exact = sigma / math.sqrt(sigma**2 + t) * np.exp(-x**2 / (2 * (sigma**2 + t)))
        worst = max(worst, float(np.max(np.abs(semigroup_apply(g, t, x, free) / exact - 1))))
    rows.append(Row("gaussian_closed_form_relerr", worst, 0.0, rule="abs<=1e-08"))

    s, t = 0.1, 0.2
    xs = np.array([-0.7, -0.2, 0.3, 1.0])
    for name, spec, fn in (("free", free, g), ("robin", rob, preset("robin", alpha)),
                           ("neumann", neu, preset("neumann"))):
        two = semigroup_apply(_Evolved(fn, t, spec), s, xs, spec)
        one = semigroup_apply(fn, s + t, xs, spec)
        rows.append(Row(f"semigroup_property[{name}]", float(np.max(np.abs(two - one))), 0.0,
                        rule="abs<=1e-07", t=s + t))

    even, odd = gaussian(0.5), hermite_gaussian(1, 0.4)
    for name, spec, fn in (("neumann_even", neu, even), ("dirichlet_odd", dirichlet, odd)):
        worst = 0.0
        for t in (0.05, 0.5):
            diff = semigroup_apply(fn, t, x, spec) - semigroup_apply(fn, t, x, free)
            worst = max(worst, float(np.max(np.abs(diff))))
        rows.append(Row(f"image_identity[{name}]", worst, 0.0, rule="abs<=1e-08"))

    phi = preset("robin", alpha)
    worst = 0.0
    for t in (0.05, 0.3, 1.0):
        lo, hi = side_limits(phi, t, rob, 0)
        dlo, dhi = side_limits(phi, t, rob, 1)
        worst = max(worst, abs(dlo - alpha * (hi - lo)), abs(dhi - alpha * (hi - lo)))
    rows.append(Row("robin_flux_residual", worst, 0.0, rule="abs<=0.0001"))

    jump = preset("neumann-half")
    weak = KernelSpec("robin", 1e-3, quad_tol)
    worst = 0.0
    for t in (0.1, 0.5):
        worst = max(worst, float(np.max(np.abs(semigroup_apply(jump, t, x, weak) - semigroup_apply(jump, t, x, neu)))))
    rows.append(Row("robin_to_neumann[alpha=0.001]", worst, 0.0, rule="abs<=0.001"))

    for name, spec, fn, coef in (("robin", rob, phi, alpha), ("neumann", neu, preset("neumann"), 0.0)):
        worst = 0.0
        t = 0.5
        for k in (2, 4):
            lo, hi = side_limits(fn, t, spec, k)
            dlo, dhi = side_limits(fn, t, spec, k + 1)
            worst = max(worst, abs(dlo - coef * (hi - lo)), abs(dhi - coef * (hi - lo)))
        rows.append(Row(f"laplacian_closure[{name}]", worst, 0.0, rule="abs<=1e-07", t=t))
    return rows


def run_semigroup(cfg: ExperimentConfig, report: Report):
    for row in semigroup_checks(cfg.alpha):
        report.add(row)


# ---------------------------------------------------------------------------
# Monte Carlo kinds


def _spec(cfg, p, seed, record, checkpoints=(), snapshots=False, t_final=None):
    tmax = t_final if t_final is not None else max(cfg.grid_t)
    return SimSpec(p, tmax, seed, cfg.K, record, tuple(checkpoints), snapshots)


def _seed(cfg, report, label) -> int:
    s = point_seed(cfg.seed, len(report.seeds))
    report.seeds[label] = s
    return s


def run_qv(cfg: ExperimentConfig, report: Report):
    tol = _opt(cfg.tol, DEFAULT_TOL["qv"])
    times = sorted(cfg.grid_t)
    for r in _regions(cfg):
        for n in cfg.ns:
            p = cfg.params_at(n, region=r or None)
            phi = function_for(cfg.phi, p, AUTO_PHI)
            fam = est.FieldFamily(phi, p, _spec(cfg, p, 0, None).ring)
            obs = ObservableSet(fam.ring.N)
            fam.register(obs)
            seed = _seed(cfg, report, f"qv{_label(r, n=n)}")
            spec = _spec(cfg, p, seed, obs, times)

            def stats(rec):
                return [(est.compensator(rec, fam, t), est.quadratic_variation(rec, fam, t=t),
                         est.martingale_residual(rec, fam, t=t)) for t in times]

            runs = np.array(run_paths(spec, cfg.replicas, stats))
            norm = gradient_norm_sq(phi, 0.0, p)
            for j, t in enumerate(times):
                pred = t * p.chi * norm
                comp = StatSummary.from_samples(runs[:, j, 0])
                lit = StatSummary.from_samples(runs[:, j, 1])
                m = runs[:, j, 2]
                msq = StatSummary.from_samples(m**2)
                mean = StatSummary.from_samples(m)
                report.add(Row(f"qv_compensator{_label(r)}", comp.mean, pred, comp.stderr, f"rel<={tol!r}", n, t=t),
                           comp)
                report.add(Row(f"qv_literal{_label(r)}", lit.mean, pred, lit.stderr, f"rel<={tol!r}", n, t=t), lit)
                report.add(Row(f"martingale_sq{_label(r)}", msq.mean, pred, msq.stderr, "z<=3.0", n, t=t), msq)
                report.add(Row(f"martingale_mean{_label(r)}", mean.mean, 0.0, mean.stderr, "z<=3.0", n, t=t), mean)


def _field_reader(phi, p, ring, name):
    """Register ``Y(phi)`` if the frame is static; otherwise read it from snapshots."""
    if transport_shift(p, 1.0) == 0.0:
        w = field_weights(phi, ring, p)
        return lambda obs: obs.add_site(name, w, const=-p.rho * math.fsum(w)), \
            lambda rec, t: rec.value(name, t)
    return lambda obs: None, lambda rec, t: fluctuation_field(rec.snapshot(t), phi, p, t)


def _cov_summary(x, y) -> StatSummary:
    """Products of centered samples; their mean times ``R/(R-1)`` is the sample covariance."""
    R = x.size
    c = (x - x.mean()) * (y - y.mean()) * (R / (R - 1))
    return StatSummary.from_samples(c)


def run_covariance(cfg: ExperimentConfig, report: Report):
    z = _opt(cfg.tol, DEFAULT_TOL["z"])
    lags = sorted(cfg.grid_t)
    for r in _regions(cfg):
        for n in cfg.ns:
            p = cfg.params_at(n, region=r or None)
            phi = function_for(cfg.phi, p, AUTO_PHI)
            psi = function_for(cfg.psi, p, AUTO_PSI)
            ring = _spec(cfg, p, 0, None).ring
            obs = ObservableSet(ring.N)
            add_phi, read_phi = _field_reader(phi, p, ring, "Y_phi")
            add_psi, read_psi = _field_reader(psi, p, ring, "Y_psi")
            add_phi(obs)
            add_psi(obs)
            moving = transport_shift(p, 1.0) != 0.0
            seed = _seed(cfg, report, f"covariance{_label(r, n=n)}")
            spec = _spec(cfg, p, seed, obs, lags, snapshots=moving)
            runs = np.array(run_paths(spec, cfg.replicas,
                                      lambda rec: [read_psi(rec, 0.0)] + [read_phi(rec, t) for t in lags]))
            for j, t in enumerate(lags):
                cov = _cov_summary(runs[:, 1 + j], runs[:, 0])
                pred = ou_covariance(phi, psi, t, p)
                report.add(Row(f"covariance{_label(r)}", cov.mean, pred, cov.stderr, f"z<={z!r}", n, t=t), cov)
                var = _cov_summary(runs[:, 1 + j], runs[:, 1 + j])
                report.add(Row(f"stationary_variance{_label(r)}", var.mean, ou_covariance(phi, phi, 0.0, p),
                               var.stderr, f"z<={z!r}", n, t=t), var)


def _trend_rows(report, quantity, means: list[tuple[int, StatSummary]], factor: float | None, spread: float | None,
                t: float):
    """Successive-ratio rows (``factor``) or a max/min spread row (``spread``)."""
    if factor is not None:
        for (n0, s0), (n1, s1) in zip(means, means[1:]):
            report.add(Row(f"{quantity}_decay", s0.mean, s1.mean, s0.stderr, f"ratio>={factor!r}", n1, t=t))
    if spread is not None:
        hi = max(means, key=lambda m: m[1].mean)
        lo = min(means, key=lambda m: m[1].mean)
        report.add(Row(f"{quantity}_spread", hi[1].mean, lo[1].mean, hi[1].stderr, f"ratio<={1 + spread!r}", t=t))


def run_crossover(cfg: ExperimentConfig, report: Report):
    t = cfg.grid_t[0]
    factor = _opt(cfg.factor, DEFAULT_FACTOR["crossover-scan"])
    spread = _opt(cfg.spread, DEFAULT_SPREAD["crossover-scan"])
    for r in _regions(cfg):
        for g in cfg.grid_gamma:
            means = []
            for n in cfg.ns:
                p = cfg.params_at(n, g, r or None)
                phi = function_for(cfg.phi, p, AUTO_PHI)
                ring = _spec(cfg, p, 0, None).ring
                fam = est.FieldFamily(phi, p, ring)
                obs = ObservableSet(ring.N)
                fam.register(obs, ("B",))
                seed = _seed(cfg, report, f"crossover{_label(r, gamma=g, n=n)}")
                spec = _spec(cfg, p, seed, obs, t_final=t)
                s = StatSummary.from_samples(run_paths(spec, cfg.replicas, lambda rec: est.b_field(rec, fam) ** 2))
                report.add(Row(f"B2{_label(r, gamma=g)}", s.mean, stderr=s.stderr, n=n, t=t), s)
                means.append((n, s))
            # B stays of order one at gamma = 1/2 and vanishes for gamma > 1/2
            if g <= 0.5:
                _trend_rows(report, f"B2{_label(r, gamma=g)}", means, None, spread, t)
            else:
                _trend_rows(report, f"B2{_label(r, gamma=g)}", means, factor, None, t)


def bg_weights(phi, n: int, reach: float = 2.0) -> WeightSequence:
    """``v(x) = phi(x/n)`` on ``|x| <= reach n``."""
    return WeightSequence.from_function(lambda x: phi(x / n), n, -int(reach * n), int(reach * n))


def run_bg(cfg: ExperimentConfig, report: Report):
    t = cfg.grid_t[0]
    spread = _opt(cfg.spread, DEFAULT_SPREAD["bg-scan"])
    ratio_sups = []
    all_ratios = []
    for r in _regions(cfg):
        for n in cfg.ns:
            p = cfg.params_at(n, region=r or None)
            phi = function_for(cfg.phi, p, AUTO_PHI)
            ring = _spec(cfg, p, 0, None).ring
            v = bg_weights(phi, n)
            Ls = set(cfg.grid_L)
            if cfg.grid_L_diffusive:
                Ls.add(int(math.floor(n * math.sqrt(t))))
            Ls = sorted(Ls)
            obs = ObservableSet(ring.N)
            specs = [est.BGSpec(v, L, t, p, name=f"bg{L}") for L in Ls]
            for s in specs:
                est.register_bg(obs, s, ring)
            seed = _seed(cfg, report, f"bg{_label(r, n=n)}")
            sim = _spec(cfg, p, seed, obs, t_final=t)
            runs = np.array(run_paths(sim, cfg.replicas, lambda rec: [est.bg_integral(rec, s, t) for s in specs]))
            stats, ratios = [], []
            for j, s in enumerate(specs):
                st = StatSummary.from_samples(runs[:, j] ** 2)
                row = report.add(Row(f"bg_statistic{_label(r)}", st.mean, est.bg_bound(s), st.stderr, "info", n, s.L, t),
                                 st)
                stats.append(st.mean)
                ratios.append(row.ratio)
            ratio_sups.append((n, max(ratios)))
            all_ratios += ratios
            report.add(Row(f"bg_profile_argmin{_label(r)}", int(np.argmin(stats)), len(Ls) - 1, rule="interior",
                           n=n, t=t))
    if ratio_sups:
        report.fitted["bg_constant"] = max(all_ratios)
        hi = max(s for _, s in ratio_sups)
        lo = min(s for _, s in ratio_sups)
        report.add(Row("bg_ratio_sup_variation", hi, lo, rule=f"ratio<={spread!r}", t=t))


def run_energy(cfg: ExperimentConfig, report: Report):
    t = cfg.grid_t[0]
    spread = _opt(cfg.spread, DEFAULT_SPREAD["energy"])
    for r in _regions(cfg):
        for n in cfg.ns:
            p = cfg.params_at(n, region=r or None)
            phi = function_for(cfg.phi, p, AUTO_PHI)
            ring = _spec(cfg, p, 0, None).ring
            obs = ObservableSet(ring.N)
            pairs = []
            for eps in cfg.grid_eps:
                est.register_two_block(obs, phi, p, ring, eps)
                Ls = []
                for e in (eps, eps / 2):
                    L = int(math.floor(e * n + 1e-9))
                    if est.energy_name(L) not in obs:
                        est.register_energy(obs, phi, p, ring, e)
                    Ls.append(L)
                pairs.append((eps, Ls[0], Ls[1]))
            seed = _seed(cfg, report, f"energy{_label(r, n=n)}")
            sim = _spec(cfg, p, seed, obs, t_final=t)

            def stats(rec):
                out = []
                for eps, L1, L2 in pairs:
                    tb = rec.integral(est.two_block_name(L1), t)
                    diff = est.energy_quadratic(rec, L1, 0.0, t) - est.energy_quadratic(rec, L2, 0.0, t)
                    out.append((tb * tb, diff * diff))
                return out

            runs = np.array(run_paths(sim, cfg.replicas, stats))
            tb_ratios, kappas = [], []
            for j, (eps, L1, L2) in enumerate(pairs):
                tb = StatSummary.from_samples(runs[:, j, 0])
                row = report.add(Row(f"two_block{_label(r)}", tb.mean, est.two_block_bound(phi, eps, t, p), tb.stderr,
                                     "info", n, L1, t, eps), tb)
                tb_ratios.append(row.ratio)
                scale = t * eps * gradient_norm_sq(phi, 0.0, p)
                inc = StatSummary.from_samples(runs[:, j, 1] / scale)
                report.add(Row(f"energy_increment_kappa{_label(r)}", inc.mean, stderr=inc.stderr, n=n, L=L1, t=t,
                               eps=eps), inc)
                kappas.append(inc.mean)
            report.fitted[f"two_block_constant{_label(r, n=n)}"] = max(tb_ratios)
            report.fitted[f"energy_kappa{_label(r, n=n)}"] = max(kappas)
            report.add(Row(f"two_block_ratio_spread{_label(r)}", max(tb_ratios), min(tb_ratios),
                           rule=f"ratio<={spread!r}", n=n, t=t))
            report.add(Row(f"energy_kappa_spread{_label(r)}", max(kappas), min(kappas), rule=f"ratio<={spread!r}",
                           n=n, t=t))


def run_pair(cfg: ExperimentConfig, report: Report):
    t = cfg.grid_t[0]
    factor = _opt(cfg.factor, DEFAULT_FACTOR["pair-decay"])
    for r in _regions(cfg):
        means = []
        for n in cfg.ns:
            p = cfg.params_at(n, region=r or None)
            ring = _spec(cfg, p, 0, None).ring
            obs = ObservableSet(ring.N)
            est.register_pair(obs, ring, p)
            seed = _seed(cfg, report, f"pair{_label(r, n=n)}")
            runs = run_paths(_spec(cfg, p, seed, obs, t_final=t), cfg.replicas, lambda rec: rec)
            s = est.pair_statistic(runs, t, p)
            report.add(Row(f"pair_statistic{_label(r)}", s.mean, stderr=s.stderr, n=n, t=t), s)
            means.append((n, s))
        _trend_rows(report, f"pair_statistic{_label(r)}", means, factor, None, t)


def run_gaussianity(cfg: ExperimentConfig, report: Report):
    t = cfg.grid_t[0]
    for r in _regions(cfg):
        for n in cfg.ns:
            p = cfg.params_at(n, region=r or None)
            phi = function_for(cfg.phi, p, AUTO_PHI)
            ring = _spec(cfg, p, 0, None).ring
            obs = ObservableSet(ring.N)
            add, read = _field_reader(phi, p, ring, "Y_phi")
            add(obs)
            moving = transport_shift(p, 1.0) != 0.0
            seed = _seed(cfg, report, f"gaussianity{_label(r, n=n)}")
            spec = _spec(cfg, p, seed, obs, t_final=t, snapshots=moving)
            site = ring.index(0)
            runs = np.array(run_paths(spec, cfg.replicas, lambda rec: (read(rec, t), float(rec.final.occ[site]))))
            field = est.moment_tests(runs[:, 0], MOMENT_THRESHOLD)
            report.add(Row(f"moment_max_abs_z[field{',' + r if r else ''}]",
                           max(abs(field.skew_z), abs(field.kurtosis_z)), MOMENT_THRESHOLD, rule="le", n=n, t=t))
            ctrl = est.moment_tests(runs[:, 1], MOMENT_THRESHOLD)
            report.add(Row(f"moment_max_abs_z[single_site{',' + r if r else ''}]",
                           max(abs(ctrl.skew_z), abs(ctrl.kurtosis_z)), MOMENT_THRESHOLD, rule="gt", n=n, t=t))


RUNNERS = {
    "invariance": run_invariance,
    "exactness": run_exactness,
    "semigroup": run_semigroup,
    "qv": run_qv,
    "covariance": run_covariance,
    "crossover-scan": run_crossover,
    "bg-scan": run_bg,
    "energy": run_energy,
    "pair-decay": run_pair,
    "gaussianity": run_gaussianity,
}


def run_experiment(cfg: ExperimentConfig, enforce_budget: bool = True) -> Report:
    """Run one configured experiment; deterministic for a fixed seed."""
    if enforce_budget:
        check_budget(cfg)
    report = Report(cfg.kind, dumps(cfg))
    start = time.perf_counter()
    try:
        RUNNERS[cfg.kind](cfg, report)
    except (est.MovingFrameError, RegimeMismatch) as exc:
        raise ConfigError(str(exc)) from exc
    report.runtime = time.perf_counter() - start
    return report
