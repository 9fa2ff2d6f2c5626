import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from slowbond.estimators import (
    BGSpec,
    FieldFamily,
    MovingFrameError,
    b_field,
    bg_bound,
    bg_integral,
    bg_statistic,
    compensator,
    energy_name,
    energy_quadratic,
    field_value,
    martingale_residual,
    moment_tests,
    pair_statistic,
    quadratic_variation,
    register_bg,
    register_energy,
    register_pair,
    register_two_block,
    two_block_name,
    two_block_statistic,
)
from slowbond.fields import WeightSequence, empirical_average, fluctuation_field
from slowbond.lattice import Config, ModelParams, Ring, bernoulli_weights
from slowbond.simulator import ObservableSet, SimSpec, advance, replica_rng, run_paths, sample_initial
from slowbond.testfns import gaussian, neumann_pair


class _Linear:
    """``u -> u`` with the ``deriv`` interface the energy estimators read."""

    radius = 10.0

    def __call__(self, u):
        return np.asarray(u, dtype=float)

    def deriv(self, u, k=0):
        u = np.asarray(u, dtype=float)
        return u if k == 0 else (np.ones_like(u) if k == 1 else np.zeros_like(u))


def _frozen(N, fill=1):
    return Config(np.full(N, fill, dtype=np.uint8))


def _family_path(p, phi, init, t, seed=0, parts=("Y", "drift", "B", "qv", "qv_exact")):
    ring = Ring(init.occ.size)
    obs = ObservableSet(ring.N)
    fam = FieldFamily(phi, p, ring).register(obs, parts)
    _, rec = advance(init, p, t, replica_rng(seed, 0), obs, checkpoints=[t / 2])
    return fam, rec


class TestQuadraticVariation:
    def test_full_configuration_has_no_variation(self):
        p = ModelParams(n=8, a=1.0, gamma=1.0, alpha=2.0, beta=1.0)
        fam, rec = _family_path(p, gaussian(0.5), _frozen(64), 0.3)
        assert quadratic_variation(rec, fam) == 0.0
        assert compensator(rec, fam) == 0.0

    def test_stationary_rate_tends_to_quarter_gradient_norm(self):
        # E (eta(1) - eta(0))^2 = 2 chi = 1/2 at rho = 1/2, so the density is (1/4) |phi'|^2 in the limit
        phi = gaussian(0.5)
        n = 256
        p = ModelParams(n=n, a=0.0)
        fam = FieldFamily(phi, p, Ring(8 * n))
        pattern_prob = bernoulli_weights(2, 0.5)[[0, 2, 1, 3]]  # index 2 eta(x) + eta(x+1)
        rate = float(np.sum(fam._qv_table() @ pattern_prob))
        grad_norm = math.sqrt(math.pi) / (2 * 0.5)
        assert rate == pytest.approx(0.25 * grad_norm, rel=1e-3)

    def test_nonnegative_and_nondecreasing(self):
        p = ModelParams(n=8, a=1.0, gamma=1.0)
        fam, rec = _family_path(p, gaussian(0.5), sample_initial(0.5, 64, 3), 0.2)
        q0, q1, q2 = (quadratic_variation(rec, fam, t=t) for t in (0.0, 0.1, 0.2))
        assert 0.0 == q0 <= q1 <= q2

    def test_moving_frame_is_refused(self):
        p = ModelParams(n=8, a=1.0, gamma=1.0, rho=0.3)
        with pytest.raises(MovingFrameError):
            FieldFamily(gaussian(0.5), p, Ring(64)).register(ObservableSet(64))


class TestBField:
    def test_vanishes_without_asymmetry(self):
        p = ModelParams(n=8, a=0.0)
        fam, rec = _family_path(p, gaussian(0.5, 0.2), sample_initial(0.5, 64, 1), 0.2)
        assert b_field(rec, fam) == 0.0

    def test_constant_integrand_telescopes(self):
        p = ModelParams(n=8, a=1.0, gamma=0.5)
        fam, rec = _family_path(p, gaussian(0.5, 0.2), _frozen(64), 0.2)
        assert abs(b_field(rec, fam)) < 1e-12


class TestMartingale:
    def test_zero_at_time_zero(self):
        p = ModelParams(n=8, a=1.0, gamma=1.0)
        fam, rec = _family_path(p, gaussian(0.5), sample_initial(0.5, 64, 2), 0.1)
        assert martingale_residual(rec, fam, t=0.0) == 0.0

    def test_field_value_matches_direct_evaluation(self):
        p = ModelParams(n=8, a=1.0, gamma=1.0)
        fam, rec = _family_path(p, gaussian(0.5), sample_initial(0.5, 64, 2), 0.1)
        assert field_value(rec, fam) == pytest.approx(fluctuation_field(rec.final, fam.phi, p), abs=1e-12)
        assert field_value(rec, fam, 0.0) == pytest.approx(fluctuation_field(rec.initial, fam.phi, p), abs=1e-12)

    @pytest.mark.parametrize("p,phi", [
        (ModelParams(n=8, a=1.0, gamma=1.0), gaussian(0.5)),
        (ModelParams(n=8, alpha=1.0, beta=2.0, gamma=2.0, a=1.0), neumann_pair(1.0, 0.5, 0.5)),
    ])
    def test_mean_zero_and_variance_equals_compensator(self, p, phi):
        R, t = 600, 0.25

        def record(ring, params):
            obs = ObservableSet(ring.N)
            FieldFamily(phi, params, ring).register(obs)
            return obs

        spec = SimSpec(p, t, seed=13, record=record)
        fam = FieldFamily(phi, p, spec.ring)
        out = np.array(run_paths(spec, R, lambda rec: (martingale_residual(rec, fam), compensator(rec, fam))))
        m, qv = out[:, 0], out[:, 1]
        assert abs(m.mean()) <= 4 * m.std(ddof=1) / math.sqrt(R)
        sq = m**2
        assert abs(sq.mean() - qv.mean()) <= 4 * math.sqrt(sq.var(ddof=1) / R)


class TestBoltzmannGibbs:
    def test_bound_example(self):
        v = WeightSequence(0, [1.0, 0.0], n=100)
        v.norm_sq, v.norm_sq_off_slow = 1.0, 1.0
        spec = BGSpec(v, 10, 1.0, ModelParams(n=100, beta=0.0, alpha=1.0))
        assert bg_bound(spec) == pytest.approx(0.1 + 0.01 + 1.0 + math.log2(10) ** 2 / 100, rel=1e-12)
        assert bg_bound(spec) == pytest.approx(1.2203, abs=1e-4)

    def test_bound_minimiser_scales_like_cube_root(self):
        Ls = np.arange(1, 20000)
        for n, t in [(1000, 1.0), (4000, 0.5)]:
            vals = Ls / n + t * n / Ls**2.0
            assert Ls[np.argmin(vals)] == pytest.approx((2 * t * n * n) ** (1 / 3), abs=1.0)

    @pytest.mark.parametrize("t", [0.04, 0.25, 1.0])
    def test_diffusive_box_gives_three_halves_power(self, t):
        n = 10**8
        v = WeightSequence(0, [1.0], n=1)
        spec = BGSpec(v, int(n * math.sqrt(t)), t, ModelParams(n=n, beta=0.0))
        assert bg_bound(spec) / t**1.5 == pytest.approx(1.0, rel=1e-3)

    def test_integrand_matches_direct_sum(self):
        n, L, rho = 8, 3, 0.4
        p = ModelParams(n=n, rho=rho)
        ring = Ring(64)
        v = WeightSequence.from_function(lambda x: np.exp(-(x / 4.0) ** 2), n, -10, 10)
        spec = BGSpec(v, L, 0.1, p)
        obs = ObservableSet(64)
        register_bg(obs, spec, ring)
        c = sample_initial(rho, 64, 5)
        _, rec = advance(c, p, 0.0, replica_rng(0, 0), obs)
        direct = sum(w * ((c[x] - rho) * (c[x + 1] - rho) - empirical_average(c, x, L, rho) ** 2 + p.chi / L)
                     for x, w in zip(v.positions, v.values))
        got = rec.value(spec.name + ":pair") + rec.value(spec.name + ":block")
        assert got == pytest.approx(direct, abs=1e-12)

    def test_statistic_is_zero_at_time_zero_and_nonnegative(self):
        p = ModelParams(n=8)
        ring = Ring(64)
        v = WeightSequence.from_function(lambda x: np.ones_like(x, dtype=float), 8, -4, 4)
        spec0 = BGSpec(v, 4, 0.0, p)
        spec1 = BGSpec(v, 4, 0.05, p, name="bg1")
        obs = ObservableSet(64)
        register_bg(obs, spec0, ring)
        register_bg(obs, spec1, ring)
        runs = [advance(sample_initial(0.5, 64, s), p, 0.05, replica_rng(s, 0), obs, checkpoints=[0.0])[1]
                for s in range(20)]
        assert bg_statistic(spec0, runs).mean == 0.0
        assert bg_statistic(spec1, runs).mean >= 0.0
        assert all(bg_integral(r, spec1, 0.0) == 0.0 for r in runs)

    def test_window_overflow(self):
        v = WeightSequence(0, np.ones(40), n=8)
        with pytest.raises(ValueError):
            register_bg(ObservableSet(64), BGSpec(v, 30, 0.1, ModelParams(n=8)), Ring(64))


class TestEnergy:
    def test_equal_times(self):
        p = ModelParams(n=8)
        obs = ObservableSet(64)
        L = register_energy(obs, gaussian(0.5), p, Ring(64), 0.25)
        _, rec = advance(sample_initial(0.5, 64, 1), p, 0.1, replica_rng(0, 0), obs, checkpoints=[0.05])
        assert energy_quadratic(rec, L, 0.05, 0.05) == 0.0

    def test_linear_test_function_gives_positive_integrand(self):
        p = ModelParams(n=8)
        obs = ObservableSet(64)
        L = register_energy(obs, _Linear(), p, Ring(64), 0.25)
        c = sample_initial(0.5, 64, 4)
        _, rec = advance(c, p, 0.1, replica_rng(0, 0), obs)
        direct = sum(((c.occ[(y + 1 + np.arange(L)) % 64].mean() - 0.5) ** 2) for y in range(64))
        assert rec.value(energy_name(L), 0.0) == pytest.approx(direct, abs=1e-12)
        assert energy_quadratic(rec, L, 0.0, 0.1) > 0

    def test_box_too_small(self):
        with pytest.raises(ValueError):
            register_energy(ObservableSet(64), gaussian(0.5), ModelParams(n=8), Ring(64), 0.1)

    def test_two_block_vanishes_on_a_full_configuration(self):
        p = ModelParams(n=8)
        obs = ObservableSet(64)
        phi = gaussian(0.5)
        register_two_block(obs, phi, p, Ring(64), 0.25)
        runs = [advance(_frozen(64), p, 0.1, replica_rng(0, r), obs, checkpoints=[0.0])[1] for r in range(3)]
        assert two_block_statistic(runs, phi, 0.25, 0.1, p).mean == pytest.approx(0.0, abs=1e-20)
        assert two_block_statistic(runs, phi, 0.25, 0.0, p).mean == 0.0
        assert two_block_name(2) in runs[0].names


class TestPair:
    def test_zero_time_and_nonnegative(self):
        p = ModelParams(n=8, alpha=1.0, beta=1.0, gamma=2.0)
        obs = ObservableSet(64)
        register_pair(obs, Ring(64), p)
        runs = [advance(sample_initial(0.5, 64, s), p, 0.1, replica_rng(s, 0), obs, checkpoints=[0.0])[1]
                for s in range(10)]
        assert pair_statistic(runs, 0.0, p).mean == 0.0
        assert pair_statistic(runs, 0.1, p).mean >= 0.0


class TestMoments:
    def test_normal_samples_pass(self, rng):
        assert moment_tests(rng.normal(size=2000)).passed

    def test_exponential_samples_fail_on_skewness(self, rng):
        r = moment_tests(rng.exponential(size=2000))
        assert not r.passed and abs(r.skew_z) > 4

    def test_needs_enough_samples(self, rng):
        with pytest.raises(ValueError):
            moment_tests(rng.normal(size=99))

    @given(st.integers(0, 2**31))
    def test_report_is_consistent_with_threshold(self, seed):
        r = moment_tests(np.random.default_rng(seed).normal(size=200), threshold=2.0)
        assert r.passed == (abs(r.skew_z) <= 2.0 and abs(r.kurtosis_z) <= 2.0)
