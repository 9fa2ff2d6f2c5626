import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from slowbond.lattice import Config, ModelParams, config_to_state, ring_generator
from slowbond.simulator import (
    ObservableSet,
    SimSpec,
    UnknownObservable,
    advance,
    path_time_average,
    replica_rng,
    run_paths,
    run_replicas,
    sample_initial,
)
from slowbond.stats import StatSummary, merge_all

ROBIN_STRONG = ModelParams(n=4, alpha=2.0, beta=1.0, gamma=1.0, a=1.0)


def _observables(N, rng, L=3):
    obs = ObservableSet(N)
    obs.add_site("site", rng.normal(size=N), const=0.25)
    obs.add_pair("pair", rng.normal(size=(N, 4)))
    obs.add_block("block", L, rng.normal(size=N))
    obs.add_constant("one", 1.0)
    return obs


def _direct_values(occ, obs: ObservableSet, rho):
    """Observable values recomputed from scratch, independent of the kernel's incremental updates."""
    N = occ.size
    out = {}
    for name, o in obs._obs.items():
        if o.kind == "site":
            v = float(np.dot(o.data, occ))
        elif o.kind == "pair":
            v = sum(o.data[x, 2 * occ[x] + occ[(x + 1) % N]] for x in range(N))
        elif o.kind == "block":
            v = 0.0
            for y in range(N):
                m = sum(occ[(y + z) % N] for z in range(1, o.L + 1)) / o.L - rho
                v += o.data[y] * m * m
        else:
            v = 0.0
        out[name] = v + o.const
    return out


class TestInitialState:
    def test_empty(self):
        assert sample_initial(0.0, 50, 1).particle_count == 0

    def test_full(self):
        assert sample_initial(1.0, 50, 1).particle_count == 50

    def test_binomial_moments(self):
        counts = np.array([sample_initial(0.5, 64, s).particle_count for s in range(4000)])
        assert abs(counts.mean() - 32) < 4 * math.sqrt(16 / 4000)
        assert counts.var(ddof=1) == pytest.approx(16, rel=0.1)

    def test_density_out_of_range(self):
        with pytest.raises(ValueError):
            sample_initial(1.5, 10)


class TestAdvance:
    def test_zero_duration_leaves_state_unchanged(self):
        c = sample_initial(0.5, 32, 3)
        final, rec = advance(c, ROBIN_STRONG, 0.0, replica_rng(0, 0))
        np.testing.assert_array_equal(final.occ, c.occ)
        assert rec.events == 0

    def test_negative_duration(self):
        with pytest.raises(ValueError):
            advance(sample_initial(0.5, 32, 3), ROBIN_STRONG, -1.0, replica_rng(0, 0))

    @given(seed=st.integers(0, 2**32), rho=st.floats(0.05, 0.95), dt=st.floats(0.0, 0.3))
    def test_particle_count_is_conserved(self, seed, rho, dt):
        c = sample_initial(rho, 32, seed)
        final, _ = advance(c, ROBIN_STRONG, dt, replica_rng(seed, 1))
        assert final.particle_count == c.particle_count == int(final.occ.sum())

    def test_same_stream_gives_same_path(self, rng):
        c = sample_initial(0.5, 32, 5)
        obs = _observables(32, rng)
        _, r1 = advance(c, ROBIN_STRONG, 0.2, replica_rng(9, 2), obs)
        _, r2 = advance(c, ROBIN_STRONG, 0.2, replica_rng(9, 2), obs)
        np.testing.assert_array_equal(r1.integrals, r2.integrals)
        np.testing.assert_array_equal(r1.final.occ, r2.final.occ)

    def test_constant_observable_integrates_to_elapsed_time(self, rng):
        obs = ObservableSet(32).add_constant("c", 2.5)
        _, rec = advance(sample_initial(0.5, 32, 1), ROBIN_STRONG, 0.3, replica_rng(0, 0), obs, checkpoints=[0.1])
        assert path_time_average(rec, "c") == 2.5 * 0.3
        assert path_time_average(rec, "c", 0.1) == pytest.approx(0.25, abs=1e-16)

    def test_unknown_observable(self):
        _, rec = advance(sample_initial(0.5, 32, 1), ROBIN_STRONG, 0.1, replica_rng(0, 0))
        with pytest.raises(UnknownObservable):
            path_time_average(rec, "nope")

    def test_checkpoint_outside_horizon(self):
        with pytest.raises(ValueError):
            advance(sample_initial(0.5, 32, 1), ROBIN_STRONG, 0.1, replica_rng(0, 0), checkpoints=[0.2])

    def test_integrals_match_event_log_replay(self, rng):
        """Replay the logged jumps and integrate freshly recomputed values between them."""
        N, rho, T = 24, 0.5, 3.0
        p = ModelParams(n=3, alpha=0.7, beta=1.0, gamma=1.0, a=0.5)
        obs = _observables(N, rng)
        init = sample_initial(rho, N, 11)
        _, rec = advance(init, p, T, replica_rng(4, 0), obs, log_capacity=100_000, snapshots=True)
        times, bonds, dirs = rec.event_log
        assert times.size == rec.events > 50
        occ = init.occ.astype(int).copy()
        acc = dict.fromkeys(obs.names, 0.0)
        sojourn = 0.0
        prev = 0.0
        for t, b, d in zip(np.append(times, T), np.append(bonds, -1), np.append(dirs, 0)):
            vals = _direct_values(occ, obs, rho)
            for k in acc:
                acc[k] += vals[k] * (t - prev)
            if occ[0]:
                sojourn += t - prev
            prev = t
            if b >= 0:
                c = (b + 1) % N
                src, dst = (b, c) if d == 1 else (c, b)
                assert occ[src] == 1 and occ[dst] == 0
                occ[src], occ[dst] = 0, 1
        np.testing.assert_array_equal(occ, rec.final.occ)
        for k in acc:
            assert rec.integral(k) == pytest.approx(acc[k], rel=1e-9, abs=1e-12)
            assert rec.value(k) == pytest.approx(_direct_values(occ, obs, rho)[k], abs=1e-9)
        # indicator observable = total sojourn time
        ind = ObservableSet(N)
        ind.add_site("at0", np.eye(N)[0])
        _, rec2 = advance(init, p, T, replica_rng(4, 0), ind)
        assert rec2.integral("at0") == pytest.approx(sojourn, rel=1e-12, abs=1e-15)

    def test_fine_riemann_sum_agrees_within_grid_error(self, rng):
        N, T = 32, 0.05
        obs = ObservableSet(N).add_site("w", rng.normal(size=N))
        grid = np.linspace(0, T, 2001)
        _, rec = advance(sample_initial(0.5, N, 2), ROBIN_STRONG, T, replica_rng(1, 1), obs,
                         checkpoints=list(grid[1:-1]))
        vals = np.array([rec.value("w", t) for t in grid])
        riemann = float(np.sum(vals[:-1] * np.diff(grid)))
        jump = np.abs(obs._obs["w"].data).max()
        bound = 2 * jump * rec.events * (grid[1] - grid[0])
        assert abs(riemann - rec.integral("w")) <= bound


def test_small_ring_transition_law_matches_matrix_exponential():
    """Empirical transition frequencies on a 6-site ring against expm of the exact generator."""
    p = ModelParams(n=2, alpha=2.0, beta=1.0, gamma=1.0, a=1.0)
    N, t, R = 6, 0.1, 20_000
    states, Q = ring_generator(p, N, diffusive=True)
    start = 0b010101
    row = expm(t * Q)[int(np.flatnonzero(states == start)[0])]
    init = Config(np.array([(start >> i) & 1 for i in range(N)], dtype=np.uint8))
    counts = np.zeros(states.size)
    for r in range(R):
        final, _ = advance(init, p, t, replica_rng(77, r))
        counts[config_to_state(final)] += 1
    freq = counts / R
    tv = 0.5 * np.abs(freq - row).sum()
    assert tv <= 4 * math.sqrt(64 / R)
    se = np.sqrt(row * (1 - row) / R)
    live = row > 20 / R
    assert np.all(np.abs(freq[live] - row[live]) <= 4 * se[live])


def test_stationary_start_keeps_site_marginal():
    spec = SimSpec(ModelParams(n=4, alpha=1.0, beta=1.0, gamma=2.0, a=1.0, rho=0.3), 0.2, seed=3)
    R = 1500
    ring = spec.ring
    sites = ring.index([-1, 0, 5])
    occ = np.array(run_paths(spec, R, lambda rec: rec.final.occ[sites].astype(float)))
    bound = 4 * math.sqrt(0.3 * 0.7 / R)
    assert np.all(np.abs(occ.mean(axis=0) - 0.3) <= bound)


def test_time_average_of_origin_occupation_is_rho_t():
    def record(ring, p):
        return ObservableSet(ring.N).add_site("eta0", np.eye(ring.N)[ring.index(0)])

    spec = SimSpec(ModelParams(n=4, a=1.0, gamma=1.0, rho=0.4), 0.25, seed=8, record=record)
    s = run_replicas(spec, 800)["eta0"]
    assert abs(s.mean - 0.4 * 0.25) <= 4 * s.stderr


class TestReplicas:
    def _spec(self, seed=0):
        def record(ring, p):
            return ObservableSet(ring.N).add_site("mid", np.linspace(-1, 1, ring.N)).add_constant("one", 1.0)

        return SimSpec(ModelParams(n=4, a=1.0, gamma=1.0), 0.1, seed=seed, record=record)

    def test_single_replica_is_one_advance_with_the_derived_seed(self):
        spec = self._spec(5)
        s = run_replicas(spec, 1)
        rng = replica_rng(5, 0)
        init = sample_initial(0.5, spec.ring.N, rng)
        _, rec = advance(init, spec.params, spec.t_final, rng, spec.observables())
        assert s["mid"].mean == rec.integral("mid")

    def test_reruns_are_bit_identical(self):
        a = run_replicas(self._spec(1), 12)
        b = run_replicas(self._spec(1), 12)
        assert a == b

    def test_thread_count_does_not_change_results(self):
        a = run_replicas(self._spec(2), 8, threads=1)
        b = run_replicas(self._spec(2), 8, threads=3)
        assert a == b

    def test_seeds_give_distinct_streams(self):
        x = replica_rng(0, 0).random(4)
        y = replica_rng(0, 1).random(4)
        z = replica_rng(1, 0).random(4)
        assert not np.array_equal(x, y) and not np.array_equal(x, z)

    def test_constant_observable_has_no_variance(self):
        s = run_replicas(self._spec(), 5)["one"]
        assert s.mean == pytest.approx(0.1) and s.variance == pytest.approx(0.0, abs=1e-30)

    def test_needs_one_replica(self):
        with pytest.raises(ValueError):
            run_replicas(self._spec(), 0)

    @pytest.mark.parametrize("K,n", [(3, 8), (4, 2)])
    def test_ring_size_checks(self, K, n):
        with pytest.raises(ValueError):
            SimSpec(ModelParams(n=n), 0.1, lattice_factor=K)

    def test_expected_events_bound(self):
        spec = self._spec()
        recs = run_paths(spec, 20, lambda rec: rec.trials)
        assert np.mean(recs) <= 1.2 * spec.expected_events()


class TestStatSummary:
    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=40),
           st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=40))
    def test_merge_equals_pooled(self, x, y):
        m = StatSummary.from_samples(x).merge(StatSummary.from_samples(y))
        p = StatSummary.from_samples(x + y)
        assert m.count == p.count
        scale = max(1.0, max(map(abs, x + y)))
        assert m.mean == pytest.approx(p.mean, abs=1e-12 * scale)
        assert m.m2 == pytest.approx(p.m2, rel=1e-9, abs=1e-9 * scale**2)
        assert m.m3 == pytest.approx(p.m3, rel=1e-7, abs=1e-7 * scale**3)
        assert m.m4 == pytest.approx(p.m4, rel=1e-7, abs=1e-7 * scale**4)

    def test_merged_mean_is_count_weighted(self):
        a = StatSummary.from_samples([1.0, 2.0, 3.0])
        b = StatSummary.from_samples([10.0])
        assert a.merge(b).mean == pytest.approx((6 + 10) / 4)

    def test_tree_reduction_is_deterministic(self, rng):
        parts = [StatSummary.from_samples(rng.normal(size=7)) for _ in range(9)]
        assert merge_all(parts) == merge_all(list(parts))
        assert merge_all([]) == StatSummary.empty()

    def test_empty_is_identity(self):
        a = StatSummary.from_samples([1.0, 4.0])
        assert a.merge(StatSummary.empty()) == a == StatSummary.empty().merge(a)

    def test_confidence_interval_contains_mean(self):
        a = StatSummary.from_samples(np.arange(10.0))
        lo, hi = a.ci()
        assert lo < 4.5 < hi
        assert a.variance >= 0
