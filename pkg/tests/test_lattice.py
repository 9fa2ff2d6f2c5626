import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from slowbond.lattice import (
    Config,
    LocalFunction,
    ModelParams,
    ParameterError,
    Ring,
    WindowError,
    bernoulli_weights,
    bond_increments,
    config_to_state,
    dirichlet_form,
    generator_apply,
    invariance_residual,
    positivity_violations,
    raw_rates,
    ring_generator,
    ring_stationary_residual,
    state_to_config,
    swap_rate,
)

# one point per region of the phase diagram, plus a few off-grid points
PARAM_GRID = [
    dict(beta=0.0, gamma=0.5, alpha=1.0, a=1.0),
    dict(beta=0.25, gamma=0.5, alpha=1.0, a=1.0),
    dict(beta=0.0, gamma=1.0, alpha=1.0, a=1.0),
    dict(beta=0.75, gamma=1.0, alpha=1.0, a=1.0),
    dict(beta=1.0, gamma=2.0, alpha=1.0, a=1.0),
    dict(beta=1.0, gamma=1.0, alpha=2.0, a=1.0),
    dict(beta=2.0, gamma=2.0, alpha=1.0, a=1.0),
    dict(beta=0.5, gamma=0.5, alpha=1.0, a=1.0),  # alpha = a: slow-bond left rate is exactly 0
]


def _params(n=4, rho=0.5, **kw):
    return ModelParams(n=n, rho=rho, **kw)


class TestValidation:
    def test_gamma_above_beta_is_accepted(self):
        ModelParams(n=10, gamma=1.0, beta=0.5, alpha=1.0, a=1.0)

    def test_equal_exponents_need_alpha_at_least_a(self):
        with pytest.raises(ParameterError, match="alpha >= a"):
            ModelParams(n=10, beta=0.5, gamma=0.5, alpha=1.0, a=2.0)

    def test_gamma_below_beta_is_rejected(self):
        with pytest.raises(ParameterError, match="gamma < beta"):
            ModelParams(n=10, beta=2.0, gamma=1.0)

    def test_rejection_names_every_clause(self):
        bad = positivity_violations(10, -1.0, 0.0, 0.4, 1.0)
        assert any("alpha" in b for b in bad)
        assert any("gamma must be >= 1/2" in b for b in bad)

    def test_non_finite_is_rejected(self):
        assert positivity_violations(10, math.nan, 0, 1, 0)

    def test_invalid_params_produce_a_negative_raw_rate(self):
        # beta = gamma with alpha < a: the slow-bond left rate goes negative
        (_, _), (_, left_slow) = raw_rates(10, 1.0, 0.5, 0.5, 2.0)
        assert left_slow < 0

    @pytest.mark.parametrize("kw", PARAM_GRID)
    def test_valid_params_give_nonnegative_rates(self, kw):
        for n in (1, 2, 8, 128):
            p = ModelParams(n=n, **kw)
            assert p.left_rate(-1) >= 0 and p.left_rate(5) >= 0
            assert 0 < p.chi <= 0.25


class TestSwapRate:
    def test_regular_bond(self):
        p = ModelParams(n=10, a=1.0, gamma=1.0)
        c = Config(np.zeros(80, dtype=np.uint8))
        c.occ[Ring(80).index(3)] = 1
        assert swap_rate(p, c, 3) == pytest.approx(0.55, abs=1e-15)

    def test_slow_bond(self):
        p = ModelParams(n=10, alpha=2.0, beta=1.0, a=0.0)
        c = Config(np.zeros(80, dtype=np.uint8))
        c.occ[Ring(80).index(-1)] = 1
        assert swap_rate(p, c, -1) == pytest.approx(0.1, abs=1e-15)

    @pytest.mark.parametrize("fill", [0, 1])
    def test_equal_occupations_never_swap(self, fill):
        p = ModelParams(n=10, alpha=2.0, beta=1.0, a=1.0, gamma=1.0)
        c = Config(np.full(80, fill, dtype=np.uint8))
        assert swap_rate(p, c, -1) == 0.0
        assert swap_rate(p, c, 7) == 0.0

    def test_slow_bond_is_unique_on_the_ring(self):
        p = ModelParams(n=4, alpha=0.3, beta=1.0, a=0.0)
        right, left = Ring(32).rates(p)
        assert np.count_nonzero(right != 0.5) == 1
        assert np.flatnonzero(right != 0.5)[0] == Ring(32).slow_bond


def _brute_force_generator(p, f):
    """Sum over bonds and patterns written directly from the jump rates."""
    start, width = f.start - 1, f.width + 2
    out = np.zeros(2**width)
    for idx, bits in enumerate(itertools.product((0, 1), repeat=width)):
        eta = bits[::-1]  # product() is big-endian; bit i is site start + i
        val = f.table[sum(eta[f.start - start + i] << i for i in range(f.width))]
        total = 0.0
        for j in range(width - 1):
            x = start + j
            if eta[j] == eta[j + 1]:
                continue
            rate = p.right_rate(x) if eta[j] == 1 else p.left_rate(x)
            swapped = list(eta)
            swapped[j], swapped[j + 1] = swapped[j + 1], swapped[j]
            sval = f.table[sum(swapped[f.start - start + i] << i for i in range(f.width))]
            total += rate * (sval - val)
        out[sum(b << i for i, b in enumerate(eta))] = total
    return out


class TestGenerator:
    def test_constant_is_annihilated(self):
        g = generator_apply(_params(), LocalFunction.constant(3.0))
        np.testing.assert_array_equal(g.table, 0.0)

    def test_occupation_at_origin_fed_from_the_left(self):
        # eta(-1)=1, eta(0)=0, eta(1)=0 with alpha=1, beta=0: only the slow-bond jump in, rate 1/2
        p = ModelParams(n=1, alpha=1.0, beta=0.0, a=0.0)
        g = generator_apply(p, LocalFunction.monomial([0]))
        assert g.start == -1
        assert g.table[0b001] == pytest.approx(0.5)

    def test_occupation_at_origin_fed_from_both_sides(self):
        p = ModelParams(n=1, alpha=1.0, beta=0.0, a=0.0)
        g = generator_apply(p, LocalFunction.monomial([0]))
        assert g.table[0b101] == pytest.approx(1.0)

    @pytest.mark.parametrize("kw", PARAM_GRID)
    @pytest.mark.parametrize("sites", [[0], [0, 1], [-1, 0], [-2, 0], [3, 4, 5]])
    def test_matches_brute_force(self, kw, sites):
        p = _params(n=3, **kw)
        f = LocalFunction.monomial(sites)
        np.testing.assert_allclose(generator_apply(p, f).table, _brute_force_generator(p, f), atol=1e-14)

    def test_window_overflow(self):
        f = LocalFunction(0, np.zeros(2**5))
        with pytest.raises(WindowError):
            generator_apply(_params(), f, max_width=6)


@st.composite
def local_functions(draw):
    width = draw(st.integers(1, 4))
    start = draw(st.integers(-5, 3))
    vals = draw(st.lists(st.floats(-10, 10), min_size=2**width, max_size=2**width))
    return LocalFunction(start, np.array(vals))


@st.composite
def valid_params(draw):
    beta = draw(st.sampled_from([0.0, 0.25, 0.5, 1.0, 1.5, 2.0]))
    gamma = draw(st.sampled_from([g for g in (0.5, 0.75, 1.0, 1.5, 2.0, 3.0) if g >= beta]))
    alpha = draw(st.floats(0.1, 4.0))
    a = draw(st.floats(0.0, 3.0))
    if gamma == beta:
        a = min(a, alpha)
    n = draw(st.integers(2, 200))
    rho = draw(st.floats(0.05, 0.95))
    bad = positivity_violations(n, alpha, beta, gamma, a, rho)
    if bad:
        a = 0.0
    return ModelParams(n=n, alpha=alpha, beta=beta, gamma=gamma, a=a, rho=rho)


class TestInvariance:
    def test_occupation_at_origin(self):
        for kw in PARAM_GRID:
            assert abs(invariance_residual(_params(**kw), LocalFunction.monomial([0]))) < 1e-15

    def test_nearest_neighbour_product_at_low_density(self):
        p = ModelParams(n=4, rho=0.3, a=1.0, gamma=1.0, alpha=2.0, beta=1.0)
        assert abs(invariance_residual(p, LocalFunction.monomial([0, 1]))) <= 1e-13

    def test_constant(self):
        assert invariance_residual(_params(), LocalFunction.constant(7.0)) == 0.0

    @given(p=valid_params(), f=local_functions())
    def test_product_measure_is_invariant(self, p, f):
        scale = max(1.0, float(np.abs(f.table).max()))
        assert abs(invariance_residual(p, f)) <= 1e-13 * scale

    def test_asymmetric_weights_are_not_invariant_for_a_biased_measure(self):
        # sanity check that the residual is not identically zero: a non-product weighting breaks it
        p = ModelParams(n=2, a=1.0, gamma=1.0)
        g = generator_apply(p, LocalFunction.monomial([0, 1]))
        w = bernoulli_weights(g.width, 0.5) * np.linspace(1, 2, g.table.size)
        assert abs(math.fsum(w * g.table)) > 1e-3


class TestRingStationarity:
    def test_symmetric_ring(self):
        p = ModelParams(n=2, a=0.0)
        assert ring_stationary_residual(p, 4, 2) == 0.0

    def test_robin_strong_noise_ring(self):
        p = ModelParams(n=2, a=1.0, gamma=1.0, alpha=2.0, beta=1.0)
        assert ring_stationary_residual(p, 5, 2) <= 1e-12

    def test_empty_ring(self):
        assert ring_stationary_residual(ModelParams(n=2), 3, 0) == 0.0

    @pytest.mark.parametrize("kw", PARAM_GRID)
    def test_all_sectors_small_rings(self, kw):
        p = _params(n=2, **kw)
        for N in range(3, 9):
            for k in range(N + 1):
                assert ring_stationary_residual(p, N, k) <= 1e-12

    def test_generator_rows_sum_to_zero(self):
        p = ModelParams(n=2, a=1.0, gamma=1.0, alpha=2.0, beta=1.0)
        _, Q = ring_generator(p, 6)
        np.testing.assert_allclose(Q.sum(axis=1), 0.0, atol=1e-14)

    def test_ring_too_large(self):
        with pytest.raises(WindowError):
            ring_generator(ModelParams(n=2), 15)

    def test_particle_number_out_of_range(self):
        with pytest.raises(ValueError):
            ring_stationary_residual(ModelParams(n=2), 4, 5)

    def test_state_round_trip(self):
        for s in range(64):
            assert config_to_state(state_to_config(s, 6)) == s


class TestDirichletForm:
    def test_constant(self):
        assert dirichlet_form(_params(), LocalFunction.constant(2.0)) == 0.0

    def test_origin_next_to_the_slow_bond(self):
        p = ModelParams(n=10, alpha=1.0, beta=1.0, a=0.0)
        assert dirichlet_form(p, LocalFunction.monomial([0])) == pytest.approx(0.275, abs=1e-15)

    def test_site_far_from_the_slow_bond(self):
        p = ModelParams(n=10, a=0.0)
        assert dirichlet_form(p, LocalFunction.monomial([5])) == pytest.approx(0.5, abs=1e-15)

    @given(p=valid_params(), f=local_functions())
    def test_nonnegative(self, p, f):
        assert dirichlet_form(p, f) >= 0.0

    @given(p=valid_params(), f=local_functions())
    def test_zero_exactly_when_every_bond_increment_vanishes(self, p, f):
        incs = [I for _, I in bond_increments(f, p)]
        assert (dirichlet_form(p, f) == 0.0) == all(I == 0.0 for I in incs)
