import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qbroadcast.channels import (
    ChannelInformation,
    OptimizerConfig,
    constant_channel,
    depolarizing_channel,
    random_channel,
)
from qbroadcast.errors import ShapeMismatch
from qbroadcast.operators import HilbertFactorization
from qbroadcast.renyi import exponent_from_information
from qbroadcast.simulation import (
    BlocklengthParams,
    ModerateSchedule,
    bound_from_exponents,
    bound_slope,
    boundary_point,
    caratheodory_size,
    channel_subset_exponents,
    composite_prefactor_squared,
    composite_within_prefactor,
    log2_bound_from_exponents,
    moderate_deviation_curve,
    moderate_rates,
    one_shot_simulation_bound,
    postselection_prefactor,
    prefactor,
    prefactor_squared,
    simulation_exponent_lower,
)

FAST = OptimizerConfig(grid_points=400, alpha_grid_points=50, probes=0)


def constant_broadcast():
    sigma = np.kron(np.diag([0.6, 0.4]), np.diag([0.5, 0.5]))
    return constant_channel(sigma, 2, HilbertFactorization(("B1", "B2"), (2, 2)))


@pytest.fixture(scope="module")
def constant_exponents():
    return channel_subset_exponents(constant_broadcast(), (1.0, 1.0), FAST)


@pytest.fixture(scope="module")
def depolarizing_exponents():
    return channel_subset_exponents(depolarizing_channel(0.3), (2.0,), FAST)


class TestCounting:
    def test_two_receiver_prefactor(self):
        p = BlocklengthParams(1, L=2, dim_a=2)
        assert prefactor_squared(p) == 2**15
        assert prefactor(p) == pytest.approx(181.019335984, abs=1e-9)

    @pytest.mark.parametrize("n", [1, 7, 100])
    @pytest.mark.parametrize("dim_a", [2, 3])
    def test_general_formula_at_two_receivers(self, n, dim_a):
        # (n+1)^{(5/2)(d^2-1)} squared, as an exact integer
        p = BlocklengthParams(n, L=2, dim_a=dim_a)
        assert prefactor_squared(p) == (n + 1) ** (5 * (dim_a**2 - 1))

    @pytest.mark.parametrize("L, expected", [(1, 2**12), (3, 2**18)])
    def test_prefactor_other_receivers(self, L, expected):
        assert prefactor_squared(BlocklengthParams(1, L=L, dim_a=2)) == expected

    @pytest.mark.parametrize("n, dim_a, expected", [(0, 2, 1), (1, 2, 8), (3, 2, 64), (1, 3, 256)])
    def test_postselection(self, n, dim_a, expected):
        assert postselection_prefactor(BlocklengthParams(n, dim_a=dim_a)) == (expected, expected)

    @pytest.mark.parametrize("n, dims, expected", [(0, (2, 2), 1), (1, (2, 2), 64), (2, (2, 2), 729), (1, (2, 3), 2**10)])
    def test_caratheodory(self, n, dims, expected):
        assert caratheodory_size(BlocklengthParams(n, dim_a=dims[0], dim_r=dims[1])) == expected

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 1000), st.integers(2, 4), st.sampled_from([2, 3]))
    def test_composite_within_prefactor(self, n, dim_a, L):
        p = BlocklengthParams(n, L=L, dim_a=dim_a)
        assert composite_within_prefactor(p)
        # exact rational comparison of the unsquared exponents
        a2 = Fraction(dim_a**2 - 1)
        assert a2 / 2 + a2 + (dim_a * dim_a - 1) <= Fraction(3 + L, 2) * a2

    def test_composite_equals_prefactor_at_two_receivers(self):
        for n in range(0, 50):
            p = BlocklengthParams(n, L=2, dim_a=2)
            assert composite_prefactor_squared(p) == prefactor_squared(p)

    @pytest.mark.parametrize("bad", [dict(n=-1), dict(n=1, L=0), dict(n=1, dim_a=0), dict(n=1.5)])
    def test_invalid_params(self, bad):
        with pytest.raises(ShapeMismatch):
            BlocklengthParams(**bad)


class TestBoundFormula:
    def test_hand_formula(self):
        exps = {("B1",): 0.3, ("B2",): 0.2, ("B1", "B2"): 0.5}
        p = BlocklengthParams(10, L=2, dim_a=2)
        rep = bound_from_exponents(exps, p)
        direct = 11**7.5 * math.sqrt(2 * 2**-3 + 2 * 2**-2 + 4 * 2**-5)
        assert rep.epsilon_bound == pytest.approx(direct, rel=1e-12)
        assert rep.epsilon_bound == pytest.approx(rep.prefactor * math.sqrt(sum(rep.per_subset_terms.values())), rel=1e-12)
        assert rep.exponent_lower == pytest.approx(0.1)

    def test_log_domain_huge_n(self):
        exps = {("B",): 0.5}
        rep = bound_from_exponents(exps, BlocklengthParams(10**6, L=1, dim_a=2))
        assert rep.epsilon_bound == 0.0
        expected = 6 * math.log2(10**6 + 1) + 0.5 * (1 - 0.5 * 10**6)
        assert rep.log2_epsilon_bound == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("n", [10**3, 10**5, 10**7])
    def test_slope_tends_to_half_min_exponent(self, n):
        exps = {("B1",): 0.3, ("B2",): 0.2, ("B1", "B2"): 0.5}
        slope = bound_slope(exps, BlocklengthParams(n, L=2, dim_a=2))
        # remaining gap is the prefactor's derivative, about 7.5 / (n ln 2)
        assert slope == pytest.approx(0.1, abs=20 / n)

    def test_monotone_in_exponents(self):
        p = BlocklengthParams(50, L=2, dim_a=2)
        prev = math.inf
        for e in np.linspace(0, 1, 11):
            lg = log2_bound_from_exponents({("B1",): e, ("B2",): 0.2, ("B1", "B2"): 0.4}, p)
            assert lg <= prev + 1e-12
            prev = lg


class TestChannelBound:
    def test_constant_broadcast_terms(self, constant_exponents):
        # zero information: E_r = r / 2
        for s, e in constant_exponents.items():
            assert e == pytest.approx(len(s) / 2, abs=1e-6)
        p = BlocklengthParams(20, L=2, dim_a=2)
        rep = one_shot_simulation_bound(constant_broadcast(), (1.0, 1.0), p, exponents=constant_exponents)
        for s, term in rep.per_subset_terms.items():
            assert term == pytest.approx(2 ** len(s) * 2 ** (-20 * len(s) / 2), rel=1e-5)
        hand = 21**7.5 * math.sqrt(2 * 2**-10 + 2 * 2**-10 + 4 * 2**-20)
        assert rep.epsilon_bound == pytest.approx(hand, rel=1e-5)

    def test_constant_broadcast_exponent_lower(self):
        assert simulation_exponent_lower(constant_broadcast(), (2.0, 2.0), FAST) == pytest.approx(0.5, abs=1e-6)

    def test_interior_bound_decreases(self, depolarizing_exponents):
        ch = depolarizing_channel(0.3)
        eps = [
            one_shot_simulation_bound(ch, (2.0,), BlocklengthParams(n, 1, 2), exponents=depolarizing_exponents)
            .log2_epsilon_bound
            for n in (10**2, 10**3, 10**4)
        ]
        assert eps[0] > eps[1] > eps[2]
        assert eps[2] < -100

    def test_slope_at_large_n(self, depolarizing_exponents):
        lower = 0.5 * min(depolarizing_exponents.values())
        slope = bound_slope(depolarizing_exponents, BlocklengthParams(10**5, 1, 2))
        assert slope == pytest.approx(lower, abs=1e-3)

    def test_boundary_rates_zero(self):
        ch = depolarizing_channel(0.3)
        cap = ChannelInformation(ch, None, FAST).capacity
        assert simulation_exponent_lower(ch, (cap,), FAST) == 0.0

    def test_random_broadcast_matches_recomputation(self):
        ch = random_channel(2, (2, 2), 2, seed=3)
        rates = (3.0, 3.0)
        lower = simulation_exponent_lower(ch, rates, FAST)
        assert lower > 0
        independent = []
        for s, r in [(("B1",), 3.0), (("B2",), 3.0), (("B1", "B2"), 6.0)]:
            info = ChannelInformation(ch, s, FAST)
            independent.append(exponent_from_information(info, r, 1e-6).value)
        assert lower == pytest.approx(0.5 * min(independent), abs=1e-6)

    def test_rate_count_mismatch(self):
        with pytest.raises(ShapeMismatch):
            one_shot_simulation_bound(depolarizing_channel(0.3), (1.0, 1.0), BlocklengthParams(1, 1, 2))

    def test_params_mismatch(self):
        with pytest.raises(ShapeMismatch):
            one_shot_simulation_bound(depolarizing_channel(0.3), (1.0,), BlocklengthParams(1, 2, 2))


class TestModerate:
    @pytest.mark.parametrize("t", [0.0, 0.5, -0.1])
    def test_schedule_speed(self, t):
        with pytest.raises(ShapeMismatch):
            ModerateSchedule(t, (10,))

    def test_schedule_grid(self):
        with pytest.raises(ShapeMismatch):
            ModerateSchedule(0.25, ())

    def test_boundary_point_sum_constraint_active(self):
        th = {("B1",): 1.0, ("B2",): 1.0, ("B1", "B2"): 3.0}
        r = boundary_point(("B1", "B2"), th)
        assert sum(r) == pytest.approx(3.0, abs=1e-9)
        assert all(x >= 1.0 - 1e-12 for x in r)

    def test_boundary_point_corner(self):
        th = {("B1",): 1.0, ("B2",): 0.5, ("B1", "B2"): 1.2}
        assert boundary_point(("B1", "B2"), th) == pytest.approx((1.0, 0.5), abs=1e-9)

    @pytest.mark.parametrize("a", [0.3, 0.01])
    def test_moderate_rates_gap(self, a):
        labels = ("B1", "B2")
        th = {("B1",): 1.0, ("B2",): 1.0, ("B1", "B2"): 3.0}
        scales = {("B1",): 1.0, ("B2",): 2.0, ("B1", "B2"): 0.5}
        rates, a_eff = moderate_rates(labels, th, scales, boundary_point(labels, th), a)
        assert a_eff >= a - 1e-12
        for s, t in th.items():
            assert sum(rates[labels.index(l)] for l in s) - t >= scales[s] * a - 1e-12

    def test_constant_channel_closed_form(self):
        ch = constant_channel(np.diag([0.7, 0.3]))
        sched = ModerateSchedule(0.25, (10**2, 10**4), scales={("B",): 1.0})
        tab = moderate_deviation_curve(ch, sched, FAST)
        assert tab.proven_constant == 0.25
        for row in tab.rows:
            a = row.n**-0.25
            assert row.a_n == pytest.approx(a, rel=1e-9)
            hand = 6 * math.log2(row.n + 1) + 0.5 * (1 - row.n * a / 2)
            assert row.log2_bound == pytest.approx(hand, abs=1e-4)
            assert row.normalized_exponent == pytest.approx(-hand / (row.n * a * a), abs=1e-6)
