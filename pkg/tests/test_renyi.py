import math

import numpy as np
import pytest
from scipy.optimize import minimize

from qbroadcast.errors import InvalidOrder, NotPSD, SupportViolation
from qbroadcast.operators import (
    HilbertFactorization,
    density,
    make_rng,
    partial_trace,
    pure_state,
    random_density_operator,
    tensor,
)
from qbroadcast.renyi import (
    ExponentQuery,
    RenyiOrder,
    error_exponent_state,
    golden_section_max,
    multipartite_mutual_information,
    petz_divergence,
    relative_entropy_variance,
    renyi_information,
    renyi_information_value,
    sandwiched_divergence,
    umegaki_divergence,
    von_neumann_entropy,
)

AB = HilbertFactorization.of(A=2, B=2)
PAULIS = [np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1.0, -1.0])]


def bloch_state(r):
    return (np.eye(2) + sum(x * p for x, p in zip(r, PAULIS))) / 2


def sandwiched_oracle(rho, sigma, alpha):
    """D_alpha from an explicit eigendecomposition of sigma (full-rank sigma)."""
    w, v = np.linalg.eigh(sigma)
    s = (v * w ** ((1 - alpha) / (2 * alpha))) @ v.conj().T
    lam = np.linalg.eigvalsh(s @ rho @ s)
    return math.log2(np.sum(np.clip(lam, 0, None) ** alpha)) / (alpha - 1)


def bloch_grid_minimum(rho, tau, alpha, points=10_000):
    """min over qubit sigma of D_alpha(rho || tau (x) sigma) by grid search plus refinement."""
    i = np.arange(points) + 0.5
    phi = np.arccos(1 - 2 * i / points)
    theta = np.pi * (1 + 5**0.5) * i
    radius = (i / points) ** (1 / 3) * 0.999
    grid = np.stack(
        [radius * np.cos(theta) * np.sin(phi), radius * np.sin(theta) * np.sin(phi), radius * np.cos(phi)], 1
    )

    def f(r):
        r = np.asarray(r)
        n = np.linalg.norm(r)
        if n >= 1:
            r = r / n * (1 - 1e-12)
        return sandwiched_oracle(rho, np.kron(tau, bloch_state(r)), alpha)

    vals = [f(r) for r in grid]
    start = grid[int(np.argmin(vals))]
    res = minimize(f, start, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-13})
    return min(res.fun, min(vals))


class TestDivergences:
    @pytest.mark.parametrize("alpha", [1.2, 1.5, 2.0])
    def test_self_divergence(self, alpha):
        rho = random_density_operator(3, seed=1)
        assert sandwiched_divergence(rho, rho, alpha) == pytest.approx(0, abs=1e-10)

    @pytest.mark.parametrize("alpha", [0.5, 1, 1.5, 2, 3])
    def test_commuting_one_bit(self, alpha):
        assert sandwiched_divergence(density(np.diag([1, 0])), np.eye(2) / 2, alpha) == pytest.approx(1)

    def test_support_violation_is_infinite(self):
        assert sandwiched_divergence(density(np.diag([1, 0])), np.diag([0, 1]), 1.5) == math.inf
        assert umegaki_divergence(density(np.diag([1, 0])), np.diag([0, 1])) == math.inf

    def test_not_psd(self):
        with pytest.raises(NotPSD):
            sandwiched_divergence(density(np.eye(2) / 2), np.diag([1.0, -0.5]), 2)

    def test_limit_one_branch(self):
        rho, sigma = random_density_operator(3, seed=2), random_density_operator(3, seed=3)
        assert sandwiched_divergence(rho, sigma, RenyiOrder(limit_one=True)) == pytest.approx(
            umegaki_divergence(rho, sigma)
        )
        near = sandwiched_divergence(rho, sigma, 1 + 1e-6)
        assert near == pytest.approx(umegaki_divergence(rho, sigma), abs=1e-5)

    def test_umegaki_commuting_kl(self):
        rng = make_rng(4)
        for _ in range(10):
            p, q = rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(4))
            kl = float(np.sum(p * np.log2(p / q)))
            assert umegaki_divergence(density(np.diag(p)), np.diag(q)) == pytest.approx(kl, abs=1e-10)

    def test_variance_examples(self):
        rho = random_density_operator(3, seed=5)
        assert relative_entropy_variance(rho, rho) == pytest.approx(0, abs=1e-10)
        p, q = np.array([0.5, 0.5]), np.array([0.75, 0.25])
        llr = np.log2(p / q)
        expected = np.sum(p * llr**2) - np.sum(p * llr) ** 2
        assert relative_entropy_variance(density(np.diag(p)), np.diag(q)) == pytest.approx(expected)
        psi = pure_state([1, 1j, 0], "A")
        assert relative_entropy_variance(psi, np.eye(3) / 3) == pytest.approx(0, abs=1e-10)

    def test_variance_support(self):
        with pytest.raises(SupportViolation):
            relative_entropy_variance(density(np.diag([1, 0])), np.diag([0, 1]))

    def test_petz_examples(self):
        rho = random_density_operator(2, seed=6)
        assert petz_divergence(rho, rho, 1.5) == pytest.approx(0, abs=1e-12)
        p, q = np.diag([0.3, 0.7]), np.diag([0.6, 0.4])
        assert petz_divergence(density(p), q, 1.7) == pytest.approx(sandwiched_divergence(density(p), q, 1.7))
        with pytest.raises(InvalidOrder):
            petz_divergence(rho, rho, 1.0)

    def test_sandwiched_below_petz(self):
        rng = make_rng(7)
        for _ in range(100):
            rho, sigma = random_density_operator(2, seed=rng), random_density_operator(2, seed=rng)
            for alpha in (1.5, 2.0):
                assert sandwiched_divergence(rho, sigma, alpha) <= petz_divergence(rho, sigma, alpha) + 1e-9

    def test_matches_oracle(self):
        rho, sigma = random_density_operator(3, seed=8), random_density_operator(3, seed=9)
        for alpha in (1.1, 1.5, 2.0, 3.0):
            assert sandwiched_divergence(rho, sigma, alpha) == pytest.approx(
                sandwiched_oracle(rho.matrix, sigma.matrix, alpha), abs=1e-12
            )


class TestRenyiInformation:
    @pytest.mark.parametrize("alpha", [1, 1.5, 2])
    def test_product_state_zero(self, alpha):
        a = random_density_operator(HilbertFactorization.of(A=2), seed=1)
        e = random_density_operator(HilbertFactorization.of(E=3), seed=2)
        rep = renyi_information(tensor(a, e), a, "E", alpha)
        assert rep.objective == pytest.approx(0, abs=1e-9)
        assert rep.converged
        assert rep.certificate_gap >= -1e-8

    def test_limit_one_closed_form(self):
        rho = random_density_operator(AB, seed=3)
        tau = random_density_operator(HilbertFactorization.of(A=2), seed=4)
        rep = renyi_information(rho, tau, "B", 1)
        expected = umegaki_divergence(rho, np.kron(tau.matrix, partial_trace(rho, "B").matrix))
        assert rep.objective == pytest.approx(expected, abs=1e-8)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_bloch_grid(self, seed):
        rho = random_density_operator(AB, seed=seed)
        tau = partial_trace(rho, "A")
        rep = renyi_information(rho, tau, "B", 2.0)
        oracle = bloch_grid_minimum(rho.matrix, tau.matrix, 2.0)
        assert rep.objective == pytest.approx(oracle, abs=1e-4)
        assert rep.certificate_gap >= -1e-8

    def test_label_order_irrelevant(self):
        rho = random_density_operator(HilbertFactorization.of(B=2, A=3), seed=5)
        tau = random_density_operator(HilbertFactorization.of(A=3), seed=6)
        direct = renyi_information_value(rho, tau, "B", 1.5)
        swapped = renyi_information_value(rho.reorder(("A", "B")), tau, "B", 1.5)
        assert direct == pytest.approx(swapped, abs=1e-10)

    def test_infinite_when_tau_misses_support(self):
        rho = tensor(density(np.diag([0.5, 0.5]), "A"), density(np.eye(2) / 2, "B"))
        tau = density(np.diag([1.0, 0.0]), "A")
        assert renyi_information(rho, tau, "B", 1.5).objective == math.inf

    def test_monotone_in_alpha(self):
        rng = make_rng(8)
        for _ in range(20):
            rho = random_density_operator(AB, seed=rng)
            tau = random_density_operator(HilbertFactorization.of(A=2), seed=rng)
            vals = [renyi_information_value(rho, tau, "B", a) for a in (1, 1.25, 1.5, 2)]
            assert all(x <= y + 1e-7 for x, y in zip(vals, vals[1:]))

    @pytest.mark.parametrize("alpha", [1.5, 2.0])
    def test_additivity(self, alpha):
        rho = random_density_operator(AB, seed=9)
        tau = partial_trace(rho, "A")
        single = renyi_information_value(rho, tau, "B", alpha, tol=1e-13)
        rho2 = tensor(rho, density(rho.matrix, ("A2", "B2"), (2, 2)))
        tau2 = tensor(tau, density(tau.matrix, "A2"))
        double = renyi_information_value(rho2, tau2, ("B", "B2"), alpha, tol=1e-13)
        assert double == pytest.approx(2 * single, abs=1e-6)

    def test_dimension_bound(self):
        rng = make_rng(10)
        space = HilbertFactorization.of(A=2, B=2, C=2)
        for _ in range(10):
            rho = random_density_operator(space, seed=rng)
            tau = random_density_operator(HilbertFactorization.of(A=2), seed=rng)
            for alpha in (1.5, 2.0):
                full = renyi_information_value(rho, tau, ("B", "C"), alpha)
                part = renyi_information_value(partial_trace(rho, ("A", "B")), tau, "B", alpha)
                assert full <= part + 2 * alpha / (alpha - 1) + 1e-6

    def test_convexity_under_mixing(self):
        rng = make_rng(11)
        for _ in range(10):
            p = float(rng.uniform(0.1, 0.9))
            comps = [random_density_operator(AB, seed=rng) for _ in range(2)]
            taus = [random_density_operator(HilbertFactorization.of(A=2), seed=rng) for _ in range(2)]
            mix = density(p * comps[0].matrix + (1 - p) * comps[1].matrix, ("A", "B"), (2, 2))
            tau_mix = density(p * taus[0].matrix + (1 - p) * taus[1].matrix, "A")
            h = -p * math.log2(p) - (1 - p) * math.log2(1 - p)
            for alpha in (1.5, 2.0):
                lhs = renyi_information_value(mix, tau_mix, "B", alpha)
                rhs = p * renyi_information_value(comps[0], taus[0], "B", alpha)
                rhs += (1 - p) * renyi_information_value(comps[1], taus[1], "B", alpha)
                assert lhs <= rhs + h + 1e-6


class TestMultipartite:
    def test_product_zero(self):
        states = [random_density_operator(HilbertFactorization.of(**{l: 2}), seed=i) for i, l in enumerate("ABE")]
        rho = tensor(states)
        for alpha in (1, 1.5):
            assert multipartite_mutual_information(rho, ["A", "B"], alpha) == pytest.approx(0, abs=1e-9)

    def test_bell_pair(self):
        bell = pure_state([1, 0, 0, 1], ("A", "B"), (2, 2))
        assert multipartite_mutual_information(bell, ["A"], 1) == pytest.approx(2)

    def test_ghz_entropy_oracle(self):
        ghz = pure_state([1, 0, 0, 0, 0, 0, 0, 1], ("A", "B", "C"), (2, 2, 2))
        expected = sum(von_neumann_entropy(partial_trace(ghz, l)) for l in "ABC") - von_neumann_entropy(ghz)
        assert expected == pytest.approx(3)
        assert multipartite_mutual_information(ghz, ["A", "B"], 1) == pytest.approx(expected)

    def test_matches_renyi_information(self):
        rho = random_density_operator(HilbertFactorization.of(A=2, B=2, E=2), seed=12)
        tau = tensor(partial_trace(rho, "A"), partial_trace(rho, "B"))
        direct = renyi_information_value(rho, tau, "E", 1.5)
        assert multipartite_mutual_information(rho, ["A", "B"], 1.5) == pytest.approx(direct)


class TestExponent:
    def setup_method(self):
        self.rho = random_density_operator(AB, seed=13)
        self.tau = partial_trace(self.rho, "A")
        self.i1 = renyi_information_value(self.rho, self.tau, "B", 1)

    def test_below_threshold(self):
        for rate in (0.0, self.i1 / 2, self.i1):
            value, alpha = error_exponent_state(self.rho, self.tau, "B", rate)
            assert value == 0.0 and alpha == 1.0

    def test_product_state(self):
        a = random_density_operator(HilbertFactorization.of(A=2), seed=1)
        e = random_density_operator(HilbertFactorization.of(E=2), seed=2)
        value, alpha = error_exponent_state(tensor(a, e), a, "E", ExponentQuery(0.8))
        assert value == pytest.approx(0.4, abs=1e-8)
        assert alpha == pytest.approx(2.0)

    def test_matches_alpha_grid(self):
        rate = self.i1 + 0.5
        value, alpha = error_exponent_state(self.rho, self.tau, "B", rate)
        grid = np.linspace(1, 2, 2000)[1:]
        oracle = max(
            (a - 1) / a * (rate - renyi_information_value(self.rho, self.tau, "B", a, tol=1e-12)) for a in grid
        )
        assert value == pytest.approx(max(oracle, 0.0), abs=1e-5)

    def test_positivity_threshold(self):
        below = error_exponent_state(self.rho, self.tau, "B", self.i1 - 1e-5).value
        above = error_exponent_state(self.rho, self.tau, "B", self.i1 + 1e-5).value
        assert below == 0.0
        assert above > 0.0

    def test_additivity(self):
        rate = self.i1 + 0.3
        single = error_exponent_state(self.rho, self.tau, "B", rate).value
        rho2 = tensor(self.rho, density(self.rho.matrix, ("A2", "B2"), (2, 2)))
        tau2 = tensor(self.tau, density(self.tau.matrix, "A2"))
        double = error_exponent_state(rho2, tau2, ("B", "B2"), 2 * rate).value
        assert double == pytest.approx(2 * single, abs=1e-5)

    def test_negative_rate_rejected(self):
        with pytest.raises(InvalidOrder):
            ExponentQuery(-0.1)

    def test_golden_section(self):
        x, fx = golden_section_max(lambda a: -(a - 1.3) ** 2, 1, 2, 1e-8)
        assert x == pytest.approx(1.3, abs=1e-7)
        x, fx = golden_section_max(lambda a: a, 1, 2, 1e-6)
        assert x == 2
