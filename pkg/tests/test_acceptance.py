"""One test per acceptance criterion; each prints a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines.
"""

import itertools
import json
import math
import time

import numpy as np
import pytest

from qbroadcast.channels import (
    ChannelInformation,
    OptimizerConfig,
    capacity_region,
    channel_error_exponent,
    channel_mutual_information,
    choi_matrix,
    complementary_dephasing_channel,
    constant_channel,
    dephasing_channel,
    depolarizing_channel,
    identity_channel,
    product_broadcast_channel,
    random_channel,
)
from qbroadcast.cli import COMMAND_DEFAULTS, main
from qbroadcast.convex_split import (
    CopySpec,
    annihilation_residual,
    convex_split_bound,
    convex_split_error,
    l2_orthogonality_check,
    lp_map_norm_probe,
    map_norm_bound,
    mean_zero_decomposition_check,
    random_split_instance,
    unipartite_bound,
)
from qbroadcast.operators import (
    HilbertFactorization,
    LabeledOperator,
    density,
    make_rng,
    partial_trace,
    partial_trace_array,
    random_density_operator,
    tensor,
)
from qbroadcast.renyi import (
    error_exponent_state,
    petz_divergence,
    renyi_information_value,
    sandwiched_divergence,
    von_neumann_entropy,
)
from qbroadcast.simulation import (
    BlocklengthParams,
    ModerateSchedule,
    bound_slope,
    channel_subset_exponents,
    composite_within_prefactor,
    moderate_deviation_curve,
    prefactor,
    prefactor_squared,
)
from qbroadcast.state_splitting import random_qss_instance, receiver_split_instance, run_qss_protocol

OPT = OptimizerConfig(grid_points=400, alpha_grid_points=50, probes=10)


def verdict(num, title, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {num:2d} {title}: {detail}")
    assert ok, detail


def random_operator(space, rng):
    d = space.total_dim
    return LabeledOperator(space, rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))


def party_space(num_parties, with_e=True):
    labels = tuple("ABC"[:num_parties]) + (("E",) if with_e else ())
    return labels[:num_parties], HilbertFactorization(labels, (2,) * len(labels))


def random_taus(labels, rng):
    return {l: random_density_operator(2, seed=rng).matrix for l in labels}


def test_01_mean_zero_decomposition():
    start = time.perf_counter()
    rng = make_rng(101)
    worst = 0.0
    for L in (1, 2, 3):
        labels, space = party_space(L)
        for _ in range(100):
            worst = max(worst, mean_zero_decomposition_check(random_operator(space, rng), random_taus(labels, rng)))
    elapsed = time.perf_counter() - start
    verdict(1, "mean-zero decomposition", worst <= 1e-9 and elapsed < 30,
            f"max residual {worst:.2e} (tol 1e-9), {elapsed:.1f} s (limit 30 s)")


def test_02_annihilation_fixation():
    rng = make_rng(102)
    worst = 0.0
    for L in (1, 2, 3):
        labels, space = party_space(L)
        for _ in range(20):
            worst = max(worst, annihilation_residual(random_operator(space, rng), random_taus(labels, rng)))
    verdict(2, "annihilation/fixation", worst <= 1e-10, f"max residual {worst:.2e} over all subsets (tol 1e-10)")


def split_counts(rng, L):
    # two-party draws keep the copied space at dimension <= 1024
    while True:
        counts = tuple(int(m) for m in rng.integers(1, 9, size=L))
        if L == 1 or sum(counts) <= 9:
            return counts


def test_03_convex_split_main_bound():
    start = time.perf_counter()
    rng = make_rng(103)
    violations, worst_slack, evaluated = 0, -math.inf, 0
    for trial in range(56):
        L = 1 + trial % 2
        inst = random_split_instance(L, split_counts(rng, L), make_rng(103, trial))
        v = convex_split_bound(inst)
        evaluated += v.satisfied is not None
        violations += v.satisfied is False
        worst_slack = max(worst_slack, v.delta - v.bound)
    elapsed = time.perf_counter() - start
    ok = violations == 0 and evaluated >= 50 and elapsed < 300
    verdict(3, "convex-split main bound", ok,
            f"{evaluated} instances, {violations} violations, max(delta - bound) {worst_slack:.3f}, {elapsed:.0f} s")


@pytest.mark.parametrize("counts", [(1,), (4,), (8,), (1, 1), (2, 3), (3, 3), (1, 1, 2)])
def test_04_exact_split_zero(counts):
    inst = random_split_instance(len(counts), counts, seed=104, tau_mode="product")
    delta = convex_split_error(inst)
    verdict(4, f"exact split {counts}", delta <= 1e-12, f"delta {delta:.2e} (tol 1e-12)")


def test_05_single_party_formula():
    worst = 0.0
    for seed in range(20):
        inst = random_split_instance(1, (1 + seed % 6,), seed=seed)
        worst = max(worst, abs(convex_split_bound(inst).bound - unipartite_bound(inst)))
    verdict(5, "one-party bound equals unipartite bound", worst <= 1e-12, f"max difference {worst:.2e} on 20 instances")


def test_06_l2_orthogonality():
    rng = make_rng(106)
    worst = 0.0
    for trial in range(50):
        L = 1 + trial % 2
        labels, space = party_space(L)
        counts = tuple(int(m) for m in rng.integers(1, 4, size=L))
        sigma_e = random_density_operator(2, seed=rng).matrix
        x = random_operator(space, rng)
        worst = max(worst, l2_orthogonality_check(x, CopySpec(counts, labels, ("E",)), random_taus(labels, rng),
                                                  sigma_e))
    verdict(6, "L2 orthogonality of copies", worst <= 1e-10, f"max |inner product| {worst:.2e} on 50 instances")


def test_07_map_norm_probes():
    cases = [
        ("T p=1", lp_map_norm_probe("T", 1, 200, 71), map_norm_bound("T", 1)),
        ("T p=2", lp_map_norm_probe("T", 2, 200, 72), map_norm_bound("T", 2)),
        ("T_S |S|=2 of 3", lp_map_norm_probe("T_S", 2, 200, 73, parts=("A", "B", "C"), subset=("A", "C")),
         map_norm_bound("T_S", 2, subset_size=2)),
        ("T_S |S|=1 p=1", lp_map_norm_probe("T_S", 1, 200, 74, subset=("A",)), map_norm_bound("T_S", 1, 1)),
        ("theta T p=1", lp_map_norm_probe("theta_T", 1, 200, 75, counts=(2, 2)),
         map_norm_bound("theta_T", 1, counts=(2, 2))),
        ("theta T p=2", lp_map_norm_probe("theta_T", 2, 200, 76, counts=(2, 2)),
         map_norm_bound("theta_T", 2, counts=(2, 2))),
    ]
    ok = all(v <= b + 1e-8 for _, v, b in cases)
    detail = ", ".join(f"{name} {v:.3f}<={b:.3f}" for name, v, b in cases)
    verdict(7, "map-norm probes", ok, detail)


def test_08_divergence_properties():
    rng = make_rng(108)
    orders = (1.0, 1.25, 1.5, 2.0)
    mono = dpi = petz = 0
    for _ in range(100):
        rho, sigma = random_density_operator(4, seed=rng), random_density_operator(4, seed=rng)
        vals = [sandwiched_divergence(rho, sigma, a) for a in orders]
        mono += any(b < a - 1e-7 for a, b in zip(vals, vals[1:]))
        petz += any(sandwiched_divergence(rho, sigma, a) > petz_divergence(rho, sigma, a) + 1e-9 for a in (1.25, 1.5, 2))
    space = HilbertFactorization.of(A=2, B=2, C=2)
    for _ in range(100):
        rho, sigma = random_density_operator(space, seed=rng), random_density_operator(space, seed=rng)
        for a in (1.0, 1.5, 2.0):
            reduced = sandwiched_divergence(partial_trace(rho, ("A", "B")), partial_trace(sigma, ("A", "B")), a)
            dpi += reduced > sandwiched_divergence(rho, sigma, a) + 1e-8
    verdict(8, "divergence properties", mono == dpi == petz == 0,
            f"violations: monotone {mono}, data processing {dpi}, sandwiched<=Petz {petz} (100 instances each)")


def test_09_additivity():
    rng = make_rng(109)
    worst_i = worst_e = 0.0
    for _ in range(3):
        rho = random_density_operator(HilbertFactorization.of(A=2, B=2), seed=rng)
        tau = partial_trace(rho, "A")
        rho2 = tensor(rho, density(rho.matrix, ("A2", "B2"), (2, 2)))
        tau2 = tensor(tau, density(tau.matrix, "A2"))
        for a in (1.5, 2.0):
            single = renyi_information_value(rho, tau, "B", a, tol=1e-13)
            double = renyi_information_value(rho2, tau2, ("B", "B2"), a, tol=1e-13)
            worst_i = max(worst_i, abs(double - 2 * single))
        rate = renyi_information_value(rho, tau, "B", 1) + 0.3
        e1 = error_exponent_state(rho, tau, "B", rate).value
        e2 = error_exponent_state(rho2, tau2, ("B", "B2"), 2 * rate).value
        worst_e = max(worst_e, abs(e2 - 2 * e1))
    verdict(9, "two-copy additivity", worst_i <= 1e-6 and worst_e <= 1e-5,
            f"max |I2 - 2I| {worst_i:.2e} (tol 1e-6), max |E2 - 2E| {worst_e:.2e} (tol 1e-5)")


def test_10_dimension_and_convexity_bounds():
    rng = make_rng(110)
    dim_viol = conv_viol = 0
    dim_slack = conv_slack = math.inf
    space = HilbertFactorization.of(A=2, B=2, C=2)
    for _ in range(50):
        rho = random_density_operator(space, seed=rng)
        tau = random_density_operator(HilbertFactorization.of(A=2), seed=rng)
        a = float(rng.choice([1.5, 2.0]))
        full = renyi_information_value(rho, tau, ("B", "C"), a)
        part = renyi_information_value(partial_trace(rho, ("A", "B")), tau, "B", a)
        s = part + 2 * a / (a - 1) * math.log2(2) - full
        dim_slack = min(dim_slack, s)
        dim_viol += s < -1e-6
    for trial in range(50):
        L = 1 + trial % 2
        labels = ("A", "B")[:L]
        sp = HilbertFactorization(labels + ("E",), (2,) * (L + 1))
        p = float(rng.uniform(0.1, 0.9))
        comps = [random_density_operator(sp, seed=rng) for _ in range(2)]
        taus = [[random_density_operator(HilbertFactorization((l,), (2,)), seed=rng) for l in labels] for _ in range(2)]
        mix = density(p * comps[0].matrix + (1 - p) * comps[1].matrix, sp.labels, sp.dims)
        tau_mix = tensor([density(p * t0.matrix + (1 - p) * t1.matrix, l) for l, t0, t1 in zip(labels, *taus)])
        h = -p * math.log2(p) - (1 - p) * math.log2(1 - p)
        a = float(rng.choice([1.5, 2.0]))
        lhs = renyi_information_value(mix, tau_mix, "E", a)
        rhs = p * renyi_information_value(comps[0], tensor(taus[0]), "E", a)
        rhs += (1 - p) * renyi_information_value(comps[1], tensor(taus[1]), "E", a)
        s = rhs + L * h - lhs
        conv_slack = min(conv_slack, s)
        conv_viol += s < -1e-6
    verdict(10, "dimension bound and convexity", dim_viol == conv_viol == 0,
            f"violations {dim_viol}/{conv_viol}, min slack {dim_slack:.3f}/{conv_slack:.3f} (50 instances each)")


def choi_information(ch):
    """I(B:R) at the maximally mixed input, from the normalized Choi state."""
    j = choi_matrix(ch) / ch.d_in
    dims = (ch.d_out, ch.d_in)
    return (von_neumann_entropy(partial_trace_array(j, dims, [0])) + von_neumann_entropy(partial_trace_array(j, dims, [1]))
            - von_neumann_entropy(j))


def test_11_positivity_threshold():
    rows = []
    for seed in (1, 2, 3):
        rho = random_density_operator(HilbertFactorization.of(A=2, B=2), seed=seed)
        tau = partial_trace(rho, "A")
        i1 = (von_neumann_entropy(partial_trace(rho, "A")) + von_neumann_entropy(partial_trace(rho, "B"))
              - von_neumann_entropy(rho))
        below = error_exponent_state(rho, tau, "B", i1 - 1e-5).value
        above = error_exponent_state(rho, tau, "B", i1 + 1e-5).value
        rows.append((f"state {seed}", below, above))
    for name, ch in [("depolarizing 0.3", depolarizing_channel(0.3)), ("dephasing 0.2", dephasing_channel(0.2))]:
        # unital qubit channels: the maximally mixed input is optimal
        i1 = choi_information(ch)
        info = ChannelInformation(ch, None, OPT)
        below = channel_error_exponent(ch, None, i1 - 1e-5, OPT, info=info).value
        above = channel_error_exponent(ch, None, i1 + 1e-5, OPT, info=info.fork()).value
        rows.append((name, below, above))
    ok = all(b == 0.0 and a > 0.0 for _, b, a in rows)
    verdict(11, "exponent positivity threshold", ok,
            "; ".join(f"{n}: E(I-1e-5)={b:.1e}, E(I+1e-5)={a:.1e}" for n, b, a in rows))


def test_12_capacity_thresholds():
    ident = channel_mutual_information(identity_channel(), None, 1.0, OPT).value
    const = channel_mutual_information(constant_channel(np.diag([0.6, 0.4])), None, 1.0, OPT).value
    prod = capacity_region(product_broadcast_channel(depolarizing_channel(0.2), np.diag([0.7, 0.3])), OPT).thresholds
    mono_worst = math.inf
    for ch in (complementary_dephasing_channel(0.3), random_channel(2, (2, 2), 2, seed=12)):
        th = capacity_region(ch, OPT).thresholds
        for s, t in itertools.permutations(th, 2):
            if set(s) < set(t):
                mono_worst = min(mono_worst, th[t] - th[s])
    ok = (abs(ident - 2) <= 1e-3 and abs(const) <= 1e-6 and prod[("B2",)] <= 1e-5
          and abs(prod[("B1", "B2")] - prod[("B1",)]) <= 1e-4 and mono_worst >= -1e-5)
    verdict(12, "capacity thresholds", ok,
            f"identity {ident:.6f}, constant {const:.1e}, product I(B2) {prod[('B2',)]:.1e}, "
            f"I(B1B2)-I(B1) {prod[('B1', 'B2')] - prod[('B1',)]:.1e}, min inclusion slack {mono_worst:.3f}")


def test_13_state_splitting_demo():
    start = time.perf_counter()
    worst = -math.inf
    n = 0
    for seed in range(12):
        rates = (1, 1) if seed % 3 else (1, 0)
        inst = random_qss_instance(rates, seed=1300 + seed)
        run = run_qss_protocol(inst)
        eps = convex_split_error(receiver_split_instance(inst))
        worst = max(worst, run.achieved_error - math.sqrt(2 * eps))
        n += 1
    elapsed = time.perf_counter() - start
    verdict(13, "state-splitting demo", worst <= 1e-6 and elapsed < 120,
            f"{n} instances, max(achieved - sqrt(2 eps')) {worst:.3f}, {elapsed:.0f} s (limit 120 s)")


def test_14_prefactor_bookkeeping():
    k = BlocklengthParams(1, L=2, dim_a=2)
    exact = prefactor_squared(k) == 2**15 and prefactor(k) == 2**7.5
    formula = all(
        prefactor_squared(BlocklengthParams(n, L, d)) == (n + 1) ** ((3 + L) * (d * d - 1))
        for n in (0, 1, 5, 99) for L in (1, 2, 3) for d in (2, 3)
    )
    composite = all(composite_within_prefactor(BlocklengthParams(n, 2, d)) for n in range(1001) for d in (2, 3))
    verdict(14, "prefactor bookkeeping", exact and formula and composite,
            f"k_1(|A|=2, L=2) = {prefactor(k):.6f} = 2^7.5: {exact}; general formula: {formula}; "
            f"composite <= k_n for n <= 1000: {composite}")


def test_15_exponent_lower_bound_slope():
    ch = complementary_dephasing_channel(0.3)
    exps = channel_subset_exponents(ch, (2.0, 2.0), OPT)
    lower = 0.5 * min(exps.values())
    slope = bound_slope(exps, BlocklengthParams(10**5, 2, 2))
    verdict(15, "exponent lower bound", lower > 0 and abs(slope - lower) <= 1e-3,
            f"half min exponent {lower:.6f}, slope at n=1e5 {slope:.6f}, gap {abs(slope - lower):.1e} (tol 1e-3)")


def test_16_moderate_deviation():
    sched = ModerateSchedule(0.25, (10**4, 10**6, 10**8, 10**10))
    tab = moderate_deviation_curve(depolarizing_channel(0.3), sched, OPT)
    vals = [r.normalized_exponent for r in tab.rows]
    verdict(16, "moderate deviation", vals[-1] >= 0.25 - 0.05,
            f"normalized exponents {', '.join(f'{v:.3f}' for v in vals)} (floor 0.2), monotone {tab.is_monotone()}")


SMALL = {"optimizer": {"grid_points": 60, "alpha_grid_points": 12, "probes": 2}}
DETERMINISM_CONFIGS = {
    "divergence": {"trials": 4},
    "renyi-info": {"trials": 3, "orders": [1.0, 2.0]},
    "convex-split": {"trials": 6, "parties": 2, "max_count": 3},
    "qss-bound": {"trials": 3},
    "qss-demo": {"trials": 3},
    "capacity-region": {"channel": {"preset": "complementary_dephasing", "p": 0.3}, **SMALL},
    "exponent": {"rates": [2.0], **SMALL},
    "simulate-bound": {"rates": [2.0], "n_grid": [10, 1000], **SMALL},
    "moderate": {"n_grid": [10**8], **SMALL},
}
RUNS = (("json", 1), ("json", 1), ("json", 4), ("csv", 1), ("csv", 4))


def test_17_determinism(tmp_path):
    assert set(DETERMINISM_CONFIGS) == set(COMMAND_DEFAULTS)
    mismatched = []
    for command, extra in DETERMINISM_CONFIGS.items():
        cfg = tmp_path / f"{command}.json"
        cfg.write_text(json.dumps({"seed": 17, **extra}))
        outputs = {"json": set(), "csv": set()}
        for run, (fmt, workers) in enumerate(RUNS):
            out = tmp_path / f"{command}-{run}.{fmt}"
            main([command, "--config", str(cfg), "--workers", str(workers), "--format", fmt, "--out", str(out)])
            outputs[fmt].add(out.read_bytes())
        if any(len(v) != 1 for v in outputs.values()):
            mismatched.append(command)
    verdict(17, "CLI determinism", not mismatched,
            f"{len(DETERMINISM_CONFIGS)} commands, runs (format, workers) {RUNS}; mismatched: {mismatched}")
