"""Multipartite convex splitting.

Given a state ``rho`` on ``A_1 ... A_L E`` and reference states ``tau_l`` on
each ``A_l``, the convex-split state on ``M_l`` copies of every ``A_l`` is

    omega = (1/M) sum_m rho_{A_{1,m_1} ... A_{L,m_L} E} (x) tau on all other copies,

and its trace distance ``Delta`` to ``(x)_l tau_l^{(x) M_l} (x) rho_E`` is
bounded by ``(1/2) sum_{S nonempty} 2^|S| 2^(-E_{log M_S}(rho_{A_S E} || tau_{A_S}))``.

Copy ``j`` (zero-based) of part ``A`` carries the label ``"A[j]"``. The big
space is ordered part by part, copies in increasing order, then the residual
labels.

The module also provides the tau-preserving conditional expectations
``E_S``, the mean-zero maps ``T_S`` and the copy embeddings ``pi_m`` used in the
analysis of the bound, together with numerical checks of their identities.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import (
    DimensionCapExceeded,
    IndexOutOfRange,
    LabelNotFound,
    ShapeMismatch,
    SpaceMismatch,
    SupportViolation,
)
from .operators import (
    DEFAULT_DIM_CAP,
    DensityOperator,
    HilbertFactorization,
    LabeledOperator,
    _trusted_density,
    as_labels,
    hermitize,
    kosaki_norm,
    kron_all,
    make_rng,
    partial_trace,
    permute_factors,
    psd_power,
    random_density_operator,
    tensor,
)
from .renyi import SUPPORT_LEAK_TOL, error_exponent_state, support_leak


def copy_label(label: str, j: int) -> str:
    return f"{label}[{j}]"


def nonempty_subsets(items: Sequence) -> list[tuple]:
    """All nonempty subsets, by increasing size, each in the order of ``items``."""
    items = list(items)
    return [c for k in range(1, len(items) + 1) for c in itertools.combinations(items, k)]


@dataclass(frozen=True)
class CopySpec:
    """Number of copies ``M_l`` of each split part plus the residual system.

    Attributes:
        counts: ``(M_1, ..., M_L)``.
        part_labels: labels of ``A_1 ... A_L``.
        residual_labels: labels forming ``E`` (may be empty).
    """

    counts: tuple[int, ...]
    part_labels: tuple[str, ...]
    residual_labels: tuple[str, ...] = ()

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        parts = as_labels(self.part_labels)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "part_labels", parts)
        object.__setattr__(self, "residual_labels", as_labels(self.residual_labels))
        if len(counts) != len(parts):
            raise ShapeMismatch(f"{len(counts)} counts for {len(parts)} parts")
        if any(c < 1 for c in counts):
            raise ShapeMismatch(f"counts must be >= 1, got {counts}")

    def copy_labels(self, part: str) -> tuple[str, ...]:
        return tuple(copy_label(part, j) for j in range(self.counts[self.part_labels.index(part)]))

    def big_labels(self) -> tuple[str, ...]:
        labels = [l for p in self.part_labels for l in self.copy_labels(p)]
        return tuple(labels) + self.residual_labels

    def big_space(self, small: HilbertFactorization) -> HilbertFactorization:
        """Factorization of the copied space given the one-copy factorization."""
        dims = []
        for p, c in zip(self.part_labels, self.counts):
            dims += [small.dims[small.index(p)]] * c
        dims += [small.dims[small.index(l)] for l in self.residual_labels]
        return HilbertFactorization(self.big_labels(), tuple(dims))

    def multi_indices(self):
        return itertools.product(*(range(c) for c in self.counts))

    def subset_count(self, subset: Sequence[str]) -> int:
        """``M_S``: product of the counts of the parts in ``subset``."""
        return int(np.prod([self.counts[self.part_labels.index(p)] for p in subset]))


@dataclass(frozen=True, eq=False)
class SplitInstance:
    """State, reference states and copy counts of a convex-split problem.

    ``rho`` must live on exactly the part and residual labels of ``copies``;
    each ``tau`` lives on one part, in the order of ``copies.part_labels``.

    Raises:
        SupportViolation: if ``supp rho_{A_l}`` is not inside ``supp tau_l``.
    """

    rho: DensityOperator
    taus: tuple[DensityOperator, ...]
    copies: CopySpec

    def __post_init__(self):
        taus = tuple(self.taus)
        object.__setattr__(self, "taus", taus)
        parts = self.copies.part_labels
        if len(taus) != len(parts):
            raise ShapeMismatch(f"{len(taus)} tau states for {len(parts)} parts")
        if sorted(parts + self.copies.residual_labels) != sorted(self.rho.labels):
            raise SpaceMismatch(
                f"rho labels {list(self.rho.labels)} differ from parts {list(parts)} "
                f"plus residual {list(self.copies.residual_labels)}"
            )
        for p, t in zip(parts, taus):
            if t.labels != (p,) or t.dim != self.rho.space.dim(p):
                raise SpaceMismatch(f"tau for {p!r} lives on {t.labels} with dim {t.dim}")
            if support_leak(partial_trace(self.rho, p).matrix, t.matrix) > SUPPORT_LEAK_TOL:
                raise SupportViolation(f"supp rho_{p} is not inside supp tau_{p}")

    @property
    def ordered_rho(self) -> DensityOperator:
        """``rho`` with factors in the order parts, then residual."""
        return self.rho.reorder(self.copies.part_labels + self.copies.residual_labels)

    def big_space(self) -> HilbertFactorization:
        return self.copies.big_space(self.rho.space)

    def tau_of(self, part: str) -> DensityOperator:
        return self.taus[self.copies.part_labels.index(part)]


@dataclass(frozen=True)
class SplitVerdict:
    """Exact error versus the subset-exponent bound.

    ``satisfied`` is None when the copied space exceeds the dimension cap and
    ``delta`` was not evaluated (it is then NaN).
    """

    delta: float
    bound: float
    per_subset_exponents: dict = field(default_factory=dict)
    satisfied: Optional[bool] = None


def _check_cap(space: HilbertFactorization, dim_cap: int):
    if space.total_dim > dim_cap:
        raise DimensionCapExceeded(f"dimension {space.total_dim} exceeds cap {dim_cap}")


def _place(blocks: Sequence[tuple[tuple[str, ...], np.ndarray]], space: HilbertFactorization) -> np.ndarray:
    """Kronecker product of labeled blocks, permuted into the order of ``space``."""
    labels = [l for lab, _ in blocks for l in lab]
    mat = kron_all(m for _, m in blocks)
    dims = [space.dims[space.index(l)] for l in labels]
    perm = [labels.index(l) for l in space.labels]
    return permute_factors(mat, dims, perm)


def build_convex_split_state(inst: SplitInstance, dim_cap: int = DEFAULT_DIM_CAP) -> DensityOperator:
    """The convex-split mixture ``omega`` on the copied space.

    Raises:
        DimensionCapExceeded: if the copied space is larger than ``dim_cap``.
    """
    cs = inst.copies
    space = inst.big_space()
    _check_cap(space, dim_cap)
    rho = inst.ordered_rho.matrix
    total = np.zeros((space.total_dim, space.total_dim), dtype=complex)
    for m in cs.multi_indices():
        slots = tuple(copy_label(p, j) for p, j in zip(cs.part_labels, m))
        blocks = [(slots + cs.residual_labels, rho)]
        for p, j in zip(cs.part_labels, m):
            tau = inst.tau_of(p).matrix
            blocks += [((copy_label(p, k),), tau) for k in range(cs.counts[cs.part_labels.index(p)]) if k != j]
        total += _place(blocks, space)
    total /= math.prod(cs.counts)
    return _trusted_density(space, hermitize(total))


def product_reference_state(inst: SplitInstance, dim_cap: int = DEFAULT_DIM_CAP) -> DensityOperator:
    """``(x)_l tau_l^{(x) M_l} (x) rho_E`` on the copied space."""
    cs = inst.copies
    space = inst.big_space()
    _check_cap(space, dim_cap)
    mats = [inst.tau_of(p).matrix for p in cs.part_labels for _ in range(cs.counts[cs.part_labels.index(p)])]
    if cs.residual_labels:
        mats.append(partial_trace(inst.rho, cs.residual_labels).reorder(cs.residual_labels).matrix)
    return _trusted_density(space, kron_all(mats))


def convex_split_error(inst: SplitInstance, dim_cap: int = DEFAULT_DIM_CAP) -> float:
    """Exact ``Delta = (1/2) || omega - (x) tau^{(x) M} (x) rho_E ||_1``."""
    diff = build_convex_split_state(inst, dim_cap).matrix - product_reference_state(inst, dim_cap).matrix
    w = np.linalg.eigvalsh(hermitize(diff))
    return float(min(1.0, 0.5 * np.sum(np.abs(w))))


def subset_exponents(inst: SplitInstance, **kwargs) -> dict[tuple[str, ...], float]:
    """``E_{log2 M_S}(rho_{A_S E} || tau_{A_S})`` for every nonempty subset ``S``."""
    cs = inst.copies
    out = {}
    for subset in nonempty_subsets(cs.part_labels):
        rho_s = partial_trace(inst.rho, subset + cs.residual_labels).reorder(subset + cs.residual_labels)
        tau_s = tensor([inst.tau_of(p) for p in subset])
        rate = math.log2(cs.subset_count(subset))
        out[subset] = error_exponent_state(rho_s, tau_s, cs.residual_labels, rate, **kwargs).value
    return out


def bound_from_exponents(exponents: Mapping[tuple, float]) -> float:
    """``(1/2) sum_S 2^|S| 2^(-E_S)``."""
    return 0.5 * sum(2 ** len(s) * 2 ** (-e) for s, e in exponents.items())


def unipartite_bound(inst: SplitInstance, **kwargs) -> float:
    """One-party bound ``2^(-E_{log2 M}(rho_{AE} || tau_A))``."""
    cs = inst.copies
    if len(cs.part_labels) != 1:
        raise ShapeMismatch("the unipartite bound needs exactly one split part")
    (part,) = cs.part_labels
    rho = inst.ordered_rho
    e = error_exponent_state(rho, inst.taus[0], cs.residual_labels, math.log2(cs.counts[0]), **kwargs).value
    return 2 ** (-e)


def convex_split_bound(inst: SplitInstance, dim_cap: int = DEFAULT_DIM_CAP, **kwargs) -> SplitVerdict:
    """Evaluate the subset-exponent bound and, when it fits the cap, the exact error."""
    exps = subset_exponents(inst, **kwargs)
    bound = bound_from_exponents(exps)
    if inst.big_space().total_dim > dim_cap:
        return SplitVerdict(math.nan, bound, exps, None)
    delta = convex_split_error(inst, dim_cap)
    return SplitVerdict(delta, bound, exps, bool(delta <= bound + 1e-8))


# ---------------------------------------------------------------------------
# Conditional expectations and mean-zero maps


def _tau_matrices(taus) -> dict[str, np.ndarray]:
    """Normalize ``taus`` (mapping label -> state, or a sequence of one-label states)."""
    if isinstance(taus, Mapping):
        return {l: np.asarray(t.matrix if isinstance(t, LabeledOperator) else t) for l, t in taus.items()}
    out = {}
    for t in taus:
        (label,) = t.labels
        out[label] = np.asarray(t.matrix)
    return out


def _cond_exp(mat: np.ndarray, dims: Sequence[int], idx: Sequence[int], tau: np.ndarray) -> np.ndarray:
    """``Tr_S[(tau_S (x) 1) X] (x) 1_S`` for factors ``idx`` of a matrix with ``dims``."""
    n = len(dims)
    rest = [i for i in range(n) if i not in idx]
    order = list(idx) + rest
    ds = int(np.prod([dims[i] for i in idx]))
    dr = int(np.prod([dims[i] for i in rest])) if rest else 1
    x = permute_factors(mat, dims, order).reshape(ds, dr, ds, dr)
    y = np.einsum("ij,jaib->ab", tau, x)
    out = np.kron(np.eye(ds), y)
    inverse = [order.index(i) for i in range(n)]
    return permute_factors(out, [dims[i] for i in order], inverse)


def conditional_expectation(x: LabeledOperator, subset, taus) -> LabeledOperator:
    """tau-preserving conditional expectation ``E_S`` placed back in ``x``'s label order.

    Args:
        x: operator on a space containing every label of ``subset``.
        subset: labels ``S`` to average out (empty gives ``x`` itself).
        taus: mapping label -> reference state, or a sequence of one-label states.

    Raises:
        LabelNotFound: if a label of ``subset`` is missing from ``x`` or ``taus``.
    """
    subset = as_labels(subset)
    if not subset:
        return x
    tm = _tau_matrices(taus)
    for l in subset:
        if l not in tm:
            raise LabelNotFound(f"no reference state for {l!r}")
    idx = [x.space.index(l) for l in subset]
    order = sorted(range(len(idx)), key=lambda k: idx[k])
    idx = [idx[k] for k in order]
    tau = kron_all(tm[subset[k]] for k in order)
    return LabeledOperator(x.space, _cond_exp(x.matrix, x.dims, idx, tau))


def mean_zero_map(x: LabeledOperator, subset, taus, parts=None) -> LabeledOperator:
    """``T_S(X) = E_{S^c} sum_{R subset S} (-1)^|R| E_R(X)``.

    ``parts`` lists the split labels ``[L]`` (default: the labels of ``taus``);
    ``S^c`` is taken within ``parts``, so residual labels are spectators.
    """
    tm = _tau_matrices(taus)
    parts = tuple(tm) if parts is None else as_labels(parts)
    subset = as_labels(subset)
    comp = tuple(l for l in parts if l not in subset)
    acc = np.zeros_like(x.matrix)
    for k in range(len(subset) + 1):
        for r in itertools.combinations(subset, k):
            acc = acc + (-1) ** k * conditional_expectation(x, r, tm).matrix
    return conditional_expectation(LabeledOperator(x.space, acc), comp, tm)


def _opnorm(m: np.ndarray) -> float:
    return float(np.linalg.norm(m, 2)) if m.size else 0.0


def mean_zero_decomposition_check(x: LabeledOperator, taus, parts=None) -> float:
    """Largest residual of the two mean-zero decomposition identities.

    Checks ``X - E_[L] X = sum_{S nonempty} T_S(X)`` and, for every ``S``,
    ``E_{S^c} X = sum_{R subset S} T_R(X)``, in operator norm.
    """
    tm = _tau_matrices(taus)
    parts = tuple(tm) if parts is None else as_labels(parts)
    t = {s: mean_zero_map(x, s, tm, parts).matrix for k in range(len(parts) + 1)
         for s in itertools.combinations(parts, k)}
    full = x.matrix - conditional_expectation(x, parts, tm).matrix
    worst = _opnorm(full - sum(v for s, v in t.items() if s))
    for k in range(len(parts) + 1):
        for s in itertools.combinations(parts, k):
            comp = tuple(l for l in parts if l not in s)
            lhs = conditional_expectation(x, comp, tm).matrix
            rhs = sum(t[r] for j in range(len(s) + 1) for r in itertools.combinations(s, j))
            worst = max(worst, _opnorm(lhs - rhs))
    return worst


def annihilation_residual(x: LabeledOperator, taus, parts=None) -> float:
    """Largest violation of ``E_l T_S = 0`` (l in S) and ``E_l T_S = T_S`` (l not in S)."""
    tm = _tau_matrices(taus)
    parts = tuple(tm) if parts is None else as_labels(parts)
    worst = 0.0
    for k in range(len(parts) + 1):
        for s in itertools.combinations(parts, k):
            ts = mean_zero_map(x, s, tm, parts)
            for l in parts:
                el = conditional_expectation(ts, (l,), tm).matrix
                target = np.zeros_like(el) if l in s else ts.matrix
                worst = max(worst, _opnorm(el - target))
    return worst


def embed_copy(x: LabeledOperator, m: Sequence[int], copies: CopySpec) -> LabeledOperator:
    """``pi_m``: put ``x`` on copy slots ``(l, m_l)`` and the identity everywhere else.

    Raises:
        IndexOutOfRange: if some ``m_l`` is not in ``range(M_l)``.
    """
    m = tuple(int(j) for j in m)
    if len(m) != len(copies.counts) or any(not 0 <= j < c for j, c in zip(m, copies.counts)):
        raise IndexOutOfRange(f"multi-index {m} outside counts {copies.counts}")
    space = copies.big_space(x.space)
    cs = copies
    xm = x.reorder(cs.part_labels + cs.residual_labels).matrix
    slots = tuple(copy_label(p, j) for p, j in zip(cs.part_labels, m))
    blocks = [(slots + cs.residual_labels, xm)]
    for p, j, c in zip(cs.part_labels, m, cs.counts):
        d = x.space.dim(p)
        blocks += [((copy_label(p, k),), np.eye(d)) for k in range(c) if k != j]
    return LabeledOperator(space, _place(blocks, space))


def copied_weight(taus, copies: CopySpec, sigma_e=None, small: HilbertFactorization = None) -> np.ndarray:
    """``(x)_l tau_l^{(x) M_l} (x) sigma_E`` in the copied-space order."""
    tm = _tau_matrices(taus)
    mats = [tm[p] for p, c in zip(copies.part_labels, copies.counts) for _ in range(c)]
    if copies.residual_labels:
        mats.append(np.asarray(sigma_e))
    return kron_all(mats)


def l2_orthogonality_check(x: LabeledOperator, copies: CopySpec, taus, sigma_e=None) -> float:
    """Largest ``|<pi_m(X0), pi_m'(X0)>_tau|`` over ``m != m'`` with ``X0 = T_[L](X)``.

    The weight is ``(x) tau_l^{(x) M_l} (x) sigma_E``; ``sigma_E`` defaults to
    the maximally mixed state. ``<X, Y>_tau = Tr[X^dagger tau^(1/2) Y tau^(1/2)]``.
    """
    tm = _tau_matrices(taus)
    cs = copies
    if cs.residual_labels and sigma_e is None:
        de = x.space.dim(cs.residual_labels)
        sigma_e = np.eye(de) / de
    x0 = mean_zero_map(x, cs.part_labels, tm, cs.part_labels)
    root = psd_power(copied_weight(tm, cs, sigma_e), 0.5)
    embedded = [embed_copy(x0, m, cs).matrix for m in cs.multi_indices()]
    worst = 0.0
    for i, a in enumerate(embedded):
        left = a.conj().T @ root
        for j, b in enumerate(embedded):
            if i != j:
                worst = max(worst, abs(np.trace(left @ b @ root)))
    return float(worst)


def theta_map(x: LabeledOperator, copies: CopySpec) -> LabeledOperator:
    """``Theta(X) = (1/M) sum_m pi_m(X)``."""
    terms = [embed_copy(x, m, copies).matrix for m in copies.multi_indices()]
    return LabeledOperator(copies.big_space(x.space), sum(terms) / len(terms))


def map_norm_bound(map_id: str, p: float, subset_size: int = 2, counts: Sequence[int] = (1, 1)) -> float:
    """Stated norm bounds: ``T`` (4 at p=1, 2 at p=2), ``T_S`` (2^|S|), ``theta_T``."""
    if map_id == "T":
        return {1: 4.0, 2: 2.0}[int(p)]
    if map_id == "T_S":
        return 2.0**subset_size
    if map_id == "theta_T":
        mk = math.prod(counts)
        return 2 ** (3 / p - 1) * mk ** ((1 - p) / p)
    raise ValueError(f"unknown map {map_id!r}")


def lp_map_norm_probe(
    map_id: str,
    p: float,
    trials: int = 200,
    seed: int = 0,
    *,
    parts: Sequence[str] = ("A", "B"),
    subset: Optional[Sequence[str]] = None,
    counts: Sequence[int] = (2, 2),
    dim: int = 2,
    dim_e: int = 2,
) -> float:
    """Largest sampled ratio ``||map(X)||_{p,tau'} / ||X||_{p,tau}``.

    Maps: ``"T"`` is ``T_[L]`` on the parts, ``"T_S"`` is ``T_subset`` and
    ``"theta_T"`` is ``Theta o T_[L]`` into the copied space. Each trial draws
    fresh well-conditioned ``tau_l``, ``sigma_E`` and a complex Gaussian ``X``.
    Constant inputs (zero denominators) are skipped.
    """
    parts = as_labels(parts)
    subset = parts if subset is None else as_labels(subset)
    small = HilbertFactorization(parts + ("E",), (dim,) * len(parts) + (dim_e,))
    cs = CopySpec(tuple(counts), parts, ("E",)) if map_id == "theta_T" else None
    rng = make_rng(seed)

    def full_rank(d):
        # keep the weight well conditioned on the copied space
        return 0.8 * random_density_operator(d, seed=rng).matrix + 0.2 * np.eye(d) / d

    worst = 0.0
    for _ in range(trials):
        tm = {l: full_rank(dim) for l in parts}
        sigma = full_rank(dim_e)
        d = small.total_dim
        x = LabeledOperator(small, rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
        weight = kron_all([tm[l] for l in parts] + [sigma])
        den = kosaki_norm(x.matrix, weight, p)
        if den <= 1e-14:
            continue
        if map_id == "T":
            num = kosaki_norm(mean_zero_map(x, parts, tm, parts).matrix, weight, p)
        elif map_id == "T_S":
            num = kosaki_norm(mean_zero_map(x, subset, tm, parts).matrix, weight, p)
        elif map_id == "theta_T":
            y = theta_map(mean_zero_map(x, parts, tm, parts), cs)
            num = kosaki_norm(y.matrix, copied_weight(tm, cs, sigma), p)
        else:
            raise ValueError(f"unknown map {map_id!r}")
        worst = max(worst, num / den)
    return worst


def random_split_instance(
    num_parties: int,
    counts: Sequence[int],
    seed,
    *,
    dim: int = 2,
    dim_e: int = 2,
    tau_mode: str = "random",
) -> SplitInstance:
    """Random qubit (by default) convex-split instance.

    ``tau_mode`` is ``"random"`` (independent full-rank states), ``"marginal"``
    (the marginals of ``rho``) or ``"product"`` (``rho`` is replaced by
    ``(x) tau_l (x) rho_E`` so that the split is exact).
    """
    rng = make_rng(seed)
    parts = tuple(f"A{l + 1}" for l in range(num_parties))
    space = HilbertFactorization(parts + ("E",), (dim,) * num_parties + (dim_e,))
    rho = random_density_operator(space, seed=rng)
    if tau_mode == "marginal":
        taus = tuple(partial_trace(rho, p) for p in parts)
    else:
        taus = tuple(random_density_operator(HilbertFactorization((p,), (dim,)), seed=rng) for p in parts)
    if tau_mode == "product":
        rho = tensor(list(taus) + [partial_trace(rho, "E")])
    return SplitInstance(rho, taus, CopySpec(tuple(counts), parts, ("E",)))
