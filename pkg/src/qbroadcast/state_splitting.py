"""Multi-receiver quantum state splitting.

A sender holds ``A A'_1 ... A'_L`` of a pure state ``|rho>`` whose purification
``R`` is inaccessible. Using one pure entangled state ``|tau_l>`` per receiver
on ``A'_l B_l`` (``M_l = 2^{r_l}`` copies of it) and ``r_l`` classical bits to
receiver ``l``, the systems ``A'_l`` are moved to ``B_l``. The error is at most

    sqrt( sum_{S nonempty} 2^|S| 2^(-E_{r_S}(rho_{A'_S R} || tau_{A'_S})) ),

where ``r_S = sum_{l in S} r_l``.

The explicit protocol (:func:`run_qss_protocol`) is built on state vectors:
the initial state is ``|rho> (x) |tau>^{(x) M}`` and the target is the uniform
superposition over message strings ``m`` of ``|m>|rho>`` with ``A'_l`` moved into
the receiver copy ``B_l[m_l]``. The sender's isometry is the Uhlmann isometry
between the two, acting on the sender's registers only.

Register order (the canonical bookkeeping):

* sender, initial: ``A`` labels, ``A'_1 ... A'_L``, then ``A'_l[j]`` part by part;
* sender, target: message registers ``M[A'_l]``, the padding register ``J``,
  ``A`` labels, then ``A'_l[j]``;
* everyone else: ``B_l[j]`` part by part, then the reference labels.

``J`` has dimension ``ceil(prod d_l / prod M_l)`` so that the target sender space
is at least as large as the initial one.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .convex_split import CopySpec, SplitInstance, copy_label, nonempty_subsets
from .errors import DimensionCapExceeded, InvalidRank, QBroadcastError, ShapeMismatch, SpaceMismatch
from .operators import (
    DEFAULT_DIM_CAP,
    DensityOperator,
    HilbertFactorization,
    Isometry,
    as_labels,
    density,
    haar_random_vector,
    kron_all,
    make_rng,
    partial_trace,
    permute_vector,
    pure_state,
    random_density_operator,
    tensor,
    uhlmann_isometry_vectors,
)
from .renyi import error_exponent_state, renyi_information_value

PURITY_TOL = 1e-9


def _rank(m: np.ndarray, tol: float = PURITY_TOL) -> int:
    return int(np.sum(np.linalg.eigvalsh(m) > tol))


@dataclass(frozen=True, eq=False)
class QSSInstance:
    """Pure input state, entanglement resources and rates.

    Each ``entanglement_taus[l]`` is a pure state on two labels: first the
    sender-side label ``A'_l`` (which must also appear in ``rho_pure``), then
    the receiver-side label ``B_l``. The parts of ``rho_pure`` that are neither
    some ``A'_l`` nor a reference label are the sender's ``A`` registers.

    Raises:
        InvalidRank: if ``rho_pure`` or some entanglement state is not pure.
        SpaceMismatch: if labels or dimensions do not fit together.
    """

    rho_pure: DensityOperator
    entanglement_taus: tuple[DensityOperator, ...]
    rates: tuple[float, ...]
    reference_labels: tuple[str, ...] = ("R",)

    def __post_init__(self):
        taus = tuple(self.entanglement_taus)
        rates = tuple(float(r) for r in self.rates)
        refs = as_labels(self.reference_labels)
        object.__setattr__(self, "entanglement_taus", taus)
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "reference_labels", refs)
        if _rank(self.rho_pure.matrix) != 1:
            raise InvalidRank("rho_pure must be a pure state")
        if len(rates) != len(taus):
            raise ShapeMismatch(f"{len(rates)} rates for {len(taus)} receivers")
        if any(r < 0 for r in rates):
            raise ShapeMismatch(f"rates must be nonnegative, got {rates}")
        space = self.rho_pure.space
        for l in refs:
            space.index(l)
        for t in taus:
            if len(t.labels) != 2:
                raise SpaceMismatch(f"entanglement state on {t.labels} needs exactly two labels")
            if _rank(t.matrix) != 1:
                raise InvalidRank(f"entanglement state on {t.labels} is not pure")
            a, b = t.labels
            if a not in space or a in refs:
                raise SpaceMismatch(f"{a!r} is not a transferable part of rho_pure")
            if b in space:
                raise SpaceMismatch(f"receiver label {b!r} already used by rho_pure")
            if t.space.dims[0] != space.dims[space.index(a)]:
                raise SpaceMismatch(f"entanglement on {a!r} has the wrong dimension")

    @property
    def part_labels(self) -> tuple[str, ...]:
        return tuple(t.labels[0] for t in self.entanglement_taus)

    @property
    def receiver_labels(self) -> tuple[str, ...]:
        return tuple(t.labels[1] for t in self.entanglement_taus)

    @property
    def sender_labels(self) -> tuple[str, ...]:
        skip = set(self.part_labels) | set(self.reference_labels)
        return tuple(l for l in self.rho_pure.labels if l not in skip)

    def sender_marginal(self, l: int) -> DensityOperator:
        """``tau_{A'_l}``."""
        return partial_trace(self.entanglement_taus[l], self.part_labels[l])

    def receiver_marginal(self, l: int) -> DensityOperator:
        """``tau_{B_l}``."""
        return partial_trace(self.entanglement_taus[l], self.receiver_labels[l])

    def subset_rate(self, subset: Sequence[str]) -> float:
        return sum(self.rates[self.part_labels.index(p)] for p in subset)


@dataclass(frozen=True)
class QSSBoundReport:
    """Error bound with the per-subset exponents ``E_{r_S}``."""

    epsilon_bound: float
    per_subset_exponents: dict = field(default_factory=dict)
    all_positive: bool = False


def _subset_problem(inst: QSSInstance, subset: Sequence[str]):
    keep = tuple(subset) + inst.reference_labels
    rho_s = partial_trace(inst.rho_pure, keep).reorder(keep)
    tau_s = tensor([inst.sender_marginal(inst.part_labels.index(p)) for p in subset])
    return rho_s, tau_s


def qss_bound_from_exponents(exponents: Mapping[tuple, float]) -> float:
    """``sqrt(sum_S 2^|S| 2^(-E_S))``."""
    return math.sqrt(sum(2 ** len(s) * 2 ** (-e) for s, e in exponents.items()))


def two_receiver_expression(e1: float, e2: float, e12: float) -> float:
    """``sqrt(2 * 2^(-E_12) + 2^(-E_1) + 2^(-E_2))``.

    This two-receiver form is smaller than :func:`qss_bound_from_exponents` at
    ``L = 2`` by exactly a factor ``sqrt(2)``; it is kept for comparison only.
    """
    return math.sqrt(2 * 2 ** (-e12) + 2 ** (-e1) + 2 ** (-e2))


def qss_error_bound(inst: QSSInstance, **kwargs) -> QSSBoundReport:
    """Evaluate the splitting error bound on ``inst``.

    Keyword arguments are forwarded to the Renyi-information minimizer.
    """
    exps = {}
    for subset in nonempty_subsets(inst.part_labels):
        rho_s, tau_s = _subset_problem(inst, subset)
        exps[subset] = error_exponent_state(
            rho_s, tau_s, inst.reference_labels, inst.subset_rate(subset), **kwargs
        ).value
    return QSSBoundReport(qss_bound_from_exponents(exps), exps, all(e > 0 for e in exps.values()))


def qss_rate_region_check(inst: QSSInstance) -> dict[tuple[str, ...], tuple[float, bool]]:
    """For each subset ``S``: ``(I(rho_{A'_S R} || tau_{A'_S}), r_S > I)``."""
    out = {}
    for subset in nonempty_subsets(inst.part_labels):
        rho_s, tau_s = _subset_problem(inst, subset)
        threshold = max(0.0, renyi_information_value(rho_s, tau_s, inst.reference_labels, 1.0))
        out[subset] = (threshold, inst.subset_rate(subset) > threshold)
    return out


# ---------------------------------------------------------------------------
# Explicit protocol on state vectors
# ---------------------------------------------------------------------------


def _place_vector(blocks, space: HilbertFactorization) -> np.ndarray:
    labels = [l for lab, _ in blocks for l in lab]
    vec = kron_all(np.asarray(v).reshape(-1, 1) for _, v in blocks).ravel()
    dims = [space.dims[space.index(l)] for l in labels]
    return permute_vector(vec, dims, [labels.index(l) for l in space.labels])


def _basis(d: int, i: int) -> np.ndarray:
    e = np.zeros(d, dtype=complex)
    e[i] = 1.0
    return e


def pure_trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """``(1/2) || |a><a| - |b><b| ||_1 = sqrt(1 - |<a|b>|^2)``.

    Evaluated as the norm of the component of ``a`` orthogonal to ``b``, which
    stays accurate when the two states nearly coincide.
    """
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    return float(min(1.0, np.linalg.norm(a - np.vdot(b, a) * b)))


@dataclass(frozen=True, eq=False)
class QSSRun:
    """Outcome of the explicit protocol.

    Attributes:
        achieved_error: trace distance between ``V|initial>`` and ``|target>``.
        epsilon_prime: trace distance between the receivers-plus-reference
            marginals of the target and of the initial state.
        overlap: ``|<target| V |initial>|``.
        isometry: the sender's Uhlmann isometry.
    """

    achieved_error: float
    epsilon_prime: float
    overlap: float
    isometry: Isometry

    @property
    def guarantee(self) -> float:
        """``sqrt(2 epsilon')``."""
        return math.sqrt(2 * self.epsilon_prime)


def _message_counts(inst: QSSInstance) -> tuple[int, ...]:
    counts = []
    for r in inst.rates:
        if abs(r - round(r)) > 1e-12:
            raise QBroadcastError(f"the explicit protocol needs integer rates, got {r}")
        counts.append(2 ** int(round(r)))
    return tuple(counts)


def protocol_spaces(inst: QSSInstance):
    """``(initial, target, others)`` factorizations of the explicit protocol.

    ``initial`` and ``target`` list the sender registers followed by
    ``others`` (receiver copies and reference).
    """
    counts = _message_counts(inst)
    sp = inst.rho_pure.space
    parts, recv = inst.part_labels, inst.receiver_labels
    dims = {p: sp.dims[sp.index(p)] for p in parts}
    a_copies = [(copy_label(p, j), dims[p]) for p, c in zip(parts, counts) for j in range(c)]
    b_copies = [(copy_label(b, j), dims[p]) for p, b, c in zip(parts, recv, counts) for j in range(c)]
    sender = [(l, sp.dims[sp.index(l)]) for l in inst.sender_labels]
    refs = [(l, sp.dims[sp.index(l)]) for l in inst.reference_labels]
    pad = -(-math.prod(dims.values()) // math.prod(counts))
    msgs = [(f"M[{p}]", c) for p, c in zip(parts, counts)]

    def fact(pairs):
        return HilbertFactorization(tuple(l for l, _ in pairs), tuple(d for _, d in pairs))

    others = fact(b_copies + refs)
    initial = fact(sender + [(p, dims[p]) for p in parts] + a_copies) + others
    target = fact(msgs + [("J", pad)] + sender + a_copies) + others
    return initial, target, others


def initial_vector(inst: QSSInstance, space: HilbertFactorization) -> np.ndarray:
    """``|rho> (x)_l |tau_l>^{(x) M_l}`` in the order of ``space``."""
    counts = _message_counts(inst)
    blocks = [(inst.rho_pure.labels, inst.rho_pure.vector())]
    for t, c in zip(inst.entanglement_taus, counts):
        a, b = t.labels
        blocks += [((copy_label(a, j), copy_label(b, j)), t.vector()) for j in range(c)]
    return _place_vector(blocks, space)


def target_vector(inst: QSSInstance, space: HilbertFactorization) -> np.ndarray:
    """Uniform superposition over messages of ``|m>|rho>`` with ``A'_l -> B_l[m_l]``."""
    counts = _message_counts(inst)
    parts, recv = inst.part_labels, inst.receiver_labels
    rho_vec = inst.rho_pure.vector()
    pad = space.dims[space.index("J")]
    total = np.zeros(space.total_dim, dtype=complex)
    for m in itertools.product(*(range(c) for c in counts)):
        moved = {p: copy_label(b, j) for p, b, j in zip(parts, recv, m)}
        blocks = [((f"M[{p}]",), _basis(c, j)) for p, c, j in zip(parts, counts, m)]
        blocks.append((("J",), _basis(pad, 0)))
        blocks.append((tuple(moved.get(l, l) for l in inst.rho_pure.labels), rho_vec))
        for t, c, j in zip(inst.entanglement_taus, counts, m):
            a, b = t.labels
            blocks.append(((copy_label(a, j),), _basis(t.space.dims[0], 0)))
            blocks += [((copy_label(a, k), copy_label(b, k)), t.vector()) for k in range(c) if k != j]
        total += _place_vector(blocks, space)
    return total / math.sqrt(math.prod(counts))


def _marginal(vec: np.ndarray, space: HilbertFactorization, keep: Sequence[str]) -> np.ndarray:
    perm = [space.index(l) for l in space.complement(keep)] + [space.index(l) for l in keep]
    dk = space.dim(keep)
    v = permute_vector(vec, space.dims, perm).reshape(-1, dk)
    return v.T @ v.conj()


def run_qss_protocol(inst: QSSInstance, dim_cap: int = DEFAULT_DIM_CAP) -> QSSRun:
    """Build both states, synthesize the sender's isometry and measure the error.

    Raises:
        DimensionCapExceeded: if the initial or target space exceeds ``dim_cap``.
        QBroadcastError: if some rate is not an integer.
    """
    initial, target, others = protocol_spaces(inst)
    for sp in (initial, target):
        if sp.total_dim > dim_cap:
            raise DimensionCapExceeded(f"protocol dimension {sp.total_dim} exceeds cap {dim_cap}")
    psi = initial_vector(inst, initial)
    phi = target_vector(inst, target)
    keep = others.labels
    r0, r1 = _marginal(psi, initial, keep), _marginal(phi, target, keep)
    eps_prime = float(min(1.0, 0.5 * np.sum(np.abs(np.linalg.eigvalsh(r1 - r0)))))
    v = uhlmann_isometry_vectors(psi, initial, phi, target, keep)
    out, out_space = v.apply_vector(psi, initial)
    phi_out = permute_vector(phi, target.dims, [target.index(l) for l in out_space.labels])
    overlap = float(abs(np.vdot(phi_out, out)))
    return QSSRun(pure_trace_distance(out, phi_out), eps_prime, overlap, v)


def simulate_bipartite_qss_small(inst: QSSInstance, dim_cap: int = DEFAULT_DIM_CAP) -> float:
    """Achieved error ``(1/2) || V(initial) - target ||_1`` of the explicit protocol."""
    return run_qss_protocol(inst, dim_cap).achieved_error


def receiver_split_instance(inst: QSSInstance) -> SplitInstance:
    """Convex-split problem solved implicitly by the protocol.

    The state is ``rho_{A'_1 ... A'_L R}`` with each ``A'_l`` renamed to ``B_l``,
    the reference states are the receiver marginals ``tau_{B_l}`` and the copy
    counts are ``2^{r_l}``.
    """
    counts = _message_counts(inst)
    parts, recv = inst.part_labels, inst.receiver_labels
    keep = parts + inst.reference_labels
    rho = partial_trace(inst.rho_pure, keep).reorder(keep)
    renamed = density(rho.matrix, recv + inst.reference_labels, rho.dims)
    taus = tuple(inst.receiver_marginal(l) for l in range(len(parts)))
    return SplitInstance(renamed, taus, CopySpec(counts, recv, inst.reference_labels))


# ---------------------------------------------------------------------------
# Random instances
# ---------------------------------------------------------------------------


def symmetric_purification(tau: np.ndarray) -> np.ndarray:
    """``sum_i sqrt(l_i) |v_i> (x) |v_i>``: both marginals equal ``tau``."""
    w, v = np.linalg.eigh(tau)
    w = np.clip(w, 0, None)
    return sum(math.sqrt(w[i]) * np.kron(v[:, i], v[:, i]) for i in range(len(w)))


def entanglement_state(tau: np.ndarray, sender: str, receiver: str) -> DensityOperator:
    """Pure state on ``(sender, receiver)`` whose two marginals both equal ``tau``."""
    d = tau.shape[0]
    return pure_state(symmetric_purification(tau), (sender, receiver), (d, d))


def random_qss_instance(
    rates: Sequence[float],
    seed,
    *,
    dim: int = 2,
    dim_a: int = 2,
    dim_r: int = 2,
    product: bool = False,
) -> QSSInstance:
    """Random instance with parts ``A1 ... AL``, receivers ``B1 ... BL``.

    Entanglement states are symmetric purifications of random full-rank
    states, so ``tau_{A'_l} = tau_{B_l}``. With ``product=True`` the input is
    ``(x)_l |tau_l>_{A'_l X_l} (x) |phi>_{A R}``: the transferable parts are
    exactly the entanglement marginals and uncorrelated with ``R``, and the
    sender's register is ``X_1 ... X_L A``.
    """
    rng = make_rng(seed)
    n = len(rates)
    parts = tuple(f"A{l + 1}" for l in range(n))
    recv = tuple(f"B{l + 1}" for l in range(n))
    mats = [random_density_operator(dim, seed=rng).matrix for _ in range(n)]
    taus = tuple(entanglement_state(m, p, b) for m, p, b in zip(mats, parts, recv))
    if product:
        blocks = [((p, f"X{l + 1}"), symmetric_purification(m)) for l, (p, m) in enumerate(zip(parts, mats))]
        blocks.append((("A", "R"), haar_random_vector(dim_a * dim_r, rng)))
        labels = tuple(l for lab, _ in blocks for l in lab)
        dims = tuple(d for p in parts for d in (dim, dim)) + (dim_a, dim_r)
        space = HilbertFactorization(labels, dims)
        rho = pure_state(_place_vector(blocks, space), labels, dims)
    else:
        labels = ("A",) + parts + ("R",)
        dims = (dim_a,) + (dim,) * n + (dim_r,)
        rho = pure_state(haar_random_vector(math.prod(dims), rng), labels, dims)
    return QSSInstance(rho, taus, tuple(rates))
