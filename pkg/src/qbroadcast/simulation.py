"""Error bounds for simulating n uses of a broadcast channel.

Every quantity here is a closed-form function of the per-subset channel
exponents ``E_{r_S}(N_{A -> B_S})``. Once those are known, a whole blocklength
grid costs no further optimization. Large blocklengths are handled in the log
domain, so bounds far below the smallest float stay exact as ``log2`` values.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from .channels import (
    ChannelInformation,
    OptimizerConfig,
    QuantumChannel,
    RateVector,
    channel_dispersion,
    channel_error_exponent,
)
from .convex_split import nonempty_subsets
from .errors import QBroadcastError, ShapeMismatch

PROVEN_MODERATE_CONSTANT = 0.25
CONJECTURED_MODERATE_CONSTANT = 0.5
MIN_DISPERSION = 1e-9


@dataclass(frozen=True)
class BlocklengthParams:
    """Blocklength and dimensions entering the polynomial prefactors.

    Attributes:
        n: number of channel uses (``n = 0`` is accepted by the counting
            functions, where every factor equals one).
        L: number of receivers.
        dim_a: input dimension.
        dim_r: reference dimension; defaults to ``dim_a``.
    """

    n: int
    L: int = 1
    dim_a: int = 2
    dim_r: Optional[int] = None

    def __post_init__(self):
        if self.dim_r is None:
            object.__setattr__(self, "dim_r", self.dim_a)
        for name in ("n", "L", "dim_a", "dim_r"):
            if int(getattr(self, name)) != getattr(self, name):
                raise ShapeMismatch(f"{name} must be an integer, got {getattr(self, name)!r}")
            object.__setattr__(self, name, int(getattr(self, name)))
        if self.n < 0 or self.L < 1 or self.dim_a < 1 or self.dim_r < 1:
            raise ShapeMismatch(f"invalid blocklength parameters {self}")

    def with_n(self, n: int) -> "BlocklengthParams":
        return BlocklengthParams(n, self.L, self.dim_a, self.dim_r)


@dataclass(frozen=True)
class SimulationBoundReport:
    """``epsilon <= k_n sqrt(sum_S 2^{|S|} 2^{-n E_{r_S}})`` at one blocklength.

    Attributes:
        n: blocklength.
        epsilon_bound: the bound (may exceed one, or underflow to zero).
        log2_epsilon_bound: its base-2 logarithm, exact for any ``n``.
        prefactor: ``k_n`` (``inf`` if it overflows a float).
        log2_prefactor: ``log2 k_n``.
        exponents: ``E_{r_S}`` per receiver subset.
        per_subset_terms: ``2^{|S|} 2^{-n E_{r_S}}`` per subset.
        exponent_lower: ``min_S E_{r_S} / 2``.
    """

    n: int
    epsilon_bound: float
    log2_epsilon_bound: float
    prefactor: float
    log2_prefactor: float
    exponents: dict
    per_subset_terms: dict
    exponent_lower: float


@dataclass(frozen=True)
class ModerateSchedule:
    """Rates approaching the region boundary as ``a_n = n^{-t}``.

    Attributes:
        t: speed, in ``(0, 1/2)``.
        n_grid: blocklengths to tabulate.
        scales: optional per-subset gap scales; a subset without an entry uses
            ``sqrt(V(N_{A -> B_S}))``, or one when that dispersion vanishes.
    """

    t: float
    n_grid: tuple
    scales: Mapping[tuple, float] = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.t < 0.5:
            raise ShapeMismatch(f"t must lie in (0, 1/2), got {self.t}")
        grid = tuple(int(n) for n in self.n_grid)
        if not grid or min(grid) < 1:
            raise ShapeMismatch("n_grid must hold positive blocklengths")
        object.__setattr__(self, "n_grid", grid)
        if any(v <= 0 for v in self.scales.values()):
            raise ShapeMismatch("scales must be positive")

    def a(self, n: int) -> float:
        return float(n) ** -self.t


@dataclass(frozen=True)
class ModerateRow:
    n: int
    a_n: float
    rates: tuple
    exponents: dict
    log2_bound: float
    normalized_exponent: float


@dataclass(frozen=True)
class ModerateTable:
    """Rows of a moderate-deviation sweep plus the constants they are compared with.

    Attributes:
        rows: one :class:`ModerateRow` per blocklength.
        thresholds: ``I(N_{A -> B_S})``.
        scales: gap scale used for each subset.
        base_rates: boundary point the rates move away from.
        proven_constant: the guaranteed limit of the normalized exponent.
        conjectured_constant: the value expected for an optimal expansion.
    """

    rows: tuple
    thresholds: dict
    scales: dict
    base_rates: tuple
    proven_constant: float = PROVEN_MODERATE_CONSTANT
    conjectured_constant: float = CONJECTURED_MODERATE_CONSTANT

    def is_monotone(self) -> bool:
        """True if the normalized exponent never decreases along the grid."""
        vals = [r.normalized_exponent for r in self.rows]
        return all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


# ---------------------------------------------------------------------------
# Counting constants
# ---------------------------------------------------------------------------


def prefactor_exponent_twice(params: BlocklengthParams) -> int:
    """``2 log_{n+1} k_n = (3 + L)(|A|^2 - 1)``, an integer."""
    return (3 + params.L) * (params.dim_a**2 - 1)


def prefactor_squared(params: BlocklengthParams) -> int:
    """``k_n^2`` as an exact integer."""
    return (params.n + 1) ** prefactor_exponent_twice(params)


def log2_prefactor(params: BlocklengthParams) -> float:
    """``log2 k_n`` with ``k_n = (n+1)^{((3+L)/2)(|A|^2-1)}``."""
    return prefactor_exponent_twice(params) / 2 * math.log2(params.n + 1)


def prefactor(params: BlocklengthParams) -> float:
    """``k_n`` as a float (``inf`` on overflow)."""
    lg = log2_prefactor(params)
    return math.inf if lg >= 1024 else 2.0**lg


def postselection_prefactor(params: BlocklengthParams) -> tuple[int, int]:
    """``((n+1)^{|A|^2-1}, cap)``: the post-selection factor and the purifying dimension cap.

    Both equal ``(n+1)^{|A|^2-1}``: the factor multiplies the distance on the
    de Finetti input, and the cap bounds the dimension of its purification.
    """
    v = (params.n + 1) ** (params.dim_a**2 - 1)
    return v, v


def caratheodory_size(params: BlocklengthParams) -> int:
    """``(n+1)^{2|A||R| - 2}``, the support size of the i.i.d. decomposition."""
    return (params.n + 1) ** (2 * params.dim_a * params.dim_r - 2)


def composite_prefactor_squared(params: BlocklengthParams) -> int:
    """Square of ``(n+1)^{(|A|^2-1)/2} (n+1)^{|A|^2-1} (n+1)^{|A||R|-1}``.

    This is the product of the factors accumulated in the two-receiver
    achievability argument; with ``|R| = |A|`` it equals ``k_n`` at ``L = 2``.
    """
    a2 = params.dim_a**2 - 1
    return (params.n + 1) ** (a2 + 2 * a2 + 2 * (params.dim_a * params.dim_r - 1))


def composite_within_prefactor(params: BlocklengthParams) -> bool:
    """Integer check that the accumulated proof factor is at most ``k_n``."""
    return composite_prefactor_squared(params) <= prefactor_squared(params)


# ---------------------------------------------------------------------------
# Bounds from exponents
# ---------------------------------------------------------------------------


def log2_bound_from_exponents(exponents: Mapping[tuple, float], params: BlocklengthParams) -> float:
    """``log2 k_n + (1/2) log2 sum_S 2^{|S| - n E_S}``."""
    if not exponents:
        raise QBroadcastError("at least one subset exponent is required")
    logs = np.array([len(s) - params.n * e for s, e in exponents.items()], dtype=float)
    return log2_prefactor(params) + 0.5 * float(np.logaddexp2.reduce(logs))


def bound_from_exponents(exponents: Mapping[tuple, float], params: BlocklengthParams) -> SimulationBoundReport:
    """Evaluate the simulation bound for known exponents (no optimization)."""
    exps = {tuple(s): float(e) for s, e in exponents.items()}
    lg = log2_bound_from_exponents(exps, params)
    terms = {s: 2.0 ** (len(s) - params.n * e) for s, e in exps.items()}
    return SimulationBoundReport(
        n=params.n,
        epsilon_bound=2.0**lg if lg < 1024 else math.inf,
        log2_epsilon_bound=lg,
        prefactor=prefactor(params),
        log2_prefactor=log2_prefactor(params),
        exponents=exps,
        per_subset_terms=terms,
        exponent_lower=0.5 * min(exps.values()),
    )


def bound_slope(exponents: Mapping[tuple, float], params: BlocklengthParams, dn: Optional[int] = None) -> float:
    """Forward difference of ``-log2 epsilon_bound`` in ``n`` at ``params.n``.

    The prefactor contributes ``O(1/n)`` to the slope, so for large ``n`` this
    approaches ``min_S E_S / 2``.
    """
    dn = dn or max(1, params.n // 10)
    lo = log2_bound_from_exponents(exponents, params)
    hi = log2_bound_from_exponents(exponents, params.with_n(params.n + dn))
    return (lo - hi) / dn


# ---------------------------------------------------------------------------
# Channel-level operations
# ---------------------------------------------------------------------------


def _check_params(ch: QuantumChannel, rates: RateVector, params: Optional[BlocklengthParams]):
    L = len(ch.output_labels)
    if len(rates) != L:
        raise ShapeMismatch(f"{len(rates)} rates for {L} receivers")
    if params is not None and (params.L != L or params.dim_a != ch.d_in):
        raise ShapeMismatch(f"parameters {params} do not match a channel with {L} receivers and input {ch.d_in}")


def _as_rates(rates) -> RateVector:
    return rates if isinstance(rates, RateVector) else RateVector(tuple(rates))


def channel_subset_exponents(ch: QuantumChannel, rates, opt_cfg: Optional[OptimizerConfig] = None,
                             tol: float = 1e-6, workers: int = 1,
                             infos: Optional[Mapping[tuple, ChannelInformation]] = None) -> dict:
    """``E_{r_S}(N_{A -> B_S})`` for every nonempty receiver subset ``S``.

    Args:
        ch: broadcast channel.
        rates: per-receiver rates.
        opt_cfg: optimizer budgets.
        tol: golden-section tolerance in ``alpha``.
        workers: threads over subsets; each subset uses its own optimizer state
            so the result is independent of this value.
        infos: optional precomputed informations; each is forked before use.
    """
    rv = _as_rates(rates)
    _check_params(ch, rv, None)
    labels = ch.output_labels
    subsets = nonempty_subsets(labels)

    def run(s):
        info = infos[s].fork() if infos and s in infos else None
        return float(channel_error_exponent(ch, s, rv.subset_rate(labels, s), opt_cfg, tol, info).value)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(run, subsets))
    else:
        values = [run(s) for s in subsets]
    return dict(zip(subsets, values))


def one_shot_simulation_bound(ch: QuantumChannel, rates, params: BlocklengthParams,
                              opt_cfg: Optional[OptimizerConfig] = None, tol: float = 1e-6,
                              exponents: Optional[Mapping[tuple, float]] = None,
                              workers: int = 1) -> SimulationBoundReport:
    """Error bound for simulating ``N^{(x) n}`` with ``n r_l`` bits to receiver ``l``.

    Args:
        ch: broadcast channel with ``params.L`` receivers and input dimension ``params.dim_a``.
        rates: per-receiver rates in bits per channel use.
        params: blocklength and dimensions.
        opt_cfg: optimizer budgets.
        tol: golden-section tolerance for each exponent.
        exponents: precomputed subset exponents; skips the optimization.
        workers: threads over subsets.

    Raises:
        ShapeMismatch: if the rates or parameters do not fit the channel.
    """
    rv = _as_rates(rates)
    _check_params(ch, rv, params)
    if exponents is None:
        exponents = channel_subset_exponents(ch, rv, opt_cfg, tol, workers)
    return bound_from_exponents(exponents, params)


def simulation_exponent_lower(ch: QuantumChannel, rates, opt_cfg: Optional[OptimizerConfig] = None,
                              tol: float = 1e-6, workers: int = 1) -> float:
    """``(1/2) min_S E_{r_S}(N_{A -> B_S})``, positive iff ``rates`` is interior to the region."""
    return 0.5 * min(channel_subset_exponents(ch, rates, opt_cfg, tol, workers).values())


def boundary_point(labels: Sequence[str], thresholds: Mapping[tuple, float]) -> tuple:
    """Rates on the region boundary minimizing ``sum_l r_l``.

    Raises:
        QBroadcastError: if the linear program fails.
    """
    subsets = list(thresholds)
    L = len(labels)
    a = np.array([[-1.0 if l in s else 0.0 for l in labels] for s in subsets])
    b = np.array([-thresholds[s] for s in subsets])
    res = linprog(np.ones(L), A_ub=a, b_ub=b, bounds=[(0, None)] * L, method="highs")
    if not res.success:
        raise QBroadcastError(f"boundary point not found: {res.message}")
    # the LP solution is feasible only up to its own tolerance; lift it onto the region
    r = np.array(res.x)
    for s in subsets:
        short = thresholds[s] - sum(r[labels.index(l)] for l in s)
        if short > 0:
            r[labels.index(s[0])] += short
    return tuple(float(x) for x in r)


def moderate_rates(labels: Sequence[str], thresholds: Mapping[tuple, float], scales: Mapping[tuple, float],
                   base: Sequence[float], a: float) -> tuple[tuple, float]:
    """Rates ``base + a w`` with ``w_l = max_{S contains l} scale_S`` and their effective gap.

    Returns ``(rates, a_eff)`` where ``a_eff = min_S (r_S - I_S) / scale_S >= a``.
    """
    w = [max(scales[s] for s in thresholds if l in s) for l in labels]
    rates = tuple(b + a * wl for b, wl in zip(base, w))
    a_eff = min((sum(rates[labels.index(l)] for l in s) - thresholds[s]) / scales[s] for s in thresholds)
    return rates, a_eff


def moderate_deviation_curve(ch: QuantumChannel, schedule: ModerateSchedule,
                             opt_cfg: Optional[OptimizerConfig] = None, tol: float = 1e-9,
                             base: Optional[Sequence[float]] = None, workers: int = 1) -> ModerateTable:
    """Tabulate the bound while the rates approach the boundary at speed ``n^{-t}``.

    Each row uses rates ``r_n = base + a_n w`` (see :func:`moderate_rates`) and
    reports ``-log2(epsilon_bound) / (n a_n^2)`` with ``a_n`` the effective
    normalized gap. Rows are independent and may run on ``workers`` threads.

    Args:
        ch: broadcast channel.
        schedule: speed, blocklength grid and optional per-subset scales.
        opt_cfg: optimizer budgets.
        tol: golden-section tolerance; small gaps need a tight one.
        base: boundary rates to start from; defaults to :func:`boundary_point`.
        workers: threads over rows.
    """
    labels = ch.output_labels
    subsets = nonempty_subsets(labels)
    infos = {s: ChannelInformation(ch, s, opt_cfg) for s in subsets}
    thresholds = {s: max(0.0, infos[s].capacity) for s in subsets}
    scales = {}
    for s in subsets:
        if s in schedule.scales:
            scales[s] = float(schedule.scales[s])
        else:
            v = channel_dispersion(ch, s, opt_cfg)
            scales[s] = math.sqrt(v) if v > MIN_DISPERSION else 1.0
    base = tuple(float(b) for b in base) if base is not None else boundary_point(labels, thresholds)
    params = BlocklengthParams(1, len(labels), ch.d_in)

    def row(n):
        rates, a_eff = moderate_rates(labels, thresholds, scales, base, schedule.a(n))
        exps = channel_subset_exponents(ch, rates, opt_cfg, tol, 1, infos)
        lg = log2_bound_from_exponents(exps, params.with_n(n))
        return ModerateRow(n, a_eff, rates, exps, lg, -lg / (n * a_eff**2))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(row, schedule.n_grid))
    else:
        rows = [row(n) for n in schedule.n_grid]
    return ModerateTable(tuple(rows), thresholds, scales, base)
