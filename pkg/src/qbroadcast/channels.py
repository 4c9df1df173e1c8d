"""Quantum broadcast channels and their simulation capacity region.

A channel is stored as Kraus operators ``K_k: A -> B_1 ... B_L``. For a subset
``S`` of receivers, the channel information of order ``alpha`` is

    I_alpha(N_{A -> B_S}) = max_psi I_alpha(B_l (l in S) : R)   at  (N_S (x) id_R)(psi),

the multipartite Renyi information with the product of the exact ``B_l``
marginals as reference and the optimized ``sigma`` on ``R``. Inputs are
parameterized by the reduced state ``rho_A``; the purification is
``|psi> = (sqrt(rho) (x) 1) sum_i |i>|i>``, so the joint output is
``(1 (x) X) J_S (1 (x) X)`` with ``J_S`` the Choi matrix of ``N_S`` and
``X = conj(sqrt(rho))``.

Input optimization is local search with a certificate. Qubit inputs are seeded
from a deterministic Bloch-ball grid, larger inputs from seeded random states,
and every seed is refined with Nelder-Mead. A final batch of random probes
gives ``certified_gap = best - best probe``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .convex_split import nonempty_subsets
from .errors import (
    EmptySubset,
    LabelCollision,
    NotTracePreserving,
    OptimizationBudgetExceeded,
    ShapeMismatch,
)
from .operators import (
    DensityOperator,
    HilbertFactorization,
    Isometry,
    _trusted_density,
    as_labels,
    eigh_psd,
    hermitize,
    kron_all,
    make_rng,
    partial_trace_array,
    purify,
    random_density_operator,
)
from .renyi import (
    ALPHA_ONE_TOL,
    _fixed_point,
    _objective,
    as_order,
    entropy_of_spectrum,
    exponent_from_information,
    relative_entropy_variance,
    support_leak,
    SUPPORT_LEAK_TOL,
)

CPTP_TOL = 1e-9
KRAUS_TOL = 1e-12
TOL_CAP = 1e-5
MEMBERSHIP_SLACK = 1e-9


# ---------------------------------------------------------------------------
# Channel type and representations
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    """CPTP map from ``input_label`` to the factors of ``output_space``.

    Attributes:
        kraus: Kraus operators of shape ``(d_out, d_in)``.
        input_label: label of the input system.
        output_space: factorization ``B_1 ... B_L``; defaults to one factor ``"B"``.

    Raises:
        ShapeMismatch: if the Kraus shapes disagree or do not match the output dims.
        NotTracePreserving: if ``sum K^dagger K`` deviates from the identity by more than 1e-9.
    """

    kraus: tuple
    input_label: str = "A"
    output_space: Optional[HilbertFactorization] = None

    def __post_init__(self):
        ks = tuple(np.array(k, dtype=complex) for k in self.kraus)
        if not ks:
            raise ShapeMismatch("a channel needs at least one Kraus operator")
        shape = ks[0].shape
        if len(shape) != 2 or any(k.shape != shape for k in ks):
            raise ShapeMismatch(f"Kraus operators must share one 2-D shape, got {[k.shape for k in ks]}")
        for k in ks:
            k.flags.writeable = False
        out = self.output_space
        if out is None:
            out = HilbertFactorization(("B",), (shape[0],))
        if out.total_dim != shape[0]:
            raise ShapeMismatch(f"output dims {out.dims} do not multiply to {shape[0]}")
        if self.input_label in out.labels:
            raise LabelCollision(f"input label {self.input_label!r} reused as an output")
        dev = float(np.max(np.abs(sum(k.conj().T @ k for k in ks) - np.eye(shape[1]))))
        if dev > CPTP_TOL:
            raise NotTracePreserving(f"sum K^dagger K deviates from the identity by {dev:.3e}")
        object.__setattr__(self, "kraus", ks)
        object.__setattr__(self, "output_space", out)

    @property
    def d_in(self) -> int:
        return self.kraus[0].shape[1]

    @property
    def d_out(self) -> int:
        return self.kraus[0].shape[0]

    @property
    def output_labels(self) -> tuple[str, ...]:
        return self.output_space.labels

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        """Apply to a bare ``d_in x d_in`` matrix."""
        return sum(k @ rho @ k.conj().T for k in self.kraus)


@dataclass(frozen=True)
class RateVector:
    """Classical rates ``(r_1, ..., r_L)`` in bits."""

    rates: tuple[float, ...]

    def __post_init__(self):
        rates = tuple(float(r) for r in self.rates)
        if any(not math.isfinite(r) or r < 0 for r in rates):
            raise ShapeMismatch(f"rates must be finite and nonnegative, got {rates}")
        object.__setattr__(self, "rates", rates)

    def __len__(self):
        return len(self.rates)

    def subset_rate(self, labels: Sequence[str], subset: Sequence[str]) -> float:
        """``r_S``, with ``labels`` naming the receivers in order."""
        return sum(self.rates[list(labels).index(l)] for l in subset)


@dataclass(frozen=True)
class InputOptimum:
    """Best input found for a channel information.

    Attributes:
        rho_in: maximizing input state on the channel input.
        value: the information in bits.
        optimizer_trace: ``(phase, value)`` pairs in the order they were reached.
        certified_gap: ``value`` minus the best random probe (``>= 0`` when no
            probe beats the optimizer).
    """

    rho_in: DensityOperator
    value: float
    optimizer_trace: tuple = ()
    certified_gap: float = math.inf


@dataclass(frozen=True)
class RegionReport:
    """Thresholds ``I(N_{A -> B_S})`` and, for two receivers, the region's corners."""

    labels: tuple[str, ...]
    thresholds: dict
    vertices_2d: Optional[tuple] = None
    optima: dict = field(default_factory=dict, repr=False)


class ChannelExponent(NamedTuple):
    """``E_r(N)``, the maximizing order and the worst-case pure input at that order."""

    value: float
    alpha_star: float
    psi_star: Optional[DensityOperator]


def choi_matrix(ch: QuantumChannel) -> np.ndarray:
    """``J = sum_ij N(|i><j|) (x) |i><j|`` with factors ``(outputs, input)``."""
    vecs = np.stack([k.reshape(-1) for k in ch.kraus], axis=1)
    return vecs @ vecs.conj().T


def kraus_from_choi(choi: np.ndarray, d_out: int, d_in: int, tol: float = KRAUS_TOL) -> tuple:
    """Minimal Kraus set from the eigendecomposition of a Choi matrix."""
    w, v = eigh_psd(choi, check=False)
    keep = w > tol * max(1.0, float(w.max(initial=0.0)))
    order = np.argsort(-w[keep])
    ws, vs = w[keep][order], v[:, keep][:, order]
    return tuple(math.sqrt(x) * vs[:, i].reshape(d_out, d_in) for i, x in enumerate(ws))


def apply_channel(ch: QuantumChannel, rho: DensityOperator, through=None) -> DensityOperator:
    """``(N (x) id)(rho)``; the input factor is replaced in place by the outputs.

    Raises:
        ShapeMismatch: if ``through`` is not the channel input or the dimension differs.
        LabelCollision: if an output label already names a spectator factor.
    """
    through = as_labels(through if through is not None else ch.input_label)
    if through != (ch.input_label,):
        raise ShapeMismatch(f"channel acts on {ch.input_label!r}, not on {list(through)}")
    space = rho.space
    idx = space.index(ch.input_label)
    if space.dims[idx] != ch.d_in:
        raise ShapeMismatch(f"factor {ch.input_label!r} has dim {space.dims[idx]}, channel expects {ch.d_in}")
    rest = space.complement(ch.input_label)
    clash = set(rest) & set(ch.output_labels)
    if clash:
        raise LabelCollision(f"output labels {sorted(clash)} already present")
    d_rest = space.dim(rest) if rest else 1
    r = rho.reorder((ch.input_label,) + rest).matrix.reshape(ch.d_in, d_rest, ch.d_in, d_rest)
    ks = np.stack(ch.kraus)
    out = np.einsum("kai,irjs,kbj->arbs", ks, r, ks.conj(), optimize=True)
    out = hermitize(out.reshape(ch.d_out * d_rest, ch.d_out * d_rest))
    tmp = ch.output_space + space.select(rest).reordered(rest)
    labels = list(space.labels[:idx]) + list(ch.output_labels) + list(space.labels[idx + 1:])
    result = _trusted_density(tmp, out)
    return result.reorder(labels)


def marginal_channel(ch: QuantumChannel, subset) -> QuantumChannel:
    """``Tr_{B_{S^c}} o N`` with a minimal Kraus set (from the reduced Choi matrix).

    Raises:
        EmptySubset: if ``subset`` is empty.
    """
    subset = as_labels(subset)
    if not subset:
        raise EmptySubset("a marginal channel needs at least one output")
    out = ch.output_space.select(subset)
    if out.labels == ch.output_labels:
        return ch
    j = _marginal_choi(ch, out.labels)
    return QuantumChannel(kraus_from_choi(j, out.total_dim, ch.d_in), ch.input_label, out)


def _marginal_choi(ch: QuantumChannel, keep: Sequence[str]) -> np.ndarray:
    dims = ch.output_space.dims + (ch.d_in,)
    idx = [ch.output_space.index(l) for l in keep] + [len(dims) - 1]
    return partial_trace_array(choi_matrix(ch), dims, idx)


def stinespring_dilation(ch: QuantumChannel, env_label: str = "E") -> Isometry:
    """Isometry ``U = sum_k K_k (x) |k>_E`` from the input to ``outputs (x) E``."""
    n = len(ch.kraus)
    u = np.stack(ch.kraus, axis=1).reshape(ch.d_out * n, ch.d_in)
    out = ch.output_space + HilbertFactorization((env_label,), (n,))
    return Isometry(u, HilbertFactorization((ch.input_label,), (ch.d_in,)), out)


# ---------------------------------------------------------------------------
# Preset channels
# ---------------------------------------------------------------------------

_PAULI = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def identity_channel(d: int = 2) -> QuantumChannel:
    return QuantumChannel((np.eye(d),))


def constant_channel(sigma, d_in: int = 2, output_space: Optional[HilbertFactorization] = None) -> QuantumChannel:
    """``rho -> Tr(rho) sigma``: Kraus ``sqrt(mu_j) |v_j><i|``."""
    sigma = np.asarray(sigma, dtype=complex)
    w, v = eigh_psd(sigma)
    ks = [math.sqrt(x) * np.outer(v[:, j], _basis(d_in, i)) for j, x in enumerate(w) if x > KRAUS_TOL
          for i in range(d_in)]
    return QuantumChannel(tuple(ks), output_space=output_space)


def depolarizing_channel(p: float, d: int = 2) -> QuantumChannel:
    """``rho -> (1 - p) rho + p Tr(rho) 1/d`` for ``0 <= p <= 1``."""
    if d == 2:
        coeffs = [math.sqrt(1 - 3 * p / 4)] + [math.sqrt(p / 4)] * 3
        return QuantumChannel(tuple(c * s for c, s in zip(coeffs, _PAULI)))
    units = [np.eye(d) * math.sqrt(1 - p)]
    units += [math.sqrt(p / d) * np.outer(_basis(d, a), _basis(d, b)) for a in range(d) for b in range(d)]
    return QuantumChannel(tuple(units))


def dephasing_channel(p: float) -> QuantumChannel:
    """Qubit dephasing ``rho -> (1 - p) rho + p Z rho Z``."""
    return QuantumChannel((math.sqrt(1 - p) * _PAULI[0], math.sqrt(p) * _PAULI[3]))


def amplitude_damping_channel(gamma: float) -> QuantumChannel:
    k0 = np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex)
    k1 = np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex)
    return QuantumChannel((k0, k1))


def product_broadcast_channel(first: QuantumChannel, sigma, labels=("B1", "B2")) -> QuantumChannel:
    """``rho -> N_1(rho) (x) sigma``: the second receiver learns nothing."""
    sigma = np.asarray(sigma, dtype=complex)
    w, v = eigh_psd(sigma)
    ks = [np.kron(k, math.sqrt(x) * v[:, [j]]) for k in first.kraus for j, x in enumerate(w) if x > KRAUS_TOL]
    out = HilbertFactorization(as_labels(labels), (first.d_out, sigma.shape[0]))
    return QuantumChannel(tuple(ks), first.input_label, out)


def complementary_dephasing_channel(p: float, labels=("B1", "B2")) -> QuantumChannel:
    """Isometry ``|i> -> |i>_{B1} |e_i>_{B2}`` with ``<e_0|e_1> = 1 - 2p``.

    ``B1`` sees a dephasing channel of strength ``p`` and ``B2`` its
    complement. At ``p = 1/2`` this copies the computational basis.
    """
    theta = math.acos(1 - 2 * p) / 2
    e0 = np.array([math.cos(theta), math.sin(theta)])
    e1 = np.array([math.cos(theta), -math.sin(theta)])
    v = np.column_stack([np.kron(_basis(2, 0), e0), np.kron(_basis(2, 1), e1)])
    return QuantumChannel((v,), output_space=HilbertFactorization(as_labels(labels), (2, 2)))


def random_channel(d_in: int, out_dims: Sequence[int], n_kraus: int, seed, labels=None) -> QuantumChannel:
    """Channel from a random isometry ``A -> B_1 ... B_L (x) K``."""
    rng = make_rng(seed)
    d_out = math.prod(out_dims)
    g = rng.standard_normal((d_out * n_kraus, d_in)) + 1j * rng.standard_normal((d_out * n_kraus, d_in))
    q, _ = np.linalg.qr(g)
    ks = q.reshape(d_out, n_kraus, d_in).transpose(1, 0, 2)
    labels = labels or (("B",) if len(out_dims) == 1 else tuple(f"B{l + 1}" for l in range(len(out_dims))))
    return QuantumChannel(tuple(ks), output_space=HilbertFactorization(as_labels(labels), tuple(out_dims)))


def _basis(d: int, i: int) -> np.ndarray:
    e = np.zeros(d, dtype=complex)
    e[i] = 1.0
    return e


PRESETS: dict[str, Callable[..., QuantumChannel]] = {
    "identity": identity_channel,
    "constant": lambda d_in=2, d_out=2: constant_channel(np.eye(d_out) / d_out, d_in),
    "depolarizing": depolarizing_channel,
    "dephasing": dephasing_channel,
    "amplitude_damping": amplitude_damping_channel,
    "product_broadcast": lambda p=0.0: product_broadcast_channel(depolarizing_channel(p), np.diag([0.75, 0.25])),
    "complementary_dephasing": complementary_dephasing_channel,
}


def preset_channel(name: str, **params) -> QuantumChannel:
    """Build a named preset; ``params`` are the preset's keyword arguments."""
    if name not in PRESETS:
        raise ShapeMismatch(f"unknown channel preset {name!r}; choose from {sorted(PRESETS)}")
    return PRESETS[name](**params)


# ---------------------------------------------------------------------------
# Information of a fixed input
# ---------------------------------------------------------------------------


class _Evaluator:
    """Output state and information of ``N_S`` for a given input ``rho``."""

    def __init__(self, ch: QuantumChannel, subset, tol: float = 1e-12, max_iter: int = 2000):
        subset = as_labels(subset)
        if not subset:
            raise EmptySubset("a channel information needs at least one output")
        self.out = ch.output_space.select(subset)
        self.dims_b = self.out.dims
        self.d = ch.d_in
        self.choi = _marginal_choi(ch, self.out.labels)
        self.tol = tol
        self.max_iter = max_iter
        self._sigma = None

    @property
    def d_b(self) -> int:
        return self.out.total_dim

    def state(self, rho: np.ndarray) -> np.ndarray:
        """Joint output on ``(B_S, R)``."""
        w, v = eigh_psd(rho, check=False)
        x = ((v * np.sqrt(w)) @ v.conj().T).conj()
        big = np.kron(np.eye(self.d_b), x)
        return hermitize(big @ self.choi @ big)

    def _marginals(self, omega: np.ndarray):
        dims = self.dims_b + (self.d,)
        parts = [partial_trace_array(omega, dims, [i]) for i in range(len(self.dims_b))]
        return parts, partial_trace_array(omega, dims, [len(self.dims_b)])

    def value(self, rho: np.ndarray, alpha: float) -> float:
        omega = self.state(rho)
        parts, omega_r = self._marginals(omega)
        if abs(alpha - 1) <= ALPHA_ONE_TOL:
            ent = sum(entropy_of_spectrum(np.linalg.eigvalsh(p)) for p in parts)
            ent += entropy_of_spectrum(np.linalg.eigvalsh(omega_r))
            return ent - entropy_of_spectrum(np.linalg.eigvalsh(omega))
        tau = kron_all(parts)
        start = omega_r
        if self._sigma is not None and support_leak(omega_r, self._sigma) <= SUPPORT_LEAK_TOL:
            # A stale warm start can stall the iteration; keep it only if it already beats omega_R.
            if _objective(omega, tau, self._sigma, alpha) < _objective(omega, tau, omega_r, alpha):
                start = self._sigma
        sigma, obj, _, _ = _fixed_point(omega, tau, self.d_b, self.d, alpha, start, self.tol, self.max_iter, 0.5)
        self._sigma = sigma
        return obj

    def variance(self, rho: np.ndarray) -> float:
        omega = self.state(rho)
        parts, omega_r = self._marginals(omega)
        return relative_entropy_variance(omega, kron_all(parts + [omega_r]))


# ---------------------------------------------------------------------------
# Input parameterizations
# ---------------------------------------------------------------------------


def fibonacci_ball(n: int) -> np.ndarray:
    """``n`` deterministic, roughly uniform points in the unit ball (plus the centre)."""
    k = np.arange(n) + 0.5
    z = 1 - 2 * k / n
    phi = math.pi * (3 - math.sqrt(5)) * k
    rad = (k / n) ** (1 / 3)
    s = np.sqrt(1 - z**2)
    pts = rad[:, None] * np.column_stack([s * np.cos(phi), s * np.sin(phi), z])
    return np.vstack([np.zeros(3), pts])


def bloch_state(b: np.ndarray) -> np.ndarray:
    return 0.5 * (_PAULI[0] + b[0] * _PAULI[1] + b[1] * _PAULI[2] + b[2] * _PAULI[3])


def bloch_vector(rho: np.ndarray) -> np.ndarray:
    return np.array([np.trace(rho @ s).real for s in _PAULI[1:]])


def _ball(u: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(u)
    return u if n == 0 else u * (math.tanh(n) / n)


def _unball(b: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(b)
    if n == 0:
        return b.astype(float)
    n_c = min(n, 1 - 1e-9)
    return b * (math.atanh(n_c) / n)


class _Parameterization:
    """Unconstrained coordinates for input states."""

    def __init__(self, d: int):
        self.d = d

    def to_state(self, x: np.ndarray) -> np.ndarray:
        if self.d == 2:
            return bloch_state(_ball(x))
        g = (x[: self.d**2] + 1j * x[self.d**2:]).reshape(self.d, self.d)
        m = g @ g.conj().T
        tr = np.trace(m).real
        return m / tr if tr > 0 else np.eye(self.d) / self.d

    def from_state(self, rho: np.ndarray) -> np.ndarray:
        if self.d == 2:
            return _unball(bloch_vector(rho))
        w, v = eigh_psd(rho, check=False)
        g = (v * np.sqrt(w)) @ v.conj().T
        return np.concatenate([g.real.ravel(), g.imag.ravel()])


@dataclass(frozen=True)
class OptimizerConfig:
    """Budgets of the input optimization.

    Attributes:
        grid_points: Bloch-ball seeds for qubit inputs at ``alpha = 1``.
        alpha_grid_points: Bloch-ball seeds for qubit inputs at ``alpha > 1``
            when no warm start is supplied.
        restarts: random seeds for inputs of dimension above two.
        top_k: number of best grid points refined locally.
        max_evals: Nelder-Mead evaluation budget per refinement.
        probes: random inputs used for the certificate.
        max_input_dim: largest input dimension accepted.
        seed: master seed for restarts and probes.
        tol: tolerance of the inner Renyi fixed point.
    """

    grid_points: int = 2000
    alpha_grid_points: int = 200
    restarts: int = 8
    top_k: int = 3
    max_evals: int = 300
    probes: int = 50
    max_input_dim: int = 4
    seed: int = 0
    tol: float = 1e-12


def _check_budget(ch: QuantumChannel, cfg: OptimizerConfig):
    if ch.d_in > cfg.max_input_dim:
        raise OptimizationBudgetExceeded(f"input dimension {ch.d_in} exceeds budget {cfg.max_input_dim}")


def _maximize(ev: _Evaluator, alpha: float, cfg: OptimizerConfig, warm: Sequence[np.ndarray] = (), use_grid=True):
    """Seed, refine with Nelder-Mead, return ``(rho, value, trace)``."""
    par = _Parameterization(ev.d)
    trace = []
    seeds: list[tuple[float, np.ndarray]] = []
    if use_grid:
        if ev.d == 2:
            n = cfg.grid_points if abs(alpha - 1) <= ALPHA_ONE_TOL else cfg.alpha_grid_points
            cands = [bloch_state(b) for b in fibonacci_ball(n)] if n > 0 else []
        else:
            rng = make_rng(cfg.seed, 1)
            cands = [np.eye(ev.d) / ev.d] + [random_density_operator(ev.d, seed=rng).matrix for _ in range(cfg.restarts)]
        scored = sorted(((ev.value(r, alpha), i) for i, r in enumerate(cands)), reverse=True)
        seeds += [(v, cands[i]) for v, i in scored[: cfg.top_k]]
        if scored:
            trace.append(("seed", scored[0][0]))
    for r in warm:
        seeds.append((ev.value(r, alpha), np.asarray(r)))
    if not seeds:
        r = np.eye(ev.d) / ev.d
        seeds.append((ev.value(r, alpha), r))

    best_val, best_rho = max(seeds, key=lambda t: t[0])
    for _, rho0 in seeds:
        x0 = par.from_state(rho0)
        step = 0.05 if warm else 0.2
        simplex = np.vstack([x0] + [x0 + step * e for e in np.eye(x0.size)])
        res = minimize(
            lambda x: -ev.value(par.to_state(x), alpha),
            x0,
            method="Nelder-Mead",
            options={"xatol": 1e-4, "fatol": 1e-10, "maxfev": cfg.max_evals, "initial_simplex": simplex,
                     "adaptive": x0.size > 4},
        )
        if -res.fun > best_val:
            best_val, best_rho = -res.fun, par.to_state(res.x)
    trace.append(("refine", best_val))
    return hermitize(best_rho), best_val, trace


def _certify(ev: _Evaluator, alpha: float, best: float, cfg: OptimizerConfig) -> tuple[float, float]:
    if cfg.probes <= 0:
        return math.inf, -math.inf
    rng = make_rng(cfg.seed, 2)
    probe = max(ev.value(random_density_operator(ev.d, seed=rng).matrix, alpha) for _ in range(cfg.probes))
    return best - probe, probe


def _input_state(ch: QuantumChannel, rho: np.ndarray) -> DensityOperator:
    return _trusted_density(HilbertFactorization((ch.input_label,), (ch.d_in,)), hermitize(rho))


def channel_mutual_information(ch: QuantumChannel, subset=None, order=1.0, opt_cfg: Optional[OptimizerConfig] = None,
                               warm: Sequence[np.ndarray] = ()) -> InputOptimum:
    """``I_alpha(N_{A -> B_S})`` maximized over inputs.

    Args:
        ch: the channel.
        subset: receivers ``S`` (defaults to all outputs).
        order: Renyi order ``alpha >= 1``.
        opt_cfg: optimizer budgets.
        warm: optional input states used as extra refinement seeds.

    Raises:
        OptimizationBudgetExceeded: if the input dimension exceeds the budget.
    """
    cfg = opt_cfg or OptimizerConfig()
    _check_budget(ch, cfg)
    order = as_order(order)
    alpha = 1.0 if order.is_one else order.alpha
    ev = _Evaluator(ch, subset if subset is not None else ch.output_labels, tol=cfg.tol)
    rho, val, trace = _maximize(ev, alpha, cfg, warm)
    gap, probe = _certify(ev, alpha, val, cfg)
    if cfg.probes > 0:
        trace.append(("probe", probe))
    return InputOptimum(_input_state(ch, rho), float(val), tuple(trace), float(gap))


class ChannelInformation:
    """Cached ``alpha -> I_alpha(N_{A -> B_S})`` with warm-started optimization.

    The ``alpha = 1`` optimum is found with the full grid; every other order is
    refined from the optimizer of the nearest order already computed.
    Concavity of the information in the input state at fixed order makes the
    local refinement sufficient.
    """

    def __init__(self, ch: QuantumChannel, subset=None, opt_cfg: Optional[OptimizerConfig] = None):
        self.cfg = opt_cfg or OptimizerConfig()
        _check_budget(ch, self.cfg)
        self.ch = ch
        self.ev = _Evaluator(ch, subset if subset is not None else ch.output_labels, tol=self.cfg.tol)
        self.cache: dict[float, tuple[float, np.ndarray]] = {}
        rho, val, _ = _maximize(self.ev, 1.0, self.cfg)
        self.cache[1.0] = (val, rho)

    @property
    def capacity(self) -> float:
        return self.cache[1.0][0]

    @property
    def capacity_input(self) -> np.ndarray:
        return self.cache[1.0][1]

    def __call__(self, alpha: float) -> float:
        if abs(alpha - 1) <= ALPHA_ONE_TOL:
            return self.capacity
        if alpha not in self.cache:
            nearest = min(self.cache, key=lambda a: abs(a - alpha))
            rho, val, _ = _maximize(self.ev, alpha, self.cfg, [self.cache[nearest][1]], use_grid=False)
            self.cache[alpha] = (val, rho)
        return self.cache[alpha][0]

    def fork(self) -> "ChannelInformation":
        """Copy holding only the ``alpha = 1`` optimum.

        Results computed on a fork depend only on the queried orders, never on
        what other forks were asked, which keeps concurrent sweeps deterministic.
        """
        other = object.__new__(ChannelInformation)
        other.cfg, other.ch = self.cfg, self.ch
        other.ev = _Evaluator(self.ch, self.ev.out.labels, tol=self.cfg.tol)
        other.cache = {1.0: self.cache[1.0]}
        return other

    def optimizer(self, alpha: float) -> np.ndarray:
        self(alpha)
        return self.cache[1.0 if abs(alpha - 1) <= ALPHA_ONE_TOL else alpha][1]


def channel_error_exponent(ch: QuantumChannel, subset=None, r: float = 0.0, opt_cfg: Optional[OptimizerConfig] = None,
                           tol: float = 1e-6, info: Optional[ChannelInformation] = None) -> ChannelExponent:
    """``E_r(N_{A -> B_S}) = sup_{alpha in [1,2]} ((alpha-1)/alpha) (r - I_alpha(N_{A -> B_S}))``.

    ``psi_star`` is the purification (on ``input_label`` and ``"R"``) of the
    maximizing input at ``alpha_star``, i.e. the worst-case input. A
    precomputed :class:`ChannelInformation` may be passed to reuse its cache.
    """
    info = info or ChannelInformation(ch, subset, opt_cfg)
    if r <= info.capacity:
        # I_alpha is nondecreasing in alpha, so every order gives a nonpositive value
        psi = purify(_input_state(ch, info.capacity_input), "R")
        return ChannelExponent(0.0, 1.0, psi)
    res = exponent_from_information(info, float(r), tol)
    psi = purify(_input_state(ch, info.optimizer(res.alpha_star)), "R")
    return ChannelExponent(res.value, res.alpha_star, psi)


def channel_dispersion(ch: QuantumChannel, subset=None, opt_cfg: Optional[OptimizerConfig] = None,
                       tol_cap: float = TOL_CAP, starts: int = 6) -> float:
    """Largest ``V(B_S : R)`` over inputs within ``tol_cap`` bits of the capacity.

    The near-optimal set is searched with SLSQP from the capacity-achieving
    input and ``starts`` seeded perturbations of it.
    """
    cfg = opt_cfg or OptimizerConfig()
    _check_budget(ch, cfg)
    ev = _Evaluator(ch, subset if subset is not None else ch.output_labels, tol=cfg.tol)
    rho_star, cap, _ = _maximize(ev, 1.0, cfg)
    par = _Parameterization(ev.d)
    x_star = par.from_state(rho_star)
    floor = cap - tol_cap
    best = ev.variance(rho_star)
    rng = make_rng(cfg.seed, 3)
    x0s = [x_star] + [x_star + 0.02 * rng.standard_normal(x_star.size) for _ in range(starts)]
    for x0 in x0s:
        res = minimize(
            lambda x: -ev.variance(par.to_state(x)),
            x0,
            method="SLSQP",
            constraints=[{"type": "ineq", "fun": lambda x: ev.value(par.to_state(x), 1.0) - floor}],
            options={"maxiter": 200, "ftol": 1e-12},
        )
        rho = par.to_state(res.x)
        if ev.value(rho, 1.0) >= floor:
            best = max(best, ev.variance(rho))
    return float(max(best, 0.0))


# ---------------------------------------------------------------------------
# Capacity region
# ---------------------------------------------------------------------------


def corner_points(i1: float, i2: float, i12: float) -> tuple:
    """Corners of ``{r_1 >= I_1, r_2 >= I_2, r_1 + r_2 >= I_12}``.

    Two corners ``(I_1, I_12 - I_1)`` and ``(I_12 - I_2, I_2)`` when the sum
    constraint is active (``I_12 > I_1 + I_2``), otherwise the single corner
    ``(I_1, I_2)``.
    """
    if i12 > i1 + i2:
        return ((i1, i12 - i1), (i12 - i2, i2))
    return ((i1, i2),)


def capacity_region(ch: QuantumChannel, opt_cfg: Optional[OptimizerConfig] = None, max_receivers: int = 3,
                    workers: int = 1) -> RegionReport:
    """Thresholds ``I(N_{A -> B_S})`` for every nonempty receiver subset.

    Subsets are independent and may run on ``workers`` threads; each uses the
    same seeds, so the result does not depend on ``workers``.

    Raises:
        OptimizationBudgetExceeded: if there are more than ``max_receivers`` outputs.
    """
    labels = ch.output_labels
    if len(labels) > max_receivers:
        raise OptimizationBudgetExceeded(f"{len(labels)} receivers exceed the budget of {max_receivers}")
    subsets = nonempty_subsets(labels)

    def run(s):
        return channel_mutual_information(ch, s, 1.0, opt_cfg)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            optima = list(pool.map(run, subsets))
    else:
        optima = [run(s) for s in subsets]
    thresholds = {s: max(0.0, o.value) for s, o in zip(subsets, optima)}
    vertices = None
    if len(labels) == 2:
        a, b = labels
        vertices = corner_points(thresholds[(a,)], thresholds[(b,)], thresholds[(a, b)])
    return RegionReport(labels, thresholds, vertices, dict(zip(subsets, optima)))


def region_membership(report: RegionReport, rates) -> tuple[bool, dict]:
    """``(member, slack)`` with ``slack[S] = r_S - I(N_{A -> B_S})``.

    Membership holds iff every slack is at least ``-1e-9``.

    Raises:
        ShapeMismatch: if the number of rates differs from the number of receivers.
    """
    rv = rates if isinstance(rates, RateVector) else RateVector(tuple(rates))
    if len(rv) != len(report.labels):
        raise ShapeMismatch(f"{len(rv)} rates for {len(report.labels)} receivers")
    slack = {s: rv.subset_rate(report.labels, s) - t for s, t in report.thresholds.items()}
    return all(v >= -MEMBERSHIP_SLACK for v in slack.values()), slack
