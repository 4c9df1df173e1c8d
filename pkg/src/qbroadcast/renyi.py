"""Quantum divergences, Renyi informations and error-exponent functions.

All quantities are in bits (base-2 logarithms).

The generalized sandwiched Renyi information

    I_alpha(rho_AB || tau_A) = min_{sigma_B} D_alpha(rho_AB || tau_A (x) sigma_B)

is computed by a damped fixed-point iteration on ``sigma_B`` and certified by
comparing against randomly drawn ``sigma_B``. At ``alpha = 1`` the minimizer
is the marginal ``rho_B`` and a closed form is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import InvalidOrder, NotPSD, SpaceMismatch, SupportViolation
from .operators import (
    NEG_CLIP,
    SUPPORT_TOL,
    DensityOperator,
    HilbertFactorization,
    LabeledOperator,
    _trusted_density,
    as_labels,
    eigh_psd,
    hermitize,
    kron_all,
    make_rng,
    partial_trace,
    partial_trace_array,
    psd_power,
    random_density_operator,
)

SUPPORT_LEAK_TOL = 1e-10
# below this distance from 1 the order is treated as the alpha -> 1 limit
ALPHA_ONE_TOL = 1e-12


@dataclass(frozen=True)
class RenyiOrder:
    """Renyi order ``alpha``; ``limit_one`` (or ``alpha == 1``) selects the Umegaki branch."""

    alpha: float = 1.0
    limit_one: bool = False

    def __post_init__(self):
        if not self.limit_one and not self.alpha > 0:
            raise InvalidOrder(f"Renyi order must be positive, got {self.alpha}")
        if abs(self.alpha - 1) <= ALPHA_ONE_TOL:
            object.__setattr__(self, "limit_one", True)

    @property
    def is_one(self) -> bool:
        return self.limit_one


def as_order(order) -> RenyiOrder:
    return order if isinstance(order, RenyiOrder) else RenyiOrder(float(order))


@dataclass(frozen=True)
class ExponentQuery:
    """Rate (bits) and search settings for a Fenchel-Legendre exponent."""

    rate: float
    alpha_interval: tuple[float, float] = (1.0, 2.0)
    tol: float = 1e-6

    def __post_init__(self):
        if not self.rate >= 0:
            raise InvalidOrder(f"rate must be nonnegative, got {self.rate}")
        lo, hi = self.alpha_interval
        if not 1.0 <= lo < hi <= 2.0:
            raise InvalidOrder(f"alpha interval must lie in [1, 2], got {self.alpha_interval}")
        if not self.tol > 0:
            raise InvalidOrder("search tolerance must be positive")


@dataclass(frozen=True, eq=False)
class MinimizerReport:
    """Result of the inner minimization over ``sigma``.

    Attributes:
        sigma_star: best ``sigma`` found.
        objective: ``D_alpha(rho || tau (x) sigma_star)`` in bits.
        iterations: fixed-point iterations performed.
        converged: whether the objective change fell below the tolerance.
        certificate_gap: best random-probe objective minus ``objective``;
            negative values mean a probe beat the minimizer.
    """

    sigma_star: DensityOperator
    objective: float
    iterations: int
    converged: bool
    certificate_gap: float


class ExponentResult(NamedTuple):
    value: float
    alpha_star: float


# ---------------------------------------------------------------------------
# Divergences


def _mat(x) -> np.ndarray:
    return np.asarray(x.matrix if isinstance(x, LabeledOperator) else x)


def _check_pair(rho, sigma):
    a, b = _mat(rho), _mat(sigma)
    if a.shape != b.shape:
        raise SpaceMismatch(f"shapes {a.shape} and {b.shape} differ")
    if isinstance(rho, LabeledOperator) and isinstance(sigma, LabeledOperator):
        if rho.dims != sigma.dims:
            raise SpaceMismatch(f"dims {rho.dims} and {sigma.dims} differ")
    return a, b


def entropy_of_spectrum(w: np.ndarray) -> float:
    w = w[w > SUPPORT_TOL]
    return float(-np.sum(w * np.log2(w)))


def von_neumann_entropy(rho) -> float:
    """``-Tr rho log2 rho``."""
    w, _ = eigh_psd(_mat(rho))
    return entropy_of_spectrum(w)


def support_leak(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Weight of ``rho`` outside the support of ``sigma``."""
    w, v = eigh_psd(sigma, check=False)
    off = v[:, w <= SUPPORT_TOL]
    if off.shape[1] == 0:
        return 0.0
    return float(np.real(np.trace(off.conj().T @ rho @ off)))


def _sandwiched(rho: np.ndarray, sigma: np.ndarray, alpha: float) -> float:
    if alpha > 1 and support_leak(rho, sigma) > SUPPORT_LEAK_TOL:
        return math.inf
    s = psd_power(sigma, (1 - alpha) / (2 * alpha))
    w, _ = eigh_psd(s @ rho @ s, check=False)
    q = float(np.sum(w[w > 0] ** alpha))
    if q <= 0:
        return math.inf
    return math.log2(q) / (alpha - 1)


def _umegaki(rho: np.ndarray, sigma: np.ndarray) -> float:
    if support_leak(rho, sigma) > SUPPORT_LEAK_TOL:
        return math.inf
    wr, _ = eigh_psd(rho)
    ws, vs = eigh_psd(sigma)
    on = ws > SUPPORT_TOL
    diag = np.real(np.einsum("ij,ik,kj->j", vs[:, on].conj(), rho, vs[:, on]))
    return -entropy_of_spectrum(wr) - float(np.sum(diag * np.log2(ws[on])))


def _validate_sigma(sigma: np.ndarray):
    w = np.linalg.eigvalsh(hermitize(sigma))
    if w.size and w[0] < -NEG_CLIP * max(1.0, abs(w[-1])):
        raise NotPSD(f"sigma has eigenvalue {w[0]:.3e}")


def sandwiched_divergence(rho, sigma, order) -> float:
    """Sandwiched Renyi divergence ``D_alpha(rho || sigma)`` in bits.

    Returns ``inf`` when ``alpha > 1`` and ``supp rho`` is not contained in
    ``supp sigma``. Order one gives the Umegaki relative entropy.

    Raises:
        NotPSD: if ``sigma`` has a negative eigenvalue below tolerance.
    """
    order = as_order(order)
    a, b = _check_pair(rho, sigma)
    _validate_sigma(b)
    if order.is_one:
        return _umegaki(a, b)
    return _sandwiched(a, b, order.alpha)


def umegaki_divergence(rho, sigma) -> float:
    """Quantum relative entropy ``Tr rho (log rho - log sigma)`` in bits."""
    a, b = _check_pair(rho, sigma)
    _validate_sigma(b)
    return _umegaki(a, b)


def _log_on_support(m: np.ndarray) -> np.ndarray:
    w, v = eigh_psd(m)
    f = np.zeros_like(w)
    on = w > SUPPORT_TOL
    f[on] = np.log2(w[on])
    return (v * f) @ v.conj().T


def relative_entropy_variance(rho, sigma) -> float:
    """``Tr rho (log rho - log sigma)^2 - D(rho || sigma)^2`` in bits squared.

    Raises:
        SupportViolation: if ``supp rho`` is not inside ``supp sigma``.
    """
    a, b = _check_pair(rho, sigma)
    _validate_sigma(b)
    if support_leak(a, b) > SUPPORT_LEAK_TOL:
        raise SupportViolation("supp rho is not contained in supp sigma")
    x = _log_on_support(a) - _log_on_support(b)
    rx = a @ x
    mean = float(np.real(np.trace(rx)))
    second = float(np.real(np.trace(rx @ x)))
    return max(0.0, second - mean**2)


def petz_divergence(rho, sigma, alpha: float) -> float:
    """Petz Renyi divergence ``log2(Tr rho^a sigma^(1-a)) / (a - 1)``."""
    if not alpha > 0 or alpha == 1:
        raise InvalidOrder(f"Petz order must be in (0,1) or (1,inf), got {alpha}")
    a, b = _check_pair(rho, sigma)
    _validate_sigma(b)
    if alpha > 1 and support_leak(a, b) > SUPPORT_LEAK_TOL:
        return math.inf
    q = float(np.real(np.trace(psd_power(a, alpha) @ psd_power(b, 1 - alpha))))
    if q <= 0:
        return math.inf
    return math.log2(q) / (alpha - 1)


# ---------------------------------------------------------------------------
# Renyi information


def _fixed_point(rho, tau, d_a, d_b, alpha, sigma0, tol, max_iter, damping):
    """Damped iteration ``sigma <- Tr_A[(S rho S)^alpha] / Q`` with ``S = (tau (x) sigma)^gamma``.

    Returns ``(sigma, objective, iterations, converged)`` for the best iterate.
    """
    gamma = (1 - alpha) / (2 * alpha)
    tg = psd_power(tau, gamma, check=False)
    sigma = sigma0
    best = (sigma, math.inf)
    prev = math.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        s = np.kron(tg, psd_power(sigma, gamma, check=False))
        w, v = eigh_psd(s @ rho @ s, check=False)
        wa = w**alpha
        q = float(wa.sum())
        obj = math.log2(q) / (alpha - 1)
        if obj < best[1]:
            best = (sigma, obj)
        if abs(obj - prev) < tol:
            converged = True
            break
        prev = obj
        new = partial_trace_array((v * wa) @ v.conj().T, (d_a, d_b), [1]) / q
        sigma = hermitize(damping * sigma + (1 - damping) * new)
    return best[0], best[1], it, converged


def _objective(rho, tau, sigma, alpha):
    return _sandwiched(rho, np.kron(tau, sigma), alpha)


def renyi_information(
    rho: DensityOperator,
    tau: LabeledOperator,
    minimized,
    order,
    *,
    tol: float = 1e-9,
    max_iter: int = 500,
    damping: float = 0.5,
    probes: int = 200,
    seed: int = 0,
    sigma0: Optional[np.ndarray] = None,
) -> MinimizerReport:
    """Generalized sandwiched Renyi information ``min_sigma D_alpha(rho || tau (x) sigma)``.

    Args:
        rho: joint state; its labels must be ``tau.labels`` plus ``minimized``.
        tau: PSD operator on the non-minimized factors.
        minimized: labels carrying the optimized ``sigma``.
        order: Renyi order (float or :class:`RenyiOrder`), ``alpha >= 1``.
        tol: stop when successive objectives differ by less than this.
        max_iter: iteration budget; on exhaustion ``converged`` is False.
        damping: weight of the previous iterate in each update.
        probes: number of random ``sigma`` used for the certificate.
        seed: seed for the probe states.
        sigma0: optional warm start (matrix on the minimized factors).
    """
    order = as_order(order)
    if not order.is_one and order.alpha < 1:
        raise InvalidOrder(f"Renyi information needs alpha >= 1, got {order.alpha}")
    b_labels = as_labels(minimized)
    a_labels = tau.labels
    if sorted(a_labels + b_labels) != sorted(rho.labels):
        raise SpaceMismatch(
            f"tau labels {list(a_labels)} and minimized {list(b_labels)} do not partition {list(rho.labels)}"
        )
    for l in a_labels:
        if tau.space.dims[tau.space.index(l)] != rho.space.dims[rho.space.index(l)]:
            raise SpaceMismatch(f"factor {l!r} has different dimensions in rho and tau")
    r = rho.reorder(a_labels + b_labels).matrix
    t = np.asarray(tau.matrix)
    _validate_sigma(t)
    b_space = rho.space.select(b_labels).reordered(b_labels)
    d_a, d_b = tau.dim, b_space.total_dim
    rho_b = partial_trace_array(r, (d_a, d_b), [1])

    if order.is_one:
        sigma, obj = rho_b, _umegaki(r, np.kron(t, rho_b))
        iterations, converged = 0, True
    elif support_leak(r, np.kron(t, np.eye(d_b))) > SUPPORT_LEAK_TOL:
        sigma, obj = rho_b, math.inf
        iterations, converged = 0, True
    else:
        start = rho_b
        if sigma0 is not None and support_leak(rho_b, np.asarray(sigma0)) <= SUPPORT_LEAK_TOL:
            start = np.asarray(sigma0)
        sigma, obj, iterations, converged = _fixed_point(
            r, t, d_a, d_b, order.alpha, start, tol, max_iter, damping
        )

    gap = math.inf
    if probes > 0 and math.isfinite(obj):
        rng = make_rng(seed)
        alpha = 1.0 if order.is_one else order.alpha
        best = math.inf
        for _ in range(probes):
            s = random_density_operator(d_b, seed=rng).matrix
            val = _umegaki(r, np.kron(t, s)) if order.is_one else _objective(r, t, s, alpha)
            best = min(best, val)
        gap = best - obj
    sigma = hermitize(sigma) / np.trace(sigma).real
    return MinimizerReport(_trusted_density(b_space, sigma), obj, iterations, converged, gap)


def renyi_information_value(rho, tau, minimized, order, **kwargs) -> float:
    """Objective of :func:`renyi_information` without the probe certificate."""
    kwargs.setdefault("probes", 0)
    return renyi_information(rho, tau, minimized, order, **kwargs).objective


def multipartite_mutual_information(rho: DensityOperator, parts: Sequence, order, **kwargs) -> float:
    """Multipartite Renyi information ``I_alpha(A_1 : ... : A_L : E)`` in bits.

    ``tau`` is the product of the exact marginals on ``parts``; the labels not
    covered by ``parts`` form the residual system ``E`` whose ``sigma`` is
    optimized. With no residual system this is ``D_alpha(rho || (x) rho_{A_l})``.
    """
    order = as_order(order)
    parts = [as_labels(p) for p in parts]
    covered = [l for p in parts for l in p]
    residual = rho.space.complement(covered)
    if order.is_one:
        total = sum(von_neumann_entropy(partial_trace(rho, p)) for p in parts)
        if residual:
            total += von_neumann_entropy(partial_trace(rho, residual))
        return total - von_neumann_entropy(rho)
    tau = kron_all(partial_trace(rho, p).matrix for p in parts)
    tau_space = HilbertFactorization(
        tuple(covered), tuple(rho.space.dims[rho.space.index(l)] for l in covered)
    )
    tau_op = LabeledOperator(tau_space, tau)
    if not residual:
        return sandwiched_divergence(rho.reorder(covered), tau_op, order)
    kwargs.setdefault("probes", 0)
    return renyi_information(rho, tau_op, residual, order, **kwargs).objective


# ---------------------------------------------------------------------------
# Error exponents

_GOLDEN = (math.sqrt(5) - 1) / 2


def golden_section_max(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-6):
    """Maximize a concave function on ``[lo, hi]``; endpoints are also evaluated.

    Returns ``(x_best, f_best)`` over every point evaluated.
    """
    seen = {lo: f(lo), hi: f(hi)}
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    seen[c], seen[d] = fc, fd
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
            seen[c] = fc
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
            seen[d] = fd
    x = max(seen, key=seen.get)
    return x, seen[x]


def exponent_from_information(info: Callable[[float], float], rate: float, tol: float = 1e-6,
                              interval: tuple[float, float] = (1.0, 2.0)) -> ExponentResult:
    """``sup_alpha ((alpha - 1)/alpha) (rate - info(alpha))`` over ``interval``.

    ``info(alpha)`` is only called for ``alpha > 1``; the ``alpha = 1`` endpoint
    contributes exactly zero, so the result is nonnegative.
    """
    if rate < 0:
        raise InvalidOrder(f"rate must be nonnegative, got {rate}")

    def objective(alpha):
        if alpha - 1 <= ALPHA_ONE_TOL:
            return 0.0
        val = info(alpha)
        if not math.isfinite(val):
            return -math.inf
        return (alpha - 1) / alpha * (rate - val)

    alpha, value = golden_section_max(objective, interval[0], interval[1], tol)
    if value <= 0:
        return ExponentResult(0.0, 1.0)
    return ExponentResult(value, alpha)


def error_exponent_state(rho, tau, minimized, query, **kwargs) -> ExponentResult:
    """Fenchel-Legendre exponent ``E_r(rho || tau)`` with the maximizing order.

    ``query`` is an :class:`ExponentQuery` or a bare rate in bits. Extra keyword
    arguments are forwarded to :func:`renyi_information`.
    """
    if not isinstance(query, ExponentQuery):
        query = ExponentQuery(float(query))
    kwargs.setdefault("probes", 0)
    kwargs.setdefault("tol", 1e-12)
    cache: dict[float, float] = {}
    warm = {}

    def info(alpha):
        if alpha not in cache:
            rep = renyi_information(rho, tau, minimized, alpha, sigma0=warm.get("s"), **kwargs)
            warm["s"] = rep.sigma_star.matrix
            cache[alpha] = rep.objective
        return cache[alpha]

    return exponent_from_information(info, query.rate, query.tol, query.alpha_interval)
