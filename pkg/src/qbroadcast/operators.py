"""Dense linear algebra over labeled multipartite Hilbert spaces.

Operators carry a :class:`HilbertFactorization`, an ordered list of
subsystem labels with their dimensions. Matrices are stored in the
Kronecker order of that list, so ``tensor`` concatenates factorizations and
``partial_trace`` keeps the surviving labels in their original order.

All spectral work goes through the Hermitian eigendecomposition: inputs are
hermitized as ``(M + M^dagger) / 2``, eigenvalues in ``[-1e-10, 0)`` are
clipped to zero and eigenvalues below ``1e-12`` are treated as lying outside
the support. Negative powers are therefore pseudo-inverse powers.

A subsystem selection is any iterable of labels (a single string is accepted
as a one-element selection).
"""

from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionTooSmall,
    InvalidOrder,
    InvalidRank,
    LabelCollision,
    LabelNotFound,
    NotHermitian,
    NotPSD,
    ShapeMismatch,
    SpaceMismatch,
    SupportWarning,
)

HERM_TOL = 1e-9
NEG_CLIP = 1e-10
SUPPORT_TOL = 1e-12
TRACE_TOL = 1e-9
DEFAULT_DIM_CAP = 4096


# ---------------------------------------------------------------------------
# Randomness


def make_rng(seed, *keys: int) -> np.random.Generator:
    """Counter-based generator keyed by a master seed and optional trial keys.

    The stream for ``(seed, k1, k2, ...)`` does not depend on how many other
    streams were drawn before it, so parallel sweeps stay reproducible.
    A ``numpy.random.Generator`` passed as ``seed`` is returned unchanged.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    entropy = [int(seed), *(int(k) for k in keys)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


# ---------------------------------------------------------------------------
# Factorizations and operators


def as_labels(labels) -> tuple[str, ...]:
    """Normalize a label selection to a tuple of strings."""
    if isinstance(labels, str):
        return (labels,)
    return tuple(labels)


@dataclass(frozen=True)
class HilbertFactorization:
    """Ordered tensor factorization ``H = H_{l1} (x) H_{l2} (x) ...``."""

    labels: tuple[str, ...]
    dims: tuple[int, ...]

    def __post_init__(self):
        labels = as_labels(self.labels)
        dims = tuple(int(d) for d in self.dims)
        if len(labels) != len(dims):
            raise ShapeMismatch(f"{len(labels)} labels but {len(dims)} dims")
        if len(set(labels)) != len(labels):
            dup = sorted({x for x in labels if labels.count(x) > 1})
            raise LabelCollision(f"duplicate labels {dup}")
        if any(d < 1 for d in dims):
            raise ShapeMismatch(f"dimensions must be positive, got {dims}")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "dims", dims)

    @classmethod
    def of(cls, **dims: int) -> "HilbertFactorization":
        """Build from keyword arguments, e.g. ``HilbertFactorization.of(A=2, B=3)``."""
        return cls(tuple(dims), tuple(dims.values()))

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.dims else 1

    def __len__(self):
        return len(self.labels)

    def __contains__(self, label):
        return label in self.labels

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LabelNotFound(f"label {label!r} not in {list(self.labels)}") from None

    def dim(self, labels) -> int:
        """Total dimension of the selected labels."""
        return int(np.prod([self.dims[self.index(l)] for l in as_labels(labels)], dtype=np.int64))

    def select(self, labels) -> "HilbertFactorization":
        """Sub-factorization on ``labels``, kept in this factorization's order."""
        wanted = as_labels(labels)
        for l in wanted:
            self.index(l)
        if len(set(wanted)) != len(wanted):
            raise LabelCollision(f"duplicate labels in selection {list(wanted)}")
        keep = [i for i, l in enumerate(self.labels) if l in wanted]
        return HilbertFactorization(
            tuple(self.labels[i] for i in keep), tuple(self.dims[i] for i in keep)
        )

    def complement(self, labels) -> tuple[str, ...]:
        wanted = set(as_labels(labels))
        for l in wanted:
            self.index(l)
        return tuple(l for l in self.labels if l not in wanted)

    def reordered(self, labels) -> "HilbertFactorization":
        """Same factors listed in the order ``labels`` (a permutation)."""
        labels = as_labels(labels)
        if sorted(labels) != sorted(self.labels):
            raise SpaceMismatch(f"{list(labels)} is not a permutation of {list(self.labels)}")
        return HilbertFactorization(labels, tuple(self.dims[self.index(l)] for l in labels))

    def __add__(self, other: "HilbertFactorization") -> "HilbertFactorization":
        clash = set(self.labels) & set(other.labels)
        if clash:
            raise LabelCollision(f"labels {sorted(clash)} appear on both sides")
        return HilbertFactorization(self.labels + other.labels, self.dims + other.dims)


def _as_space(space) -> HilbertFactorization:
    if isinstance(space, HilbertFactorization):
        return space
    return HilbertFactorization(("A",), (int(space),))


@dataclass(frozen=True, eq=False)
class LabeledOperator:
    """A square matrix acting on a labeled tensor-product space."""

    space: HilbertFactorization
    matrix: np.ndarray

    def __post_init__(self):
        space = _as_space(self.space)
        mat = np.array(self.matrix, dtype=complex)
        n = space.total_dim
        if mat.shape != (n, n):
            raise ShapeMismatch(f"matrix shape {mat.shape} does not match dimension {n}")
        mat.setflags(write=False)
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "matrix", mat)

    @property
    def labels(self) -> tuple[str, ...]:
        return self.space.labels

    @property
    def dims(self) -> tuple[int, ...]:
        return self.space.dims

    @property
    def dim(self) -> int:
        return self.space.total_dim

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)

    def reorder(self, labels) -> "LabeledOperator":
        """Same operator with its factors listed in the order ``labels``."""
        target = self.space.reordered(labels)
        perm = [self.space.index(l) for l in target.labels]
        return _like(self, target, permute_factors(self.matrix, self.dims, perm))

    def is_hermitian(self, tol: float = HERM_TOL) -> bool:
        return hermiticity_defect(self.matrix) <= tol


class DensityOperator(LabeledOperator):
    """Hermitian, positive semidefinite, unit-trace labeled operator."""

    def __post_init__(self):
        super().__post_init__()
        m = self.matrix
        defect = hermiticity_defect(m)
        if defect > HERM_TOL:
            raise NotHermitian(f"max |M - M^dagger| = {defect:.3e}")
        w = np.linalg.eigvalsh(hermitize(m))
        if w[0] < -NEG_CLIP:
            raise NotPSD(f"minimum eigenvalue {w[0]:.3e}")
        tr = np.trace(m).real
        if abs(tr - 1) > TRACE_TOL:
            raise SpaceMismatch(f"trace {tr:.12g} differs from 1")

    def vector(self) -> np.ndarray:
        """Dominant eigenvector (the state vector of a pure state)."""
        w, v = np.linalg.eigh(hermitize(self.matrix))
        return v[:, -1]


def _trusted_density(space: HilbertFactorization, matrix: np.ndarray) -> DensityOperator:
    """Construct a DensityOperator without revalidating (internal use)."""
    obj = object.__new__(DensityOperator)
    mat = np.array(matrix, dtype=complex)
    mat.setflags(write=False)
    object.__setattr__(obj, "space", space)
    object.__setattr__(obj, "matrix", mat)
    return obj


def _like(template: LabeledOperator, space: HilbertFactorization, matrix: np.ndarray):
    if isinstance(template, DensityOperator):
        return _trusted_density(space, matrix)
    return LabeledOperator(space, matrix)


def density(matrix, labels="A", dims=None) -> DensityOperator:
    """Convenience constructor: ``density(m, ("A", "B"), (2, 2))``."""
    labels = as_labels(labels)
    m = np.asarray(matrix)
    if dims is None:
        if len(labels) != 1:
            raise ShapeMismatch("dims are required for more than one label")
        dims = (m.shape[0],)
    return DensityOperator(HilbertFactorization(labels, tuple(dims)), m)


def operator(matrix, labels="A", dims=None) -> LabeledOperator:
    """Convenience constructor mirroring :func:`density` without state checks."""
    labels = as_labels(labels)
    m = np.asarray(matrix)
    if dims is None:
        if len(labels) != 1:
            raise ShapeMismatch("dims are required for more than one label")
        dims = (m.shape[0],)
    return LabeledOperator(HilbertFactorization(labels, tuple(dims)), m)


def identity(space) -> LabeledOperator:
    space = _as_space(space)
    return LabeledOperator(space, np.eye(space.total_dim))


def pure_state(vector, labels="A", dims=None) -> DensityOperator:
    """Projector onto the normalized ``vector``."""
    v = np.asarray(vector, dtype=complex).ravel()
    v = v / np.linalg.norm(v)
    labels = as_labels(labels)
    if dims is None:
        dims = (v.size,)
    return DensityOperator(HilbertFactorization(labels, tuple(dims)), np.outer(v, v.conj()))


# ---------------------------------------------------------------------------
# Array-level primitives


def hermitize(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().T) / 2


def hermiticity_defect(m: np.ndarray) -> float:
    m = np.asarray(m)
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def eigh_psd(m: np.ndarray, check: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a PSD matrix with small negative eigenvalues clipped.

    Raises:
        NotPSD: if ``check`` and an eigenvalue is below ``-1e-10`` (relative to
            the spectral radius when that exceeds one).
    """
    w, v = np.linalg.eigh(hermitize(np.asarray(m)))
    if check and w.size and w[0] < -NEG_CLIP * max(1.0, abs(w[-1])):
        raise NotPSD(f"minimum eigenvalue {w[0]:.3e}")
    return np.where(w < 0, 0.0, w), v


def psd_power(m: np.ndarray, t: float, check: bool = True) -> np.ndarray:
    """``m**t`` on the support of ``m`` (zero elsewhere), for any real ``t``."""
    w, v = eigh_psd(m, check)
    on = w > SUPPORT_TOL
    f = np.zeros_like(w)
    f[on] = w[on] ** t
    return (v * f) @ v.conj().T


def support_projector(m: np.ndarray) -> np.ndarray:
    w, v = eigh_psd(m, check=False)
    u = v[:, w > SUPPORT_TOL]
    return u @ u.conj().T


def kron_all(mats: Iterable[np.ndarray]) -> np.ndarray:
    mats = list(mats)
    if not mats:
        return np.ones((1, 1), dtype=complex)
    return functools.reduce(np.kron, mats)


def permute_factors(m: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors of a square matrix.

    The returned matrix has factor ``perm[i]`` of the input at position ``i``.
    """
    dims = list(dims)
    n = len(dims)
    perm = list(perm)
    if perm == list(range(n)):
        return np.asarray(m)
    t = np.asarray(m).reshape(dims + dims)
    t = t.transpose(perm + [n + p for p in perm])
    d = int(np.prod(dims))
    return t.reshape(d, d)


def permute_vector(v: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors of a vector, as :func:`permute_factors`."""
    dims = list(dims)
    return np.asarray(v).reshape(dims).transpose(list(perm)).ravel()


def partial_trace_array(m: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Trace out every factor whose index is not in ``keep`` (kept in order)."""
    dims = list(dims)
    keep = sorted(keep)
    gone = [i for i in range(len(dims)) if i not in keep]
    if not gone:
        return np.asarray(m)
    dk = int(np.prod([dims[i] for i in keep])) if keep else 1
    dg = int(np.prod([dims[i] for i in gone]))
    t = permute_factors(m, dims, keep + gone).reshape(dk, dg, dk, dg)
    return np.einsum("ijkj->ik", t)


# ---------------------------------------------------------------------------
# Labeled operations


def tensor(*ops) -> LabeledOperator:
    """Tensor product in argument order; accepts operators or one list of them.

    The result is a :class:`DensityOperator` when every factor is one.

    Raises:
        LabelCollision: if two factors share a label.
    """
    if len(ops) == 1 and not isinstance(ops[0], LabeledOperator):
        ops = tuple(ops[0])
    if not ops:
        raise ShapeMismatch("tensor of an empty list")
    space = functools.reduce(lambda a, b: a + b, (o.space for o in ops))
    mat = kron_all(o.matrix for o in ops)
    if all(isinstance(o, DensityOperator) for o in ops):
        return _trusted_density(space, mat)
    return LabeledOperator(space, mat)


def partial_trace(x: LabeledOperator, keep) -> LabeledOperator:
    """Trace out all factors except ``keep``; kept labels retain their order.

    Raises:
        LabelNotFound: if ``keep`` names a label not in ``x``.
    """
    sub = x.space.select(keep)
    idx = [x.space.index(l) for l in sub.labels]
    return _like(x, sub, partial_trace_array(x.matrix, x.dims, idx))


def matrix_power_psd(x: LabeledOperator, t: float) -> LabeledOperator:
    """Fractional power of a PSD operator, pseudo-inverse on the support for ``t < 0``.

    Raises:
        NotHermitian: if ``x`` is not Hermitian within 1e-9.
    """
    m = np.asarray(x.matrix if isinstance(x, LabeledOperator) else x)
    defect = hermiticity_defect(m)
    if defect > HERM_TOL:
        raise NotHermitian(f"max |M - M^dagger| = {defect:.3e}")
    out = psd_power(m, t)
    if isinstance(x, LabeledOperator):
        return LabeledOperator(x.space, out)
    return out


def singular_values(m: np.ndarray) -> np.ndarray:
    """Singular values via the Hermitian dilation ``[[0, M], [M^dagger, 0]]``.

    Hermitian inputs skip the dilation and use ``|eigenvalues|`` directly.
    """
    m = np.asarray(m)
    if hermiticity_defect(m) == 0.0:
        return np.sort(np.abs(np.linalg.eigvalsh(m)))[::-1]
    r, c = m.shape
    dil = np.zeros((r + c, r + c), dtype=complex)
    dil[:r, r:] = m
    dil[r:, :r] = m.conj().T
    w = np.linalg.eigvalsh(dil)
    return np.clip(w[::-1][: min(r, c)], 0.0, None)


def schatten_norm(x, p: float) -> float:
    """``(Tr |X|^p)^(1/p)``; ``p = inf`` gives the operator norm.

    Raises:
        InvalidOrder: if ``p < 1``.
    """
    if p < 1:
        raise InvalidOrder(f"Schatten index must be >= 1, got {p}")
    s = singular_values(np.asarray(x.matrix if isinstance(x, LabeledOperator) else x))
    if np.isinf(p):
        return float(s.max(initial=0.0))
    smax = s.max(initial=0.0)
    if smax == 0:
        return 0.0
    return float(smax * np.sum((s / smax) ** p) ** (1 / p))


def trace_distance(rho, sigma) -> float:
    """``(1/2) ||rho - sigma||_1``.

    Raises:
        SpaceMismatch: if the operators have different dimensions.
    """
    a = np.asarray(rho.matrix if isinstance(rho, LabeledOperator) else rho)
    b = np.asarray(sigma.matrix if isinstance(sigma, LabeledOperator) else sigma)
    if a.shape != b.shape:
        raise SpaceMismatch(f"shapes {a.shape} and {b.shape} differ")
    if isinstance(rho, LabeledOperator) and isinstance(sigma, LabeledOperator):
        if rho.dims != sigma.dims:
            raise SpaceMismatch(f"dims {rho.dims} and {sigma.dims} differ")
    w = np.linalg.eigvalsh(hermitize(a - b))
    return float(min(1.0, 0.5 * np.sum(np.abs(w))))


def kosaki_norm(x, sigma, p: float) -> float:
    """Weighted norm ``(Tr |sigma^(1/2p) X sigma^(1/2p)|^p)^(1/p)``.

    If ``sigma`` is singular and ``X`` has weight outside its support, a
    :class:`SupportWarning` is emitted and the value on the support returned.
    """
    if p < 1 or np.isinf(p):
        raise InvalidOrder(f"Kosaki index must lie in [1, inf), got {p}")
    xm = np.asarray(x.matrix if isinstance(x, LabeledOperator) else x)
    sm = np.asarray(sigma.matrix if isinstance(sigma, LabeledOperator) else sigma)
    if xm.shape != sm.shape:
        raise SpaceMismatch(f"shapes {xm.shape} and {sm.shape} differ")
    w, v = eigh_psd(sm)
    on = w > SUPPORT_TOL
    if not on.all():
        proj = v[:, on] @ v[:, on].conj().T
        leak = np.max(np.abs(xm - proj @ xm @ proj))
        if leak > 1e-10 * max(1.0, np.max(np.abs(xm))):
            warnings.warn(f"operator leaks outside supp sigma by {leak:.3e}", SupportWarning)
    f = np.zeros_like(w)
    f[on] = w[on] ** (1 / (2 * p))
    s = (v * f) @ v.conj().T
    return schatten_norm(s @ xm @ s, p)


def nc_quotient(x: LabeledOperator, y: LabeledOperator) -> LabeledOperator:
    """Noncommutative quotient ``Y^(-1/2) X Y^(-1/2)`` with pseudo-inverse powers."""
    xm = np.asarray(x.matrix if isinstance(x, LabeledOperator) else x)
    ym = np.asarray(y.matrix if isinstance(y, LabeledOperator) else y)
    if xm.shape != ym.shape:
        raise SpaceMismatch(f"shapes {xm.shape} and {ym.shape} differ")
    s = psd_power(ym, -0.5)
    out = hermitize(s @ xm @ s)
    if isinstance(x, LabeledOperator):
        return LabeledOperator(x.space, out)
    return out


def root_fidelity(rho, sigma) -> float:
    """``|| sqrt(rho) sqrt(sigma) ||_1``."""
    a = np.asarray(rho.matrix if isinstance(rho, LabeledOperator) else rho)
    b = np.asarray(sigma.matrix if isinstance(sigma, LabeledOperator) else sigma)
    return schatten_norm(psd_power(a, 0.5) @ psd_power(b, 0.5), 1)


# ---------------------------------------------------------------------------
# Random states and purification


def haar_random_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def haar_random_pure_state(space, seed) -> DensityOperator:
    """Haar-random pure state (normalized complex Gaussian vector)."""
    space = _as_space(space)
    v = haar_random_vector(space.total_dim, make_rng(seed))
    return _trusted_density(space, np.outer(v, v.conj()))


def random_density_operator(dim, rank=None, seed=0) -> DensityOperator:
    """Random state ``G G^dagger / Tr`` with ``G`` a ``dim x rank`` Gaussian.

    With ``rank = dim`` this is the Hilbert-Schmidt ensemble. ``dim`` may be
    an integer (label ``"A"``) or a :class:`HilbertFactorization`.

    Raises:
        InvalidRank: if ``rank`` is outside ``[1, dim]``.
    """
    space = _as_space(dim)
    d = space.total_dim
    rank = d if rank is None else int(rank)
    if not 1 <= rank <= d:
        raise InvalidRank(f"rank {rank} outside [1, {d}]")
    rng = make_rng(seed)
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    m = g @ g.conj().T
    m = hermitize(m / np.trace(m).real)
    return _trusted_density(space, m)


def purification_vector(rho: np.ndarray) -> np.ndarray:
    """Vector ``sum_i sqrt(l_i) |v_i> (x) |i>`` with eigenvalues in decreasing order."""
    w, v = eigh_psd(rho)
    w, v = w[::-1], v[:, ::-1]
    d = len(w)
    return (v * np.sqrt(w)).reshape(d * d) if d else v.ravel()


def purify(rho: DensityOperator, ref_label: str = "R") -> DensityOperator:
    """Purification on ``rho.space + (ref_label,)``; the reference has ``rho``'s dimension.

    The reference basis index ``i`` carries the ``i``-th largest eigenvalue, so
    a pure ``rho`` maps to ``rho (x) |0><0|``.
    """
    d = rho.dim
    vec = purification_vector(rho.matrix)
    space = rho.space + HilbertFactorization((ref_label,), (d,))
    return _trusted_density(space, np.outer(vec, vec.conj()))


@dataclass(frozen=True, eq=False)
class Isometry:
    """Linear map ``V: in_space -> out_space`` with ``V^dagger V`` a projector."""

    matrix: np.ndarray
    in_space: HilbertFactorization
    out_space: HilbertFactorization

    def apply_vector(self, vec: np.ndarray, space: HilbertFactorization) -> tuple[np.ndarray, HilbertFactorization]:
        """Apply to the ``in_space`` factors of a vector on ``space``.

        The output lists the untouched factors first, then ``out_space``.
        """
        rest = space.complement(self.in_space.labels)
        order = list(rest) + list(self.in_space.labels)
        perm = [space.index(l) for l in order]
        v = permute_vector(vec, space.dims, perm).reshape(-1, self.in_space.total_dim)
        out = (v @ self.matrix.T).ravel()
        return out, space.select(rest) + self.out_space


def uhlmann_isometry(psi: DensityOperator, phi: DensityOperator) -> Isometry:
    """Isometry ``V: B -> C`` maximizing ``|<phi| (1_A (x) V) |psi>|``.

    ``psi`` is pure on ``A (x) B`` and ``phi`` pure on ``A (x) C``; the shared
    factor ``A`` is the set of common labels. The attained overlap is the root
    fidelity of the ``A`` marginals. If ``|C| < |B|`` the result is a partial
    isometry that is isometric on the support of ``psi_B``.

    Raises:
        DimensionTooSmall: if ``|C|`` is smaller than the rank of ``psi_A``.
    """
    shared = tuple(l for l in psi.labels if l in phi.labels)
    return uhlmann_isometry_vectors(psi.vector(), psi.space, phi.vector(), phi.space, shared)


def uhlmann_isometry_vectors(
    psi: np.ndarray,
    psi_space: HilbertFactorization,
    phi: np.ndarray,
    phi_space: HilbertFactorization,
    shared,
) -> Isometry:
    """Vector form of :func:`uhlmann_isometry` with an explicit shared factor.

    Useful when the state vectors are too large for density matrices, or when
    the two sides reuse labels that are not meant to be identified.
    """
    shared = as_labels(shared)
    for l in shared:
        if psi_space.dims[psi_space.index(l)] != phi_space.dims[phi_space.index(l)]:
            raise SpaceMismatch(f"shared factor {l!r} has different dimensions")
    b_labels = psi_space.complement(shared)
    c_labels = phi_space.complement(shared)
    b_space = psi_space.select(b_labels)
    c_space = phi_space.select(c_labels)
    da = psi_space.dim(shared) if shared else 1
    db, dc = b_space.total_dim, c_space.total_dim
    big_psi = permute_vector(psi, psi_space.dims, [psi_space.index(l) for l in shared + b_labels]).reshape(da, db)
    big_phi = permute_vector(phi, phi_space.dims, [phi_space.index(l) for l in shared + c_labels]).reshape(da, dc)
    y = big_psi.T @ big_phi.conj()  # dB x dC, overlap = Tr(Y V)
    u, s, wh = np.linalg.svd(y)
    if dc < db:
        sv = np.linalg.svd(big_psi, compute_uv=False)
        rank = int(np.sum(sv > 1e-10))
        if rank > dc:
            raise DimensionTooSmall(f"|C| = {dc} is smaller than rank {rank} of psi_A")
        v = wh.conj().T[:, :dc] @ u[:, :dc].conj().T
    else:
        v = wh.conj().T[:, :db] @ u.conj().T
    return Isometry(v, b_space, c_space)
