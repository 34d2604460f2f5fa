"""Domain types and seeded synthetic data for the model ``Y = A X``.

All randomness goes through :func:`numpy.random.default_rng` (PCG64 bit
generator, ziggurat Gaussian sampler).  Results are bitwise reproducible for
a given seed on one numpy build; nothing here promises agreement with other
generators.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence, Tuple, Union

import numpy as np

OPNORM_TOL = 1e-10
UNIT_TOL = 1e-10


class DimensionError(ValueError):
    """Raised when matrix or problem dimensions are inconsistent."""


class MatrixKind(str, enum.Enum):
    SEMI_ORTHOGONAL = "semi-orthogonal"
    FULL_COLUMN_RANK = "full-column-rank"


@dataclass(frozen=True)
class ProblemDims:
    """Sizes ``p`` (rows of Y), ``r`` (rank) and ``n`` (samples)."""

    p: int
    r: int
    n: int

    def __post_init__(self):
        for name in ("p", "r", "n"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise DimensionError(f"{name} must be a positive integer, got {v!r}")
        if not self.r < min(self.p, self.n):
            raise DimensionError(
                f"need r < min(p, n); got p={self.p}, r={self.r}, n={self.n}"
            )


@dataclass(frozen=True)
class SparsityModel:
    """Bernoulli(theta) x Gaussian(0, sigma^2) entry model."""

    theta: float
    sigma: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise ValueError(f"theta must lie in (0, 1], got {self.theta}")
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True, eq=False)
class MixingMatrix:
    """A ``p x r`` mixing matrix with unit operator norm and full column rank."""

    entries: np.ndarray
    kind: MatrixKind = MatrixKind.FULL_COLUMN_RANK

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[1] > a.shape[0]:
            raise DimensionError(f"mixing matrix must be tall p x r, got {a.shape}")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "kind", MatrixKind(self.kind))
        s = np.linalg.svd(a, compute_uv=False)
        if abs(s[0] - 1.0) > OPNORM_TOL:
            raise ValueError(f"operator norm must be 1, got {s[0]!r}")
        if not s[-1] > 0.0:
            raise ValueError("mixing matrix is rank deficient")
        if self.kind is MatrixKind.SEMI_ORTHOGONAL:
            r = a.shape[1]
            dev = np.linalg.norm(a.T @ a - np.eye(r))
            if dev > OPNORM_TOL * np.sqrt(r):
                raise ValueError(f"A^T A deviates from identity by {dev:.3e}")

    @property
    def p(self) -> int:
        return self.entries.shape[0]

    @property
    def r(self) -> int:
        return self.entries.shape[1]

    def svd(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Thin SVD ``A = U_A diag(d_A) V_A^T``; returns ``(U_A, d_A, V_A)``."""
        u, d, vt = np.linalg.svd(self.entries, full_matrices=False)
        return u, d, vt.T

    def orthogonalized(self) -> np.ndarray:
        """The semi-orthogonal factor ``U_A V_A^T`` (equals A when A^T A = I)."""
        u, _, v = self.svd()
        return u @ v.T

    def column(self, j: int) -> np.ndarray:
        return self.entries[:, j]

    @classmethod
    def normalized(cls, a: np.ndarray, kind=MatrixKind.FULL_COLUMN_RANK) -> "MixingMatrix":
        """Rescale ``a`` to unit operator norm and wrap it."""
        a = np.asarray(a, dtype=float)
        s1 = np.linalg.norm(a, 2)
        if s1 == 0.0:
            raise ValueError("cannot normalize a zero matrix")
        return cls(a / s1, kind)


@dataclass(frozen=True, eq=False)
class SparseCoefficients:
    """Sparse coefficient matrix ``X = B * Z`` together with its support ``B``."""

    entries: np.ndarray
    support: np.ndarray

    def __post_init__(self):
        x = np.array(self.entries, dtype=float)
        b = np.array(self.support, dtype=bool)
        if x.shape != b.shape:
            raise DimensionError("entries and support must have the same shape")
        if np.any(x[~b] != 0.0):
            raise ValueError("entries must vanish off the support")
        x.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "entries", x)
        object.__setattr__(self, "support", b)

    @property
    def shape(self):
        return self.entries.shape


@dataclass(frozen=True)
class SignedPermutation:
    """Signed permutation acting on columns.

    Right-multiplying a matrix by this permutation sends column ``j`` of the
    result to ``signs[j] * column perm[j]`` of the input.
    """

    perm: Tuple[int, ...]
    signs: Tuple[int, ...] = field(default=())

    def __post_init__(self):
        perm = tuple(int(i) for i in self.perm)
        signs = tuple(int(s) for s in self.signs) if self.signs else (1,) * len(perm)
        if sorted(perm) != list(range(len(perm))):
            raise ValueError(f"not a permutation: {perm}")
        if len(signs) != len(perm) or any(s not in (-1, 1) for s in signs):
            raise ValueError(f"signs must be +-1 of length {len(perm)}")
        object.__setattr__(self, "perm", perm)
        object.__setattr__(self, "signs", signs)

    @property
    def size(self) -> int:
        return len(self.perm)

    @classmethod
    def identity(cls, r: int) -> "SignedPermutation":
        return cls(tuple(range(r)), (1,) * r)

    def matrix(self) -> np.ndarray:
        """The ``r x r`` matrix P with ``A @ P == apply(A)``."""
        r = self.size
        P = np.zeros((r, r))
        P[list(self.perm), list(range(r))] = self.signs
        return P

    def apply(self, a: np.ndarray) -> np.ndarray:
        a = np.asarray(a)
        if a.shape[-1] != self.size:
            raise DimensionError(f"expected {self.size} columns, got {a.shape[-1]}")
        return a[..., list(self.perm)] * np.asarray(self.signs, dtype=float)

    def then(self, other: "SignedPermutation") -> "SignedPermutation":
        """Composition: applying ``self`` and then ``other``."""
        if other.size != self.size:
            raise DimensionError("size mismatch in composition")
        perm = tuple(self.perm[other.perm[j]] for j in range(self.size))
        signs = tuple(other.signs[j] * self.signs[other.perm[j]] for j in range(self.size))
        return SignedPermutation(perm, signs)

    def inverse(self) -> "SignedPermutation":
        r = self.size
        perm = [0] * r
        signs = [1] * r
        for j, i in enumerate(self.perm):
            perm[i] = j
            signs[i] = self.signs[j]
        return SignedPermutation(tuple(perm), tuple(signs))


def _shape_pr(dims: Union[ProblemDims, Sequence[int]]) -> Tuple[int, int]:
    if isinstance(dims, ProblemDims):
        return dims.p, dims.r
    p, r = (int(v) for v in dims)
    if p < 1 or r < 1 or r > p:
        raise DimensionError(f"need 1 <= r <= p, got p={p}, r={r}")
    return p, r


def generate_A(dims, kind=MatrixKind.FULL_COLUMN_RANK, seed: int = 0) -> MixingMatrix:
    """Draw a mixing matrix.

    ``dims`` is a :class:`ProblemDims` (validated against ``r < min(p, n)``)
    or a bare ``(p, r)`` pair, which also admits square orthogonal matrices.
    ``FULL_COLUMN_RANK`` draws i.i.d. standard normal entries and rescales to
    unit operator norm; ``SEMI_ORTHOGONAL`` takes the left singular vectors of
    such a draw.
    """
    p, r = _shape_pr(dims)
    kind = MatrixKind(kind)
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((p, r))
    if kind is MatrixKind.SEMI_ORTHOGONAL:
        u, _, _ = np.linalg.svd(g, full_matrices=False)
        return MixingMatrix(u, kind)
    return MixingMatrix.normalized(g, kind)


def generate_X(dims: ProblemDims, sm: SparsityModel, seed: int = 0) -> SparseCoefficients:
    """Bernoulli-Gaussian ``r x n`` coefficients, deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    shape = (dims.r, dims.n)
    support = rng.random(shape) < sm.theta
    z = rng.standard_normal(shape) * sm.sigma
    return SparseCoefficients(np.where(support, z, 0.0), support)


def synthesize(A, X) -> np.ndarray:
    """Return ``Y = A X``."""
    a = A.entries if isinstance(A, MixingMatrix) else np.asarray(A, dtype=float)
    x = X.entries if isinstance(X, SparseCoefficients) else np.asarray(X, dtype=float)
    if a.shape[1] != x.shape[0]:
        raise DimensionError(f"inner dimensions differ: {a.shape} @ {x.shape}")
    return a @ x


def apply_signed_permutation(A: MixingMatrix, P: SignedPermutation) -> MixingMatrix:
    """Columns of ``A @ P``; the result keeps A's kind (both are preserved by P)."""
    return MixingMatrix(P.apply(A.entries), A.kind)


def random_unit_vector(p: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(p)
    return v / np.linalg.norm(v)


def check_unit(q: np.ndarray, tol: float = UNIT_TOL) -> np.ndarray:
    """Validate a point on the sphere and return it as a float vector."""
    q = np.asarray(q, dtype=float)
    if q.ndim != 1:
        raise DimensionError(f"expected a vector, got shape {q.shape}")
    nrm = np.linalg.norm(q)
    if abs(nrm - 1.0) > tol:
        raise ValueError(f"q must have unit norm, got {nrm!r}")
    return q
