"""Sphere-constrained l4 objectives and their Riemannian derivatives.

Four objectives share one interface:

* ``SAMPLE_ORTH``       F(q)   = -(12 theta sigma^4 n)^-1 ||Y^T q||_4^4
* ``SAMPLE_GENERAL``    F_g(q) = -(theta n / 12) ||Ybar^T q||_4^4
* ``POPULATION_ORTH``   f(q)   = -1/4 [(1-theta) ||A^T q||_4^4 + theta ||A^T q||_2^4]
* ``RAW_L4``            -||Y^T q||_4^4

The three sample objectives differ only by a positive constant.  Gradients
and Hessians are Riemannian: the Euclidean quantities projected onto the
tangent space ``{v : v . q = 0}``, with the Hessian corrected by the
``-(q . grad) I`` curvature term of the sphere.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import MixingMatrix, check_unit


class ObjectiveKind(str, enum.Enum):
    SAMPLE_ORTH = "sample-orth"
    SAMPLE_GENERAL = "sample-general"
    POPULATION_ORTH = "population-orth"
    RAW_L4 = "raw-l4"


@dataclass(frozen=True, eq=False)
class TangentEval:
    value: float
    grad: np.ndarray
    hess_operator: np.ndarray
    base: np.ndarray


def zeta(A, q: np.ndarray) -> np.ndarray:
    """Correlations ``A^T q`` of q with the columns of A."""
    a = A.entries if isinstance(A, MixingMatrix) else np.asarray(A, dtype=float)
    return a.T @ q


def tangent_project(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    return v - q * (q @ v)


def _proj_sandwich(q: np.ndarray, m: np.ndarray) -> np.ndarray:
    mq = m @ q
    qmq = q @ mq
    out = m - np.outer(q, mq) - np.outer(mq, q) + qmq * np.outer(q, q)
    return 0.5 * (out + out.T)


class Objective:
    """An objective bound to its data matrix.

    Use the constructors :meth:`sample_orth`, :meth:`sample_general`,
    :meth:`population` and :meth:`raw_l4` rather than ``__init__``.
    """

    def __init__(self, kind: ObjectiveKind, data: np.ndarray, theta: Optional[float] = None, sigma: float = 1.0):
        self.kind = ObjectiveKind(kind)
        data = np.asarray(data.entries if isinstance(data, MixingMatrix) else data, dtype=float)
        if data.ndim != 2:
            raise ValueError("objective data must be a matrix")
        self.data = data
        self.theta = theta
        self.sigma = sigma
        if self.kind is not ObjectiveKind.RAW_L4:
            if theta is None or not 0.0 <= theta <= 1.0:
                raise ValueError(f"theta must lie in [0, 1], got {theta!r}")
        if self.kind is ObjectiveKind.SAMPLE_ORTH and not sigma > 0:
            raise ValueError("sigma must be positive")
        n = data.shape[1]
        if self.kind is ObjectiveKind.SAMPLE_ORTH:
            self.scale = 1.0 / (12.0 * theta * sigma**4 * n)
        elif self.kind is ObjectiveKind.SAMPLE_GENERAL:
            self.scale = theta * n / 12.0
        elif self.kind is ObjectiveKind.RAW_L4:
            self.scale = 1.0
        else:
            self.scale = None

    @classmethod
    def sample_orth(cls, Y, theta: float, sigma: float = 1.0) -> "Objective":
        return cls(ObjectiveKind.SAMPLE_ORTH, Y, theta, sigma)

    @classmethod
    def sample_general(cls, Ybar, theta: float) -> "Objective":
        return cls(ObjectiveKind.SAMPLE_GENERAL, Ybar, theta)

    @classmethod
    def population(cls, A, theta: float) -> "Objective":
        return cls(ObjectiveKind.POPULATION_ORTH, A, theta)

    @classmethod
    def raw_l4(cls, Y) -> "Objective":
        return cls(ObjectiveKind.RAW_L4, Y)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def is_population(self) -> bool:
        return self.kind is ObjectiveKind.POPULATION_ORTH

    def _check(self, q) -> np.ndarray:
        q = check_unit(q)
        if q.shape[0] != self.dim:
            raise ValueError(f"q has length {q.shape[0]}, objective lives in R^{self.dim}")
        return q

    # -- value ------------------------------------------------------------
    def _value_unchecked(self, q: np.ndarray) -> float:
        z = self.data.T @ q
        if self.is_population:
            th = self.theta
            return -0.25 * ((1 - th) * np.sum(z**4) + th * np.sum(z**2) ** 2)
        return -self.scale * np.sum(z**4)

    def value(self, q) -> float:
        return float(self._value_unchecked(self._check(q)))

    def value_delta(self, q: np.ndarray, step: np.ndarray) -> float:
        """``f(q + step) - f(q)`` without the cancellation of a naive difference.

        Both arguments are plain vectors (the objectives are polynomials, so no
        unit-norm requirement applies here).
        """
        z = self.data.T @ q
        dz = self.data.T @ step
        z1 = z + dz
        # a^4 - b^4 = (a - b)(a + b)(a^2 + b^2)
        d4 = np.sum(dz * (z1 + z) * (z1 * z1 + z * z))
        if self.is_population:
            th = self.theta
            s0 = np.sum(z * z)
            ds = np.sum(dz * (z1 + z))
            d22 = ds * (2.0 * s0 + ds)
            return float(-0.25 * ((1 - th) * d4 + th * d22))
        return float(-self.scale * d4)

    # -- first order ------------------------------------------------------
    def euclidean_grad(self, q: np.ndarray) -> np.ndarray:
        z = self.data.T @ q
        if self.is_population:
            th = self.theta
            return -self.data @ ((1 - th) * z**3 + th * np.sum(z**2) * z)
        return -4.0 * self.scale * (self.data @ z**3)

    def grad(self, q) -> np.ndarray:
        q = self._check(q)
        return tangent_project(q, self.euclidean_grad(q))

    # -- second order -----------------------------------------------------
    def euclidean_hess(self, q: np.ndarray) -> np.ndarray:
        M = self.data
        z = M.T @ q
        if self.is_population:
            th = self.theta
            Mz = M @ z
            return -(
                3 * (1 - th) * (M * z**2) @ M.T
                + th * (np.sum(z**2) * (M @ M.T) + 2.0 * np.outer(Mz, Mz))
            )
        return -12.0 * self.scale * ((M * z**2) @ M.T)

    def hess(self, q) -> np.ndarray:
        """Dense Riemannian Hessian ``P (H_e - (q . g_e) I) P`` (symmetric p x p)."""
        q = self._check(q)
        h = self.euclidean_hess(q)
        h[np.diag_indices_from(h)] -= q @ self.euclidean_grad(q)
        return _proj_sandwich(q, h)

    def hess_vec(self, q: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Riemannian Hessian applied to ``v`` in O(p n) without forming it."""
        M = self.data
        z = M.T @ q
        w = tangent_project(q, v)
        mw = M.T @ w
        if self.is_population:
            th = self.theta
            s = np.sum(z**2)
            hw = -(
                3 * (1 - th) * (M @ (z**2 * mw))
                + th * (s * (M @ mw) + 2.0 * (M @ z) * (z @ mw))
            )
            qg = -((1 - th) * np.sum(z**4) + th * s**2)
        else:
            hw = -12.0 * self.scale * (M @ (z**2 * mw))
            qg = -4.0 * self.scale * np.sum(z**4)
        return tangent_project(q, hw - qg * w)

    def evaluate(self, q) -> TangentEval:
        q = self._check(q)
        return TangentEval(self._value_unchecked(q), self.grad(q), self.hess(q), q)

    def rescaled(self, factor: float) -> "ScaledObjective":
        return ScaledObjective(self, factor)


class ScaledObjective:
    """A positive multiple of another objective (same minimizers)."""

    def __init__(self, base, factor: float):
        if not factor > 0:
            raise ValueError("scale factor must be positive")
        self.base = base
        self.factor = float(factor)

    @property
    def dim(self) -> int:
        return self.base.dim

    def value(self, q):
        return self.factor * self.base.value(q)

    def value_delta(self, q, step):
        return self.factor * self.base.value_delta(q, step)

    def grad(self, q):
        return self.factor * self.base.grad(q)

    def hess(self, q):
        return self.factor * self.base.hess(q)

    def hess_vec(self, q, v):
        return self.factor * self.base.hess_vec(q, v)
