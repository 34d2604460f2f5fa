"""Whitening of ``Y`` so the effective mixing matrix becomes semi-orthogonal.

``D = ((Y Y^T)^+)^{1/2}`` restricted to the leading rank-``r`` subspace.  With
the thin SVD ``Y = U S V^T`` this is ``D = U S^{-1} U^T`` and ``D Y = U V^T``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .model import MatrixKind, MixingMatrix

COLSPACE_TOL = 1e-6


class IllConditionedError(ValueError):
    """The data does not have numerical rank ``r``."""


@dataclass(frozen=True, eq=False)
class Preconditioner:
    """Rank-``r`` whitening operator, stored in factored form."""

    basis: np.ndarray  # U, p x r orthonormal
    scales: np.ndarray  # leading r singular values of Y
    singular_values: np.ndarray  # full spectrum of Y, for diagnostics

    @property
    def rank_used(self) -> int:
        return self.basis.shape[1]

    @property
    def D(self) -> np.ndarray:
        return (self.basis / self.scales) @ self.basis.T

    @property
    def D_pinv(self) -> np.ndarray:
        """Pseudo-inverse of D on its range, ``U S U^T``."""
        return (self.basis * self.scales) @ self.basis.T

    def apply(self, m: np.ndarray) -> np.ndarray:
        return self.basis @ ((self.basis.T @ m) / self.scales[:, None])


@dataclass(frozen=True, eq=False)
class PreconditionedData:
    Ybar: np.ndarray
    precond: Preconditioner


def rank_tolerance(s1: float, shape) -> float:
    return 1e-10 * s1 * max(shape)


def precondition(Y: np.ndarray, r: int) -> PreconditionedData:
    """Whiten ``Y`` at rank ``r``.

    Raises
    ------
    IllConditionedError
        If the r-th singular value is at or below ``1e-10 * s_1 * max(p, n)``.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2:
        raise ValueError("Y must be a matrix")
    if not 1 <= r <= min(Y.shape):
        raise ValueError(f"rank r={r} incompatible with Y of shape {Y.shape}")
    u, s, vt = np.linalg.svd(Y, full_matrices=False)
    tol = rank_tolerance(s[0], Y.shape) if s[0] > 0 else np.inf
    if not s[r - 1] > tol:
        raise IllConditionedError(
            f"singular value s_{r} = {s[r - 1]:.3e} is below the rank tolerance {tol:.3e}"
        )
    U = u[:, :r]
    ybar = U @ vt[:r]
    return PreconditionedData(ybar, Preconditioner(U, s[:r].copy(), s))


def invert_precondition(Abar_est: np.ndarray, precond: Preconditioner) -> MixingMatrix:
    """Map estimated whitened columns back: ``D^+ Abar / ||D^+ Abar||_op``.

    Columns lying outside the range of D by more than ``1e-6`` trigger a
    ``RuntimeWarning``; the projection onto the range is used either way.
    """
    a = np.asarray(Abar_est, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if not np.any(a):
        raise ValueError("estimated mixing matrix is zero")
    U = precond.basis
    coef = U.T @ a
    resid = np.linalg.norm(a - U @ coef, axis=0)
    if np.any(resid > COLSPACE_TOL):
        warnings.warn(
            f"estimated columns leave the data range by up to {resid.max():.2e}; projecting",
            RuntimeWarning,
            stacklevel=2,
        )
    return MixingMatrix.normalized(U @ (coef * precond.scales[:, None]), MatrixKind.FULL_COLUMN_RANK)


def prop1_delta_bound(theta: float, r: int, n: int) -> float:
    """Reference rate ``(1/theta) sqrt(r/n)`` for the whitening perturbation."""
    return np.sqrt(r / n) / theta


def empirical_delta(A: MixingMatrix, X: np.ndarray, Ybar: np.ndarray, theta: float, sigma: float = 1.0) -> np.ndarray:
    """Least-squares fit of the perturbation in ``Ybar = Abar (I + Delta) Xbar``.

    Only meant for diagnostics and tests; recovery never forms Delta.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[1]
    xbar = X / np.sqrt(theta * n * sigma**2)
    abar = A.orthogonalized()
    lhs = abar.T @ Ybar @ xbar.T
    fit = np.linalg.solve((xbar @ xbar.T).T, lhs.T).T
    return fit - np.eye(A.r)


def largest_gap_rank(Y: np.ndarray) -> int:
    """Index after the largest relative gap in Y's spectrum (diagnostic only)."""
    s = np.linalg.svd(np.asarray(Y, dtype=float), compute_uv=False)
    s = s[s > 0]
    if s.size < 2:
        return int(s.size)
    ratios = s[:-1] / s[1:]
    return int(np.argmax(ratios)) + 1
