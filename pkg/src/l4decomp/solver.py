"""Monotone second-order descent on the unit sphere.

Each iteration takes an Armijo-backtracked Riemannian gradient step (the
trial step starts at the Cauchy step of the local quadratic model, capped at
``init_step``); once the gradient is below tolerance, the smallest tangent
eigenpair of the Hessian is computed and, if the curvature is sufficiently
negative, the iterate moves along that direction.  Iterates are retracted by
normalization.

Internally the objective is divided by ``|f(q0)|`` so step sizes and
tolerances do not depend on the objective's overall scale; the trace reports
raw objective values and gradient norms / curvatures in the normalized units.
"""
from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional, Tuple, Union

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .model import check_unit
from .objective import tangent_project

MAX_HALVINGS = 60
DENSE_EIG_MAX_DIM = 64


@dataclass(frozen=True)
class SolverOptions:
    tol_grad: float = 1e-8
    tol_curv: float = 1e-6
    max_iters: int = 10_000
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    init_step: float = 1.0
    deterministic: bool = False

    def __post_init__(self):
        if not (self.tol_grad > 0 and self.tol_curv > 0 and self.init_step > 0):
            raise ValueError("tolerances and init_step must be positive")
        if not 0 < self.armijo_c < 1:
            raise ValueError("armijo_c must lie in (0, 1)")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")


class Status(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max-iters"


class IterRecord(NamedTuple):
    iter: int
    value: float
    grad_norm: float
    min_curvature: float  # nan when not evaluated at this iterate
    step_kind: str  # "gradient", "curvature" or "none"


TRACE_FIELDS = ("iter", "value", "grad_norm", "min_curv", "step_kind")


@dataclass
class SolveTrace:
    iterates: List[IterRecord]
    status: Status
    final_q: np.ndarray
    scale: float = 1.0
    diagnostics: List[str] = field(default_factory=list)

    @property
    def n_iters(self) -> int:
        return len(self.iterates) - 1

    @property
    def values(self) -> np.ndarray:
        return np.array([rec.value for rec in self.iterates])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_FIELDS)
        for rec in self.iterates:
            w.writerow([rec.iter, repr(rec.value), repr(rec.grad_norm), repr(rec.min_curvature), rec.step_kind])
        return buf.getvalue()


def init_q0(Ybar: np.ndarray, seed: int = 0) -> Tuple[np.ndarray, bool]:
    """Data-driven start ``Ybar 1 / ||Ybar 1||``.

    Returns ``(q0, used_fallback)``.  When the row sums vanish (relative to
    ``||Ybar||_F``) a seeded random unit vector in the column space of
    ``Ybar`` is returned instead.
    """
    Ybar = np.asarray(Ybar, dtype=float)
    s = Ybar.sum(axis=1)
    nrm = np.linalg.norm(s)
    if nrm > 1e-14 * np.linalg.norm(Ybar):
        return s / nrm, False
    rng = np.random.default_rng(seed)
    v = Ybar @ rng.standard_normal(Ybar.shape[1])
    nv = np.linalg.norm(v)
    if nv == 0.0:
        v = rng.standard_normal(Ybar.shape[0])
        nv = np.linalg.norm(v)
    return v / nv, True


def tangent_basis(q: np.ndarray) -> np.ndarray:
    """Orthonormal ``p x (p-1)`` basis of the complement of q."""
    return scipy.linalg.null_space(q[None, :])


HessLike = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]


def min_tangent_eigenpair(hess: HessLike, q: np.ndarray) -> Tuple[float, np.ndarray]:
    """Smallest eigenpair of a Hessian restricted to the tangent space at q.

    ``hess`` is a dense symmetric matrix or a callable ``v -> H v``.  Small
    problems, and dense inputs, use a dense eigensolver; larger matrix-free
    problems use Lanczos (ARPACK) and fall back to the dense route on
    non-convergence.
    """
    q = np.asarray(q, dtype=float)
    p = q.shape[0]
    if p == 1:
        return 0.0, np.zeros(1)
    B = tangent_basis(q)
    matvec = hess if callable(hess) else (lambda v, H=np.asarray(hess): H @ v)

    def dense() -> Tuple[float, np.ndarray]:
        if callable(hess):
            HB = np.column_stack([matvec(B[:, j]) for j in range(p - 1)])
        else:
            HB = np.asarray(hess) @ B
        small = B.T @ HB
        small = 0.5 * (small + small.T)
        lam, w = np.linalg.eigh(small)
        return float(lam[0]), B @ w[:, 0]

    if not callable(hess) or p - 1 <= DENSE_EIG_MAX_DIM:
        lam, v = dense()
    else:
        op = LinearOperator((p - 1, p - 1), matvec=lambda w: B.T @ matvec(B @ w), dtype=float)
        try:
            lams, ws = eigsh(op, k=1, which="SA", tol=1e-12, maxiter=50 * p, v0=np.ones(p - 1))
            lam, v = float(lams[0]), B @ ws[:, 0]
        except ArpackNoConvergence:
            lam, v = dense()
    v = tangent_project(q, v)
    return lam, v / np.linalg.norm(v)


def _step_along(q: np.ndarray, d: np.ndarray, alpha: float) -> np.ndarray:
    """Difference ``R(q + alpha d) - q`` for tangent d, computed without cancellation."""
    # re-project: d inherits rounding error from the large normal part of the Euclidean gradient
    t = alpha * (d - q * (q @ d))
    tt = t @ t
    nu = np.sqrt(1.0 + tt)
    return (t - (tt / (1.0 + nu)) * q) / nu


def solve(objective, q0: np.ndarray, opts: Optional[SolverOptions] = None) -> SolveTrace:
    """Minimize ``objective`` over the unit sphere starting from ``q0``.

    ``objective`` must provide ``value``, ``value_delta``, ``grad`` and
    ``hess_vec`` (every :class:`~l4decomp.objective.Objective` does) and may
    provide ``hess`` for a dense Hessian.

    Every accepted step strictly decreases the objective; the recorded value
    column is accumulated from exactly computed decrements and is therefore
    non-increasing.
    """
    opts = opts or SolverOptions()
    q = check_unit(q0).copy()
    f0 = objective.value(q)
    scale = 1.0 / abs(f0) if f0 != 0.0 else 1.0
    value = f0
    diagnostics: List[str] = []
    records: List[IterRecord] = []
    status = Status.MAX_ITERS
    p = q.shape[0]

    def curvature(qq):
        if hasattr(objective, "hess") and p - 1 <= DENSE_EIG_MAX_DIM:
            H = scale * objective.hess(qq)
        else:
            H = lambda v: scale * objective.hess_vec(qq, v)  # noqa: E731
        return min_tangent_eigenpair(H, qq)

    for k in range(opts.max_iters + 1):
        g = scale * objective.grad(q)
        gnorm = float(np.linalg.norm(g))
        if gnorm > opts.tol_grad:
            if k == opts.max_iters:
                records.append(IterRecord(k, value, gnorm, np.nan, "none"))
                break
            d = -g
            # start from the Cauchy step of the local quadratic model, capped at init_step
            ghg = scale * float(g @ objective.hess_vec(q, g))
            alpha = min(opts.init_step, gnorm**2 / ghg) if ghg > 0 else opts.init_step
            accepted = False
            for _ in range(MAX_HALVINGS):
                step = _step_along(q, d, alpha)
                df = scale * objective.value_delta(q, step)
                if df <= -opts.armijo_c * alpha * gnorm**2 and df < 0:
                    accepted = True
                    break
                alpha *= opts.backtrack_factor
            records.append(IterRecord(k, value, gnorm, np.nan, "gradient" if accepted else "none"))
            if not accepted:
                diagnostics.append(f"iteration {k}: gradient line search failed after {MAX_HALVINGS} halvings")
                break
            value = value + df / scale
            q = q + step
            q /= np.linalg.norm(q)
            continue

        lam, v = curvature(q)
        if lam >= -opts.tol_curv:
            records.append(IterRecord(k, value, gnorm, lam, "none"))
            status = Status.CONVERGED
            break
        if k == opts.max_iters:
            records.append(IterRecord(k, value, gnorm, lam, "none"))
            break
        # pick the sign of the escape direction by comparing both trial points
        alpha = opts.init_step
        trial = [scale * objective.value_delta(q, _step_along(q, s * v, alpha)) for s in (1.0, -1.0)]
        sgn = 1.0 if trial[0] <= trial[1] else -1.0
        accepted = False
        for _ in range(MAX_HALVINGS):
            step = _step_along(q, sgn * v, alpha)
            df = scale * objective.value_delta(q, step)
            if df <= 0.5 * opts.armijo_c * alpha**2 * lam and df < 0:
                accepted = True
                break
            alpha *= opts.backtrack_factor
        records.append(IterRecord(k, value, gnorm, lam, "curvature" if accepted else "none"))
        if not accepted:
            diagnostics.append(f"iteration {k}: curvature line search failed after {MAX_HALVINGS} halvings")
            break
        value = value + df / scale
        q = q + step
        q /= np.linalg.norm(q)

    if status is Status.MAX_ITERS and not diagnostics:
        diagnostics.append(f"stopped after max_iters={opts.max_iters}")
    return SolveTrace(records, status, q, scale, diagnostics)


def certify(objective, q: np.ndarray, scale: float, opts: Optional[SolverOptions] = None) -> Tuple[bool, float, float]:
    """Re-check first and second order conditions at ``q`` in normalized units.

    Returns ``(ok, grad_norm, min_curvature)``.
    """
    opts = opts or SolverOptions()
    g = scale * objective.grad(q)
    lam, _ = min_tangent_eigenpair(lambda v: scale * objective.hess_vec(q, v), q)
    gn = float(np.linalg.norm(g))
    return gn <= opts.tol_grad and lam >= -opts.tol_curv, gn, lam
