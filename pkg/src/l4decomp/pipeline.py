"""Column-by-column recovery of ``A`` from ``Y = A X`` by deflation.

Steps: whiten ``Y`` to ``Ybar``; for each of the ``r`` columns, minimize the
l4 objective on the data with the already recovered directions projected out,
``P_perp Ybar``; collect the minimizers; map them back through the inverse of
the whitening and rescale to unit operator norm.
"""
from __future__ import annotations

import enum
import json
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .metrics import RecoveryReport
from .model import MixingMatrix
from .objective import Objective
from .precond import PreconditionedData, precondition, invert_precondition
from .solver import SolveTrace, SolverOptions, Status, init_q0, solve

ORTHO_TOL = 1e-6


class InitMode(str, enum.Enum):
    PER_STEP = "per-step"  # init_q0 on the deflated data at every step
    ONCE = "once"  # a single init_q0 on Ybar, reused for every step


@dataclass
class DeflationState:
    """Recovered directions and an orthonormal basis of their span."""

    p: int
    recovered: List[np.ndarray] = field(default_factory=list)
    basis: np.ndarray = None

    def __post_init__(self):
        if self.basis is None:
            self.basis = np.zeros((self.p, 0))

    @property
    def k(self) -> int:
        return self.basis.shape[1]

    def project_out(self, m: np.ndarray) -> np.ndarray:
        """Apply ``I - Q Q^T`` to a vector or matrix."""
        Q = self.basis
        if Q.shape[1] == 0:
            return np.array(m, dtype=float, copy=True)
        return m - Q @ (Q.T @ m)

    def overlap(self, q: np.ndarray) -> float:
        """Largest ``|<q, b>|`` over the current basis vectors."""
        return float(np.max(np.abs(self.basis.T @ q))) if self.k else 0.0

    def add(self, q: np.ndarray) -> None:
        """Append ``q`` and extend the basis by modified Gram-Schmidt (two passes)."""
        q = np.asarray(q, dtype=float)
        w = q.copy()
        for _ in range(2):
            for j in range(self.k):
                b = self.basis[:, j]
                w -= (b @ w) * b
        nw = np.linalg.norm(w)
        if nw == 0.0:
            raise ValueError("new direction lies in the span of the recovered ones")
        self.recovered.append(q)
        self.basis = np.column_stack([self.basis, w / nw])


def deflation_objective(Ybar: np.ndarray, state: DeflationState) -> np.ndarray:
    """Data matrix ``P_perp Ybar`` of the deflated objective."""
    return state.project_out(np.asarray(Ybar, dtype=float))


@dataclass
class ColumnDiagnostic:
    index: int
    status: str
    n_iters: int
    grad_norm: float
    overlap: float
    retried: bool
    used_fallback_init: bool
    messages: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "status": self.status,
            "iterations": self.n_iters,
            "grad_norm": self.grad_norm,
            "overlap": self.overlap,
            "retried": self.retried,
            "fallback_init": self.used_fallback_init,
            "messages": list(self.messages),
        }


@dataclass
class RecoveryResult:
    A_est: MixingMatrix
    traces: List[SolveTrace]
    Abar_est: np.ndarray
    preconditioned: PreconditionedData
    columns: List[ColumnDiagnostic]
    wall_time: float

    def __iter__(self):
        # allows ``A_est, traces = recover_all(...)``
        return iter((self.A_est, self.traces))

    @property
    def total_iters(self) -> int:
        return sum(t.n_iters for t in self.traces)

    @property
    def all_converged(self) -> bool:
        return all(c.status == Status.CONVERGED.value for c in self.columns)


def _objective_for(data: np.ndarray, theta: Optional[float]):
    if theta is None:
        return Objective.raw_l4(data)
    return Objective.sample_general(data, theta)


def recover_all(
    Y: np.ndarray,
    r: int,
    opts: Optional[SolverOptions] = None,
    theta: Optional[float] = None,
    init: InitMode = InitMode.PER_STEP,
    seed: int = 0,
) -> RecoveryResult:
    """Recover all ``r`` columns of the mixing matrix from ``Y``.

    Parameters
    ----------
    Y : (p, n) array
    r : int
        Number of columns to recover; ``Y`` must have numerical rank >= r.
    opts : SolverOptions, optional
    theta : float, optional
        Sparsity level.  Only rescales the objective (and hence reported
        values); when omitted the scale-free ``-||M^T q||_4^4`` is used.
    init : InitMode
        ``PER_STEP`` re-initializes from the deflated data at every column,
        ``ONCE`` reuses the initial point computed from ``Ybar``.
    seed : int
        Seeds the fallback and retry initializations.

    Returns
    -------
    RecoveryResult
        Unpacks as ``(A_est, traces)``; also carries the whitened estimate and
        per-column diagnostics.

    Raises
    ------
    IllConditionedError
        If ``Y`` does not have numerical rank ``r``.
    """
    t0 = time.perf_counter()
    opts = opts or SolverOptions()
    init = InitMode(init)
    pd = precondition(Y, r)
    Ybar = pd.Ybar
    p = Ybar.shape[0]
    rng = np.random.default_rng(seed)
    state = DeflationState(p)
    traces: List[SolveTrace] = []
    columns: List[ColumnDiagnostic] = []
    q_once, fb_once = init_q0(Ybar, seed) if init is InitMode.ONCE else (None, False)

    for j in range(r):
        data = deflation_objective(Ybar, state)
        obj = _objective_for(data, theta)
        if init is InitMode.ONCE:
            q0, fallback = q_once, fb_once
        else:
            q0, fallback = init_q0(data, seed + j)
        trace = solve(obj, q0, opts)
        msgs = list(trace.diagnostics)
        retried = False
        if trace.status is not Status.CONVERGED or state.overlap(trace.final_q) > ORTHO_TOL:
            msgs.append("retrying from a random start in the deflated subspace")
            v = data @ rng.standard_normal(data.shape[1])
            if np.linalg.norm(v) == 0.0:
                v = state.project_out(rng.standard_normal(p))
            retry = solve(obj, v / np.linalg.norm(v), opts)
            retried = True
            if retry.status is Status.CONVERGED or trace.status is not Status.CONVERGED:
                trace = retry
                msgs.extend(retry.diagnostics)
        q = trace.final_q
        ov = state.overlap(q)
        if ov > ORTHO_TOL:
            msgs.append(f"recovered direction overlaps earlier ones by {ov:.2e}")
        traces.append(trace)
        g = trace.iterates[-1].grad_norm if trace.iterates else float("nan")
        columns.append(ColumnDiagnostic(j, trace.status.value, trace.n_iters, g, ov, retried, fallback, msgs))
        # keep the component outside the recovered span; re-normalize for the output
        q_perp = state.project_out(q)
        state.add(q_perp / np.linalg.norm(q_perp))

    Abar_est = np.column_stack(state.recovered)
    A_est = invert_precondition(Abar_est, pd.precond)
    return RecoveryResult(A_est, traces, Abar_est, pd, columns, time.perf_counter() - t0)


def run_report(
    result: RecoveryResult,
    params: dict,
    truth: Optional[RecoveryReport] = None,
) -> dict:
    """JSON-serializable summary of a recovery run."""
    out = {
        "params": dict(params),
        "columns": [c.to_dict() for c in result.columns],
        "iterations": result.total_iters,
        "all_converged": result.all_converged,
        "wall_time": result.wall_time,
    }
    if truth is not None:
        out["recovery"] = truth.to_dict()
    return out


def dumps_report(report: dict, deterministic: bool = False) -> str:
    """Serialize a report; ``deterministic`` drops wall-clock fields."""
    if deterministic:
        report = {k: v for k, v in report.items() if k != "wall_time"}
    return json.dumps(report, indent=2, sort_keys=True, default=float) + "\n"
