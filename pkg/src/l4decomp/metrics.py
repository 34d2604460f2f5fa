"""Recovery error metrics and signed-permutation alignment.

Two error measures are used throughout:

* the single-column error ``Err(q) = min_i (1 - |<q, a_i>|)``;
* the normalized Frobenius error ``min_P ||A_est - A_true P||_F / sqrt(r)``
  over signed permutations ``P``.

The Frobenius matching is solved exactly as a linear assignment problem: for
a fixed pair of columns the best sign is ``sign(<a_est_i, a_j>)``, so the
signed problem collapses to an unsigned assignment on the costs
``||a_est_i||^2 + ||a_j||^2 - 2 |<a_est_i, a_j>|``.

CSV schema of :meth:`RecoveryReport.csv_row` (see :data:`REPORT_FIELDS`)::

    frobenius_err   normalized Frobenius error after matching
    min_err         smallest per-column error
    max_err         largest per-column error
    success         1 if the success criterion held, else 0
    perm            matched permutation, ';'-separated column indices
    signs           matched signs, ';'-separated +1/-1
    per_column_err  per-column errors, ';'-separated
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import binomtest

from .model import DimensionError, MixingMatrix, SignedPermutation

DEFAULT_RHO_E = 0.01

REPORT_FIELDS = ("frobenius_err", "min_err", "max_err", "success", "perm", "signs", "per_column_err")


def _entries(a) -> np.ndarray:
    return np.asarray(a.entries if isinstance(a, MixingMatrix) else a, dtype=float)


def err_single(qbar: np.ndarray, Abar) -> float:
    """``min_i (1 - |<qbar, a_i>|)``, clipped to ``[0, 1]`` against rounding."""
    a = _entries(Abar)
    q = np.asarray(qbar, dtype=float)
    if a.shape[0] != q.shape[0]:
        raise DimensionError(f"q has length {q.shape[0]}, columns have length {a.shape[0]}")
    # one contiguous dot product per column, so the result does not depend on memory layout
    # and is exactly invariant to reordering or negating columns
    corr = [abs(float(np.dot(np.ascontiguousarray(a[:, j]), q))) for j in range(a.shape[1])]
    return float(np.clip(1.0 - max(corr), 0.0, 1.0))


def _unit_columns(a: np.ndarray) -> np.ndarray:
    nrm = np.linalg.norm(a, axis=0)
    return a / np.where(nrm > 0, nrm, 1.0)


def per_column_errors(A_est, A_true) -> np.ndarray:
    """Err of every estimated column against the full ground truth.

    Columns of both matrices are normalized first, so estimates of a general
    full-column-rank matrix are scored by direction only.
    """
    est = _unit_columns(_entries(A_est))
    true = _unit_columns(_entries(A_true))
    return np.clip(1.0 - np.max(np.abs(true.T @ est), axis=0), 0.0, 1.0)


def _frobenius(est: np.ndarray, true: np.ndarray, P: SignedPermutation) -> float:
    return float(np.linalg.norm(est - P.apply(true)) / np.sqrt(est.shape[1]))


def match_signed_permutation(A_est, A_true) -> Tuple[SignedPermutation, float]:
    """Signed permutation P minimizing ``||A_est - A_true P||_F / sqrt(r)``.

    Returns ``(P, error)`` where ``A_true P`` puts ``signs[j] * A_true[:, perm[j]]``
    in column ``j``.
    """
    est = _entries(A_est)
    true = _entries(A_true)
    if est.shape != true.shape:
        raise DimensionError(f"shape mismatch: {est.shape} vs {true.shape}")
    G = true.T @ est  # G[i, j] = <a_true_i, a_est_j>
    cost = (true * true).sum(0)[:, None] + (est * est).sum(0)[None, :] - 2.0 * np.abs(G)
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(est.shape[1], dtype=int)
    perm[cols] = rows
    signs = np.where(G[perm, np.arange(est.shape[1])] < 0, -1, 1)
    P = SignedPermutation(tuple(perm), tuple(signs))
    return P, _frobenius(est, true, P)


def brute_force_match(A_est, A_true) -> Tuple[SignedPermutation, float]:
    """Exhaustive search over all ``2^r r!`` signed permutations (test oracle, r <= 6).

    Every candidate is scored by its squared error, tabulated as
    ``C[i, j, s] = ||est_j - sign_s * true_i||^2``; the first minimizer in
    enumeration order (permutations, then sign patterns) wins.
    """
    est = _entries(A_est)
    true = _entries(A_true)
    if est.shape != true.shape:
        raise DimensionError(f"shape mismatch: {est.shape} vs {true.shape}")
    r = est.shape[1]
    # C[i, j, 0] = ||est_j - true_i||^2, C[i, j, 1] = ||est_j + true_i||^2
    C = np.stack(
        [((est[:, None, :] - true[:, :, None]) ** 2).sum(0), ((est[:, None, :] + true[:, :, None]) ** 2).sum(0)],
        axis=2,
    )
    perms = np.array(list(itertools.permutations(range(r))), dtype=int)
    sign_idx = np.array(list(itertools.product((0, 1), repeat=r)), dtype=int)
    cols = np.arange(r)
    # total[a, b] = sum_j C[perms[a, j], j, sign_idx[b, j]]
    total = C[perms[:, None, :], cols[None, None, :], sign_idx[None, :, :]].sum(axis=2)
    a, b = np.unravel_index(np.argmin(total), total.shape)
    P = SignedPermutation(tuple(int(x) for x in perms[a]), tuple(1 - 2 * int(x) for x in sign_idx[b]))
    return P, _frobenius(est, true, P)


@dataclass(frozen=True, eq=False)
class RecoveryReport:
    per_column_err: np.ndarray
    frobenius_err: float
    matching: SignedPermutation
    success: bool

    def __post_init__(self):
        e = np.asarray(self.per_column_err, dtype=float)
        if np.any((e < 0) | (e > 1)):
            raise ValueError("per-column errors must lie in [0, 1]")
        object.__setattr__(self, "per_column_err", e)

    def csv_row(self) -> list:
        e = self.per_column_err
        return [
            repr(float(self.frobenius_err)),
            repr(float(e.min())),
            repr(float(e.max())),
            int(self.success),
            ";".join(str(i) for i in self.matching.perm),
            ";".join(str(s) for s in self.matching.signs),
            ";".join(repr(float(v)) for v in e),
        ]

    def to_dict(self) -> dict:
        return {
            "per_column_err": [float(v) for v in self.per_column_err],
            "frobenius_err": float(self.frobenius_err),
            "perm": list(self.matching.perm),
            "signs": list(self.matching.signs),
            "success": bool(self.success),
        }


def recovery_report(A_est, A_true, rho_e: float = DEFAULT_RHO_E, full: bool = True) -> RecoveryReport:
    """Score an estimate; ``full`` requires every column within ``rho_e``, else any one."""
    errs = per_column_errors(A_est, A_true)
    P, fro = match_signed_permutation(A_est, A_true)
    ok = bool(np.all(errs <= rho_e)) if full else bool(np.min(errs) <= rho_e)
    return RecoveryReport(errs, fro, P, ok)


def success_rate(reports: Sequence[RecoveryReport], rho_e: float = DEFAULT_RHO_E, full: bool = False) -> float:
    """Fraction of runs whose smallest (``full=False``) or largest error is ``<= rho_e``."""
    reports = list(reports)
    if not reports:
        raise ValueError("success_rate needs at least one report")
    agg = np.max if full else np.min
    return float(np.mean([agg(rep.per_column_err) <= rho_e for rep in reports]))


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion; ``(0, 1)`` when there are no trials."""
    if trials <= 0:
        return (0.0, 1.0)
    ci = binomtest(int(successes), int(trials)).proportion_ci(confidence_level=confidence, method="wilson")
    return (float(ci.low), float(ci.high))


def mean_or_nan(values: Iterable[float]) -> float:
    vals = [v for v in values if np.isfinite(v)]
    return float(np.mean(vals)) if vals else float("nan")
