"""Numerical probes of the optimization landscape on the sphere.

For a semi-orthogonal ``A`` and ``zeta = A^T q`` the sphere is split by
``||zeta||_inf^2``:

* ``R0``: ``||zeta||_inf^2 <= c_star`` (nearly flat, far from every column),
* ``R1``: ``||zeta||_inf^2 >= C_star`` (close to some column),
* ``R2``: everything in between, where a direction of negative curvature is
  expected: the column ``a_i`` with the largest ``|zeta_i|``.

Critical points of the population objective satisfy a cubic equation in each
``zeta_i`` whose nonzero roots share the magnitude ``sqrt(alpha)`` with::

    alpha = ||zeta||_4^4 + theta/(1-theta) (||zeta||_2^4 - ||zeta||_2^2)

so a critical point with ``k`` equal-magnitude spikes has ``alpha = 1/k``;
``k = 1`` are the minimizers ``+-a_i``, ``k >= 2`` are strict saddles.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .model import MixingMatrix, random_unit_vector
from .objective import Objective
from .solver import SolverOptions, min_tangent_eigenpair, solve
from . import svg

# Constants of the curvature statements
POPULATION_THETA_MAX = 1.0 / 6.0
POPULATION_CSTAR_MAX = 1.0 / (3.0 * np.sqrt(2.0))
POPULATION_RATE = (11.0 - 5.0 * np.sqrt(2.0)) / 9.0
SAMPLE_THETA_MAX = 1.0 / 9.0
SAMPLE_CSTAR_MAX = 0.25
SAMPLE_RATE = 0.21
DEFAULT_C_STAR_UPPER = 0.25


class Region(str, enum.Enum):
    R0 = "R0"
    R1 = "R1"
    R2 = "R2"


class CriticalCase(str, enum.Enum):
    NEAR_ZERO = "near-zero"
    SINGLE_SPIKE = "single-spike"
    MULTI_SPIKE = "multi-spike"


@dataclass(frozen=True)
class RegionLabel:
    label: Region
    c_star: float
    C_star: float
    zeta_inf_sq: float

    def __post_init__(self):
        if not 0.0 <= self.c_star <= self.C_star < 1.0:
            raise ValueError(f"need 0 <= c_star <= C_star < 1, got {self.c_star}, {self.C_star}")


def _entries(A) -> np.ndarray:
    return np.asarray(A.entries if isinstance(A, MixingMatrix) else A, dtype=float)


def default_c_star(r: int) -> float:
    return 1.0 / (2.0 * r)


def region_of(zeta_inf_sq: float, c_star: float, C_star: float) -> Region:
    if zeta_inf_sq <= c_star:
        return Region.R0
    if zeta_inf_sq >= C_star:
        return Region.R1
    return Region.R2


def classify_region(A, q: np.ndarray, c_star: Optional[float] = None, C_star: float = DEFAULT_C_STAR_UPPER) -> RegionLabel:
    """Region of ``q``; ``c_star`` defaults to ``1/(2r)``."""
    a = _entries(A)
    c = default_c_star(a.shape[1]) if c_star is None else c_star
    z2 = float(np.max((a.T @ q) ** 2))
    return RegionLabel(region_of(z2, c, C_star), c, C_star, z2)


def alpha_value(zeta: np.ndarray, theta: float) -> float:
    """Common squared magnitude of the nonzero entries of zeta at a critical point."""
    s2 = float(np.sum(zeta**2))
    return float(np.sum(zeta**4) + theta / (1.0 - theta) * (s2 * s2 - s2))


def alpha_bounds(zeta: np.ndarray, theta: float, C_star: float) -> Tuple[float, float]:
    """Interval ``[||zeta||_4^4 (1 - theta/(4(1-theta)C_star^2)), ||zeta||_4^4]`` for alpha in R1."""
    z4 = float(np.sum(zeta**4))
    return z4 * (1.0 - theta / (4.0 * (1.0 - theta) * C_star**2)), z4


def theta_condition_check(theta: float) -> bool:
    """``sqrt(theta/(1-theta)) < 1 - 3 theta``; holds for every theta <= 1/6."""
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    return bool(np.sqrt(theta / (1.0 - theta)) < 1.0 - 3.0 * theta)


def negative_curvature_witness(A, q: np.ndarray, theta: float) -> Tuple[np.ndarray, float]:
    """``(a_i, a_i^T Hess f(q) a_i)`` for ``i = argmax |zeta_i|`` (population objective).

    When ``zeta = 0`` the first column is returned; its value is then 0.
    """
    a = _entries(A)
    z = a.T @ q
    v = a[:, int(np.argmax(np.abs(z)))]
    obj = Objective.population(a, theta)
    return v, float(v @ obj.hess_vec(q, v))


def sample_witness_values(
    A, Y: np.ndarray, theta: float, Q: np.ndarray, sigma: float = 1.0, chunk: int = 64
) -> Tuple[np.ndarray, np.ndarray]:
    """Witness curvature of the sample objective at many points at once.

    For every column ``q`` of ``Q`` returns ``v^T Hess F(q) v`` with
    ``v = a_{argmax |zeta|}`` and ``F = -(12 theta sigma^4 n)^-1 ||Y^T q||_4^4``,
    together with ``||zeta||_inf^2``.  Uses
    ``v^T Hess F v = -12c sum_k z_k^2 (y_k . Pv)^2 + 4c ||z||_4^4 ||Pv||^2``
    with ``z = Y^T q`` and ``P = I - q q^T``, evaluated in chunks of points.
    """
    a = _entries(A)
    Y = np.asarray(Y, dtype=float)
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    n = Y.shape[1]
    c = 1.0 / (12.0 * theta * sigma**4 * n)
    m = Q.shape[1]
    values = np.empty(m)
    zinf = np.empty(m)
    for s in range(0, m, chunk):
        Qc = Q[:, s : s + chunk]
        zeta = a.T @ Qc
        idx = np.argmax(np.abs(zeta), axis=0)
        zinf[s : s + chunk] = zeta[idx, np.arange(Qc.shape[1])] ** 2
        V = a[:, idx]
        PV = V - Qc * np.sum(Qc * V, axis=0)
        Z = Y.T @ Qc  # n x chunk
        W = Y.T @ PV
        values[s : s + chunk] = -12.0 * c * np.sum(Z**2 * W**2, axis=0) + 4.0 * c * np.sum(Z**4, axis=0) * np.sum(PV**2, axis=0)
    return values, zinf


def sample_sphere_band(
    A, lo: float, hi: float, count: int, rng: np.random.Generator, max_draws: int = 10_000_000, batch: int = 4096
) -> np.ndarray:
    """Rejection sampler: ``count`` uniform sphere points with ``lo < ||A^T q||_inf^2 < hi``.

    Returns a ``p x count`` array.  Raises ``RuntimeError`` if ``max_draws``
    proposals do not yield enough points.
    """
    a = _entries(A)
    p = a.shape[0]
    kept: List[np.ndarray] = []
    have = drawn = 0
    while have < count:
        if drawn >= max_draws:
            raise RuntimeError(f"rejection sampler accepted {have}/{count} points in {drawn} draws")
        G = rng.standard_normal((p, batch))
        G /= np.linalg.norm(G, axis=0)
        z2 = np.max((a.T @ G) ** 2, axis=0)
        ok = G[:, (z2 > lo) & (z2 < hi)]
        kept.append(ok)
        have += ok.shape[1]
        drawn += batch
    return np.concatenate(kept, axis=1)[:, :count]


@dataclass
class CriticalPointReport:
    q: np.ndarray
    alpha: float
    grad_norm: float
    case: CriticalCase
    spikes: int
    consistent: bool  # alpha matches the value predicted by the spike count
    curvature_witness: Optional[Tuple[np.ndarray, float]] = None

    def to_dict(self) -> dict:
        out = {
            "alpha": self.alpha,
            "grad_norm": self.grad_norm,
            "case": self.case.value,
            "spikes": self.spikes,
            "consistent": self.consistent,
        }
        if self.curvature_witness is not None:
            out["witness_value"] = self.curvature_witness[1]
        return out


class NotCriticalError(ValueError):
    """The point handed to the taxonomy is not (approximately) critical."""


def critical_point_taxonomy(A, q: np.ndarray, theta: float, tol: float = 1e-8) -> CriticalPointReport:
    """Classify an approximate critical point of the population objective.

    Entries with ``|zeta_i| >= sqrt(alpha)/2`` count as spikes.  A single
    spike should have ``alpha = 1``; ``k`` spikes ``alpha = 1/k`` (both within
    ``10 tol``).  For ``k >= 2`` the witness ``(s_i a_i - s_j a_j)/sqrt(2)``
    built from the two largest spikes is attached with its curvature.

    Raises
    ------
    NotCriticalError
        If the Riemannian gradient norm exceeds ``tol``.
    """
    a = _entries(A)
    obj = Objective.population(a, theta)
    g = float(np.linalg.norm(obj.grad(q)))
    if g > tol:
        raise NotCriticalError(f"gradient norm {g:.3e} exceeds tol {tol:.1e}")
    z = a.T @ q
    alpha = alpha_value(z, theta)
    if alpha <= 10 * tol:
        return CriticalPointReport(q, alpha, g, CriticalCase.NEAR_ZERO, 0, bool(np.max(np.abs(z)) <= np.sqrt(10 * tol)))
    spikes = np.flatnonzero(np.abs(z) >= np.sqrt(alpha) / 2.0)
    k = int(spikes.size)
    consistent = abs(alpha - 1.0 / k) <= 10 * tol
    if k == 1:
        return CriticalPointReport(q, alpha, g, CriticalCase.SINGLE_SPIKE, 1, consistent)
    top = spikes[np.argsort(-np.abs(z[spikes]))[:2]]
    i, j = int(top[0]), int(top[1])
    v = (np.sign(z[i]) * a[:, i] - np.sign(z[j]) * a[:, j]) / np.sqrt(2.0)
    value = float(v @ obj.hess_vec(q, v))
    return CriticalPointReport(q, alpha, g, CriticalCase.MULTI_SPIKE, k, consistent, (v, value))


def spike_point(A, indices, signs=None) -> np.ndarray:
    """Balanced combination ``sum_j s_j a_j / sqrt(k)`` over the given columns."""
    a = _entries(A)
    idx = list(indices)
    s = np.ones(len(idx)) if signs is None else np.asarray(signs, dtype=float)
    q = a[:, idx] @ s
    return q / np.linalg.norm(q)


def outside_theory(theta: float, C_star: float) -> List[str]:
    """Reasons why ``(theta, C_star)`` falls outside the regimes the curvature statements cover."""
    reasons = []
    if theta > POPULATION_THETA_MAX:
        reasons.append(f"theta={theta:g} exceeds {POPULATION_THETA_MAX:.4g}")
    if not (0.0 < theta < 1.0 and theta_condition_check(theta)):
        reasons.append("sqrt(theta/(1-theta)) < 1 - 3 theta fails")
    if C_star > DEFAULT_C_STAR_UPPER:
        reasons.append(f"C_star={C_star:g} exceeds {DEFAULT_C_STAR_UPPER:g}")
    return reasons


@dataclass
class LandscapeConfig:
    theta: float = 0.1
    samples: int = 1000
    c_star: Optional[float] = None
    C_star: float = DEFAULT_C_STAR_UPPER
    solver_starts: int = 20
    seed: int = 0


@dataclass
class LandscapeReport:
    config: LandscapeConfig
    p: int
    r: int
    region_counts: Dict[str, int]
    zeta_inf_sq: np.ndarray
    min_curvature: np.ndarray
    witness: np.ndarray
    taxonomy: List[CriticalPointReport]
    outside_theory: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        qs = [0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0]
        by_region = {}
        labels = np.array([region_of(z, self._c, self.config.C_star).value for z in self.zeta_inf_sq])
        for reg in Region:
            sel = labels == reg.value
            if sel.any():
                by_region[reg.value] = {
                    "min_curvature": [float(np.quantile(self.min_curvature[sel], t)) for t in qs],
                    "witness": [float(np.quantile(self.witness[sel], t)) for t in qs],
                    "negative_witness_fraction": float(np.mean(self.witness[sel] < 0)),
                }
        hist: Dict[str, int] = {}
        for rep in self.taxonomy:
            key = rep.case.value if rep.case is not CriticalCase.MULTI_SPIKE else f"multi-spike-{rep.spikes}"
            hist[key] = hist.get(key, 0) + 1
        return {
            "p": self.p,
            "r": self.r,
            "theta": self.config.theta,
            "c_star": self._c,
            "C_star": self.config.C_star,
            "samples": self.config.samples,
            "seed": self.config.seed,
            "outside_theory": bool(self.outside_theory),
            "outside_theory_reasons": list(self.outside_theory),
            "region_counts": dict(self.region_counts),
            "quantile_levels": qs,
            "curvature_by_region": by_region,
            "taxonomy_histogram": dict(sorted(hist.items())),
            "taxonomy": [rep.to_dict() for rep in self.taxonomy],
        }

    @property
    def _c(self) -> float:
        return default_c_star(self.r) if self.config.c_star is None else self.config.c_star

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_svg(self) -> str:
        return svg.scatter(
            self.zeta_inf_sq,
            self.min_curvature,
            f"landscape, theta={self.config.theta:g}",
            "||A^T q||_inf^2",
            "min tangent curvature",
        )


def landscape_report(A, cfg: LandscapeConfig) -> LandscapeReport:
    """Sample the sphere uniformly and summarize regions, curvature and critical points.

    The critical points are the endpoints of solver runs from
    ``cfg.solver_starts`` random starts plus the balanced spike combinations
    of the first ``k`` columns, ``k = 1..min(r, 4)``.
    """
    if cfg.samples < 1:
        raise ValueError("sample budget must be positive")
    a = _entries(A)
    p, r = a.shape
    rng = np.random.default_rng(cfg.seed)
    c = default_c_star(r) if cfg.c_star is None else cfg.c_star
    obj = Objective.population(a, cfg.theta)
    G = rng.standard_normal((p, cfg.samples))
    G /= np.linalg.norm(G, axis=0)
    zinf = np.empty(cfg.samples)
    mincurv = np.empty(cfg.samples)
    wit = np.empty(cfg.samples)
    counts = {reg.value: 0 for reg in Region}
    for k in range(cfg.samples):
        q = G[:, k]
        zinf[k] = float(np.max((a.T @ q) ** 2))
        counts[region_of(zinf[k], c, cfg.C_star).value] += 1
        mincurv[k] = min_tangent_eigenpair(obj.hess(q), q)[0]
        wit[k] = negative_curvature_witness(a, q, cfg.theta)[1]

    taxonomy: List[CriticalPointReport] = []
    opts = SolverOptions(tol_grad=1e-10)
    for _ in range(cfg.solver_starts):
        tr = solve(obj, random_unit_vector(p, rng), opts)
        try:
            taxonomy.append(critical_point_taxonomy(a, tr.final_q, cfg.theta, tol=1e-8))
        except NotCriticalError:
            pass
    for k in range(1, min(r, 4) + 1):
        taxonomy.append(critical_point_taxonomy(a, spike_point(a, range(k)), cfg.theta, tol=1e-8))
    return LandscapeReport(cfg, p, r, counts, zinf, mincurv, wit, taxonomy, outside_theory(cfg.theta, cfg.C_star))
