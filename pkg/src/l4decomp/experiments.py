"""Seeded recovery experiments: single trials, grid cells and whole sweeps.

Per-trial seeds are ``base_seed + cell_index * trials + trial``; from a trial
seed the mixing matrix and the coefficients get independent streams through
:class:`numpy.random.SeedSequence`.  Results are sorted by ``(cell, trial)``
before aggregation, so output never depends on the number of workers.

CSV schemas
-----------
``cells.csv`` (one row per grid cell, :data:`CELL_FIELDS`)::

    mode                single | full | compare
    p, r, theta, n      cell parameters
    trials              number of trials
    successes           trials meeting the success criterion
    success_rate        successes / trials
    wilson_lo/hi        95% Wilson score interval of the success rate
                        (an extension; not part of the reference protocol)
    mean_frobenius_err  mean normalized Frobenius error (full/compare; nan in single)
    mean_err            mean of the per-trial error (Err in single mode,
                        largest per-column Err otherwise)
    mean_iters          mean solver iterations per trial
    failures            trials that raised a numerical error or did not converge
    adm_mean_frobenius_err, l4_win_rate
                        compare mode only (nan otherwise): ADM baseline error
                        and the fraction of trials where l4 beats ADM

``trials.csv`` (one row per trial, :data:`TRIAL_FIELDS`) with the same
parameters, the trial index and seed, the errors, iteration counts and a
status string.
"""
from __future__ import annotations

import csv
import enum
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import baseline_adm, metrics, svg
from .model import MatrixKind, ProblemDims, SparsityModel, generate_A, generate_X, synthesize
from .objective import Objective
from .pipeline import recover_all
from .precond import IllConditionedError, precondition
from .solver import SolverOptions, Status, init_q0, solve

PAPER_TRIALS = 200
DESK_TRIALS = 20
PAPER_THETAS = tuple(round(0.01 + 0.03 * k, 2) for k in range(20))  # 0.01, 0.04, ..., 0.58
PAPER_RS = (10, 30, 50, 70)


class Mode(str, enum.Enum):
    SINGLE = "single"
    FULL = "full"
    COMPARE = "compare"


def trial_seeds(seed: int) -> Tuple[int, int]:
    """Independent seeds for ``A`` and ``X`` derived from one trial seed."""
    a, x = np.random.SeedSequence(seed).generate_state(2)
    return int(a), int(x)


def make_instance(p: int, r: int, n: int, theta: float, seed: int, kind=MatrixKind.FULL_COLUMN_RANK, sigma: float = 1.0):
    dims = ProblemDims(p, r, n)
    sa, sx = trial_seeds(seed)
    A = generate_A(dims, kind, sa)
    X = generate_X(dims, SparsityModel(theta, sigma), sx)
    return A, X, synthesize(A, X)


@dataclass(frozen=True)
class ExperimentGrid:
    p: int
    r_values: Tuple[int, ...]
    theta_values: Tuple[float, ...]
    n_values: Tuple[int, ...]
    trials: int = DESK_TRIALS
    base_seed: int = 0
    mode: Mode = Mode.SINGLE
    kind: MatrixKind = MatrixKind.FULL_COLUMN_RANK
    rho_e: float = metrics.DEFAULT_RHO_E

    def __post_init__(self):
        for name in ("r_values", "theta_values", "n_values"):
            vals = tuple(getattr(self, name))
            if not vals:
                raise ValueError(f"{name} must be nonempty")
            object.__setattr__(self, name, vals)
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "kind", MatrixKind(self.kind))
        for r in self.r_values:
            for n in self.n_values:
                ProblemDims(self.p, r, n)  # raises DimensionError
        for t in self.theta_values:
            SparsityModel(t)

    def cells(self) -> List[Tuple[int, float, int]]:
        """Cells ``(r, theta, n)`` in row-major order of r, theta, n."""
        return [(r, t, n) for r in self.r_values for t in self.theta_values for n in self.n_values]


@dataclass(frozen=True)
class TrialResult:
    cell: int
    trial: int
    seed: int
    p: int
    r: int
    theta: float
    n: int
    err: float  # Err (single) or largest per-column Err (full/compare)
    frobenius_err: float
    iters: int
    success: bool
    status: str
    adm_frobenius_err: float = float("nan")


TRIAL_FIELDS = tuple(TrialResult.__dataclass_fields__)


def run_trial(grid: ExperimentGrid, cell: int, trial: int, opts: Optional[SolverOptions] = None) -> TrialResult:
    r, theta, n = grid.cells()[cell]
    seed = grid.base_seed + cell * grid.trials + trial
    opts = opts or SolverOptions()
    A, _, Y = make_instance(grid.p, r, n, theta, seed, grid.kind)
    nan = float("nan")
    try:
        if grid.mode is Mode.SINGLE:
            pd = precondition(Y, r)
            q0, _ = init_q0(pd.Ybar, seed)
            tr = solve(Objective.sample_general(pd.Ybar, theta), q0, opts)
            err = metrics.err_single(tr.final_q, A.orthogonalized())
            ok = err <= grid.rho_e
            return TrialResult(cell, trial, seed, grid.p, r, theta, n, err, nan, tr.n_iters, ok, tr.status.value)
        res = recover_all(Y, r, opts, theta=theta, seed=seed)
        rep = metrics.recovery_report(res.A_est, A, grid.rho_e, full=True)
        status = Status.CONVERGED.value if res.all_converged else Status.MAX_ITERS.value
        adm = nan
        if grid.mode is Mode.COMPARE:
            A_adm, _ = baseline_adm.adm_recover_all(Y, r)
            adm = metrics.match_signed_permutation(A_adm, A)[1]
        return TrialResult(
            cell, trial, seed, grid.p, r, theta, n, float(rep.per_column_err.max()), rep.frobenius_err,
            res.total_iters, rep.success, status, adm,
        )
    except (IllConditionedError, np.linalg.LinAlgError) as exc:
        return TrialResult(cell, trial, seed, grid.p, r, theta, n, nan, nan, 0, False, f"error: {exc}")


@dataclass(frozen=True)
class CellResult:
    mode: str
    p: int
    r: int
    theta: float
    n: int
    trials: int
    successes: int
    success_rate: float
    wilson_lo: float
    wilson_hi: float
    mean_frobenius_err: float
    mean_err: float
    mean_iters: float
    failures: int
    adm_mean_frobenius_err: float
    l4_win_rate: float
    wall_time: float = field(default=0.0, compare=False)


CELL_FIELDS = tuple(f for f in CellResult.__dataclass_fields__ if f != "wall_time")


def aggregate(grid: ExperimentGrid, results: Sequence[TrialResult], wall_times: Optional[dict] = None) -> List[CellResult]:
    out = []
    wall_times = wall_times or {}
    by_cell = {}
    for res in sorted(results, key=lambda t: (t.cell, t.trial)):
        by_cell.setdefault(res.cell, []).append(res)
    for c, (r, theta, n) in enumerate(grid.cells()):
        rows = by_cell.get(c, [])
        k = sum(t.success for t in rows)
        m = len(rows)
        lo, hi = metrics.wilson_interval(k, m)
        fails = sum(t.status != Status.CONVERGED.value for t in rows)
        nan = float("nan")
        adm = metrics.mean_or_nan(t.adm_frobenius_err for t in rows) if grid.mode is Mode.COMPARE else nan
        wins = (
            float(np.mean([t.frobenius_err < t.adm_frobenius_err for t in rows]))
            if grid.mode is Mode.COMPARE and rows
            else nan
        )
        out.append(
            CellResult(
                grid.mode.value, grid.p, r, theta, n, m, k, k / m if m else nan, lo, hi,
                metrics.mean_or_nan(t.frobenius_err for t in rows),
                metrics.mean_or_nan(t.err for t in rows),
                float(np.mean([t.iters for t in rows])) if rows else nan,
                fails, adm, wins, wall_times.get(c, 0.0),
            )
        )
    return out


def _run_task(args):
    grid, cell, trial, opts = args
    t0 = time.perf_counter()
    res = run_trial(grid, cell, trial, opts)
    return res, time.perf_counter() - t0


def run_sweep(grid: ExperimentGrid, opts: Optional[SolverOptions] = None, jobs: int = 1) -> Tuple[List[TrialResult], List[CellResult]]:
    """Run every ``(cell, trial)`` of the grid, optionally in ``jobs`` processes."""
    tasks = [(grid, c, t, opts) for c in range(len(grid.cells())) for t in range(grid.trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            done = list(ex.map(_run_task, tasks, chunksize=1))
    else:
        done = [_run_task(t) for t in tasks]
    results = sorted((d[0] for d in done), key=lambda t: (t.cell, t.trial))
    wall = {}
    for res, dt in done:
        wall[res.cell] = wall.get(res.cell, 0.0) + dt
    return results, aggregate(grid, results, wall)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _csv(fields: Sequence[str], rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for row in rows:
        w.writerow([_fmt(row[f]) for f in fields])
    return buf.getvalue()


def cells_csv(cells: Sequence[CellResult]) -> str:
    return _csv(CELL_FIELDS, [asdict(c) for c in cells])


def trials_csv(trials: Sequence[TrialResult]) -> str:
    return _csv(TRIAL_FIELDS, [asdict(t) for t in trials])


def timings_csv(cells: Sequence[CellResult]) -> str:
    return _csv(("r", "theta", "n", "wall_time"), [asdict(c) for c in cells])


def sweep_heatmap(grid: ExperimentGrid, cells: Sequence[CellResult], deterministic: bool = False) -> str:
    """Success rate (single mode) or mean Frobenius error, r on the vertical axis.

    The horizontal axis is theta when several thetas are swept, otherwise n.
    """
    by_theta = len(grid.theta_values) > 1 or len(grid.n_values) == 1
    cols = grid.theta_values if by_theta else grid.n_values
    vals = np.full((len(grid.r_values), len(cols)), np.nan)
    use_rate = grid.mode is Mode.SINGLE
    for c in cells:
        if by_theta and c.n != grid.n_values[0]:
            continue
        if not by_theta and c.theta != grid.theta_values[0]:
            continue
        i = grid.r_values.index(c.r)
        j = cols.index(c.theta if by_theta else c.n)
        vals[i, j] = c.success_rate if use_rate else c.mean_frobenius_err
    vmax = 1.0 if use_rate else (float(np.nanmax(vals)) if np.isfinite(vals).any() else 1.0)
    comment = None if deterministic else f"generated {time.strftime('%Y-%m-%dT%H:%M:%S')}"
    return svg.heatmap(
        vals,
        grid.r_values,
        cols,
        "recovery probability" if use_rate else "mean normalized Frobenius error",
        "theta" if by_theta else "n",
        "r",
        0.0,
        vmax if vmax > 0 else 1.0,
        comment,
    )
