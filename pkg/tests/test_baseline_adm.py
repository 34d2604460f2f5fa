import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from l4decomp.baseline_adm import (
    AdmOptions,
    adm_objective,
    adm_rank_one,
    adm_recover_all,
    default_lambda,
    leading_left_vector,
    soft_threshold,
)
from l4decomp.experiments import make_instance
from l4decomp.metrics import match_signed_permutation


def test_soft_threshold_examples():
    assert np.array_equal(soft_threshold(np.array([3.0, -1.0, 0.5]), 1.0), [2.0, 0.0, 0.0])
    x = np.array([0.3, -2.0, 7.0])
    assert np.array_equal(soft_threshold(x, 0.0), x)
    assert not np.any(soft_threshold(x, 7.0))
    with pytest.raises(ValueError):
        soft_threshold(x, -1.0)


def test_soft_threshold_is_proximal_map_grid_oracle():
    rng = np.random.default_rng(0)
    xs = rng.uniform(-3, 3, 10_000)
    t = 0.7
    grid = np.linspace(-4, 4, 8001)
    h = grid[1] - grid[0]
    got = soft_threshold(xs, t)
    for x, z in zip(xs[:2000], got[:2000]):
        best = grid[np.argmin(0.5 * (grid - x) ** 2 + t * np.abs(grid))]
        assert abs(best - z) <= h
    # closed-form check on all 10^4 scalars: the subgradient optimality condition holds
    nz = got != 0
    assert np.allclose(got[nz] - xs[nz] + t * np.sign(got[nz]), 0.0)
    assert np.all(np.abs(xs[~nz]) <= t)


def test_options_validation():
    with pytest.raises(ValueError):
        AdmOptions(lam=0.0)
    with pytest.raises(ValueError):
        AdmOptions(max_iters=0)


def test_noiseless_rank_one_recovered():
    rng = np.random.default_rng(1)
    u = rng.standard_normal(30)
    u /= np.linalg.norm(u)
    v = rng.standard_normal(400) * (rng.random(400) < 0.1)
    Y = np.outer(u, v)
    res = adm_rank_one(Y, AdmOptions(lam=1e-6 * np.linalg.norm(Y)))
    assert min(np.linalg.norm(res.u - u), np.linalg.norm(res.u + u)) <= 1e-4
    assert res.converged


def test_lambda_too_large_diagnostic():
    Y = np.random.default_rng(2).standard_normal((10, 50))
    u0 = leading_left_vector(Y)
    res = adm_rank_one(Y, AdmOptions(lam=2 * np.max(np.abs(Y.T @ u0))), u0)
    assert not np.any(res.v) and not res.converged
    assert res.n_iters == 1 and "lambda too large" in res.diagnostics[0]
    assert np.array_equal(res.u, u0)


@given(seed=st.integers(0, 10_000), factor=st.sampled_from([0.05, 0.5, 2.0]))
def test_objective_monotone_and_unit_u(seed, factor):
    rng = np.random.default_rng(seed)
    Y = rng.standard_normal((8, 60)) * (rng.random((8, 60)) < 0.4)
    u0 = rng.standard_normal(8)
    u0 /= np.linalg.norm(u0)
    lam = factor * float(np.median(np.abs(Y.T @ u0))) + 1e-3
    res = adm_rank_one(Y, AdmOptions(lam=lam, max_iters=50), u0)
    start = adm_objective(Y, u0, np.zeros(60), lam)
    hist = np.array([start] + res.objective)
    assert np.all(np.diff(hist) <= 1e-12 * np.abs(hist[:-1]).max())
    assert abs(np.linalg.norm(res.u) - 1) <= 1e-12


def test_adm_objective_matches_definition():
    rng = np.random.default_rng(3)
    Y = rng.standard_normal((5, 9))
    u = rng.standard_normal(5)
    u /= np.linalg.norm(u)
    v = rng.standard_normal(9)
    direct = np.linalg.norm(Y - np.outer(u, v)) ** 2 + 0.3 * np.abs(v).sum()
    assert np.isclose(adm_objective(Y, u, v, 0.3), direct)


def test_default_lambda_scales_median():
    Y = np.arange(12.0).reshape(3, 4)
    u = np.array([1.0, 0.0, 0.0])
    assert default_lambda(Y, u) > 0
    assert np.isclose(default_lambda(2 * Y, u), 2 * default_lambda(Y, u))


def test_r_equals_one_reduces_to_rank_one():
    _, _, Y = make_instance(20, 3, 500, 0.2, 0, kind="semi-orthogonal")
    A_est, results = adm_recover_all(Y, 1)
    single = adm_rank_one(Y)
    assert np.allclose(A_est.entries[:, 0], single.u)
    assert len(results) == 1


def test_recover_all_output_properties():
    A, _, Y = make_instance(40, 4, 4000, 0.1, 1, kind="semi-orthogonal")
    A_est, results = adm_recover_all(Y, 4)
    E = A_est.entries
    assert abs(np.linalg.norm(E, 2) - 1) <= 1e-10
    G = E.T @ E
    assert np.linalg.norm(G - np.diag(np.diag(G))) <= 1e-10
    assert match_signed_permutation(A_est, A)[1] <= 0.5
    assert all(abs(np.linalg.norm(r.u) - 1) <= 1e-12 for r in results)
