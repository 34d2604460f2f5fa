import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from l4decomp.model import (
    DimensionError,
    MatrixKind,
    MixingMatrix,
    ProblemDims,
    SignedPermutation,
    SparseCoefficients,
    SparsityModel,
    apply_signed_permutation,
    check_unit,
    generate_A,
    generate_X,
    synthesize,
)


def test_problem_dims_requires_r_below_p_and_n():
    ProblemDims(10, 3, 20)
    with pytest.raises(DimensionError):
        ProblemDims(3, 3, 20)
    with pytest.raises(DimensionError):
        ProblemDims(10, 5, 5)
    with pytest.raises(DimensionError):
        ProblemDims(10, 0, 5)


def test_sparsity_model_validation():
    SparsityModel(1.0)
    for bad in (0.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            SparsityModel(bad)
    with pytest.raises(ValueError):
        SparsityModel(0.5, sigma=0.0)


def test_generate_A_square_semi_orthogonal():
    A = generate_A((2, 2), MatrixKind.SEMI_ORTHOGONAL, seed=11)
    assert np.allclose(A.entries.T @ A.entries, np.eye(2), atol=1e-12)


def test_generate_A_full_rank_normalized():
    A = generate_A(ProblemDims(100, 10, 200), MatrixKind.FULL_COLUMN_RANK, seed=7)
    s = np.linalg.svd(A.entries, compute_uv=False)
    assert abs(s[0] - 1) <= 1e-10
    assert np.linalg.matrix_rank(A.entries) == 10


def test_generate_A_deterministic():
    a1 = generate_A((30, 4), seed=5).entries
    a2 = generate_A((30, 4), seed=5).entries
    assert a1.tobytes() == a2.tobytes()
    assert not np.array_equal(a1, generate_A((30, 4), seed=6).entries)


def test_generate_A_rejects_bad_dims():
    with pytest.raises(DimensionError):
        generate_A((3, 4))


@given(
    p=st.integers(2, 30),
    data=st.data(),
    kind=st.sampled_from(list(MatrixKind)),
    seed=st.integers(0, 2**32 - 1),
)
def test_generated_A_invariants(p, data, kind, seed):
    r = data.draw(st.integers(1, p))
    A = generate_A((p, r), kind, seed)
    assert abs(np.linalg.norm(A.entries, 2) - 1) <= 1e-10
    if kind is MatrixKind.SEMI_ORTHOGONAL:
        assert np.linalg.norm(A.entries.T @ A.entries - np.eye(r)) <= 1e-10 * np.sqrt(r)


def test_mixing_matrix_validation():
    with pytest.raises(ValueError):
        MixingMatrix(2 * np.eye(3))
    with pytest.raises(ValueError):
        MixingMatrix(np.array([[1.0, 1.0], [0.0, 0.0]]) / np.sqrt(2))
    with pytest.raises(ValueError):
        MixingMatrix(np.array([[1.0, 0.5], [0.0, 0.5]]), MatrixKind.SEMI_ORTHOGONAL)
    with pytest.raises(DimensionError):
        MixingMatrix(np.ones((2, 3)) / np.sqrt(6))


def test_mixing_matrix_svd_and_orthogonalized():
    A = generate_A((12, 4), seed=2)
    u, d, v = A.svd()
    assert np.allclose(u @ np.diag(d) @ v.T, A.entries)
    Abar = A.orthogonalized()
    assert np.allclose(Abar.T @ Abar, np.eye(4))


def test_generate_X_theta_one_full_support():
    X = generate_X(ProblemDims(10, 3, 50), SparsityModel(1.0), seed=0)
    assert X.support.all()


def test_generate_X_support_fraction_binomial():
    r, n, theta = 30, 10000, 0.1
    X = generate_X(ProblemDims(40, r, n), SparsityModel(theta), seed=4)
    f = X.support.mean()
    assert abs(f - theta) <= 4 * np.sqrt(theta * (1 - theta) / (r * n))
    assert np.all(X.entries[~X.support] == 0)


def test_generate_X_nonzero_variance():
    r, n = 20, 5000  # n r = 1e5
    X = generate_X(ProblemDims(40, r, n), SparsityModel(0.5, sigma=2.0), seed=9)
    var = X.entries[X.support].var()
    assert abs(var - 4.0) <= 0.4


def test_generate_X_deterministic():
    dims, sm = ProblemDims(10, 3, 100), SparsityModel(0.3)
    assert generate_X(dims, sm, 1).entries.tobytes() == generate_X(dims, sm, 1).entries.tobytes()


def test_sparse_coefficients_off_support_zero():
    with pytest.raises(ValueError):
        SparseCoefficients(np.ones((2, 2)), np.eye(2, dtype=bool))


def test_synthesize_identity_and_zero():
    X = np.random.default_rng(0).standard_normal((2, 7))
    assert np.array_equal(synthesize(np.eye(2), X), X)
    A = generate_A((5, 2), seed=1)
    assert not np.any(synthesize(A, np.zeros((2, 7))))
    with pytest.raises(DimensionError):
        synthesize(A, np.zeros((3, 7)))


def test_synthesize_column_space_contained():
    dims = ProblemDims(30, 6, 400)
    A = generate_A(dims, seed=3)
    Y = synthesize(A, generate_X(dims, SparsityModel(0.2), seed=4))
    U, _, _ = A.svd()
    assert np.linalg.norm(Y - U @ (U.T @ Y)) <= 1e-10 * np.linalg.norm(Y)


@given(seed=st.integers(0, 10_000))
def test_synthesize_linear(seed):
    rng = np.random.default_rng(seed)
    A = generate_A((8, 3), seed=seed)
    X1, X2 = rng.standard_normal((3, 20)), rng.standard_normal((3, 20))
    lhs = synthesize(A, X1 + X2)
    rhs = synthesize(A, X1) + synthesize(A, X2)
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * max(1.0, np.linalg.norm(lhs))


def test_signed_permutation_validation_and_matrix():
    with pytest.raises(ValueError):
        SignedPermutation((0, 0))
    with pytest.raises(ValueError):
        SignedPermutation((0, 1), (1, 2))
    P = SignedPermutation((2, 0, 1), (1, -1, 1))
    M = P.matrix()
    assert np.array_equal(M.T @ M, np.eye(3))
    a = np.arange(12.0).reshape(4, 3)
    assert np.array_equal(a @ M, P.apply(a))


def test_apply_signed_permutation_identity_and_swap():
    A = generate_A((6, 2), MatrixKind.SEMI_ORTHOGONAL, seed=0)
    assert np.array_equal(apply_signed_permutation(A, SignedPermutation.identity(2)).entries, A.entries)
    out = apply_signed_permutation(A, SignedPermutation((1, 0), (-1, 1))).entries
    assert np.array_equal(out[:, 0], -A.entries[:, 1])
    assert np.array_equal(out[:, 1], A.entries[:, 0])


def _all_signed_perms(r):
    for perm in itertools.permutations(range(r)):
        for signs in itertools.product((1, -1), repeat=r):
            yield SignedPermutation(perm, signs)


@pytest.mark.parametrize("r", [1, 2, 3])
def test_signed_permutation_composition_exhaustive(r):
    a = np.random.default_rng(r).standard_normal((5, r))
    perms = list(_all_signed_perms(r))
    for P1 in perms:
        for P2 in perms[:: max(1, len(perms) // 8)]:
            assert np.array_equal(P2.apply(P1.apply(a)), P1.then(P2).apply(a))
            assert np.array_equal(P1.then(P2).matrix(), P1.matrix() @ P2.matrix())


def test_signed_permutation_composition_r4_sampled():
    rng = np.random.default_rng(0)
    perms = list(_all_signed_perms(4))
    a = rng.standard_normal((6, 4))
    for i in rng.choice(len(perms), size=60):
        for j in rng.choice(len(perms), size=5):
            P1, P2 = perms[i], perms[j]
            assert np.array_equal(P2.apply(P1.apply(a)), P1.then(P2).apply(a))


@given(perm=st.permutations(range(5)), signs=st.lists(st.sampled_from([1, -1]), min_size=5, max_size=5))
def test_signed_permutation_inverse(perm, signs):
    P = SignedPermutation(tuple(perm), tuple(signs))
    assert P.then(P.inverse()) == SignedPermutation.identity(5)
    assert np.array_equal(P.inverse().matrix(), P.matrix().T)


def test_check_unit():
    check_unit(np.array([0.6, 0.8]))
    with pytest.raises(ValueError):
        check_unit(np.array([1.0, 1.0]))
    with pytest.raises(DimensionError):
        check_unit(np.eye(2))
