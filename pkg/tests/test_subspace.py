import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from partial_ia.errors import DimensionError, InvalidInputError
from partial_ia.subspace import (Subspace, complement, dim_meet, intersect,
                                 left_null_space, null_space, numerical_rank,
                                 projected_rank, span, sum_space)

from conftest import random_complex


def e(i, n):
    v = np.zeros((n, 1), complex)
    v[i] = 1
    return v


def test_null_space_of_zero_is_everything():
    assert null_space(np.zeros((2, 2))).rank == 2


def test_null_space_of_identity_is_zero():
    N = null_space(np.eye(3))
    assert N.rank == 0 and N.basis.shape == (3, 0)


def test_null_space_rank_one_symmetric():
    N = null_space(np.array([[1, 1], [1, 1]]))
    assert N.same_span(span(np.array([1, -1]) / np.sqrt(2)))


def test_null_space_rejects_nan():
    with pytest.raises(InvalidInputError):
        null_space(np.array([[np.nan, 1.0]]))
    with pytest.raises(InvalidInputError):
        null_space(np.eye(2), tol=0)


def test_left_null_space_examples(rng):
    assert left_null_space(np.zeros((2, 2))).rank == 2
    assert left_null_space(np.array([[1, 0, 0], [0, 1, 0]])).rank == 0
    M = random_complex(rng, (2, 3))
    assert left_null_space(M).rank == 0
    W = left_null_space(M.conj().T)
    assert W.rank == 1
    u = W.basis.conj().T
    assert np.linalg.norm(u @ M.conj().T) <= 1e-9 * np.linalg.norm(M)


def test_intersect_examples(rng):
    A = span(np.hstack([e(0, 3), e(1, 3)]))
    B = span(np.hstack([e(1, 3), e(2, 3)]))
    assert intersect(A, B).same_span(span(e(1, 3)))
    assert intersect(A, Subspace.full(3)).same_span(A)
    R1, R2 = span(random_complex(rng, (3, 2))), span(random_complex(rng, (3, 2)))
    assert intersect(R1, R2).rank == 1


def test_intersect_dimension_mismatch():
    with pytest.raises(DimensionError):
        intersect(Subspace.full(2), Subspace.full(3))


def test_complement_examples(rng):
    assert complement(span(e(0, 2))).same_span(span(e(1, 2)))
    assert complement(Subspace.zero(4)).rank == 4
    A = span(random_complex(rng, (5, 2)))
    C = complement(A)
    assert C.rank == 3
    assert np.abs(C.basis.conj().T @ A.basis).max() < 1e-9
    assert complement(C).same_span(A)


def test_dim_meet_examples(rng):
    assert dim_meet(span(e(0, 3)), span(e(1, 3))) == 0
    A = span(e(0, 3))
    B = span(np.hstack([e(0, 3), e(2, 3)]))
    assert dim_meet(A, B) == 1
    for _ in range(20):
        P = span(random_complex(rng, (4, int(rng.integers(0, 5)))))
        Q = span(random_complex(rng, (4, int(rng.integers(0, 5)))))
        stack = numerical_rank(np.hstack([P.basis, Q.basis])) if P.rank + Q.rank else 0
        assert dim_meet(P, Q) == P.rank + Q.rank - stack


def test_projected_rank_counts_visible_directions():
    S = span(np.array([[1, 0], [0, 1], [0, 0]]))
    N = span(e(0, 3))
    assert projected_rank(S, N) == 1
    assert projected_rank(S, Subspace.zero(3)) == 2
    assert projected_rank(Subspace.zero(3), N) == 0


def test_subspace_invariants():
    with pytest.raises(InvalidInputError):
        Subspace(np.array([[1.0], [1.0]]))
    S = Subspace.zero(3)
    assert S.rank == 0 and S.ambient == 3
    assert not Subspace.full(2).basis.flags.writeable


# -- lattice laws -----------------------------------------------------------

@st.composite
def subspaces(draw, n=4, min_rank=0):
    r = draw(st.integers(min_rank, n))
    seed = draw(st.integers(0, 2**31 - 1))
    rng = np.random.default_rng(seed)
    # mix coordinate-aligned and generic spaces so intersections are non-trivial
    if draw(st.booleans()):
        idx = rng.choice(n, size=r, replace=False)
        return span(np.eye(n)[:, idx])
    return span(random_complex(rng, (n, r)))


@settings(max_examples=60, deadline=None)
@given(subspaces(), subspaces())
def test_intersect_commutes(A, B):
    X, Y = intersect(A, B), intersect(B, A)
    assert X.same_span(Y)
    assert A.contains(X.basis) and B.contains(X.basis)


@settings(max_examples=60, deadline=None)
@given(subspaces(), subspaces(), subspaces())
def test_intersect_associates(A, B, C):
    assert intersect(intersect(A, B), C).same_span(intersect(A, intersect(B, C)))


@settings(max_examples=60, deadline=None)
@given(subspaces())
def test_meet_with_complement_is_zero(A):
    assert intersect(A, complement(A)).rank == 0


@settings(max_examples=60, deadline=None)
@given(subspaces(), subspaces())
def test_modular_dimension_identity(A, B):
    assert dim_meet(A, B) + sum_space(A, B).rank == A.rank + B.rank


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 5), st.integers(0, 2**31 - 1))
def test_null_space_rank_nullity(rows, cols, r, seed):
    rng = np.random.default_rng(seed)
    r = min(r, rows, cols)
    M = random_complex(rng, (rows, r)) @ random_complex(rng, (r, cols))
    N = null_space(M)
    assert N.rank + numerical_rank(M) == cols
    if N.rank and np.linalg.norm(M):
        assert np.linalg.norm(M @ N.basis) / np.linalg.norm(M) <= 1e-8
