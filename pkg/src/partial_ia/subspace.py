"""
Dense complex subspace algebra.

Every subspace is stored as an orthonormal basis matrix of shape
``(ambient, rank)``. The zero space keeps an explicit ``(ambient, 0)``
basis so lattice operations never special-case ``None``.

Receive-side spaces are represented by the column vectors ``w = u^H`` of
the row vectors ``u`` they contain, so the same routines serve both sides.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvalidInputError

RANK_TOL = 1e-9
ORTHO_TOL = 1e-9

__all__ = [
    "RANK_TOL",
    "Subspace",
    "numerical_rank",
    "null_space",
    "left_null_space",
    "span",
    "intersect",
    "complement",
    "dim_meet",
    "projected_rank",
    "sum_space",
]


def _as_matrix(M) -> np.ndarray:
    M = np.asarray(M, dtype=complex)
    if M.ndim == 1:
        M = M.reshape(-1, 1)
    if M.ndim != 2:
        raise InvalidInputError(f"expected a 2-D matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidInputError("matrix contains non-finite entries")
    return M


def _check_tol(tol: float) -> None:
    if not tol > 0:
        raise InvalidInputError(f"tolerance must be positive, got {tol}")


@dataclass(frozen=True, eq=False)
class Subspace:
    """A linear subspace of ``C^ambient`` with an orthonormal basis."""

    basis: np.ndarray

    def __post_init__(self):
        B = np.asarray(self.basis, dtype=complex)
        if B.ndim != 2:
            raise InvalidInputError("basis must be a 2-D array")
        if B.shape[1] > B.shape[0]:
            raise InvalidInputError("rank cannot exceed the ambient dimension")
        if B.shape[1]:
            gram = B.conj().T @ B
            if not np.allclose(gram, np.eye(B.shape[1]), atol=ORTHO_TOL):
                raise InvalidInputError("basis columns are not orthonormal")
        B.setflags(write=False)
        object.__setattr__(self, "basis", B)

    @property
    def ambient(self) -> int:
        return self.basis.shape[0]

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @classmethod
    def zero(cls, ambient: int) -> "Subspace":
        return cls(np.zeros((ambient, 0), dtype=complex))

    @classmethod
    def full(cls, ambient: int) -> "Subspace":
        return cls(np.eye(ambient, dtype=complex))

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T

    def contains(self, vectors, tol: float = 1e-8) -> bool:
        """True when every column of `vectors` lies in the space."""
        X = _as_matrix(vectors)
        if X.shape[0] != self.ambient:
            raise DimensionError("vectors do not match the ambient dimension")
        resid = X - self.projector() @ X
        scale = max(1.0, np.linalg.norm(X))
        return bool(np.linalg.norm(resid) <= tol * scale)

    def same_span(self, other: "Subspace", tol: float = 1e-7) -> bool:
        if self.ambient != other.ambient or self.rank != other.rank:
            return False
        return self.contains(other.basis, tol) and other.contains(self.basis, tol)

    def __repr__(self) -> str:
        return f"Subspace(ambient={self.ambient}, rank={self.rank})"


def _rank_from_singular(s: np.ndarray, tol: float) -> int:
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


def numerical_rank(M, tol: float = RANK_TOL) -> int:
    """Number of singular values above ``tol * sigma_max``."""
    _check_tol(tol)
    M = _as_matrix(M)
    if M.size == 0:
        return 0
    return _rank_from_singular(np.linalg.svd(M, compute_uv=False), tol)


def null_space(M, tol: float = RANK_TOL) -> Subspace:
    """Right null space ``{v : M v = 0}`` at relative tolerance `tol`."""
    _check_tol(tol)
    M = _as_matrix(M)
    rows, cols = M.shape
    if rows == 0 or cols == 0:
        return Subspace.full(cols)
    _, s, Vh = np.linalg.svd(M, full_matrices=True)
    r = _rank_from_singular(s, tol)
    return Subspace(Vh[r:].conj().T)


def left_null_space(M, tol: float = RANK_TOL) -> Subspace:
    """Left null space ``{u : u M = 0}``, stored as the columns ``u^H``."""
    return null_space(_as_matrix(M).conj().T, tol)


def span(A, tol: float = RANK_TOL) -> Subspace:
    """Column span of `A`, re-orthonormalized through an SVD."""
    _check_tol(tol)
    A = _as_matrix(A)
    if A.shape[1] == 0:
        return Subspace.zero(A.shape[0])
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    r = _rank_from_singular(s, tol)
    return Subspace(U[:, :r])


def _check_same_ambient(A: Subspace, B: Subspace) -> None:
    if A.ambient != B.ambient:
        raise DimensionError(
            f"ambient dimensions differ: {A.ambient} vs {B.ambient}")


def intersect(A: Subspace, B: Subspace, tol: float = RANK_TOL) -> Subspace:
    """
    Intersection of two subspaces.

    Solves ``A x = B y`` through the null space of ``[A, -B]``; the
    intersection is the span of the resulting ``A x``.
    """
    _check_same_ambient(A, B)
    if A.rank == 0 or B.rank == 0:
        return Subspace.zero(A.ambient)
    stack = np.hstack([A.basis, -B.basis])
    kernel = null_space(stack, tol)
    if kernel.rank == 0:
        return Subspace.zero(A.ambient)
    return span(A.basis @ kernel.basis[: A.rank], tol)


def complement(A: Subspace) -> Subspace:
    """Orthogonal complement within the ambient space."""
    if A.rank == 0:
        return Subspace.full(A.ambient)
    if A.rank == A.ambient:
        return Subspace.zero(A.ambient)
    U, _, _ = np.linalg.svd(A.basis, full_matrices=True)
    return Subspace(U[:, A.rank:])


def sum_space(A: Subspace, B: Subspace, tol: float = RANK_TOL) -> Subspace:
    """Span of the union ``A + B``."""
    _check_same_ambient(A, B)
    return span(np.hstack([A.basis, B.basis]), tol)


def dim_meet(A: Subspace, B: Subspace, tol: float = RANK_TOL) -> int:
    """Dimension of ``A ∩ B``."""
    return intersect(A, B, tol).rank


def projected_rank(S: Subspace, N: Subspace, tol: float = RANK_TOL) -> int:
    """
    Rank of `S` after projecting out `N`, i.e. ``rank(S) - dim(S ∩ N)``.

    With `N` the null space of a channel, this is the number of independent
    directions of `S` the channel actually sees.
    """
    return S.rank - dim_meet(S, N, tol)
