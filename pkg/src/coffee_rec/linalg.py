"""Shared dense/thin matrix kernels: truncated SVD, QR, subspace projection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import svds

# Below this size the exact LAPACK path is cheaper and fully deterministic;
# ARPACK is reserved for genuinely large sparse operands.
_DENSE_SIDE = 400


@dataclass(frozen=True)
class TruncatedSvd:
    """Rank-r factorization A ~ U diag(S) V^T with orthonormal U, V columns."""

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.S)

    def reconstruct_row(self, i: int) -> np.ndarray:
        return (self.U[i] * self.S) @ self.V.T


def _fix_signs(U: np.ndarray, V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Make the largest-magnitude entry of every left vector positive so
    # repeated runs produce identical factors.
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs, V * signs


def truncated_svd(A, rank: int, seed: int = 0) -> TruncatedSvd:
    """Leading rank-r singular triplets of a sparse (or dense) matrix.

    Missing entries are implicit zeros. Factors satisfy A @ V = U * S to
    solver precision, which downstream folding-in relies on. Exact LAPACK
    is used whenever a side is small (via the Gram matrix when the other
    side is huge); Lanczos handles the large sparse case.
    """
    A = sp.csr_matrix(A) if not sp.issparse(A) else A.tocsr()
    m, n = A.shape
    if not 1 <= rank <= min(m, n):
        raise ValueError(f"rank {rank} out of range 1..{min(m, n)}")

    if min(m, n) <= _DENSE_SIDE:
        if max(m, n) <= 4 * _DENSE_SIDE:
            U, s, Vt = np.linalg.svd(A.toarray(), full_matrices=False)
            U, s, V = U[:, :rank], s[:rank], Vt[:rank].T
        else:
            U, s, V = _gram_svd(A, rank)
    else:
        if rank >= min(m, n) - 1:  # ARPACK needs k < min(m, n)
            U, s, Vt = np.linalg.svd(A.toarray(), full_matrices=False)
            U, s, V = U[:, :rank], s[:rank], Vt[:rank].T
        else:
            rng = np.random.default_rng(seed)
            v0 = rng.standard_normal(min(m, n))
            U, s, Vt = svds(A, k=rank, v0=v0)
            order = np.argsort(-s)
            U, s, V = U[:, order], s[order], Vt[order].T

    if not np.all(np.isfinite(s)) or s[0] <= 0 or s[-1] <= 1e-12 * s[0]:
        raise ValueError(
            f"numerical breakdown: smallest retained singular value {s[-1]:.3e} "
            f"at rank {rank}; the matrix rank is likely below the requested rank"
        )
    U, V = _fix_signs(U, V)
    return TruncatedSvd(U=np.ascontiguousarray(U), S=s.copy(), V=np.ascontiguousarray(V))


def _gram_svd(A: sp.spmatrix, rank: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # One side is tiny: eigendecompose the small Gram matrix instead of
    # densifying the long side.
    m, n = A.shape
    if m <= n:
        G = (A @ A.T).toarray()
        w, Q = np.linalg.eigh(G)
        w, Q = w[::-1], Q[:, ::-1]
        if w[rank - 1] <= 0:
            raise ValueError("numerical breakdown: Gram spectrum not positive at requested rank")
        s = np.sqrt(w[:rank])
        U = Q[:, :rank]
        V = (A.T @ U) / s
        return U, s, V
    U2, s2, V2 = _gram_svd(A.T.tocsr(), rank)
    return V2, s2, U2


def orthonormalize(B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR of B with R's diagonal made positive; errors on rank deficiency."""
    B = np.asarray(B, dtype=np.float64)
    if B.ndim != 2:
        raise ValueError("expected a 2-d array")
    Q, R = np.linalg.qr(B)
    diag = np.diagonal(R)
    col_scale = np.maximum(np.abs(B).max(axis=0), 1.0)
    if np.any(np.abs(diag) <= 1e-12 * col_scale):
        raise ValueError("matrix is rank deficient; cannot orthonormalize")
    signs = np.sign(diag)
    return Q * signs, R * signs[:, None]


def project(V: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Orthogonal projection V (V^T p) onto the column span of V."""
    V = np.asarray(V)
    p = np.asarray(p, dtype=np.float64)
    if p.shape[0] != V.shape[0]:
        raise ValueError(f"dimension mismatch: V is {V.shape}, p has length {p.shape[0]}")
    return V @ (V.T @ p)
