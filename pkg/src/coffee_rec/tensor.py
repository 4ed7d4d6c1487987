"""Sparse third-order tensor algebra and the HOOI Tucker decomposition.

Unfoldings follow the Kolda-Bader convention: among the remaining modes the
earlier one varies fastest along columns. All kernels iterate over the COO
entries (or use sparse matmuls against small dense blocks) so the binary
interaction tensor is never densified.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .ingest import RatingTable

log = logging.getLogger(__name__)

_FORMAT_VERSION = 1


class SparseTensor:
    """COO third-order tensor; entries carry value 1 unless given explicitly."""

    def __init__(self, shape, i, j, k, values=None):
        self.shape = tuple(int(s) for s in shape)
        if len(self.shape) != 3:
            raise ValueError("expected a third-order shape (M, N, K)")
        self.i = np.asarray(i, dtype=np.int64)
        self.j = np.asarray(j, dtype=np.int64)
        self.k = np.asarray(k, dtype=np.int64)
        if not (len(self.i) == len(self.j) == len(self.k)):
            raise ValueError("index arrays must have equal length")
        self.values = None if values is None else np.asarray(values, dtype=np.float64)
        if self.values is not None and len(self.values) != len(self.i):
            raise ValueError("values must align with the index arrays")
        M, N, K = self.shape
        for idx, dim, name in ((self.i, M, "i"), (self.j, N, "j"), (self.k, K, "k")):
            if len(idx) and (idx.min() < 0 or idx.max() >= dim):
                raise ValueError(f"{name} index out of bounds for dimension {dim}")
        lin = (self.i * N + self.j) * K + self.k
        if len(np.unique(lin)) != len(lin):
            raise ValueError("duplicate (i, j, k) triplets")

    @classmethod
    def from_table(cls, table: RatingTable) -> "SparseTensor":
        return cls(table.shape, table.users, table.items, table.levels)

    @property
    def nnz(self) -> int:
        return len(self.i)

    def data(self) -> np.ndarray:
        if self.values is not None:
            return self.values
        return np.ones(self.nnz, dtype=np.float64)

    def norm(self) -> float:
        """Frobenius norm; sqrt(nnz) for the binary case."""
        if self.values is None:
            return float(np.sqrt(self.nnz))
        return float(np.linalg.norm(self.values))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.i, self.j, self.k] = self.data()
        return out


def unfold(T: SparseTensor, mode: int) -> sp.csr_matrix:
    """Mode-n unfolding as a CSR matrix (modes are 0-based here)."""
    M, N, K = T.shape
    if mode == 0:
        rows, cols, shape = T.i, T.j + T.k * N, (M, N * K)
    elif mode == 1:
        rows, cols, shape = T.j, T.i + T.k * M, (N, M * K)
    elif mode == 2:
        rows, cols, shape = T.k, T.i + T.j * M, (K, M * N)
    else:
        raise ValueError(f"mode must be 0, 1 or 2, got {mode}")
    return sp.csr_matrix((T.data(), (rows, cols)), shape=shape)


def unfold_dense(D: np.ndarray, mode: int) -> np.ndarray:
    return np.reshape(np.moveaxis(D, mode, 0), (D.shape[mode], -1), order="F")


def fold(Z: np.ndarray, mode: int, shape) -> np.ndarray:
    """Inverse of the mode-n unfolding for dense matrices."""
    shape = tuple(shape)
    rest = tuple(s for ax, s in enumerate(shape) if ax != mode)
    return np.moveaxis(np.reshape(np.asarray(Z), (shape[mode],) + rest, order="F"), 0, mode)


def mode_multiply(T, A: np.ndarray, mode: int) -> np.ndarray:
    """n-mode product T x_mode A; the mode dimension becomes A's row count."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    if isinstance(T, SparseTensor):
        if A.shape[1] != T.shape[mode]:
            raise ValueError(
                f"A has {A.shape[1]} columns but mode {mode} has size {T.shape[mode]}"
            )
        Z = A @ unfold(T, mode)  # dense @ csr -> dense
        new_shape = list(T.shape)
        new_shape[mode] = A.shape[0]
        return fold(np.asarray(Z), mode, new_shape)
    T = np.asarray(T, dtype=np.float64)
    if A.shape[1] != T.shape[mode]:
        raise ValueError(
            f"A has {A.shape[1]} columns but mode {mode} has size {T.shape[mode]}"
        )
    return np.moveaxis(np.tensordot(A, T, axes=(1, mode)), 0, mode)


@dataclass
class TuckerModel:
    """Orthonormal per-mode factors and the dense core of a Tucker model."""

    U: np.ndarray
    V: np.ndarray
    W: np.ndarray
    G: np.ndarray
    ranks: tuple[int, int, int]
    fit_history: tuple[float, ...] = field(default=())

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.U.shape[0], self.V.shape[0], self.W.shape[0])

    @property
    def fit(self) -> float:
        return self.fit_history[-1] if self.fit_history else float("nan")

    def check_orthonormal(self, tol: float = 1e-8) -> None:
        for name, F in (("U", self.U), ("V", self.V), ("W", self.W)):
            dev = np.abs(F.T @ F - np.eye(F.shape[1])).max()
            if dev > tol:
                raise ValueError(f"factor {name} lost orthonormality (dev {dev:.2e})")


def _left_basis(Z: np.ndarray, r: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Top-r left singular basis of Z, padded with an orthonormal complement
    when Z has fewer than r columns."""
    U, s, _ = np.linalg.svd(Z, full_matrices=False)
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    U = U * signs
    if U.shape[1] >= r:
        return U[:, :r], s[:r]
    rng = np.random.default_rng(seed)
    extra = rng.standard_normal((Z.shape[0], r - U.shape[1]))
    Q, _ = np.linalg.qr(np.hstack([U, extra]))
    Q[:, : U.shape[1]] = U
    pad = np.zeros(r)
    pad[: len(s)] = s
    return Q[:, :r], pad


def _hosvd_basis(X: SparseTensor, mode: int, r: int, seed: int) -> np.ndarray:
    # Init tolerates rank-deficient unfoldings (small path pads the basis);
    # the large sparse path assumes a healthy spectrum.
    from .linalg import truncated_svd

    A = unfold(X, mode)
    m, n = A.shape
    if min(m, n) <= 400 and max(m, n) <= 1600:
        return _left_basis(A.toarray(), r, seed)[0]
    return truncated_svd(A, r, seed=seed).U


def _level_groups(X: SparseTensor) -> list[tuple[np.ndarray, np.ndarray, np.ndarray | None]]:
    groups = []
    for k in range(X.shape[2]):
        mask = X.k == k
        vals = None if X.values is None else X.values[mask]
        groups.append((X.i[mask], X.j[mask], vals))
    return groups


def _mode2_product(groups, U: np.ndarray, V: np.ndarray) -> np.ndarray:
    """unfold(X x1 U^T x2 V^T, 2) accumulated per rating level.

    kron(V, U) would have M*N rows, so instead each level's entries are
    contracted directly: row k equals sum_t outer(U[i_t], V[j_t]) flattened
    with the first-mode rank fastest.
    """
    r1, r2 = U.shape[1], V.shape[1]
    Z = np.empty((len(groups), r1 * r2))
    for k, (ii, jj, vals) in enumerate(groups):
        E = U[ii] if vals is None else U[ii] * vals[:, None]
        Z[k] = (E.T @ V[jj]).reshape(-1, order="F")
    return Z


def hooi(
    X: SparseTensor,
    ranks: tuple[int, int, int],
    max_iters: int = 25,
    tol: float = 1e-5,
    seed: int = 0,
) -> TuckerModel:
    """Tucker decomposition by higher-order orthogonal iterations.

    Starts from the truncated HOSVD of each unfolding and alternates
    per-mode SVD updates; the fit ||G||_F / ||X||_F is non-decreasing. A
    final refresh recomputes the first-mode factor against the converged
    item/level factors, which makes per-user folding-in reproduce the
    model's own slices whenever r1 >= r2 * r3.
    """
    M, N, K = X.shape
    r1, r2, r3 = (int(r) for r in ranks)
    for r, dim, name in ((r1, M, "mode 1"), (r2, N, "mode 2"), (r3, K, "mode 3")):
        if not 1 <= r <= dim:
            raise ValueError(f"rank {r} exceeds {name} dimension {dim}")
    if X.nnz == 0 or X.norm() == 0.0:
        raise ValueError("cannot decompose an all-zero tensor")
    xnorm = X.norm()

    U = _hosvd_basis(X, 0, r1, seed)
    V = _hosvd_basis(X, 1, r2, seed)
    W = _hosvd_basis(X, 2, r3, seed)

    # The unfoldings are static; only the small factor blocks change.
    X0, X1 = unfold(X, 0), unfold(X, 1)
    groups = _level_groups(X)

    fits: list[float] = []
    for it in range(max_iters):
        U, _ = _left_basis(np.asarray(X0 @ np.kron(W, V)), r1, seed)
        V, _ = _left_basis(np.asarray(X1 @ np.kron(W, U)), r2, seed)
        W, s3 = _left_basis(_mode2_product(groups, U, V), r3, seed)
        fit = float(np.sqrt(np.sum(s3[:r3] ** 2)) / xnorm)
        fits.append(fit)
        if it > 0 and fit - fits[-2] < tol * max(fits[-2], 1e-15):
            break

    Z1 = np.asarray(X0 @ np.kron(W, V))
    U, _ = _left_basis(Z1, r1, seed)
    G = fold(U.T @ Z1, 0, (r1, r2, r3))
    fits.append(float(np.linalg.norm(G) / xnorm))
    log.info("hooi ranks=%s converged: %d iterations, fit %.5f", ranks, len(fits) - 1, fits[-1])
    model = TuckerModel(U=U, V=V, W=W, G=G, ranks=(r1, r2, r3), fit_history=tuple(fits))
    model.check_orthonormal()
    return model


def reconstruct_slice(model: TuckerModel, user: int) -> np.ndarray:
    """The model's N x K score slice for a training user: G x1 u_i x2 V x3 W."""
    M = model.U.shape[0]
    if not 0 <= user < M:
        raise IndexError(f"user {user} out of range 0..{M - 1}")
    core_slice = np.tensordot(model.U[user], model.G, axes=(0, 0))  # r2 x r3
    return model.V @ core_slice @ model.W.T


def reconstruct(model: TuckerModel) -> np.ndarray:
    """Full dense reconstruction; only sensible for small models."""
    return np.einsum("abc,ia,jb,kc->ijk", model.G, model.U, model.V, model.W)


def save_model(model: TuckerModel, path: str | Path, **extras) -> None:
    """Serialize factors, core and ranks (plus caller extras) to one .npz file."""
    arrays = dict(
        format_version=np.int64(_FORMAT_VERSION),
        U=model.U,
        V=model.V,
        W=model.W,
        G=model.G,
        ranks=np.asarray(model.ranks, dtype=np.int64),
        fit_history=np.asarray(model.fit_history, dtype=np.float64),
    )
    for key, val in extras.items():
        if key in arrays:
            raise ValueError(f"extra field {key!r} collides with a model field")
        arrays[key] = val
    np.savez(Path(path), **arrays)


def load_model(path: str | Path) -> tuple[TuckerModel, dict]:
    """Load a serialized model; returns (model, extras)."""
    with np.load(Path(path), allow_pickle=False) as data:
        if "format_version" not in data.files:
            raise ValueError(f"{path} is not a serialized model")
        version = int(data["format_version"])
        if version != _FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {version}")
        missing = {"U", "V", "W", "G", "ranks"} - set(data.files)
        if missing:
            raise ValueError(f"{path} is not a tensor model file (missing {sorted(missing)})")
        model = TuckerModel(
            U=data["U"],
            V=data["V"],
            W=data["W"],
            G=data["G"],
            ranks=tuple(int(r) for r in data["ranks"]),
            fit_history=tuple(float(f) for f in data["fit_history"]),
        )
        reserved = {"format_version", "U", "V", "W", "G", "ranks", "fit_history"}
        extras = {k: data[k] for k in data.files if k not in reserved}
    model.check_orthonormal()
    return model, extras
