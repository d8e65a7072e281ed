"""Similarity metrics between faces.

Weight-space metrics operate on unique-core reduced vectors; vertex-space
metrics operate on evaluated meshes. The PCA model supports two routes to
the same standardized distance (an explicit per-component sum and a
Mahalanobis solve against the diagonalized covariance), kept separate so
they can check each other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular


class MetricUndefinedError(ValueError):
    """The metric is mathematically undefined for these inputs."""


def _pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"expected equal-length vectors, got {a.shape} and {b.shape}")
    return a, b


def ed_blend(a, b) -> float:
    """Euclidean distance between two reduced weight vectors."""
    a, b = _pair(a, b)
    return float(np.linalg.norm(a - b))


def cd(a, b) -> float:
    """Cosine distance 1 - cos(angle); undefined for zero-norm input."""
    a, b = _pair(a, b)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise MetricUndefinedError("cosine distance undefined for zero-norm vector")
    return float(1.0 - (a @ b) / (na * nb))


def vrtx_rms(mesh_a, mesh_b) -> float:
    """Root-mean-square per-vertex distance between two meshes.

    Accepts Mesh objects or raw (N, 3) vertex arrays.
    """
    va = getattr(mesh_a, "vertices", mesh_a)
    vb = getattr(mesh_b, "vertices", mesh_b)
    va = np.asarray(va, dtype=float)
    vb = np.asarray(vb, dtype=float)
    if va.shape != vb.shape or va.ndim != 2 or va.shape[1] != 3:
        raise ValueError("meshes disagree on vertex count")
    return float(np.sqrt(np.mean(np.sum((va - vb) ** 2, axis=1))))


# -- PCA ----------------------------------------------------------------------

@dataclass
class PcaModel:
    mean: np.ndarray          # (D,)
    components: np.ndarray    # (K, D), orthonormal rows
    variances: np.ndarray     # (K,), positive, non-increasing
    total_variance: float

    @property
    def retained(self) -> int:
        return int(self.components.shape[0])


def fit_pca(samples, variance_target: float = 0.99) -> PcaModel:
    """Eigendecomposition PCA keeping the smallest component count whose
    cumulative variance reaches the target fraction."""
    X = np.asarray(samples, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("fit_pca needs a (n >= 2, D) sample matrix")
    if not 0.0 < variance_target <= 1.0:
        raise ValueError("variance_target must be in (0, 1]")
    mean = X.mean(axis=0)
    cov = np.cov(X - mean, rowvar=False, ddof=1)
    cov = np.atleast_2d(cov)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    total = float(evals.sum())
    if total <= 0.0:
        raise MetricUndefinedError("samples have zero variance, PCA undefined")
    cum = np.cumsum(evals) / total
    k = int(np.searchsorted(cum, variance_target - 1e-12) + 1)
    k = min(k, len(evals))
    return PcaModel(
        mean=mean,
        components=evecs[:, :k].T.copy(),
        variances=evals[:k].copy(),
        total_variance=total,
    )


def project(model: PcaModel, w) -> np.ndarray:
    """Coordinates of a reduced weight vector in the PCA basis."""
    w = np.asarray(w, dtype=float)
    if w.shape != model.mean.shape:
        raise ValueError(f"vector shape {w.shape} does not match model ({model.mean.shape})")
    return model.components @ (w - model.mean)


def ed_pca(b1, b2) -> float:
    """Plain Euclidean distance between two PCA coordinate vectors."""
    b1, b2 = _pair(b1, b2)
    return float(np.linalg.norm(b1 - b2))


def std_ed_pca(b1, b2, model: PcaModel) -> float:
    """Standardized Euclidean distance: per-component variance-scaled sum."""
    b1, b2 = _pair(b1, b2)
    if b1.shape[0] != model.retained:
        raise ValueError("coordinate vectors do not match the model size")
    if np.any(model.variances <= 0.0):
        raise MetricUndefinedError("zero-variance component in PCA model")
    acc = 0.0
    for d, var in zip(b1 - b2, model.variances):
        acc += (d * d) / var
    return float(np.sqrt(acc))


def md_pca(b1, b2, model: PcaModel) -> float:
    """Mahalanobis distance in PCA space via a linear solve against the
    (diagonal) component covariance. Numerically identical to std_ed_pca."""
    b1, b2 = _pair(b1, b2)
    if np.any(model.variances <= 0.0):
        raise MetricUndefinedError("zero-variance component in PCA model")
    S = np.diag(model.variances)
    d = b1 - b2
    return float(np.sqrt(d @ np.linalg.solve(S, d)))


# -- vertex-space Mahalanobis -------------------------------------------------

@dataclass
class VertexCovariance:
    mean: np.ndarray       # (3N,)
    centered: np.ndarray   # (n, 3N) centered training offsets (kept for io)
    matrix: np.ndarray     # (3N, 3N) regularized covariance
    epsilon: float
    _chol: np.ndarray | None = None  # cached factor, computed on first distance

    def cholesky(self) -> np.ndarray:
        if self._chol is None:
            try:
                self._chol = np.linalg.cholesky(self.matrix)
            except np.linalg.LinAlgError as exc:
                raise MetricUndefinedError("vertex covariance is not positive definite") from exc
        return self._chol


def fit_vertex_covariance(vertex_sets) -> VertexCovariance:
    """Covariance of flattened vertex positions, ridge-regularized with
    epsilon = 1e-8 * trace(S) / 3N."""
    X = np.asarray(vertex_sets, dtype=float)
    if X.ndim == 3:
        X = X.reshape(X.shape[0], -1)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("fit_vertex_covariance needs at least two vertex sets")
    mean = X.mean(axis=0)
    centered = X - mean
    S = (centered.T @ centered) / (X.shape[0] - 1)
    eps = 1e-8 * float(np.trace(S)) / S.shape[0]
    S[np.diag_indices_from(S)] += eps
    return VertexCovariance(mean=mean, centered=centered, matrix=S, epsilon=eps)


def md_vertex(mesh_a, mesh_b, cov: VertexCovariance) -> float:
    """Mahalanobis distance between two meshes under a vertex covariance.

    Accepts Mesh objects or raw vertex arrays ((N, 3) or flat (3N,)).
    """
    va = np.asarray(getattr(mesh_a, "vertices", mesh_a), dtype=float)
    vb = np.asarray(getattr(mesh_b, "vertices", mesh_b), dtype=float)
    if va.shape != vb.shape:
        raise ValueError("meshes disagree on vertex count")
    d = (va - vb).ravel()
    if d.shape[0] != cov.matrix.shape[0]:
        raise ValueError("meshes do not match the covariance dimensionality")
    L = cov.cholesky()
    y = solve_triangular(L, d, lower=True)
    return float(np.sqrt(y @ y))
