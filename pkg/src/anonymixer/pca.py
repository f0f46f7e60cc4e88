"""Principal component analysis via cyclic Jacobi on the sample covariance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cluster import as_matrix
from .dataio import ColumnSpec, Dataset
from .errors import NumericError, ParameterError, ShapeError


@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (p, m), rows are axes in descending variance
    explained_variance: np.ndarray
    total_variance: float

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        if self.total_variance == 0:
            return np.zeros_like(self.explained_variance)
        return self.explained_variance / self.total_variance


def jacobi_eigh(a: np.ndarray, tol: float = 1e-15, max_sweeps: int = 100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvectors as columns, sorted by
    descending eigenvalue.
    """
    a = np.array(a, dtype=np.float64, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got {a.shape}")
    m = a.shape[0]
    v = np.eye(m)
    scale = np.abs(a).max() if a.size else 0.0
    for _ in range(max_sweeps):
        off = np.sqrt((np.triu(a, 1) ** 2).sum())
        if off <= tol * max(scale, 1e-300):
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        raise NumericError("Jacobi eigen-solver did not converge")
    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def pca_fit(data, p: int = 2) -> PcaModel:
    x = as_matrix(data)
    n, m = x.shape
    if n < 2:
        raise ParameterError("PCA needs at least 2 rows to estimate a covariance")
    if not 1 <= p <= min(n, m):
        raise ParameterError(f"p must satisfy 1 <= p <= min(n, m) = {min(n, m)} (got {p})")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (n - 1)
    cov = 0.5 * (cov + cov.T)
    w, v = jacobi_eigh(cov)
    comps = v[:, :p].T.copy()
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    var = np.maximum(w[:p], 0.0)
    return PcaModel(mean, comps, var, float(np.trace(cov)))


def components_for_variance(data, fraction: float = 0.95) -> int:
    """Smallest number of components whose cumulative variance share reaches ``fraction``."""
    x = as_matrix(data)
    model = pca_fit(x, min(x.shape))
    cum = np.cumsum(model.explained_variance_ratio)
    return int(min(np.searchsorted(cum, fraction - 1e-12) + 1, cum.size))


def pca_transform(model: PcaModel, data) -> Dataset:
    x = as_matrix(data)
    if x.shape[1] != model.mean.shape[0]:
        raise ShapeError(f"PCA model expects {model.mean.shape[0]} features, data has {x.shape[1]}")
    scores = (x - model.mean) @ model.components.T
    schema = tuple(ColumnSpec(f"pc{i + 1}") for i in range(scores.shape[1]))
    labels = data.labels if isinstance(data, Dataset) else None
    if labels is not None:
        schema = schema + (ColumnSpec(data.label_name, "discrete_label"),)
    return Dataset(schema, scores, labels)


def pca_inverse(model: PcaModel, scores) -> np.ndarray:
    return as_matrix(scores) @ model.components + model.mean
