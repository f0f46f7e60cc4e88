"""Internal cluster-validation scores and the model-selection sweeps built on them.

Rows labelled -1 (DBSCAN noise) are dropped before any score is computed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _distance
from .cluster import ClusterAssignment, DbscanParams, as_matrix, dbscan_fit, kmeans_fit, radius_neighbors
from .dataio import NOISE
from .errors import NoValidParamsError, ParameterError, ShapeError, UndefinedMetricError

INF_TOKEN = "inf"


def encode_float(v: float):
    """JSON-safe float: infinities become the string token ``"inf"`` / ``"-inf"``."""
    if math.isinf(v):
        return INF_TOKEN if v > 0 else "-" + INF_TOKEN
    return float(v)


def decode_float(v) -> float:
    return float(v)  # float() already understands "inf"


@dataclass(frozen=True)
class ValidationScores:
    silhouette: float
    calinski_harabasz: float
    davies_bouldin: float
    n_effective_rows: int

    def as_tuple(self):
        return (self.silhouette, self.calinski_harabasz, self.davies_bouldin)

    def to_dict(self) -> dict:
        return {
            "silhouette": encode_float(self.silhouette),
            "calinski_harabasz": encode_float(self.calinski_harabasz),
            "davies_bouldin": encode_float(self.davies_bouldin),
            "n_effective_rows": int(self.n_effective_rows),
        }

    @classmethod
    def from_dict(cls, d) -> "ValidationScores":
        return cls(
            decode_float(d["silhouette"]),
            decode_float(d["calinski_harabasz"]),
            decode_float(d["davies_bouldin"]),
            int(d["n_effective_rows"]),
        )


METRIC_NAMES = ("silhouette", "calinski_harabasz", "davies_bouldin")


def _prepare(data, labels):
    x = as_matrix(data)
    lab = labels.labels if isinstance(labels, ClusterAssignment) else np.asarray(labels, dtype=np.int64)
    if lab.shape != (x.shape[0],):
        raise ShapeError(f"{lab.shape[0]} labels for {x.shape[0]} rows")
    keep = lab != NOISE
    x, lab = x[keep], lab[keep]
    uniq, dense = np.unique(lab, return_inverse=True)
    return x, dense, uniq.size


def _centroids(x, lab, k):
    counts = np.bincount(lab, minlength=k).astype(np.float64)
    sums = np.zeros((k, x.shape[1]))
    np.add.at(sums, lab, x)
    return sums / counts[:, None], counts


def silhouette(data, labels) -> float:
    """Mean silhouette over non-noise rows; members of singleton clusters score 0."""
    x, lab, k = _prepare(data, labels)
    n = x.shape[0]
    if k < 2 or n < 2:
        raise UndefinedMetricError(f"silhouette needs at least 2 clusters (got {k}) and 2 rows (got {n})")
    onehot = np.zeros((n, k))
    onehot[np.arange(n), lab] = 1.0
    counts = onehot.sum(axis=0)
    scores = np.empty(n)
    block = _distance.block_size_for(n, x.shape[1])
    for s, e in _distance.row_blocks(n, block):
        sums = _distance.pairwise(x[s:e], x) @ onehot
        own = lab[s:e]
        rows = np.arange(e - s)
        own_n = counts[own]
        a = np.where(own_n > 1, sums[rows, own] / np.maximum(own_n - 1, 1), 0.0)
        mean_other = sums / counts
        mean_other[rows, own] = np.inf
        b = mean_other.min(axis=1)
        denom = np.maximum(a, b)
        with np.errstate(invalid="ignore", divide="ignore"):
            sc = np.where(denom > 0, (b - a) / denom, 0.0)
        scores[s:e] = np.where(own_n > 1, sc, 0.0)
    return float(scores.mean())


def calinski_harabasz(data, labels) -> float:
    x, lab, k = _prepare(data, labels)
    n = x.shape[0]
    if k < 2 or k >= n:
        raise UndefinedMetricError(f"Calinski-Harabasz needs 2 <= k < n (k={k}, n={n})")
    cents, counts = _centroids(x, lab, k)
    grand = x.mean(axis=0)
    # per-cluster terms are summed in sorted order so renaming labels is exact
    between = float(np.sort(counts * ((cents - grand) ** 2).sum(axis=1)).sum())
    within = float(((x - cents[lab]) ** 2).sum())
    if within == 0.0:
        return math.inf
    return (between / (k - 1)) / (within / (n - k))


def davies_bouldin(data, labels) -> float:
    x, lab, k = _prepare(data, labels)
    if k < 2:
        raise UndefinedMetricError(f"Davies-Bouldin needs at least 2 clusters (got {k})")
    cents, counts = _centroids(x, lab, k)
    dist_to_cent = np.sqrt(((x - cents[lab]) ** 2).sum(axis=1))
    spread = np.bincount(lab, weights=dist_to_cent, minlength=k) / counts
    cdist = _distance.pairwise(cents, cents)
    num = spread[:, None] + spread[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(num == 0, 0.0, np.where(cdist == 0, np.inf, num / cdist))
    np.fill_diagonal(ratio, -np.inf)
    return float(np.sort(ratio.max(axis=1)).sum() / k)


def score_all(data, labels) -> ValidationScores:
    x, lab, k = _prepare(data, labels)
    return ValidationScores(
        silhouette(x, lab),
        calinski_harabasz(x, lab),
        davies_bouldin(x, lab),
        x.shape[0],
    )


def select_kmeans_k(data, k_min: int = 2, k_max: int = 10, seed: int = 0):
    """Fit K-means for every k in range and keep the best silhouette (ties -> smaller k)."""
    x = as_matrix(data)
    n = x.shape[0]
    if not (2 <= k_min <= k_max <= n - 1):
        raise ParameterError(f"need 2 <= k_min <= k_max <= n-1 (k_min={k_min}, k_max={k_max}, n={n})")
    sweep = []
    best_k, best = None, -math.inf
    for k in range(k_min, k_max + 1):
        _, assignment = kmeans_fit(x, k, seed=seed)
        sil = silhouette(x, assignment)
        sweep.append((k, sil))
        if sil > best:
            best_k, best = k, sil
    return best_k, sweep


def select_dbscan_params(data, eps_grid, minpts_grid, max_noise_fraction=None):
    """Exhaustive (eps, minPts) search maximising silhouette over non-noise rows.

    Settings that give fewer than two clusters are skipped, as are settings whose
    noise share exceeds ``max_noise_fraction`` when that is given. Ties prefer
    smaller eps, then smaller minPts.
    """
    x = as_matrix(data)
    eps_grid = sorted(float(e) for e in eps_grid)
    minpts_grid = sorted(int(p) for p in minpts_grid)
    if not eps_grid or not minpts_grid:
        raise ParameterError("eps and minPts grids must be non-empty")
    best_params, best = None, -math.inf
    for eps in eps_grid:
        neighbors = radius_neighbors(x, eps)
        for min_pts in minpts_grid:
            params = DbscanParams(eps, min_pts)
            assignment = dbscan_fit(x, params, neighbors=neighbors)
            if assignment.n_clusters < 2 or (x.shape[0] - assignment.noise_count) < 2:
                continue
            if max_noise_fraction is not None and assignment.noise_count > max_noise_fraction * x.shape[0]:
                continue
            sil = silhouette(x, assignment)
            if sil > best:
                best_params, best = params, sil
    if best_params is None:
        raise NoValidParamsError("no (eps, minPts) pair in the grid produced at least two clusters")
    return best_params, best
