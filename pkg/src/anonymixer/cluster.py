"""K-means (k-means++ seeding), DBSCAN and Ward agglomerative clustering."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import _distance
from .dataio import NOISE, Dataset
from .errors import ContractError, ParameterError

log = logging.getLogger(__name__)


def as_matrix(data) -> np.ndarray:
    if isinstance(data, Dataset):
        return data.values
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2:
        raise ParameterError(f"expected a 2-D matrix, got shape {x.shape}")
    return x


@dataclass(frozen=True, eq=False)
class ClusterAssignment:
    labels: np.ndarray
    n_clusters: int
    noise_allowed: bool = False

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).copy()
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        if labels.size:
            if labels.min() < NOISE or labels.max() >= self.n_clusters:
                raise ContractError("labels outside {0..n_clusters-1} and -1")
            if not self.noise_allowed and (labels == NOISE).any():
                raise ContractError("noise marker present but noise not allowed")
        present = np.unique(labels[labels >= 0])
        if present.size != self.n_clusters:
            raise ContractError(f"{self.n_clusters} clusters declared but {present.size} occur")

    @property
    def noise_count(self) -> int:
        return int((self.labels == NOISE).sum())

    @classmethod
    def from_labels(cls, labels, noise_allowed=None) -> "ClusterAssignment":
        """Relabel arbitrary integer ids to 0..k-1 by first appearance; -1 stays noise."""
        labels = np.asarray(labels, dtype=np.int64)
        out = np.full(labels.shape, NOISE, dtype=np.int64)
        mapping = {}
        for i, lab in enumerate(labels):
            if lab == NOISE:
                continue
            if lab not in mapping:
                mapping[lab] = len(mapping)
            out[i] = mapping[lab]
        if noise_allowed is None:
            noise_allowed = bool((labels == NOISE).any())
        return cls(out, len(mapping), noise_allowed)


# ---------------------------------------------------------------- k-means


@dataclass(frozen=True, eq=False)
class KMeansModel:
    centroids: np.ndarray
    inertia: float
    iterations_run: int
    inertia_trace: list = field(default_factory=list)


def _assign(x, centroids):
    d2 = np.empty((x.shape[0], centroids.shape[0]))
    block = _distance.block_size_for(centroids.shape[0], x.shape[1])
    for s, e in _distance.row_blocks(x.shape[0], block):
        d2[s:e] = _distance.pairwise_sq(x[s:e], centroids)
    labels = d2.argmin(axis=1)
    return labels, d2[np.arange(x.shape[0]), labels]


def _kmeanspp(x, k, rng):
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    closest = _distance.pairwise_sq(x, x[chosen[0]][None, :])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            # all remaining points coincide with a centre; pick any unused row
            free = np.setdiff1d(np.arange(n), chosen)
            idx = int(free[rng.integers(free.size)])
        chosen.append(idx)
        closest = np.minimum(closest, _distance.pairwise_sq(x, x[idx][None, :])[:, 0])
    return x[chosen].copy()


def _fill_empty(x, labels, d2, centroids, k):
    """Move the point farthest from its centroid into each empty cluster."""
    for j in range(k):
        if (labels == j).any():
            continue
        counts = np.bincount(labels, minlength=k)
        movable = counts[labels] > 1
        cand = np.where(movable, d2, -1.0)
        i = int(np.argmax(cand))
        centroids[j] = x[i]
        labels[i] = j
        d2[i] = 0.0
    return labels, d2


def kmeans_fit(data, k: int, seed: int = 0, max_iter: int = 300, tol: float = 1e-8):
    """Lloyd iterations from a single k-means++ initialisation.

    Stops when the largest centroid move is below ``tol``. The returned labels are
    the nearest-centroid assignment for the returned centroids.
    """
    x = as_matrix(data)
    n = x.shape[0]
    if k < 1 or k > n:
        raise ParameterError(f"k must satisfy 1 <= k <= n (k={k}, n={n})")
    rng = np.random.default_rng(seed)
    centroids = _kmeanspp(x, k, rng)
    trace = []
    it = 0
    for it in range(1, max_iter + 1):
        labels, d2 = _assign(x, centroids)
        labels, d2 = _fill_empty(x, labels, d2, centroids, k)
        trace.append(float(d2.sum()))
        new = np.zeros_like(centroids)
        np.add.at(new, labels, x)
        new /= np.bincount(labels, minlength=k)[:, None]
        shift = float(np.sqrt(((new - centroids) ** 2).sum(axis=1)).max())
        centroids = new
        if shift < tol:
            break
    labels, d2 = _assign(x, centroids)
    labels, d2 = _fill_empty(x, labels, d2, centroids, k)
    inertia = float(d2.sum())
    trace.append(inertia)
    model = KMeansModel(centroids, inertia, it, trace)
    return model, ClusterAssignment(labels, k, False)


# ---------------------------------------------------------------- DBSCAN


@dataclass(frozen=True)
class DbscanParams:
    eps: float
    min_pts: int

    def __post_init__(self):
        if not self.eps > 0:
            raise ParameterError(f"eps must be > 0, got {self.eps}")
        if self.min_pts < 1:
            raise ParameterError(f"min_pts must be >= 1, got {self.min_pts}")


def radius_neighbors(x, eps):
    """Index arrays of all rows within ``eps`` (inclusive, self included)."""
    n = x.shape[0]
    eps2 = eps * eps
    out = []
    block = _distance.block_size_for(n, x.shape[1])
    for s, e in _distance.row_blocks(n, block):
        d2 = _distance.pairwise_sq(x[s:e], x)
        for row in d2:
            out.append(np.flatnonzero(row <= eps2))
    return out


def dbscan_fit(data, params: DbscanParams, neighbors=None) -> ClusterAssignment:
    """Density clustering; rows reachable from no core point are labelled -1.

    Clusters are numbered in the order their first core point appears, and a
    border point joins the first cluster that reaches it.
    """
    x = as_matrix(data)
    n = x.shape[0]
    if neighbors is None:
        neighbors = radius_neighbors(x, params.eps)
    core = np.fromiter((len(nb) >= params.min_pts for nb in neighbors), bool, n)
    labels = np.full(n, NOISE, dtype=np.int64)
    cid = 0
    for i in range(n):
        if labels[i] != NOISE or not core[i]:
            continue
        labels[i] = cid
        queue = deque([i])
        while queue:
            p = queue.popleft()
            for q in neighbors[p]:
                if labels[q] == NOISE:
                    labels[q] = cid
                    if core[q]:
                        queue.append(q)
        cid += 1
    return ClusterAssignment(labels, cid, True)


# ---------------------------------------------------------------- Ward


@dataclass(frozen=True, eq=False)
class LinkageTree:
    """``merges[i] = (cluster_a, cluster_b, ward_cost, new_size)``; merged ids are n + i."""

    merges: list
    n_leaves: int

    def cut(self, k: int) -> np.ndarray:
        n = self.n_leaves
        if not 1 <= k <= n:
            raise ParameterError(f"k must satisfy 1 <= k <= n (k={k}, n={n})")
        parent = list(range(2 * n - 1))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for i, (a, b, _, _) in enumerate(self.merges[: n - k]):
            parent[find(a)] = n + i
            parent[find(b)] = n + i
        roots = np.array([find(i) for i in range(n)])
        return ClusterAssignment.from_labels(roots, noise_allowed=False).labels


def ward_linkage(data) -> LinkageTree:
    """Naive O(n^3) agglomeration on the Ward merge cost.

    The cost of merging A and B is the growth in total within-cluster sum of
    squares, |A||B|/(|A|+|B|) * |c_A - c_B|^2, maintained by the Lance-Williams
    recurrence. Exact ties go to the smallest (id_a, id_b) pair.
    """
    x = as_matrix(data)
    n = x.shape[0]
    if n == 0:
        raise ParameterError("cannot cluster an empty dataset")
    dist = np.empty((n, n))
    block = _distance.block_size_for(n, x.shape[1])
    for s, e in _distance.row_blocks(n, block):
        dist[s:e] = 0.5 * _distance.pairwise_sq(x[s:e], x)
    np.fill_diagonal(dist, np.inf)
    size = np.ones(n)
    ids = np.arange(n)
    merges = []
    for step in range(n - 1):
        best = dist.min()
        ii, jj = np.nonzero(dist == best)
        upper = ii < jj
        ii, jj = ii[upper], jj[upper]
        pairs = sorted((min(ids[a], ids[b]), max(ids[a], ids[b]), a, b) for a, b in zip(ii, jj))
        id_a, id_b, i, j = pairs[0]
        ni, nj = size[i], size[j]
        nk = size
        dij = dist[i, j]
        new = ((nk + ni) * dist[i] + (nk + nj) * dist[j] - nk * dij) / (nk + ni + nj)
        keep, drop = min(i, j), max(i, j)
        dist[keep, :] = new
        dist[:, keep] = new
        dist[drop, :] = np.inf
        dist[:, drop] = np.inf
        dist[keep, keep] = np.inf
        size[keep] = ni + nj
        size[drop] = 0
        ids[keep] = n + step
        merges.append((int(id_a), int(id_b), float(best), int(ni + nj)))
    return LinkageTree(merges, n)


def agglomerative_fit(data, k: int):
    x = as_matrix(data)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ParameterError(f"k must satisfy 1 <= k <= n (k={k}, n={n})")
    tree = ward_linkage(x)
    return tree, ClusterAssignment(tree.cut(k), k, False)
