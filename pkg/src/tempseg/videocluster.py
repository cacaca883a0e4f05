"""Within-video clustering.

Builds a frame-to-frame similarity matrix as the product of a spatial
Gaussian kernel (locally scaled: sigma_i = distance to the m-th nearest
neighbor) and a temporal Gaussian kernel over relative timestamps, then cuts
it into K clusters via the spectral relaxation of the normalized cut
(symmetric normalized Laplacian, row-normalized eigenvector embedding,
k-means on the rows).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .embednet import EmbeddedSequence

SIGMA_FLOOR = 1e-12


@dataclass
class SimilarityConfig:
    m: int = 9                       # local-scaling neighbor index
    sigma_prime: float = 1.0 / 6.0   # temporal scale; sigma_tmp^2 = 2 sigma'^2
    fixed_sigma_spat: Optional[float] = None
    temporal_kernel_enabled: bool = True

    def validate(self) -> None:
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.sigma_prime <= 0:
            raise ValueError("sigma_prime must be > 0")
        if self.fixed_sigma_spat is not None and self.fixed_sigma_spat <= 0:
            raise ValueError("fixed_sigma_spat must be > 0")


@dataclass
class WithinVideoClusters:
    video_id: str
    labels: np.ndarray           # T ints in 0..K-1, every label present
    centroids: np.ndarray        # K x E mean embedding per cluster
    mean_timestamps: np.ndarray  # K mean true timestamp per cluster
    n_clusters: int


def _pairwise_sq_dists(x: np.ndarray) -> np.ndarray:
    sq = np.sum(x * x, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.clip(d2, 0.0, None, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def similarity_matrix(emb: EmbeddedSequence, cfg: SimilarityConfig) -> np.ndarray:
    """Symmetric T x T similarity with unit diagonal and entries in [0, 1]."""
    cfg.validate()
    e = np.asarray(emb.embedding, dtype=np.float64)
    s = np.asarray(emb.true_timestamps, dtype=np.float64)
    T = e.shape[0]
    if T < 2:
        raise ValueError("similarity needs at least 2 frames")
    if cfg.fixed_sigma_spat is None and cfg.m >= T:
        raise ValueError(f"local scaling needs m < T, got m={cfg.m}, T={T}")

    d2 = _pairwise_sq_dists(e)
    if cfg.fixed_sigma_spat is not None:
        denom = cfg.fixed_sigma_spat ** 2
    else:
        # sigma_i = distance to the m-th nearest neighbor (self excluded)
        part = np.sort(d2, axis=1)[:, cfg.m]
        sigma = np.maximum(np.sqrt(part), SIGMA_FLOOR)
        denom = sigma[:, None] * sigma[None, :]
    g = np.exp(-d2 / denom)
    if cfg.temporal_kernel_enabled:
        ds = s[:, None] - s[None, :]
        g = g * np.exp(-(ds * ds) / (2.0 * cfg.sigma_prime ** 2))
    np.fill_diagonal(g, 1.0)
    return g


def kmeans(points: np.ndarray, k: int, seed, n_restarts: int = 10,
           max_iter: int = 300):
    """Lloyd's algorithm with k-means++ seeding.

    Runs n_restarts inits and keeps the lowest within-cluster sum of squared
    distances.  Nearest-centroid ties break toward the lowest centroid index;
    an empty cluster steals the point farthest from its assigned centroid
    (among clusters that keep at least one member).  Returns (labels, centroids).
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if k > n:
        raise ValueError(f"k={k} exceeds {n} points")
    if k < 1:
        raise ValueError("k must be >= 1")

    base = _seed_list(seed)
    best = None
    for restart in range(n_restarts):
        rng = np.random.default_rng(base + [restart])
        labels, centroids, inertia = _kmeans_once(points, k, rng, max_iter)
        if best is None or inertia < best[2]:
            best = (labels, centroids, inertia)
    return best[0], best[1]


def _seed_list(seed) -> list:
    if isinstance(seed, (list, tuple)):
        return list(seed)
    return [int(seed)]


def _kmeans_pp_init(points, k, rng):
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    idx = int(rng.integers(n))
    centroids[0] = points[idx]
    d2 = np.sum((points - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centroids[j] = points[idx]
        d2 = np.minimum(d2, np.sum((points - centroids[j]) ** 2, axis=1))
    return centroids


def _assign(points, centroids):
    d2 = (np.sum(points * points, axis=1)[:, None]
          + np.sum(centroids * centroids, axis=1)[None, :]
          - 2.0 * points @ centroids.T)
    return np.argmin(d2, axis=1), d2


def _kmeans_once(points, k, rng, max_iter):
    n = points.shape[0]
    centroids = _kmeans_pp_init(points, k, rng)
    labels = np.full(n, -1)
    for _ in range(max_iter):
        new_labels, d2 = _assign(points, centroids)
        # repair empty clusters: steal the point farthest from its centroid
        for j in range(k):
            if not np.any(new_labels == j):
                dist_own = d2[np.arange(n), new_labels]
                candidates = np.flatnonzero(
                    np.bincount(new_labels, minlength=k)[new_labels] > 1)
                if candidates.size == 0:
                    candidates = np.arange(n)
                steal = candidates[np.argmax(dist_own[candidates])]
                new_labels[steal] = j
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            centroids[j] = points[labels == j].mean(axis=0)
    _, d2 = _assign(points, centroids)
    inertia = float(d2[np.arange(n), labels].sum())
    return labels, centroids, inertia


def spectral_cluster(g: np.ndarray, k: int, seed) -> np.ndarray:
    """Normalized-cut relaxation: Laplacian eigenvectors + k-means on rows."""
    g = np.asarray(g, dtype=np.float64)
    T = g.shape[0]
    if g.ndim != 2 or g.shape[1] != T:
        raise ValueError(f"similarity must be square, got shape {g.shape}")
    if k > T:
        raise ValueError(f"k={k} exceeds {T} frames")
    deg = g.sum(axis=1)
    if np.any(deg <= 0.0):
        raise ValueError("similarity matrix must have positive row sums")
    inv_sqrt = 1.0 / np.sqrt(deg)
    lap = -(inv_sqrt[:, None] * g * inv_sqrt[None, :])
    lap[np.diag_indices(T)] += 1.0
    _, eigvecs = np.linalg.eigh(lap)
    rows = eigvecs[:, :k]
    norms = np.linalg.norm(rows, axis=1)
    safe = norms > 0.0
    rows = np.where(safe[:, None], rows / np.where(safe, norms, 1.0)[:, None], 0.0)
    labels, _ = kmeans(rows, k, seed)
    return labels


def within_video_clustering(emb: EmbeddedSequence, k: int,
                            cfg: SimilarityConfig, seed,
                            max_frames: int = 2000) -> WithinVideoClusters:
    """Similarity + spectral clustering for one video, with centroid stats.

    Videos longer than max_frames are strided-downsampled for the O(T^3)
    eigensolve; skipped frames take the label of the nearest retained frame.
    """
    e = np.asarray(emb.embedding, dtype=np.float64)
    s = np.asarray(emb.true_timestamps, dtype=np.float64)
    T = e.shape[0]
    if T < k:
        raise ValueError(f"video '{emb.video_id}' has T={T} < K={k}")

    if T > max_frames:
        stride = int(np.ceil(T / max_frames))
        retained = np.arange(0, T, stride)
        sub = EmbeddedSequence(video_id=emb.video_id, embedding=e[retained],
                               true_timestamps=s[retained])
        g = similarity_matrix(sub, cfg)
        sub_labels = spectral_cluster(g, k, seed)
        # nearest retained frame in time; equidistant ties -> earlier frame
        t = np.arange(T)
        right = np.clip(np.searchsorted(retained, t), 0, len(retained) - 1)
        left = np.clip(right - 1, 0, len(retained) - 1)
        take_left = np.abs(retained[left] - t) <= np.abs(retained[right] - t)
        labels = sub_labels[np.where(take_left, left, right)]
    else:
        g = similarity_matrix(emb, cfg)
        labels = spectral_cluster(g, k, seed)

    centroids = np.vstack([e[labels == j].mean(axis=0) for j in range(k)])
    mean_ts = np.array([s[labels == j].mean() for j in range(k)])
    return WithinVideoClusters(video_id=emb.video_id, labels=labels,
                               centroids=centroids, mean_timestamps=mean_ts,
                               n_clusters=k)


def dump_similarity_text(g: np.ndarray, path) -> None:
    """Debug dump: similarity matrix as a plain text matrix."""
    with open(path, "w") as fh:
        for row in np.asarray(g):
            fh.write(" ".join("%.9g" % v for v in row) + "\n")
