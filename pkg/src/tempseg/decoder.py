"""Order-constrained decoding of each video into K coherent segments.

A Gaussian is fit per global cluster; each video is decoded by Viterbi over
its per-frame log-likelihood grid under a binary transition rule: the label
sequence must visit the video's K ordered clusters exactly once each, only
ever staying or advancing.  Cluster orders come from mean timestamps, either
per video or pooled over the corpus.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .embednet import EmbeddedSequence
from .globalassign import GlobalAssignment
from .videocluster import WithinVideoClusters

VAR_FLOOR = 1e-6
ORDER_MODES = ("video_wise", "uniform")


@dataclass
class GaussianModel:
    means: np.ndarray                       # K x E
    variances: Optional[np.ndarray]         # K x E diagonal (diag mode)
    covariances: Optional[np.ndarray] = None  # K x E x E (full mode)

    @property
    def n_clusters(self) -> int:
        return self.means.shape[0]


@dataclass
class OrderConstraint:
    video_id: str
    order: list[int]        # permutation of global-cluster ids
    mode: str

    def validate(self, k: int) -> None:
        if sorted(self.order) != list(range(k)):
            raise ValueError(
                f"order for '{self.video_id}' is not a permutation of 0..{k-1}")


@dataclass
class SegmentationResult:
    video_ids: list[str]
    labels: list[np.ndarray]      # per video, T global-cluster ids
    log_scores: list[float]       # per video, log-posterior of decoded path


def collect_global_clusters(embeddings: list[EmbeddedSequence],
                            clusters: list[WithinVideoClusters],
                            assignment: GlobalAssignment) -> list[np.ndarray]:
    """Frame embeddings grouped by global cluster id."""
    k = clusters[0].n_clusters
    gmap = assignment.global_of(len(clusters), k)
    groups: list[list[np.ndarray]] = [[] for _ in range(k)]
    for v, (emb, wvc) in enumerate(zip(embeddings, clusters)):
        for j in range(k):
            gid = gmap[v, j]
            groups[gid].append(emb.embedding[wvc.labels == j])
    return [np.concatenate(g, axis=0) if g else np.empty((0, 1))
            for g in groups]


def fit_gaussians(groups: list[np.ndarray], mode: str = "diag",
                  var_floor: float = VAR_FLOOR) -> GaussianModel:
    """Maximum-likelihood Gaussian per global cluster, variances floored."""
    for gid, pts in enumerate(groups):
        if pts.shape[0] == 0:
            raise ValueError(f"global cluster {gid} is empty")
    means = np.vstack([pts.mean(axis=0) for pts in groups])
    if mode == "diag":
        variances = np.vstack([
            np.maximum(pts.var(axis=0), var_floor) for pts in groups])
        return GaussianModel(means=means, variances=variances)
    if mode == "full":
        e = means.shape[1]
        covs = np.stack([
            np.cov(pts, rowvar=False, bias=True).reshape(e, e)
            + var_floor * np.eye(e)
            for pts in groups])
        return GaussianModel(means=means, variances=None, covariances=covs)
    raise ValueError(f"unknown covariance mode '{mode}'")


def loglik_grid(model: GaussianModel, emb: EmbeddedSequence) -> np.ndarray:
    """T x K matrix of log Gaussian densities of each frame under each cluster."""
    x = np.asarray(emb.embedding, dtype=np.float64)
    k, e = model.means.shape
    if x.shape[1] != e:
        raise ValueError(
            f"embedding dim {x.shape[1]} does not match model dim {e}")
    if model.variances is not None:
        log_det = np.sum(np.log(model.variances), axis=1)            # (K,)
        diff = x[:, None, :] - model.means[None, :, :]               # T x K x E
        maha = np.sum(diff * diff / model.variances[None, :, :], axis=2)
        return -0.5 * (e * np.log(2.0 * np.pi) + log_det[None, :] + maha)
    out = np.empty((x.shape[0], k))
    for j in range(k):
        chol = np.linalg.cholesky(model.covariances[j])
        log_det = 2.0 * np.sum(np.log(np.diag(chol)))
        sol = np.linalg.solve(chol, (x - model.means[j]).T)
        out[:, j] = -0.5 * (e * np.log(2.0 * np.pi) + log_det
                            + np.sum(sol * sol, axis=0))
    return out


def derive_order(clusters: WithinVideoClusters, assignment: GlobalAssignment,
                 mode: str,
                 all_clusters: list[WithinVideoClusters]) -> OrderConstraint:
    """Temporal order of global clusters for one video.

    video_wise: the video's own clusters sorted by mean timestamp, mapped to
    their global ids.  uniform: one shared order by pooled (frame-weighted)
    mean timestamp per global cluster.  all_clusters is the full corpus the
    assignment was computed over (video indices resolve against it); timestamp
    ties break toward the lower global-cluster id.
    """
    if mode not in ORDER_MODES:
        raise ValueError(f"unknown order mode '{mode}'")
    k = clusters.n_clusters
    index = {c.video_id: i for i, c in enumerate(all_clusters)}
    gmap = assignment.global_of(len(all_clusters), k)
    if mode == "video_wise":
        v = index[clusters.video_id]
        items = [(clusters.mean_timestamps[j], int(gmap[v, j]))
                 for j in range(k)]
        order = [gid for _, gid in sorted(items)]
        return OrderConstraint(video_id=clusters.video_id, order=order,
                               mode=mode)
    ts_sum = np.zeros(k)
    count = np.zeros(k)
    for v, c in enumerate(all_clusters):
        sizes = np.bincount(c.labels, minlength=k)
        for j in range(k):
            gid = gmap[v, j]
            ts_sum[gid] += c.mean_timestamps[j] * sizes[j]
            count[gid] += sizes[j]
    pooled = ts_sum / count
    order = [gid for _, gid in sorted((pooled[g], g) for g in range(k))]
    return OrderConstraint(video_id=clusters.video_id, order=order, mode=mode)


def viterbi_decode(grid: np.ndarray, order: OrderConstraint):
    """Best admissible label sequence for one video.

    Maximizes the summed grid scores over sequences that traverse the order's
    K clusters in sequence (stay or advance, every cluster visited).  Returns
    (labels as global ids, log score); each DP cell breaks predecessor ties
    toward "stay", which is deterministic.
    """
    grid = np.asarray(grid, dtype=np.float64)
    T, k = grid.shape
    order.validate(k)
    if T < k:
        raise ValueError(f"T={T} < K={k}: every cluster needs a frame")
    reordered = np.ascontiguousarray(grid[:, order.order])
    positions, score = _kernels.viterbi_path(reordered)
    labels = np.asarray(order.order, dtype=np.int64)[positions]
    return labels, float(score)


def decode_all(embeddings: list[EmbeddedSequence], model: GaussianModel,
               orders: dict[str, OrderConstraint]) -> SegmentationResult:
    """Viterbi-decode every video against the fitted Gaussians."""
    video_ids, labels, scores = [], [], []
    for emb in embeddings:
        grid = loglik_grid(model, emb)
        lab, score = viterbi_decode(grid, orders[emb.video_id])
        video_ids.append(emb.video_id)
        labels.append(lab)
        scores.append(score)
    return SegmentationResult(video_ids=video_ids, labels=labels,
                              log_scores=scores)


def format_segments(result: SegmentationResult) -> str:
    """One line of T space-separated global-cluster ids per video."""
    return "".join(" ".join(str(int(v)) for v in lab) + "\n"
                   for lab in result.labels)


def parse_segments(text: str) -> list[np.ndarray]:
    return [np.array([int(v) for v in line.split()], dtype=np.int64)
            for line in text.splitlines() if line.strip()]
