"""Cross-video grouping of the N x K within-video clusters into K cliques.

Each clique takes exactly one within-video cluster per video; the cost of an
assignment is the sum over cliques of all pairwise Euclidean distances between
member centroids.  Exact search is exponential, so the heuristic tries every
video as the "hub", bipartite-matches all other videos against it, and keeps
the cheapest induced partition.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations, product

import numpy as np

COST_RTOL = 1e-9


@dataclass
class GlobalAssignment:
    cliques: list[list[tuple[int, int]]]   # K cliques of (video, within-cluster)
    cost: float
    strategy: str

    def global_of(self, n_videos: int, k: int) -> np.ndarray:
        """Map (video, within-cluster) -> global cluster id."""
        out = np.full((n_videos, k), -1, dtype=np.int64)
        for gid, clique in enumerate(self.cliques):
            for video, within in clique:
                out[video, within] = gid
        return out


def _check_cost_matrix(cost) -> np.ndarray:
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError(f"cost matrix must be square, got shape {cost.shape}")
    if not np.isfinite(cost).all():
        raise ValueError("cost matrix has non-finite entries")
    return cost


def _solve_assignment(cost: np.ndarray) -> tuple[np.ndarray, float]:
    """O(n^3) shortest-augmenting-path solver with potentials.

    Returns (col_of_row, total_cost); no tie-break guarantees.
    """
    n = cost.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    # p[j] = row assigned to column j (1-based rows; 0 = none)
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    inf = np.inf
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0 != 0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    col_of_row = np.empty(n, dtype=np.int64)
    for j in range(1, n + 1):
        col_of_row[p[j] - 1] = j - 1
    total = float(cost[np.arange(n), col_of_row].sum())
    return col_of_row, total


def hungarian(cost) -> np.ndarray:
    """Minimum-cost perfect matching on a square cost matrix.

    Returns the permutation pi with pi[k] = column assigned to row k; among
    optimal permutations the lexicographically smallest one is returned
    (cost equality within relative tolerance 1e-9).
    """
    cost = _check_cost_matrix(cost)
    n = cost.shape[0]
    if n == 0:
        return np.empty(0, dtype=np.int64)
    _, best = _solve_assignment(cost)
    tol = COST_RTOL * max(1.0, abs(best))

    pi = np.empty(n, dtype=np.int64)
    rows = list(range(n))
    cols = list(range(n))
    remaining = best
    for i in rows:
        for idx, j in enumerate(cols):
            if len(cols) == 1:
                pi[i] = j
                cols.pop(idx)
                break
            sub = cost[np.ix_(range(i + 1, n), [c for c in cols if c != j])]
            _, sub_cost = _solve_assignment(sub)
            if cost[i, j] + sub_cost <= remaining + tol:
                pi[i] = j
                remaining -= cost[i, j]
                cols.pop(idx)
                break
        else:
            raise AssertionError("no column completes an optimal assignment")
    return pi


def assignment_cost(centroids: np.ndarray,
                    cliques: list[list[tuple[int, int]]]) -> float:
    """Sum over cliques of all pairwise centroid distances."""
    total = 0.0
    for clique in cliques:
        for a in range(len(clique)):
            va, ka = clique[a]
            for b in range(a + 1, len(clique)):
                vb, kb = clique[b]
                total += float(np.linalg.norm(centroids[va, ka]
                                              - centroids[vb, kb]))
    return total


def _pair_distances(centroids, va, vb):
    a, b = centroids[va], centroids[vb]
    d2 = (np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :]
          - 2.0 * a @ b.T)
    return np.sqrt(np.clip(d2, 0.0, None))


def multi_hub_assign(centroids: np.ndarray) -> GlobalAssignment:
    """Iterative multiple-hub heuristic over the centroid table (N x K x E).

    Every video once serves as the hub: its K clusters are bipartite-matched
    against each other video's clusters on centroid distances, each hub
    cluster plus everything matched to it forms a clique, and the hub whose
    induced partition has the lowest total cost wins (ties: lowest hub index).
    """
    centroids = np.asarray(centroids, dtype=np.float64)
    if centroids.ndim != 3:
        raise ValueError(f"centroid table must be N x K x E, got {centroids.shape}")
    if not np.isfinite(centroids).all():
        raise ValueError("centroid table has non-finite entries")
    n, k, _ = centroids.shape
    if n == 1:
        cliques = [[(0, j)] for j in range(k)]
        return GlobalAssignment(cliques=cliques, cost=0.0, strategy="multi_hub")

    best = None
    for hub in range(n):
        cliques = [[(hub, j)] for j in range(k)]
        for other in range(n):
            if other == hub:
                continue
            pi = hungarian(_pair_distances(centroids, hub, other))
            for j in range(k):
                cliques[j].append((other, int(pi[j])))
        cliques = [sorted(c) for c in cliques]
        cost = assignment_cost(centroids, cliques)
        if best is None or cost < best.cost:
            best = GlobalAssignment(cliques=cliques, cost=cost,
                                    strategy="multi_hub")
    return best


def naive_assign(clusters) -> GlobalAssignment:
    """Group the k-th earliest cluster (by mean timestamp) of every video.

    Mean-timestamp ties break toward the lower original cluster index.
    """
    k = clusters[0].n_clusters
    if any(c.n_clusters != k for c in clusters):
        raise ValueError("all videos must have the same number of clusters")
    cliques = [[] for _ in range(k)]
    for video, c in enumerate(clusters):
        order = sorted(range(k), key=lambda j: (c.mean_timestamps[j], j))
        for rank, j in enumerate(order):
            cliques[rank].append((video, j))
    centroids = np.stack([c.centroids for c in clusters])
    return GlobalAssignment(cliques=cliques,
                            cost=assignment_cost(centroids, cliques),
                            strategy="naive")


def brute_force_assign(centroids: np.ndarray,
                       max_videos: int = 4,
                       max_clusters: int = 4) -> GlobalAssignment:
    """Exhaustive oracle over all (K!)^(N-1) per-video permutations."""
    centroids = np.asarray(centroids, dtype=np.float64)
    n, k, _ = centroids.shape
    if n > max_videos or k > max_clusters:
        raise ValueError(
            f"instance too large for brute force: N={n} (max {max_videos}), "
            f"K={k} (max {max_clusters})")
    best_cliques = None
    best_cost = np.inf
    for perms in product(permutations(range(k)), repeat=n - 1):
        cliques = [[(0, j)] + [(v + 1, perms[v][j]) for v in range(n - 1)]
                   for j in range(k)]
        cost = assignment_cost(centroids, cliques)
        if cost < best_cost:
            best_cost = cost
            best_cliques = cliques
    return GlobalAssignment(cliques=best_cliques, cost=best_cost,
                            strategy="brute_force")


def format_assignment(assignment: GlobalAssignment, video_ids) -> str:
    """Text table of (video, within-cluster, global-cluster) plus total cost."""
    lines = ["# video within_cluster global_cluster"]
    triples = []
    for gid, clique in enumerate(assignment.cliques):
        for video, within in clique:
            triples.append((video, within, gid))
    for video, within, gid in sorted(triples):
        lines.append(f"{video_ids[video]} {within} {gid}")
    lines.append(f"strategy {assignment.strategy}")
    lines.append(f"cost {assignment.cost:.9g}")
    return "\n".join(lines) + "\n"


def parse_assignment(text: str, video_ids) -> GlobalAssignment:
    """Inverse of format_assignment."""
    index = {vid: i for i, vid in enumerate(video_ids)}
    cliques: dict[int, list] = {}
    cost = 0.0
    strategy = "unknown"
    for line in text.splitlines():
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "cost":
            cost = float(parts[1])
        elif parts[0] == "strategy":
            strategy = parts[1]
        else:
            vid, within, gid = parts[0], int(parts[1]), int(parts[2])
            cliques.setdefault(gid, []).append((index[vid], within))
    ordered = [sorted(cliques[g]) for g in sorted(cliques)]
    return GlobalAssignment(cliques=ordered, cost=cost, strategy=strategy)
