"""End-to-end orchestration with on-disk artifacts per stage.

Fixed output names under the run directory: model.bin, loss_history.txt,
embeddings.npz, clusters.txt, assignment.txt, segments.txt, report.txt.
Every stage can be re-run from the artifacts of the previous one.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import decoder as dec
from . import embednet as en
from . import globalassign as ga
from . import metrics as mt
from . import videocluster as vc
from .dataio import FeatureSequence, load_dataset
from .errors import DataError, StageError

MODEL_FILE = "model.bin"
HISTORY_FILE = "loss_history.txt"
EMBEDDINGS_FILE = "embeddings.npz"
CLUSTERS_FILE = "clusters.txt"
ASSIGNMENT_FILE = "assignment.txt"
SEGMENTS_FILE = "segments.txt"
REPORT_FILE = "report.txt"

STRATEGIES = ("multi_hub", "naive", "brute_force")


@dataclass
class PipelineConfig:
    manifest: str
    out_dir: str
    k: int = 4
    embed: en.EmbedConfig = field(default_factory=en.EmbedConfig)
    similarity: vc.SimilarityConfig = field(default_factory=vc.SimilarityConfig)
    strategy: str = "multi_hub"
    order_mode: str = "video_wise"
    scope: str = "global"
    covariance: str = "diag"
    seed: int = 0
    threads: int = 1

    def validate(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown assignment strategy '{self.strategy}'")
        if self.order_mode not in dec.ORDER_MODES:
            raise ValueError(f"unknown order mode '{self.order_mode}'")
        if self.scope not in mt.SCOPES:
            raise ValueError(f"unknown matching scope '{self.scope}'")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        self.embed.validate()
        self.similarity.validate()


def _map_videos(fn, items, threads):
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def save_embeddings(embs: list[en.EmbeddedSequence], path) -> None:
    payload = {"video_ids": np.array([e.video_id for e in embs])}
    for e in embs:
        payload[f"emb__{e.video_id}"] = e.embedding
        payload[f"ts__{e.video_id}"] = e.true_timestamps
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_embeddings(path) -> list[en.EmbeddedSequence]:
    try:
        with np.load(path, allow_pickle=False) as data:
            return [en.EmbeddedSequence(video_id=str(vid),
                                        embedding=data[f"emb__{vid}"],
                                        true_timestamps=data[f"ts__{vid}"])
                    for vid in data["video_ids"]]
    except Exception as exc:
        raise DataError(f"unreadable embeddings file {path}: {exc}") from exc


def format_clusters(clusters: list[vc.WithinVideoClusters]) -> str:
    lines = [f"K {clusters[0].n_clusters}"]
    for c in clusters:
        lines.append(c.video_id + " " + " ".join(str(int(v)) for v in c.labels))
    return "\n".join(lines) + "\n"


def parse_clusters(text: str, embs: list[en.EmbeddedSequence]
                   ) -> list[vc.WithinVideoClusters]:
    """Rebuild cluster structures (centroids, mean timestamps) from labels."""
    lines = [line for line in text.splitlines() if line.strip()]
    k = int(lines[0].split()[1])
    by_id = {e.video_id: e for e in embs}
    out = []
    for line in lines[1:]:
        parts = line.split()
        vid = parts[0]
        if vid not in by_id:
            raise DataError(f"clusters file references unknown video '{vid}'")
        labels = np.array([int(v) for v in parts[1:]], dtype=np.int64)
        emb = by_id[vid]
        if len(labels) != len(emb.embedding):
            raise DataError(f"clusters file length mismatch for '{vid}'")
        centroids = np.vstack([emb.embedding[labels == j].mean(axis=0)
                               for j in range(k)])
        mean_ts = np.array([emb.true_timestamps[labels == j].mean()
                            for j in range(k)])
        out.append(vc.WithinVideoClusters(video_id=vid, labels=labels,
                                          centroids=centroids,
                                          mean_timestamps=mean_ts,
                                          n_clusters=k))
    return out


def stage_train(dataset: list[FeatureSequence], cfg: PipelineConfig,
                out: Path) -> en.ModelParams:
    model, history = en.train(dataset, cfg.embed)
    en.save_model(model, out / MODEL_FILE)
    with open(out / HISTORY_FILE, "w") as fh:
        for epoch, value in enumerate(history):
            fh.write("%d %.9g\n" % (epoch, value))
    return model


def stage_embed(dataset, model, cfg: PipelineConfig,
                out: Path) -> list[en.EmbeddedSequence]:
    embs = _map_videos(lambda seq: en.embed(model, seq), dataset, cfg.threads)
    save_embeddings(embs, out / EMBEDDINGS_FILE)
    return embs


def stage_cluster(embs, cfg: PipelineConfig,
                  out: Path) -> list[vc.WithinVideoClusters]:
    def one(pair):
        index, emb = pair
        return vc.within_video_clustering(emb, cfg.k, cfg.similarity,
                                          seed=[cfg.seed, 3, index])
    clusters = _map_videos(one, list(enumerate(embs)), cfg.threads)
    (out / CLUSTERS_FILE).write_text(format_clusters(clusters))
    return clusters


def stage_assign(clusters, cfg: PipelineConfig, out: Path) -> ga.GlobalAssignment:
    table = np.stack([c.centroids for c in clusters])
    if cfg.strategy == "multi_hub":
        assignment = ga.multi_hub_assign(table)
    elif cfg.strategy == "naive":
        assignment = ga.naive_assign(clusters)
    else:
        assignment = ga.brute_force_assign(table)
    video_ids = [c.video_id for c in clusters]
    (out / ASSIGNMENT_FILE).write_text(ga.format_assignment(assignment,
                                                            video_ids))
    return assignment


def stage_decode(embs, clusters, assignment, cfg: PipelineConfig,
                 out: Path) -> dec.SegmentationResult:
    groups = dec.collect_global_clusters(embs, clusters, assignment)
    model = dec.fit_gaussians(groups, mode=cfg.covariance)
    orders = {c.video_id: dec.derive_order(c, assignment, cfg.order_mode,
                                           clusters)
              for c in clusters}

    def one(emb):
        grid = dec.loglik_grid(model, emb)
        return dec.viterbi_decode(grid, orders[emb.video_id])

    decoded = _map_videos(one, embs, cfg.threads)
    result = dec.SegmentationResult(
        video_ids=[e.video_id for e in embs],
        labels=[lab for lab, _ in decoded],
        log_scores=[score for _, score in decoded])
    (out / SEGMENTS_FILE).write_text(dec.format_segments(result))
    return result


def stage_eval(result: dec.SegmentationResult, dataset, cfg: PipelineConfig,
               out: Path) -> mt.MetricsReport:
    gts = []
    for seq in dataset:
        if seq.gt_labels is None:
            raise DataError(
                f"video '{seq.video_id}' has no ground-truth labels; "
                f"evaluation needs labeled data")
        gts.append(seq.gt_labels)
    report = mt.evaluate(result.labels, gts,
                         video_ids=result.video_ids, scope=cfg.scope)
    (out / REPORT_FILE).write_text(mt.format_report(report))
    return report


def run_pipeline(cfg: PipelineConfig) -> mt.MetricsReport:
    """train -> embed -> cluster -> assign -> decode -> eval, artifacts kept."""
    cfg.validate()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset = _stage("load", load_dataset, cfg.manifest)
    model = _stage("train", stage_train, dataset, cfg, out)
    embs = _stage("embed", stage_embed, dataset, model, cfg, out)
    clusters = _stage("cluster", stage_cluster, embs, cfg, out)
    assignment = _stage("assign", stage_assign, clusters, cfg, out)
    result = _stage("decode", stage_decode, embs, clusters, assignment, cfg, out)
    return _stage("eval", stage_eval, result, dataset, cfg, out)
