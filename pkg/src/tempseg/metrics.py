"""Evaluation protocol: cluster-to-class matching and segmentation scores.

Cluster ids are matched to ground-truth classes by Hungarian matching on the
frame-overlap contingency, either pooled over all videos (one mapping per
dataset, "global") or per video ("local").  Scores: MoF (frame accuracy),
class-wise IoU, segment-level F1, and segmental edit (normalized Levenshtein
over segment-label sequences).  Frames whose ground truth carries the ignore
label are excluded from matching and scoring; clusters left without a class
map to a reserved no-class id and never count as correct.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UndefinedMetricError
from .globalassign import hungarian

IGNORE_LABEL = -1
NO_CLASS = -2
SCOPES = ("global", "local")


@dataclass
class MetricsReport:
    mof: float
    ciou: float
    f1: float
    edit: float
    scope: str
    n_videos: int
    ignore_label: int = IGNORE_LABEL
    per_video: list[tuple[str, float, float, float]] = field(default_factory=list)


def _as_arrays(preds, gts):
    preds = [np.asarray(p, dtype=np.int64) for p in preds]
    gts = [np.asarray(g, dtype=np.int64) for g in gts]
    if len(preds) != len(gts) or not preds:
        raise ValueError("need the same nonzero number of pred/gt videos")
    for i, (p, g) in enumerate(zip(preds, gts)):
        if p.shape != g.shape:
            raise ValueError(f"video {i}: pred length {p.shape} != gt {g.shape}")
    return preds, gts


def _contingency(preds, gts, ignore_label):
    clusters = sorted(set(np.concatenate(preds).tolist()))
    classes = sorted({v for g in gts for v in g.tolist() if v != ignore_label})
    if not classes:
        raise UndefinedMetricError("every frame is ignore-labeled")
    table = np.zeros((len(clusters), len(classes)))
    cl_index = {c: i for i, c in enumerate(clusters)}
    cls_index = {c: i for i, c in enumerate(classes)}
    for p, g in zip(preds, gts):
        keep = g != ignore_label
        for pv, gv in zip(p[keep].tolist(), g[keep].tolist()):
            table[cl_index[pv], cls_index[gv]] += 1.0
    return clusters, classes, table


def _overlap_mapping(clusters, classes, table):
    """Hungarian on -overlap; unmatched clusters map to NO_CLASS."""
    size = max(len(clusters), len(classes))
    cost = np.zeros((size, size))
    cost[:len(clusters), :len(classes)] = -table
    pi = hungarian(cost)
    mapping = {}
    for i, cluster in enumerate(clusters):
        j = int(pi[i])
        mapping[cluster] = classes[j] if j < len(classes) else NO_CLASS
    return mapping


def match_labels(preds, gts, scope: str = "global",
                 ignore_label: int = IGNORE_LABEL):
    """Cluster-id -> class-id mapping(s) maximizing total frame overlap.

    Returns one dict for scope='global', a list of per-video dicts for
    scope='local'.
    """
    if scope not in SCOPES:
        raise ValueError(f"unknown matching scope '{scope}'")
    preds, gts = _as_arrays(preds, gts)
    if scope == "global":
        return _overlap_mapping(*_contingency(preds, gts, ignore_label))
    return [_overlap_mapping(*_contingency([p], [g], ignore_label))
            for p, g in zip(preds, gts)]


def apply_mapping(pred, mapping):
    return np.array([mapping.get(int(v), NO_CLASS) for v in pred],
                    dtype=np.int64)


def map_predictions(preds, gts, scope: str = "global",
                    ignore_label: int = IGNORE_LABEL):
    """Match then translate every prediction into gt class ids."""
    preds, gts = _as_arrays(preds, gts)
    mappings = match_labels(preds, gts, scope, ignore_label)
    if scope == "global":
        return [apply_mapping(p, mappings) for p in preds]
    return [apply_mapping(p, m) for p, m in zip(preds, mappings)]


def mof(preds_mapped, gts, ignore_label: int = IGNORE_LABEL) -> float:
    """Percentage of correctly labeled frames, pooled over all videos."""
    preds_mapped, gts = _as_arrays(preds_mapped, gts)
    correct = 0
    counted = 0
    for p, g in zip(preds_mapped, gts):
        keep = g != ignore_label
        counted += int(keep.sum())
        correct += int((p[keep] == g[keep]).sum())
    if counted == 0:
        raise UndefinedMetricError("no counted frames: every frame ignored")
    return 100.0 * correct / counted


def ciou(preds_mapped, gts, ignore_label: int = IGNORE_LABEL) -> float:
    """Mean over gt classes of pooled intersection-over-union, as percent."""
    preds_mapped, gts = _as_arrays(preds_mapped, gts)
    classes = sorted({v for g in gts for v in g.tolist() if v != ignore_label})
    if not classes:
        raise UndefinedMetricError("every frame is ignore-labeled")
    scores = []
    for c in classes:
        inter = 0
        union = 0
        for p, g in zip(preds_mapped, gts):
            keep = g != ignore_label
            pc = p[keep] == c
            gc = g[keep] == c
            inter += int((pc & gc).sum())
            union += int((pc | gc).sum())
        scores.append(inter / union if union else 0.0)
    return 100.0 * float(np.mean(scores))


def _segments(labels):
    """Maximal constant runs as (label, start, end) with end exclusive."""
    segs = []
    start = 0
    for t in range(1, len(labels) + 1):
        if t == len(labels) or labels[t] != labels[start]:
            segs.append((int(labels[start]), start, t))
            start = t
    return segs


def _drop_ignored(p, g, ignore_label):
    keep = g != ignore_label
    return p[keep], g[keep]


def _f1_video(pred, gt):
    pred_segs = _segments(pred)
    gt_segs = _segments(gt)
    # candidate = best-overlap gt segment of the segment's own label;
    # claims are greedy by descending overlap, one claim per gt segment
    candidates = []
    for si, (label, start, end) in enumerate(pred_segs):
        inside = gt[start:end] == label
        if inside.sum() * 2 <= (end - start):
            continue  # needs > 50% of its own frames correct
        best_gt, best_ov = None, 0
        for gi, (glabel, gstart, gend) in enumerate(gt_segs):
            if glabel != label:
                continue
            ov = max(0, min(end, gend) - max(start, gstart))
            if ov > best_ov:
                best_ov, best_gt = ov, gi
        if best_gt is not None:
            candidates.append((-best_ov, si, best_gt))
    claimed = set()
    tp = 0
    for _, si, gi in sorted(candidates):
        if gi in claimed:
            continue
        claimed.add(gi)
        tp += 1
    precision = tp / len(pred_segs) if pred_segs else 0.0
    recall = tp / len(gt_segs) if gt_segs else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def f1_score(preds_mapped, gts, ignore_label: int = IGNORE_LABEL) -> float:
    """Mean over videos of segment-level F1 (50%-purity criterion), as percent."""
    preds_mapped, gts = _as_arrays(preds_mapped, gts)
    scores = []
    for p, g in zip(preds_mapped, gts):
        p, g = _drop_ignored(p, g, ignore_label)
        if len(g) == 0:
            continue
        scores.append(_f1_video(p, g))
    if not scores:
        raise UndefinedMetricError("every frame is ignore-labeled")
    return 100.0 * float(np.mean(scores))


def _levenshtein(a, b):
    prev = list(range(len(b) + 1))
    for i, av in enumerate(a, 1):
        cur = [i]
        for j, bv in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1,
                           prev[j - 1] + (av != bv)))
        prev = cur
    return prev[len(b)]


def edit_score(preds_mapped, gts, ignore_label: int = IGNORE_LABEL) -> float:
    """Mean over videos of normalized segmental edit similarity, as percent."""
    preds_mapped, gts = _as_arrays(preds_mapped, gts)
    scores = []
    for p, g in zip(preds_mapped, gts):
        p, g = _drop_ignored(p, g, ignore_label)
        if len(g) == 0:
            continue
        pseq = [label for label, _, _ in _segments(p)]
        gseq = [label for label, _, _ in _segments(g)]
        dist = _levenshtein(pseq, gseq)
        scores.append(1.0 - dist / max(len(pseq), len(gseq)))
    if not scores:
        raise UndefinedMetricError("every frame is ignore-labeled")
    return 100.0 * float(np.mean(scores))


def evaluate(preds, gts, video_ids=None, scope: str = "global",
             ignore_label: int = IGNORE_LABEL) -> MetricsReport:
    """Match labels under the given scope and compute every metric."""
    preds, gts = _as_arrays(preds, gts)
    if video_ids is None:
        video_ids = [f"video_{i:03d}" for i in range(len(preds))]
    mapped = map_predictions(preds, gts, scope, ignore_label)
    per_video = []
    for vid, p, g in zip(video_ids, mapped, gts):
        keep = g != ignore_label
        v_mof = (100.0 * float((p[keep] == g[keep]).mean())
                 if keep.any() else float("nan"))
        v_f1 = 100.0 * _f1_video(*_drop_ignored(p, g, ignore_label)) \
            if keep.any() else float("nan")
        pseq = [l for l, _, _ in _segments(p[keep])]
        gseq = [l for l, _, _ in _segments(g[keep])]
        v_edit = (100.0 * (1.0 - _levenshtein(pseq, gseq)
                           / max(len(pseq), len(gseq)))
                  if keep.any() else float("nan"))
        per_video.append((vid, v_mof, v_f1, v_edit))
    return MetricsReport(
        mof=mof(mapped, gts, ignore_label),
        ciou=ciou(mapped, gts, ignore_label),
        f1=f1_score(mapped, gts, ignore_label),
        edit=edit_score(mapped, gts, ignore_label),
        scope=scope, n_videos=len(preds), ignore_label=ignore_label,
        per_video=per_video)


def format_report(report: MetricsReport) -> str:
    """Human-readable report with machine-readable key=value lines."""
    lines = [
        "segmentation scores (percent)",
        f"videos evaluated: {report.n_videos}",
        "",
        f"scope={report.scope}",
        f"mof={report.mof:.4f}",
        f"ciou={report.ciou:.4f}",
        f"f1={report.f1:.4f}",
        f"edit={report.edit:.4f}",
        "",
        "# per-video: id mof f1 edit",
    ]
    for vid, v_mof, v_f1, v_edit in report.per_video:
        lines.append(f"{vid} {v_mof:.4f} {v_f1:.4f} {v_edit:.4f}")
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> dict:
    """Key=value lines of a formatted report."""
    out = {}
    for line in text.splitlines():
        if "=" in line and not line.startswith("#"):
            key, value = line.split("=", 1)
            out[key] = value
    return out
