"""Dataset representation, text-format loading/saving, synthetic generator.

On-disk layout: a manifest file with one line per video,

    video_id  feature_path  [label_path]

paths relative to the manifest.  Feature files hold one frame per line with D
space-separated decimal floats (9 significant digits); label files hold one
integer per line, -1 meaning background/ignore.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DataError

FLOAT_FMT = "%.9g"


@dataclass
class FeatureSequence:
    video_id: str
    features: np.ndarray                     # T x D float64
    gt_labels: Optional[np.ndarray] = None   # T ints, -1 = ignore

    def validate(self) -> None:
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise DataError(
                f"video '{self.video_id}': features must be a T x D matrix "
                f"with T >= 1, got shape {self.features.shape}")
        if not np.isfinite(self.features).all():
            raise DataError(f"video '{self.video_id}': non-finite feature values")
        if self.gt_labels is not None and len(self.gt_labels) != len(self.features):
            raise DataError(
                f"video '{self.video_id}': {len(self.gt_labels)} labels for "
                f"{len(self.features)} frames")


@dataclass
class SynthConfig:
    n_videos: int = 10
    n_actions: int = 4
    dim: int = 16
    separation: float = 4.0
    noise_sigma: float = 0.4
    len_min: int = 20
    len_max: int = 40
    order_permutation_prob: float = 0.5
    seed: int = 0

    def validate(self) -> None:
        if self.n_videos < 1 or self.n_actions < 1 or self.dim < 1:
            raise ValueError("n_videos, n_actions, dim must be >= 1")
        if self.separation <= 0:
            raise ValueError("separation must be > 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not 1 <= self.len_min <= self.len_max:
            raise ValueError("need 1 <= len_min <= len_max")
        if not 0.0 <= self.order_permutation_prob <= 1.0:
            raise ValueError("order_permutation_prob must be in [0, 1]")


def _quantize(values: np.ndarray) -> np.ndarray:
    """Round-trip through the 9-significant-digit text representation."""
    flat = np.array([float(FLOAT_FMT % v) for v in values.ravel()])
    return flat.reshape(values.shape)


def _moving_average3(x: np.ndarray) -> np.ndarray:
    """Centered 3-frame moving average; edge windows shrink."""
    T = x.shape[0]
    out = np.empty_like(x)
    for t in range(T):
        lo, hi = max(0, t - 1), min(T, t + 2)
        out[t] = x[lo:hi].mean(axis=0)
    return out


def generate_synthetic(cfg: SynthConfig) -> list[FeatureSequence]:
    """Planted-ground-truth activity set.

    Draws K prototype vectors at pairwise distance >= separation; each video
    plays every action exactly once in a (possibly adjacent-swapped) order,
    with per-frame Gaussian noise and 3-frame temporal smoothing.
    """
    cfg.validate()
    rng = np.random.default_rng([cfg.seed, 0])
    protos = None
    for _ in range(100):
        cand = rng.normal(0.0, cfg.separation, size=(cfg.n_actions, cfg.dim))
        ok = True
        for a in range(cfg.n_actions):
            for b in range(a + 1, cfg.n_actions):
                if np.linalg.norm(cand[a] - cand[b]) < cfg.separation:
                    ok = False
        if ok:
            protos = cand
            break
    if protos is None:
        raise DataError(
            f"could not draw {cfg.n_actions} prototypes with pairwise "
            f"distance >= {cfg.separation} in dimension {cfg.dim}")

    dataset = []
    for n in range(cfg.n_videos):
        order = list(range(cfg.n_actions))
        if rng.random() < cfg.order_permutation_prob and cfg.n_actions > 1:
            for _ in range(int(rng.integers(1, cfg.n_actions + 1))):
                pos = int(rng.integers(0, cfg.n_actions - 1))
                order[pos], order[pos + 1] = order[pos + 1], order[pos]
        lengths = rng.integers(cfg.len_min, cfg.len_max + 1,
                               size=cfg.n_actions)
        frames = np.concatenate([
            protos[a] + rng.normal(0.0, cfg.noise_sigma, size=(lengths[i], cfg.dim))
            for i, a in enumerate(order)])
        frames = _quantize(_moving_average3(frames))
        gt = np.repeat(np.array(order), lengths)
        dataset.append(FeatureSequence(video_id=f"synth_{n:03d}",
                                       features=frames, gt_labels=gt))
    return dataset


def save_dataset(dataset: list[FeatureSequence], out_dir,
                 manifest_name: str = "manifest.txt") -> Path:
    """Write feature/label files plus a manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    for seq in dataset:
        seq.validate()
        feat_name = f"{seq.video_id}.features.txt"
        with open(out_dir / feat_name, "w") as fh:
            for row in seq.features:
                fh.write(" ".join(FLOAT_FMT % v for v in row) + "\n")
        if seq.gt_labels is not None:
            label_name = f"{seq.video_id}.labels.txt"
            with open(out_dir / label_name, "w") as fh:
                fh.writelines(f"{int(v)}\n" for v in seq.gt_labels)
            lines.append(f"{seq.video_id} {feat_name} {label_name}\n")
        else:
            lines.append(f"{seq.video_id} {feat_name}\n")
    manifest = out_dir / manifest_name
    manifest.write_text("".join(lines))
    return manifest


def _read_matrix(path: Path, video_id: str) -> np.ndarray:
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            try:
                row = [float(v) for v in parts]
            except ValueError:
                raise DataError(
                    f"video '{video_id}': non-numeric content in "
                    f"{path.name}:{lineno}") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DataError(
                    f"video '{video_id}': ragged row in {path.name}:{lineno}")
            rows.append(row)
    if not rows:
        raise DataError(f"video '{video_id}': empty feature file {path.name}")
    return np.array(rows, dtype=np.float64)


def load_dataset(manifest_path) -> list[FeatureSequence]:
    """Load every video referenced by a manifest; validates invariants."""
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise DataError(f"manifest not found: {manifest_path}")
    base = manifest_path.parent
    dataset = []
    for lineno, line in enumerate(manifest_path.read_text().splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) not in (2, 3):
            raise DataError(f"manifest line {lineno}: expected "
                            f"'video_id feature_path [label_path]'")
        video_id, feat_rel = parts[0], parts[1]
        feat_path = base / feat_rel
        if not feat_path.is_file():
            raise DataError(f"video '{video_id}': missing feature file {feat_path}")
        features = _read_matrix(feat_path, video_id)
        gt = None
        if len(parts) == 3:
            label_path = base / parts[2]
            if not label_path.is_file():
                raise DataError(f"video '{video_id}': missing label file {label_path}")
            try:
                gt = np.array([int(v) for v in label_path.read_text().split()])
            except ValueError:
                raise DataError(
                    f"video '{video_id}': non-integer label content in "
                    f"{label_path.name}") from None
            if len(gt) != len(features):
                raise DataError(
                    f"video '{video_id}': label file has {len(gt)} lines for "
                    f"{len(features)} frames")
        seq = FeatureSequence(video_id=video_id, features=features, gt_labels=gt)
        seq.validate()
        dataset.append(seq)
    if not dataset:
        raise DataError(f"manifest {manifest_path} lists no videos")
    ids = [seq.video_id for seq in dataset]
    if len(set(ids)) != len(ids):
        dupes = sorted({v for v in ids if ids.count(v) > 1})
        raise DataError(f"duplicate video ids in manifest: {dupes}")
    dims = {seq.features.shape[1] for seq in dataset}
    if len(dims) > 1:
        raise DataError(
            f"feature dimension mismatch across videos: {sorted(dims)}")
    return dataset
