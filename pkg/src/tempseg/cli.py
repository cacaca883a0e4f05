"""Command-line interface.

Subcommands: synth, train, embed, cluster, assign, decode, eval, pipeline,
plot.  A config file of key=value lines (--config) can set any flag; explicit
command-line flags override it.  Exit codes: 0 success, 2 invalid arguments,
3 data errors, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import decoder as dec
from . import embednet as en
from . import globalassign as ga
from . import metrics as mt
from . import pipeline as pl
from . import render
from . import videocluster as vc
from .dataio import SynthConfig, generate_synthetic, load_dataset, save_dataset
from .errors import DataError, NumericalError, StageError


def _add_common(parser):
    parser.add_argument("--config", help="key=value file; flags override it")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=1,
                        help="videos processed in parallel (1 = reference)")


def _add_dataset(parser):
    parser.add_argument("--manifest", required=True,
                        help="dataset manifest file")


def _add_embed_flags(parser):
    parser.add_argument("--variant", default="ssten",
                        choices=sorted(en.VARIANTS))
    parser.add_argument("--hidden-dim", type=int, default=32)
    parser.add_argument("--layers", type=int, default=5,
                        help="dilated residual layers per stage")
    parser.add_argument("--kernel-size", type=int, default=3)
    parser.add_argument("--lambda", dest="lam", type=float, default=0.01,
                        help="reconstruction loss weight")
    parser.add_argument("--epochs", type=int, default=40)
    parser.add_argument("--learning-rate", type=float, default=1e-3)
    parser.add_argument("--dropout", type=float, default=0.0)


def _add_cluster_flags(parser):
    parser.add_argument("--k", type=int, default=4, help="number of clusters")
    parser.add_argument("--m", type=int, default=9,
                        help="local-scaling neighbor index")
    parser.add_argument("--sigma-prime", type=float, default=1.0 / 6.0)
    parser.add_argument("--fixed-sigma-spat", type=float, default=None)
    parser.add_argument("--temporal-kernel", default="on",
                        choices=["on", "off"])


def _add_assign_flags(parser):
    parser.add_argument("--strategy", default="multi_hub",
                        choices=sorted(pl.STRATEGIES))


def _add_decode_flags(parser):
    parser.add_argument("--order-mode", default="video_wise",
                        choices=sorted(dec.ORDER_MODES))
    parser.add_argument("--covariance", default="diag",
                        choices=["diag", "full"])


def _add_eval_flags(parser):
    parser.add_argument("--scope", default="global",
                        choices=sorted(mt.SCOPES))
    parser.add_argument("--ignore-label", type=int, default=-1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tempseg",
        description="Unsupervised temporal action segmentation pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled dataset")
    _add_common(p)
    p.add_argument("--n-videos", type=int, default=10)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--separation", type=float, default=4.0)
    p.add_argument("--noise", type=float, default=0.4)
    p.add_argument("--len-min", type=int, default=20)
    p.add_argument("--len-max", type=int, default=40)
    p.add_argument("--perm-prob", type=float, default=0.5)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the embedding network")
    _add_common(p)
    _add_dataset(p)
    _add_embed_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("embed", help="export per-frame embeddings")
    _add_common(p)
    _add_dataset(p)
    p.add_argument("--model", help="checkpoint (default OUT/model.bin)")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("cluster", help="within-video spectral clustering")
    _add_common(p)
    _add_dataset(p)
    p.add_argument("--model", help="checkpoint (default OUT/model.bin)")
    _add_cluster_flags(p)
    p.add_argument("--dump-similarity", metavar="VIDEO_ID",
                   help="also write the similarity matrix of this video")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("assign", help="cross-video global cluster assignment")
    _add_common(p)
    _add_dataset(p)
    p.add_argument("--model", help="checkpoint (default OUT/model.bin)")
    p.add_argument("--clusters", help="clusters file (default OUT/clusters.txt)")
    _add_assign_flags(p)
    p.set_defaults(func=cmd_assign)

    p = sub.add_parser("decode", help="order-constrained Viterbi decoding")
    _add_common(p)
    _add_dataset(p)
    p.add_argument("--model", help="checkpoint (default OUT/model.bin)")
    p.add_argument("--clusters", help="clusters file (default OUT/clusters.txt)")
    p.add_argument("--assignment",
                   help="assignment file (default OUT/assignment.txt)")
    _add_decode_flags(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="score segmentations against ground truth")
    _add_common(p)
    _add_dataset(p)
    p.add_argument("--segments", help="segments file (default OUT/segments.txt)")
    _add_eval_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pipeline", help="run every stage end to end")
    _add_common(p)
    _add_dataset(p)
    _add_embed_flags(p)
    _add_cluster_flags(p)
    _add_assign_flags(p)
    _add_decode_flags(p)
    _add_eval_flags(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("plot", help="render segmentation / similarity SVGs")
    _add_common(p)
    _add_dataset(p)
    p.add_argument("--segments", help="segments file (default OUT/segments.txt)")
    p.add_argument("--model",
                   help="checkpoint; needed for --similarity-video")
    p.add_argument("--similarity-video", metavar="VIDEO_ID",
                   help="render this video's similarity matrix")
    _add_cluster_flags(p)
    p.set_defaults(func=cmd_plot)
    return parser


def _apply_config_file(argv: list[str]) -> list[str]:
    """Inject key=value file entries as flags before the explicit ones."""
    path = None
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif token.startswith("--config="):
            path = token.split("=", 1)[1]
    if path is None:
        return argv
    if not Path(path).is_file():
        raise DataError(f"config file not found: {path}")
    injected = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        injected += ["--" + key.strip().replace("_", "-"), value.strip()]
    # subcommand first, then config values, then explicit flags (which win)
    return argv[:1] + injected + argv[1:]


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _embed_config(args) -> en.EmbedConfig:
    return en.EmbedConfig(variant=args.variant, hidden_dim=args.hidden_dim,
                          layers_per_stage=args.layers,
                          kernel_size=args.kernel_size, lam=args.lam,
                          epochs=args.epochs,
                          learning_rate=args.learning_rate,
                          dropout=args.dropout, seed=args.seed)


def _similarity_config(args) -> vc.SimilarityConfig:
    return vc.SimilarityConfig(
        m=args.m, sigma_prime=args.sigma_prime,
        fixed_sigma_spat=args.fixed_sigma_spat,
        temporal_kernel_enabled=args.temporal_kernel == "on")


def _pipeline_config(args) -> pl.PipelineConfig:
    return pl.PipelineConfig(
        manifest=args.manifest, out_dir=args.out, k=args.k,
        embed=_embed_config(args), similarity=_similarity_config(args),
        strategy=args.strategy, order_mode=args.order_mode, scope=args.scope,
        covariance=args.covariance, seed=args.seed, threads=args.threads)


def _load_model(args, out: Path) -> en.ModelParams:
    path = Path(args.model) if args.model else out / pl.MODEL_FILE
    if not path.is_file():
        raise DataError(f"model checkpoint not found: {path}")
    return en.load_model(path)


def _embeddings_for(args, out: Path, dataset):
    model = _load_model(args, out)
    return model, [en.embed(model, seq) for seq in dataset]


def _read_artifact(out: Path, override, default_name: str) -> str:
    path = Path(override) if override else out / default_name
    if not path.is_file():
        raise DataError(f"required artifact not found: {path}")
    return path.read_text()


def cmd_synth(args) -> None:
    out = _out(args)
    cfg = SynthConfig(n_videos=args.n_videos, n_actions=args.k, dim=args.dim,
                      separation=args.separation, noise_sigma=args.noise,
                      len_min=args.len_min, len_max=args.len_max,
                      order_permutation_prob=args.perm_prob, seed=args.seed)
    manifest = save_dataset(generate_synthetic(cfg), out / "data")
    print(manifest)


def cmd_train(args) -> None:
    out = _out(args)
    dataset = load_dataset(args.manifest)
    cfg = pl.PipelineConfig(manifest=args.manifest, out_dir=args.out,
                            embed=_embed_config(args), seed=args.seed,
                            threads=args.threads)
    pl.stage_train(dataset, cfg, out)
    print(out / pl.MODEL_FILE)


def cmd_embed(args) -> None:
    out = _out(args)
    dataset = load_dataset(args.manifest)
    model = _load_model(args, out)
    cfg = pl.PipelineConfig(manifest=args.manifest, out_dir=args.out,
                            seed=args.seed, threads=args.threads)
    pl.stage_embed(dataset, model, cfg, out)
    print(out / pl.EMBEDDINGS_FILE)


def cmd_cluster(args) -> None:
    out = _out(args)
    dataset = load_dataset(args.manifest)
    _, embs = _embeddings_for(args, out, dataset)
    cfg = _pipeline_config_partial(args)
    clusters = pl.stage_cluster(embs, cfg, out)
    if args.dump_similarity:
        emb = next((e for e in embs if e.video_id == args.dump_similarity),
                   None)
        if emb is None:
            raise DataError(f"unknown video id '{args.dump_similarity}'")
        g = vc.similarity_matrix(emb, cfg.similarity)
        vc.dump_similarity_text(g, out / f"similarity_{emb.video_id}.txt")
    print(out / pl.CLUSTERS_FILE)
    return clusters


def _pipeline_config_partial(args) -> pl.PipelineConfig:
    """Pipeline config for stage commands that lack the training flags."""
    cfg = pl.PipelineConfig(manifest=args.manifest, out_dir=args.out,
                            seed=args.seed, threads=args.threads)
    if hasattr(args, "k"):
        cfg.k = args.k
        cfg.similarity = _similarity_config(args)
    if hasattr(args, "strategy"):
        cfg.strategy = args.strategy
    if hasattr(args, "order_mode"):
        cfg.order_mode = args.order_mode
        cfg.covariance = args.covariance
    if hasattr(args, "scope"):
        cfg.scope = args.scope
    return cfg


def _clusters_from_artifacts(args, out: Path):
    dataset = load_dataset(args.manifest)
    _, embs = _embeddings_for(args, out, dataset)
    text = _read_artifact(out, getattr(args, "clusters", None),
                          pl.CLUSTERS_FILE)
    return dataset, embs, pl.parse_clusters(text, embs)


def cmd_assign(args) -> None:
    out = _out(args)
    _, _, clusters = _clusters_from_artifacts(args, out)
    cfg = _pipeline_config_partial(args)
    assignment = pl.stage_assign(clusters, cfg, out)
    print(out / pl.ASSIGNMENT_FILE)
    return assignment


def cmd_decode(args) -> None:
    out = _out(args)
    _, embs, clusters = _clusters_from_artifacts(args, out)
    text = _read_artifact(out, args.assignment, pl.ASSIGNMENT_FILE)
    assignment = ga.parse_assignment(text, [c.video_id for c in clusters])
    cfg = _pipeline_config_partial(args)
    pl.stage_decode(embs, clusters, assignment, cfg, out)
    print(out / pl.SEGMENTS_FILE)


def cmd_eval(args) -> None:
    out = _out(args)
    dataset = load_dataset(args.manifest)
    text = _read_artifact(out, args.segments, pl.SEGMENTS_FILE)
    preds = dec.parse_segments(text)
    if len(preds) != len(dataset):
        raise DataError(f"segments file has {len(preds)} videos, "
                        f"manifest has {len(dataset)}")
    gts = []
    for seq in dataset:
        if seq.gt_labels is None:
            raise DataError(f"video '{seq.video_id}' has no labels")
        gts.append(seq.gt_labels)
    report = mt.evaluate(preds, gts, video_ids=[s.video_id for s in dataset],
                         scope=args.scope, ignore_label=args.ignore_label)
    text = mt.format_report(report)
    (out / pl.REPORT_FILE).write_text(text)
    print(text, end="")


def cmd_pipeline(args) -> None:
    report = pl.run_pipeline(_pipeline_config(args))
    print(mt.format_report(report), end="")


def cmd_plot(args) -> None:
    out = _out(args)
    dataset = load_dataset(args.manifest)
    text = _read_artifact(out, args.segments, pl.SEGMENTS_FILE)
    preds = dec.parse_segments(text)
    if len(preds) != len(dataset):
        raise DataError(f"segments file has {len(preds)} videos, "
                        f"manifest has {len(dataset)}")
    classes = set()
    for seq, pred in zip(dataset, preds):
        if seq.gt_labels is not None:
            classes.update(int(v) for v in seq.gt_labels)
        classes.update(int(v) for v in pred)
    palette = render.class_palette(classes)
    for seq, pred in zip(dataset, preds):
        gt = seq.gt_labels if seq.gt_labels is not None else pred
        svg = render.render_segmentation_svg(gt, [pred], palette=palette,
                                             names=["decoded"])
        (out / f"segmentation_{seq.video_id}.svg").write_text(svg)
    if args.similarity_video:
        _, embs = _embeddings_for(args, out, dataset)
        emb = next((e for e in embs if e.video_id == args.similarity_video),
                   None)
        if emb is None:
            raise DataError(f"unknown video id '{args.similarity_video}'")
        g = vc.similarity_matrix(emb, _similarity_config(args))
        (out / f"similarity_{emb.video_id}.svg").write_text(
            render.render_similarity_svg(g))
    print(out)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _apply_config_file(argv)
        parser = build_parser()
        args = parser.parse_args(argv)
        args.func(args)
        return 0
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc.cause)
    except (DataError, NumericalError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, NumericalError):
        return 4
    if isinstance(exc, (DataError, OSError)):
        return 3
    return 2


if __name__ == "__main__":
    sys.exit(main())
