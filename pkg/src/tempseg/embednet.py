"""Temporal embedding networks: build, train, and extract per-frame embeddings.

The main network is a sequence-to-sequence autoencoder with two encoder and
two decoder stages.  Each stage is a 1x1 dimension-adjust convolution followed
by Q dilated residual layers (dilation 2^(q-1) at layer q); each encoder stage
additionally predicts the frame-wise relative timestamp through a 1x1 head and
concatenates that prediction onto its hidden representation.  Two ablation
variants are provided: 'tcn' (encoder stages only, no reconstruction) and
'mlp' (per-frame fully-connected stack with a single timestamp head).

Training minimizes

    lam * sum_t ||x_t - x_hat_t||^2  +  sum_p sum_t (s_t - s_hat_{p,t})^2

per video, where s_t = t/T is the true relative timestamp.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from . import seqgrad as sg
from .errors import DataError, DivergedError
from .seqgrad import SeqTensor, Tape

VARIANTS = ("ssten", "tcn", "mlp")


@dataclass
class EmbedConfig:
    variant: str = "ssten"
    input_dim: int = 0           # D; 0 = infer from the dataset at train time
    hidden_dim: int = 32         # H
    layers_per_stage: int = 5    # Q (ignored for mlp)
    kernel_size: int = 3         # r, odd (ignored for mlp)
    lam: float = 0.01            # reconstruction weight
    epochs: int = 40
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    dropout: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant '{self.variant}'")
        if self.input_dim < 0:
            raise ValueError("input_dim must be >= 0")
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if self.layers_per_stage < 1:
            raise ValueError("layers_per_stage must be >= 1")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd and >= 1")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")


@dataclass
class ModelParams:
    config: EmbedConfig
    params: dict[str, SeqTensor]
    norm_mean: np.ndarray
    norm_std: np.ndarray

    def embedding_dim(self) -> int:
        return self.config.hidden_dim + 1


@dataclass
class EmbeddedSequence:
    video_id: str
    embedding: np.ndarray        # T x E, E = hidden_dim + 1
    true_timestamps: np.ndarray  # T, s_t = t/T


@dataclass
class ForwardOutput:
    x_hat: Optional[SeqTensor]      # reconstruction, None for tcn/mlp
    s_hats: list[SeqTensor]         # per-stage timestamp predictions, T x 1
    embedding: SeqTensor            # T x (H + 1)


def receptive_field(q: int, r: int) -> int:
    """Temporal receptive field after q dilated layers of kernel size r."""
    if q < 1 or r < 1:
        raise ValueError("q and r must be >= 1")
    return 1 + (r - 1) * (2 ** q - 1)


def _he_init(rng, shape, fan_in):
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


def _stage_param_shapes(cfg: EmbedConfig, in_dim: int, with_head: bool,
                        out_dim: Optional[int] = None):
    h, q, r = cfg.hidden_dim, cfg.layers_per_stage, cfg.kernel_size
    shapes = [("adjust.w", (h, in_dim)), ("adjust.b", (h,))]
    for i in range(1, q + 1):
        shapes += [(f"res{i}.conv.w", (h, h, r)), (f"res{i}.conv.b", (h,)),
                   (f"res{i}.proj.w", (h, h)), (f"res{i}.proj.b", (h,))]
    if with_head:
        shapes += [("ts.w", (1, h)), ("ts.b", (1,))]
    if out_dim is not None:
        shapes += [("out.w", (out_dim, h)), ("out.b", (out_dim,))]
    return shapes


def _param_shapes(cfg: EmbedConfig):
    """Ordered (name, shape) list for the given architecture."""
    d, h = cfg.input_dim, cfg.hidden_dim
    if cfg.variant == "mlp":
        return [("fc1.w", (h, d)), ("fc1.b", (h,)),
                ("fc2.w", (h, h)), ("fc2.b", (h,)),
                ("ts.w", (1, h)), ("ts.b", (1,))]
    shapes = []
    for name, in_dim, head in [("enc1", d, True), ("enc2", h + 1, True)]:
        shapes += [(f"{name}.{k}", s)
                   for k, s in _stage_param_shapes(cfg, in_dim, head)]
    if cfg.variant == "ssten":
        shapes += [(f"dec1.{k}", s)
                   for k, s in _stage_param_shapes(cfg, h + 1, False)]
        shapes += [(f"dec2.{k}", s)
                   for k, s in _stage_param_shapes(cfg, h, False, out_dim=d)]
    return shapes


def build_model(config: EmbedConfig, seed: int) -> ModelParams:
    """Deterministically initialized parameters for the configured network."""
    config.validate()
    if config.input_dim < 1:
        raise ValueError("input_dim must be set (>= 1) to build a model")
    rng = np.random.default_rng([seed, 0])
    params: dict[str, SeqTensor] = {}
    for name, shape in _param_shapes(config):
        if name.endswith(".b"):
            data = np.zeros(shape)
        elif ".proj.w" in name:
            # residual branches start closed so stacked stages begin as the
            # identity map; otherwise activations grow ~2x per layer
            data = np.zeros(shape)
        else:
            fan_in = shape[1] * (shape[2] if len(shape) == 3 else 1)
            data = _he_init(rng, shape, fan_in)
        params[name] = SeqTensor(data, requires_grad=True)
    d = config.input_dim
    return ModelParams(config=config, params=params,
                       norm_mean=np.zeros(d), norm_std=np.ones(d))


def _residual_stage(params, prefix, h, cfg, dropout_rng=None):
    for i in range(1, cfg.layers_per_stage + 1):
        z = sg.conv1d_dilated(h, params[f"{prefix}.res{i}.conv.w"],
                              params[f"{prefix}.res{i}.conv.b"],
                              dilation=2 ** (i - 1))
        a = sg.relu(z)
        if dropout_rng is not None and cfg.dropout > 0.0:
            mask = (dropout_rng.random(a.data.shape) >= cfg.dropout)
            a = sg.scale(a, mask / (1.0 - cfg.dropout))
        o = sg.pointwise_conv(a, params[f"{prefix}.res{i}.proj.w"],
                              params[f"{prefix}.res{i}.proj.b"])
        h = sg.add(h, o)
    return h


def _encoder_stage(params, prefix, x, cfg, dropout_rng=None):
    h = sg.pointwise_conv(x, params[f"{prefix}.adjust.w"],
                          params[f"{prefix}.adjust.b"])
    h = _residual_stage(params, prefix, h, cfg, dropout_rng)
    s = sg.pointwise_conv(h, params[f"{prefix}.ts.w"], params[f"{prefix}.ts.b"])
    return sg.concat_channels(h, s), s


def forward(model: ModelParams, x, dropout_rng=None) -> ForwardOutput:
    """Run the network on a (normalized) T x D feature matrix."""
    cfg = model.config
    xt = x if isinstance(x, SeqTensor) else SeqTensor(x)
    if xt.data.ndim != 2 or xt.data.shape[1] != cfg.input_dim:
        raise ValueError(
            f"expected T x {cfg.input_dim} input, got shape {xt.data.shape}")
    p = model.params

    if cfg.variant == "mlp":
        h1 = sg.relu(sg.pointwise_conv(xt, p["fc1.w"], p["fc1.b"]))
        h2 = sg.relu(sg.pointwise_conv(h1, p["fc2.w"], p["fc2.b"]))
        s = sg.pointwise_conv(h2, p["ts.w"], p["ts.b"])
        return ForwardOutput(None, [s], sg.concat_channels(h2, s))

    e1, s1 = _encoder_stage(p, "enc1", xt, cfg, dropout_rng)
    e2, s2 = _encoder_stage(p, "enc2", e1, cfg, dropout_rng)
    if cfg.variant == "tcn":
        return ForwardOutput(None, [s1, s2], e2)

    g = sg.pointwise_conv(e2, p["dec1.adjust.w"], p["dec1.adjust.b"])
    g = _residual_stage(p, "dec1", g, cfg, dropout_rng)
    g = sg.pointwise_conv(g, p["dec2.adjust.w"], p["dec2.adjust.b"])
    g = _residual_stage(p, "dec2", g, cfg, dropout_rng)
    x_hat = sg.pointwise_conv(g, p["dec2.out.w"], p["dec2.out.b"])
    return ForwardOutput(x_hat, [s1, s2], e2)


def loss(x, x_hat: Optional[SeqTensor], s_hats: Sequence[SeqTensor],
         s_true, lam: float) -> SeqTensor:
    """Reconstruction + timestamp-prediction objective for one video."""
    if lam < 0:
        raise ValueError("lam must be >= 0")
    xt = x if isinstance(x, SeqTensor) else SeqTensor(x)
    st = s_true if isinstance(s_true, SeqTensor) else SeqTensor(s_true)
    total = None
    if x_hat is not None:
        total = sg.scale(sg.mse(x_hat, xt), lam)
    for s_hat in s_hats:
        term = sg.mse(s_hat, st)
        total = term if total is None else sg.add(total, term)
    if total is None:
        raise ValueError("loss needs a reconstruction or a timestamp prediction")
    return total


def true_timestamps(T: int) -> np.ndarray:
    """Relative timestamps s_t = t/T for t = 1..T."""
    return np.arange(1, T + 1, dtype=np.float64) / T


def _adam_step(items, m, v, t, cfg: EmbedConfig):
    lr, b1, b2, eps = cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, p in items:
        g = p.grad
        if g is None:
            continue
        m[name] = b1 * m[name] + (1.0 - b1) * g
        v[name] = b2 * v[name] + (1.0 - b2) * g * g
        p.data -= lr * (m[name] / c1) / (np.sqrt(v[name] / c2) + eps)


def train(dataset, config: EmbedConfig):
    """Train on a list of FeatureSequence; returns (ModelParams, loss_history).

    One optimization step per video sequence, order shuffled per epoch from
    the config seed; loss_history holds the per-epoch mean loss.
    """
    config.validate()
    if not dataset:
        raise ValueError("dataset is empty")
    dims = {seq.features.shape[1] for seq in dataset}
    if len(dims) != 1:
        raise ValueError(f"inconsistent feature dimensions across videos: {sorted(dims)}")
    d = dims.pop()
    if config.input_dim == 0:
        config.input_dim = d
    elif config.input_dim != d:
        raise ValueError(f"config.input_dim={config.input_dim} but dataset has D={d}")

    model = build_model(config, config.seed)
    stacked = np.vstack([seq.features for seq in dataset])
    model.norm_mean = stacked.mean(axis=0)
    model.norm_std = np.maximum(stacked.std(axis=0), 1e-8)

    normalized = [(seq.features - model.norm_mean) / model.norm_std
                  for seq in dataset]
    targets = [true_timestamps(len(x))[:, None] for x in normalized]

    items = list(model.params.items())
    m = {name: np.zeros_like(p.data) for name, p in items}
    v = {name: np.zeros_like(p.data) for name, p in items}
    shuffle_rng = np.random.default_rng([config.seed, 1])
    dropout_rng = (np.random.default_rng([config.seed, 2])
                   if config.dropout > 0.0 else None)

    history: list[float] = []
    step = 0
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(len(dataset))
        epoch_losses = []
        for idx in order:
            for _, p in items:
                p.zero_grad()
            with Tape() as tape:
                out = forward(model, normalized[idx], dropout_rng)
                l = loss(normalized[idx], out.x_hat, out.s_hats,
                         targets[idx], config.lam)
            lval = float(l.data)
            if not np.isfinite(lval):
                raise DivergedError(epoch)
            sg.backward(tape, l)
            step += 1
            _adam_step(items, m, v, step, config)
            epoch_losses.append(lval)
        history.append(float(np.mean(epoch_losses)))
    return model, history


def embed(model: ModelParams, video) -> EmbeddedSequence:
    """Per-frame embedding (hidden representation + predicted timestamp)."""
    x = np.asarray(video.features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.config.input_dim:
        raise ValueError(
            f"video '{video.video_id}' has shape {x.shape}, expected "
            f"T x {model.config.input_dim}")
    xn = (x - model.norm_mean) / model.norm_std
    out = forward(model, xn)
    return EmbeddedSequence(video_id=video.video_id,
                            embedding=out.embedding.data.copy(),
                            true_timestamps=true_timestamps(x.shape[0]))


def save_model(model: ModelParams, path) -> None:
    """Checkpoint: architecture descriptor, normalization stats, parameters."""
    payload = {"meta": np.array(json.dumps(asdict(model.config))),
               "norm_mean": model.norm_mean, "norm_std": model.norm_std}
    for name, p in model.params.items():
        payload[f"p__{name}"] = p.data
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_model(path) -> ModelParams:
    try:
        with np.load(path, allow_pickle=False) as data:
            config = EmbedConfig(**json.loads(str(data["meta"])))
            params = {key[3:]: SeqTensor(data[key], requires_grad=True)
                      for key in data.files if key.startswith("p__")}
            model = ModelParams(config=config, params=params,
                                norm_mean=data["norm_mean"],
                                norm_std=data["norm_std"])
    except DataError:
        raise
    except Exception as exc:
        raise DataError(f"unreadable model checkpoint {path}: {exc}") from exc
    expected = [name for name, _ in _param_shapes(config)]
    if sorted(expected) != sorted(model.params.keys()):
        raise DataError(
            f"checkpoint {path}: parameters do not match its descriptor")
    model.params = {name: model.params[name] for name in expected}
    return model
