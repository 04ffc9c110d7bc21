"""Under-complete denoising autoencoder with per-column output distributions.

Implemented directly on numpy in double precision. All affine maps go through
np.einsum rather than BLAS matmul: einsum's accumulation order per output
element does not depend on the batch size, so a batched forward pass is
bit-identical to stacking single-vector passes (which the rule-extraction
contract relies on).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import TabarmError
from .tabular import OneHotMatrix, OneHotSchema

LEAKY_SLOPE = 0.01
PROB_EPS = 1e-7
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

CHECKPOINT_MAGIC = b"AEMODEL1"


@dataclass
class TrainConfig:
    """Optimization settings for the denoising reconstruction objective."""

    epochs: int = 10
    batch_size: int = 2
    learning_rate: float = 1e-3
    noise_std: float = 0.5
    seed: int = 0
    validation_fraction: float = 0.0
    patience: int = 20
    min_delta: float = 1e-4

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must be in [0, 1)")
        if self.noise_std < 0.0:
            raise ValueError("noise_std must be >= 0")


@dataclass
class Layer:
    """One affine map: weights (in_dim, out_dim) and bias (out_dim,)."""

    W: np.ndarray
    b: np.ndarray

    @property
    def in_dim(self) -> int:
        return self.W.shape[0]

    @property
    def out_dim(self) -> int:
        return self.W.shape[1]

    def copy(self) -> "Layer":
        return Layer(self.W.copy(), self.b.copy())


def _single_span(d: int) -> OneHotSchema:
    # Placeholder schema for models built without one: one span over all features.
    from .tabular import Item

    items = tuple(Item("f", str(j)) for j in range(d))
    return OneHotSchema(
        columns=("f",),
        items=items,
        feature_index={it: j for j, it in enumerate(items)},
        column_spans=((0, d),),
        total_features=d,
    )


@dataclass
class AutoencoderModel:
    """Mirrored encoder/decoder stack; LeakyReLU hidden layers, softmax spans out."""

    encoder: list[Layer]
    decoder: list[Layer]
    schema: OneHotSchema

    def __post_init__(self) -> None:
        dims = [self.encoder[0].in_dim]
        for layer in self.encoder + self.decoder:
            if layer.in_dim != dims[-1]:
                raise ValueError("layer dimensions do not chain")
            dims.append(layer.out_dim)
        if dims[0] != dims[-1]:
            raise ValueError("decoder output dim must equal encoder input dim")
        enc_dims = [self.encoder[0].in_dim] + [l.out_dim for l in self.encoder]
        dec_dims = [self.decoder[0].in_dim] + [l.out_dim for l in self.decoder]
        if dec_dims != enc_dims[::-1]:
            raise ValueError("decoder dims must mirror encoder dims")
        if self.schema.total_features != dims[0]:
            raise ValueError("schema feature count does not match model input dim")

    @property
    def layers(self) -> list[Layer]:
        return self.encoder + self.decoder

    @property
    def input_dim(self) -> int:
        return self.encoder[0].in_dim

    @property
    def bottleneck_dim(self) -> int:
        return self.encoder[-1].out_dim

    def parameters(self) -> list[np.ndarray]:
        params: list[np.ndarray] = []
        for layer in self.layers:
            params.append(layer.W)
            params.append(layer.b)
        return params

    def copy(self) -> "AutoencoderModel":
        return AutoencoderModel(
            encoder=[l.copy() for l in self.encoder],
            decoder=[l.copy() for l in self.decoder],
            schema=self.schema,
        )

    def reconstruct(self, x: np.ndarray) -> np.ndarray:
        """Clean forward pass; accepts (d',) or (B, d')."""
        return forward(self, x)


def default_layer_dims(total_features: int) -> list[int]:
    """Encoder chain d' -> 50 -> 10, clamped to stay under-complete for narrow inputs."""
    if total_features < 2:
        raise ValueError("need at least two features for an under-complete model")
    first = min(50, total_features - 1)
    return [total_features, first, min(10, first)]


def init_xavier(
    layer_dims: Sequence[int], seed: int, schema: OneHotSchema | None = None
) -> AutoencoderModel:
    """Fresh model: encoder follows layer_dims, decoder mirrors it.

    Weights are uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero,
    drawn deterministically from the seed (encoder first, then decoder).
    """
    dims = list(layer_dims)
    if len(dims) < 2:
        raise ValueError("need at least input and bottleneck dims")
    if any(d < 1 for d in dims):
        raise ValueError("all layer dims must be positive")
    if dims[-1] >= dims[0]:
        raise ValueError(
            f"bottleneck dim {dims[-1]} must be smaller than input dim {dims[0]}"
        )
    if schema is not None and schema.total_features != dims[0]:
        raise ValueError("schema feature count does not match input dim")
    rng = np.random.default_rng(seed)

    def draw(fan_in: int, fan_out: int) -> Layer:
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        W = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        return Layer(W=W, b=np.zeros(fan_out))

    encoder = [draw(dims[i], dims[i + 1]) for i in range(len(dims) - 1)]
    mirrored = dims[::-1]
    decoder = [draw(mirrored[i], mirrored[i + 1]) for i in range(len(mirrored) - 1)]
    return AutoencoderModel(
        encoder=encoder,
        decoder=decoder,
        schema=schema if schema is not None else _single_span(dims[0]),
    )


def _affine(x: np.ndarray, layer: Layer) -> np.ndarray:
    return np.einsum("bi,io->bo", x, layer.W) + layer.b


def _leaky(z: np.ndarray) -> np.ndarray:
    return np.where(z > 0.0, z, LEAKY_SLOPE * z)


def _leaky_grad(z: np.ndarray) -> np.ndarray:
    return np.where(z > 0.0, 1.0, LEAKY_SLOPE)


def _span_arrays(schema: OneHotSchema) -> tuple[np.ndarray, np.ndarray]:
    starts = np.array([s for s, _ in schema.column_spans], dtype=np.intp)
    sizes = np.array([e - s for s, e in schema.column_spans], dtype=np.intp)
    return starts, sizes


def span_softmax(z: np.ndarray, schema: OneHotSchema) -> np.ndarray:
    """Softmax applied independently inside every column span."""
    starts, sizes = _span_arrays(schema)
    mx = np.maximum.reduceat(z, starts, axis=-1)
    e = np.exp(z - np.repeat(mx, sizes, axis=-1))
    totals = np.add.reduceat(e, starts, axis=-1)
    return e / np.repeat(totals, sizes, axis=-1)


def _span_softmax_backward(
    probs: np.ndarray, gprobs: np.ndarray, schema: OneHotSchema
) -> np.ndarray:
    starts, sizes = _span_arrays(schema)
    inner = np.add.reduceat(gprobs * probs, starts, axis=-1)
    return probs * (gprobs - np.repeat(inner, sizes, axis=-1))


@dataclass
class _ForwardCache:
    inputs: list[np.ndarray]   # input activation of every layer
    pre_acts: list[np.ndarray]  # z of every layer
    probs: np.ndarray


def _forward_cached(model: AutoencoderModel, x: np.ndarray) -> _ForwardCache:
    inputs: list[np.ndarray] = []
    pre_acts: list[np.ndarray] = []
    a = x
    layers = model.layers
    for j, layer in enumerate(layers):
        inputs.append(a)
        z = _affine(a, layer)
        pre_acts.append(z)
        a = _leaky(z) if j < len(layers) - 1 else z
    return _ForwardCache(inputs=inputs, pre_acts=pre_acts, probs=span_softmax(a, model.schema))


def forward(model: AutoencoderModel, x: np.ndarray) -> np.ndarray:
    """Reconstruction probabilities; every column span of the output sums to 1."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.input_dim:
        raise ValueError(
            f"input has {x.shape[-1]} features, model expects {model.input_dim}"
        )
    if not np.isfinite(x).all():
        raise ValueError("input must be finite")
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    probs = _forward_cached(model, x).probs
    return probs[0] if squeeze else probs


def _backward(
    model: AutoencoderModel, cache: _ForwardCache, gprobs: np.ndarray
) -> list[np.ndarray]:
    layers = model.layers
    gz = _span_softmax_backward(cache.probs, gprobs, model.schema)
    grads: list[np.ndarray] = [np.empty(0)] * (2 * len(layers))
    for j in range(len(layers) - 1, -1, -1):
        grads[2 * j] = np.einsum("bi,bo->io", cache.inputs[j], gz)
        grads[2 * j + 1] = gz.sum(axis=0)
        if j > 0:
            ga = np.einsum("bo,io->bi", gz, layers[j].W)
            gz = ga * _leaky_grad(cache.pre_acts[j - 1])
    return grads


def add_noise(x: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    """x + N(0, sigma^2) clipped back into [0, 1]; sigma 0 returns x unchanged."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    x = np.asarray(x, dtype=np.float64)
    if sigma == 0.0:
        return x.copy()
    rng = np.random.default_rng(seed)
    return np.clip(x + rng.normal(0.0, sigma, size=x.shape), 0.0, 1.0)


def recon_loss(output: np.ndarray, target: np.ndarray) -> float:
    """Per-feature binary cross-entropy, averaged over features (and batch)."""
    loss, _ = _bce_loss_grad(np.asarray(output, float), np.asarray(target, float))
    return loss


def _bce_loss_grad(probs: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    p = np.clip(probs, PROB_EPS, 1.0 - PROB_EPS)
    loss = float(-(target * np.log(p) + (1.0 - target) * np.log1p(-p)).mean())
    grad = -(target / p - (1.0 - target) / (1.0 - p)) / probs.size
    grad = np.where((probs > PROB_EPS) & (probs < 1.0 - PROB_EPS), grad, 0.0)
    return loss, grad


ExtraObjective = Callable[[np.ndarray, np.ndarray], tuple[float, np.ndarray]]
"""Hook adding a term to the training objective.

Called with (output probabilities, row indices of the batch); returns the
extra loss and its gradient with respect to the output probabilities.
"""


def loss_and_grads(
    model: AutoencoderModel,
    x_noisy: np.ndarray,
    x_clean: np.ndarray,
    extra: ExtraObjective | None = None,
    batch_idx: np.ndarray | None = None,
) -> tuple[float, list[np.ndarray]]:
    """Objective value and analytic parameter gradients for one batch.

    The gradients line up with model.parameters(). Exposed so the finite-
    difference checks exercise exactly the path the trainer uses.
    """
    cache = _forward_cached(model, np.atleast_2d(x_noisy))
    loss, gprobs = _bce_loss_grad(cache.probs, np.atleast_2d(x_clean))
    if extra is not None:
        idx = batch_idx if batch_idx is not None else np.arange(cache.probs.shape[0])
        extra_loss, extra_grad = extra(cache.probs, idx)
        loss += extra_loss
        gprobs = gprobs + extra_grad
    return loss, _backward(model, cache, gprobs)


class AdamState:
    """Adam moment buffers for a fixed parameter list."""

    def __init__(self, params: list[np.ndarray], learning_rate: float):
        self.lr = learning_rate
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        bias1 = 1.0 - ADAM_BETA1**self.t
        bias2 = 1.0 - ADAM_BETA2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * g * g
            p -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + ADAM_EPS)


def train(
    model: AutoencoderModel,
    data: OneHotMatrix,
    cfg: TrainConfig,
    extra: ExtraObjective | None = None,
) -> AutoencoderModel:
    """Mini-batch Adam on the denoising reconstruction objective.

    Never mutates the given model; returns a trained copy. With a validation
    split the best-validation weights are returned, and training stops early
    once the validation loss has failed to improve by min_delta for
    `patience` consecutive epochs. Validation loss is measured on clean
    (noise-free) forward passes.
    """
    if model.schema.total_features != data.schema.total_features:
        raise ValueError("model and data disagree on feature count")
    n = data.n_rows
    if cfg.validation_fraction == 0.0 and n < cfg.batch_size:
        raise TabarmError(f"need at least batch_size={cfg.batch_size} rows, got {n}")
    if cfg.validation_fraction > 0.0 and n < 2:
        raise TabarmError("need at least 2 rows to hold out a validation split")

    model = model.copy()
    rng = np.random.default_rng(cfg.seed)
    X = data.values
    if cfg.validation_fraction > 0.0:
        perm = rng.permutation(n)
        n_val = min(max(1, int(round(cfg.validation_fraction * n))), n - 1)
        val_idx, train_idx = perm[:n_val], perm[n_val:]
    else:
        val_idx, train_idx = None, np.arange(n)

    params = model.parameters()
    opt = AdamState(params, cfg.learning_rate)
    best_loss = np.inf
    best_params: list[np.ndarray] | None = None
    stale = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(len(train_idx))
        for start in range(0, len(train_idx), cfg.batch_size):
            idx = train_idx[order[start : start + cfg.batch_size]]
            xb = X[idx]
            if cfg.noise_std > 0.0:
                noisy = np.clip(xb + rng.normal(0.0, cfg.noise_std, xb.shape), 0.0, 1.0)
            else:
                noisy = xb
            _, grads = loss_and_grads(model, noisy, xb, extra=extra, batch_idx=idx)
            opt.step(params, grads)
        if val_idx is not None:
            val_probs = _forward_cached(model, X[val_idx]).probs
            val_loss, _ = _bce_loss_grad(val_probs, X[val_idx])
            if val_loss < best_loss - cfg.min_delta:
                best_loss = val_loss
                best_params = [p.copy() for p in params]
                stale = 0
            else:
                stale += 1
                if stale >= cfg.patience:
                    break
    if best_params is not None:
        for p, bp in zip(params, best_params):
            p[...] = bp
    return model


def save_model(model: AutoencoderModel, path: str) -> None:
    """Versioned binary checkpoint: magic, layer count, dims, float64 LE payload."""
    layers = model.layers
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(layers)))
        for layer in layers:
            fh.write(struct.pack("<II", layer.in_dim, layer.out_dim))
        for layer in layers:
            fh.write(np.ascontiguousarray(layer.W, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(layer.b, dtype="<f8").tobytes())


def load_model(path: str, schema: OneHotSchema | None = None) -> AutoencoderModel:
    """Read a checkpoint written by save_model; schema restores the span layout."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise TabarmError(f"{path}: not an autoencoder checkpoint")
    off = len(CHECKPOINT_MAGIC)
    (n_layers,) = struct.unpack_from("<I", blob, off)
    off += 4
    if n_layers % 2 != 0:
        raise TabarmError(f"{path}: layer count {n_layers} is not a mirrored stack")
    dims = []
    for _ in range(n_layers):
        dims.append(struct.unpack_from("<II", blob, off))
        off += 8
    layers = []
    for in_dim, out_dim in dims:
        W = np.frombuffer(blob, dtype="<f8", count=in_dim * out_dim, offset=off)
        off += 8 * in_dim * out_dim
        b = np.frombuffer(blob, dtype="<f8", count=out_dim, offset=off)
        off += 8 * out_dim
        layers.append(Layer(W=W.reshape(in_dim, out_dim).copy(), b=b.copy()))
    if off != len(blob):
        raise TabarmError(f"{path}: trailing bytes in checkpoint")
    half = n_layers // 2
    return AutoencoderModel(
        encoder=layers[:half],
        decoder=layers[half:],
        schema=schema if schema is not None else _single_span(layers[0].in_dim),
    )
