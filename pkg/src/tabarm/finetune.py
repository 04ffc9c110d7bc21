"""Embedding-guided fine-tuning of the autoencoder.

Two strategies, both driven by per-row foundation-model embeddings read from
the EMBEDV1 exchange file:

* weight initialization ("wi"): a projection encoder is trained to map one-hot
  rows into the embedding space with a cosine objective, and its first layer
  seeds the autoencoder's first encoder layer before normal training;
* double loss ("dl"): the projection encoder is pre-trained on reconstructions
  of noised inputs, then frozen, and the autoencoder is trained on
  reconstruction loss plus the cosine alignment of its outputs' projections.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .autoencoder import (
    AdamState,
    AutoencoderModel,
    TrainConfig,
    _leaky,
    _leaky_grad,
    default_layer_dims,
    init_xavier,
    train,
)
from .errors import EmbeddingFormatError, TabarmError
from .tabular import OneHotMatrix

LAYERNORM_EPS = 1e-5
DROPOUT_RATE = 0.1

EXCHANGE_MAGIC = "EMBEDV1"
META_KEYS = ("n", "d_e", "source_model", "target_column", "folds", "seed")


@dataclass(frozen=True)
class EmbeddingMatrix:
    """n x d_e per-row embeddings plus provenance meta."""

    values: np.ndarray
    meta: dict

    def __post_init__(self) -> None:
        if self.values.ndim != 2:
            raise ValueError("embeddings must be a 2-D matrix")
        if not np.isfinite(self.values).all():
            i, j = np.argwhere(~np.isfinite(self.values))[0]
            raise ValueError(f"non-finite embedding at row {i}, column {j}")
        if self.meta.get("n") != self.values.shape[0] or self.meta.get("d_e") != self.values.shape[1]:
            raise EmbeddingFormatError("meta n/d_e disagree with the value matrix")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d_e(self) -> int:
        return self.values.shape[1]


def make_synthetic_embeddings(n: int, d_e: int, seed: int) -> EmbeddingMatrix:
    """Seeded standard-normal embeddings; the test stand-in for a real exporter."""
    rng = np.random.default_rng(seed)
    return EmbeddingMatrix(
        values=rng.standard_normal((n, d_e)),
        meta={
            "n": n,
            "d_e": d_e,
            "source_model": "synthetic",
            "target_column": None,
            "folds": 0,
            "seed": seed,
        },
    )


def save_embeddings(em: EmbeddingMatrix, path: str) -> None:
    """Write the EMBEDV1 exchange file (header, JSON meta, CSV body)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{EXCHANGE_MAGIC},n={em.n},d_e={em.d_e}\n")
        fh.write(json.dumps({k: em.meta.get(k) for k in META_KEYS}, separators=(",", ":")))
        fh.write("\n")
        for row in em.values:
            fh.write(",".join(f"{v:.17g}" for v in row))
            fh.write("\n")


def load_embeddings(path: str) -> EmbeddingMatrix:
    """Parse an EMBEDV1 file strictly; dimension and finiteness checks applied."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        parts = header.split(",")
        if (
            len(parts) != 3
            or parts[0] != EXCHANGE_MAGIC
            or not parts[1].startswith("n=")
            or not parts[2].startswith("d_e=")
        ):
            raise EmbeddingFormatError(f"{path}: bad header line {header!r}")
        try:
            n = int(parts[1][2:])
            d_e = int(parts[2][4:])
        except ValueError:
            raise EmbeddingFormatError(f"{path}: bad header line {header!r}") from None
        meta_line = fh.readline()
        if not meta_line:
            raise EmbeddingFormatError(f"{path}: missing meta line")
        try:
            meta = json.loads(meta_line)
        except json.JSONDecodeError as exc:
            raise EmbeddingFormatError(f"{path}: meta line is not JSON: {exc}") from None
        if not isinstance(meta, dict) or any(k not in meta for k in META_KEYS):
            raise EmbeddingFormatError(f"{path}: meta must carry keys {META_KEYS}")
        if meta["n"] != n or meta["d_e"] != d_e:
            raise EmbeddingFormatError(f"{path}: header and meta disagree on n or d_e")
        values = np.empty((n, d_e), dtype=np.float64)
        for i in range(n):
            line = fh.readline()
            if not line:
                raise EmbeddingFormatError(f"{path}: expected {n} data rows, found {i}")
            fields = line.rstrip("\n").split(",")
            if len(fields) != d_e:
                raise EmbeddingFormatError(
                    f"{path}: row {i} has {len(fields)} values, expected {d_e}"
                )
            for j, text in enumerate(fields):
                try:
                    values[i, j] = float(text)
                except ValueError:
                    raise EmbeddingFormatError(
                        f"{path}: row {i}, column {j}: not a decimal value: {text!r}"
                    ) from None
        if fh.readline().strip():
            raise EmbeddingFormatError(f"{path}: more data rows than the declared n={n}")
    if not np.isfinite(values).all():
        i, j = np.argwhere(~np.isfinite(values))[0]
        raise ValueError(f"{path}: non-finite value at row {i}, column {j}")
    return EmbeddingMatrix(values=values, meta=meta)


def _cosine_terms(P: np.ndarray, E: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    p_norm = np.linalg.norm(P, axis=1)
    e_norm = np.linalg.norm(E, axis=1)
    denom = p_norm * e_norm
    ok = denom > 0.0
    cos = np.zeros(P.shape[0])
    cos[ok] = np.einsum("bi,bi->b", P, E)[ok] / denom[ok]
    return cos, p_norm, ok


def cosine_alignment_loss(P: np.ndarray, E: EmbeddingMatrix | np.ndarray) -> float:
    """1 - mean row-wise cosine similarity; zero-norm rows count as cosine 0."""
    target = E.values if isinstance(E, EmbeddingMatrix) else np.asarray(E, float)
    P = np.asarray(P, dtype=np.float64)
    if P.shape != target.shape:
        raise ValueError(f"shape mismatch: {P.shape} vs {target.shape}")
    cos, _, _ = _cosine_terms(P, target)
    return float(1.0 - cos.mean())


def _cosine_loss_grad(P: np.ndarray, E: np.ndarray) -> tuple[float, np.ndarray]:
    cos, p_norm, ok = _cosine_terms(P, E)
    loss = float(1.0 - cos.mean())
    grad = np.zeros_like(P)
    n = P.shape[0]
    e_norm = np.linalg.norm(E, axis=1)
    idx = np.nonzero(ok)[0]
    for i in idx:
        grad[i] = -(E[i] / (p_norm[i] * e_norm[i]) - cos[i] * P[i] / (p_norm[i] ** 2)) / n
    return loss, grad


@dataclass
class ProjectionEncoder:
    """Two-layer map to the embedding space: affine, LayerNorm, LeakyReLU, dropout, affine."""

    W1: np.ndarray  # (d', h)
    b1: np.ndarray
    gain: np.ndarray  # layer-norm scale over h
    offset: np.ndarray
    W2: np.ndarray  # (h, d_e)
    b2: np.ndarray
    dropout_rate: float = DROPOUT_RATE

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[1]

    def parameters(self) -> list[np.ndarray]:
        return [self.W1, self.b1, self.gain, self.offset, self.W2, self.b2]

    def copy(self) -> "ProjectionEncoder":
        return ProjectionEncoder(
            *(p.copy() for p in self.parameters()), dropout_rate=self.dropout_rate
        )

    def _forward(self, x: np.ndarray, mask: np.ndarray | None) -> tuple[np.ndarray, dict]:
        z1 = np.einsum("bi,ih->bh", x, self.W1) + self.b1
        mu = z1.mean(axis=1, keepdims=True)
        var = z1.var(axis=1, keepdims=True)
        inv = 1.0 / np.sqrt(var + LAYERNORM_EPS)
        norm = (z1 - mu) * inv
        ln = norm * self.gain + self.offset
        act = _leaky(ln)
        dropped = act * mask if mask is not None else act
        out = np.einsum("bh,he->be", dropped, self.W2) + self.b2
        cache = {"x": x, "inv": inv, "norm": norm, "ln": ln, "act": act,
                 "mask": mask, "dropped": dropped}
        return out, cache

    def forward_eval(self, x: np.ndarray) -> np.ndarray:
        """Deterministic forward pass (dropout disabled)."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return self._forward(x, None)[0]

    def _backward(
        self, cache: dict, gout: np.ndarray
    ) -> tuple[list[np.ndarray], np.ndarray]:
        gW2 = np.einsum("bh,be->he", cache["dropped"], gout)
        gb2 = gout.sum(axis=0)
        gdropped = np.einsum("be,he->bh", gout, self.W2)
        gact = gdropped * cache["mask"] if cache["mask"] is not None else gdropped
        gln = gact * _leaky_grad(cache["ln"])
        ggain = (gln * cache["norm"]).sum(axis=0)
        goffset = gln.sum(axis=0)
        gnorm = gln * self.gain
        h = gnorm.shape[1]
        # LayerNorm input gradient (population statistics over the h axis).
        mean_g = gnorm.mean(axis=1, keepdims=True)
        mean_gx = (gnorm * cache["norm"]).mean(axis=1, keepdims=True)
        gz1 = cache["inv"] * (gnorm - mean_g - cache["norm"] * mean_gx)
        gW1 = np.einsum("bi,bh->ih", cache["x"], gz1)
        gb1 = gz1.sum(axis=0)
        gx = np.einsum("bh,ih->bi", gz1, self.W1)
        return [gW1, gb1, ggain, goffset, gW2, gb2], gx

    def input_grad_eval(self, x: np.ndarray, gout: np.ndarray) -> np.ndarray:
        """Gradient of an eval-mode forward pass with respect to its input."""
        _, cache = self._forward(np.atleast_2d(x), None)
        return self._backward(cache, np.atleast_2d(gout))[1]


def init_projection_encoder(
    input_dim: int, hidden: int, embed_dim: int, seed: int
) -> ProjectionEncoder:
    rng = np.random.default_rng(seed)

    def uniform(fan_in: int, fan_out: int) -> np.ndarray:
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=(fan_in, fan_out))

    return ProjectionEncoder(
        W1=uniform(input_dim, hidden),
        b1=np.zeros(hidden),
        gain=np.ones(hidden),
        offset=np.zeros(hidden),
        W2=uniform(hidden, embed_dim),
        b2=np.zeros(embed_dim),
    )


def default_projection_config(seed: int) -> TrainConfig:
    """Projection-encoder training defaults: 25 epochs, early stopping on."""
    return TrainConfig(
        epochs=25,
        batch_size=2,
        learning_rate=1e-3,
        noise_std=0.0,
        seed=seed,
        validation_fraction=0.2,
        patience=20,
        min_delta=1e-4,
    )


def train_projection_encoder(
    inputs: np.ndarray,
    E: EmbeddingMatrix,
    cfg: TrainConfig,
    hidden: int,
) -> ProjectionEncoder:
    """Adam on the cosine alignment loss; dropout active only while training."""
    inputs = np.asarray(inputs, dtype=np.float64)
    n = inputs.shape[0]
    if n < 2:
        raise TabarmError("projection encoder needs at least 2 rows")
    if E.n != n:
        raise ValueError(f"embeddings have {E.n} rows, inputs have {n}")
    encoder = init_projection_encoder(inputs.shape[1], hidden, E.d_e, cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    if cfg.validation_fraction > 0.0:
        perm = rng.permutation(n)
        n_val = min(max(1, int(round(cfg.validation_fraction * n))), n - 1)
        val_idx, train_idx = perm[:n_val], perm[n_val:]
    else:
        val_idx, train_idx = None, np.arange(n)

    params = encoder.parameters()
    opt = AdamState(params, cfg.learning_rate)
    best_loss = np.inf
    best_params: list[np.ndarray] | None = None
    stale = 0
    keep = 1.0 - encoder.dropout_rate
    for _ in range(cfg.epochs):
        order = rng.permutation(len(train_idx))
        for start in range(0, len(train_idx), cfg.batch_size):
            idx = train_idx[order[start : start + cfg.batch_size]]
            xb = inputs[idx]
            mask = None
            if encoder.dropout_rate > 0.0:
                mask = (rng.random((len(idx), hidden)) < keep) / keep
            out, cache = encoder._forward(xb, mask)
            _, gout = _cosine_loss_grad(out, E.values[idx])
            grads, _ = encoder._backward(cache, gout)
            opt.step(params, grads)
        if val_idx is not None:
            val_loss = cosine_alignment_loss(
                encoder.forward_eval(inputs[val_idx]), E.values[val_idx]
            )
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
    return encoder


def _check_pairing(data: OneHotMatrix, E: EmbeddingMatrix) -> None:
    if E.n != data.n_rows:
        raise ValueError(f"embeddings cover {E.n} rows, data has {data.n_rows}")


def finetune_wi(
    data: OneHotMatrix,
    E: EmbeddingMatrix,
    cfg: TrainConfig,
    proj_cfg: TrainConfig | None = None,
    layer_dims: list[int] | None = None,
) -> AutoencoderModel:
    """Weight-initialization strategy: transfer the projection first layer.

    The projection encoder is trained on the raw one-hot rows; its (W1, b1)
    replace the autoencoder's first encoder layer (everything else keeps the
    Xavier draw for cfg.seed) before the usual denoising training runs.
    """
    _check_pairing(data, E)
    dims = layer_dims or default_layer_dims(data.schema.total_features)
    proj_cfg = proj_cfg or default_projection_config(cfg.seed)
    projector = train_projection_encoder(data.values, E, proj_cfg, hidden=dims[1])
    model = init_xavier(dims, cfg.seed, data.schema)
    first = model.encoder[0]
    if projector.W1.shape != first.W.shape:
        raise ValueError(
            f"projection first layer {projector.W1.shape} does not match "
            f"autoencoder first layer {first.W.shape}"
        )
    first.W[...] = projector.W1
    first.b[...] = projector.b1
    return train(model, data, cfg)


def finetune_dl(
    data: OneHotMatrix,
    E: EmbeddingMatrix,
    cfg: TrainConfig,
    lambda_proj: float = 1.0,
    proj_cfg: TrainConfig | None = None,
    layer_dims: list[int] | None = None,
) -> AutoencoderModel:
    """Double-loss strategy: align reconstructions with the embeddings.

    Phase 1 trains the projection encoder on the fresh autoencoder's
    reconstructions of noised inputs. Phase 2 freezes it and trains the
    autoencoder on reconstruction loss plus lambda_proj times the cosine
    alignment of the projected reconstructions. With lambda_proj = 0 the
    result is bit-identical to plain train() on the same data and config.
    """
    if lambda_proj < 0.0:
        raise ValueError("lambda_proj must be >= 0")
    _check_pairing(data, E)
    dims = layer_dims or default_layer_dims(data.schema.total_features)
    model = init_xavier(dims, cfg.seed, data.schema)

    phase_rng = np.random.default_rng([cfg.seed, 1])
    if cfg.noise_std > 0.0:
        noisy = np.clip(
            data.values + phase_rng.normal(0.0, cfg.noise_std, data.values.shape), 0.0, 1.0
        )
    else:
        noisy = data.values
    reconstructions = model.reconstruct(noisy)
    proj_cfg = proj_cfg or default_projection_config(cfg.seed)
    projector = train_projection_encoder(reconstructions, E, proj_cfg, hidden=dims[1])

    extra = None
    if lambda_proj > 0.0:
        frozen = projector.copy()

        def extra(probs: np.ndarray, idx: np.ndarray) -> tuple[float, np.ndarray]:
            out, cache = frozen._forward(np.atleast_2d(probs), None)
            loss, gout = _cosine_loss_grad(out, E.values[idx])
            _, gx = frozen._backward(cache, gout)
            return lambda_proj * loss, lambda_proj * gx

    return train(model, data, cfg, extra=extra)
