"""Transformer encoder classifier over encoded (question, transcript) pairs.

Post-norm encoder stack: multi-head scaled dot-product self-attention with
additive masking of PAD keys, residual + layer norm, two-matrix feed-forward
with a smooth ReLU-family activation, residual + layer norm; masked-mean (or
first-token) pooling feeds a two-class head.  Forward and backward passes
are written out against plain numpy arrays so gradients can be audited
against finite differences; no autodiff framework is involved.

Attention/FFN projections carry no bias terms (layer norms and the head do).
Positional encodings are the fixed sinusoidal closed form, never learned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LN_EPS = 1e-5
MASK_NEG = 1e9  # additive penalty that underflows to exactly 0 after softmax
N_CLASSES = 2


class NeuralError(Exception):
    pass


class InvalidConfig(NeuralError):
    pass


class ShapeMismatch(NeuralError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    d_model: int
    n_heads: int
    n_layers: int
    d_ff: int
    max_len: int
    vocab_size: int
    dropout_rate: float = 0.1
    pooling: str = "mean"  # "mean" | "first"
    activation: str = "gelu"  # "gelu" | "relu"
    seed: int = 0

    def validate(self) -> None:
        if self.d_model < 2 or self.d_model % self.n_heads != 0:
            raise InvalidConfig(
                f"d_model={self.d_model} must be >= 2 and divisible by n_heads={self.n_heads}"
            )
        if self.n_layers < 1 or self.d_ff < 1:
            raise InvalidConfig("n_layers and d_ff must be >= 1")
        if self.max_len < 8:
            raise InvalidConfig(f"max_len must be >= 8, got {self.max_len}")
        if self.vocab_size < 5:
            raise InvalidConfig(f"vocab_size must be >= 5, got {self.vocab_size}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise InvalidConfig(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.pooling not in ("mean", "first"):
            raise InvalidConfig(f"pooling must be 'mean' or 'first', got {self.pooling!r}")
        if self.activation not in ("gelu", "relu"):
            raise InvalidConfig(f"activation must be 'gelu' or 'relu', got {self.activation!r}")

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads


def sinusoidal_positions(max_len: int, d_model: int, dtype=np.float32) -> np.ndarray:
    """PE[p, 2i] = sin(p / 10000^(2i/d)), PE[p, 2i+1] = cos(p / 10000^(2i/d))."""
    pos = np.arange(max_len, dtype=np.float64)[:, None]
    dim = np.arange(d_model, dtype=np.float64)[None, :]
    angles = pos / np.power(10000.0, (2.0 * np.floor(dim / 2.0)) / d_model)
    pe = np.where(dim % 2 == 0, np.sin(angles), np.cos(angles))
    return pe.astype(dtype)


_GELU_C = math.sqrt(2.0 / math.pi)


def _gelu(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Tanh-approximation GELU; returns (value, tanh term) so the backward
    pass can skip recomputing the transcendental."""
    t = np.tanh(_GELU_C * (z + 0.044715 * z * z * z))
    return 0.5 * z * (1.0 + t), t


def _gelu_grad(z: np.ndarray, t: np.ndarray) -> np.ndarray:
    du = _GELU_C * (1.0 + 0.134145 * z * z)
    return 0.5 * (1.0 + t) + 0.5 * z * (1.0 - t * t) * du


def _softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def _layernorm(z: np.ndarray, gain: np.ndarray, bias: np.ndarray):
    mu = z.mean(axis=-1, keepdims=True)
    xc = z - mu
    var = (xc**2).mean(axis=-1, keepdims=True)
    invstd = 1.0 / np.sqrt(var + LN_EPS)
    zhat = xc * invstd
    return zhat * gain + bias, (zhat, invstd, gain)


def _layernorm_backward(dout: np.ndarray, cache) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    zhat, invstd, gain = cache
    dgain = (dout * zhat).sum(axis=tuple(range(dout.ndim - 1)))
    dbias = dout.sum(axis=tuple(range(dout.ndim - 1)))
    dzhat = dout * gain
    dz = invstd * (
        dzhat
        - dzhat.mean(axis=-1, keepdims=True)
        - zhat * (dzhat * zhat).mean(axis=-1, keepdims=True)
    )
    return dz, dgain, dbias


class TransformerClassifier:
    """Parameter store plus forward/backward passes.

    Parameters live in a name -> array dict; `param_names()` fixes the
    declared order used by initialization and the binary artifact.
    """

    def __init__(self, config: ModelConfig, dtype=np.float32):
        config.validate()
        self.config = config
        self.dtype = np.dtype(dtype)
        self.params: dict[str, np.ndarray] = {}
        self.positions = sinusoidal_positions(config.max_len, config.d_model, self.dtype)
        self._last_attention: list[np.ndarray] | None = None

    # -- parameter bookkeeping ------------------------------------------------

    def param_shapes(self) -> list[tuple[str, tuple[int, ...]]]:
        cfg = self.config
        shapes: list[tuple[str, tuple[int, ...]]] = [("embedding", (cfg.vocab_size, cfg.d_model))]
        for i in range(cfg.n_layers):
            p = f"layer{i}."
            shapes += [
                (p + "wq", (cfg.d_model, cfg.d_model)),
                (p + "wk", (cfg.d_model, cfg.d_model)),
                (p + "wv", (cfg.d_model, cfg.d_model)),
                (p + "wo", (cfg.d_model, cfg.d_model)),
                (p + "ln1_gain", (cfg.d_model,)),
                (p + "ln1_bias", (cfg.d_model,)),
                (p + "w1", (cfg.d_model, cfg.d_ff)),
                (p + "w2", (cfg.d_ff, cfg.d_model)),
                (p + "ln2_gain", (cfg.d_model,)),
                (p + "ln2_bias", (cfg.d_model,)),
            ]
        shapes += [("head_w", (cfg.d_model, N_CLASSES)), ("head_b", (N_CLASSES,))]
        return shapes

    def param_names(self) -> list[str]:
        return [name for name, _ in self.param_shapes()]

    def n_params(self) -> int:
        return sum(int(np.prod(s)) for _, s in self.param_shapes())

    def copy_params(self) -> dict[str, np.ndarray]:
        return {name: arr.copy() for name, arr in self.params.items()}

    def set_params(self, params: dict[str, np.ndarray]) -> None:
        for name, _ in self.param_shapes():
            self.params[name] = params[name].astype(self.dtype)

    def astype(self, dtype) -> "TransformerClassifier":
        clone = TransformerClassifier(self.config, dtype=dtype)
        clone.params = {n: a.astype(dtype) for n, a in self.params.items()}
        return clone

    # -- forward / backward ---------------------------------------------------

    def _check_batch(self, ids: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ids = np.asarray(ids)
        mask = np.asarray(mask)
        if ids.ndim != 2 or ids.shape[1] != self.config.max_len:
            raise ShapeMismatch(
                f"ids must be (batch, {self.config.max_len}), got {ids.shape}"
            )
        if mask.shape != ids.shape:
            raise ShapeMismatch(f"mask shape {mask.shape} != ids shape {ids.shape}")
        return ids.astype(np.int64), mask.astype(self.dtype)

    def _dropout(self, x: np.ndarray, rng: np.random.Generator, caches: list) -> np.ndarray:
        rate = self.config.dropout_rate
        keep = (rng.random(x.shape) >= rate).astype(self.dtype) / self.dtype.type(1.0 - rate)
        caches.append(keep)
        return x * keep

    def forward(
        self,
        ids: np.ndarray,
        mask: np.ndarray,
        training: bool = False,
        rng: np.random.Generator | None = None,
        want_cache: bool = False,
    ):
        """Returns (logits, probs[, cache]).  Dropout fires only when
        training=True and the configured rate is positive."""
        cfg = self.config
        ids, maskf = self._check_batch(ids, mask)
        dropping = training and cfg.dropout_rate > 0.0
        if dropping and rng is None:
            raise NeuralError("training-mode forward with dropout needs an rng")
        drop_caches: list[np.ndarray] = []

        x = self.params["embedding"][ids] + self.positions[None, : ids.shape[1]]
        if dropping:
            x = self._dropout(x, rng, drop_caches)
        emb_x = x

        B, L = ids.shape
        H, Dh = cfg.n_heads, cfg.d_head
        scale = 1.0 / math.sqrt(Dh)
        key_penalty = (maskf[:, None, None, :] - 1.0) * self.dtype.type(MASK_NEG)

        layer_caches = []
        attentions = []
        for i in range(cfg.n_layers):
            p = self.params
            pre = f"layer{i}."
            x_in = x
            q = (x @ p[pre + "wq"]).reshape(B, L, H, Dh).transpose(0, 2, 1, 3)
            k = (x @ p[pre + "wk"]).reshape(B, L, H, Dh).transpose(0, 2, 1, 3)
            v = (x @ p[pre + "wv"]).reshape(B, L, H, Dh).transpose(0, 2, 1, 3)
            scores = q @ k.swapaxes(-1, -2) * scale + key_penalty
            attn = _softmax(scores, axis=-1)
            ctx = (attn @ v).transpose(0, 2, 1, 3).reshape(B, L, cfg.d_model)
            attn_out = ctx @ p[pre + "wo"]
            if dropping:
                attn_out = self._dropout(attn_out, rng, drop_caches)
            res1 = x_in + attn_out
            h, ln1_cache = _layernorm(res1, p[pre + "ln1_gain"], p[pre + "ln1_bias"])

            pre_act = h @ p[pre + "w1"]
            if cfg.activation == "gelu":
                act, act_t = _gelu(pre_act)
            else:
                act, act_t = np.maximum(0.0, pre_act), None
            ffn_out = act @ p[pre + "w2"]
            if dropping:
                ffn_out = self._dropout(ffn_out, rng, drop_caches)
            res2 = h + ffn_out
            x, ln2_cache = _layernorm(res2, p[pre + "ln2_gain"], p[pre + "ln2_bias"])

            attentions.append(attn)
            if want_cache:
                layer_caches.append(
                    dict(
                        x_in=x_in, q=q, k=k, v=v, attn=attn, ctx=ctx,
                        ln1=ln1_cache, h=h, pre_act=pre_act, act=act, act_t=act_t,
                        ln2=ln2_cache,
                    )
                )

        counts = maskf.sum(axis=1, keepdims=True)
        if cfg.pooling == "mean":
            pooled = (x * maskf[:, :, None]).sum(axis=1) / counts
        else:
            pooled = x[:, 0]
        logits = pooled @ self.params["head_w"] + self.params["head_b"]
        probs = _softmax(logits, axis=-1)
        self._last_attention = attentions

        if not want_cache:
            return logits, probs
        cache = dict(
            ids=ids, maskf=maskf, counts=counts, emb_x=emb_x, layers=layer_caches,
            final_x=x, pooled=pooled, probs=probs, drop_caches=drop_caches,
            dropping=dropping,
        )
        return logits, probs, cache

    def last_attention(self) -> list[np.ndarray]:
        """Per-layer attention weights (B, H, L, L) from the latest forward."""
        if self._last_attention is None:
            raise NeuralError("no forward pass has run yet")
        return self._last_attention

    def loss_and_grads(
        self,
        ids: np.ndarray,
        mask: np.ndarray,
        labels: np.ndarray,
        training: bool = False,
        rng: np.random.Generator | None = None,
    ) -> tuple[float, dict[str, np.ndarray], np.ndarray]:
        """Mean cross-entropy and gradients for every parameter."""
        cfg = self.config
        logits, probs, cache = self.forward(ids, mask, training=training, rng=rng, want_cache=True)
        labels = np.asarray(labels).astype(np.int64)
        B = logits.shape[0]
        # stable log-softmax for the loss value
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        loss = float(-log_probs[np.arange(B), labels].mean())

        grads = {name: np.zeros_like(arr) for name, arr in self.params.items()}
        dlogits = probs.copy()
        dlogits[np.arange(B), labels] -= 1.0
        dlogits /= B

        grads["head_w"] = cache["pooled"].T @ dlogits
        grads["head_b"] = dlogits.sum(axis=0)
        dpooled = dlogits @ self.params["head_w"].T

        maskf, counts = cache["maskf"], cache["counts"]
        L = maskf.shape[1]
        if cfg.pooling == "mean":
            dx = dpooled[:, None, :] * (maskf / counts)[:, :, None]
        else:
            dx = np.zeros_like(cache["final_x"])
            dx[:, 0] = dpooled

        drop_caches = list(cache["drop_caches"])
        H, Dh = cfg.n_heads, cfg.d_head
        Bsz = maskf.shape[0]
        scale = 1.0 / math.sqrt(Dh)

        for i in reversed(range(cfg.n_layers)):
            p = self.params
            pre = f"layer{i}."
            lc = cache["layers"][i]

            dres2, dg2, db2 = _layernorm_backward(dx, lc["ln2"])
            grads[pre + "ln2_gain"] = dg2
            grads[pre + "ln2_bias"] = db2
            dffn_out = dres2
            dh = dres2.copy()
            if cache["dropping"]:
                dffn_out = dffn_out * drop_caches.pop()
            act2d = lc["act"].reshape(-1, cfg.d_ff)
            grads[pre + "w2"] = act2d.T @ dffn_out.reshape(-1, cfg.d_model)
            dact = dffn_out @ p[pre + "w2"].T
            if cfg.activation == "gelu":
                dpre_act = dact * _gelu_grad(lc["pre_act"], lc["act_t"])
            else:
                dpre_act = dact * (lc["pre_act"] > 0)
            grads[pre + "w1"] = lc["h"].reshape(-1, cfg.d_model).T @ dpre_act.reshape(-1, cfg.d_ff)
            dh += dpre_act @ p[pre + "w1"].T

            dres1, dg1, db1 = _layernorm_backward(dh, lc["ln1"])
            grads[pre + "ln1_gain"] = dg1
            grads[pre + "ln1_bias"] = db1
            dattn_out = dres1
            dx = dres1.copy()
            if cache["dropping"]:
                dattn_out = dattn_out * drop_caches.pop()
            ctx2d = lc["ctx"].reshape(-1, cfg.d_model)
            grads[pre + "wo"] = ctx2d.T @ dattn_out.reshape(-1, cfg.d_model)
            dctx = (dattn_out @ p[pre + "wo"].T).reshape(Bsz, L, H, Dh).transpose(0, 2, 1, 3)

            attn, q, k, v = lc["attn"], lc["q"], lc["k"], lc["v"]
            dattn = dctx @ v.swapaxes(-1, -2)
            dv = attn.swapaxes(-1, -2) @ dctx
            dscores = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True))
            dq = dscores @ k * scale
            dk = dscores.swapaxes(-1, -2) @ q * scale

            x_in2d = lc["x_in"].reshape(-1, cfg.d_model)
            for name, dproj in (("wq", dq), ("wk", dk), ("wv", dv)):
                d2d = dproj.transpose(0, 2, 1, 3).reshape(-1, cfg.d_model)
                grads[pre + name] = x_in2d.T @ d2d
                dx += (d2d @ p[pre + name].T).reshape(Bsz, L, cfg.d_model)

        if cache["dropping"]:
            dx = dx * drop_caches.pop()
        demb = grads["embedding"]
        np.add.at(demb, cache["ids"], dx)
        return loss, grads, probs

    def predict_proba(self, ids: np.ndarray, mask: np.ndarray) -> np.ndarray:
        _, probs = self.forward(ids, mask, training=False)
        return probs


def init_model(config: ModelConfig, dtype=np.float32) -> TransformerClassifier:
    """Seeded uniform init in [-1/sqrt(d_model), +1/sqrt(d_model)] for every
    learned matrix; layer-norm gains 1 and biases 0; head bias 0."""
    model = TransformerClassifier(config, dtype=dtype)
    rng = np.random.default_rng(config.seed)
    bound = 1.0 / math.sqrt(config.d_model)
    for name, shape in model.param_shapes():
        if name.endswith("_gain"):
            arr = np.ones(shape)
        elif name.endswith("_bias") or name == "head_b":
            arr = np.zeros(shape)
        else:
            arr = rng.uniform(-bound, bound, size=shape)
        model.params[name] = arr.astype(model.dtype)
    return model
