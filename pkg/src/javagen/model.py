"""T5-style encoder-decoder transformer.

Pre-norm residual blocks with bias-free RMS normalization, ReLU feed-forward
layers, unscaled dot-product attention with a learned relative position bias
(one table per stack, shared by all its layers), and an input/output embedding
tied through a ``d_model ** -0.5`` rescale of the final hidden states.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Dict, List, Optional, Sequence

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from javagen.tokenizer import EOS_ID, PAD_ID


class InvalidConfig(ValueError):
    pass


class ShapeMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    num_layers: int = 2
    d_model: int = 64
    num_heads: int = 4
    d_ff: int = 256
    vocab_size: int = 512
    num_rel_buckets: int = 32
    max_rel_distance: int = 128
    dropout: float = 0.0

    def __post_init__(self):
        for f in ("num_layers", "d_model", "num_heads", "d_ff", "vocab_size", "num_rel_buckets", "max_rel_distance"):
            v = getattr(self, f)
            if not isinstance(v, int) or v < 1:
                raise InvalidConfig(f"{f} must be a positive integer, got {v!r}")
        if self.d_model % self.num_heads:
            raise InvalidConfig(f"d_model={self.d_model} is not divisible by num_heads={self.num_heads}")
        if self.dropout != 0.0:
            raise InvalidConfig("dropout is not supported (must be 0.0)")

    @property
    def d_kv(self) -> int:
        return self.d_model // self.num_heads

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise InvalidConfig(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


PRESETS = {
    "base": ModelConfig(num_layers=12, d_model=768, num_heads=12, d_ff=3072, vocab_size=32128),
    "large": ModelConfig(num_layers=24, d_model=1024, num_heads=16, d_ff=4096, vocab_size=32128),
    "toy": ModelConfig(num_layers=2, d_model=64, num_heads=4, d_ff=256, vocab_size=512),
}


def preset(name: str, **overrides) -> ModelConfig:
    if name not in PRESETS:
        raise InvalidConfig(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return ModelConfig(**{**PRESETS[name].to_dict(), **overrides})


def param_shapes(config: ModelConfig) -> Dict[str, tuple]:
    """Closed-form shape table keyed by parameter name."""
    d, h, dkv, ff = config.d_model, config.num_heads, config.d_kv, config.d_ff
    inner = h * dkv
    shapes: Dict[str, tuple] = {"shared.weight": (config.vocab_size, d)}

    def attn(prefix):
        return {
            f"{prefix}.q": (d, inner),
            f"{prefix}.k": (d, inner),
            f"{prefix}.v": (d, inner),
            f"{prefix}.o": (inner, d),
        }

    for stack in ("encoder", "decoder"):
        shapes[f"{stack}.rel_bias"] = (config.num_rel_buckets, h)
        for i in range(config.num_layers):
            p = f"{stack}.layers.{i}"
            shapes[f"{p}.self_norm"] = (d,)
            shapes.update(attn(f"{p}.self_attn"))
            if stack == "decoder":
                shapes[f"{p}.cross_norm"] = (d,)
                shapes.update(attn(f"{p}.cross_attn"))
            shapes[f"{p}.ff_norm"] = (d,)
            shapes[f"{p}.wi"] = (d, ff)
            shapes[f"{p}.wo"] = (ff, d)
        shapes[f"{stack}.final_norm"] = (d,)
    return shapes


def param_count(config: ModelConfig) -> int:
    return sum(math.prod(s) for s in param_shapes(config).values())


def relative_position_bucket(relative_position: torch.Tensor, bidirectional: bool, num_buckets: int, max_distance: int) -> torch.Tensor:
    """Map key-minus-query offsets to buckets: exact for small offsets,
    logarithmic up to ``max_distance``, saturating beyond."""
    ret = torch.zeros_like(relative_position)
    n = -relative_position
    if bidirectional:
        num_buckets //= 2
        ret = ret + (n < 0).long() * num_buckets
        n = n.abs()
    else:
        n = n.clamp(min=0)
    max_exact = num_buckets // 2
    is_small = n < max_exact
    large = max_exact + (
        torch.log(n.float().clamp(min=1) / max_exact)
        / math.log(max_distance / max_exact)
        * (num_buckets - max_exact)
    ).long()
    large = large.clamp(max=num_buckets - 1)
    return ret + torch.where(is_small, n, large)


class Attention(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        d, inner = config.d_model, config.num_heads * config.d_kv
        self.h, self.dkv = config.num_heads, config.d_kv
        self.q = nn.Parameter(torch.empty(d, inner))
        self.k = nn.Parameter(torch.empty(d, inner))
        self.v = nn.Parameter(torch.empty(d, inner))
        self.o = nn.Parameter(torch.empty(inner, d))

    def forward(self, x, memory, bias):
        """``bias`` is additive, broadcastable to (batch, heads, q_len, k_len)."""
        b, tq, _ = x.shape
        tk = memory.shape[1]
        q = (x @ self.q).view(b, tq, self.h, self.dkv).transpose(1, 2)
        k = (memory @ self.k).view(b, tk, self.h, self.dkv).transpose(1, 2)
        v = (memory @ self.v).view(b, tk, self.h, self.dkv).transpose(1, 2)
        # no 1/sqrt(d_kv): folded into the q initialization
        scores = q @ k.transpose(-1, -2) + bias
        weights = torch.softmax(scores, dim=-1)
        out = (weights @ v).transpose(1, 2).reshape(b, tq, self.h * self.dkv)
        return out @ self.o


class Layer(nn.Module):
    def __init__(self, config: ModelConfig, cross: bool):
        super().__init__()
        self.self_norm = nn.Parameter(torch.ones(config.d_model))
        self.self_attn = Attention(config)
        if cross:
            self.cross_norm = nn.Parameter(torch.ones(config.d_model))
            self.cross_attn = Attention(config)
        self.ff_norm = nn.Parameter(torch.ones(config.d_model))
        self.wi = nn.Parameter(torch.empty(config.d_model, config.d_ff))
        self.wo = nn.Parameter(torch.empty(config.d_ff, config.d_model))
        self.has_cross = cross

    def forward(self, x, self_bias, memory=None, cross_bias=None):
        h = _rms(x, self.self_norm)
        x = x + self.self_attn(h, h, self_bias)
        if self.has_cross:
            h = _rms(x, self.cross_norm)
            x = x + self.cross_attn(h, memory, cross_bias)
        h = _rms(x, self.ff_norm)
        return x + F.relu(h @ self.wi) @ self.wo


def _rms(x, weight, eps: float = 1e-6):
    return x * torch.rsqrt(x.pow(2).mean(-1, keepdim=True) + eps) * weight


class Stack(nn.Module):
    def __init__(self, config: ModelConfig, decoder: bool):
        super().__init__()
        self.rel_bias = nn.Parameter(torch.empty(config.num_rel_buckets, config.num_heads))
        self.layers = nn.ModuleList(Layer(config, cross=decoder) for _ in range(config.num_layers))
        self.final_norm = nn.Parameter(torch.ones(config.d_model))
        self.decoder = decoder
        self.config = config

    def position_bias(self, q_len: int, k_len: int) -> torch.Tensor:
        ctx = torch.arange(q_len)[:, None]
        mem = torch.arange(k_len)[None, :]
        buckets = relative_position_bucket(
            mem - ctx,
            bidirectional=not self.decoder,
            num_buckets=self.config.num_rel_buckets,
            max_distance=self.config.max_rel_distance,
        )
        # (q, k, heads) -> (1, heads, q, k)
        return self.rel_bias[buckets].permute(2, 0, 1).unsqueeze(0)


class Seq2SeqTransformer(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.shared = nn.Embedding(config.vocab_size, config.d_model)
        self.encoder = Stack(config, decoder=False)
        self.decoder = Stack(config, decoder=True)

    # -------------------------------------------------------------- params
    def init_weights(self, seed: int) -> "Seq2SeqTransformer":
        """Deterministic T5-style initialization (std scaled by fan-in)."""
        c = self.config
        g = torch.Generator().manual_seed(int(seed))
        stds = {
            "shared.weight": 1.0,
            "rel_bias": c.d_model ** -0.5,
            "q": (c.d_model * c.d_kv) ** -0.5,
            "k": c.d_model ** -0.5,
            "v": c.d_model ** -0.5,
            "o": (c.num_heads * c.d_kv) ** -0.5,
            "wi": c.d_model ** -0.5,
            "wo": c.d_ff ** -0.5,
        }
        with torch.no_grad():
            for name, p in self.named_parameters():
                leaf = name.rsplit(".", 1)[-1]
                if name == "shared.weight":
                    std = stds[name]
                elif leaf.endswith("norm"):
                    p.fill_(1.0)
                    continue
                else:
                    std = stds[leaf]
                noise = torch.randn(p.shape, generator=g, dtype=torch.float64) * std
                p.copy_(noise.to(p.dtype))
        return self

    def arrays(self) -> Dict[str, np.ndarray]:
        return {k: v.detach().cpu().numpy().copy() for k, v in self.state_dict().items()}

    def load_arrays(self, arrays: Dict[str, np.ndarray]) -> None:
        expected = self.state_dict()
        if set(arrays) != set(expected):
            raise ShapeMismatch("parameter names differ from the model's")
        state = {}
        for k, ref in expected.items():
            a = arrays[k]
            if tuple(a.shape) != tuple(ref.shape):
                raise ShapeMismatch(f"{k}: shape {a.shape} != {tuple(ref.shape)}")
            state[k] = torch.from_numpy(np.array(a, copy=True)).to(ref.dtype)
        self.load_state_dict(state)

    # ------------------------------------------------------------- forward
    def encode(self, enc_ids: torch.Tensor) -> tuple:
        if enc_ids.dim() != 2:
            raise ShapeMismatch("encoder ids must be (batch, length)")
        x = self.shared(enc_ids)
        key_mask = (enc_ids != PAD_ID)[:, None, None, :]
        neg = torch.finfo(x.dtype).min
        pad_bias = torch.zeros(key_mask.shape, dtype=x.dtype).masked_fill(~key_mask, neg)
        bias = self.encoder.position_bias(enc_ids.shape[1], enc_ids.shape[1]).to(x.dtype) + pad_bias
        for layer in self.encoder.layers:
            x = layer(x, bias)
        return _rms(x, self.encoder.final_norm), pad_bias

    def decode(self, memory: torch.Tensor, cross_bias: torch.Tensor, dec_ids: torch.Tensor) -> torch.Tensor:
        c = self.config
        if dec_ids.dim() != 2 or dec_ids.shape[0] != memory.shape[0]:
            raise ShapeMismatch("decoder ids must be (batch, length) with the encoder's batch size")
        t = dec_ids.shape[1]
        y = self.shared(dec_ids)
        neg = torch.finfo(y.dtype).min
        causal = torch.triu(torch.ones(t, t, dtype=torch.bool), diagonal=1)
        causal_bias = torch.zeros(t, t, dtype=y.dtype).masked_fill(causal, neg)[None, None]
        self_bias = self.decoder.position_bias(t, t).to(y.dtype) + causal_bias
        for layer in self.decoder.layers:
            y = layer(y, self_bias, memory, cross_bias)
        y = _rms(y, self.decoder.final_norm) * (c.d_model ** -0.5)
        return y @ self.shared.weight.t()

    def forward(self, enc_ids: torch.Tensor, dec_ids: torch.Tensor) -> torch.Tensor:
        if enc_ids.dim() != 2 or dec_ids.dim() != 2 or enc_ids.shape[0] != dec_ids.shape[0]:
            raise ShapeMismatch(
                f"expected (batch, len) id tensors with equal batch, got {tuple(enc_ids.shape)} and {tuple(dec_ids.shape)}"
            )
        v = self.config.vocab_size
        if enc_ids.numel() and (int(enc_ids.max()) >= v or int(enc_ids.min()) < 0):
            raise ShapeMismatch("encoder id out of vocabulary range")
        if dec_ids.numel() and (int(dec_ids.max()) >= v or int(dec_ids.min()) < 0):
            raise ShapeMismatch("decoder id out of vocabulary range")
        memory, cross_bias = self.encode(enc_ids)
        return self.decode(memory, cross_bias, dec_ids)


def build_model(config: ModelConfig, seed: int = 0, dtype=torch.float32) -> Seq2SeqTransformer:
    model = Seq2SeqTransformer(config).to(dtype)
    return model.init_weights(seed)


def loss(logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Mean token cross-entropy; pad targets are excluded from the mean."""
    if logits.dim() != 3 or logits.shape[:2] != targets.shape:
        raise ShapeMismatch(f"logits {tuple(logits.shape)} do not match targets {tuple(targets.shape)}")
    return F.cross_entropy(
        logits.reshape(-1, logits.shape[-1]), targets.reshape(-1), ignore_index=PAD_ID, reduction="mean"
    )


@torch.no_grad()
def greedy_decode(model: Seq2SeqTransformer, enc_ids, max_len: int) -> List[List[int]]:
    """Argmax decoding from the pad start symbol.

    Each output stops at (and includes) eos, or is cut at ``max_len`` ids.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    enc = torch.as_tensor(enc_ids, dtype=torch.long)
    if enc.dim() == 1:
        enc = enc[None]
    memory, cross_bias = model.encode(enc)
    b = enc.shape[0]
    dec = torch.full((b, 1), PAD_ID, dtype=torch.long)
    done = torch.zeros(b, dtype=torch.bool)
    for _ in range(max_len):
        logits = model.decode(memory, cross_bias, dec)
        nxt = logits[:, -1].argmax(-1)
        nxt = torch.where(done, torch.full_like(nxt, PAD_ID), nxt)
        dec = torch.cat([dec, nxt[:, None]], dim=1)
        done |= nxt == EOS_ID
        if bool(done.all()):
            break
    out = []
    for row in dec[:, 1:].tolist():
        seq = []
        for tok in row:
            seq.append(tok)
            if tok == EOS_ID:
                break
        out.append(seq)
    return out
