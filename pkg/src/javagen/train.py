"""Step-based denoising pretraining, fine-tuning and grid runs.

Batch composition is a pure function of ``(seed, step)``: example ``j`` of
the batch at step ``t`` is item ``(t * batch_size + j) mod N`` of the epoch's
seeded permutation, and its span corruption is seeded by ``(seed, t, j)``.
Resuming from a checkpoint therefore replays exactly the batches an
uninterrupted run would have seen.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch

from javagen import checkpoint as ckpt_io
from javagen.checkpoint import Checkpoint
from javagen.corpus import Sample, build_pretraining_pool, load_split
from javagen.denoise import corrupt, read_shard
from javagen.metrics.exact_match import exact_match
from javagen.metrics.report import evaluate
from javagen.model import ModelConfig, Seq2SeqTransformer, build_model, greedy_decode, loss, preset
from javagen.rng import XorShift64Star, derive_seed
from javagen.tokenizer import EOS_ID, PAD_ID, Vocabulary

MODES = ("pretrain", "finetune")

# derive_seed stream keys
_PERM_STREAM = 1
_NOISE_STREAM = 2
_INIT_STREAM = 3


class InvalidRunConfig(ValueError):
    pass


class VocabMismatch(ValueError):
    pass


class ConfigMismatch(ValueError):
    pass


@dataclass
class TrainingRunConfig:
    mode: str = "finetune"
    steps: int = 100
    batch_size: int = 8
    input_len: int = 64
    target_len: int = 64
    learning_rate: float = 1e-3
    warmup_fraction: float = 0.01
    # inverse-sqrt decay starts here; None means at the end of warmup
    decay_start: Optional[int] = None
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    clip_norm: float = 1.0
    seed: int = 0
    init_checkpoint: Optional[str] = None
    resume_from: Optional[str] = None
    model_preset: str = "toy"
    model_overrides: Dict[str, int] = field(default_factory=dict)
    vocab_path: Optional[str] = None
    data_paths: List[str] = field(default_factory=list)
    noise_rate: float = 0.15
    mean_span: float = 3.0
    checkpoint_dir: Optional[str] = None
    log_path: Optional[str] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidRunConfig(f"mode must be one of {MODES}, got {self.mode!r}")
        for name in ("steps", "batch_size", "input_len", "target_len", "seed"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool):
                raise InvalidRunConfig(f"{name} must be an integer, got {v!r}")
        if self.steps < 0:
            raise InvalidRunConfig("steps must be >= 0")
        if self.batch_size < 1:
            raise InvalidRunConfig("batch_size must be >= 1")
        if self.input_len < 2 or self.target_len < 2:
            raise InvalidRunConfig("input_len and target_len must be >= 2")
        if self.learning_rate <= 0:
            raise InvalidRunConfig("learning_rate must be positive")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise InvalidRunConfig("warmup_fraction must lie in [0, 1)")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise InvalidRunConfig("Adam betas must lie in [0, 1)")
        if self.init_checkpoint and self.resume_from:
            raise InvalidRunConfig("init_checkpoint and resume_from are mutually exclusive")
        self.data_paths = list(self.data_paths)
        self.model_overrides = dict(self.model_overrides)

    @property
    def warmup_steps(self) -> int:
        return max(1, round(self.warmup_fraction * self.steps))

    @property
    def checkpoint_every(self) -> int:
        return max(self.steps // 10, 1)

    def model_config(self, vocab_size: int) -> ModelConfig:
        overrides = dict(self.model_overrides)
        if overrides.setdefault("vocab_size", vocab_size) != vocab_size:
            raise VocabMismatch(f"model vocab_size {overrides['vocab_size']} != vocabulary size {vocab_size}")
        return preset(self.model_preset, **overrides)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingRunConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise InvalidRunConfig(f"unknown run config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "TrainingRunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def learning_rate(config: TrainingRunConfig, step: int) -> float:
    """Linear warmup, then inverse square-root decay; ``step`` counts from 1."""
    warm = config.warmup_steps
    decay_start = config.decay_start if config.decay_start is not None else warm
    scale = min(1.0, step / warm)
    if step > decay_start > 0:
        scale *= math.sqrt(decay_start / step)
    return config.learning_rate * scale


def set_sequential() -> None:
    """One thread and deterministic kernels, for bit-reproducible runs."""
    torch.set_num_threads(1)
    torch.use_deterministic_algorithms(True)


# ---------------------------------------------------------------- optimizer


class Adam:
    """Bias-corrected Adam with global-norm gradient clipping."""

    def __init__(self, model: Seq2SeqTransformer, config: TrainingRunConfig):
        self.params = dict(model.named_parameters())
        self.config = config
        self.m = {k: torch.zeros_like(p) for k, p in self.params.items()}
        self.v = {k: torch.zeros_like(p) for k, p in self.params.items()}
        self.step_count = 0

    @torch.no_grad()
    def step(self, lr: float) -> None:
        c = self.config
        grads = {k: p.grad for k, p in self.params.items() if p.grad is not None}
        if c.clip_norm > 0:
            norm = torch.sqrt(sum((g.double() ** 2).sum() for g in grads.values()))
            if norm > c.clip_norm:
                scale = float(c.clip_norm / norm)
                for g in grads.values():
                    g.mul_(scale)
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - c.beta1 ** t
        bc2 = 1.0 - c.beta2 ** t
        for k, g in grads.items():
            m, v = self.m[k], self.v[k]
            m.mul_(c.beta1).add_(g, alpha=1.0 - c.beta1)
            v.mul_(c.beta2).addcmul_(g, g, value=1.0 - c.beta2)
            denom = (v / bc2).sqrt_().add_(c.adam_eps)
            self.params[k].addcdiv_(m, denom, value=-lr / bc1)

    def state_arrays(self) -> Tuple[Dict[str, np.ndarray], Dict[str, np.ndarray]]:
        return (
            {k: t.detach().numpy().copy() for k, t in self.m.items()},
            {k: t.detach().numpy().copy() for k, t in self.v.items()},
        )

    def load_state(self, m: Dict[str, np.ndarray], v: Dict[str, np.ndarray], step: int) -> None:
        if set(m) != set(self.m) or set(v) != set(self.v):
            raise ConfigMismatch("optimizer state does not match the model's parameters")
        for k in self.m:
            self.m[k].copy_(torch.from_numpy(m[k]))
            self.v[k].copy_(torch.from_numpy(v[k]))
        self.step_count = step


# -------------------------------------------------------------------- data


def pad_to(ids: Sequence[int], length: int) -> List[int]:
    ids = list(ids)[:length]
    return ids + [PAD_ID] * (length - len(ids))


def encode_source(vocab: Vocabulary, text: str, input_len: int) -> List[int]:
    return vocab.encode(text)[: input_len - 1] + [EOS_ID]


def encode_target(vocab: Vocabulary, code: str, target_len: int) -> Tuple[List[int], bool]:
    """Target ids cut to ``target_len`` and whether the cut dropped anything."""
    ids = vocab.encode(code) + [EOS_ID]
    return ids[:target_len], len(ids) > target_len


def count_truncated(vocab: Vocabulary, codes: Sequence[str], target_len: int) -> int:
    return sum(1 for code in codes if len(vocab.encode(code)) + 1 > target_len)


class BatchSource:
    """Seed-determined padded batches; ``batch(t)`` is pure in ``t``."""

    def __init__(self, n_items: int, config: TrainingRunConfig, make_example: Callable[[int, int, int], Tuple]):
        if n_items == 0:
            raise InvalidRunConfig("training data is empty")
        self.n = n_items
        self.config = config
        self.make_example = make_example
        self._perms: Dict[int, List[int]] = {}

    def _item(self, k: int) -> int:
        epoch, pos = divmod(k, self.n)
        perm = self._perms.get(epoch)
        if perm is None:
            perm = XorShift64Star(derive_seed(self.config.seed, _PERM_STREAM, epoch)).permutation(self.n)
            self._perms = {epoch: perm}
        return perm[pos]

    def batch(self, t: int) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        c = self.config
        enc, dec, tgt = [], [], []
        for j in range(c.batch_size):
            e, y = self.make_example(self._item(t * c.batch_size + j), t, j)
            y = pad_to(y, c.target_len)
            enc.append(pad_to(e, c.input_len))
            tgt.append(y)
            dec.append([PAD_ID] + y[:-1])
        as_t = lambda rows: torch.tensor(rows, dtype=torch.long)  # noqa: E731
        return as_t(enc), as_t(dec), as_t(tgt)


def load_samples(paths: Sequence[str]) -> List[Sample]:
    out: List[Sample] = []
    for p in paths:
        out.extend(load_split(p, "train"))
    return out


def pretrain_source(config: TrainingRunConfig, vocab: Vocabulary, docs: Optional[Sequence[str]] = None) -> BatchSource:
    """Denoising batches from code text or pre-built shard files.

    Code text is corrupted on the fly with per-(step, slot) seeds; shard
    examples are used as stored.
    """
    shard_paths = [p for p in config.data_paths if p.endswith(".shard")]
    if docs is None and shard_paths:
        examples = []
        for p in shard_paths:
            with open(p, "rb") as fh:
                header, ex = read_shard(fh)
            if header["vocab_size"] != vocab.size:
                raise VocabMismatch(f"{p}: shard vocab_size {header['vocab_size']} != {vocab.size}")
            examples.extend(ex)
        return BatchSource(len(examples), config, lambda i, t, j: (examples[i].encoder_input, examples[i].target))
    if docs is None:
        docs = build_pretraining_pool({"train": load_samples(config.data_paths)})
    encoded = [vocab.encode(d)[: config.input_len - 1] for d in docs]

    def make(i, t, j):
        ex = corrupt(
            encoded[i],
            config.noise_rate,
            config.mean_span,
            derive_seed(config.seed, _NOISE_STREAM, t, j),
            vocab_size=vocab.size,
        )
        return ex.encoder_input, ex.target

    return BatchSource(len(encoded), config, make)


def finetune_source(
    config: TrainingRunConfig, vocab: Vocabulary, pairs: Optional[Sequence[Tuple[str, str]]] = None
) -> Tuple[BatchSource, int]:
    if pairs is None:
        samples = load_samples(config.data_paths)
        pairs = [(s.nl, s.code) for s in samples]
    for i, (nl, _) in enumerate(pairs):
        if not nl.strip():
            raise InvalidRunConfig(f"finetune needs paired nl/code data; sample {i} has empty nl")
    encoded = []
    truncated = 0
    for nl, code in pairs:
        tgt, cut = encode_target(vocab, code, config.target_len)
        truncated += cut
        encoded.append((encode_source(vocab, nl, config.input_len), tgt))
    return BatchSource(len(encoded), config, lambda i, t, j: encoded[i]), truncated


# ---------------------------------------------------------------- training


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    losses: List[float]
    samples_truncated: int = 0


def _check_compatible(ck: Checkpoint, model_config: ModelConfig, vocab: Vocabulary, what: str) -> None:
    if ck.vocab_fingerprint != vocab.fingerprint:
        raise VocabMismatch(f"{what} was trained with a different vocabulary")
    if ck.model_config != model_config:
        raise ConfigMismatch(f"{what} model config {ck.model_config.to_dict()} != {model_config.to_dict()}")


def _snapshot(model, opt: Adam, model_config, vocab, config: TrainingRunConfig, extra: dict) -> Checkpoint:
    m, v = opt.state_arrays()
    return Checkpoint(
        model_config=model_config,
        params=model.arrays(),
        adam_m=m,
        adam_v=v,
        step=opt.step_count,
        vocab_fingerprint=vocab.fingerprint,
        meta={"run_config": config.to_dict(), **extra},
    )


def train(
    config: TrainingRunConfig,
    vocab: Vocabulary,
    *,
    docs: Optional[Sequence[str]] = None,
    pairs: Optional[Sequence[Tuple[str, str]]] = None,
    on_step: Optional[Callable[[dict], None]] = None,
) -> TrainResult:
    """Run ``config.steps`` optimizer updates and return the final state.

    ``docs`` (pretrain) or ``pairs`` (finetune) override ``data_paths``.
    """
    model_config = config.model_config(vocab.size)
    model = build_model(model_config, seed=derive_seed(config.seed, _INIT_STREAM))
    opt = Adam(model, config)

    if config.init_checkpoint:
        ck = ckpt_io.load(config.init_checkpoint)
        _check_compatible(ck, model_config, vocab, "init checkpoint")
        model.load_arrays(ck.params)
    elif config.resume_from:
        ck = ckpt_io.load(config.resume_from)
        _check_compatible(ck, model_config, vocab, "resume checkpoint")
        model.load_arrays(ck.params)
        opt.load_state(ck.adam_m, ck.adam_v, ck.step)
        if ck.step > config.steps:
            raise InvalidRunConfig(f"checkpoint is at step {ck.step}, beyond steps={config.steps}")

    truncated = 0
    if config.mode == "pretrain":
        source = pretrain_source(config, vocab, docs)
    else:
        source, truncated = finetune_source(config, vocab, pairs)
    extra = {"mode": config.mode, "samples_truncated": truncated}

    log_fh = open(config.log_path, "a", encoding="utf-8") if config.log_path else None
    if config.checkpoint_dir:
        os.makedirs(config.checkpoint_dir, exist_ok=True)
    losses: List[float] = []
    try:
        model.train()
        while opt.step_count < config.steps:
            t = opt.step_count
            enc, dec, tgt = source.batch(t)
            for p in model.parameters():
                p.grad = None
            value = loss(model(enc, dec), tgt)
            value.backward()
            lr = learning_rate(config, t + 1)
            opt.step(lr)
            record = {"step": t + 1, "loss": value.item(), "lr": lr}
            losses.append(record["loss"])
            if log_fh:
                log_fh.write(json.dumps(record) + "\n")
            if on_step:
                on_step(record)
            if config.checkpoint_dir and opt.step_count % config.checkpoint_every == 0:
                snap = _snapshot(model, opt, model_config, vocab, config, extra)
                ckpt_io.save(snap, os.path.join(config.checkpoint_dir, f"step_{opt.step_count:08d}.ckpt"))
    finally:
        if log_fh:
            log_fh.close()
    return TrainResult(_snapshot(model, opt, model_config, vocab, config, extra), losses, truncated)


def pretrain(config: TrainingRunConfig, vocab: Vocabulary, docs: Optional[Sequence[str]] = None, **kw) -> TrainResult:
    if config.mode != "pretrain":
        raise InvalidRunConfig("pretrain() needs mode='pretrain'")
    return train(config, vocab, docs=docs, **kw)


def finetune(
    config: TrainingRunConfig, vocab: Vocabulary, pairs: Optional[Sequence[Tuple[str, str]]] = None, **kw
) -> TrainResult:
    if config.mode != "finetune":
        raise InvalidRunConfig("finetune() needs mode='finetune'")
    return train(config, vocab, pairs=pairs, **kw)


# -------------------------------------------------------------- generation


def model_from_checkpoint(ck: Checkpoint) -> Seq2SeqTransformer:
    model = Seq2SeqTransformer(ck.model_config)
    model.load_arrays(ck.params)
    model.eval()
    return model


def generate(
    model: Seq2SeqTransformer,
    vocab: Vocabulary,
    sources: Sequence[str],
    input_len: int,
    max_len: int,
    batch_size: int = 32,
) -> List[str]:
    """Greedy decode each source; the eos marker is dropped from the text."""
    out: List[str] = []
    for start in range(0, len(sources), batch_size):
        chunk = sources[start:start + batch_size]
        enc = [pad_to(encode_source(vocab, s, input_len), input_len) for s in chunk]
        for ids in greedy_decode(model, enc, max_len):
            out.append(vocab.decode([i for i in ids if i not in (EOS_ID, PAD_ID)]))
    return out


# -------------------------------------------------------------------- grid


GRID_COLUMNS = ("input_len", "target_len", "steps", "bleu", "em", "codebleu", "samples_truncated", "em_truncated")


@dataclass
class GridRow:
    input_len: int
    target_len: int
    steps: int
    bleu: float
    em: float
    codebleu: float
    # eval samples whose gold code ids (eos excluded) exceed target_len
    samples_truncated: int
    # EM over those samples only; None if there are none
    em_truncated: Optional[float]


@dataclass
class GridReport:
    rows: List[GridRow]

    def as_dict(self) -> dict:
        return {"columns": list(GRID_COLUMNS), "rows": [asdict(r) for r in self.rows]}

    def render(self) -> str:
        header = ["input / target length", "# steps", "BLEU", "EM", "CodeBLEU", "truncated", "EM (truncated)"]
        body = [
            [
                f"{r.input_len} / {r.target_len}",
                str(r.steps),
                f"{r.bleu:.2f}",
                f"{r.em:.2f}",
                f"{r.codebleu:.2f}",
                str(r.samples_truncated),
                "-" if r.em_truncated is None else f"{r.em_truncated:.2f}",
            ]
            for r in self.rows
        ]
        widths = [max(len(x[i]) for x in [header] + body) for i in range(len(header))]
        line = lambda cells: "| " + " | ".join(c.rjust(w) for c, w in zip(cells, widths)) + " |"  # noqa: E731
        sep = "|" + "|".join("-" * (w + 2) for w in widths) + "|"
        return "\n".join([line(header), sep, *map(line, body)])


def run_grid(
    configs: Sequence[TrainingRunConfig],
    eval_pairs: Sequence[Tuple[str, str]],
    vocab: Vocabulary,
    train_pairs: Optional[Sequence[Tuple[str, str]]] = None,
) -> GridReport:
    """Fine-tune once per config and score greedy outputs on ``eval_pairs``.

    Decoding is capped at each row's ``target_len``, so a gold program that
    needs more ids than that can never be reproduced exactly. A program of
    exactly ``target_len`` ids loses only its eos and can still be matched,
    so it does not count as truncated here.
    """
    rows = []
    for config in configs:
        if config.mode != "finetune":
            raise InvalidRunConfig("grid rows must be finetune runs")
        result = finetune(config, vocab, train_pairs)
        model = model_from_checkpoint(result.checkpoint)
        sources = [nl for nl, _ in eval_pairs]
        refs = [code for _, code in eval_pairs]
        preds = generate(model, vocab, sources, config.input_len, config.target_len)
        report = evaluate(preds, refs)
        cut = [i for i, code in enumerate(refs) if len(vocab.encode(code)) > config.target_len]
        em_cut = None
        if cut:
            em_cut = exact_match([preds[i] for i in cut], [refs[i] for i in cut])
        rows.append(
            GridRow(
                config.input_len,
                config.target_len,
                config.steps,
                report.bleu,
                report.em,
                report.codebleu,
                len(cut),
                em_cut,
            )
        )
    return GridReport(rows)
