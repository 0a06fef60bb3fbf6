"""Span-corruption examples for denoising pretraining.

A corrupted example replaces dropped spans with sentinel ids in the encoder
input; the target lists each sentinel followed by the tokens it hides, then
eos. The decoder input is the target shifted right by one position with pad
as the start symbol.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from javagen.rng import XorShift64Star, derive_seed
from javagen.tokenizer import EOS_ID, N_SENTINELS, PAD_ID, is_special, sentinel_id

SHARD_MAGIC = b"JGSHARD\x00"
SHARD_VERSION = 1

Span = Tuple[int, int]


class TooManySpans(ValueError):
    pass


class SentinelMismatch(ValueError):
    pass


class EmptyTarget(ValueError):
    pass


@dataclass(frozen=True)
class DenoisingExample:
    encoder_input: Tuple[int, ...]
    target: Tuple[int, ...]
    decoder_input: Tuple[int, ...]
    vocab_size: int


def shift_right(target: Sequence[int]) -> List[int]:
    if len(target) == 0:
        raise EmptyTarget("cannot shift an empty target")
    if target[-1] != EOS_ID:
        raise ValueError("target must end with eos")
    return [PAD_ID] + list(target[:-1])


def sample_spans(n: int, rate: float, mean_span: float, rng: XorShift64Star) -> List[Span]:
    """Choose non-adjacent noise spans covering round(n * rate) tokens.

    Span lengths are Poisson(mean_span) clipped to >= 1, truncated so they sum
    to the noise budget; the kept tokens are then spread uniformly over the
    gaps, with at least one kept token between consecutive spans.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError("rate must lie in [0, 1)")
    if mean_span < 1:
        raise ValueError("mean_span must be >= 1")
    if n == 0 or rate == 0.0:
        return []
    num_noise = min(int(n * rate + 0.5), n - 1)
    if num_noise <= 0:
        return []
    lengths: List[int] = []
    remaining = num_noise
    while remaining > 0:
        length = min(max(1, rng.poisson(mean_span)), remaining)
        lengths.append(length)
        remaining -= length
    num_keep = n - num_noise
    while len(lengths) - 1 > num_keep:
        last = lengths.pop()
        lengths[-1] += last
    k = len(lengths)
    if k > N_SENTINELS:
        raise TooManySpans(f"{k} spans exceed the {N_SENTINELS} available sentinels")
    # stars and bars: distribute the free kept tokens over k+1 gaps
    free = num_keep - (k - 1)
    bars = rng.sample_sorted(free + k, k)
    gaps = [bars[0]] + [bars[i] - bars[i - 1] - 1 for i in range(1, k)] + [free + k - 1 - bars[-1]]
    for i in range(1, k):
        gaps[i] += 1
    spans: List[Span] = []
    pos = gaps[0]
    for i, length in enumerate(lengths):
        spans.append((pos, pos + length))
        pos += length + gaps[i + 1]
    return spans


def apply_spans(ids: Sequence[int], spans: Sequence[Span], vocab_size: int) -> DenoisingExample:
    """Build the example for an explicit list of half-open spans."""
    spans = sorted(spans)
    if len(spans) > N_SENTINELS:
        raise TooManySpans(f"{len(spans)} spans exceed the {N_SENTINELS} available sentinels")
    prev_end = -1
    for start, end in spans:
        if not (0 <= start < end <= len(ids)):
            raise ValueError(f"span {(start, end)} out of range for length {len(ids)}")
        if start <= prev_end:
            raise ValueError("spans must be non-overlapping and non-adjacent")
        prev_end = end
    enc: List[int] = []
    tgt: List[int] = []
    pos = 0
    for i, (start, end) in enumerate(spans):
        s = sentinel_id(i, vocab_size)
        enc.extend(ids[pos:start])
        enc.append(s)
        tgt.append(s)
        tgt.extend(ids[start:end])
        pos = end
    enc.extend(ids[pos:])
    enc.append(EOS_ID)
    tgt.append(EOS_ID)
    return DenoisingExample(tuple(enc), tuple(tgt), tuple(shift_right(tgt)), vocab_size)


def corrupt(
    ids: Sequence[int],
    rate: float = 0.15,
    mean_span: float = 3.0,
    seed: int = 0,
    *,
    vocab_size: int,
    spans: Optional[Sequence[Span]] = None,
) -> DenoisingExample:
    ids = [int(i) for i in ids]
    for i in ids:
        if is_special(i, vocab_size) or i >= vocab_size:
            raise ValueError(f"input contains special or out-of-range id {i}")
    if spans is None:
        spans = sample_spans(len(ids), rate, mean_span, XorShift64Star(seed))
    return apply_spans(ids, spans, vocab_size)


def reconstruct(example: DenoisingExample) -> List[int]:
    """Splice the target's spans back into the encoder input."""
    v = example.vocab_size
    base = v - N_SENTINELS
    enc = list(example.encoder_input)
    tgt = list(example.target)
    if not enc or enc[-1] != EOS_ID or not tgt or tgt[-1] != EOS_ID:
        raise SentinelMismatch("encoder input and target must end with eos")
    enc, tgt = enc[:-1], tgt[:-1]

    pieces: List[List[int]] = []
    order: List[int] = []
    for tok in tgt:
        if tok >= base:
            order.append(tok - base)
            pieces.append([])
        elif not pieces:
            raise SentinelMismatch("target must start with a sentinel")
        else:
            pieces[-1].append(tok)
    enc_order = [tok - base for tok in enc if tok >= base]
    if enc_order != order or order != list(range(len(order))):
        raise SentinelMismatch(f"sentinel order differs: encoder {enc_order}, target {order}")

    out: List[int] = []
    for tok in enc:
        if tok >= base:
            out.extend(pieces[tok - base])
        else:
            out.append(tok)
    return out


# ------------------------------------------------------------------ shards
#
# Layout (all integers little-endian):
#   magic        8 bytes  b"JGSHARD\0"
#   version      uint32   1
#   vocab_size   uint32
#   max_input    uint32   longest encoder_input in the shard
#   max_target   uint32   longest target in the shard
#   count        uint32   number of examples
#   then per example:
#     uint32 n, n * uint32 encoder_input ids
#     uint32 m, m * uint32 target ids
# The decoder input is not stored; it is shift_right(target).


def write_shard(examples: Sequence[DenoisingExample], fh: BinaryIO) -> None:
    vocab_size = examples[0].vocab_size if examples else 0
    max_in = max((len(e.encoder_input) for e in examples), default=0)
    max_tg = max((len(e.target) for e in examples), default=0)
    fh.write(SHARD_MAGIC)
    fh.write(struct.pack("<5I", SHARD_VERSION, vocab_size, max_in, max_tg, len(examples)))
    for e in examples:
        for arr in (e.encoder_input, e.target):
            fh.write(struct.pack("<I", len(arr)))
            fh.write(np.asarray(arr, dtype="<u4").tobytes())


def read_shard(fh: BinaryIO) -> Tuple[dict, List[DenoisingExample]]:
    if fh.read(8) != SHARD_MAGIC:
        raise ValueError("not a javagen shard")
    version, vocab_size, max_in, max_tg, count = struct.unpack("<5I", fh.read(20))
    if version != SHARD_VERSION:
        raise ValueError(f"unsupported shard version {version}")
    out = []
    for _ in range(count):
        arrays = []
        for _ in range(2):
            (n,) = struct.unpack("<I", fh.read(4))
            data = fh.read(4 * n)
            if len(data) != 4 * n:
                raise ValueError("truncated shard")
            arrays.append(tuple(int(x) for x in np.frombuffer(data, dtype="<u4")))
        enc, tgt = arrays
        out.append(DenoisingExample(enc, tgt, tuple(shift_right(tgt)), vocab_size))
    header = {"version": version, "vocab_size": vocab_size, "max_input_len": max_in, "max_target_len": max_tg, "count": count}
    return header, out


def corrupt_many(
    docs: Iterable[Sequence[int]], rate: float, mean_span: float, seed: int, vocab_size: int
) -> List[DenoisingExample]:
    """One example per document, each with its own derived seed."""
    return [
        corrupt(doc, rate, mean_span, derive_seed(seed, i), vocab_size=vocab_size)
        for i, doc in enumerate(docs)
    ]
