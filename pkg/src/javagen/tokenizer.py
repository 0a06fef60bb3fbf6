"""Byte-level BPE vocabulary with reserved T5-style special ids.

Id layout for a vocabulary of size V::

    0 pad | 1 eos | 2 unk | 3..258 raw bytes | learned merges | V-100..V-1 sentinels

Every UTF-8 string is encodable because any byte falls back to its byte id.
"""

from __future__ import annotations

import hashlib
import heapq
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from javagen.validation import check_texts

PAD_ID = 0
EOS_ID = 1
UNK_ID = 2
N_SENTINELS = 100
BYTE_OFFSET = 3
N_RESERVED = BYTE_OFFSET + 256 + N_SENTINELS

FORMAT_HEADER = "javagen-bpe 1"

# GPT-2 style pre-tokenization; merges never cross these chunk boundaries
_CHUNK = re.compile(r" ?\w+| ?[^\s\w]+|\s+(?!\S)|\s+")


class VocabTooSmall(ValueError):
    pass


class UnknownId(ValueError):
    pass


class EmptyDataset(ValueError):
    pass


def sentinel_id(index: int, vocab_size: int) -> int:
    if not 0 <= index < N_SENTINELS:
        raise ValueError(f"sentinel index {index} out of range")
    return vocab_size - N_SENTINELS + index


def is_special(token_id: int, vocab_size: int) -> bool:
    return token_id < BYTE_OFFSET or token_id >= vocab_size - N_SENTINELS


@dataclass
class Vocabulary:
    """Merge table over piece indices (0..255 are bytes, 256+r is merge r)."""

    merges: List[Tuple[int, int]]
    pieces: List[bytes] = field(init=False)
    _ranks: Dict[Tuple[int, int], int] = field(init=False, repr=False)
    _cache: Dict[str, List[int]] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.pieces = [bytes([b]) for b in range(256)]
        self._ranks = {}
        for rank, (a, b) in enumerate(self.merges):
            if not (0 <= a < len(self.pieces) and 0 <= b < len(self.pieces)):
                raise ValueError(f"merge {rank} refers to an undefined piece")
            self.pieces.append(self.pieces[a] + self.pieces[b])
            self._ranks[(a + BYTE_OFFSET, b + BYTE_OFFSET)] = rank
        self._cache = {}

    @property
    def size(self) -> int:
        return BYTE_OFFSET + len(self.pieces) + N_SENTINELS

    def __len__(self) -> int:
        return self.size

    def sentinel(self, index: int) -> int:
        return sentinel_id(index, self.size)

    def piece(self, token_id: int) -> str:
        """Human-readable form of one id."""
        if token_id == PAD_ID:
            return "<pad>"
        if token_id == EOS_ID:
            return "</s>"
        if token_id == UNK_ID:
            return "<unk>"
        if token_id >= self.size - N_SENTINELS and token_id < self.size:
            return f"<extra_id_{token_id - (self.size - N_SENTINELS)}>"
        if BYTE_OFFSET <= token_id < self.size:
            return self.pieces[token_id - BYTE_OFFSET].decode("utf-8", errors="backslashreplace")
        raise UnknownId(token_id)

    # ---------------------------------------------------------------- coding
    def _encode_chunk(self, chunk: str) -> List[int]:
        cached = self._cache.get(chunk)
        if cached is not None:
            return cached
        ids = [b + BYTE_OFFSET for b in chunk.encode("utf-8")]
        ranks = self._ranks
        while len(ids) > 1:
            best_rank = None
            for pair in zip(ids, ids[1:]):
                r = ranks.get(pair)
                if r is not None and (best_rank is None or r < best_rank):
                    best_rank = r
            if best_rank is None:
                break
            ia, ib = (p + BYTE_OFFSET for p in self.merges[best_rank])
            new_id = BYTE_OFFSET + 256 + best_rank
            out: List[int] = []
            i = 0
            while i < len(ids):
                if i + 1 < len(ids) and ids[i] == ia and ids[i + 1] == ib:
                    out.append(new_id)
                    i += 2
                else:
                    out.append(ids[i])
                    i += 1
            ids = out
        if len(self._cache) < 100_000:
            self._cache[chunk] = ids
        return ids

    def encode(self, text: str) -> List[int]:
        out: List[int] = []
        for chunk in _CHUNK.findall(text):
            out.extend(self._encode_chunk(chunk))
        return out

    def decode(self, ids: Iterable[int]) -> str:
        """Inverse of :meth:`encode`; pad/eos are dropped, sentinels rendered."""
        buf = bytearray()
        size = self.size
        for raw in ids:
            i = int(raw)
            if i < 0 or i >= size:
                raise UnknownId(i)
            if i in (PAD_ID, EOS_ID):
                continue
            if i == UNK_ID:
                buf.extend("�".encode("utf-8"))
            elif i >= size - N_SENTINELS:
                buf.extend(f"<extra_id_{i - (size - N_SENTINELS)}>".encode("utf-8"))
            else:
                buf.extend(self.pieces[i - BYTE_OFFSET])
        return buf.decode("utf-8", errors="replace")

    # ------------------------------------------------------------ persistence
    def dumps(self) -> str:
        lines = [FORMAT_HEADER, f"vocab_size {self.size}", f"merges {len(self.merges)}"]
        lines.extend(f"{a} {b}" for a, b in self.merges)
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "Vocabulary":
        lines = text.split("\n")
        if not lines or lines[0] != FORMAT_HEADER:
            raise ValueError("not a javagen BPE vocabulary file")
        size = int(lines[1].split()[1])
        n = int(lines[2].split()[1])
        merges = []
        for line in lines[3:3 + n]:
            a, b = line.split(" ")
            merges.append((int(a), int(b)))
        vocab = cls(merges)
        if vocab.size != size:
            raise ValueError(f"vocabulary size mismatch: header {size}, rebuilt {vocab.size}")
        return vocab

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8", newline="\n") as fh:
            return cls.loads(fh.read())

    @property
    def fingerprint(self) -> str:
        return hashlib.sha256(self.dumps().encode("utf-8")).hexdigest()


def train_vocab(texts: Iterable[str], vocab_size: int) -> Vocabulary:
    """Greedy pair merging; ties go to the lexicographically smallest pair.

    Stops early (yielding a smaller vocabulary) once every chunk is a single
    piece.
    """
    if vocab_size <= N_RESERVED:
        raise VocabTooSmall(
            f"vocab_size must exceed {N_RESERVED} (3 specials + 256 bytes + {N_SENTINELS} sentinels)"
        )
    n_merges = vocab_size - N_RESERVED

    chunk_counts: Counter = Counter()
    for text in texts:
        chunk_counts.update(_CHUNK.findall(text))
    # symbols are piece ids local to training (0..255 bytes, then merges)
    pieces: List[bytes] = [bytes([b]) for b in range(256)]
    words: List[List[int]] = []
    freqs: List[int] = []
    for chunk in sorted(chunk_counts):
        words.append(list(chunk.encode("utf-8")))
        freqs.append(chunk_counts[chunk])

    pair_counts: Dict[Tuple[int, int], int] = defaultdict(int)
    where: Dict[Tuple[int, int], set] = defaultdict(set)
    for wi, (w, f) in enumerate(zip(words, freqs)):
        for pair in zip(w, w[1:]):
            pair_counts[pair] += f
            where[pair].add(wi)

    heap = [(-c, pieces[a], pieces[b], (a, b)) for (a, b), c in pair_counts.items()]
    heapq.heapify(heap)
    merges: List[Tuple[int, int]] = []

    while len(merges) < n_merges and heap:
        negc, _, _, pair = heapq.heappop(heap)
        count = pair_counts.get(pair, 0)
        if count != -negc:
            continue  # stale entry
        a, b = pair
        new = len(pieces)
        pieces.append(pieces[a] + pieces[b])
        merges.append((a, b))
        touched: Dict[Tuple[int, int], int] = {}
        for wi in sorted(where.pop(pair, ())):
            w, f = words[wi], freqs[wi]
            for p in zip(w, w[1:]):
                pair_counts[p] -= f
                touched[p] = 1
            merged: List[int] = []
            i = 0
            while i < len(w):
                if i + 1 < len(w) and w[i] == a and w[i + 1] == b:
                    merged.append(new)
                    i += 2
                else:
                    merged.append(w[i])
                    i += 1
            words[wi] = merged
            for p in zip(merged, merged[1:]):
                pair_counts[p] += f
                where[p].add(wi)
                touched[p] = 1
        for p in touched:
            c = pair_counts[p]
            if c <= 0:
                pair_counts.pop(p, None)
                where.pop(p, None)
            else:
                heapq.heappush(heap, (-c, pieces[p[0]], pieces[p[1]], p))
    return Vocabulary(merges)


@dataclass
class LengthProfile:
    max_input_len: int
    max_target_len: int
    input_histogram: Dict[int, int]
    target_histogram: Dict[int, int]

    def as_dict(self) -> dict:
        return {
            "max_input_len": self.max_input_len,
            "max_target_len": self.max_target_len,
            "input_histogram": {str(k): v for k, v in sorted(self.input_histogram.items())},
            "target_histogram": {str(k): v for k, v in sorted(self.target_histogram.items())},
        }


def max_pair_length(vocab: Vocabulary, samples: Sequence) -> LengthProfile:
    """Longest encoded input and target (+1 for eos) over ``samples``.

    Run over train+valid, these lengths are used for both the encoder and the
    decoder so that no gold target is cut off during fine-tuning.
    """
    if not samples:
        raise EmptyDataset("max_pair_length needs at least one sample")
    in_hist: Counter = Counter()
    tgt_hist: Counter = Counter()
    for s in samples:
        in_hist[len(vocab.encode(s.nl)) + 1] += 1
        tgt_hist[len(vocab.encode(s.code)) + 1] += 1
    return LengthProfile(max(in_hist), max(tgt_hist), dict(in_hist), dict(tgt_hist))


class BPETokenizer(BaseEstimator, TransformerMixin):
    """scikit-learn wrapper: ``fit`` learns merges, ``transform`` encodes.

    ``transform`` returns a list of id lists (ragged), optionally with eos
    appended; ``inverse_transform`` decodes back to text.
    """

    def __init__(self, vocab_size: int = 512, add_eos: bool = False):
        self.vocab_size = vocab_size
        self.add_eos = add_eos

    def fit(self, X, y=None):
        X = check_texts(X)
        self.vocab_ = train_vocab(X, self.vocab_size)
        self.n_tokens_ = self.vocab_.size
        return self

    def transform(self, X) -> List[List[int]]:
        check_is_fitted(self, "vocab_")
        X = check_texts(X)
        tail = [EOS_ID] if self.add_eos else []
        return [self.vocab_.encode(x) + tail for x in X]

    def inverse_transform(self, X) -> List[str]:
        check_is_fitted(self, "vocab_")
        return [self.vocab_.decode(np.asarray(ids, dtype=np.int64).tolist()) for ids in X]

    @classmethod
    def from_vocabulary(cls, vocab: Vocabulary, add_eos: bool = False) -> "BPETokenizer":
        tok = cls(vocab_size=vocab.size, add_eos=add_eos)
        tok.vocab_ = vocab
        tok.n_tokens_ = vocab.size
        return tok
