"""Tokenization, vocabulary construction and smoothed unigram models."""

from __future__ import annotations

import codecs
import io
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Iterator

import numpy as np

CHUNK_SIZE = 1 << 20


class CorpusError(ValueError):
    pass


def tokenize(stream: BinaryIO | bytes | str, chunk_size: int = CHUNK_SIZE) -> Iterator[str]:
    """Yield lowercased whitespace-delimited tokens from a UTF-8 byte stream.

    ``stream`` may be a binary file object, raw bytes, or an already decoded
    string. Invalid UTF-8 raises :class:`CorpusError` carrying the absolute
    byte offset of the offending byte.
    """
    if isinstance(stream, str):
        yield from stream.lower().split()
        return
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(stream)

    decoder = codecs.getincrementaldecoder("utf-8")("strict")
    consumed = 0
    carry = ""
    while True:
        chunk = stream.read(chunk_size)
        final = not chunk
        pending = len(decoder.getstate()[0])
        try:
            text = decoder.decode(chunk, final=final)
        except UnicodeDecodeError as exc:
            offset = consumed - pending + exc.start
            raise CorpusError(f"invalid UTF-8 at byte offset {offset}") from None
        consumed += len(chunk)
        text = carry + text
        if final:
            yield from text.lower().split()
            return
        # a token may continue into the next chunk
        if text and not text[-1].isspace():
            head, sep, carry = _rsplit_ws(text)
            text = head
        else:
            carry = ""
        yield from text.lower().split()


def _rsplit_ws(text: str) -> tuple[str, str, str]:
    for k in range(len(text) - 1, -1, -1):
        if text[k].isspace():
            return text[:k], text[k], text[k + 1 :]
    return "", "", text


def iter_file_tokens(path: str | os.PathLike, max_bytes: int | None = None) -> Iterator[str]:
    with open(path, "rb") as fh:
        if max_bytes is None:
            yield from tokenize(fh)
        else:
            # cut at a whitespace boundary so the last token is not truncated
            data = fh.read(max_bytes)
            extra = b""
            while True:
                b = fh.read(1)
                if not b or b.isspace():
                    break
                extra += b
            yield from tokenize(data + extra)


@dataclass(frozen=True)
class Vocabulary:
    words: tuple[str, ...]
    counts: np.ndarray
    total_tokens: int
    min_count: int
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "index", {w: i for i, w in enumerate(self.words)})
        if len(self.index) != len(self.words):
            raise CorpusError("duplicate words in vocabulary")

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.index

    @property
    def ranks(self) -> np.ndarray:
        return np.arange(1, len(self.words) + 1, dtype=np.int64)

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / float(self.total_tokens)

    def encode(self, tokens: Iterable[str], keep_positions: bool = False) -> np.ndarray:
        """Map tokens to ids.

        Out-of-vocabulary tokens are dropped, so the stream closes up around
        them. With ``keep_positions`` they are kept as ``-1`` placeholders
        instead, which window-based consumers skip without closing the gap.
        """
        get = self.index.get
        if keep_positions:
            return np.fromiter((get(t, -1) for t in tokens), dtype=np.int32)
        return np.fromiter((i for i in map(get, tokens) if i is not None), dtype=np.int32)

    def to_text(self) -> str:
        lines = [f"#total_tokens={self.total_tokens}"]
        lines.extend(f"{w}\t{c}" for w, c in zip(self.words, self.counts.tolist()))
        return "\n".join(lines) + "\n"

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Vocabulary":
        words: list[str] = []
        counts: list[int] = []
        total = None
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                if line.startswith("#"):
                    key, _, value = line[1:].partition("=")
                    if key == "total_tokens":
                        total = int(value)
                    continue
                try:
                    word, count = line.split("\t")
                    counts.append(int(count))
                except ValueError:
                    raise CorpusError(f"{path}:{lineno}: expected 'word<TAB>count'") from None
                words.append(word)
        if total is None:
            raise CorpusError(f"{path}: missing #total_tokens header")
        if not words:
            raise CorpusError(f"{path}: empty vocabulary")
        return cls(tuple(words), np.asarray(counts), total, min(counts))


def count_tokens(tokens: Iterable[str]) -> tuple[Counter, int]:
    counts: Counter = Counter()
    total = 0
    for tok in tokens:
        counts[tok] += 1
        total += 1
    return counts, total


def merge_counts(parts: Iterable[tuple[Counter, int]]) -> tuple[Counter, int]:
    merged: Counter = Counter()
    total = 0
    for counts, n in parts:
        merged.update(counts)
        total += n
    return merged, total


def vocabulary_from_counts(counts: Counter, total_tokens: int, min_count: int) -> Vocabulary:
    if min_count < 1:
        raise CorpusError(f"min_count must be >= 1, got {min_count}")
    kept = [(w, c) for w, c in counts.items() if c >= min_count]
    if not kept:
        raise CorpusError(f"no word occurs at least {min_count} times")
    kept.sort(key=lambda wc: (-wc[1], wc[0]))
    words, cs = zip(*kept)
    return Vocabulary(tuple(words), np.asarray(cs, dtype=np.int64), int(total_tokens), min_count)


def build_vocabulary(tokens: Iterable[str], min_count: int) -> Vocabulary:
    """Vocabulary of words occurring at least ``min_count`` times.

    Ids are assigned by descending count with ties broken lexicographically;
    ``total_tokens`` counts the whole stream including discarded words.
    """
    if min_count < 1:
        raise CorpusError(f"min_count must be >= 1, got {min_count}")
    counts, total = count_tokens(tokens)
    return vocabulary_from_counts(counts, total, min_count)


@dataclass(frozen=True)
class UnigramModel:
    alpha: float
    probs: np.ndarray
    normalizer: float
    mode: str


def harmonic_normalizer(n: int, alpha: float) -> float:
    """Generalized harmonic number sum_{k=1..n} k^(alpha-1)."""
    k = np.arange(1, n + 1, dtype=np.float64)
    # summing smallest terms first keeps the rounding error down for large n
    return float(np.sum((k ** (alpha - 1.0))[::-1]))


def unigram_probs(vocab: Vocabulary | int, alpha: float, mode: str = "rank") -> UnigramModel:
    """Smoothed unigram distribution over a vocabulary.

    ``mode="rank"`` gives p_i = r_i^(alpha-1) / H_{n,alpha} with r_i the
    frequency rank; ``mode="count"`` gives p_i proportional to
    count_i^(1-alpha), the form used for negative sampling. ``vocab`` may be
    an int for the rank mode, meaning a vocabulary of that size.
    """
    if not (0.0 < alpha <= 1.0):
        raise CorpusError(f"alpha must lie in (0, 1], got {alpha}")
    if mode == "rank":
        n = vocab if isinstance(vocab, int) else len(vocab)
        if n < 1:
            raise CorpusError("empty vocabulary")
        ranks = np.arange(1, n + 1, dtype=np.float64)
        weights = ranks ** (alpha - 1.0)
        norm = harmonic_normalizer(n, alpha)
    elif mode == "count":
        if isinstance(vocab, int):
            raise CorpusError("count mode needs a Vocabulary")
        if len(vocab) == 0:
            raise CorpusError("empty vocabulary")
        weights = vocab.counts.astype(np.float64) ** (1.0 - alpha)
        norm = float(np.sum(weights[::-1]))
    else:
        raise CorpusError(f"unknown unigram mode {mode!r}")
    probs = weights / norm
    probs.setflags(write=False)
    return UnigramModel(alpha=alpha, probs=probs, normalizer=norm, mode=mode)


def subsample_keep_prob(vocab: Vocabulary, threshold: float) -> np.ndarray:
    """Probability of keeping each word under frequent-word subsampling.

    keep_i = min(1, sqrt(t/f_i) + t/f_i) with f_i the relative frequency.
    """
    if threshold <= 0:
        raise CorpusError(f"subsample threshold must be > 0, got {threshold}")
    ratio = threshold / vocab.frequencies
    return np.minimum(1.0, np.sqrt(ratio) + ratio)
