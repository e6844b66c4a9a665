"""Word/context embedding storage and the word2vec-style file formats."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .theory import ReflectionMask


class EmbeddingError(ValueError):
    pass


@dataclass
class EmbeddingStore:
    """Word matrix plus either a free context matrix or a fixed sign mask.

    In tied mode the context vector of word ``i`` is ``mask.signs * W[i]``;
    it is computed on demand and never stored.
    """

    W: np.ndarray
    C: np.ndarray | None = None
    mask: ReflectionMask | None = None
    words: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if (self.C is None) == (self.mask is None):
            raise EmbeddingError("exactly one of C (untied) or mask (tied) is required")
        if self.C is not None and self.C.shape != self.W.shape:
            raise EmbeddingError(f"C has shape {self.C.shape}, W has {self.W.shape}")
        if self.mask is not None and self.mask.d != self.W.shape[1]:
            raise EmbeddingError(f"mask has d={self.mask.d}, W has d={self.W.shape[1]}")
        if self.words is not None and len(self.words) != self.W.shape[0]:
            raise EmbeddingError("word list length does not match W")

    @property
    def tied(self) -> bool:
        return self.mask is not None

    @property
    def n(self) -> int:
        return self.W.shape[0]

    @property
    def d(self) -> int:
        return self.W.shape[1]

    @property
    def trainable_parameters(self) -> int:
        return self.W.size + (0 if self.tied else self.C.size)

    def context(self, i: int) -> np.ndarray:
        if self.tied:
            return self.W[i] * self.mask.signs.astype(self.W.dtype)
        return self.C[i]

    def context_matrix(self) -> np.ndarray:
        if self.tied:
            return self.W * self.mask.signs.astype(self.W.dtype)
        return self.C

    def copy(self) -> "EmbeddingStore":
        return EmbeddingStore(
            self.W.copy(), None if self.C is None else self.C.copy(), self.mask, self.words
        )

    def index(self) -> dict[str, int]:
        if self.words is None:
            raise EmbeddingError("store has no word list")
        return {w: i for i, w in enumerate(self.words)}


def _words_for(store: EmbeddingStore, words) -> tuple[str, ...]:
    words = tuple(words) if words is not None else store.words
    if words is None:
        raise EmbeddingError("no word list to write")
    if len(words) != store.n:
        raise EmbeddingError("word list length does not match W")
    return words


def write_text(path, matrix: np.ndarray, words) -> None:
    n, d = matrix.shape
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{n} {d}\n")
        for word, row in zip(words, matrix):
            fh.write(word + " " + " ".join(f"{v:.6g}" for v in row.tolist()) + "\n")


def write_binary(path, matrix: np.ndarray, words) -> None:
    n, d = matrix.shape
    data = np.ascontiguousarray(matrix, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(f"{n} {d}\n".encode())
        for word, row in zip(words, data):
            fh.write(word.encode("utf-8") + b" ")
            fh.write(row.tobytes())
            fh.write(b"\n")


def read_vectors(path) -> tuple[tuple[str, ...], np.ndarray]:
    """Read the text format, or the binary format if the file does not decode as text."""
    with open(path, "rb") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise EmbeddingError(f"{path}: header must be 'n d'")
        n, d = int(header[0]), int(header[1])
        rest = fh.read()
    try:
        text = rest.decode("utf-8")
        lines = text.splitlines()
        if len(lines) == n and all(len(ln.split(" ")) == d + 1 for ln in lines[:3]):
            words = []
            mat = np.empty((n, d), dtype=np.float64)
            for k, ln in enumerate(lines):
                parts = ln.rstrip().split(" ")
                if len(parts) != d + 1:
                    raise EmbeddingError(f"{path}: line {k + 2} has {len(parts) - 1} values, expected {d}")
                words.append(parts[0])
                mat[k] = np.asarray(parts[1:], dtype=np.float64)
            return tuple(words), mat
    except UnicodeDecodeError:
        pass
    words = []
    mat = np.empty((n, d), dtype=np.float32)
    pos = 0
    for k in range(n):
        sp = rest.index(b" ", pos)
        words.append(rest[pos:sp].decode("utf-8"))
        start = sp + 1
        mat[k] = np.frombuffer(rest, dtype="<f4", count=d, offset=start)
        pos = start + 4 * d
        if pos < len(rest) and rest[pos : pos + 1] == b"\n":
            pos += 1
    return tuple(words), mat


def save_store(store: EmbeddingStore, path, words=None, binary: bool = False) -> list[str]:
    """Write word vectors plus the tying mask (``PATH.mask``) or context vectors (``PATH.ctx``).

    Returns the list of files written.
    """
    path = os.fspath(path)
    words = _words_for(store, words)
    write = write_binary if binary else write_text
    write(path, store.W, words)
    written = [path]
    if store.tied:
        with open(path + ".mask", "w") as fh:
            fh.write(" ".join("+1" if s > 0 else "-1" for s in store.mask.signs) + "\n")
        written.append(path + ".mask")
    else:
        write(path + ".ctx", store.C, words)
        written.append(path + ".ctx")
    return written


def load_store(path) -> EmbeddingStore:
    path = os.fspath(path)
    words, W = read_vectors(path)
    if os.path.exists(path + ".mask"):
        with open(path + ".mask") as fh:
            signs = np.asarray([float(s) for s in fh.read().split()])
        return EmbeddingStore(W, mask=ReflectionMask(len(signs), signs), words=words)
    if os.path.exists(path + ".ctx"):
        cwords, C = read_vectors(path + ".ctx")
        if cwords != words:
            raise EmbeddingError(f"{path}.ctx: word order differs from {path}")
        return EmbeddingStore(W, C=C, words=words)
    # word vectors only: evaluation never reads contexts
    return EmbeddingStore(W, C=np.zeros_like(W), words=words)
