"""Symmetric-window co-occurrence counts and the dense word-word PMI matrix."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

MAGIC = b"RVCOOC\x00\x01"
HEADER = np.dtype([("magic", "S8"), ("n", "<u4"), ("window", "<u4")])
TRIPLET = np.dtype([("i", "<u4"), ("j", "<u4"), ("count", "<u8")])

MAX_DENSE_N = 40_000
DEFAULT_SHARD = 4_000_000


class CoocError(ValueError):
    pass


@dataclass(frozen=True)
class SparseCooc:
    """Upper-triangular co-occurrence counts.

    Entry ``(rows[k], cols[k])`` with ``rows[k] <= cols[k]`` holds the number
    of window events pairing the two words in either order.
    """

    n: int
    window: int
    rows: np.ndarray
    cols: np.ndarray
    counts: np.ndarray

    @property
    def pair_total(self) -> int:
        return int(self.counts.sum())

    @property
    def marginals(self) -> np.ndarray:
        """Per-word totals #(i); each event adds one to both of its words."""
        m = np.bincount(self.rows, weights=self.counts, minlength=self.n)
        m += np.bincount(self.cols, weights=self.counts, minlength=self.n)
        return m.astype(np.int64)

    def as_dict(self) -> dict[tuple[int, int], int]:
        return {
            (int(i), int(j)): int(c)
            for i, j, c in zip(self.rows.tolist(), self.cols.tolist(), self.counts.tolist())
        }

    def save(self, path: str | os.PathLike) -> None:
        header = np.array([(MAGIC, self.n, self.window)], dtype=HEADER)
        body = np.empty(len(self.counts), dtype=TRIPLET)
        body["i"] = self.rows
        body["j"] = self.cols
        body["count"] = self.counts
        with open(path, "wb") as fh:
            fh.write(header.tobytes())
            fh.write(body.tobytes())

    @classmethod
    def load(cls, path: str | os.PathLike) -> "SparseCooc":
        raw = np.fromfile(path, dtype=np.uint8)
        if len(raw) < HEADER.itemsize:
            raise CoocError(f"{path}: truncated header")
        header = raw[: HEADER.itemsize].view(HEADER)[0]
        if header["magic"] != MAGIC:
            raise CoocError(f"{path}: bad magic {header['magic']!r}")
        body = raw[HEADER.itemsize :]
        if len(body) % TRIPLET.itemsize:
            raise CoocError(f"{path}: truncated triplet data")
        trip = body.view(TRIPLET)
        return cls(
            int(header["n"]),
            int(header["window"]),
            trip["i"].astype(np.int64),
            trip["j"].astype(np.int64),
            trip["count"].astype(np.int64),
        )


def _shard_keys(ids: np.ndarray, start: int, stop: int, window: int, n: int) -> np.ndarray:
    """Pair keys lo*n+hi for all events whose left position lies in [start, stop)."""
    T = len(ids)
    keys = []
    for o in range(1, window + 1):
        hi_stop = min(stop, T - o)
        if hi_stop <= start:
            continue
        a = ids[start:hi_stop]
        b = ids[start + o : hi_stop + o]
        ok = (a >= 0) & (b >= 0)
        if not ok.all():
            a, b = a[ok], b[ok]
        a = a.astype(np.int64)
        b = b.astype(np.int64)
        keys.append(np.minimum(a, b) * n + np.maximum(a, b))
    if not keys:
        return np.empty(0, dtype=np.int64)
    return np.concatenate(keys)


def _reduce(keys: np.ndarray, weights: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    if weights is None:
        return np.unique(keys, return_counts=True)
    uniq, inv = np.unique(keys, return_inverse=True)
    return uniq, np.bincount(inv, weights=weights, minlength=len(uniq)).astype(np.int64)


def count_cooccurrences(
    token_ids: np.ndarray,
    window: int,
    n: int | None = None,
    shard_size: int = DEFAULT_SHARD,
) -> SparseCooc:
    """Count flat symmetric-window co-occurrences.

    Every position ``t`` and offset ``1 <= o <= window`` contributes one
    event for the unordered pair ``(ids[t], ids[t+o])``. Negative ids mark
    dropped positions and never pair with anything. The stream is processed
    in shards; each event belongs to the shard owning its left position, so
    the result does not depend on ``shard_size``.
    """
    if window < 1:
        raise CoocError(f"window must be >= 1, got {window}")
    ids = np.asarray(token_ids)
    if n is None:
        n = int(ids.max()) + 1 if len(ids) else 0
    if len(ids) and ids.max() >= n:
        raise CoocError(f"token id {int(ids.max())} out of range for n={n}")
    shard_size = max(1, int(shard_size))

    parts_k, parts_c = [], []
    for start in range(0, len(ids), shard_size):
        keys = _shard_keys(ids, start, min(start + shard_size, len(ids)), window, n)
        if len(keys):
            k, c = _reduce(keys)
            parts_k.append(k)
            parts_c.append(c)
    if not parts_k:
        empty = np.empty(0, dtype=np.int64)
        return SparseCooc(n, window, empty, empty.copy(), empty.copy())
    if len(parts_k) == 1:
        keys, counts = parts_k[0], parts_c[0].astype(np.int64)
    else:
        keys, counts = _reduce(np.concatenate(parts_k), np.concatenate(parts_c))
    return SparseCooc(n, window, keys // n, keys % n, counts.astype(np.int64))


@dataclass(frozen=True)
class PmiMatrix:
    n: int
    values: np.ndarray
    shift: float
    missing_policy: str

    def sidecar(self) -> dict:
        return {
            "n": self.n,
            "shift": self.shift,
            "missing_policy": self.missing_policy,
            "dtype": "float64",
            "byteorder": "little",
            "order": "row-major",
        }

    def save(self, path: str | os.PathLike) -> None:
        np.ascontiguousarray(self.values, dtype="<f8").tofile(path)
        with open(f"{os.fspath(path)}.json", "w") as fh:
            json.dump(self.sidecar(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | os.PathLike, mmap: bool = False) -> "PmiMatrix":
        with open(f"{os.fspath(path)}.json") as fh:
            meta = json.load(fh)
        n = int(meta["n"])
        if mmap:
            values = np.memmap(path, dtype="<f8", mode="r", shape=(n, n))
        else:
            values = np.fromfile(path, dtype="<f8")
            if values.size != n * n:
                raise CoocError(f"{path}: expected {n * n} values, found {values.size}")
            values = values.reshape(n, n)
        return cls(n, values, float(meta["shift"]), meta["missing_policy"])


def dense_bytes(n: int) -> int:
    return 8 * n * n


def check_dense_size(n: int, limit: int = MAX_DENSE_N) -> None:
    if n > limit:
        gib = dense_bytes(n) / 2**30
        raise MemoryError(
            f"dense {n}x{n} matrix needs {gib:.1f} GiB; refusing above n={limit}"
        )


def observed_pmi(cooc: SparseCooc, shift_k: float = 1.0, joint: str = "pair") -> np.ndarray:
    """Shifted PMI of every stored pair, aligned with ``cooc.rows/cols``.

    ``joint="pair"`` estimates p(i,j) as #(i,j)/pair_total over unordered
    pairs. ``joint="ordered"`` counts each off-diagonal event once per
    direction so that p(i,j) sums to one over the full symmetric matrix;
    this lowers off-diagonal values by ln 2 and leaves the diagonal alone.
    Marginals always come from the co-occurrence counts.
    """
    if not shift_k >= 1:
        raise CoocError(f"shift k must be >= 1, got {shift_k}")
    if len(cooc.counts) == 0 or cooc.pair_total <= 0:
        raise CoocError("empty co-occurrence table")
    if joint not in ("pair", "ordered"):
        raise CoocError(f"unknown joint estimator {joint!r}")
    marg = cooc.marginals.astype(np.float64)
    mtot = marg.sum()
    c = cooc.counts.astype(np.float64)
    if joint == "pair":
        log_pij = np.log(c) - math.log(cooc.pair_total)
    else:
        ordered = np.where(cooc.rows == cooc.cols, 2.0 * c, c)
        log_pij = np.log(ordered) - math.log(2.0 * cooc.pair_total)
    with np.errstate(divide="ignore"):
        # words that never co-occur have zero marginal but are never indexed
        log_pi = np.log(marg) - math.log(mtot)
    base = log_pij - log_pi[cooc.rows] - log_pi[cooc.cols]
    return base - math.log(shift_k)


def pmi_matrix(
    cooc: SparseCooc,
    shift_k: float = 1.0,
    joint: str = "pair",
    max_n: int = MAX_DENSE_N,
) -> PmiMatrix:
    """Dense symmetric shifted-PMI matrix with unobserved pairs set to 0."""
    vals = observed_pmi(cooc, shift_k, joint)
    check_dense_size(cooc.n, max_n)
    out = np.zeros((cooc.n, cooc.n), dtype=np.float64)
    out[cooc.rows, cooc.cols] = vals
    out[cooc.cols, cooc.rows] = vals
    return PmiMatrix(cooc.n, out, math.log(shift_k), "zero")
