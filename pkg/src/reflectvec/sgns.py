"""Skip-gram with negative sampling, untied or tied through a fixed sign mask."""

from __future__ import annotations

import math
import threading
import time
from dataclasses import asdict, dataclass, field

import numba
import numpy as np

from .corpus import Vocabulary, subsample_keep_prob
from .embeddings import EmbeddingStore
from .theory import child_seeds, make_rng, random_mask

LR_FLOOR = 1e-4


class TrainError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    d: int = 200
    window: int = 5
    negatives: int = 5
    epochs: int = 15
    base_lr: float = 0.025
    lr_decay_multiplier: float | None = None
    neg_smoothing: float = 0.75
    subsample_threshold: float | None = 1e-3
    tied: bool = False
    balanced_mask: bool = False
    init: str = "gaussian"
    seed: int = 0
    threads: int = 1
    dtype: str = "float32"

    def __post_init__(self) -> None:
        if self.d < 1:
            raise TrainError(f"d must be positive, got {self.d}")
        if self.tied and self.d % 2:
            raise TrainError(f"tied mode needs even d, got {self.d}")
        if self.negatives < 1:
            raise TrainError(f"negatives must be >= 1, got {self.negatives}")
        if self.window < 1:
            raise TrainError(f"window must be >= 1, got {self.window}")
        if self.epochs < 1:
            raise TrainError(f"epochs must be >= 1, got {self.epochs}")
        if not self.base_lr > 0:
            raise TrainError(f"learning rate must be positive, got {self.base_lr}")
        if self.decay_multiplier <= 0:
            raise TrainError("lr_decay_multiplier must be positive")
        if self.init not in ("gaussian", "uniform"):
            raise TrainError(f"unknown init {self.init!r}")
        if self.threads < 1:
            raise TrainError("threads must be >= 1")

    @property
    def decay_multiplier(self) -> float:
        if self.lr_decay_multiplier is not None:
            return self.lr_decay_multiplier
        return 0.8 if self.tied else 1.0

    def to_dict(self) -> dict:
        out = asdict(self)
        out["lr_decay_multiplier"] = self.decay_multiplier
        return out


def learning_rate(config: TrainConfig, progress: float) -> float:
    """Linear decay over a horizon scaled by the decay multiplier, then held at the floor."""
    frac = 1.0 - progress / config.decay_multiplier
    return config.base_lr * max(LR_FLOOR, frac)


SCHEDULE = "lr(p) = base_lr * max(1e-4, 1 - p / m), p = fraction of nominal training done, m = decay multiplier"


def init_embeddings(n: int, config: TrainConfig, words=None) -> EmbeddingStore:
    """Random initial store.

    Gaussian init draws N(0, 1/d) entries; uniform init draws from
    [-1/(2d), 1/(2d)]. Untied context vectors use the same law, drawn
    independently; tied mode draws a Rademacher mask instead.
    """
    seeds = child_seeds(config.seed, 3)
    dtype = np.dtype(config.dtype)

    def draw(ss):
        rng = make_rng(ss)
        if config.init == "gaussian":
            return (rng.standard_normal((n, config.d)) / math.sqrt(config.d)).astype(dtype)
        half = 1.0 / (2 * config.d)
        return rng.uniform(-half, half, (n, config.d)).astype(dtype)

    W = draw(seeds[0])
    if config.tied:
        mask_seed = int(seeds[2].generate_state(1)[0])
        mask = random_mask(config.d, mask_seed, balanced=config.balanced_mask)
        return EmbeddingStore(W, mask=mask, words=words)
    return EmbeddingStore(W, C=draw(seeds[1]), words=words)


# ----------------------------------------------------------------------------
# negative sampling


class AliasSampler:
    """Walker/Vose alias table over ids, weights proportional to count**power."""

    def __init__(self, counts, power: float = 0.75):
        w = np.asarray(counts, dtype=np.float64)
        if w.ndim != 1 or len(w) == 0 or np.any(w <= 0):
            raise TrainError("negative sampling needs positive counts")
        w = w**power
        self.probs = w / w.sum()
        self.prob, self.alias = build_alias(self.probs)

    def __len__(self) -> int:
        return len(self.prob)

    def sample(self, rng: np.random.Generator, size=None):
        k = rng.integers(0, len(self.prob), size=size)
        u = rng.random(size=size)
        return np.where(u < self.prob[k], k, self.alias[k])

    def table_probs(self) -> np.ndarray:
        """Exact distribution encoded by the table."""
        n = len(self.prob)
        out = self.prob / n
        np.add.at(out, self.alias, (1.0 - self.prob) / n)
        return out


def build_alias(probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = len(probs)
    scaled = np.asarray(probs, dtype=np.float64) * n
    prob = np.ones(n)
    alias = np.arange(n, dtype=np.int64)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    while small and large:
        s = small.pop()
        g = large.pop()
        prob[s] = scaled[s]
        alias[s] = g
        scaled[g] = (scaled[g] + scaled[s]) - 1.0
        (small if scaled[g] < 1.0 else large).append(g)
    # leftovers are 1 up to rounding
    for i in small + large:
        prob[i] = 1.0
        alias[i] = i
    return prob, alias


def negative_sample(counts, neg_smoothing: float, rng: np.random.Generator, size=None):
    """Draw id(s) with probability proportional to count**neg_smoothing."""
    return AliasSampler(counts, neg_smoothing).sample(rng, size)


# ----------------------------------------------------------------------------
# single update, reference implementation


def log_sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0, -np.log1p(np.exp(-np.abs(x))), x - np.log1p(np.exp(-np.abs(x))))


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sgns_objective(store: EmbeddingStore, center: int, context: int, negatives) -> float:
    """log s(w_j.c_i) + sum over negatives of log s(-w_j.c_neg)."""
    wj = store.W[center].astype(np.float64)
    val = float(log_sigmoid(wj @ store.context(context)))
    for x in negatives:
        val += float(log_sigmoid(-(wj @ store.context(x))))
    return val


def sgns_gradients(store: EmbeddingStore, center: int, context: int, negatives):
    """Exact gradient of the objective, as {row: grad} for W and (untied) C."""
    wj = store.W[center].astype(np.float64)
    targets = [context, *negatives]
    labels = [1.0] + [0.0] * len(negatives)
    gw: dict[int, np.ndarray] = {}
    gc: dict[int, np.ndarray] = {}
    signs = store.mask.signs if store.tied else None

    def add(table, row, vec):
        table[row] = table.get(row, 0.0) + vec

    for x, label in zip(targets, labels):
        cx = store.context(x).astype(np.float64)
        g = label - float(sigmoid(wj @ cx))
        add(gw, center, g * cx)
        if store.tied:
            add(gw, x, g * signs * wj)
        else:
            add(gc, x, g * wj)
    return gw, gc


def sgns_step(store: EmbeddingStore, center: int, context: int, negatives, lr: float) -> float:
    """One gradient-ascent step on a (centre, context, negatives) example, in place.

    All gradients are taken at the current parameters before any row moves,
    so repeated negatives and tied self-pairs get the exact gradient.
    Returns the loss (negated objective) before the update.
    """
    if lr <= 0:
        raise TrainError("learning rate must be positive")
    loss = -sgns_objective(store, center, context, negatives)
    gw, gc = sgns_gradients(store, center, context, negatives)
    for row, g in gw.items():
        store.W[row] += (lr * g).astype(store.W.dtype)
    for row, g in gc.items():
        store.C[row] += (lr * g).astype(store.C.dtype)
    return loss


# ----------------------------------------------------------------------------
# compiled training loop


@numba.njit(cache=True, inline="always")
def _next_u64(state):
    # splitmix64
    state[0] += np.uint64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True, inline="always")
def _uniform(state):
    return (_next_u64(state) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@numba.njit(cache=True, inline="always")
def _draw(state, prob, alias):
    k = int(_uniform(state) * prob.shape[0])
    if k >= prob.shape[0]:
        k = prob.shape[0] - 1
    if _uniform(state) < prob[k]:
        return k
    return alias[k]


@numba.njit(cache=True, inline="always")
def _log_sigmoid(x):
    if x >= 0:
        return -math.log1p(math.exp(-x))
    return x - math.log1p(math.exp(x))


@numba.njit(cache=True, inline="always")
def _sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@numba.njit(cache=True, nogil=True)
def _step(W, C, signs, tied, center, targets, k1, lr, wj, grad, gs):
    d = W.shape[1]
    for a in range(d):
        wj[a] = W[center, a]
        grad[a] = 0.0
    loss = 0.0
    for m in range(k1):
        x = targets[m]
        s = 0.0
        if tied:
            for a in range(d):
                s += wj[a] * signs[a] * W[x, a]
        else:
            for a in range(d):
                s += wj[a] * C[x, a]
        if m == 0:
            g = 1.0 - _sigmoid(s)
            loss -= _log_sigmoid(s)
        else:
            g = -_sigmoid(s)
            loss -= _log_sigmoid(-s)
        gs[m] = g
        if tied:
            for a in range(d):
                grad[a] += g * signs[a] * W[x, a]
        else:
            for a in range(d):
                grad[a] += g * C[x, a]
    for m in range(k1):
        x = targets[m]
        step = lr * gs[m]
        if tied:
            for a in range(d):
                W[x, a] += step * signs[a] * wj[a]
        else:
            for a in range(d):
                C[x, a] += step * wj[a]
    for a in range(d):
        W[center, a] += lr * grad[a]
    return loss


@numba.njit(cache=True, nogil=True)
def _train_span(
    W, C, signs, tied, ids, start, stop, window, negatives, prob, alias, state,
    lr0, lr1, out,
):
    """Skip-gram pass over centre positions [start, stop) of ``ids``.

    The learning rate moves linearly from lr0 to lr1 across the span.
    ``out`` receives (loss sum, pair count).
    """
    T = ids.shape[0]
    d = W.shape[1]
    wj = np.empty(d, dtype=np.float64)
    grad = np.empty(d, dtype=np.float64)
    gs = np.empty(negatives + 1, dtype=np.float64)
    targets = np.empty(negatives + 1, dtype=np.int64)
    span = max(1, stop - start)
    loss = 0.0
    pairs = 0
    for t in range(start, stop):
        lr = lr0 + (lr1 - lr0) * (t - start) / span
        center = ids[t]
        lo = max(0, t - window)
        hi = min(T, t + window + 1)
        for u in range(lo, hi):
            if u == t:
                continue
            ctx = ids[u]
            targets[0] = ctx
            k1 = 1
            for _ in range(negatives):
                neg = _draw(state, prob, alias)
                if neg == ctx:
                    continue
                targets[k1] = neg
                k1 += 1
            loss += _step(W, C, signs, tied, center, targets, k1, lr, wj, grad, gs)
            pairs += 1
    out[0] += loss
    out[1] += pairs


def kernel_step(store: EmbeddingStore, center: int, context: int, negatives, lr: float) -> float:
    """Apply the compiled update to one example; mirrors :func:`sgns_step`."""
    d = store.d
    signs = store.mask.signs.astype(np.float64) if store.tied else np.ones(d)
    C = store.C if not store.tied else store.W
    targets = np.asarray([context, *negatives], dtype=np.int64)
    return _step(
        store.W, C, signs, store.tied, center, targets, len(targets), lr,
        np.empty(d), np.empty(d), np.empty(len(targets)),
    )


@dataclass
class TrainLog:
    config: dict
    schedule: str = SCHEDULE
    entries: list[dict] = field(default_factory=list)
    seconds: float = 0.0
    tokens: int = 0
    pairs: int = 0

    def losses(self) -> np.ndarray:
        return np.asarray([e["loss"] for e in self.entries])


def _seed_state(ss: np.random.SeedSequence) -> np.ndarray:
    return ss.generate_state(1, dtype=np.uint64).astype(np.uint64)


def train(
    token_ids: np.ndarray,
    vocab: Vocabulary,
    config: TrainConfig,
    log_every: int = 10_000,
    store: EmbeddingStore | None = None,
    progress=None,
) -> tuple[EmbeddingStore, TrainLog]:
    """Train SGNS over an id stream (out-of-vocabulary tokens already removed).

    Each epoch re-draws frequent-word subsampling, then walks every kept
    position with a fixed symmetric window. The learning rate follows
    :func:`learning_rate` over the nominal schedule of ``epochs`` passes.
    With ``threads > 1`` workers update the shared matrices over disjoint
    shards without locks; only single-threaded runs are reproducible.
    """
    ids = np.ascontiguousarray(token_ids, dtype=np.int64)
    if ids.size <= config.window:
        raise TrainError(f"corpus of {ids.size} tokens is shorter than the window ({config.window})")
    if ids.min() < 0 or ids.max() >= len(vocab):
        raise TrainError("token ids must be in-vocabulary")
    if store is None:
        store = init_embeddings(len(vocab), config, words=vocab.words)
    sampler = AliasSampler(vocab.counts, config.neg_smoothing)
    if config.subsample_threshold:
        keep = subsample_keep_prob(vocab, config.subsample_threshold)
    else:
        keep = np.ones(len(vocab))
    signs = store.mask.signs.astype(np.float64) if store.tied else np.ones(store.d)
    C = store.W if store.tied else store.C

    log = TrainLog(config=config.to_dict())
    seeds = child_seeds(config.seed + 1, 2)
    sub_seeds = seeds[0].spawn(config.epochs)
    kern_seeds = seeds[1].spawn(config.epochs * config.threads)
    t0 = time.perf_counter()
    for epoch in range(config.epochs):
        rng = make_rng(sub_seeds[epoch])
        kept = ids[rng.random(ids.size) < keep[ids]]
        T = kept.size
        if T < 2:
            continue
        log.tokens += T
        shards = np.linspace(0, T, config.threads + 1).astype(np.int64)

        def run(worker: int) -> list[dict]:
            state = _seed_state(kern_seeds[epoch * config.threads + worker])
            entries = []
            lo, hi = int(shards[worker]), int(shards[worker + 1])
            for s in range(lo, hi, log_every):
                e = min(hi, s + log_every)
                # progress measured on the global position so shards share one schedule
                p0 = (epoch + (s - lo) * config.threads / T) / config.epochs
                p1 = (epoch + (e - lo) * config.threads / T) / config.epochs
                lr0, lr1 = learning_rate(config, p0), learning_rate(config, p1)
                out = np.zeros(2)
                _train_span(
                    store.W, C, signs, store.tied, kept, s, e, config.window,
                    config.negatives, sampler.prob, sampler.alias, state, lr0, lr1, out,
                )
                if out[1]:
                    entries.append(
                        {"epoch": epoch, "progress": p1, "lr": lr1,
                         "loss": out[0] / out[1], "pairs": int(out[1]), "worker": worker}
                    )
            return entries

        if config.threads == 1:
            epoch_entries = run(0)
        else:
            results: list[list[dict]] = [[] for _ in range(config.threads)]

            def target(w):
                results[w] = run(w)

            workers = [threading.Thread(target=target, args=(w,)) for w in range(config.threads)]
            for th in workers:
                th.start()
            for th in workers:
                th.join()
            epoch_entries = sorted((e for r in results for e in r), key=lambda e: e["progress"])
        log.entries.extend(epoch_entries)
        log.pairs += sum(e["pairs"] for e in epoch_entries)
        if progress is not None:
            progress(epoch, epoch_entries)
    log.seconds = time.perf_counter() - t0
    return store, log
