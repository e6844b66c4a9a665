"""End-to-end chains: corpus -> PMI -> spectrum, and corpus -> SGNS -> benchmarks."""

from __future__ import annotations

import dataclasses
import logging
import time

import numpy as np

from .cooc import count_cooccurrences, pmi_matrix
from .corpus import build_vocabulary, iter_file_tokens
from .evaluation import eval_analogy, eval_similarity, load_analogy, load_similarity
from .sgns import TrainConfig, train
from .spectra import eigenvalues_symmetric, semicircle_l1, spectrum_stats, wigner_matrix
from .theory import estimate_reflection, make_rng

log = logging.getLogger(__name__)


def read_corpus(path, min_count: int, max_bytes: int | None = None, keep_positions: bool = False):
    vocab = build_vocabulary(iter_file_tokens(path, max_bytes), min_count)
    ids = vocab.encode(iter_file_tokens(path, max_bytes), keep_positions=keep_positions)
    return vocab, ids


def wigner_control_l1(n: int, bins: int, seed: int) -> float:
    lam = eigenvalues_symmetric(wigner_matrix(n, make_rng(seed)), overwrite=True)
    return semicircle_l1(lam, bins)


def pmi_spectrum(
    path,
    min_count: int = 100,
    window: int = 2,
    shift_k: float = 1.0,
    bins: int = 101,
    max_bytes: int | None = None,
    joint: str = "pair",
    keep_positions: bool = False,
    control_n: int = 2000,
    seed: int = 0,
):
    """Vocabulary, PMI matrix and spectrum report for a corpus file."""
    t0 = time.perf_counter()
    vocab, ids = read_corpus(path, min_count, max_bytes, keep_positions)
    log.info("vocabulary: %d words from %d tokens", len(vocab), vocab.total_tokens)
    cooc = count_cooccurrences(ids, window, n=len(vocab))
    pmi = pmi_matrix(cooc, shift_k, joint=joint)
    del cooc
    log.info("PMI matrix %dx%d built", pmi.n, pmi.n)
    lam = eigenvalues_symmetric(pmi.values, overwrite=False)
    report = spectrum_stats(lam, bins)
    control = wigner_control_l1(min(control_n, pmi.n), bins, seed) if control_n else float("nan")
    summary = {
        "n": pmi.n,
        "total_tokens": vocab.total_tokens,
        "min_count": min_count,
        "window": window,
        "shift_k": shift_k,
        "joint": joint,
        "trace_ratio": report.trace_ratio,
        "skewness": report.skewness,
        "semicircle_l1": report.semicircle_l1,
        "wigner_control_l1": control,
        "wigner_control_n": min(control_n, pmi.n),
        "seconds": time.perf_counter() - t0,
    }
    return vocab, pmi, report, summary


def train_and_evaluate(
    path,
    config: TrainConfig,
    similarity=(),
    analogy=(),
    min_count: int = 5,
    max_bytes: int | None = None,
    log_every: int = 100_000,
):
    """Train untied and tied SGNS on one stream and score both on every dataset."""
    vocab, ids = read_corpus(path, min_count, max_bytes)
    log.info("vocabulary: %d words, %d in-vocabulary tokens", len(vocab), ids.size)
    sims = [load_similarity(p) for p in similarity]
    analogies = [load_analogy(p) for p in analogy]
    models = {}
    for label, tied in (("SGNS", False), ("SGNS+WT", True)):
        cfg = dataclasses.replace(config, tied=tied, lr_decay_multiplier=None)
        store, tlog = train(ids, vocab, cfg, log_every=log_every)
        results = [eval_similarity(store, s) for s in sims]
        results += [eval_analogy(store, a) for a in analogies]
        models[label] = {"store": store, "log": tlog, "results": results}
    untied = models["SGNS"]["store"]
    refl = estimate_reflection(untied.W.astype(np.float64), untied.C.astype(np.float64))
    return vocab, models, refl


def tying_criteria(models: dict, tolerance: float = 0.10, analogy_margin: float = 0.02) -> dict:
    """Parameter halving, per-metric closeness, and the analogy win-or-tie condition."""
    un, wt = models["SGNS"], models["SGNS+WT"]
    size_un = un["store"].trainable_parameters
    size_wt = wt["store"].trainable_parameters
    gaps = {}
    analogy_ok = []
    for ru, rt in zip(un["results"], wt["results"]):
        gaps[ru.dataset] = rt.value - ru.value
        if ru.metric == "accuracy":
            analogy_ok.append(rt.value >= ru.value or abs(rt.value - ru.value) <= analogy_margin)
    return {
        "size_untied": size_un,
        "size_tied": size_wt,
        "half_size": 2 * size_wt == size_un,
        "gaps": gaps,
        "max_abs_gap": max((abs(g) for g in gaps.values()), default=0.0),
        "within_tolerance": all(abs(g) <= tolerance for g in gaps.values()),
        "analogy_win_or_tie": any(analogy_ok) if analogy_ok else None,
    }
