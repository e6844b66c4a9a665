import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from reflectvec.cooc import count_cooccurrences, observed_pmi
from reflectvec.corpus import Vocabulary, build_vocabulary
from reflectvec.embeddings import EmbeddingStore
from reflectvec.sgns import (
    AliasSampler,
    TrainConfig,
    TrainError,
    init_embeddings,
    kernel_step,
    learning_rate,
    negative_sample,
    sgns_gradients,
    sgns_objective,
    sgns_step,
    train,
)
from reflectvec.theory import ReflectionMask, make_rng, random_mask, sample_model_corpus


def random_store(rng, n, d, tied):
    W = rng.standard_normal((n, d)) * 0.7
    if tied:
        return EmbeddingStore(W, mask=random_mask(d, int(rng.integers(1 << 30))))
    return EmbeddingStore(W, C=rng.standard_normal((n, d)) * 0.7)


def finite_difference(store, center, context, negatives, h=1e-5):
    gw = np.zeros_like(store.W)
    gc = None if store.tied else np.zeros_like(store.C)
    for name, mat, out in (("W", store.W, gw), ("C", store.C, gc)):
        if mat is None:
            continue
        for idx in np.ndindex(mat.shape):
            old = mat[idx]
            mat[idx] = old + h
            up = sgns_objective(store, center, context, negatives)
            mat[idx] = old - h
            down = sgns_objective(store, center, context, negatives)
            mat[idx] = old
            out[idx] = (up - down) / (2 * h)
    return gw, gc


def dense(grads, shape):
    out = np.zeros(shape)
    for row, g in grads.items():
        out[row] += g
    return out


def assert_gradients_match(store, center, context, negatives):
    gw, gc = sgns_gradients(store, center, context, negatives)
    fw, fc = finite_difference(store, center, context, negatives)
    aw = dense(gw, store.W.shape)
    scale = max(np.abs(fw).max(), 1e-3)
    assert np.abs(aw - fw).max() <= 1e-5 * scale
    if not store.tied:
        ac = dense(gc, store.C.shape)
        assert np.abs(ac - fc).max() <= 1e-5 * max(np.abs(fc).max(), 1e-3)


@pytest.mark.parametrize("tied", [False, True])
def test_gradients_match_finite_differences(tied):
    rng = np.random.default_rng(0 if tied else 1)
    for _ in range(25):
        d = int(rng.choice([2, 4, 6, 8]))
        n = int(rng.integers(2, 7))
        store = random_store(rng, n, d, tied)
        center, context = rng.integers(0, n, 2)
        negatives = rng.integers(0, n, int(rng.integers(1, 5))).tolist()
        assert_gradients_match(store, int(center), int(context), negatives)


def test_untied_positive_gradient_formula():
    rng = np.random.default_rng(2)
    store = random_store(rng, 3, 5, False)
    gw, _ = sgns_gradients(store, 0, 1, [])
    s = 1 / (1 + math.exp(-store.W[0] @ store.C[1]))
    assert np.allclose(gw[0], (1 - s) * store.C[1], rtol=1e-12)
    assert_gradients_match(store, 0, 1, [])


def test_tied_hand_chain_rule():
    a, b, c, e = 0.3, -0.7, 1.1, 0.4
    W = np.array([[a, b], [c, e]])
    store = EmbeddingStore(W, mask=ReflectionMask(2, np.array([1.0, -1.0])))
    # score of centre 0 against context 1 is a c - b e
    assert math.isclose(W[0] @ store.context(1), a * c - b * e)
    gw, _ = sgns_gradients(store, 0, 1, [])
    g = 1 - 1 / (1 + math.exp(-(a * c - b * e)))
    assert np.allclose(gw[1], g * np.array([a, -b]))


def test_tied_self_pair_gradient():
    rng = np.random.default_rng(3)
    store = random_store(rng, 2, 6, True)
    w, q = store.W[0], store.mask.signs
    assert math.isclose(w @ store.context(0), float(np.sum(q * w * w)), rel_tol=1e-12)
    gw, _ = sgns_gradients(store, 0, 0, [])
    g = 1 - 1 / (1 + math.exp(-np.sum(q * w * w)))
    assert np.allclose(gw[0], g * 2 * q * w, rtol=1e-12)
    assert_gradients_match(store, 0, 0, [])


def test_repeated_negatives_and_context_in_negatives():
    rng = np.random.default_rng(4)
    for tied in (False, True):
        store = random_store(rng, 4, 4, tied)
        assert_gradients_match(store, 1, 2, [2, 2, 1, 3])


@settings(max_examples=60, deadline=None)
@given(st.booleans(), st.integers(0, 2**31), st.lists(st.integers(0, 4), min_size=1, max_size=6))
def test_kernel_matches_reference(tied, seed, negatives):
    rng = np.random.default_rng(seed)
    store = random_store(rng, 5, 4, tied)
    center, context = (int(x) for x in rng.integers(0, 5, 2))
    a, b = store.copy(), store.copy()
    la = sgns_step(a, center, context, negatives, 0.05)
    lb = kernel_step(b, center, context, negatives, 0.05)
    assert math.isclose(la, lb, rel_tol=1e-12, abs_tol=1e-12)
    assert np.allclose(a.W, b.W, atol=1e-13)
    if not tied:
        assert np.allclose(a.C, b.C, atol=1e-13)


def test_step_increases_objective():
    rng = np.random.default_rng(5)
    for tied in (False, True):
        store = random_store(rng, 6, 8, tied)
        before = sgns_objective(store, 0, 1, [2, 3])
        sgns_step(store, 0, 1, [2, 3], 1e-3)
        assert sgns_objective(store, 0, 1, [2, 3]) > before


def test_alias_examples():
    assert np.isclose(AliasSampler([8, 1], 1.0).table_probs()[0], 8 / 9, atol=1e-15)
    assert np.isclose(AliasSampler([16, 1], 0.75).table_probs()[0], 8 / 9, atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(1, 10_000), min_size=1, max_size=200), st.floats(0.1, 1.0))
def test_alias_table_is_exact(counts, power):
    s = AliasSampler(counts, power)
    target = np.asarray(counts, dtype=float) ** power
    assert np.abs(s.table_probs() - target / target.sum()).max() < 1e-12


def test_alias_chi_square():
    counts = np.array([500, 120, 60, 30, 9, 3, 1, 1])
    draws = negative_sample(counts, 0.75, make_rng(0), size=1_000_000)
    target = counts**0.75 / np.sum(counts**0.75)
    observed = np.bincount(draws, minlength=len(counts))
    assert stats.chisquare(observed, target * draws.size).pvalue > 1e-3


def test_alias_rejects_nonpositive():
    with pytest.raises(TrainError):
        AliasSampler([1, 0])


def test_init_examples():
    cfg = TrainConfig(d=100, seed=3)
    a = init_embeddings(10_000, cfg)
    b = init_embeddings(10_000, cfg)
    assert np.array_equal(a.W, b.W) and np.array_equal(a.C, b.C)
    norms = np.einsum("ij,ij->i", a.W.astype(float), a.W.astype(float))
    assert 0.97 <= norms.mean() <= 1.03
    assert not np.array_equal(a.W, a.C)
    u = init_embeddings(50, TrainConfig(d=10, init="uniform"))
    assert np.abs(u.W).max() <= 1 / 20


def test_tied_mask_is_rademacher():
    pluses = []
    for seed in range(200):
        s = init_embeddings(2, TrainConfig(d=100, tied=True, seed=seed))
        assert set(np.unique(s.mask.signs)) <= {-1.0, 1.0}
        pluses.append(s.mask.l)
    # binomial(100, 1/2): sd of the mean over 200 masks is 5 / sqrt(200)
    assert abs(np.mean(pluses) - 50) < 4 * 5 / math.sqrt(200)
    assert len(set(pluses)) > 1
    assert init_embeddings(2, TrainConfig(d=100, tied=True, balanced_mask=True)).mask.l == 50


def test_config_validation():
    with pytest.raises(TrainError, match="even"):
        TrainConfig(d=5, tied=True)
    with pytest.raises(TrainError):
        TrainConfig(negatives=0)
    with pytest.raises(TrainError):
        TrainConfig(base_lr=0)
    assert TrainConfig(tied=True).decay_multiplier == 0.8
    assert TrainConfig().decay_multiplier == 1.0


def test_learning_rate_schedule():
    un = TrainConfig(base_lr=1.0)
    tied = TrainConfig(base_lr=1.0, tied=True, d=10)
    assert learning_rate(un, 0.0) == 1.0
    assert math.isclose(learning_rate(un, 0.5), 0.5)
    assert math.isclose(learning_rate(tied, 0.4), 0.5)
    assert learning_rate(tied, 0.8) == learning_rate(tied, 0.95) == 1e-4
    assert learning_rate(un, 1.0) == 1e-4


def toy_vocab(tokens):
    v = build_vocabulary(tokens, 1)
    return v, v.encode(tokens)


def test_training_rejects_short_corpus():
    v, ids = toy_vocab(["a", "b", "a"])
    with pytest.raises(TrainError, match="shorter than the window"):
        train(ids, v, TrainConfig(d=4, window=5, epochs=1))


@pytest.mark.parametrize("seed", range(5))
def test_loss_decreases_on_toy_corpus(seed):
    rng = np.random.default_rng(seed)
    tokens = [f"w{int(x)}" for x in rng.integers(0, 8, 100)]
    v, ids = toy_vocab(tokens)
    cfg = TrainConfig(d=10, window=2, epochs=1, base_lr=0.5, subsample_threshold=None, seed=seed)
    _, log = train(ids, v, cfg, log_every=1)
    loss = log.losses()
    q = len(loss) // 4
    assert loss[-q:].mean() < loss[:q].mean()


def test_single_thread_runs_are_byte_identical():
    rng = np.random.default_rng(0)
    tokens = [f"w{int(x)}" for x in rng.zipf(1.5, 3000) % 50]
    v, ids = toy_vocab(tokens)
    for tied in (False, True):
        cfg = TrainConfig(d=8, epochs=2, tied=tied, seed=11)
        a, _ = train(ids, v, cfg)
        b, _ = train(ids, v, cfg)
        assert a.W.tobytes() == b.W.tobytes()
        if not tied:
            assert a.C.tobytes() == b.C.tobytes()


def test_tied_halves_parameters_and_keeps_context_view():
    rng = np.random.default_rng(1)
    tokens = [f"w{int(x)}" for x in rng.integers(0, 30, 2000)]
    v, ids = toy_vocab(tokens)
    un, _ = train(ids, v, TrainConfig(d=12, epochs=1, seed=0))
    tied, log = train(ids, v, TrainConfig(d=12, epochs=1, seed=0, tied=True))
    assert un.trainable_parameters == 2 * tied.trainable_parameters == 2 * len(v) * 12
    q = tied.mask.signs
    for i in rng.integers(0, len(v), 10):
        assert np.array_equal(tied.context(int(i)), tied.W[i] * q.astype(tied.W.dtype))
        # the mask is an involution
        assert np.array_equal(tied.context(int(i)) * q.astype(tied.W.dtype), tied.W[i])
    assert log.config["lr_decay_multiplier"] == 0.8
    assert "1e-4" in log.schedule


def test_hogwild_training_runs():
    rng = np.random.default_rng(2)
    tokens = [f"w{int(x)}" for x in rng.integers(0, 40, 20_000)]
    v, ids = toy_vocab(tokens)
    store, log = train(ids, v, TrainConfig(d=16, epochs=2, threads=4, seed=0), log_every=500)
    assert np.all(np.isfinite(store.W)) and np.all(np.isfinite(store.C))
    assert {e["worker"] for e in log.entries} == {0, 1, 2, 3}
    assert log.pairs > 0


def test_scores_track_shifted_pmi_on_model_corpus():
    k = 5
    ids, _, _ = sample_model_corpus(30, 4, 200_000, scale=1.5, q=random_mask(4, 0, balanced=True).matrix(), seed=0)
    words = tuple(f"w{i}" for i in range(30))
    counts = np.bincount(ids, minlength=30)
    order = np.argsort(-counts, kind="stable")
    remap = np.empty(30, dtype=np.int64)
    remap[order] = np.arange(30)
    ids = remap[ids]
    vocab = Vocabulary(tuple(words[i] for i in order), counts[order], int(ids.size), 1)
    cfg = TrainConfig(d=10, window=1, negatives=k, epochs=3, subsample_threshold=None, seed=0)
    store, _ = train(ids, vocab, cfg)
    cooc = count_cooccurrences(ids, 1, n=30)
    target = observed_pmi(cooc, k, joint="ordered")
    W = store.W.astype(float)
    C = store.C.astype(float)
    scores = 0.5 * (np.einsum("ij,ij->i", W[cooc.rows], C[cooc.cols]) + np.einsum("ij,ij->i", W[cooc.cols], C[cooc.rows]))
    r = stats.pearsonr(scores, target).statistic
    print(f"pearson r = {r:.3f}")
    assert r > 0.5
