import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reflectvec.cooc import (
    CoocError,
    PmiMatrix,
    SparseCooc,
    check_dense_size,
    count_cooccurrences,
    observed_pmi,
    pmi_matrix,
)

streams = st.lists(st.integers(0, 6), min_size=0, max_size=50)


def nested_loop_counts(ids, window):
    out = Counter()
    for t in range(len(ids)):
        for o in range(1, window + 1):
            if t + o < len(ids) and ids[t] >= 0 and ids[t + o] >= 0:
                a, b = sorted((ids[t], ids[t + o]))
                out[(a, b)] += 1
    return dict(out)


def table(entries, n, window=1):
    keys = sorted(entries)
    return SparseCooc(
        n, window,
        np.array([k[0] for k in keys]), np.array([k[1] for k in keys]),
        np.array([entries[k] for k in keys]),
    )


def test_examples():
    assert count_cooccurrences(np.array([0, 1, 2]), 1).as_dict() == {(0, 1): 1, (1, 2): 1}
    assert count_cooccurrences(np.array([0, 1, 0]), 2).as_dict() == {(0, 1): 2, (0, 0): 1}


@pytest.mark.parametrize("T", range(2, 11))
def test_pair_total_closed_form(T):
    ids = np.arange(T) % 3
    c = count_cooccurrences(ids, 2)
    assert c.pair_total == 2 * T - 3
    assert c.pair_total == sum(nested_loop_counts(ids.tolist(), 2).values())


@settings(max_examples=100, deadline=None)
@given(streams, st.integers(1, 5), st.integers(1, 17))
def test_matches_nested_loop_oracle(ids, window, shard):
    got = count_cooccurrences(np.array(ids, dtype=np.int64), window, n=7, shard_size=shard)
    assert got.as_dict() == nested_loop_counts(ids, window)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(-1, 4), max_size=40), st.integers(1, 4))
def test_placeholders_keep_positions(ids, window):
    got = count_cooccurrences(np.array(ids, dtype=np.int64), window, n=5)
    assert got.as_dict() == nested_loop_counts(ids, window)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 6), min_size=2, max_size=50), st.integers(1, 4))
def test_marginals_double_event_count(ids, window):
    c = count_cooccurrences(np.array(ids), window, n=7)
    assert c.marginals.sum() == 2 * c.pair_total
    brute = np.zeros(7, dtype=np.int64)
    for (a, b), k in nested_loop_counts(ids, window).items():
        brute[a] += k
        brute[b] += k
    assert c.marginals.tolist() == brute.tolist()


def test_toy_corpus_pmi_is_ln4():
    ids = np.array([0, 1, 0, 1, 0, 1])
    c = count_cooccurrences(ids, 1)
    assert c.as_dict() == {(0, 1): 5}
    # marginals by brute force: every window holds one a and one b
    assert c.marginals.tolist() == [5, 5]
    pmi = pmi_matrix(c, 1)
    assert math.isclose(pmi.values[0, 1], math.log(4), rel_tol=1e-15)
    assert pmi.values[0, 0] == 0.0 and pmi.values[1, 1] == 0.0


@pytest.mark.parametrize("k", [1, 2, 5, 15])
def test_independent_pair_has_zero_pmi(k):
    c = table({(0, 0): 3, (0, 1): 2, (1, 1): 3}, 2)
    v = pmi_matrix(c, k).values
    assert math.isclose(v[0, 1], -math.log(k), abs_tol=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 5), min_size=3, max_size=50), st.integers(1, 3), st.floats(1, 50))
def test_shift_linearity_and_symmetry(ids, window, k):
    c = count_cooccurrences(np.array(ids), window, n=6)
    base = pmi_matrix(c, 1)
    shifted = pmi_matrix(c, k)
    observed = np.zeros((6, 6), dtype=bool)
    observed[c.rows, c.cols] = observed[c.cols, c.rows] = True
    assert np.allclose(shifted.values[observed], base.values[observed] - math.log(k), atol=1e-12)
    assert np.all(shifted.values[~observed] == 0.0)
    assert np.array_equal(shifted.values, shifted.values.T)
    assert shifted.shift == math.log(k) and shifted.missing_policy == "zero"


def test_ordered_joint_lowers_offdiagonal_by_ln2():
    c = count_cooccurrences(np.array([0, 1, 0, 0, 2, 1, 1]), 2, n=3)
    pair = observed_pmi(c, 1, "pair")
    ordered = observed_pmi(c, 1, "ordered")
    diag = c.rows == c.cols
    assert np.allclose(pair[~diag] - ordered[~diag], math.log(2))
    assert np.allclose(pair[diag], ordered[diag])


def test_pmi_errors():
    c = count_cooccurrences(np.array([0, 1, 0]), 1)
    with pytest.raises(CoocError, match="k must be >= 1"):
        pmi_matrix(c, 0.5)
    empty = count_cooccurrences(np.array([0]), 1, n=1)
    with pytest.raises(CoocError, match="empty"):
        pmi_matrix(empty, 1)
    with pytest.raises(MemoryError, match="GiB"):
        check_dense_size(50_000)


def test_cooc_file_round_trip(tmp_path):
    c = count_cooccurrences(np.array([3, 1, 0, 2, 3, 3, 1]), 2, n=4)
    p = tmp_path / "c.bin"
    c.save(p)
    raw = p.read_bytes()
    assert len(raw) == 16 + 16 * len(c.counts)
    assert raw[:8] == b"RVCOOC\x00\x01"
    back = SparseCooc.load(p)
    assert back.n == 4 and back.window == 2 and back.as_dict() == c.as_dict()
    keys = list(zip(back.rows.tolist(), back.cols.tolist()))
    assert keys == sorted(keys)


def test_pmi_file_round_trip(tmp_path):
    c = count_cooccurrences(np.array([3, 1, 0, 2, 3, 3, 1]), 2, n=4)
    pmi = pmi_matrix(c, 5)
    p = tmp_path / "m.f64"
    pmi.save(p)
    assert p.stat().st_size == 4 * 4 * 8
    back = PmiMatrix.load(p)
    assert np.array_equal(back.values, pmi.values)
    assert back.shift == pmi.shift and back.missing_policy == "zero"
