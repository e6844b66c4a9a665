"""Word-similarity and analogy benchmarks for word vectors."""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .embeddings import EmbeddingStore


class EvalError(ValueError):
    pass


class OutOfVocabulary(KeyError):
    """A query word is missing; callers skip the item rather than fail."""


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise EvalError("cosine of a zero vector is undefined")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def fractional_ranks(x) -> np.ndarray:
    """1-based ranks with ties given the average of the positions they span."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(len(x))
    i = 0
    while i < len(xs):
        j = i
        while j + 1 < len(xs) and xs[j + 1] == xs[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(xs, ys) -> float:
    if len(xs) != len(ys):
        raise EvalError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 2:
        raise EvalError("Spearman correlation needs at least two items")
    rx = fractional_ranks(xs)
    ry = fractional_ranks(ys)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = math.sqrt(float(rx @ rx) * float(ry @ ry))
    if denom == 0:
        return float("nan")
    return float(np.clip(rx @ ry / denom, -1.0, 1.0))


@dataclass
class SimilarityDataset:
    name: str
    pairs: list[tuple[str, str, float]]

    @property
    def duplicates(self) -> int:
        seen = set()
        dup = 0
        for a, b, _ in self.pairs:
            key = (a, b) if a <= b else (b, a)
            dup += key in seen
            seen.add(key)
        return dup


@dataclass
class AnalogyDataset:
    name: str
    questions: list[tuple[str, str, str, str]]
    sections: list[str] = field(default_factory=list)


def _name(path) -> str:
    return os.path.splitext(os.path.basename(os.fspath(path)))[0]


def load_similarity(path, name: str | None = None) -> SimilarityDataset:
    """``word_a word_b score`` per line; '#' comments and a leading header are skipped."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if len(parts) < 3:
                raise EvalError(f"{path}:{lineno}: expected 'word_a word_b score'")
            try:
                score = float(parts[2])
            except ValueError:
                if not pairs:
                    continue
                raise EvalError(f"{path}:{lineno}: bad score {parts[2]!r}") from None
            if not math.isfinite(score):
                raise EvalError(f"{path}:{lineno}: non-finite score")
            pairs.append((parts[0].lower(), parts[1].lower(), score))
    if not pairs:
        raise EvalError(f"{path}: no word pairs")
    return SimilarityDataset(name or _name(path), pairs)


def load_analogy(path, name: str | None = None) -> AnalogyDataset:
    """Four words per line; lines starting with ':' name a section."""
    questions, sections = [], []
    section = ""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith(":"):
                section = line[1:].strip()
                continue
            parts = line.lower().split()
            if len(parts) != 4:
                raise EvalError(f"{path}:{lineno}: expected four words")
            questions.append(tuple(parts))
            sections.append(section)
    if not questions:
        raise EvalError(f"{path}: no questions")
    return AnalogyDataset(name or _name(path), questions, sections)


@dataclass
class EvalResult:
    dataset: str
    metric: str
    value: float
    coverage: float
    skipped: int
    total: int

    def to_dict(self) -> dict:
        return asdict(self)


def _index(store: EmbeddingStore) -> dict[str, int]:
    return store.index()


def eval_similarity(store: EmbeddingStore, dataset: SimilarityDataset) -> EvalResult:
    """Spearman correlation between word-vector cosines and human scores."""
    if not dataset.pairs:
        raise EvalError(f"{dataset.name}: empty dataset")
    idx = _index(store)
    model, human = [], []
    for a, b, score in dataset.pairs:
        if a in idx and b in idx:
            model.append(cosine(store.W[idx[a]], store.W[idx[b]]))
            human.append(score)
    used = len(model)
    if used == 0:
        raise EvalError(f"{dataset.name}: no pair has both words in the vocabulary")
    rho = spearman(model, human) if used >= 2 else float("nan")
    total = len(dataset.pairs)
    return EvalResult(dataset.name, "spearman_rho", rho, used / total, total - used, total)


class AnalogySolver:
    """3CosMul over unit-normalised word vectors.

    Cosines are mapped to [0, 1] by (1 + cos) / 2 before forming
    cos(x, b) * cos(x, c) / (cos(x, a) + eps); a, b and c are never answers.
    """

    def __init__(self, store: EmbeddingStore, epsilon: float = 1e-3):
        W = np.asarray(store.W, dtype=np.float64)
        norms = np.linalg.norm(W, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise EvalError("zero word vector in store")
        self.unit = W / norms
        self.words = store.words
        self.index = _index(store)
        self.epsilon = epsilon

    def ids(self, *words: str) -> list[int]:
        missing = [w for w in words if w not in self.index]
        if missing:
            raise OutOfVocabulary(missing[0])
        return [self.index[w] for w in words]

    def scores(self, a: int, b: int, c: int) -> np.ndarray:
        sims = self.unit @ self.unit[[a, b, c]].T
        sims = (sims + 1.0) / 2.0
        out = sims[:, 1] * sims[:, 2] / (sims[:, 0] + self.epsilon)
        out[[a, b, c]] = -np.inf
        return out

    def answer_ids(self, triples: np.ndarray, batch: int = 256) -> np.ndarray:
        """Top-1 ids for an (m, 3) array of (a, b, c) ids."""
        triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
        out = np.empty(len(triples), dtype=np.int64)
        rows = np.arange(batch)
        for s in range(0, len(triples), batch):
            t = triples[s : s + batch]
            m = len(t)
            sa = (self.unit @ self.unit[t[:, 0]].T + 1.0) / 2.0
            sb = (self.unit @ self.unit[t[:, 1]].T + 1.0) / 2.0
            sc = (self.unit @ self.unit[t[:, 2]].T + 1.0) / 2.0
            score = sb * sc / (sa + self.epsilon)
            for k in range(3):
                score[t[:, k], rows[:m]] = -np.inf
            out[s : s + m] = np.argmax(score, axis=0)
        return out


def three_cos_mul(
    store: EmbeddingStore | AnalogySolver, a: str, b: str, c: str, epsilon: float = 1e-3, topk: int = 1
) -> list[tuple[str, float]]:
    """Best answers to 'a is to b as c is to ?', highest score first.

    Raises :class:`OutOfVocabulary` if a query word is unknown.
    """
    solver = store if isinstance(store, AnalogySolver) else AnalogySolver(store, epsilon)
    ia, ib, ic = solver.ids(a, b, c)
    s = solver.scores(ia, ib, ic)
    k = min(topk, len(s) - 3)
    top = np.argsort(-s, kind="stable")[:k]
    return [(solver.words[i], float(s[i])) for i in top]


def eval_analogy(store: EmbeddingStore, dataset: AnalogyDataset, epsilon: float = 1e-3) -> EvalResult:
    """Top-1 3CosMul accuracy over questions whose four words are all known."""
    if not dataset.questions:
        raise EvalError(f"{dataset.name}: empty dataset")
    solver = AnalogySolver(store, epsilon)
    idx = solver.index
    triples, expected = [], []
    for q in dataset.questions:
        if all(w in idx for w in q):
            triples.append([idx[q[0]], idx[q[1]], idx[q[2]]])
            expected.append(idx[q[3]])
    total = len(dataset.questions)
    if not triples:
        raise EvalError(f"{dataset.name}: no answerable questions")
    got = solver.answer_ids(np.asarray(triples))
    acc = float(np.mean(got == np.asarray(expected)))
    return EvalResult(dataset.name, "accuracy", acc, len(triples) / total, total - len(triples), total)


def format_table(rows: dict[str, list[EvalResult]], sizes: dict[str, int] | None = None) -> str:
    """Aligned text table: one row per model, one column per dataset."""
    names: list[str] = []
    for results in rows.values():
        for r in results:
            if r.dataset not in names:
                names.append(r.dataset)
    header = ["Model", "Size", *names]
    body = []
    for model, results in rows.items():
        by_name = {r.dataset: r for r in results}
        size = sizes.get(model) if sizes else None
        cells = [model, _human(size) if size else "-"]
        for nm in names:
            r = by_name.get(nm)
            cells.append("-" if r is None or math.isnan(r.value) else f"{r.value:.3f}".replace("0.", ".", 1))
        body.append(cells)
    widths = [max(len(str(row[k])) for row in [header, *body]) for k in range(len(header))]
    lines = ["  ".join(str(c).ljust(w) if k < 2 else str(c).rjust(w) for k, (c, w) in enumerate(zip(row, widths))) for row in [header, *body]]
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines) + "\n"


def _human(n: int) -> str:
    if n >= 1_000_000:
        return f"{n / 1e6:.0f}M"
    if n >= 1_000:
        return f"{n / 1e3:.0f}K"
    return str(n)
