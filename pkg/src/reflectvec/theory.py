"""Monte Carlo checks of the Gaussian word-vector model.

Covers concentration of quadratic forms and norms, self-normalization of the
log-bilinear partition function, the Gaussian structure of the implied PMI
matrix, dependence between its entries, and Procrustes recovery of the
word-to-context map from trained embeddings.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .cooc import PmiMatrix
from .corpus import unigram_probs
from .spectra import eigenvalues_symmetric, spectrum_stats

BLOCK_ROWS = 8192
T_GRID = (1.0, 2.0, 4.0, 8.0)


class TheoryError(ValueError):
    pass


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    """Counter-based Philox generator; every Monte Carlo path starts here."""
    return np.random.Generator(np.random.Philox(seed))


def child_seeds(seed: int, k: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(k)


# ----------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class GaussianEnsemble:
    n: int
    d: int
    sigma2: float
    seed: int
    vectors: np.ndarray = field(repr=False)


def sample_ensemble(
    n: int, d: int, sigma2: float | None = None, seed: int = 0, workers: int = 1
) -> GaussianEnsemble:
    """Draw ``n`` i.i.d. vectors from N(0, sigma2 I_d); sigma2 defaults to 1/d.

    Rows are generated in fixed blocks with sub-seeds spawned from ``seed``,
    so the result does not depend on ``workers``.
    """
    if n < 1 or d < 1:
        raise TheoryError(f"need n, d >= 1, got n={n}, d={d}")
    if sigma2 is None:
        sigma2 = 1.0 / d
    if sigma2 <= 0:
        raise TheoryError(f"sigma2 must be positive, got {sigma2}")
    out = np.empty((n, d), dtype=np.float64)
    starts = list(range(0, n, BLOCK_ROWS))
    seeds = child_seeds(seed, len(starts))
    sd = math.sqrt(sigma2)

    def fill(k: int) -> None:
        s = starts[k]
        e = min(n, s + BLOCK_ROWS)
        out[s:e] = make_rng(seeds[k]).standard_normal((e - s, d)) * sd

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(fill, range(len(starts))))
    else:
        for k in range(len(starts)):
            fill(k)
    return GaussianEnsemble(n, d, float(sigma2), seed, out)


@dataclass(frozen=True)
class ReflectionMask:
    d: int
    signs: np.ndarray
    seed: int | None = None

    def __post_init__(self) -> None:
        s = np.asarray(self.signs, dtype=np.float64)
        if s.shape != (self.d,) or not np.all(np.abs(s) == 1.0):
            raise TheoryError("mask entries must be +1 or -1")
        s.setflags(write=False)
        object.__setattr__(self, "signs", s)

    @property
    def l(self) -> int:
        return int(np.count_nonzero(self.signs > 0))

    def matrix(self) -> np.ndarray:
        return np.diag(self.signs)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return x * self.signs


def random_mask(d: int, seed: int, balanced: bool = False) -> ReflectionMask:
    """Rademacher sign vector; ``balanced`` forces exactly d/2 positive entries."""
    rng = make_rng(seed)
    if balanced:
        if d % 2:
            raise TheoryError("a balanced mask needs even d")
        signs = np.repeat([1.0, -1.0], d // 2)
        rng.shuffle(signs)
    else:
        signs = rng.choice([-1.0, 1.0], size=d)
    return ReflectionMask(d, signs, seed)


def mask_with_plus(d: int, l: int) -> ReflectionMask:
    if not 0 <= l <= d:
        raise TheoryError(f"need 0 <= l <= d, got l={l}, d={d}")
    return ReflectionMask(d, np.concatenate([np.ones(l), -np.ones(d - l)]))


def random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix from the QR factorisation of a Gaussian."""
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def orthogonality_error(q: np.ndarray) -> float:
    q = np.asarray(q, dtype=np.float64)
    return float(np.linalg.norm(q.T @ q - np.eye(q.shape[0])))


def check_orthogonal(q: np.ndarray, tol: float = 1e-10) -> None:
    err = orthogonality_error(q)
    if err > tol * max(1.0, math.sqrt(q.shape[0])):
        raise TheoryError(f"Q is not orthogonal: ||Q^T Q - I||_F = {err:.3e}")


# ----------------------------------------------------------------------------
# reports


@dataclass
class Check:
    name: str
    value: float
    lower: float
    upper: float

    @property
    def ok(self) -> bool:
        return bool(self.lower <= self.value <= self.upper)


@dataclass
class ConcentrationReport:
    claim: str
    case: str
    trials: int
    seed: int
    empirical_mean: float
    empirical_var: float
    predicted_mean: float
    predicted_var: float
    chebyshev_violations: dict[str, float] = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.checks)

    def failed_checks(self) -> list[Check]:
        return [c for c in self.checks if not c.ok]

    def to_dict(self) -> dict:
        out = asdict(self)
        for c, raw in zip(self.checks, out["checks"]):
            raw["ok"] = c.ok
        out["pass"] = self.passed
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "ConcentrationReport":
        raw = dict(raw)
        raw.pop("pass", None)
        raw["checks"] = [
            Check(c["name"], c["value"], c["lower"], c["upper"]) for c in raw["checks"]
        ]
        return cls(**raw)


def recheck(raw: dict) -> bool:
    """Recompute the verdict of a serialized report from its recorded numbers."""
    return ConcentrationReport.from_dict(raw).passed


def write_reports(path: str | os.PathLike, claim: str, reports: list[ConcentrationReport]) -> None:
    payload = {
        "claim": claim,
        "pass": all(r.passed for r in reports),
        "reports": [r.to_dict() for r in reports],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj))


def _within(name: str, value: float, target: float, tol: float) -> Check:
    return Check(name, float(value), float(target - tol), float(target + tol))


def _below(name: str, value: float, bound: float) -> Check:
    return Check(name, float(value), -math.inf, float(bound))


# ----------------------------------------------------------------------------
# quadratic forms and norms


def quadratic_forms(w: np.ndarray, q: np.ndarray, block: int = 16384) -> np.ndarray:
    """Row-wise w^T Q w for every row of ``w``."""
    out = np.empty(w.shape[0])
    for s in range(0, w.shape[0], block):
        chunk = w[s : s + block]
        out[s : s + block] = np.einsum("ij,ij->i", chunk, chunk @ q.T)
    return out


def quadratic_form_check(
    ensemble: GaussianEnsemble,
    q: np.ndarray,
    t_grid=T_GRID,
    case: str = "",
    claim: str = "lemma1",
    var_rtol: float = 0.05,
) -> ConcentrationReport:
    """Compare w^T Q w over the ensemble with its exact mean and variance.

    Mean Tr(Q) sigma^2, variance (d + Tr(Q^2)) sigma^4, and the Chebyshev
    band |X - mean| > t sqrt(2d) sigma^2 violated with frequency <= 1/t^2.
    """
    q = np.asarray(q, dtype=np.float64)
    d, s2 = ensemble.d, ensemble.sigma2
    if q.shape != (d, d):
        raise TheoryError(f"Q has shape {q.shape}, expected {(d, d)}")
    check_orthogonal(q)
    x = quadratic_forms(ensemble.vectors, q)
    N = x.size
    pred_mean = float(np.trace(q)) * s2
    pred_var = (d + float(np.trace(q @ q))) * s2 * s2
    emp_mean = float(x.mean())
    emp_var = float(x.var(ddof=1)) if N > 1 else 0.0
    se = math.sqrt(emp_var / N)
    tiny = 1e-12 * max(1.0, d * s2)

    checks = [
        _within("mean_within_3se", emp_mean, pred_mean, 3 * se + tiny),
        _within("var_within_rtol", emp_var, pred_var, var_rtol * pred_var + tiny),
    ]
    band = math.sqrt(2 * d) * s2
    viol = {}
    for t in t_grid:
        frac = float(np.mean(np.abs(x - pred_mean) > t * band))
        p = min(1.0, 1.0 / t**2)
        viol[f"{t:g}"] = frac
        checks.append(_below(f"chebyshev_t{t:g}", frac, p + 3 * math.sqrt(p * (1 - p) / N)))
    return ConcentrationReport(
        claim=claim,
        case=case or f"d={d}",
        trials=N,
        seed=ensemble.seed,
        empirical_mean=emp_mean,
        empirical_var=emp_var,
        predicted_mean=pred_mean,
        predicted_var=pred_var,
        chebyshev_violations=viol,
        checks=checks,
        extra={"d": d, "sigma2": s2, "trace_q": float(np.trace(q)), "trace_q2": float(np.trace(q @ q))},
    )


def named_orthogonal(kind: str, d: int, seed: int) -> np.ndarray:
    if kind == "identity":
        return np.eye(d)
    if kind == "signature":
        return random_mask(d, seed).matrix()
    if kind == "rotation":
        return random_orthogonal(d, make_rng(seed))
    raise TheoryError(f"unknown orthogonal family {kind!r}")


def quadratic_form_suite(
    dims=(25, 100, 400), trials: int = 100_000, seed: int = 0, kinds=("identity", "signature", "rotation")
) -> list[ConcentrationReport]:
    reports = []
    for k, d in enumerate(dims):
        ens = sample_ensemble(trials, d, seed=seed + k)
        for kind in kinds:
            q = named_orthogonal(kind, d, seed + 1000 + k)
            reports.append(quadratic_form_check(ens, q, case=f"d={d},Q={kind}"))
    return reports


def norm_check(ensemble: GaussianEnsemble, t_grid=T_GRID) -> ConcentrationReport:
    """Squared norms: the identity-Q special case with sigma^2 = 1/d."""
    return quadratic_form_check(
        ensemble, np.eye(ensemble.d), t_grid, case=f"d={ensemble.d}", claim="corollary1"
    )


# ----------------------------------------------------------------------------
# partition function


def partition_sample(
    n: int,
    d: int,
    alpha: float,
    q: np.ndarray,
    rng: np.random.Generator,
    centers: int | None = None,
    block: int = 256,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One draw of the model: Z_j for a set of centre words.

    Returns ``(z, cond_mean, cond_var)`` where ``cond_mean``/``cond_var``
    are the exact conditional mean and variance of Z_j given w_j.
    """
    probs = unigram_probs(n, alpha, mode="rank").probs
    w = rng.standard_normal((n, d)) / math.sqrt(d)
    c = w @ q.T
    idx = np.arange(n) if centers is None or centers >= n else np.sort(rng.choice(n, centers, replace=False))
    z = np.empty(len(idx))
    for s in range(0, len(idx), block):
        scores = w[idx[s : s + block]] @ c.T
        if scores.max() > 700:
            raise OverflowError("exp overflow in partition function")
        z[s : s + block] = np.exp(scores) @ probs
    wj = w[idx]
    norm2 = np.einsum("ij,ij->i", wj, wj)
    self_score = np.einsum("ij,ij->i", wj, wj @ q.T)
    pj = probs[idx]
    mgf = np.exp(norm2 / (2 * d))
    cond_mean = pj * np.exp(self_score) + (1 - pj) * mgf
    sum_p2 = float(np.sum(probs[::-1] ** 2))
    cond_var = (np.exp(2 * norm2 / d) - np.exp(norm2 / d)) * (sum_p2 - pj**2)
    return z, cond_mean, cond_var


@dataclass
class PartitionStats:
    n: int
    mean: float
    raw_var: float
    cond_var: float
    predicted_cond_var: float
    mean_se: float


def _partition_stats(n, d, alpha, q, seed, resamples, centers) -> PartitionStats:
    means, zs, resid, pvar = [], [], [], []
    for ss in child_seeds(seed, resamples):
        z, m, v = partition_sample(n, d, alpha, q, make_rng(ss), centers)
        means.append(z.mean())
        zs.append(z)
        resid.append(z - m)
        pvar.append(v)
    zs_all = np.concatenate(zs)
    r = np.concatenate(resid)
    se = float(np.std(means, ddof=1) / math.sqrt(len(means))) if len(means) > 1 else float(zs_all.std() / math.sqrt(zs_all.size))
    return PartitionStats(
        n=n,
        mean=float(zs_all.mean()),
        raw_var=float(zs_all.var()),
        cond_var=float(np.mean(r**2)),
        predicted_cond_var=float(np.mean(np.concatenate(pvar))),
        mean_se=se,
    )


def variance_rate(alpha: float) -> float:
    """Exponent of n in the decay of Var[Z_j | w_j]."""
    return min(1.0, 2.0 * alpha)


def partition_function_check(
    n: int,
    d: int,
    alpha: float,
    q: np.ndarray | None = None,
    trials: int = 20,
    seed: int = 0,
    centers: int | None = 1000,
    mean_window: tuple[float, float] = (1.000, 1.012),
    growth: int = 4,
    slack: float = 2.0,
) -> ConcentrationReport:
    """Self-normalisation of Z_j = sum_i p_i exp(w_j^T c_i).

    The mean of Z_j is compared with 1 + 1/(2d). The conditional variance
    Var[Z_j | w_j] is estimated from residuals against the exact conditional
    mean, at sizes n and ``growth * n``; their ratio must match
    growth^min(1, 2 alpha) within a factor ``slack``. ``trials`` is the
    number of independent resamples at each size.
    """
    if n < 100 or d < 10 or not (0 < alpha <= 1):
        raise TheoryError(f"need n >= 100, d >= 10, alpha in (0, 1]; got n={n}, d={d}, alpha={alpha}")
    if q is None:
        q = random_mask(d, seed, balanced=d % 2 == 0).matrix()
    q = np.asarray(q, dtype=np.float64)
    check_orthogonal(q)
    small = _partition_stats(n, d, alpha, q, seed, trials, centers)
    large = _partition_stats(growth * n, d, alpha, q, seed + 1, trials, centers)

    target = 1.0 + 1.0 / (2 * d)
    x = 1.0 / (2 * d)
    remainder = math.exp(x) - (1 + x)
    mc_tol = 3 * small.mean_se + 0.5 * abs(remainder)
    ratio = small.cond_var / large.cond_var
    predicted_ratio = growth ** variance_rate(alpha)
    checks = [
        Check("mean_in_window", small.mean, mean_window[0], mean_window[1]),
        Check("variance_ratio", ratio, predicted_ratio / slack, predicted_ratio * slack),
    ]
    return ConcentrationReport(
        claim="lemma2",
        case=f"n={n},d={d},alpha={alpha:g}",
        trials=trials,
        seed=seed,
        empirical_mean=small.mean,
        empirical_var=small.cond_var,
        predicted_mean=target,
        predicted_var=small.predicted_cond_var,
        checks=checks,
        extra={
            "mc_tolerance": mc_tol,
            "mean_deviation": small.mean - target,
            "raw_var": small.raw_var,
            "mean_se": small.mean_se,
            "large_n": large.n,
            "large_mean": large.mean,
            "large_cond_var": large.cond_var,
            "large_predicted_cond_var": large.predicted_cond_var,
            "variance_ratio": ratio,
            "predicted_ratio": predicted_ratio,
            "rate_exponent": variance_rate(alpha),
            "trace_q": float(np.trace(q)),
        },
    )


def sample_model_corpus(
    n: int,
    d: int,
    length: int,
    alpha: float = 1.0,
    q: np.ndarray | None = None,
    scale: float = 1.0,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Token stream from the log-linear context model.

    Word vectors are drawn from N(0, scale^2/d I), contexts are c_i = Q w_i,
    and each token follows the previous one with probability proportional to
    p_i exp(w_prev^T c_i). Returns ``(ids, W, C)``.
    """
    if n < 2 or length < 2:
        raise TheoryError("need n >= 2 and length >= 2")
    rng = make_rng(seed)
    w = rng.standard_normal((n, d)) * (scale / math.sqrt(d))
    q = np.eye(d) if q is None else np.asarray(q, dtype=np.float64)
    c = w @ q.T
    probs = unigram_probs(n, alpha, mode="rank").probs
    logits = w @ c.T + np.log(probs)
    trans = np.exp(logits - logits.max(axis=1, keepdims=True))
    cdf = np.cumsum(trans / trans.sum(axis=1, keepdims=True), axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(length)
    ids = np.empty(length, dtype=np.int64)
    ids[0] = rng.choice(n, p=probs)
    for t in range(1, length):
        ids[t] = np.searchsorted(cdf[ids[t - 1]], u[t], side="right")
    return ids, w, c


# ----------------------------------------------------------------------------
# synthetic PMI


def synthetic_pmi(ensemble: GaussianEnsemble, mask: ReflectionMask) -> PmiMatrix:
    """W diag(signs) W^T, symmetrised so that (i, j) and (j, i) agree bit for bit."""
    if ensemble.d != mask.d:
        raise TheoryError(f"ensemble d={ensemble.d} but mask d={mask.d}")
    w = ensemble.vectors
    m = (w * mask.signs) @ w.T
    m = (m + m.T) * 0.5
    return PmiMatrix(ensemble.n, m, 0.0, "synthetic")


def split_trace(ensemble: GaussianEnsemble, mask: ReflectionMask) -> float:
    """Sum over words of |x_i|^2 - |y_i|^2 for the +1 and -1 coordinate blocks."""
    w2 = ensemble.vectors**2
    plus = mask.signs > 0
    return float(w2[:, plus].sum() - w2[:, ~plus].sum())


def pmi_ensemble_check(
    n: int = 2000,
    d: int = 100,
    l: int | None = None,
    seed: int = 0,
    spectrum_seeds: int = 5,
    offdiag_rtol: float = 0.05,
    diag_var_rtol: float = 0.10,
    skew_bound: float = 0.2,
    control_rtol: float = 0.05,
) -> ConcentrationReport:
    """Entry distributions and spectrum shape of the synthetic PMI matrix."""
    if l is None:
        l = d // 2
    mask = mask_with_plus(d, l)
    ens = sample_ensemble(n, d, seed=seed)
    m = synthetic_pmi(ens, mask).values
    iu = np.triu_indices(n, 1)
    off = m[iu]
    diag = np.diag(m).copy()
    del iu

    diag_mean_target = (2 * l - d) / d
    checks = [
        _within("offdiag_var", off.var(), 1.0 / d, offdiag_rtol / d),
        _within("diag_mean", diag.mean(), diag_mean_target, 3 * math.sqrt(2.0 / d) / math.sqrt(n)),
        _within("diag_var", diag.var(ddof=1), 2.0 / d, diag_var_rtol * 2.0 / d),
    ]

    skews = []
    for k in range(spectrum_seeds):
        e = ens if k == 0 else sample_ensemble(n, d, seed=seed + 7919 * k)
        mk = m if k == 0 else synthetic_pmi(e, mask).values
        skews.append(spectrum_stats(eigenvalues_symmetric(mk, overwrite=True)).skewness)
        del mk
    mean_skew = float(np.mean(skews))
    checks.append(_below("abs_mean_skewness", abs(mean_skew), skew_bound))

    ctrl = sample_ensemble(n, d, seed=seed + 104729)
    ctrl_trace = float(np.trace(synthetic_pmi(ctrl, mask_with_plus(d, d)).values))
    checks.append(_within("identity_control_trace", ctrl_trace, float(n), control_rtol * n))

    return ConcentrationReport(
        claim="pmi-ensemble",
        case=f"n={n},d={d},l={l}",
        trials=n * (n - 1) // 2,
        seed=seed,
        empirical_mean=float(off.mean()),
        empirical_var=float(off.var()),
        predicted_mean=0.0,
        predicted_var=1.0 / d,
        checks=checks,
        extra={
            "diag_mean": float(diag.mean()),
            "diag_var": float(diag.var(ddof=1)),
            "diag_mean_target": diag_mean_target,
            "diag_var_target": 2.0 / d,
            "skewness_per_seed": skews,
            "mean_skewness": mean_skew,
            "control_trace": ctrl_trace,
        },
    )


# ----------------------------------------------------------------------------
# dependence between entries


def entry_dependence_check(
    n: int = 8,
    dims=(25, 100, 400),
    trials: int = 4000,
    seed: int = 0,
    z: float = 4.0,
) -> ConcentrationReport:
    """Covariances between PMI entries across many small synthetic matrices.

    Tracks cov(M01, M23) for disjoint pairs and cov(M01, M02) for entries
    sharing a row. Both are zero in expectation, so each must stay within
    ``z`` standard errors (1/(d sqrt(trials))), and their d-scaled values
    must stay bounded. The correlation of squared same-row entries, which
    is nonzero and decays like 1/d, is recorded as the dependence signal.
    """
    if n < 4:
        raise TheoryError("need n >= 4 to pick disjoint entry pairs")
    if trials < 1000:
        raise TheoryError("need at least 1000 draws")
    checks: list[Check] = []
    rows = {}
    prev = None
    for k, d in enumerate(dims):
        rng = make_rng(child_seeds(seed, len(dims))[k])
        mask = random_mask(d, seed + k, balanced=d % 2 == 0)
        w = rng.standard_normal((trials, n, d)) / math.sqrt(d)
        m = np.einsum("tid,tjd->tij", w * mask.signs, w)
        a, b, c, sym = m[:, 0, 1], m[:, 0, 2], m[:, 2, 3], m[:, 1, 0]
        cov_row = float(np.cov(a, b)[0, 1])
        cov_far = float(np.cov(a, c)[0, 1])
        corr_sym = float(np.corrcoef(a, sym)[0, 1])
        corr_sq = float(np.corrcoef(a**2, b**2)[0, 1])
        se = 1.0 / (d * math.sqrt(trials))
        checks.append(_below(f"abs_cov_disjoint_d{d}", abs(cov_far), z * se))
        checks.append(_below(f"abs_cov_same_row_d{d}", abs(cov_row), z * se))
        checks.append(_below(f"scaled_cov_same_row_d{d}", abs(cov_row) * d, z / math.sqrt(trials)))
        if prev is not None:
            checks.append(_below(f"same_row_trend_d{d}", abs(cov_row), prev[0] + z * prev[1]))
        prev = (abs(cov_row), se)
        rows[str(d)] = {
            "cov_same_row": cov_row,
            "cov_disjoint": cov_far,
            "corr_symmetric_pair": corr_sym,
            "corr_squares_same_row": corr_sq,
            "var_entry": float(a.var()),
        }
    first = rows[str(dims[0])]
    return ConcentrationReport(
        claim="dependence",
        case=f"n={n},dims={list(dims)}",
        trials=trials,
        seed=seed,
        empirical_mean=first["cov_same_row"],
        empirical_var=first["var_entry"],
        predicted_mean=0.0,
        predicted_var=1.0 / dims[0],
        checks=checks,
        extra={"per_d": rows},
    )


# ----------------------------------------------------------------------------
# Procrustes recovery


@dataclass(frozen=True)
class ReflectionEstimate:
    q_hat: np.ndarray
    involution_score: float
    plus_count: int
    residual: float

    @property
    def d(self) -> int:
        return self.q_hat.shape[0]

    @property
    def plus_fraction(self) -> float:
        return self.plus_count / self.d


def estimate_reflection(w: np.ndarray, c: np.ndarray) -> ReflectionEstimate:
    """Least-squares orthogonal Q with c_i ~ Q w_i, and how close Q is to an involution.

    Q minimises ||C - W Q^T||_F; with W^T C = U S V^T the minimiser is V U^T.
    ``involution_score`` is ||Q^2 - I||_F / sqrt(d); ``plus_count`` counts
    positive eigenvalues of the symmetric part of Q.
    """
    w = np.asarray(w, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if w.shape != c.shape or w.ndim != 2:
        raise TheoryError(f"W and C must have equal 2-d shapes, got {w.shape} and {c.shape}")
    n, d = w.shape
    if n < d:
        raise TheoryError(f"need n >= d, got n={n}, d={d}")
    for name, m in (("W", w), ("C", c)):
        if np.linalg.matrix_rank(m) < d:
            raise TheoryError(f"{name} is rank deficient")
    u, _, vt = np.linalg.svd(w.T @ c)
    q = vt.T @ u.T
    score = float(np.linalg.norm(q @ q - np.eye(d)) / math.sqrt(d))
    sym_eigs = np.linalg.eigvalsh((q + q.T) / 2.0)
    resid = float(np.linalg.norm(c - w @ q.T) / max(np.linalg.norm(c), 1e-300))
    return ReflectionEstimate(q, score, int(np.count_nonzero(sym_eigs > 0)), resid)


def reflection_check(
    dims=(50, 100), n: int = 2000, noise: float = 0.01, seed: int = 0, score_bound: float = 0.1
) -> ConcentrationReport:
    """Recover a planted balanced sign mask from noisy synthetic contexts."""
    checks: list[Check] = []
    per_d = {}
    for k, d in enumerate(dims):
        ens = sample_ensemble(n, d, seed=seed + k)
        mask = random_mask(d, seed + 100 + k, balanced=True)
        rng = make_rng(child_seeds(seed + 200, len(dims))[k])
        c = mask.apply(ens.vectors) + rng.standard_normal((n, d)) * noise / math.sqrt(d)
        est = estimate_reflection(ens.vectors, c)
        checks.append(Check(f"plus_count_d{d}", est.plus_count, mask.l, mask.l))
        checks.append(_below(f"involution_score_d{d}", est.involution_score, score_bound))
        per_d[str(d)] = {
            "plus_count": est.plus_count,
            "planted_plus": mask.l,
            "involution_score": est.involution_score,
            "residual": est.residual,
        }
    return ConcentrationReport(
        claim="reflection",
        case=f"n={n},dims={list(dims)},noise={noise:g}",
        trials=len(dims),
        seed=seed,
        empirical_mean=float(np.mean([v["plus_count"] / int(k) for k, v in per_d.items()])),
        empirical_var=0.0,
        predicted_mean=0.5,
        predicted_var=0.0,
        checks=checks,
        extra={"per_d": per_d},
    )


# ----------------------------------------------------------------------------
# suite

CLAIMS = ("lemma1", "corollary1", "lemma2", "pmi-ensemble", "dependence", "reflection")


def run_claim(
    claim: str,
    d: int = 100,
    n: int | None = None,
    alpha: float = 0.25,
    seed: int = 0,
    trials: int | None = None,
) -> list[ConcentrationReport]:
    """Run one claim with CLI-style parameters; ``n`` and ``trials`` default per claim."""
    if claim == "lemma1":
        return quadratic_form_suite(dims=(d,), trials=trials or 100_000, seed=seed)
    if claim == "corollary1":
        return [norm_check(sample_ensemble(n or 10_000, d, seed=seed))]
    if claim == "lemma2":
        return [partition_function_check(n or 10_000, d, alpha, trials=trials or 20, seed=seed)]
    if claim == "pmi-ensemble":
        return [pmi_ensemble_check(n or 2000, d, seed=seed)]
    if claim == "dependence":
        return [entry_dependence_check(n or 8, dims=tuple(sorted({25, d, 400})), trials=trials or 4000, seed=seed)]
    if claim == "reflection":
        return [reflection_check(dims=(d,), n=n or max(2000, 4 * d), seed=seed)]
    raise TheoryError(f"unknown claim {claim!r}; choose from {', '.join(CLAIMS)}")
