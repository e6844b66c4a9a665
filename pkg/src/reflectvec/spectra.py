"""Eigenvalue spectra of symmetric matrices and their shape statistics."""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg

MAX_N = 40_000
SYMMETRY_RTOL = 1e-10
TRACE_RTOL = 1e-8


class SpectrumError(ValueError):
    pass


def max_asymmetry(a: np.ndarray, block: int = 2048) -> float:
    n = a.shape[0]
    worst = 0.0
    for r0 in range(0, n, block):
        r1 = min(n, r0 + block)
        diff = np.abs(a[r0:r1, :] - a[:, r0:r1].T)
        worst = max(worst, float(diff.max(initial=0.0)))
    return worst


def eigenvalues_symmetric(matrix: np.ndarray, overwrite: bool = False) -> np.ndarray:
    """All eigenvalues of a dense symmetric matrix, ascending.

    Uses LAPACK's divide-and-conquer tridiagonal solver. The input is checked
    for symmetry first (relative tolerance 1e-10 of the largest entry) and the
    eigenvalue sum is checked against the trace afterwards.
    """
    a = np.asarray(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise SpectrumError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n < 1:
        raise SpectrumError("empty matrix")
    if n > MAX_N:
        raise SpectrumError(f"n={n} exceeds the dense eigensolver cap of {MAX_N}")
    scale = float(np.abs(a).max())
    asym = max_asymmetry(a)
    if asym > SYMMETRY_RTOL * max(scale, np.finfo(float).tiny):
        raise SpectrumError(f"matrix is not symmetric: max |A - A^T| = {asym:.3e}")
    trace = float(np.trace(a))
    if not overwrite:
        a = a.copy()
    lam = scipy.linalg.eigh(
        a, eigvals_only=True, overwrite_a=True, check_finite=True, driver="evd", lower=True
    )
    lam = np.sort(lam)
    bound = n * TRACE_RTOL * max(float(np.abs(lam).max()), np.finfo(float).tiny)
    if abs(lam.sum() - trace) > bound:
        raise SpectrumError(
            f"eigenvalue sum {lam.sum():.6e} disagrees with trace {trace:.6e}"
        )
    return lam


def semicircle_density(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.sqrt(np.clip(4.0 - x * x, 0.0, None)) / (2.0 * math.pi)


def semicircle_cdf(x: np.ndarray) -> np.ndarray:
    x = np.clip(np.asarray(x, dtype=np.float64), -2.0, 2.0)
    return 0.5 + x * np.sqrt(4.0 - x * x) / (4.0 * math.pi) + np.arcsin(x / 2.0) / math.pi


def standardize(eigenvalues: np.ndarray) -> np.ndarray:
    lam = np.asarray(eigenvalues, dtype=np.float64)
    sd = lam.std()
    if sd == 0:
        raise SpectrumError("zero spread; cannot standardize")
    return (lam - lam.mean()) / sd


def semicircle_l1(eigenvalues: np.ndarray, bins: int = 101) -> float:
    """L1 distance between the standardized spectrum and the semicircle law.

    Computed on a histogram whose range covers both the data and [-2, 2],
    comparing empirical bin mass with exact semicircle mass per bin.
    """
    z = standardize(eigenvalues)
    lo = min(float(z.min()), -2.0)
    hi = max(float(z.max()), 2.0)
    edges = np.linspace(lo, hi, bins + 1)
    counts, _ = np.histogram(z, bins=edges)
    emp = counts / len(z)
    ref = np.diff(semicircle_cdf(edges))
    return float(np.abs(emp - ref).sum())


def wigner_matrix(n: int, rng: np.random.Generator) -> np.ndarray:
    """Symmetric matrix with N(0, 1/n) off-diagonal and N(0, 2/n) diagonal entries."""
    g = rng.standard_normal((n, n)) / math.sqrt(n)
    return (g + g.T) / math.sqrt(2.0)


@dataclass
class SpectrumReport:
    n: int
    eigenvalues: list[float]
    trace: float
    mean: float
    stdev: float
    skewness: float
    odd_moment_3: float
    trace_ratio: float
    bin_edges: list[float]
    counts: list[int]
    semicircle_reference: list[float]
    semicircle_l1: float

    @property
    def bin_centers(self) -> np.ndarray:
        e = np.asarray(self.bin_edges)
        return (e[:-1] + e[1:]) / 2.0

    def to_dict(self) -> dict:
        return asdict(self)

    def save_json(self, path: str | os.PathLike) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    def histogram_csv(self) -> str:
        rows = ["bin_center,count"]
        rows += [f"{c:.10g},{k}" for c, k in zip(self.bin_centers.tolist(), self.counts)]
        return "\n".join(rows) + "\n"


def spectrum_stats(eigenvalues, bins: int = 101) -> SpectrumReport:
    """Moments, symmetry metrics and a histogram of a spectrum.

    The histogram spans [-max|lambda|, +max|lambda|] so it is centred on 0.
    ``semicircle_reference`` holds the semicircle density (in eigenvalue
    units) at each bin centre after matching the spectrum's mean and spread.
    """
    lam = np.sort(np.asarray(eigenvalues, dtype=np.float64))
    if lam.size == 0:
        raise SpectrumError("empty spectrum")
    n = lam.size
    mean = float(lam.mean())
    dev = lam - mean
    m2 = float(np.mean(dev**2))
    m3 = float(np.mean(dev**3))
    sd = math.sqrt(m2)
    skew = m3 / m2**1.5 if m2 > 0 else 0.0
    trace = float(lam.sum())
    ratio = abs(trace) / (n * sd) if sd > 0 else float("inf") if trace else 0.0

    top = float(np.abs(lam).max()) or 1.0
    edges = np.linspace(-top, top, bins + 1)
    counts, _ = np.histogram(lam, bins=edges)
    centers = (edges[:-1] + edges[1:]) / 2.0
    if sd > 0:
        ref = semicircle_density((centers - mean) / sd) / sd
        l1 = semicircle_l1(lam, bins)
    else:
        ref = np.zeros_like(centers)
        l1 = float("nan")
    return SpectrumReport(
        n=n,
        eigenvalues=lam.tolist(),
        trace=trace,
        mean=mean,
        stdev=sd,
        skewness=skew,
        odd_moment_3=m3,
        trace_ratio=ratio,
        bin_edges=edges.tolist(),
        counts=counts.astype(int).tolist(),
        semicircle_reference=ref.tolist(),
        semicircle_l1=l1,
    )
