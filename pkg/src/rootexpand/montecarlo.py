"""Kolmogorov-Smirnov distances and the exponential-model sampling experiment."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Sequence, TextIO

import numpy as np
from scipy.special import ndtr

from .errors import UsageError
from .rng import stream

__all__ = [
    "EmpiricalDistribution",
    "KSRow",
    "KSTable",
    "ks_two_sample",
    "ks_vs_cdf",
    "exponential_ks_experiment",
    "analytic_nonlinearity_ks",
    "mc_error",
]

KS_HEADER = ("n", "delta1", "delta2", "delta3", "mc_error")


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    """Sorted sample defining a step cumulative distribution function."""

    samples: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        arr = np.array(self.samples, dtype=float)
        if arr.ndim != 1:
            raise UsageError("samples must be one-dimensional")
        if np.any(np.diff(arr) < 0):
            raise UsageError("samples must be sorted; use EmpiricalDistribution.of")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @classmethod
    def of(cls, data: Iterable[float]) -> "EmpiricalDistribution":
        return cls(np.sort(np.asarray(list(data) if not isinstance(data, np.ndarray) else data,
                                      dtype=float)))

    def __len__(self) -> int:
        return self.samples.shape[0]

    def cdf(self, x) -> np.ndarray:
        return np.searchsorted(self.samples, x, side="right") / len(self)


def _require_nonempty(*dists: EmpiricalDistribution) -> None:
    for d in dists:
        if len(d) == 0:
            raise UsageError("empirical distribution is empty")


def ks_two_sample(a: EmpiricalDistribution, b: EmpiricalDistribution) -> float:
    """``sup_x |F_a(x) - F_b(x)|``, attained at one of the sample points."""
    _require_nonempty(a, b)
    points = np.concatenate((a.samples, b.samples))
    return float(np.max(np.abs(a.cdf(points) - b.cdf(points))))


def ks_vs_cdf(a: EmpiricalDistribution, cdf: Callable) -> float:
    """One-sample distance to a continuous cdf.

    Raises
    ------
    UsageError
        If ``cdf`` decreases along the sorted samples or leaves ``[0, 1]``.
    """
    _require_nonempty(a)
    x = a.samples
    try:
        values = np.asarray(cdf(x), dtype=float)
        if values.shape != x.shape:
            raise TypeError
    except (TypeError, ValueError):
        values = np.array([float(cdf(v)) for v in x])
    if np.any(np.diff(values) < 0):
        raise UsageError("cdf is not monotone on the samples")
    if np.any(values < 0) or np.any(values > 1):
        raise UsageError("cdf values must lie in [0, 1]")
    m = len(x)
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - values), np.max(values - (i - 1) / m)))


class KSRow(NamedTuple):
    n: int
    delta1: float
    delta2: float
    delta3: float
    mc_error: float


@dataclass(frozen=True)
class KSTable:
    """Rows of the three distances per sample size."""

    rows: tuple[KSRow, ...]

    def __post_init__(self) -> None:
        for r in self.rows:
            for v in (r.delta1, r.delta2, r.delta3):
                if not 0.0 <= v <= 1.0:
                    raise UsageError(f"distance {v} outside [0, 1] at n = {r.n}")

    def write_csv(self, out: TextIO) -> None:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(KS_HEADER)
        for r in self.rows:
            w.writerow([r.n] + [f"{v:.17g}" for v in r[1:]])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def mc_error(m: int) -> float:
    """99% critical scale ``1.63 / sqrt(m)`` of a one-sample distance."""
    return 1.63 / math.sqrt(m)


def exponential_ks_experiment(
    theta: float, n_list: Sequence[int], m: int, seed: int
) -> KSTable:
    """Distances between the rescaled MLE error, its nonlinear proxy and the Gaussian limit.

    For each ``n``: ``eps = sqrt(n) (1/T_n - theta)`` from ``m`` draws of the
    sample mean ``T_n ~ Gamma(n, 1/(n theta))``; ``G`` standard Gaussian on
    an independent stream; ``sqrt(n) H(G/sqrt(n)) = -theta G / (1 + G/sqrt(n))``
    kept only where ``G > -sqrt(n)``.  Reports
    ``delta1 = KS(eps, theta G)``, ``delta2 = KS(eps, sqrt(n) H)`` and
    ``delta3 = KS(sqrt(n) H, theta G)``.

    Stream ``2j`` feeds the sample means and ``2j+1`` the Gaussians for the
    ``j``-th entry of ``n_list``.
    """
    if not theta > 0:
        raise UsageError(f"theta must be positive, got {theta}")
    if m < 1:
        raise UsageError(f"m must be positive, got {m}")
    rows = []
    for j, n in enumerate(n_list):
        if n < 1:
            raise UsageError(f"sample sizes must be positive, got {n}")
        root = math.sqrt(n)
        t_bar = stream(seed, 2 * j).gamma(shape=n, scale=1.0 / (n * theta), size=m)
        g = stream(seed, 2 * j + 1).standard_normal(m)
        eps = EmpiricalDistribution.of(root * (1.0 / t_bar - theta))
        kept = g[g > -root]
        proxy = EmpiricalDistribution.of(-theta * kept / (1.0 + kept / root))
        limit = EmpiricalDistribution.of(theta * g)
        rows.append(
            KSRow(
                int(n),
                ks_two_sample(eps, limit),
                ks_two_sample(eps, proxy),
                ks_two_sample(proxy, limit),
                mc_error(m),
            )
        )
    return KSTable(tuple(rows))


def _proxy_cdf(y: np.ndarray, theta: float, n: int) -> np.ndarray:
    """Law of ``-theta G/(1 + G/sqrt(n))`` given ``G > -sqrt(n)``."""
    root = math.sqrt(n)
    out = np.zeros_like(y, dtype=float)
    inside = y > -theta * root
    yi = y[inside]
    out[inside] = ndtr(yi / (theta + yi / root)) / ndtr(root)
    return out


def analytic_nonlinearity_ks(theta: float, n: int, grid_points: int = 4096) -> float:
    """Exact distance between ``sqrt(n) H(G/sqrt(n))`` and ``theta G``.

    The transform is decreasing, so its cdf follows from the Gaussian cdf
    through the inverse ``-v/(theta+v)``.  The supremum is searched on a
    grid over ``+-8 theta`` followed by two local refinements; the jump at
    the lower edge ``-theta sqrt(n)`` of the support is included explicitly.
    """
    if not theta > 0:
        raise UsageError(f"theta must be positive, got {theta}")
    if n < 1:
        raise UsageError(f"n must be positive, got {n}")

    def gap(y: np.ndarray) -> np.ndarray:
        return np.abs(_proxy_cdf(y, theta, n) - ndtr(y / theta))

    lo, hi = -8.0 * theta, 8.0 * theta
    grid = np.linspace(lo, hi, grid_points)
    values = gap(grid)
    best = float(values.max())
    for _ in range(2):
        i = int(np.argmax(values))
        left, right = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
        grid = np.linspace(left, right, 257)
        values = gap(grid)
        best = max(best, float(values.max()))
    edge = -theta * math.sqrt(n)
    if edge >= lo:
        # left limit at the support edge: proxy cdf is 0, limit cdf is ndtr(-sqrt(n))
        best = max(best, float(ndtr(-math.sqrt(n))))
    return best
