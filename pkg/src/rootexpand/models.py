"""Statistical models whose estimators are roots of scores.

Covers one-parameter exponential families (with exponential and binomial
specializations), the natural-parameter scale, the symmetric binomial point
where the zigzag profile applies, and the Ornstein-Uhlenbeck drift estimator
built from a martingale estimating function.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import DomainError, UsageError
from .expansion import ExpansionResult, ScoreModel, coef_extract, expand_estimator
from .rng import stream
from .sequences import RelatedSequence, perturb_sequence, upflat_sequence
from .series import (
    TruncatedSeries,
    reciprocal_derivatives,
    ts_inverse_composition,
)

__all__ = [
    "ExpFamilyModel",
    "SampleSummary",
    "OUSpec",
    "ClosedForms",
    "BinomialExpansions",
    "OUEstimate",
    "expfam_score",
    "fisher_info",
    "mean_function_derivatives",
    "exponential_closed_forms",
    "exponential_truncated",
    "binomial_expansions",
    "binomial_limit_coefficients",
    "natural_scale_expansion",
    "binomial_phase_transition",
    "expfam_score_model",
    "ou_simulate",
    "ou_estimate",
    "ou_eta_score_model",
    "ou_theta_score_model",
    "ou_psi_derivs",
    "ou_perturbed_sequence",
]

DerivFn = Callable[[float, int], float]


@dataclass(frozen=True)
class ExpFamilyModel:
    """Density ``h(x) exp(w(theta) T(x) - A(theta))``.

    ``w_deriv(theta, k)`` and ``A_deriv(theta, k)`` return ``D^k w`` and
    ``D^k A`` for any ``k >= 0``.  ``h`` does not enter the score and is not
    stored.
    """

    name: str
    w_deriv: DerivFn
    A_deriv: DerivFn
    statistic: Callable[[np.ndarray], np.ndarray]
    theta_domain: tuple[float, float]
    check_grid: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        for t in self.check_grid:
            if self.w_deriv(t, 1) == 0:
                raise DomainError(f"{self.name}: w'({t}) vanishes")
            if fisher_info(self, t) <= 0:
                raise DomainError(f"{self.name}: Fisher information not positive at {t}")

    @classmethod
    def exponential(cls) -> "ExpFamilyModel":
        """Exponential law with rate ``theta``: ``w = -theta``, ``A = -log theta``."""

        def w(theta: float, k: int) -> float:
            return -theta if k == 0 else (-1.0 if k == 1 else 0.0)

        def A(theta: float, k: int) -> float:
            if k == 0:
                return -math.log(theta)
            return (-1) ** k * math.factorial(k - 1) / theta**k

        return cls("exponential", w, A, lambda x: np.asarray(x, float), (0.0, math.inf),
                   tuple(np.geomspace(1e-3, 1e3, 13)))

    @classmethod
    def binomial(cls, N: int = 1) -> "ExpFamilyModel":
        """Binomial law with ``N`` trials: ``w = log(theta/(1-theta))``, ``A = -N log(1-theta)``."""
        if N < 1:
            raise UsageError(f"number of trials must be >= 1, got {N}")

        def w(theta: float, k: int) -> float:
            if k == 0:
                return math.log(theta / (1 - theta))
            return math.factorial(k - 1) * ((-1) ** (k - 1) / theta**k + 1 / (1 - theta) ** k)

        def A(theta: float, k: int) -> float:
            if k == 0:
                return -N * math.log1p(-theta)
            return N * math.factorial(k - 1) / (1 - theta) ** k

        return cls(f"binomial(N={N})", w, A, lambda x: np.asarray(x, float), (0.0, 1.0),
                   tuple(np.linspace(0.01, 0.99, 15)))

    def in_domain(self, theta: float) -> bool:
        return self.theta_domain[0] < theta < self.theta_domain[1]

    def check(self, theta: float) -> None:
        if not self.in_domain(theta):
            raise DomainError(f"theta = {theta} outside {self.theta_domain} for {self.name}")

    def mean(self, theta: float) -> float:
        """``D_w A = A' / w'``, the mean of ``T``."""
        return self.A_deriv(theta, 1) / self.w_deriv(theta, 1)

    def mean_curvature(self, theta: float) -> float:
        """``D_w^2 A = (A'' w' - A' w'') / w'^3``, the variance of ``T``."""
        w1, w2 = self.w_deriv(theta, 1), self.w_deriv(theta, 2)
        a1, a2 = self.A_deriv(theta, 1), self.A_deriv(theta, 2)
        return (a2 * w1 - a1 * w2) / w1**3


def fisher_info(model: ExpFamilyModel, theta: float) -> float:
    """``I(theta) = D_w^2 A(theta) * w'(theta)**2``."""
    value = model.mean_curvature(theta) * model.w_deriv(theta, 1) ** 2
    if not value > 0:
        raise DomainError(f"non-positive Fisher information {value} at theta = {theta}")
    return value


@dataclass(frozen=True)
class SampleSummary:
    """Sample size ``n``, mean statistic ``t_bar`` and its standardized form ``g_n``."""

    n: int
    t_bar: float
    g_n: Optional[float] = None

    def __post_init__(self) -> None:
        if self.n < 1:
            raise UsageError(f"sample size must be >= 1, got {self.n}")

    @classmethod
    def at(cls, model: ExpFamilyModel, n: int, t_bar: float, theta: float) -> "SampleSummary":
        """Summary whose ``g_n`` is standardized under ``theta``."""
        model.check(theta)
        g = math.sqrt(n) * (t_bar - model.mean(theta)) / math.sqrt(model.mean_curvature(theta))
        return cls(n, t_bar, g)

    @classmethod
    def from_g(cls, model: ExpFamilyModel, n: int, g: float, theta: float) -> "SampleSummary":
        """Summary with prescribed ``g_n``; ``t_bar`` is solved for."""
        model.check(theta)
        t_bar = model.mean(theta) + g * math.sqrt(model.mean_curvature(theta)) / math.sqrt(n)
        return cls(n, t_bar, g)

    @classmethod
    def from_data(cls, model: ExpFamilyModel, data: Sequence[float],
                  theta: Optional[float] = None) -> "SampleSummary":
        x = np.asarray(data, dtype=float)
        t_bar = float(np.mean(model.statistic(x)))
        if theta is None:
            return cls(len(x), t_bar)
        return cls.at(model, len(x), t_bar, theta)


def expfam_score(model: ExpFamilyModel, summary: SampleSummary, theta: float, k: int) -> float:
    """``D^k F(n, theta) = n (w^(k+1)(theta) t_bar - A^(k+1)(theta))``."""
    if k < 0:
        raise UsageError(f"derivative order must be >= 0, got {k}")
    model.check(theta)
    return summary.n * (model.w_deriv(theta, k + 1) * summary.t_bar - model.A_deriv(theta, k + 1))


def expfam_score_model(
    model: ExpFamilyModel,
    theta0: float,
    summary: SampleSummary | Callable[[int], float],
    profile: str = "upflat",
) -> ScoreModel:
    """Score of an exponential family as a :class:`ScoreModel` with rate ``1/sqrt(n)``.

    ``summary`` is either one fixed sample (then the scale must equal its
    ``n``) or a map ``n -> t_bar`` describing a family of samples.
    """
    model.check(theta0)
    if isinstance(summary, SampleSummary):
        fixed = summary

        def at(n: int) -> SampleSummary:
            if n != fixed.n:
                raise UsageError(f"score built for n = {fixed.n}, evaluated at {n}")
            return fixed
    else:
        t_of_n = summary

        def at(n: int) -> SampleSummary:
            return SampleSummary(int(n), float(t_of_n(n)))

    return ScoreModel(
        theta0=theta0,
        eval=lambda n, t: expfam_score(model, at(n), t, 0),
        deriv=lambda n, t, k: expfam_score(model, at(n), t, k),
        rate=lambda n: 1.0 / math.sqrt(n),
        profile=profile,
        domain=model.theta_domain,
    )


class ClosedForms(NamedTuple):
    H: float
    calH: float
    theta_inf: float


def exponential_closed_forms(theta: float, g: float, n: int) -> ClosedForms:
    """Closed forms of the exponential MLE in terms of ``x = g / sqrt(n)``.

    ``H(x) = -theta x / (1 + x)`` and ``calH(x) = theta / (1 + x)``, so that
    ``theta_inf = calH(x) = theta + H(x)`` is the exact MLE ``1 / T_n``.
    """
    if not theta > 0:
        raise DomainError(f"rate must be positive, got {theta}")
    root = math.sqrt(n)
    if g <= -root:
        raise DomainError(f"g = {g} <= -sqrt(n): the sample mean would be non-positive")
    x = g / root
    calH = theta / (1.0 + x)
    return ClosedForms(H=-theta * x / (1.0 + x), calH=calH, theta_inf=calH)


def exponential_truncated(theta: float, g: float, n: int, p: int) -> float:
    """``theta * sum_{k=0..p} (-g/sqrt(n))**k``."""
    x = -g / math.sqrt(n)
    return theta * sum(x**k for k in range(p + 1))


class BinomialExpansions(NamedTuple):
    theta2_inf: float
    theta3_inf: float


def binomial_limit_coefficients(theta: float, N: int, g: float) -> np.ndarray:
    """Limit coefficients ``alpha_0..alpha_3`` of the binomial MLE in powers of ``1/sqrt(n)``."""
    if not 0 < theta < 1:
        raise DomainError(f"theta must lie in (0, 1), got {theta}")
    spread = math.sqrt(theta * (1 - theta))
    return np.array([
        0.0,
        g * spread / math.sqrt(N),
        g**2 * (1 - 2 * theta) / N,
        g**3 * (1 - 5 * theta + 5 * theta**2) / (N**1.5 * spread),
    ])


def binomial_expansions(theta: float, N: int, n: int, g: float) -> BinomialExpansions:
    """Second- and third-order limit expansions of the binomial MLE."""
    if not 0 < theta < 1:
        raise DomainError(f"theta must lie in (0, 1), got {theta}")
    spread = math.sqrt(theta * (1 - theta))
    nN = n * N
    second = theta + g * spread / math.sqrt(nN) + (g**2 / n) * (1 - 2 * theta) / N
    third = second + (g**3 / nN**1.5) * (1 - 5 * theta + 5 * theta**2) / spread
    return BinomialExpansions(second, third)


def mean_function_derivatives(model: ExpFamilyModel, theta: float, p: int) -> list[float]:
    """``D^j (A'/w')(theta)`` for ``j = 0..p`` by Leibniz's rule."""
    inv = reciprocal_derivatives([model.w_deriv(theta, k + 1) for k in range(p + 1)])
    return [
        sum(math.comb(j, i) * model.A_deriv(theta, i + 1) * inv[j - i] for i in range(j + 1))
        for j in range(p + 1)
    ]


def natural_scale_expansion(
    model: ExpFamilyModel, theta0: float, p: int, method: str = "inversion"
) -> np.ndarray:
    """Deterministic coefficients ``omega_0..omega_p`` (``omega_0 = 0``).

    ``omega_k`` is the ``k``-th Taylor coefficient of the inverse mean
    function at ``D_wA(theta0)``, times ``(D_w^2 A(theta0))**(k/2)``, so that
    ``theta_p(n) = theta0 + sum omega_k (g_n / sqrt(n))**k``.

    ``method='inversion'`` uses Lagrange inversion of the mean's Taylor
    series; ``method='recursion'`` solves the up-flat recursion with seed
    ``-1``.  Both must agree.
    """
    model.check(theta0)
    if p < 1:
        raise UsageError(f"order must be >= 1, got {p}")
    derivs = mean_function_derivatives(model, theta0, p)
    taylor = np.array([d / math.factorial(j) for j, d in enumerate(derivs)])
    taylor[0] = 0.0
    if method == "inversion":
        inverse = ts_inverse_composition(TruncatedSeries(p, taylor)).coeffs
    elif method == "recursion":
        seeded = taylor.copy()
        seeded[0] = -1.0
        inverse = np.array(upflat_sequence(TruncatedSeries(p, seeded), p).alpha)
    else:
        raise UsageError(f"unknown method {method!r}")
    spread = math.sqrt(model.mean_curvature(theta0))
    omega = inverse * spread ** np.arange(p + 1)
    omega[0] = 0.0
    return omega


def binomial_phase_transition(n: int, N: int, t_bar: float, p: int,
                              profile: str = "zigzag") -> ExpansionResult:
    """Expansion of the binomial MLE anchored at ``theta0 = 1/2``.

    Under the zigzag profile every coefficient beyond the first vanishes.
    ``profile='upflat'`` gives the coarser expansion for comparison.
    """
    model = ExpFamilyModel.binomial(N)
    score = expfam_score_model(model, 0.5, SampleSummary(n, t_bar), profile=profile)
    return expand_estimator(score, n, p)


@dataclass(frozen=True)
class OUSpec:
    """Ornstein-Uhlenbeck drift ``theta``, noise ``sigma``, step ``dt`` and ``n`` steps."""

    theta: float
    sigma: float
    dt: float
    n: int

    def __post_init__(self) -> None:
        for name in ("theta", "sigma", "dt", "n"):
            if not getattr(self, name) > 0:
                raise UsageError(f"{name} must be positive, got {getattr(self, name)}")


def ou_simulate(spec: OUSpec, seed: int, stream_index: int = 0) -> np.ndarray:
    """Exact skeleton ``X_0..X_n`` started from the invariant Gaussian law."""
    rng = stream(seed, stream_index)
    decay = math.exp(-spec.theta * spec.dt)
    stationary_sd = spec.sigma / math.sqrt(2 * spec.theta)
    step_sd = stationary_sd * math.sqrt(-math.expm1(-2 * spec.theta * spec.dt))
    noise = rng.standard_normal(spec.n + 1)
    shocks = np.concatenate(([stationary_sd * noise[0]], step_sd * noise[1:]))
    # AR(1) recursion X_{i+1} = decay X_i + shock_{i+1} as a linear filter
    return lfilter([1.0], [1.0, -decay], shocks)


class OUEstimate(NamedTuple):
    eta_hat: float
    theta_hat: float


def _ou_sums(path: np.ndarray) -> tuple[float, float]:
    x = np.asarray(path, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise UsageError("path must be a 1-d array with at least two points")
    prev, nxt = x[:-1], x[1:]
    return float(np.dot(prev, nxt)), float(np.dot(prev, prev))


def ou_estimate(path: np.ndarray, dt: float) -> OUEstimate:
    """Closed-form estimators ``eta = sum X_{i-1} X_i / sum X_{i-1}^2`` and ``-log(eta)/dt``."""
    cross, energy = _ou_sums(path)
    if not energy > 0:
        raise DomainError("sum of squared lagged observations is zero")
    eta = cross / energy
    if not eta > 0:
        raise DomainError(f"eta estimate {eta} is not positive; log undefined")
    return OUEstimate(eta, -math.log(eta) / dt)


def ou_eta_score_model(path: np.ndarray, sigma: float, eta0: float) -> ScoreModel:
    """Score in ``eta = exp(-dt theta)``: ``sum -X_{i-1} (X_i - X_{i-1} eta) / sigma^2``.

    It is affine in ``eta``, so every derivative beyond the first is zero.
    The scale is the number of increments and the rate is ``1/sqrt(n)``.
    """
    cross, energy = _ou_sums(path)
    s2 = sigma**2

    def deriv(n, eta: float, k: int) -> float:
        if k == 0:
            return (-cross + energy * eta) / s2
        return energy / s2 if k == 1 else 0.0

    return ScoreModel(
        theta0=eta0,
        eval=lambda n, eta: deriv(n, eta, 0),
        deriv=deriv,
        rate=lambda n: 1.0 / math.sqrt(n),
        profile="upflat",
        domain=(0.0, math.inf),
    )


def ou_theta_score_model(path: np.ndarray, sigma: float, dt: float, theta0: float) -> ScoreModel:
    """Martingale score in ``theta`` with conditional mean ``x exp(-dt theta)``."""
    cross, energy = _ou_sums(path)
    s2 = sigma**2

    def deriv(n, theta: float, k: int) -> float:
        decay = math.exp(-dt * theta)
        if k == 0:
            return (-cross + energy * decay) / s2
        return energy / s2 * (-dt) ** k * decay

    return ScoreModel(
        theta0=theta0,
        eval=lambda n, t: deriv(n, t, 0),
        deriv=deriv,
        rate=lambda n: 1.0 / math.sqrt(n),
        profile="upflat",
        domain=(-math.inf, math.inf),
    )


def ou_psi_derivs(eta0: float, dt: float, p: int) -> np.ndarray:
    """``D^m Psi(0)`` for ``Psi(u) = -log(1 + u/eta0)/dt``, ``m = 1..p``."""
    if not eta0 > 0:
        raise DomainError(f"eta0 must be positive, got {eta0}")
    return np.array(
        [-(1 / dt) * (-1) ** (m + 1) * math.factorial(m - 1) / eta0**m for m in range(1, p + 1)]
    )


def ou_perturbed_sequence(
    path: np.ndarray, sigma: float, dt: float, theta0: float, epsilon: float, p: int
) -> RelatedSequence:
    """Up-flat coefficients for the score shifted by an approximation error.

    ``epsilon`` is the value at ``theta0`` of the discrepancy between the
    scores built from an approximate and the exact conditional mean.
    """
    model = ou_theta_score_model(path, sigma, dt, theta0)
    n = len(path) - 1
    coef = np.array([coef_extract(model, n, k, p) / math.factorial(k) for k in range(p + 1)])
    lam = model.rate(n) ** model.beta(p).beta[0] * epsilon
    return perturb_sequence(TruncatedSeries(p, coef), lam, p, "upflat")
