"""Expansions of the root of a score function around an anchor parameter.

A :class:`ScoreModel` bundles a score ``F(s, theta)``, its derivatives, a
rate ``phi(s)`` and a rate profile.  :func:`expand_estimator` solves for the
coefficients ``alpha_k(s)`` and assembles ``theta0 + sum alpha_k(s) phi(s)**k``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, SingularInputError, UsageError
from .sequences import BetaProfile, RelatedSequence, solve_for_profile
from .series import (
    TruncatedSeries,
    invertibility_threshold,
    reciprocal_derivatives,
    ts_compose,
    ts_inverse_composition,
)

__all__ = [
    "ScoreModel",
    "ExpansionResult",
    "coef_extract",
    "delta_from_coefs",
    "expand_estimator",
    "expansion_via_inverse",
    "remainder_bound",
    "reparametrize",
    "rescale_score",
    "finite_difference",
    "bisect_root",
    "assemble",
]

GRID_POINTS = 101


def finite_difference(f: Callable[[float], float], x: float, k: int, scale: float = 1.0) -> float:
    """``k``-th derivative by a central stencil with one Richardson step.

    The step is ``eps**(1/(k+2)) * max(1, |scale|)``, which balances the
    truncation and rounding errors of the order-``k`` stencil.
    """
    if k == 0:
        return float(f(x))
    h = np.finfo(float).eps ** (1.0 / (k + 2)) * max(1.0, abs(scale))

    def stencil(step: float) -> float:
        acc = 0.0
        for j in range(k + 1):
            acc += (-1) ** j * math.comb(k, j) * f(x + (k / 2 - j) * step)
        return acc / step**k

    coarse = stencil(h)
    fine = stencil(h / 2)
    return (4.0 * fine - coarse) / 3.0


@dataclass(frozen=True)
class ScoreModel:
    """A family of scores ``theta -> F(s, theta)`` indexed by a scale ``s``.

    Parameters
    ----------
    theta0 : float
        Anchor around which the root is expanded.
    eval : callable
        ``(s, theta) -> F(s, theta)``.
    rate : callable
        ``s -> phi(s)`` in ``(0, 1]``, non-increasing in ``s``.
    profile : {'upflat', 'zigzag'}
        Rate profile name; ``beta(p)`` builds the matching :class:`BetaProfile`.
    deriv : callable, optional
        ``(s, theta, k) -> D^k F(s, theta)``.  When omitted, derivatives are
        taken by :func:`finite_difference`.
    domain : (float, float)
        Parameter interval.
    """

    theta0: float
    eval: Callable[[Any, float], float]
    rate: Callable[[Any], float]
    profile: str = "upflat"
    deriv: Optional[Callable[[Any, float, int], float]] = None
    domain: tuple[float, float] = (-math.inf, math.inf)

    def beta(self, p: int) -> BetaProfile:
        return BetaProfile.named(self.profile, p)

    def derivative(self, s, theta: float, k: int) -> float:
        if k == 0:
            return float(self.eval(s, theta))
        if self.deriv is not None:
            return float(self.deriv(s, theta, k))
        return finite_difference(lambda t: self.eval(s, t), theta, k, self.theta0)

    def with_anchor(self, theta0: float) -> "ScoreModel":
        return replace(self, theta0=theta0)


def assemble(theta0: float, alpha: Sequence[float], phi: float) -> float:
    """``theta0 + sum_{k>=1} alpha[k] * phi**k`` in a fixed summation order."""
    acc = 0.0
    for k in range(len(alpha) - 1, 0, -1):
        acc = (acc + float(alpha[k])) * phi
    return float(theta0 + acc)


@dataclass(frozen=True, eq=False)
class ExpansionResult:
    """Coefficients and approximations produced by the engine.

    ``coef[k]`` is the rate-scaled derivative ``phi**beta_k * D^k F``,
    ``delta`` the normalized coefficients fed to the solver, ``alpha_s`` the
    finite-scale sequence and ``alpha_lim`` optional limit coefficients.
    """

    p: int
    theta0: float
    phi: float
    coef: np.ndarray
    delta: np.ndarray
    alpha_s: np.ndarray
    theta_p_s: float
    profile: str = "upflat"
    alpha_lim: Optional[np.ndarray] = None
    theta_p_inf: Optional[float] = None
    remainder: Optional[float] = None
    boundary_layer: bool = False

    def recompute_theta_p(self) -> float:
        return assemble(self.theta0, self.alpha_s, self.phi)

    def sequence(self) -> RelatedSequence:
        return RelatedSequence(self.p, self.alpha_s, BetaProfile.named(self.profile, self.p))

    def with_remainder(self, bound: float) -> "ExpansionResult":
        return replace(self, remainder=float(bound))

    def to_dict(self) -> dict:
        def arr(x):
            return None if x is None else [float(v) for v in x]

        return {
            "p": self.p,
            "profile": self.profile,
            "theta0": float(self.theta0),
            "phi": float(self.phi),
            "coef": arr(self.coef),
            "delta": arr(self.delta),
            "alpha_s": arr(self.alpha_s),
            "alpha_lim": arr(self.alpha_lim),
            "theta_p_s": float(self.theta_p_s),
            "theta_p_inf": None if self.theta_p_inf is None else float(self.theta_p_inf),
            "remainder": None if self.remainder is None else float(self.remainder),
            "boundary_layer": bool(self.boundary_layer),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExpansionResult":
        def arr(x):
            return None if x is None else np.asarray(x, dtype=float)

        return cls(
            p=int(d["p"]),
            theta0=float(d["theta0"]),
            phi=float(d["phi"]),
            coef=arr(d["coef"]),
            delta=arr(d["delta"]),
            alpha_s=arr(d["alpha_s"]),
            theta_p_s=float(d["theta_p_s"]),
            profile=d.get("profile", "upflat"),
            alpha_lim=arr(d.get("alpha_lim")),
            theta_p_inf=d.get("theta_p_inf"),
            remainder=d.get("remainder"),
            boundary_layer=bool(d.get("boundary_layer", False)),
        )


def coef_extract(model: ScoreModel, s, k: int, p: Optional[int] = None) -> float:
    """Rate-scaled derivative ``phi(s)**beta_k * D^k F(s, theta0)``."""
    if k < 0 or (p is not None and k > p):
        raise UsageError(f"coefficient index {k} outside [0, {p}]")
    beta = model.beta(max(k, 1, p or 1)).beta
    return float(model.rate(s)) ** beta[k] * model.derivative(s, model.theta0, k)


def delta_from_coefs(coef: Sequence[float]) -> np.ndarray:
    """``delta_k = -coef_k / (k! coef_1)``; ``delta_1`` is always ``-1``."""
    c = np.asarray(coef, dtype=float)
    if c.shape[0] < 2:
        raise UsageError("need at least two coefficients")
    if abs(c[1]) < invertibility_threshold(c):
        raise SingularInputError(
            f"first-derivative coefficient {c[1]!r} is numerically zero (degenerate score)"
        )
    fact = np.array([math.factorial(k) for k in range(len(c))], dtype=float)
    d = -c / (fact * c[1])
    d[1] = -1.0
    return d


def _coefs(model: ScoreModel, s, p: int) -> np.ndarray:
    return np.array([coef_extract(model, s, k, p) for k in range(p + 1)])


def _boundary_layer(alpha: Optional[np.ndarray], phi: float) -> bool:
    """True when some term of index ``k >= 2`` outweighs the first-order term."""
    if alpha is None or len(alpha) < 3:
        return False
    terms = np.abs(np.asarray(alpha, dtype=float)) * phi ** np.arange(len(alpha))
    return bool(np.max(terms[2:]) > terms[1])


def expand_estimator(
    model: ScoreModel, s, p: int, alpha_lim: Optional[Sequence[float]] = None
) -> ExpansionResult:
    """Expansion of the root of ``F(s, .)`` to order ``p``.

    Parameters
    ----------
    alpha_lim : sequence, optional
        Limit coefficients ``alpha_0..alpha_p`` (with ``alpha_0 = 0``).  When
        given, ``theta_p_inf = theta0 + sum alpha_lim[k] phi**k`` is filled in.
    """
    if p < 1:
        raise UsageError(f"order must be >= 1, got {p}")
    phi = float(model.rate(s))
    coef = _coefs(model, s, p)
    delta = delta_from_coefs(coef)
    seq = solve_for_profile(TruncatedSeries(p, delta), p, model.beta(p))
    alpha = np.array(seq.alpha)
    lim = None
    theta_inf = None
    if alpha_lim is not None:
        lim = np.asarray(alpha_lim, dtype=float)
        if lim.shape != (p + 1,):
            raise UsageError(f"alpha_lim must have {p + 1} entries, got {lim.shape}")
        theta_inf = assemble(model.theta0, lim, phi)
    return ExpansionResult(
        p=p,
        theta0=float(model.theta0),
        phi=phi,
        coef=coef,
        delta=delta,
        alpha_s=alpha,
        theta_p_s=assemble(model.theta0, alpha, phi),
        profile=model.profile,
        alpha_lim=lim,
        theta_p_inf=theta_inf,
        boundary_layer=_boundary_layer(alpha, phi) or _boundary_layer(lim, phi),
    )


def _working_interval(model: ScoreModel, f0: float, f1: float) -> tuple[float, float]:
    step = 2.0 * abs(f0 / f1) if f1 != 0 else 0.0
    step = max(step, 1e-8 * max(1.0, abs(model.theta0)))
    lo = max(model.theta0 - step, model.domain[0])
    hi = min(model.theta0 + step, model.domain[1])
    return lo, hi


def expansion_via_inverse(model: ScoreModel, s, p: int) -> ExpansionResult:
    """Up-flat coefficients from the local inverse of ``u -> F(s, theta0 + u)``.

    The unscaled Taylor series of the score is inverted with Lagrange's
    formula and evaluated at the seed; no rate exponent enters until the
    final rescaling ``alpha_k = g_k (F / DF)**k / phi**k``.

    Raises
    ------
    DomainError
        If the score is not strictly monotone on the working interval.
    """
    if p < 1:
        raise UsageError(f"order must be >= 1, got {p}")
    phi = float(model.rate(s))
    raw = np.array([model.derivative(s, model.theta0, k) for k in range(p + 1)])
    lo, hi = _working_interval(model, raw[0], raw[1])
    grid = np.linspace(lo, hi, GRID_POINTS)
    vals = np.array([model.derivative(s, t, 0) for t in grid])
    steps = np.diff(vals)
    if not (np.all(steps > 0) or np.all(steps < 0)):
        raise DomainError(f"score is not monotone on [{lo}, {hi}]; cannot invert")
    fact = np.array([math.factorial(k) for k in range(p + 1)], dtype=float)
    taylor = raw / fact
    f = np.zeros(p + 1)
    f[1:] = -taylor[1:] / taylor[1]
    g = ts_inverse_composition(TruncatedSeries(p, f))
    seed = raw[0] / (raw[1] * phi)
    alpha = g.coeffs * seed ** np.arange(p + 1)
    alpha[0] = 0.0
    coef = _coefs(model, s, p)
    return ExpansionResult(
        p=p,
        theta0=float(model.theta0),
        phi=phi,
        coef=coef,
        delta=delta_from_coefs(coef),
        alpha_s=alpha,
        theta_p_s=assemble(model.theta0, alpha, phi),
        profile="upflat",
        boundary_layer=_boundary_layer(alpha, phi),
    )


def remainder_bound(
    model: ScoreModel,
    s,
    result: ExpansionResult,
    U: tuple[float, float],
    c: Optional[float] = None,
) -> float:
    """Deterministic bound on ``|root - theta_p(s)|``.

    Returns ``K * max(S, S**(p+1)) * phi**(p+1)`` with ``S = sum |alpha_k(s)|``.
    ``K`` divides the sum of ``phi**(beta_1-beta_star) |coef_m|`` over the
    ``m`` with ``beta_m + 1 <= beta_star``, plus the sum over ``m = 2..p+1`` of
    grid suprema of ``phi**beta_1 |D^m F|`` on ``U``, by ``c``.

    Parameters
    ----------
    U : (float, float)
        Interval inside the domain containing ``theta0``, ``theta_p(s)`` and
        ``theta0 + sum |alpha_k| phi**k``.
    c : float, optional
        Lower bound on ``phi**beta_1 |DF|`` over ``U``.  When omitted it is
        estimated by a grid minimum, which is a heuristic and triggers a
        warning.
    """
    p = result.p
    alpha = np.asarray(result.alpha_s, dtype=float)
    if not np.any(alpha[1:]):
        return 0.0
    lo, hi = float(U[0]), float(U[1])
    if not lo < hi:
        raise UsageError(f"U must be a non-degenerate interval, got {U}")
    if lo < model.domain[0] or hi > model.domain[1]:
        raise DomainError(f"U = {U} is not contained in the domain {model.domain}")
    phi = float(model.rate(s))
    reach = model.theta0 + float(np.sum(np.abs(alpha[1:]) * phi ** np.arange(1, p + 1)))
    for name, point in (("theta0", model.theta0), ("theta_p(s)", result.theta_p_s), ("reach", reach)):
        if not lo <= point <= hi:
            raise DomainError(f"{name} = {point} lies outside U = [{lo}, {hi}]")
    beta = model.beta(p)
    b1, star = beta.beta[1], beta.beta_star
    grid = np.linspace(lo, hi, GRID_POINTS)
    if c is None:
        c = float(min(phi**b1 * abs(model.derivative(s, t, 1)) for t in grid))
        warnings.warn(
            "remainder bound uses a grid minimum of |phi^beta_1 DF| as c; this is a heuristic",
            stacklevel=2,
        )
    if c <= 0:
        raise UsageError(f"lower bound c must be positive, got {c}")
    linear = sum(
        phi ** (b1 - star) * abs(result.coef[m])
        for m in range(1, p + 1)
        if beta.beta[m] + 1 <= star
    )
    sup = sum(
        max(phi**b1 * abs(model.derivative(s, t, m)) for t in grid) for m in range(2, p + 2)
    )
    K = (linear + sup) / c
    S = float(np.sum(np.abs(alpha[1:])))
    return float(K * max(S, S ** (p + 1)) * phi ** (p + 1))


def reparametrize(
    alpha_dag: RelatedSequence, psi_derivs: Sequence[float], p: int
) -> RelatedSequence:
    """Push an expansion through a change of variable.

    ``psi_derivs[m-1]`` is ``D^m Psi(0)`` for ``m = 1..p`` where ``Psi`` maps
    offsets in the old parameter to offsets in the new one (``Psi(0) = 0``).
    The result is the truncated composition of ``Psi``'s Taylor polynomial
    with ``sum alpha_dag_k z**k``.
    """
    if len(psi_derivs) < p:
        raise UsageError(f"need {p} derivatives of Psi, got {len(psi_derivs)}")
    if alpha_dag.order < p:
        raise UsageError(f"sequence has order {alpha_dag.order}, need {p}")
    taylor = np.zeros(p + 1)
    for m in range(1, p + 1):
        taylor[m] = psi_derivs[m - 1] / math.factorial(m)
    inner = TruncatedSeries(p, alpha_dag.alpha[: p + 1])
    out = ts_compose(TruncatedSeries(p, taylor), inner).coeffs.copy()
    out[0] = 0.0
    profile = BetaProfile.named(alpha_dag.profile.kind, p) if alpha_dag.profile.kind != "custom" else alpha_dag.profile
    if profile.kind == "zigzag" and np.any(out[2::2] != 0.0):
        profile = BetaProfile.up_flat(p)
    return RelatedSequence(p, out, profile)


def _taylor_derivative(coeffs: Sequence[float], x0: float) -> Callable[[float, int], float]:
    """``(theta, m) -> D^m`` of the polynomial with ``coeffs[i] = D^(i+1) Phi(x0)``."""
    c = [0.0] + [float(v) for v in coeffs]

    def deriv(theta: float, m: int) -> float:
        u = theta - x0
        acc = 0.0
        for j in range(m, len(c)):
            acc += c[j] * u ** (j - m) / math.factorial(j - m)
        return acc

    return deriv


def rescale_score(
    model: ScoreModel, phi_derivs: Sequence[float] | Callable[[float, int], float]
) -> ScoreModel:
    """Divide the score by ``D Phi``; the roots are unchanged.

    Parameters
    ----------
    phi_derivs : sequence or callable
        Either ``(theta, m) -> D^m Phi(theta)`` for ``m >= 1`` or an array of
        ``D^m Phi(theta0)`` for ``m = 1..`` (``Phi`` is then its Taylor
        polynomial at ``theta0``).

    Derivatives of the quotient come from Leibniz's rule, with the
    derivatives of ``1 / D Phi`` from :func:`reciprocal_derivatives`.
    """
    if callable(phi_derivs):
        dphi = phi_derivs
        at_anchor = [dphi(model.theta0, m) for m in (1, 2)]
    else:
        if len(phi_derivs) < 1:
            raise UsageError("need at least the first derivative of Phi")
        dphi = _taylor_derivative(phi_derivs, model.theta0)
        at_anchor = list(phi_derivs)
    if abs(at_anchor[0]) < invertibility_threshold(at_anchor):
        raise SingularInputError(f"D Phi(theta0) = {at_anchor[0]!r} vanishes; cannot rescale")

    def inverse_derivs(theta: float, l: int) -> list[float]:
        return reciprocal_derivatives([dphi(theta, k + 1) for k in range(l + 1)])

    def ev(s, theta: float) -> float:
        return model.derivative(s, theta, 0) / dphi(theta, 1)

    def deriv(s, theta: float, l: int) -> float:
        h = inverse_derivs(theta, l)
        return sum(math.comb(l, j) * model.derivative(s, theta, l - j) * h[j] for j in range(l + 1))

    return ScoreModel(
        theta0=model.theta0,
        eval=ev,
        rate=model.rate,
        profile=model.profile,
        deriv=deriv,
        domain=model.domain,
    )


def bisect_root(f: Callable[[float], float], lo: float, hi: float, xtol: float = 0.0) -> float:
    """Bisection to full double precision; ``f(lo)`` and ``f(hi)`` must differ in sign."""
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise DomainError(f"no sign change on [{lo}, {hi}]")
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= xtol:
            break
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)
