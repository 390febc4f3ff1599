"""Rate profiles and the coefficient sequences solving the formal root equation.

Given Taylor coefficients ``delta`` of a normalized score and a rate profile
``beta``, the solvers return ``alpha`` such that substituting
``theta0 + sum(alpha_k z**k)`` into the scrambled score cancels every
retained power of ``z``.  Two profiles have unique solutions: up-flat
``(1, 2, 2, ..., 2)`` and zigzag ``(1, 2, 1, 2, ...)``.

Both solvers share one recursion over an arbitrary commutative ring, so the
same code yields float coefficients and exact :class:`MultiPoly` tables.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ResourceError, SingularInputError, UsageError
from .series import (
    LaurentMap,
    MultiPoly,
    TruncatedSeries,
    invertibility_threshold,
    subscript,
    ts_inverse_composition,
    ts_project,
)

__all__ = [
    "BetaProfile",
    "RelatedSequence",
    "ResidualReport",
    "upflat_sequence",
    "zigzag_sequence",
    "upflat_via_inversion",
    "check_related",
    "perturb_sequence",
    "solve_for_profile",
    "upflat_symbolic",
    "zigzag_symbolic",
    "symbol_names",
    "MAX_SYMBOLIC_ORDER",
]

MAX_SYMBOLIC_ORDER = 8

UPFLAT = "upflat"
ZIGZAG = "zigzag"
CUSTOM = "custom"


def _upflat_beta(p: int) -> tuple[int, ...]:
    return (1,) + (2,) * (p + 1)


def _zigzag_beta(p: int) -> tuple[int, ...]:
    return tuple(1 if k % 2 == 0 else 2 for k in range(p + 2))


@dataclass(frozen=True)
class BetaProfile:
    """Integer rate exponents ``beta_0..beta_{p+1}``.

    ``beta_star`` is the largest of ``beta_2..beta_{p+1}`` and
    ``gamma[m-1] = p + 1 + min(beta_m - beta_star, 0)`` bounds the total
    degree kept for the ``m``-th derivative term, ``m = 1..p``.
    """

    beta: tuple[int, ...]
    beta_star: int = field(init=False)
    gamma: tuple[int, ...] = field(init=False)

    def __post_init__(self) -> None:
        b = tuple(int(x) for x in self.beta)
        if len(b) < 3:
            raise UsageError(f"a profile needs at least 3 entries (p >= 1), got {len(b)}")
        object.__setattr__(self, "beta", b)
        p = len(b) - 2
        star = max(b[2:])
        object.__setattr__(self, "beta_star", star)
        object.__setattr__(
            self, "gamma", tuple(p + 1 + min(b[m] - star, 0) for m in range(1, p + 1))
        )

    @classmethod
    def up_flat(cls, p: int) -> "BetaProfile":
        _check_order(p)
        return cls(_upflat_beta(p))

    @classmethod
    def zigzag(cls, p: int) -> "BetaProfile":
        _check_order(p)
        return cls(_zigzag_beta(p))

    @classmethod
    def named(cls, kind: str, p: int) -> "BetaProfile":
        if kind == UPFLAT:
            return cls.up_flat(p)
        if kind == ZIGZAG:
            return cls.zigzag(p)
        raise UsageError(f"unknown profile {kind!r}; expected 'upflat' or 'zigzag'")

    @property
    def p(self) -> int:
        return len(self.beta) - 2

    @property
    def kind(self) -> str:
        """``'upflat'``, ``'zigzag'`` or ``'custom'``; insensitive to a common shift."""
        shift = self.beta[0] - 1
        normalized = tuple(b - shift for b in self.beta)
        if normalized == _upflat_beta(self.p):
            return UPFLAT
        if normalized == _zigzag_beta(self.p):
            return ZIGZAG
        return CUSTOM

    def shifted(self, c: int) -> "BetaProfile":
        return BetaProfile(tuple(b + c for b in self.beta))


def _check_order(p: int) -> None:
    if p < 1:
        raise UsageError(f"expansion order must be >= 1, got {p}")


@dataclass(frozen=True, eq=False)
class RelatedSequence:
    """Coefficients ``alpha_0..alpha_p`` (``alpha_0 = 0``) tied to a profile."""

    order: int
    alpha: np.ndarray = field(repr=False)
    profile: BetaProfile

    def __post_init__(self) -> None:
        arr = np.array(self.alpha, dtype=float)
        if arr.shape != (self.order + 1,):
            raise UsageError(f"expected {self.order + 1} coefficients, got shape {arr.shape}")
        if arr[0] != 0.0:
            raise UsageError(f"alpha[0] must be 0, got {arr[0]!r}")
        if self.profile.kind == ZIGZAG and np.any(arr[2::2] != 0.0):
            raise UsageError("zigzag sequences must have vanishing even coefficients")
        arr.setflags(write=False)
        object.__setattr__(self, "alpha", arr)

    def as_series(self) -> TruncatedSeries:
        return TruncatedSeries(self.order, self.alpha)

    def __repr__(self) -> str:
        return f"RelatedSequence(order={self.order}, alpha={self.alpha.tolist()}, kind={self.profile.kind!r})"


def _is_zero(x) -> bool:
    return x.is_zero() if isinstance(x, MultiPoly) else x == 0


def _solve_recursion(dhat: Sequence, p: int, zigzag: bool, zero, one) -> list:
    """Shared coefficient recursion over any commutative ring.

    ``dhat[k]`` plays the role of ``-delta_k / delta_1``.  ``powers[m][q]``
    holds ``[z^q] A(z)**m`` for the partial series ``A`` known so far and is
    filled column by column, so each column only uses already-solved
    coefficients.
    """
    alpha = [zero] * (p + 1)
    powers = [[zero] * (p + 1) for _ in range(p + 1)]
    powers[0][0] = one
    alpha[1] = dhat[0]
    if p >= 1:
        powers[1][1] = alpha[1]
    for q in range(2, p + 1):
        # column q of A**m for m >= 2 needs alpha_1..alpha_{q-m+1}
        for m in range(2, q + 1):
            acc = zero
            for j in range(1, q - m + 2):
                if _is_zero(alpha[j]) or _is_zero(powers[m - 1][q - j]):
                    continue
                acc = acc + alpha[j] * powers[m - 1][q - j]
            powers[m][q] = acc
        if zigzag:
            if q % 2 == 0:
                continue
            acc = zero
            # even m pair with total degree q-1, odd m with total degree q
            for m in range(2, q + 1):
                col = q - 1 if m % 2 == 0 else q
                if m > col or _is_zero(dhat[m]) or _is_zero(powers[m][col]):
                    continue
                acc = acc + dhat[m] * powers[m][col]
        else:
            acc = zero
            for m in range(2, q + 1):
                if _is_zero(dhat[m]) or _is_zero(powers[m][q]):
                    continue
                acc = acc + dhat[m] * powers[m][q]
        alpha[q] = acc
        powers[1][q] = acc
    return alpha


def _normalized(delta: TruncatedSeries, p: int) -> list[float]:
    _check_order(p)
    if delta.order < p:
        raise UsageError(f"delta has order {delta.order}, need at least {p}")
    d = delta.coeffs[: p + 1]
    if abs(d[1]) < invertibility_threshold(d):
        raise SingularInputError(f"linear coefficient delta_1 = {d[1]!r} is numerically zero")
    return [float(-x / d[1]) for x in d]


def upflat_sequence(delta: TruncatedSeries, p: int) -> RelatedSequence:
    """Unique related sequence for the up-flat profile (float recursion)."""
    alpha = _solve_recursion(_normalized(delta, p), p, False, 0.0, 1.0)
    return RelatedSequence(p, np.array(alpha), BetaProfile.up_flat(p))


def zigzag_sequence(delta: TruncatedSeries, p: int) -> RelatedSequence:
    """Unique related sequence for the zigzag profile; even entries are 0."""
    alpha = _solve_recursion(_normalized(delta, p), p, True, 0.0, 1.0)
    return RelatedSequence(p, np.array(alpha), BetaProfile.zigzag(p))


def upflat_via_inversion(delta: TruncatedSeries, p: int) -> RelatedSequence:
    """Up-flat coefficients from the compositional inverse of ``sum_{k>=1} delta_k z**k``.

    ``alpha_k = g_k * (-delta_0)**k`` where ``g`` is the truncated inverse.
    This route never touches the recursion in :func:`upflat_sequence`.
    """
    _check_order(p)
    if delta.order < p:
        raise UsageError(f"delta has order {delta.order}, need at least {p}")
    d = ts_project(delta, p).coeffs.copy()
    seed = d[0]
    d[0] = 0.0
    g = ts_inverse_composition(TruncatedSeries(p, d))
    alpha = g.coeffs * (-seed) ** np.arange(p + 1)
    alpha[0] = 0.0
    return RelatedSequence(p, alpha, BetaProfile.up_flat(p))


def solve_for_profile(delta: TruncatedSeries, p: int, profile: BetaProfile | str) -> RelatedSequence:
    """Dispatch to the solver matching a named profile."""
    kind = profile if isinstance(profile, str) else profile.kind
    if kind == UPFLAT:
        return upflat_sequence(delta, p)
    if kind == ZIGZAG:
        return zigzag_sequence(delta, p)
    raise UsageError(
        "only up-flat and zigzag profiles can be solved; use check_related for other profiles"
    )


@dataclass(frozen=True)
class ResidualReport:
    """Outcome of :func:`check_related`.

    ``residual`` is the largest absolute coefficient of the scrambled
    equation; ``scale`` is the same quantity with every contribution
    replaced by its absolute value, giving a natural yardstick for
    floating-point cancellation.  ``by_power`` lists the raw coefficients.
    """

    residual: float
    scale: float
    by_power: LaurentMap

    def ok(self, rtol: float = 1e-10) -> bool:
        return self.residual <= rtol * max(self.scale, np.finfo(float).tiny)


def _alpha_powers(alpha: np.ndarray, max_m: int, max_q: int) -> np.ndarray:
    """``out[m, q] = [z^q] A(z)**m`` for ``m <= max_m``, ``q <= max_q``."""
    a = np.zeros(max_q + 1)
    n = min(len(alpha), max_q + 1)
    a[:n] = alpha[:n]
    a[0] = 0.0
    out = np.zeros((max_m + 1, max_q + 1))
    out[0, 0] = 1.0
    for m in range(1, max_m + 1):
        out[m] = np.convolve(out[m - 1], a)[: max_q + 1]
    return out


def check_related(
    alpha: RelatedSequence | Sequence[float],
    delta: TruncatedSeries,
    beta: BetaProfile,
    gamma: Sequence[int] | None = None,
) -> ResidualReport:
    """Residual of the scrambled root equation.

    Builds ``delta_0 z**(-beta_0) + sum_m delta_m sum_{k_1+..+k_m < gamma_m}
    alpha_{k_1}..alpha_{k_m} z**(k_1+..+k_m - beta_m)`` for ``m = 1..p`` and
    reports its largest coefficient.  ``gamma`` overrides the profile's
    truncation bounds.
    """
    a = np.asarray(alpha.alpha if isinstance(alpha, RelatedSequence) else alpha, dtype=float)
    p = beta.p
    if delta.order < p:
        raise UsageError(f"delta has order {delta.order}, profile needs {p}")
    gam = tuple(beta.gamma if gamma is None else gamma)
    if len(gam) != p:
        raise UsageError(f"gamma must have {p} entries, got {len(gam)}")
    max_q = max(max(gam) - 1, 1)
    pw = _alpha_powers(a, p, max_q)
    pw_abs = _alpha_powers(np.abs(a), p, max_q)
    signed: dict[int, float] = {-beta.beta[0]: float(delta.coeffs[0])}
    absolute: dict[int, float] = {-beta.beta[0]: abs(float(delta.coeffs[0]))}
    for m in range(1, p + 1):
        dm = float(delta.coeffs[m])
        for q in range(m, gam[m - 1]):
            power = q - beta.beta[m]
            signed[power] = signed.get(power, 0.0) + dm * pw[m, q]
            absolute[power] = absolute.get(power, 0.0) + abs(dm) * pw_abs[m, q]
    residual = float(max((abs(v) for v in signed.values()), default=0.0))
    scale = float(max(absolute.values(), default=0.0))
    return ResidualReport(residual, scale, LaurentMap(signed))


def perturb_sequence(
    delta: TruncatedSeries, lambda0: float, p: int, beta: BetaProfile | str
) -> RelatedSequence:
    """Solve after shifting the constant coefficient by ``-lambda0``.

    With ``delta`` holding the unnormalized coefficients ``<F>_k / k!``,
    ``lambda0`` is the perturbation's own constant coefficient in the same
    units, so ``lambda0 == delta[0]`` removes the seed entirely.
    """
    shifted = np.array(delta.coeffs, dtype=float)
    shifted[0] -= lambda0
    return solve_for_profile(TruncatedSeries(delta.order, shifted), p, beta)


def symbol_names(p: int) -> list[str]:
    """Printable names ``δ̂₀..δ̂_p`` of the normalized indeterminates."""
    return ["δ̂" + subscript(k) for k in range(p + 1)]


def _symbolic(p: int, zigzag: bool) -> list[MultiPoly]:
    _check_order(p)
    if p > MAX_SYMBOLIC_ORDER:
        raise ResourceError(f"symbolic tables are limited to p <= {MAX_SYMBOLIC_ORDER}, got {p}")
    nv = p + 1
    dhat = [MultiPoly.variable(nv, k) for k in range(nv)]
    zero = MultiPoly.constant(nv, 0)
    one = MultiPoly.constant(nv, 1)
    return _solve_recursion(dhat, p, zigzag, zero, one)


def upflat_symbolic(p: int) -> list[MultiPoly]:
    """Up-flat ``alpha_0..alpha_p`` as exact polynomials in ``δ̂_k = -delta_k/delta_1``.

    The variable of index 1 is a placeholder (its value would be ``-1``) and
    never occurs.
    """
    return _symbolic(p, False)


def zigzag_symbolic(p: int) -> list[MultiPoly]:
    """Zigzag counterpart of :func:`upflat_symbolic`."""
    return _symbolic(p, True)


def normalized_values(delta: Sequence[float]) -> list[float]:
    """The vector ``δ̂`` fed to :func:`~rootexpand.series.mp_eval` for a numeric ``delta``."""
    d = list(delta)
    return [-x / d[1] for x in d]


