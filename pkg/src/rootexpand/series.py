"""Truncated power series, scrambled Laurent maps and exact multivariate polynomials.

Numeric series carry float64 coefficients and are truncated at a fixed order
``p``: every product drops powers above ``z**p``.  :class:`MultiPoly` is the
exact counterpart used when coefficients are replaced by indeterminates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from types import MappingProxyType
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import SingularInputError, UsageError

__all__ = [
    "TruncatedSeries",
    "LaurentMap",
    "MultiPoly",
    "compositions",
    "ts_add",
    "ts_mul",
    "ts_project",
    "ts_compose",
    "ts_reciprocal",
    "ts_inverse_composition",
    "ts_scramble",
    "faa_di_bruno",
    "reciprocal_derivatives",
    "mp_eval",
    "invertibility_threshold",
]

_SUPERSCRIPT = str.maketrans("0123456789-", "⁰¹²³⁴⁵⁶⁷⁸⁹⁻")
_SUBSCRIPT = str.maketrans("0123456789", "₀₁₂₃₄₅₆₇₈₉")


def compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """Yield every ordered tuple of ``parts`` positive integers summing to ``total``."""
    if parts <= 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        if total >= 1:
            yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


@dataclass(frozen=True, eq=False)
class TruncatedSeries:
    """Polynomial ``sum(coeffs[k] * z**k for k <= order)`` in the ring truncated at ``order``."""

    order: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        arr = np.array(self.coeffs, dtype=float)
        if arr.ndim != 1:
            raise UsageError("coefficients must be one-dimensional")
        if self.order < 0:
            raise UsageError(f"order must be non-negative, got {self.order}")
        if arr.shape[0] != self.order + 1:
            raise UsageError(
                f"expected {self.order + 1} coefficients for order {self.order}, got {arr.shape[0]}"
            )
        if not np.all(np.isfinite(arr)):
            raise UsageError("series coefficients must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    @classmethod
    def from_coeffs(cls, coeffs: Sequence[float]) -> "TruncatedSeries":
        return cls(len(coeffs) - 1, np.asarray(coeffs, dtype=float))

    @classmethod
    def zero(cls, order: int) -> "TruncatedSeries":
        return cls(order, np.zeros(order + 1))

    @classmethod
    def identity(cls, order: int) -> "TruncatedSeries":
        """The series ``z`` (which truncates to ``0`` at order 0)."""
        c = np.zeros(order + 1)
        if order >= 1:
            c[1] = 1.0
        return cls(order, c)

    def __getitem__(self, k: int) -> float:
        return float(self.coeffs[k])

    def __len__(self) -> int:
        return self.order + 1

    def __add__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        return ts_add(self, other)

    def __mul__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        return ts_mul(self, other)

    def __call__(self, x: float) -> float:
        """Evaluate the polynomial at a number (Horner)."""
        acc = 0.0
        for c in self.coeffs[::-1]:
            acc = acc * x + c
        return float(acc)

    def __repr__(self) -> str:
        return f"TruncatedSeries(order={self.order}, coeffs={self.coeffs.tolist()})"

    def allclose(self, other: "TruncatedSeries", rtol: float = 1e-12, atol: float = 0.0) -> bool:
        return self.order == other.order and bool(
            np.allclose(self.coeffs, other.coeffs, rtol=rtol, atol=atol)
        )


def _check_same_order(a: TruncatedSeries, b: TruncatedSeries) -> None:
    if a.order != b.order:
        raise UsageError(f"order mismatch: {a.order} != {b.order}")


def ts_add(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    _check_same_order(a, b)
    return TruncatedSeries(a.order, a.coeffs + b.coeffs)


def ts_mul(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    """Cauchy product with every power above ``z**p`` discarded."""
    _check_same_order(a, b)
    p = a.order
    return TruncatedSeries(p, np.convolve(a.coeffs, b.coeffs)[: p + 1])


def ts_project(a: TruncatedSeries, q: int) -> TruncatedSeries:
    """Keep the coefficients of degree ``<= q``; the result has order ``q``."""
    if not 0 <= q <= a.order:
        raise UsageError(f"projection degree {q} outside [0, {a.order}]")
    return TruncatedSeries(q, a.coeffs[: q + 1])


def ts_compose(f: TruncatedSeries, g: TruncatedSeries) -> TruncatedSeries:
    """Truncated composition ``f(g(z))``; requires ``g(0) == 0``.

    Horner's scheme in the truncated ring: ``p`` products instead of the
    multi-index expansion.
    """
    _check_same_order(f, g)
    if g.coeffs[0] != 0.0:
        raise UsageError(f"inner series must vanish at 0, got g(0) = {g.coeffs[0]!r}")
    p = f.order
    acc = np.zeros(p + 1)
    acc[0] = f.coeffs[p]
    for k in range(p - 1, -1, -1):
        acc = np.convolve(acc, g.coeffs)[: p + 1]
        acc[0] += f.coeffs[k]
    return TruncatedSeries(p, acc)


def ts_reciprocal(a: TruncatedSeries) -> TruncatedSeries:
    """Multiplicative inverse ``1/a`` in the truncated ring (needs ``a(0) != 0``)."""
    a0 = a.coeffs[0]
    if a0 == 0.0:
        raise SingularInputError("series with zero constant term has no reciprocal")
    p = a.order
    r = np.zeros(p + 1)
    r[0] = 1.0 / a0
    for j in range(1, p + 1):
        r[j] = -np.dot(a.coeffs[1 : j + 1], r[j - 1 :: -1][:j]) / a0
    return TruncatedSeries(p, r)


def invertibility_threshold(coeffs: Sequence[float]) -> float:
    """Relative floor below which a linear coefficient is treated as zero."""
    return 1e-12 * max(1.0, float(np.max(np.abs(coeffs))) if len(coeffs) else 1.0)


def ts_inverse_composition(f: TruncatedSeries) -> TruncatedSeries:
    """Compositional inverse ``g`` with ``f(g(z)) = z + O(z**(p+1))``.

    Computed with the Lagrange inversion formula
    ``[z^n] g = (1/n) [w^(n-1)] (w / f(w))**n``, which shares no code path
    with the coefficient recursion of the up-flat solver.

    Raises
    ------
    UsageError
        If ``f(0) != 0``.
    SingularInputError
        If the linear coefficient is below the relative threshold.
    """
    if f.coeffs[0] != 0.0:
        raise UsageError(f"series to invert must vanish at 0, got f(0) = {f.coeffs[0]!r}")
    p = f.order
    g = np.zeros(p + 1)
    if p == 0:
        return TruncatedSeries(0, g)
    if abs(f.coeffs[1]) < invertibility_threshold(f.coeffs):
        raise SingularInputError(f"linear coefficient {f.coeffs[1]!r} is numerically zero")
    # f(w)/w truncated at order p-1, then (w/f(w))^n built up by repeated products
    quotient = TruncatedSeries(p - 1, f.coeffs[1:])
    recip = ts_reciprocal(quotient)
    power = recip
    for n in range(1, p + 1):
        g[n] = power.coeffs[n - 1] / n
        if n < p:
            power = ts_mul(power, recip)
    return TruncatedSeries(p, g)


@dataclass(frozen=True)
class LaurentMap:
    """Finite Laurent polynomial ``{power: coefficient}`` with zero entries dropped."""

    terms: Mapping[int, float]

    def __post_init__(self) -> None:
        clean = {int(k): float(v) for k, v in sorted(self.terms.items()) if v != 0}
        object.__setattr__(self, "terms", MappingProxyType(clean))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LaurentMap):
            return NotImplemented
        return dict(self.terms) == dict(other.terms)

    def __hash__(self) -> int:
        return hash(tuple(self.terms.items()))

    def __len__(self) -> int:
        return len(self.terms)


def ts_scramble(a: TruncatedSeries, beta: Sequence[int] | "object") -> LaurentMap:
    """Shift each coefficient: ``delta_k z**k  ->  delta_k z**(k - beta_k)``.

    ``beta`` is either an integer sequence or any object with a ``beta``
    attribute (such as a ``BetaProfile``).  Colliding powers are summed.
    """
    b = getattr(beta, "beta", beta)
    if len(b) < a.order + 1:
        raise UsageError(f"beta has {len(b)} entries, need at least {a.order + 1}")
    out: dict[int, float] = {}
    for k, c in enumerate(a.coeffs):
        power = k - int(b[k])
        out[power] = out.get(power, 0.0) + float(c)
    return LaurentMap(out)


def faa_di_bruno(f_derivs: Sequence[float], g_derivs: Sequence[float], l: int) -> float:
    """``l``-th derivative of ``f o g`` at a point.

    Parameters
    ----------
    f_derivs : sequence
        ``f_derivs[m-1]`` is ``D^m f(g(x))`` for ``m = 1..l``.
    g_derivs : sequence
        ``g_derivs[k-1]`` is ``D^k g(x)`` for ``k = 1..l``.
    l : int
        Derivative order, ``l >= 1``.
    """
    if l < 1:
        raise UsageError(f"derivative order must be >= 1, got {l}")
    if len(f_derivs) < l or len(g_derivs) < l:
        raise UsageError(f"need {l} derivatives of f and g, got {len(f_derivs)} and {len(g_derivs)}")
    scaled_g = [g_derivs[k - 1] / math.factorial(k) for k in range(1, l + 1)]
    total = 0.0
    for m in range(1, l + 1):
        inner = 0.0
        for ks in compositions(l, m):
            prod = 1.0
            for k in ks:
                prod *= scaled_g[k - 1]
            inner += prod
        total += f_derivs[m - 1] / math.factorial(m) * inner
    return math.factorial(l) * total


def reciprocal_derivatives(g_derivs: Sequence[float]) -> list[float]:
    """Derivatives of ``1/g`` from those of ``g``.

    ``g_derivs[k]`` is ``D^k g(x)`` for ``k = 0..l``; returns ``D^j (1/g)(x)``
    for ``j = 0..l`` via :func:`faa_di_bruno` applied to ``t -> 1/t``.
    """
    g0 = float(g_derivs[0])
    if g0 == 0.0:
        raise SingularInputError("reciprocal of a function vanishing at the point")
    l = len(g_derivs) - 1
    outer = [(-1) ** m * math.factorial(m) / g0 ** (m + 1) for m in range(1, l + 1)]
    return [1.0 / g0] + [faa_di_bruno(outer, g_derivs[1:], j) for j in range(1, l + 1)]


def _monomial_str(exps: tuple[int, ...], names: Sequence[str]) -> str:
    parts = []
    for i, e in enumerate(exps):
        if e == 0:
            continue
        parts.append(names[i] + (str(e).translate(_SUPERSCRIPT) if e > 1 else ""))
    return "".join(parts)


def _term_str(coef: Fraction, mono: str) -> str:
    if not mono:
        return str(coef)
    if coef == 1:
        return mono
    if coef == -1:
        return "-" + mono
    return f"{coef}{mono}" if coef.denominator == 1 else f"({coef}){mono}"


def _join_terms(pieces: list[str]) -> str:
    out = pieces[0]
    for s in pieces[1:]:
        out += s if s.startswith("-") else "+" + s
    return out


def _to_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, Rational)):
        return Fraction(c)
    raise UsageError(f"MultiPoly coefficients must be exact rationals, got {type(c).__name__}")


class MultiPoly:
    """Polynomial with exact rational coefficients in ``nvars`` indeterminates.

    Terms map exponent tuples to nonzero :class:`fractions.Fraction` values.
    Instances are immutable; arithmetic returns new objects.
    """

    __slots__ = ("nvars", "_terms")

    def __init__(self, nvars: int, terms: Mapping[tuple[int, ...], object] | None = None):
        self.nvars = nvars
        clean: dict[tuple[int, ...], Fraction] = {}
        for exps, c in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != nvars:
                raise UsageError(f"exponent vector {exps} does not have length {nvars}")
            if any(e < 0 for e in exps):
                raise UsageError(f"negative exponent in {exps}")
            c = _to_fraction(c)
            if c != 0:
                clean[exps] = clean.get(exps, Fraction(0)) + c
        self._terms = MappingProxyType({k: v for k, v in clean.items() if v != 0})

    @property
    def terms(self) -> Mapping[tuple[int, ...], Fraction]:
        return self._terms

    @classmethod
    def constant(cls, nvars: int, value=0) -> "MultiPoly":
        return cls(nvars, {(0,) * nvars: value})

    @classmethod
    def variable(cls, nvars: int, index: int) -> "MultiPoly":
        exps = [0] * nvars
        exps[index] = 1
        return cls(nvars, {tuple(exps): 1})

    def is_zero(self) -> bool:
        return not self._terms

    def _coerce(self, other) -> "MultiPoly":
        if isinstance(other, MultiPoly):
            if other.nvars != self.nvars:
                raise UsageError(f"variable count mismatch: {self.nvars} != {other.nvars}")
            return other
        return MultiPoly.constant(self.nvars, _to_fraction(other))

    def __add__(self, other) -> "MultiPoly":
        other = self._coerce(other)
        out = dict(self._terms)
        for k, v in other._terms.items():
            out[k] = out.get(k, Fraction(0)) + v
        return MultiPoly(self.nvars, out)

    __radd__ = __add__

    def __neg__(self) -> "MultiPoly":
        return MultiPoly(self.nvars, {k: -v for k, v in self._terms.items()})

    def __sub__(self, other) -> "MultiPoly":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "MultiPoly":
        return self._coerce(other) - self

    def __mul__(self, other) -> "MultiPoly":
        other = self._coerce(other)
        out: dict[tuple[int, ...], Fraction] = {}
        for ka, va in self._terms.items():
            for kb, vb in other._terms.items():
                key = tuple(x + y for x, y in zip(ka, kb))
                out[key] = out.get(key, Fraction(0)) + va * vb
        return MultiPoly(self.nvars, out)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "MultiPoly":
        out = MultiPoly.constant(self.nvars, 1)
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other) -> bool:
        if isinstance(other, MultiPoly):
            return self.nvars == other.nvars and dict(self._terms) == dict(other._terms)
        if isinstance(other, (int, Rational)):
            return self == MultiPoly.constant(self.nvars, other)
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.nvars, frozenset(self._terms.items())))

    def degree_in(self, index: int) -> tuple[int, int]:
        """(min, max) exponent of one variable over all terms."""
        if not self._terms:
            return (0, 0)
        es = [k[index] for k in self._terms]
        return (min(es), max(es))

    def sorted_terms(self) -> list[tuple[tuple[int, ...], Fraction]]:
        """Terms ordered by total degree, then lexicographically by exponent vector."""
        return sorted(self._terms.items(), key=lambda kv: (sum(kv[0]), kv[0]))

    def format(self, names: Sequence[str] | None = None) -> str:
        names = names or [f"x{i}" for i in range(self.nvars)]
        if not self._terms:
            return "0"
        return _join_terms([_term_str(c, _monomial_str(k, names)) for k, c in self.sorted_terms()])

    def format_grouped(self, index: int = 0, names: Sequence[str] | None = None) -> str:
        """Factor out powers of one variable, highest power first.

        ``(a+b)x⁵+c x⁴`` style, as used for the coefficient tables.
        """
        names = names or [f"x{i}" for i in range(self.nvars)]
        if not self._terms:
            return "0"
        groups: dict[int, dict[tuple[int, ...], Fraction]] = {}
        for k, c in self._terms.items():
            rest = k[:index] + (0,) + k[index + 1 :]
            groups.setdefault(k[index], {})[rest] = c
        pieces = []
        for e in sorted(groups, reverse=True):
            inner = MultiPoly(self.nvars, groups[e])
            outer = names[index] + (str(e).translate(_SUPERSCRIPT) if e > 1 else "") if e else ""
            if len(inner._terms) == 1:
                (k, c), = inner._terms.items()
                pieces.append(_term_str(c, _monomial_str(k, names) + outer))
            else:
                pieces.append(f"({inner.format(names)}){outer}")
        return _join_terms(pieces)

    def __str__(self) -> str:
        return self.format()

    def __repr__(self) -> str:
        return f"MultiPoly({self.nvars}, {dict(self._terms)!r})"

    def to_json(self) -> list[dict]:
        return [
            {"exponents": list(k), "coefficient": str(c)} for k, c in self.sorted_terms()
        ]


def mp_eval(poly: MultiPoly, values: Sequence) -> object:
    """Substitute numbers for the indeterminates.

    Exact inputs (ints, Fractions) give an exact Fraction; floats give a float.
    """
    if len(values) != poly.nvars:
        raise UsageError(f"expected {poly.nvars} values, got {len(values)}")
    total = 0
    for exps, c in poly.terms.items():
        term = c
        for v, e in zip(values, exps):
            if e:
                term = term * v**e
        total = total + term
    if isinstance(total, float):
        return total
    return Fraction(total) if isinstance(total, (int, Fraction)) else total


def subscript(k: int) -> str:
    return str(k).translate(_SUBSCRIPT)
