import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rootexpand.errors import SingularInputError, UsageError
from rootexpand.series import (
    LaurentMap,
    MultiPoly,
    TruncatedSeries,
    compositions,
    faa_di_bruno,
    mp_eval,
    reciprocal_derivatives,
    ts_add,
    ts_compose,
    ts_inverse_composition,
    ts_mul,
    ts_project,
    ts_scramble,
)
from rootexpand.sequences import BetaProfile, upflat_sequence, upflat_symbolic

finite = st.floats(min_value=-5, max_value=5, allow_nan=False, allow_infinity=False)


def series(order, elements=finite):
    return st.lists(elements, min_size=order + 1, max_size=order + 1).map(TruncatedSeries.from_coeffs)


def ts(*c):
    return TruncatedSeries.from_coeffs(c)


def reciprocal_example(theta, p):
    """f(x) = -theta x / (theta + x), an involution."""
    return TruncatedSeries.from_coeffs([0.0] + [(-1) ** k / theta ** (k - 1) for k in range(1, p + 1)])


# --- construction ------------------------------------------------------------

def test_construction_validates_length_and_finiteness():
    with pytest.raises(UsageError):
        TruncatedSeries(2, np.zeros(2))
    with pytest.raises(UsageError):
        TruncatedSeries(1, np.array([0.0, np.inf]))


def test_coefficients_are_read_only():
    a = ts(1, 2)
    with pytest.raises(ValueError):
        a.coeffs[0] = 5.0


# --- add / mul ---------------------------------------------------------------

def test_add_identity():
    assert ts_add(ts(1, 1), ts(0, 0)).allclose(ts(1, 1))


def test_add_cancellation():
    assert np.array_equal(ts_add(ts(1, 0, 2), ts(3, 0, -2)).coeffs, [4, 0, 0])


def test_add_order_mismatch():
    with pytest.raises(UsageError):
        ts_add(ts(1, 2), ts(1, 2, 3))


@given(series(5), series(5))
def test_add_commutes(a, b):
    assert np.array_equal(ts_add(a, b).coeffs, ts_add(b, a).coeffs)


def test_mul_difference_of_squares():
    assert np.array_equal(ts_mul(ts(1, 1, 0), ts(1, -1, 0)).coeffs, [1, 0, -1])


def test_mul_truncates():
    assert np.array_equal(ts_mul(ts(0, 1), ts(0, 1)).coeffs, [0, 0])


@given(series(6), series(6))
def test_mul_matches_direct_convolution_loop(a, b):
    expected = [sum(a[i] * b[k - i] for i in range(k + 1)) for k in range(7)]
    assert np.allclose(ts_mul(a, b).coeffs, expected, rtol=1e-13, atol=1e-13)


@given(series(5), series(5), series(5))
def test_ring_axioms(a, b, c):
    tol = dict(rtol=1e-13, atol=1e-11)
    assert np.allclose(ts_mul(a, b).coeffs, ts_mul(b, a).coeffs, **tol)
    assert np.allclose(ts_mul(ts_mul(a, b), c).coeffs, ts_mul(a, ts_mul(b, c)).coeffs, **tol)
    assert np.allclose(ts_add(ts_add(a, b), c).coeffs, ts_add(a, ts_add(b, c)).coeffs, **tol)
    assert np.allclose(
        ts_mul(a, ts_add(b, c)).coeffs, ts_add(ts_mul(a, b), ts_mul(a, c)).coeffs, **tol
    )


# --- projection --------------------------------------------------------------

def test_project_drops_high_degrees():
    out = ts_project(ts(1, 2, 3), 1)
    assert out.order == 1 and np.array_equal(out.coeffs, [1, 2])


def test_project_full_order_is_identity():
    a = ts(1, 2, 3)
    assert np.array_equal(ts_project(a, 2).coeffs, a.coeffs)


def test_project_out_of_range():
    with pytest.raises(UsageError):
        ts_project(ts(1, 2), 3)


@given(series(4))
def test_project_composes(a):
    assert np.array_equal(ts_project(ts_project(a, 4), 2).coeffs, ts_project(a, 2).coeffs)


# --- composition -------------------------------------------------------------

def test_compose_with_identity():
    f = ts(1, 2, 3, 4)
    assert f.allclose(ts_compose(f, TruncatedSeries.identity(3)))


def test_reciprocal_example_is_self_inverse_under_composition():
    f = reciprocal_example(2.0, 5)
    out = ts_compose(f, f).coeffs
    assert np.allclose(out, [0, 1, 0, 0, 0, 0], atol=1e-15)


def test_compose_requires_vanishing_inner_constant():
    with pytest.raises(UsageError):
        ts_compose(ts(1, 1), ts(1, 1))


def _compose_by_powers(f, g):
    p = f.order
    acc = np.zeros(p + 1)
    acc[0] = f[0]
    power = TruncatedSeries.from_coeffs([1.0] + [0.0] * p)
    for m in range(1, p + 1):
        power = ts_mul(power, g)
        acc += f[m] * power.coeffs
    return acc


@given(series(4), series(4))
def test_compose_matches_repeated_multiplication(f, g):
    g = TruncatedSeries(4, np.concatenate(([0.0], g.coeffs[1:])))
    assert np.allclose(ts_compose(f, g).coeffs, _compose_by_powers(f, g), rtol=1e-12, atol=1e-9)


# --- inversion ---------------------------------------------------------------

def test_inverse_of_identity():
    assert np.array_equal(ts_inverse_composition(TruncatedSeries.identity(4)).coeffs, [0, 1, 0, 0, 0])


def test_inverse_of_reciprocal_example_is_itself():
    f = reciprocal_example(2.0, 5)
    assert np.allclose(ts_inverse_composition(f).coeffs, f.coeffs, rtol=1e-14, atol=1e-15)


@pytest.mark.parametrize("theta", [-3.0, -0.5, 0.25, 1.0, 7.0])
def test_inverse_is_involution_on_reciprocal_family(theta):
    f = reciprocal_example(theta, 6)
    g = ts_inverse_composition(f)
    assert np.allclose(ts_inverse_composition(g).coeffs, f.coeffs, rtol=1e-12)
    assert np.allclose(g.coeffs, f.coeffs, rtol=1e-12)


def test_inverse_of_quadratic_example():
    # f(z) = -z + sum_{k>=2} (-theta)^k z^k with theta = 1/3.  The closed-form
    # root h_-(z) of the associated quadratic solves f(h) = -z, so the inverse
    # is h_-(-z); coefficients of h_- frozen from a sympy series expansion.
    theta = 1 / 3
    f = TruncatedSeries.from_coeffs([0.0, -1.0] + [(-theta) ** k for k in range(2, 6)])
    expected = [0, -1, Fraction(1, 9), Fraction(1, 81), Fraction(-1, 729), Fraction(-5, 6561)]
    assert np.allclose(ts_inverse_composition(f).coeffs, [float(x) for x in expected], rtol=1e-13, atol=1e-16)


def test_inverse_rejects_vanishing_linear_term():
    with pytest.raises(SingularInputError):
        ts_inverse_composition(ts(0, 1e-14, 1, 1))


def test_inverse_rejects_nonzero_constant():
    with pytest.raises(UsageError):
        ts_inverse_composition(ts(1, 1))


coef10 = st.floats(min_value=-10, max_value=10, allow_nan=False)
lin = st.one_of(st.floats(min_value=0.1, max_value=10), st.floats(min_value=-10, max_value=-0.1))


@settings(max_examples=200)
@given(lin, st.lists(coef10, min_size=5, max_size=5))
def test_inverse_composes_to_identity(d1, rest):
    f = TruncatedSeries.from_coeffs([0.0, d1] + rest)
    out = ts_compose(f, ts_inverse_composition(f)).coeffs
    expected = np.array([0, 1, 0, 0, 0, 0, 0], dtype=float)
    # the inverse coefficients grow like (max|d_k|/|d_1|)^k; scale the tolerance accordingly
    growth = max(1.0, max(abs(x) for x in rest) / abs(d1)) ** 6
    assert np.max(np.abs(out - expected)) <= 1e-10 * growth


# --- scrambling --------------------------------------------------------------

def test_scramble_collision_sums():
    out = ts_scramble(ts(0.5, 2.0), (1, 2))
    assert out == LaurentMap({-1: 2.5})


def test_scramble_zero_series_is_empty():
    assert len(ts_scramble(TruncatedSeries.zero(3), (1, 2, 2, 2))) == 0


def test_scramble_without_shift_keeps_powers():
    out = ts_scramble(ts(1, 2, 3), (0, 0, 0))
    assert dict(out.terms) == {0: 1.0, 1: 2.0, 2: 3.0}


def test_scramble_accepts_profile():
    out = ts_scramble(ts(1, 2, 3), BetaProfile.up_flat(2))
    assert dict(out.terms) == {-1: 3.0, 0: 3.0}


def test_laurent_map_drops_zeros():
    assert dict(LaurentMap({1: 0.0, 2: 1.0}).terms) == {2: 1.0}


# --- Faa di Bruno ------------------------------------------------------------

def test_faa_di_bruno_first_order_is_chain_rule():
    assert faa_di_bruno([3.0], [5.0], 1) == 15.0


def test_faa_di_bruno_second_order():
    f1, f2, g1, g2 = 1.5, -2.0, 0.7, 3.0
    assert math.isclose(faa_di_bruno([f1, f2], [g1, g2], 2), f2 * g1**2 + f1 * g2, rel_tol=1e-15)


def test_faa_di_bruno_rejects_short_input():
    with pytest.raises(UsageError):
        faa_di_bruno([1.0], [1.0], 2)


@settings(max_examples=100)
@given(st.lists(finite, min_size=7, max_size=7), st.lists(finite, min_size=6, max_size=6),
       st.integers(min_value=1, max_value=6))
def test_faa_di_bruno_matches_composition(fc, gc, l):
    # Taylor coefficients at 0: f(y) = sum fc[k] y^k, g(x) = sum gc[k-1] x^k
    f = TruncatedSeries.from_coeffs(fc[:7])
    g = TruncatedSeries.from_coeffs([0.0] + gc)
    f_derivs = [fc[m] * math.factorial(m) for m in range(1, 7)]
    g_derivs = [gc[k - 1] * math.factorial(k) for k in range(1, 7)]
    direct = ts_compose(f, g).coeffs[l] * math.factorial(l)
    assert math.isclose(faa_di_bruno(f_derivs, g_derivs, l), direct, rel_tol=1e-9, abs_tol=1e-6)


def test_reciprocal_derivatives_of_exponential():
    # 1/e^x has derivatives (-1)^j at 0
    assert np.allclose(reciprocal_derivatives([1.0] * 5), [1, -1, 1, -1, 1])


def test_compositions_count():
    assert len(list(compositions(6, 3))) == math.comb(5, 2)
    assert list(compositions(3, 1)) == [(3,)]


# --- MultiPoly ---------------------------------------------------------------

def test_multipoly_constant_evaluates_to_itself():
    assert mp_eval(MultiPoly.constant(3, Fraction(7, 2)), [1, 2, 3]) == Fraction(7, 2)


def test_multipoly_monomial_evaluation():
    x0, x2 = MultiPoly.variable(3, 0), MultiPoly.variable(3, 2)
    assert mp_eval(x2 * x0 * x0, [1, 0, 1]) == 1


def test_mp_eval_length_mismatch():
    with pytest.raises(UsageError):
        mp_eval(MultiPoly.constant(2, 1), [1])


def test_multipoly_rejects_float_coefficients():
    with pytest.raises(UsageError):
        MultiPoly(1, {(1,): 0.5})


def test_multipoly_drops_zero_terms():
    x = MultiPoly.variable(2, 0)
    assert (x - x).is_zero()
    assert (x - x).terms == {}


def _random_poly(draw, nvars=3):
    terms = draw(st.dictionaries(
        st.tuples(*[st.integers(0, 3)] * nvars),
        st.fractions(min_value=-5, max_value=5, max_denominator=7),
        max_size=4,
    ))
    return MultiPoly(nvars, terms)


polys = st.composite(lambda draw: _random_poly(draw))()
points = st.lists(st.fractions(min_value=-3, max_value=3, max_denominator=5), min_size=3, max_size=3)


@given(polys, polys, polys)
def test_multipoly_ring_axioms(a, b, c):
    assert a * b == b * a
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a + (-a) == MultiPoly.constant(3, 0)


@given(polys, polys, points)
def test_multipoly_evaluation_is_exact_homomorphism(a, b, v):
    assert mp_eval(a * b, v) == mp_eval(a, v) * mp_eval(b, v)
    assert mp_eval(a + b, v) == mp_eval(a, v) + mp_eval(b, v)


def test_upflat_table_evaluates_like_numeric_solver():
    rng = np.random.default_rng(5)
    table = upflat_symbolic(5)
    for _ in range(20):
        d = rng.uniform(-1, 1, 6)
        d[1] = rng.uniform(0.5, 1.5) * rng.choice([-1, 1])
        alpha = upflat_sequence(TruncatedSeries.from_coeffs(d), 5).alpha
        dhat = [-x / d[1] for x in d]
        assert math.isclose(mp_eval(table[5], dhat), alpha[5], rel_tol=1e-12, abs_tol=1e-13)


def test_multipoly_printer_orders_by_degree_then_exponent():
    x, y = MultiPoly.variable(2, 0), MultiPoly.variable(2, 1)
    p = y * y + x + 3 * x * y + Fraction(1, 2)
    assert p.format(["x", "y"]) == "1/2+x+y²+3xy"


def test_multipoly_grouped_printer():
    d0, d2, d3 = (MultiPoly.variable(4, i) for i in (0, 2, 3))
    p = d3 * d0**3 + d2 * d0**2
    assert p.format_grouped(0, ["a", "b", "c", "d"]) == "da³+ca²"
