import math

import pytest
import scipy.special as sp
from hypothesis import given, settings, strategies as st

from fracsym.errors import DomainError
from fracsym.special import bracket, classify_order, gamma, gen_binomial, recip_gamma


@pytest.mark.parametrize("p, expected", [(2.3, 2), (3.0, 3), (-2.5, -1), (0.0, 0), (-1.0, -1), (0.999, 0)])
def test_bracket(p, expected):
    assert bracket(p) == expected


def test_bracket_non_finite():
    with pytest.raises(DomainError):
        bracket(math.inf)


def test_recip_gamma_examples():
    assert recip_gamma(1) == 1
    assert recip_gamma(0) == 0.0
    assert recip_gamma(-3) == 0.0
    assert recip_gamma(0.5) == pytest.approx(0.5641895835477563, rel=1e-14)


def test_gamma_pole():
    with pytest.raises(DomainError):
        gamma(-1.0)


def test_gen_binomial_examples():
    assert gen_binomial(0.7, 0) == 1
    assert gen_binomial(0.5, 2) == -0.125
    assert gen_binomial(3, 5) == 0


def test_classify():
    assert classify_order(0.5) == "positive non-integer"
    assert classify_order(-0.5) == "negative non-integer"
    assert classify_order(2.0) == "nonnegative integer"
    assert classify_order(-1 + 1e-13) == "negative integer"


@given(st.floats(0.1, 10).filter(lambda v: abs(v - round(v)) > 1e-9 or v >= 1))
def test_reflection_consistency(v):
    assert recip_gamma(v) * math.gamma(v) == pytest.approx(1, abs=1e-12)


@given(st.floats(-6.9, 30).filter(lambda v: abs(v - round(v)) > 1e-6))
def test_gamma_against_scipy(v):
    assert gamma(v) == pytest.approx(sp.gamma(v), rel=1e-12)


@given(st.floats(-5, 5), st.integers(1, 25))
def test_pascal_recurrence(p, k):
    lhs = gen_binomial(p, k)
    rhs = gen_binomial(p, k - 1) * (p - k + 1) / k
    assert lhs == pytest.approx(rhs, rel=1e-13, abs=1e-300)


@given(st.floats(-5, 5).filter(lambda v: abs(v - round(v)) > 1e-6), st.integers(0, 20))
def test_binomial_against_gamma_ratio(p, k):
    expected = sp.gamma(p + 1) / (sp.gamma(k + 1) * sp.gamma(p - k + 1))
    assert gen_binomial(p, k) == pytest.approx(expected, rel=1e-10, abs=1e-12)


def test_array_inputs():
    import numpy as np

    xs = np.array([0.5, 1.0, 0.0, -1.0, 2.5])
    assert recip_gamma(xs) == pytest.approx(sp.rgamma(xs), rel=1e-13)
