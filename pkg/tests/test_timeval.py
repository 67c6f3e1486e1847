import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from resfed.timeval import (
    INF,
    SQRT2_GAMMA,
    Surd,
    as_time,
    ceil_div,
    is_inf,
    precision_from_env,
    time_from_json,
    time_to_json,
    utilization,
)


def test_as_time_accepts_exact_inputs():
    assert as_time(3) == 3
    assert as_time("15/2") == Fraction(15, 2)
    assert as_time(Fraction(1, 3)) == Fraction(1, 3)
    assert as_time("inf") is INF


def test_as_time_refuses_floats():
    with pytest.raises(TypeError):
        as_time(7.5)


def test_infinity_compares_above_everything():
    assert INF > Fraction(10**9)
    assert Fraction(3) < INF
    assert is_inf(INF) and not is_inf(Fraction(1))
    assert float(INF) == math.inf


def test_infinite_period_gives_one_job_and_zero_utilization():
    assert ceil_div(Fraction(100), INF) == 1
    assert ceil_div(Fraction(0), INF) == 0
    assert utilization(Fraction(10), INF) == 0
    assert ceil_div(Fraction(9), Fraction(4)) == 3
    assert ceil_div(Fraction(8), Fraction(4)) == 2


@given(st.fractions(min_value=0, max_value=10**6))
def test_time_json_round_trip(x):
    assert time_from_json(time_to_json(x)) == x


def test_time_json_shapes():
    assert time_to_json(Fraction(15, 2)) == {"num": 15, "den": 2}
    assert time_to_json(INF) == "inf"
    assert time_from_json("inf") is INF
    assert time_from_json(4) == 4
    with pytest.raises(ValueError, match=r"\$\.x"):
        time_from_json({"num": 1}, "$.x")


@pytest.mark.parametrize("text, expected", [
    ("2", Surd(2)),
    ("3/2", Surd(Fraction(3, 2))),
    ("1.5", Surd(Fraction(3, 2))),
    ("1+sqrt(2)", Surd(1, 1, 2)),
    ("1+sqrt2", Surd(1, 1, 2)),
    ("2*sqrt(3)", Surd(0, 2, 3)),
])
def test_surd_parse(text, expected):
    assert Surd.parse(text) == expected


def test_surd_perfect_square_is_rational():
    assert Surd(1, 1, 4) == Surd(3)
    assert Surd(1, 1, 4).is_rational


def test_surd_floor_ceil():
    assert math.floor(SQRT2_GAMMA) == 2
    assert math.ceil(SQRT2_GAMMA) == 3
    assert math.ceil(Surd(3)) == 3
    # ceil(8 / (2*sqrt(2))) = ceil(2.83) = 3
    assert math.ceil(Fraction(8) / (Surd(0, 2, 2))) == 3


def test_surd_arithmetic_identities():
    g = SQRT2_GAMMA
    assert (g - 1) * (g - 1) == 2
    assert g * (g - 2) == 1  # so 1/(g-2) = g
    assert (g - 1).reciprocal() * (g - 1) == 1
    assert 1 + (g - 1).reciprocal() == Surd(1, Fraction(1, 2), 2)


@given(st.fractions(min_value=-50, max_value=50, max_denominator=50),
       st.fractions(min_value=-50, max_value=50, max_denominator=50),
       st.sampled_from([2, 3, 5, 7]))
def test_surd_sign_matches_float(a, b, r):
    s = Surd(a, b, r)
    value = float(a) + float(b) * math.sqrt(r)
    if abs(value) > 1e-9:
        assert s.sign() == (1 if value > 0 else -1)


@given(st.fractions(min_value=-20, max_value=20, max_denominator=30),
       st.fractions(min_value=-20, max_value=20, max_denominator=30),
       st.fractions(min_value=-20, max_value=20, max_denominator=30))
def test_surd_compares_against_rationals(a, b, q):
    s = Surd(a, b, 2)
    value = float(a) + float(b) * math.sqrt(2)
    if abs(value - float(q)) > 1e-9:
        assert (s < q) == (value < float(q))
        assert (s > q) == (value > float(q))


@pytest.mark.parametrize("precision", [10, 1000, 10**6])
def test_rational_bounds_bracket_the_surd(precision):
    lo, hi = SQRT2_GAMMA.lower_bound(precision), SQRT2_GAMMA.upper_bound(precision)
    assert lo <= SQRT2_GAMMA <= hi
    assert hi - lo <= Fraction(2, precision)
    assert hi.denominator <= precision


def test_precision_env(monkeypatch):
    monkeypatch.delenv("RESFED_PRECISION", raising=False)
    assert precision_from_env() == 10**6
    monkeypatch.setenv("RESFED_PRECISION", "100")
    assert precision_from_env() == 100
    assert SQRT2_GAMMA.upper_bound().denominator <= 100
    monkeypatch.setenv("RESFED_PRECISION", "zero")
    with pytest.raises(ValueError):
        precision_from_env()


def test_surd_json_round_trip():
    obj = SQRT2_GAMMA.to_json()
    assert obj["expr"] == "1+sqrt(2)"
    assert Surd.from_json(obj) == SQRT2_GAMMA
    assert Surd.from_json(Surd(Fraction(3, 2)).to_json()) == Fraction(3, 2)
