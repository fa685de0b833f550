from fractions import Fraction

import pytest

from cfrisk.errors import ConstraintViolated, MissingParam, ValidationError
from cfrisk.losses import builtin_decomposition, builtin_example


def test_classification_values():
    loss = builtin_example("classification", dict(l0=1, lt1="1/2", c0=0, c1="1/10"))
    # decision 0 pays l0 when the untreated outcome is 0; decision 1 pays lt1 when it was 1
    assert loss(0, (0, 1)) == 1
    assert loss(0, (1, 0)) == 0
    assert loss(1, (1, 0)) == Fraction(1, 2) + Fraction(1, 10)
    assert loss(1, (0, 1)) == Fraction(1, 10)


def test_classification_general_values():
    loss = builtin_example("classification-general", dict(l0=1, l1=0, lt0=0, lt1="1/2", c0=0, c1="1/10"))
    assert loss(1, (1, 1)) == Fraction(1, 2) + Fraction(1, 10)
    assert loss(1, (0, 1)) == Fraction(1, 10)
    assert loss(0, (0, 1)) == 1 + Fraction(1, 2)


def test_asymmetric_values_by_principal_stratum():
    p = dict(lR0=5, lR1=1, lH0=7, lH1=2, l0=3, l1=0, c0=0, c1="1/2")
    loss = builtin_example("asymmetric", p)
    assert loss(0, (0, 1)) == 5 and loss(1, (0, 1)) == Fraction(3, 2)        # responder
    assert loss(0, (1, 0)) == 2 and loss(1, (1, 0)) == Fraction(15, 2)        # harmed
    assert loss(0, (0, 0)) == 3 and loss(1, (1, 1)) == Fraction(1, 2)         # never / always


def test_trichotomous_values():
    loss = builtin_example("trichotomous", dict(l0=1, l1=0, c0=0, c1="1/10", c2="3/10", r0="1/2", r1="1/4"))
    assert loss(2, (1, 1, 1)) == Fraction(3, 10) + Fraction(1, 2) + Fraction(1, 4)
    assert loss(1, (1, 0, 0)) == 1 + Fraction(1, 10) + Fraction(1, 2)
    assert loss(0, (0, 1, 1)) == 1


def test_missing_and_unknown_params():
    with pytest.raises(MissingParam):
        builtin_example("classification", dict(l0=1))
    with pytest.raises(ValidationError):
        builtin_example("classification", dict(l0=1, lt1=1, c0=0, c1=0, zz=1))
    with pytest.raises(ValidationError):
        builtin_example("nope", {})


def test_asymmetric_ordering_enforced():
    with pytest.raises(ConstraintViolated):
        builtin_example("asymmetric", dict(lR0=0, lR1=1, lH0=3, lH1=0, l0=0, l1=0, c0=0, c1=0))


def test_asymmetric_closed_form_needs_equal_gaps():
    with pytest.raises(ConstraintViolated):
        builtin_decomposition("asymmetric", dict(lR0=1, lR1=0, lH0=3, lH1=0, l0=0, l1=0, c0=0, c1=0))


def test_strata_are_copied():
    loss = builtin_example("classification", dict(l0=1, lt1=1, c0=0, c1=0), strata=("a", "b"))
    assert loss.values["a"] == loss.values["b"]
