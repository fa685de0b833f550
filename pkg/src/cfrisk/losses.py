"""Built-in example losses from medical decision making.

Parameter names: ``l0``/``l1`` loss of a realized death/survival, ``lt0``/``lt1``
the counterfactual analogues, ``c0``..``c2`` decision costs, ``lR0``/``lR1`` and
``lH0``/``lH1`` losses within the responder and harmed strata, ``r0``/``r1``
overtreatment regret. All examples have binary outcomes and are constant
across strata.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .additivity import AdditiveDecomposition
from .documents import parse_rational
from .errors import ConstraintViolated, MissingParam, ValidationError
from .spaces import LossTensor, Spaces

REQUIRED = {
    "classification": ("l0", "lt1", "c0", "c1"),
    "classification-general": ("l0", "l1", "lt0", "lt1", "c0", "c1"),
    "asymmetric": ("lR0", "lR1", "lH0", "lH1", "l0", "l1", "c0", "c1"),
    "trichotomous": ("l0", "l1", "c0", "c1", "c2", "r0", "r1"),
}

DECISIONS = {"classification": 2, "classification-general": 2, "asymmetric": 2, "trichotomous": 3}


def _params(name: str, params: Mapping[str, object]) -> dict:
    if name not in REQUIRED:
        raise ValidationError(f"unknown example {name!r}; choose from {sorted(REQUIRED)}")
    unknown = set(params) - set(REQUIRED[name])
    if unknown:
        raise ValidationError(f"{name}: unknown parameter(s) {sorted(unknown)}")
    missing = [p for p in REQUIRED[name] if p not in params]
    if missing:
        raise MissingParam(f"{name}: missing parameter(s) {missing}")
    p = {k: parse_rational(v, k) for k, v in params.items()}
    if name == "asymmetric":
        if not p["lR0"] > p["lR1"] >= 0:
            raise ConstraintViolated("asymmetric: need lR0 > lR1 >= 0")
        if not p["lH0"] > p["lH1"] >= 0:
            raise ConstraintViolated("asymmetric: need lH0 > lH1 >= 0")
    return p


def example_spaces(name: str, strata: Sequence[str] = ("all",)) -> Spaces:
    return Spaces(DECISIONS[name], 2, tuple(strata))


def builtin_example(name: str, params: Mapping[str, object], strata: Sequence[str] = ("all",)) -> LossTensor:
    p = _params(name, params)
    sp = example_spaces(name, strata)
    c = [p.get(f"c{d}", Fraction(0)) for d in range(sp.K)]
    ell = (p.get("l0"), p.get("l1"))

    if name == "classification":
        def f(d, y, x):
            return (1 - d) * (1 - y[0]) * p["l0"] + d * y[0] * p["lt1"] + c[d]
    elif name == "classification-general":
        lt = (p["lt0"], p["lt1"])

        def f(d, y, x):
            return ell[y[d]] + lt[y[1 - d]] + c[d]
    elif name == "asymmetric":
        lR, lH = (p["lR0"], p["lR1"]), (p["lH0"], p["lH1"])

        def f(d, y, x):
            y0, y1 = y
            return ((1 - y0) * y1 * lR[d] + y0 * (1 - y1) * lH[1 - d]
                    + y0 * y1 * ell[1] + (1 - y0) * (1 - y1) * ell[0] + c[d])
    else:
        r = (p["r0"], p["r1"])

        def f(d, y, x):
            return ell[y[d]] + c[d] + sum((r[k] * y[k] for k in range(d)), Fraction(0))
    return LossTensor.from_function(sp, f)


def builtin_decomposition(name: str, params: Mapping[str, object],
                          strata: Sequence[str] = ("all",)) -> AdditiveDecomposition:
    """Closed-form additive weights for the built-in examples.

    ``asymmetric`` is additive only when the responder and harmed loss gaps
    coincide; otherwise :class:`ConstraintViolated` is raised.
    """
    p = _params(name, params)
    sp = example_spaces(name, strata)
    c = [p.get(f"c{d}", Fraction(0)) for d in range(sp.K)]
    ell = (p.get("l0"), p.get("l1"))
    intercept: Optional[callable] = None

    if name == "classification":
        def w(k, d, y, x):
            if k == 1:
                return 0
            return (1 - y) * p["l0"] + c[0] if d == 0 else y * p["lt1"] + c[1]
    elif name == "classification-general":
        lt = (p["lt0"], p["lt1"])

        def w(k, d, y, x):
            return ell[y] + c[d] if k == d else lt[y]
    elif name == "asymmetric":
        gap_r, gap_h = p["lR0"] - p["lR1"], p["lH0"] - p["lH1"]
        if gap_r != gap_h:
            raise ConstraintViolated("asymmetric loss is additive only when lR0 - lR1 == lH0 - lH1")
        excess = gap_r - (ell[0] - ell[1])

        def w(k, d, y, x):
            return ell[y] + c[d] if k == d else excess * y

        def intercept(y, x):
            y0, y1 = y
            return ((p["lH1"] - ell[1]) * y0 * (1 - y1) + (p["lR1"] - ell[1]) * (1 - y0) * y1
                    - excess * y0 * y1)
    else:
        r = (p["r0"], p["r1"])

        def w(k, d, y, x):
            if k == d:
                return ell[y] + c[d]
            return r[k] * y if k < d else 0
    return AdditiveDecomposition.from_functions(sp, w, intercept)
