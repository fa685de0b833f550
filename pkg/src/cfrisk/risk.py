"""True and identified counterfactual risk, the binary-outcome accuracy and
difficulty decomposition, and policy optimization over per-stratum rules."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .additivity import AdditiveDecomposition
from .distributions import JointModel, ObservableView, View, marginalize, observed_conditionals, system_from_conditional
from .documents import format_value
from .errors import DimensionMismatch, NeedExtendedView, OutcomeNotBinary, SearchSpaceTooLarge, ValidationError
from .spaces import LossTensor, Spaces

POLICY_GUARD = {2: 12, 3: 7}


def _same_shape(a: Spaces, b: Spaces, what: str) -> None:
    if (a.K, a.M, a.strata) != (b.K, b.M, b.strata):
        raise DimensionMismatch(f"{what}: spaces K={a.K}, M={a.M}, strata={list(a.strata)} do not match "
                                f"K={b.K}, M={b.M}, strata={list(b.strata)}")


@dataclass(frozen=True)
class RiskReport:
    """Risk per stratum and in total.

    ``identified_part`` and ``constant_part`` are filled when the report comes
    from an additive decomposition. A constant part of ``None`` means it is not
    identified by the view used; ``total`` and ``conditional`` are then
    ``None`` too, and only differences are meaningful.
    """

    spaces: Spaces
    conditional: Mapping[str, object]
    total: object
    identified_part: Optional[Mapping[str, object]] = None
    constant_part: Optional[Mapping[str, object]] = None
    exact: bool = True
    stratum_weights: Mapping[str, object] = field(default_factory=dict)

    @property
    def identified_total(self):
        if self.identified_part is None:
            return self.total
        return sum(self.stratum_weights[x] * self.identified_part[x] for x in self.spaces.strata)

    @property
    def constant_total(self):
        if self.constant_part is None or any(v is None for v in self.constant_part.values()):
            return None
        return sum(self.stratum_weights[x] * self.constant_part[x] for x in self.spaces.strata)

    def to_document(self) -> dict:
        def fmt(m):
            return None if m is None else {x: format_value(v) for x, v in m.items()}
        return {
            "total": format_value(self.total),
            "conditional": fmt(self.conditional),
            "identified_part": fmt(self.identified_part),
            "identified_total": format_value(self.identified_total),
            "constant_part": fmt(self.constant_part),
            "constant_total": format_value(self.constant_total),
            "exact": self.exact,
        }


def true_risk(loss: LossTensor, model: JointModel) -> RiskReport:
    """Expected loss under the full joint law; needs unobservable quantities,
    so it serves as ground truth."""
    _same_shape(loss.spaces, model.spaces, "true_risk")
    sp = loss.spaces
    cond = {}
    for x in sp.strata:
        cond[x] = sum((l * p for l, p in zip(loss.values[x], model.p[x]) if p), Fraction(0) if model.exact else 0.0)
    total = sum(model.stratum_weights[x] * cond[x] for x in sp.strata)
    return RiskReport(sp, cond, total, stratum_weights=dict(model.stratum_weights))


def _identified_part(decomp: AdditiveDecomposition, view: ObservableView, x: str):
    sp = decomp.spaces
    total = 0
    for d in range(sp.K):
        for k in range(sp.K):
            for y in range(sp.M):
                q = view.joint(d, k, y, x)
                if q:
                    total += decomp.weight(k, d, y, x) * q
    return total


def _constant_part(decomp: AdditiveDecomposition, view: ObservableView, x: str):
    sp = decomp.spaces
    return sum(decomp.intercept_at(y, x) * view.outcome_joint(y, x) for y in sp.y_vectors
               if decomp.intercept_at(y, x))


def identified_risk(decomp: AdditiveDecomposition, view: ObservableView,
                    allow_unknown_constant: bool = False) -> RiskReport:
    """Risk from the additive weights and observable marginals.

    The intercept term needs the joint law of the potential outcomes. With the
    marginals-only view and a nonzero intercept this raises
    :class:`NeedExtendedView`, unless ``allow_unknown_constant`` is set, in
    which case the constant is reported as unknown (``None``).
    """
    _same_shape(decomp.spaces, view.spaces, "identified_risk")
    sp = decomp.spaces
    exact = not decomp.has_intercept
    ident = {x: _identified_part(decomp, view, x) for x in sp.strata}
    if exact:
        const = {x: 0 for x in sp.strata}
    elif view.variant is View.EXTENDED:
        const = {x: _constant_part(decomp, view, x) for x in sp.strata}
    elif allow_unknown_constant:
        const = {x: None for x in sp.strata}
    else:
        raise NeedExtendedView("the loss has a nonzero intercept; its risk level needs the extended view "
                               "(or request difference-only semantics)")
    if any(v is None for v in const.values()):
        cond, total = {x: None for x in sp.strata}, None
    else:
        cond = {x: ident[x] + const[x] for x in sp.strata}
        total = sum(view.stratum_weights[x] * cond[x] for x in sp.strata)
    return RiskReport(sp, cond, total, ident, const, exact, dict(view.stratum_weights))


def observable_from_model(model: JointModel, variant: Union[str, View] = View.MARGINALS_ONLY) -> ObservableView:
    """Marginals of a model. In exact mode this also checks that the
    conditionals of the observed tuple given ``D = k`` agree with the
    potential-outcome marginals, which holds under consistency and
    unconfoundedness."""
    view = marginalize(model, variant)
    if model.exact:
        observed = observed_conditionals(model)
        if observed.q != {x: q[: model.spaces.L_a] for x, q in view.q.items()}:
            raise AssertionError("observed conditionals disagree with potential-outcome marginals")
    return view


@dataclass(frozen=True)
class RiskDifference:
    spaces: Spaces
    conditional: Mapping[str, object]
    total: object

    def to_document(self) -> dict:
        return {"total": format_value(self.total),
                "conditional": {x: format_value(v) for x, v in self.conditional.items()}}


def identified_difference(decomp: AdditiveDecomposition, first: ObservableView,
                          second: ObservableView) -> RiskDifference:
    """Risk of the first system minus the second, from identified parts only.

    Both views must share the potential-outcome law and the stratum weights;
    the intercept contribution then cancels. Only the single-outcome
    marginals can be checked in the marginals-only view.
    """
    sp = decomp.spaces
    for v in (first, second):
        _same_shape(sp, v.spaces, "identified_difference")
    if dict(first.stratum_weights) != dict(second.stratum_weights):
        raise ValidationError("the two systems have different stratum weights")
    for x in sp.strata:
        for k in range(sp.K):
            for y in range(sp.M):
                if first.potential_marginal(k, y, x) != second.potential_marginal(k, y, x):
                    raise ValidationError(f"stratum {x!r}: the systems do not share Pr(Y({k}) = {y})")
        if first.variant is View.EXTENDED and second.variant is View.EXTENDED:
            for y in sp.y_vectors:
                if first.outcome_joint(y, x) != second.outcome_joint(y, x):
                    raise ValidationError(f"stratum {x!r}: the systems do not share the potential-outcome law")
    cond = {x: _identified_part(decomp, first, x) - _identified_part(decomp, second, x) for x in sp.strata}
    total = sum(first.stratum_weights[x] * cond[x] for x in sp.strata)
    return RiskDifference(sp, cond, total)


# --- binary outcomes --------------------------------------------------------

@dataclass(frozen=True)
class BinaryDecomposition:
    """Accuracy/difficulty split of the risk for binary outcomes.

    ``zeta[(k, d, x)] = w_k(d, 1, x) - w_k(d, 0, x)`` and
    ``xi[(d, x)] = sum_k w_k(d, 0, x)``. The accuracy term is
    ``Pr(D* = d, Y(d) = 1 | x)``, the difficulty terms are
    ``Pr(D* = d, Y(k) = 1 | x)`` for ``k != d`` and the baseline is
    ``Pr(D* = d | x)``.
    """

    spaces: Spaces
    zeta: Mapping[Tuple[int, int, str], Fraction]
    xi: Mapping[Tuple[int, str], Fraction]
    accuracy: Mapping[Tuple[int, str], object]
    difficulty: Mapping[Tuple[int, int, str], object]
    baseline: Mapping[Tuple[int, str], object]
    constant: Mapping[str, object]

    def accuracy_term(self, x: str):
        return sum(self.zeta[(d, d, x)] * self.accuracy[(d, x)] for d in range(self.spaces.K))

    def difficulty_term(self, x: str):
        K = self.spaces.K
        return sum(self.zeta[(k, d, x)] * self.difficulty[(d, k, x)] for d in range(K) for k in range(K) if k != d)

    def baseline_term(self, x: str):
        return sum(self.xi[(d, x)] * self.baseline[(d, x)] for d in range(self.spaces.K))

    def reassemble(self, x: str):
        c = self.constant[x]
        if c is None:
            return None
        return self.accuracy_term(x) + self.difficulty_term(x) + self.baseline_term(x) + c

    def to_table(self) -> str:
        lines = [f"{'stratum':<12}{'accuracy':>14}{'difficulty':>14}{'baseline':>14}{'constant':>14}{'risk':>14}"]
        for x in self.spaces.strata:
            vals = [self.accuracy_term(x), self.difficulty_term(x), self.baseline_term(x), self.constant[x],
                    self.reassemble(x)]
            lines.append(f"{x:<12}" + "".join(f"{str(format_value(v)):>14}" for v in vals))
        return "\n".join(lines) + "\n"


def binary_decomposition(decomp: AdditiveDecomposition, view: ObservableView) -> BinaryDecomposition:
    sp = decomp.spaces
    _same_shape(sp, view.spaces, "binary_decomposition")
    if sp.M != 2:
        raise OutcomeNotBinary(f"accuracy/difficulty split needs M = 2, got M = {sp.M}")
    K = sp.K
    zeta, xi, acc, diff, base, const = {}, {}, {}, {}, {}, {}
    for x in sp.strata:
        for d in range(K):
            for k in range(K):
                zeta[(k, d, x)] = decomp.weight(k, d, 1, x) - decomp.weight(k, d, 0, x)
            xi[(d, x)] = sum(decomp.weight(k, d, 0, x) for k in range(K))
            acc[(d, x)] = view.joint(d, d, 1, x)
            for k in range(K):
                if k != d:
                    diff[(d, k, x)] = view.joint(d, k, 1, x)
            base[(d, x)] = view.decision_prob(d, x)
        if not decomp.has_intercept:
            const[x] = 0
        elif view.variant is View.EXTENDED:
            const[x] = _constant_part(decomp, view, x)
        else:
            const[x] = None
    return BinaryDecomposition(sp, zeta, xi, acc, diff, base, const)


def check_weight_ordering(decomp: AdditiveDecomposition) -> Dict[Tuple[int, str], bool]:
    """Per ``(d, x)``: does ``w_d(d,1) <= w_k(d,0) <= 0 <= w_k(d,1) <= w_d(d,0)``
    hold for every ``k != d``? Under this ordering risk falls with accuracy
    and rises with difficulty."""
    sp = decomp.spaces
    if sp.M != 2:
        raise OutcomeNotBinary(f"the weight ordering is defined for M = 2, got M = {sp.M}")
    report = {}
    for x in sp.strata:
        for d in range(sp.K):
            own1, own0 = decomp.weight(d, d, 1, x), decomp.weight(d, d, 0, x)
            report[(d, x)] = all(
                own1 <= decomp.weight(k, d, 0, x) <= 0 <= decomp.weight(k, d, 1, x) <= own0
                for k in range(sp.K) if k != d
            )
    return report


# --- policies ---------------------------------------------------------------

@dataclass(frozen=True)
class Policy:
    """Per-stratum decision rule. ``rule`` maps a stratum to a decision
    (deterministic) or to a probability vector over decisions (stochastic)."""

    spaces: Spaces
    rule: Mapping[str, Union[int, Tuple]]
    stochastic: bool = False

    def __post_init__(self):
        sp = self.spaces
        if set(self.rule) != set(sp.strata):
            raise DimensionMismatch("policy must assign every stratum")
        if self.stochastic:
            for x, probs in self.rule.items():
                probs = tuple(probs)
                if len(probs) != sp.K or any(p < 0 for p in probs) or sum(probs) != 1:
                    raise ValidationError(f"stratum {x!r}: stochastic policy row must be a distribution over {sp.K}")
        else:
            for x, d in self.rule.items():
                if not 0 <= int(d) < sp.K:
                    raise ValidationError(f"stratum {x!r}: decision {d} out of range")

    @classmethod
    def constant(cls, spaces: Spaces, d: int) -> "Policy":
        return cls(spaces, {x: d for x in spaces.strata})

    def probs(self, x: str) -> Tuple:
        if self.stochastic:
            return tuple(self.rule[x])
        return tuple(Fraction(int(k == self.rule[x])) for k in range(self.spaces.K))

    def to_document(self) -> dict:
        if self.stochastic:
            return {"kind": "stochastic", "rule": {x: [format_value(p) for p in v] for x, v in self.rule.items()}}
        return {"kind": "deterministic", "rule": dict(self.rule)}


def embed_policy(policy: Policy, outcome_law: Mapping[str, Sequence], **kwargs) -> JointModel:
    """Joint law of a policy that ignores the potential outcomes:
    ``p(d, y | x) = pi(d | x) * r(y | x)``."""
    return system_from_conditional(outcome_law, lambda y, x: policy.probs(x), policy.spaces, **kwargs)


def potential_marginals(view: ObservableView) -> Dict[str, List[List[object]]]:
    """``Pr(Y(k) = y | x)`` as ``{x: [[...y...] for k]}``."""
    sp = view.spaces
    return {x: [[view.potential_marginal(k, y, x) for y in range(sp.M)] for k in range(sp.K)] for x in sp.strata}


def policy_scores(decomp: AdditiveDecomposition, marginals: Mapping[str, Sequence[Sequence]]) -> Dict[Tuple[str, int], object]:
    """Identified risk of always choosing ``d`` in stratum ``x``."""
    sp = decomp.spaces
    scores = {}
    for x in sp.strata:
        for d in range(sp.K):
            scores[(x, d)] = sum(decomp.weight(k, d, y, x) * marginals[x][k][y]
                                 for k in range(sp.K) for y in range(sp.M))
    return scores


def optimize_policy(decomp: AdditiveDecomposition, marginals: Union[ObservableView, Mapping],
                    stratum_weights: Optional[Mapping[str, object]] = None) -> Tuple[Policy, RiskReport]:
    """Best deterministic per-stratum rule by the identified part of the risk.

    All ``K ** |X|`` rules are enumerated; the intercept term is the same for
    every rule and is left out. Ties go to the rule that is lexicographically
    smallest, i.e. the smallest decision index in each stratum.
    """
    sp = decomp.spaces
    limit = POLICY_GUARD.get(sp.K, 0)
    if len(sp.strata) > limit:
        raise SearchSpaceTooLarge(f"{sp.K}^{len(sp.strata)} rules exceeds the enumeration guard "
                                  f"(at most {limit} strata for K = {sp.K})")
    if isinstance(marginals, ObservableView):
        _same_shape(sp, marginals.spaces, "optimize_policy")
        stratum_weights = marginals.stratum_weights if stratum_weights is None else stratum_weights
        marginals = potential_marginals(marginals)
    if stratum_weights is None:
        stratum_weights = {x: Fraction(1, len(sp.strata)) for x in sp.strata}
    scores = policy_scores(decomp, marginals)
    best, best_value = None, None
    for rule in itertools.product(range(sp.K), repeat=len(sp.strata)):
        value = sum(stratum_weights[x] * scores[(x, d)] for x, d in zip(sp.strata, rule))
        if best_value is None or value < best_value:
            best, best_value = rule, value
    policy = Policy(sp, dict(zip(sp.strata, best)))
    ident = {x: scores[(x, d)] for x, d in zip(sp.strata, best)}
    exact = not decomp.has_intercept
    const = {x: 0 if exact else None for x in sp.strata}
    cond = dict(ident) if exact else {x: None for x in sp.strata}
    report = RiskReport(sp, cond, best_value if exact else None, ident, const, exact, dict(stratum_weights))
    return policy, report
