"""When does an additive counterfactual loss behave like a standard loss?

For two decisions there is always a standard loss whose risk differs from the
counterfactual risk by a policy-independent amount. For three or more
decisions this holds only when every off-diagonal weight ``w_k(d, .)`` depends
on ``d`` through an additive constant; otherwise an explicit pair of
potential-outcome laws shows that no standard loss can work.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Tuple

from .additivity import AdditiveDecomposition
from .distributions import JointModel
from .documents import format_rational
from .errors import DecisionBinary, DecisionNotBinary
from .risk import Policy, embed_policy, true_risk
from .spaces import StandardLoss, standard_loss_to_document


def to_standard_loss(decomp: AdditiveDecomposition) -> StandardLoss:
    """``l(d, y, x) = w_d(d, y, x) - w_d(1 - d, y, x)``, with the free
    per-stratum constant set to zero."""
    sp = decomp.spaces
    if sp.K != 2:
        raise DecisionNotBinary(f"the two-decision reduction needs K = 2, got K = {sp.K}; "
                                "use standard_loss_exists")
    values = {x: [decomp.weight(d, d, y, x) - decomp.weight(d, 1 - d, y, x)
                  for d in range(2) for y in range(sp.M)] for x in sp.strata}
    return StandardLoss(sp, values)


def counterfactual_family(std: StandardLoss, lam) -> AdditiveDecomposition:
    """Additive losses with the same risk gaps as ``std``:
    ``w_d(d, y) = (1 + lam) l(d, y)`` and ``w_d(1 - d, y) = lam l(d, y)``."""
    sp = std.spaces
    if sp.K != 2:
        raise DecisionNotBinary(f"the family is defined for K = 2, got K = {sp.K}")
    lam = Fraction(lam)

    def weight(k, d, y, x):
        return (1 + lam) * std(d, y, x) if k == d else lam * std(k, y, x)

    return AdditiveDecomposition.from_functions(sp, weight)


@dataclass(frozen=True)
class NoStandardLossWitness:
    """Two potential-outcome point masses ``law_a`` and ``law_b`` that differ
    only in coordinate ``k``. The constant policies ``j`` and ``j_prime`` see
    the same realized outcomes under both laws, so every standard loss gives
    them the same gap under both; the counterfactual gaps differ."""

    stratum: str
    k: int
    j: int
    j_prime: int
    y: int
    y_prime: int
    law_a: Tuple[int, ...]
    law_b: Tuple[int, ...]
    gap_a: Fraction
    gap_b: Fraction

    def to_document(self) -> dict:
        return {
            "stratum": self.stratum, "k": self.k, "j": self.j, "j_prime": self.j_prime,
            "y": self.y, "y_prime": self.y_prime,
            "law_a": {"y": list(self.law_a), "prob": "1"},
            "law_b": {"y": list(self.law_b), "prob": "1"},
            "gap_a": format_rational(self.gap_a), "gap_b": format_rational(self.gap_b),
        }


@dataclass(frozen=True)
class EquivalenceCertificate:
    exists: bool
    standard_loss: Optional[StandardLoss] = None
    witness: Optional[NoStandardLossWitness] = None
    note: str = ("decision dependence is judged on w_k(d, .) - w_k(d', .) modulo constants, "
                 "which does not change across equivalent decompositions")


def _constant_policy_gap(decomp: AdditiveDecomposition, x: str, y_vec, j: int, j_prime: int) -> Fraction:
    """Counterfactual risk of always choosing ``j`` minus always ``j_prime``
    when the potential outcomes are the point mass ``y_vec``, computed from
    the reconstructed loss through :func:`true_risk`."""
    sp = decomp.spaces
    loss = decomp.reconstruct()
    law = {s: [Fraction(int(y == tuple(y_vec))) for y in sp.y_vectors] for s in sp.strata}
    risk = {}
    for d in (j, j_prime):
        model: JointModel = embed_policy(Policy.constant(sp, d), law)
        risk[d] = true_risk(loss, model).conditional[x]
    return risk[j] - risk[j_prime]


def _reference_decision(k: int) -> int:
    return 1 if k == 0 else 0


def standard_loss_exists(decomp: AdditiveDecomposition) -> EquivalenceCertificate:
    sp = decomp.spaces
    if sp.K == 2:
        raise DecisionBinary("with two decisions a standard loss always exists; use to_standard_loss")
    K, M = sp.K, sp.M
    for x in sp.strata:
        for k in range(K):
            others = [d for d in range(K) if d != k]
            for a, j in enumerate(others):
                for j_prime in others[a + 1:]:
                    diff = [decomp.weight(k, j, y, x) - decomp.weight(k, j_prime, y, x) for y in range(M)]
                    y_prime = next((t for t in range(1, M) if diff[t] != diff[0]), None)
                    if y_prime is None:
                        continue
                    law_a = (0,) * K
                    law_b = tuple(y_prime if i == k else 0 for i in range(K))
                    return EquivalenceCertificate(False, witness=NoStandardLossWitness(
                        x, k, j, j_prime, 0, y_prime, law_a, law_b,
                        _constant_policy_gap(decomp, x, law_a, j, j_prime),
                        _constant_policy_gap(decomp, x, law_b, j, j_prime)))

    def g(k, y, x):
        return decomp.weight(k, _reference_decision(k), y, x)

    def t(k, d, x):
        return decomp.weight(k, d, 0, x) - g(k, 0, x)

    values = {x: [decomp.weight(d, d, y, x) - g(d, y, x) + sum(t(k, d, x) for k in range(K) if k != d)
                  for d in range(K) for y in range(M)] for x in sp.strata}
    return EquivalenceCertificate(True, standard_loss=StandardLoss(sp, values))


def certificate_to_document(cert: EquivalenceCertificate) -> dict:
    if cert.exists:
        return {"kind": "StandardLossExists", "standard_loss": standard_loss_to_document(cert.standard_loss),
                "note": cert.note}
    return {"kind": "NoStandardLoss", "witness": cert.witness.to_document(), "note": cert.note}
