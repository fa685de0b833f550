"""Brute-force identifiability checks.

The risk is linear in the joint law, so its range over all joints that share
the observable marginals (the fiber) is attained at vertices of a small
polytope. Vertices are enumerated exactly: the affine solution set of the
equality constraints is written as ``x0 + V t`` and every choice of
``dim t`` coordinates forced to zero is solved over the rationals.
"""
from __future__ import annotations

import itertools
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, List, Optional, Sequence, Tuple, Union

from .additivity import Regime, classify
from .distributions import (
    JointModel,
    ObservableView,
    View,
    kernel_basis,
    marginal_matrix,
    marginalize,
    random_model,
)
from .errors import InfeasibleMarginals, TooLarge, ValidationError
from .linalg import dot, solve_affine, solve_square
from .risk import Policy, embed_policy
from .spaces import LossTensor, Spaces

MAX_VARIABLES = 40
MAX_SUBSETS = 200_000


def _exact_vector(values, what: str) -> List[Fraction]:
    out = []
    for v in values:
        if isinstance(v, float) or isinstance(v, bool):
            raise ValidationError(f"{what}: the oracle needs exact rational inputs")
        out.append(Fraction(v))
    return out


def enumerate_vertices(rows: Sequence[Sequence], rhs: Sequence, max_subsets: int = MAX_SUBSETS) -> Iterator[List[Fraction]]:
    """Vertices of ``{x >= 0 : rows x = rhs}`` (possibly repeated when
    degenerate). Raises :class:`InfeasibleMarginals` if the equality system is
    inconsistent and :class:`TooLarge` past the subset guard."""
    sol = solve_affine(rows, rhs)
    if sol is None:
        raise InfeasibleMarginals("the marginal constraints are inconsistent")
    x0, basis = sol
    n, r = len(x0), len(basis)
    if r == 0:
        if all(v >= 0 for v in x0):
            yield x0
        return
    count = math.comb(n, r)
    if count > max_subsets:
        raise TooLarge(f"{count} candidate vertices exceed the enumeration guard of {max_subsets}")
    cols = [[basis[j][i] for j in range(r)] for i in range(n)]
    for subset in itertools.combinations(range(n), r):
        t = solve_square([cols[i] for i in subset], [-x0[i] for i in subset])
        if t is None:
            continue
        x = [x0[i] + dot(cols[i], t) for i in range(n)]
        if all(v >= 0 for v in x):
            yield x


@dataclass(frozen=True)
class RiskInterval:
    min: Fraction
    max: Fraction
    argmin: Tuple[Fraction, ...]
    argmax: Tuple[Fraction, ...]

    @property
    def width(self) -> Fraction:
        return self.max - self.min

    @property
    def identifiable(self) -> bool:
        return self.max == self.min


def optimize_linear(objective: Sequence, rows: Sequence[Sequence], rhs: Sequence,
                    max_subsets: int = MAX_SUBSETS) -> RiskInterval:
    best_lo = best_hi = None
    arg_lo = arg_hi = None
    for x in enumerate_vertices(rows, rhs, max_subsets):
        value = dot(objective, x)
        if best_lo is None or value < best_lo:
            best_lo, arg_lo = value, x
        if best_hi is None or value > best_hi:
            best_hi, arg_hi = value, x
    if best_lo is None:
        raise InfeasibleMarginals("no nonnegative solution: the marginals are not attainable by any joint law")
    return RiskInterval(best_lo, best_hi, tuple(arg_lo), tuple(arg_hi))


@dataclass(frozen=True)
class FiberProblem:
    """Loss vector, marginal matrix rows (with the all-ones row appended) and
    target marginals for one stratum."""

    spaces: Spaces
    loss: Tuple[Fraction, ...]
    rows: Tuple[Tuple[int, ...], ...]
    q: Tuple[Fraction, ...]
    variant: View = View.MARGINALS_ONLY

    @classmethod
    def from_view(cls, loss: LossTensor, view: ObservableView, x: Optional[str] = None) -> "FiberProblem":
        sp = loss.spaces
        x = sp.strata[0] if x is None else x
        rows = marginal_matrix(sp, view.variant).rows + (tuple([1] * sp.N),)
        q = tuple(_exact_vector(view.q[x], "marginals")) + (Fraction(1),)
        return cls(sp, tuple(loss.values[x]), rows, q, view.variant)


def risk_bounds(problem: FiberProblem) -> RiskInterval:
    """Exact minimum and maximum of the risk over the fiber."""
    if problem.spaces.N > MAX_VARIABLES:
        raise TooLarge(f"N = {problem.spaces.N} joint cells exceed the enumeration guard of {MAX_VARIABLES}")
    return optimize_linear(problem.loss, problem.rows, problem.q)


def perturbation_pair(loss: Sequence, p: Sequence, basis: Sequence[Sequence]):
    """Two joints with the same marginals and different risk, or ``None``.

    Takes the first kernel direction ``v`` with ``loss . v != 0`` and returns
    ``(p, p + alpha v, alpha * loss . v)`` with ``alpha`` half of
    ``min p / max |v|``, which keeps the second joint in the simplex when
    ``p`` is interior.
    """
    for v in basis:
        slope = dot(loss, v)
        if slope != 0:
            alpha = min(p) / max(abs(a) for a in v) / 2
            q = [a + alpha * b for a, b in zip(p, v)]
            return tuple(p), tuple(q), alpha * slope
    return None


@dataclass(frozen=True)
class Counterexample:
    stratum: str
    q: Tuple[Fraction, ...]
    p1: Tuple[Fraction, ...]
    p2: Tuple[Fraction, ...]
    gap: Fraction


@dataclass(frozen=True)
class IdentifiabilityReport:
    variant: View
    trials: int
    identifiable: bool
    max_width: Fraction
    regime: Regime
    agreement: bool
    counterexample: Optional[Counterexample] = None
    widths: Tuple[Fraction, ...] = field(default=(), repr=False)

    @property
    def verdict(self) -> str:
        return "EMPIRICALLY-IDENTIFIABLE" if self.identifiable else "NON-IDENTIFIABLE"


def _trial_widths(args) -> List[Tuple[Fraction, Optional[Counterexample]]]:
    loss, variant, seed, trial = args
    sp = loss.spaces
    rng = random.Random(f"{seed}:{trial}")
    model = random_model(sp, rng)
    systems = [model]
    for d in range(sp.K):
        systems.append(embed_policy(Policy.constant(sp, d), {x: model.outcome_law(x) for x in sp.strata}))
    out = []
    for system in systems:
        view = marginalize(system, variant)
        for x in sp.strata:
            interval = risk_bounds(FiberProblem.from_view(loss, view, x))
            cex = None
            if not interval.identifiable:
                cex = Counterexample(x, FiberProblem.from_view(loss, view, x).q[:-1],
                                     interval.argmin, interval.argmax, interval.width)
            out.append((interval.width, cex))
    return out


def _expected_identifiable(regime: Regime, variant: View) -> bool:
    if variant is View.MARGINALS_ONLY:
        return regime is Regime.EXACT
    return regime in (Regime.EXACT, Regime.CONSTANT_ONLY)


def certify_identifiability(loss: LossTensor, variant: Union[str, View] = View.MARGINALS_ONLY,
                            trials: int = 50, seed: int = 0, jobs: int = 1) -> IdentifiabilityReport:
    """Fiber widths of the risk level on random interior joints and on the
    constant-policy embeddings of their potential-outcome laws, compared with
    :func:`classify`.

    The level is identifiable from the marginals-only view exactly for losses
    in the restricted image, and from the extended view for every additive
    loss.
    """
    variant = View.parse(variant)
    if loss.spaces.N > MAX_VARIABLES:
        raise TooLarge(f"N = {loss.spaces.N} joint cells exceed the enumeration guard of {MAX_VARIABLES}")
    tasks = [(loss, variant, seed, t) for t in range(trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_trial_widths, tasks))
    else:
        results = [_trial_widths(t) for t in tasks]
    widths, cex = [], None
    for batch in results:
        for w, c in batch:
            widths.append(w)
            if cex is None and c is not None:
                cex = c
    identifiable = all(w == 0 for w in widths)
    regime = classify(loss).regime
    return IdentifiabilityReport(variant, trials, identifiable, max(widths, default=Fraction(0)), regime,
                                 identifiable == _expected_identifiable(regime, variant), cex, tuple(widths))


def outcome_block(spaces: Spaces) -> Tuple[Tuple[int, ...], ...]:
    """Rows mapping a joint to its potential-outcome law."""
    return tuple(tuple(int(yy == y) for _, yy in spaces.cells) for y in spaces.y_vectors)


def _system_difference(loss: LossTensor, first: JointModel, second: JointModel, variant: View,
                       x: str) -> RiskInterval:
    sp = loss.spaces
    N = sp.N
    if first.outcome_law(x) != second.outcome_law(x):
        raise ValidationError(f"stratum {x!r}: the two systems do not share the potential-outcome law")
    C = marginal_matrix(sp, variant).rows
    Y = outcome_block(sp)
    zeros = (0,) * N
    rows, rhs = [], []
    q1 = _exact_vector(marginalize(first, variant).q[x], "marginals")
    q2 = _exact_vector(marginalize(second, variant).q[x], "marginals")
    for row, a, b in zip(C, q1, q2):
        rows.append(tuple(row) + zeros)
        rhs.append(a)
        rows.append(zeros + tuple(row))
        rhs.append(b)
    for row in Y:
        rows.append(tuple(row) + tuple(-v for v in row))
        rhs.append(Fraction(0))
    rows.append((1,) * N + zeros)
    rhs.append(Fraction(1))
    rows.append(zeros + (1,) * N)
    rhs.append(Fraction(1))
    ell = loss.values[x]
    return optimize_linear(tuple(ell) + tuple(-v for v in ell), rows, rhs)


def _policy_difference(loss: LossTensor, first: Policy, second: Policy, outcome_law: Sequence,
                       variant: View, x: str) -> RiskInterval:
    sp = loss.spaces
    r = _exact_vector(outcome_law, "outcome law")
    p1, p2 = first.probs(x), second.probs(x)
    objective = [sum((p1[d] - p2[d]) * loss(d, y, x) for d in range(sp.K)) for y in sp.y_vectors]
    rows, rhs = [], []
    if variant is View.EXTENDED:
        for j in range(len(r)):
            rows.append(tuple(int(i == j) for i in range(len(r))))
            rhs.append(r[j])
    else:
        for k in range(sp.K):
            for v in range(sp.M):
                rows.append(tuple(int(y[k] == v) for y in sp.y_vectors))
                rhs.append(sum(r[j] for j, y in enumerate(sp.y_vectors) if y[k] == v))
    rows.append((1,) * len(r))
    rhs.append(Fraction(1))
    return optimize_linear(objective, rows, rhs)


def difference_bounds(loss: LossTensor, pair: Tuple, variant: Union[str, View] = View.MARGINALS_ONLY,
                      outcome_law: Optional[Sequence] = None, x: Optional[str] = None) -> RiskInterval:
    """Range of ``R(first) - R(second)`` over all joint laws that reproduce the
    observable marginals of both systems and share one potential-outcome law.

    ``pair`` holds two :class:`JointModel` systems (their decisions may depend
    on the potential outcomes), or two :class:`Policy` rules together with
    ``outcome_law``, the potential-outcome law in ``y_index`` order. The
    extended view also fixes that law.
    """
    variant = View.parse(variant)
    sp = loss.spaces
    x = sp.strata[0] if x is None else x
    if sp.N > MAX_VARIABLES:
        raise TooLarge(f"N = {sp.N} joint cells exceed the enumeration guard of {MAX_VARIABLES}")
    first, second = pair
    if isinstance(first, Policy) and isinstance(second, Policy):
        if outcome_law is None:
            raise ValidationError("a policy pair needs the potential-outcome law")
        return _policy_difference(loss, first, second, outcome_law, variant, x)
    if isinstance(first, JointModel) and isinstance(second, JointModel):
        return _system_difference(loss, first, second, variant, x)
    raise ValidationError("pair must hold two policies or two joint models")


def kernel_counterexample(loss: LossTensor, model: JointModel, variant: Union[str, View] = View.MARGINALS_ONLY,
                          x: Optional[str] = None):
    """Perturb an interior joint along the kernel of the marginal map; returns
    ``(p1, p2, gap)`` or ``None`` when the loss is orthogonal to the kernel."""
    sp = loss.spaces
    x = sp.strata[0] if x is None else x
    basis = kernel_basis(marginal_matrix(sp, variant))
    return perturbation_pair(loss.values[x], model.p[x], basis)
