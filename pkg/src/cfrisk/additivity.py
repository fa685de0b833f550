"""Additivity of counterfactual losses.

A loss is additive when ``l(d; y, x) = sum_k w_k(d, y_k, x) + v(y, x)``.
Stacking the loss values into a vector turns this into a linear system
``A w = l`` with a zero/one structure matrix ``A``; additivity is image
membership, decided exactly over the rationals.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .documents import (
    Source,
    check_keys,
    dumps,
    expect_int,
    format_rational,
    parse_rational,
    read_document,
)
from .errors import (
    BadDimensions,
    DimensionMismatch,
    DuplicateEntry,
    MissingEntry,
    RestrictionViolated,
    SchemaError,
)
from .linalg import ImageSolver, bareiss_rank
from .spaces import LossTensor, Spaces, YVec


class Variant(str, enum.Enum):
    RESTRICTED = "restricted"
    FULL = "full"

    @classmethod
    def parse(cls, value: Union[str, "Variant"]) -> "Variant":
        if isinstance(value, Variant):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise BadDimensions(f"unknown structure-matrix variant {value!r}") from None


def weight_label(k: int, d: int, y: int) -> str:
    return f"omega_{k}({d},{y})"


def intercept_label(y: Sequence[int]) -> str:
    return "varpi(" + ",".join(str(v) for v in y) + ")"


def loss_label(d: int, y: Sequence[int]) -> str:
    return f"l({d};" + ",".join(str(v) for v in y) + ")"


@dataclass(frozen=True)
class StructureMatrix:
    spaces: Spaces
    variant: Variant
    rows: Tuple[Tuple[int, ...], ...]
    row_labels: Tuple[str, ...]
    column_labels: Tuple[str, ...]

    @property
    def shape(self) -> Tuple[int, int]:
        return len(self.rows), len(self.column_labels)

    def rank(self) -> int:
        return bareiss_rank(self.rows)

    def published_layout(self) -> "StructureMatrix":
        """Reorder rows and columns into the layout used in the published
        K=M=2 display.

        Rows: ``d`` fastest, then ``y_0``, ..., ``y_{K-1}`` slowest.
        Columns: own-outcome weights ``w_d(d, y)`` by ``(d, y)``, then the
        remaining weights by ``(k, d, y)``, then intercepts in index order.
        """
        sp = self.spaces
        row_order = sorted(range(sp.N), key=lambda i: _published_row_key(sp, i))
        diag = [sp.weight_index(d, d, y) for d in range(sp.K) for y in range(sp.M)]
        off = [sp.weight_index(k, d, y) for k in range(sp.K) for d in range(sp.K) if d != k
               for y in range(sp.M)]
        cols = diag + off
        if self.variant is Variant.FULL:
            cols += [sp.n_weights + j for j in range(sp.n_outcome_vectors)]
        return StructureMatrix(
            sp,
            self.variant,
            tuple(tuple(self.rows[i][c] for c in cols) for i in row_order),
            tuple(self.row_labels[i] for i in row_order),
            tuple(self.column_labels[c] for c in cols),
        )

    def to_grid(self) -> str:
        return "\n".join(" ".join(str(v) for v in row) for row in self.rows) + "\n"


def _published_row_key(sp: Spaces, i: int):
    d, y = sp.cells[i]
    return tuple(reversed(y)) + (d,)


def build_structure_matrix(spaces: Spaces, variant: Union[str, Variant] = Variant.FULL) -> StructureMatrix:
    variant = Variant.parse(variant)
    K, M = spaces.K, spaces.M
    ncols = spaces.n_weights + (spaces.n_outcome_vectors if variant is Variant.FULL else 0)
    rows = []
    for d, y in spaces.cells:
        row = [0] * ncols
        for k in range(K):
            row[spaces.weight_index(k, d, y[k])] = 1
        if variant is Variant.FULL:
            row[spaces.n_weights + spaces.y_index(y)] = 1
        rows.append(tuple(row))
    col_labels = [weight_label(k, d, y) for k in range(K) for d in range(K) for y in range(M)]
    if variant is Variant.FULL:
        col_labels += [intercept_label(y) for y in spaces.y_vectors]
    return StructureMatrix(
        spaces,
        variant,
        tuple(rows),
        tuple(loss_label(d, y) for d, y in spaces.cells),
        tuple(col_labels),
    )


@lru_cache(maxsize=None)
def _solver(K: int, M: int, variant: Variant) -> ImageSolver:
    return ImageSolver(build_structure_matrix(Spaces(K, M), variant).rows)


def structure_solver(spaces: Spaces, variant: Union[str, Variant]) -> ImageSolver:
    return _solver(spaces.K, spaces.M, Variant.parse(variant))


@dataclass(frozen=True)
class AdditiveDecomposition:
    """Weights ``w_k(d, y, x)`` at ``spaces.weight_index(k, d, y)`` and
    intercepts ``v(y, x)`` at ``spaces.y_index(y)``, per stratum."""

    spaces: Spaces
    weights: Mapping[str, Tuple[Fraction, ...]]
    intercept: Mapping[str, Tuple[Fraction, ...]]
    free_params: Tuple[Tuple[str, str], ...] = ()
    free_directions: Tuple[Tuple[Fraction, ...], ...] = field(default=(), compare=False)

    def __post_init__(self):
        sp = self.spaces
        for name, vals, n in (("weights", self.weights, sp.n_weights),
                              ("intercept", self.intercept, sp.n_outcome_vectors)):
            if set(vals) != set(sp.strata):
                raise DimensionMismatch(f"{name}: strata do not match {list(sp.strata)}")
            frozen = {}
            for x in sp.strata:
                vec = tuple(Fraction(v) for v in vals[x])
                if len(vec) != n:
                    raise DimensionMismatch(f"{name}[{x!r}] has {len(vec)} values, expected {n}")
                frozen[x] = vec
            object.__setattr__(self, name, frozen)

    @classmethod
    def from_functions(cls, spaces: Spaces, weight, intercept=None) -> "AdditiveDecomposition":
        """Build from callables ``weight(k, d, y, x)`` and ``intercept(y, x)``."""
        K, M = spaces.K, spaces.M
        w = {x: [weight(k, d, y, x) for k in range(K) for d in range(K) for y in range(M)]
             for x in spaces.strata}
        v = {x: [intercept(y, x) if intercept else 0 for y in spaces.y_vectors] for x in spaces.strata}
        return cls(spaces, w, v)

    def weight(self, k: int, d: int, y: int, x: Optional[str] = None) -> Fraction:
        x = self.spaces.strata[0] if x is None else x
        return self.weights[x][self.spaces.weight_index(k, d, y)]

    def intercept_at(self, y: Sequence[int], x: Optional[str] = None) -> Fraction:
        x = self.spaces.strata[0] if x is None else x
        return self.intercept[x][self.spaces.y_index(y)]

    @property
    def has_intercept(self) -> bool:
        return any(v != 0 for vec in self.intercept.values() for v in vec)

    def reconstruct(self) -> LossTensor:
        sp = self.spaces
        return LossTensor.from_function(
            sp,
            lambda d, y, x: sum((self.weight(k, d, y[k], x) for k in range(sp.K)), Fraction(0))
            + self.intercept_at(y, x),
        )

    def with_free_params(self, params: Mapping[str, Sequence]) -> "AdditiveDecomposition":
        """Move along the recorded free directions.

        ``params`` maps a stratum to one coefficient per free direction.
        """
        sp = self.spaces
        w, v = dict(self.weights), dict(self.intercept)
        for x, coeffs in params.items():
            if len(coeffs) != len(self.free_directions):
                raise DimensionMismatch("one coefficient per free direction is required")
            vec = list(self.weights[x]) + list(self.intercept[x])
            for c, direction in zip(coeffs, self.free_directions):
                vec = [a + Fraction(c) * b for a, b in zip(vec, direction)]
            w[x], v[x] = vec[: sp.n_weights], vec[sp.n_weights:]
        return AdditiveDecomposition(sp, w, v, self.free_params, self.free_directions)

    def scaled(self, factor) -> "AdditiveDecomposition":
        f = Fraction(factor)
        return AdditiveDecomposition(
            self.spaces,
            {x: [f * a for a in vec] for x, vec in self.weights.items()},
            {x: [f * a for a in vec] for x, vec in self.intercept.items()},
        )


@dataclass(frozen=True)
class NotAdditive:
    """Non-membership certificate: per stratum, the projection of the loss
    vector onto ``ker(A^T)``. A nonzero residual proves ``l`` is outside
    ``im(A)``."""

    spaces: Spaces
    variant: Variant
    residual: Mapping[str, Tuple[Fraction, ...]]

    @property
    def failing_strata(self) -> List[str]:
        return [x for x, r in self.residual.items() if any(v != 0 for v in r)]


def decompose(loss: LossTensor, variant: Union[str, Variant] = Variant.FULL):
    """Solve ``A w = l`` stratum by stratum.

    Returns an :class:`AdditiveDecomposition` with every free parameter set to
    zero, or :class:`NotAdditive` carrying the exact residual.
    """
    variant = Variant.parse(variant)
    sp = loss.spaces
    solver = structure_solver(sp, variant)
    weights, intercepts, residuals = {}, {}, {}
    for x in sp.strata:
        vec = loss.values[x]
        sol = solver.solve(vec)
        if sol is None:
            residuals[x] = tuple(solver.residual(vec))
            continue
        weights[x] = sol[: sp.n_weights]
        intercepts[x] = sol[sp.n_weights:] or [Fraction(0)] * sp.n_outcome_vectors
        residuals[x] = tuple(Fraction(0) for _ in vec)
    if len(weights) < len(sp.strata):
        return NotAdditive(sp, variant, residuals)
    labels = build_structure_matrix(Spaces(sp.K, sp.M), variant).column_labels
    free = tuple((labels[c], f"t{i}") for i, c in enumerate(solver.free_columns))
    directions = []
    for v in solver.kernel():
        if variant is Variant.RESTRICTED:
            v = v + [Fraction(0)] * sp.n_outcome_vectors
        directions.append(tuple(v))
    return AdditiveDecomposition(sp, weights, intercepts, free, tuple(directions))


def in_image(loss: LossTensor, variant: Union[str, Variant]) -> bool:
    solver = structure_solver(loss.spaces, variant)
    return all(solver.contains(loss.values[x]) for x in loss.spaces.strata)


class Regime(str, enum.Enum):
    EXACT = "Exact"
    CONSTANT_ONLY = "ConstantOnly"
    UNIDENTIFIABLE = "Unidentifiable"


_ORDER = {Regime.EXACT: 0, Regime.CONSTANT_ONLY: 1, Regime.UNIDENTIFIABLE: 2}


@dataclass(frozen=True)
class RegimeLabel:
    regime: Regime
    witness: Union[AdditiveDecomposition, NotAdditive]
    per_stratum: Mapping[str, Regime]


def _stratum_regime(sp: Spaces, vec) -> Regime:
    if structure_solver(sp, Variant.RESTRICTED).contains(vec):
        return Regime.EXACT
    if structure_solver(sp, Variant.FULL).contains(vec):
        return Regime.CONSTANT_ONLY
    return Regime.UNIDENTIFIABLE


def classify(loss: LossTensor) -> RegimeLabel:
    """Exact / ConstantOnly / Unidentifiable, the weakest over strata."""
    sp = loss.spaces
    per = {x: _stratum_regime(sp, loss.values[x]) for x in sp.strata}
    regime = max(per.values(), key=_ORDER.__getitem__)
    if regime is Regime.EXACT:
        witness = decompose(loss, Variant.RESTRICTED)
    else:
        witness = decompose(loss, Variant.FULL)
    return RegimeLabel(regime, witness, per)


# --- closed-form checks and the binary weight family -----------------------

def _binary_cells(loss: LossTensor, x: Optional[str]):
    sp = loss.spaces
    if sp.K != 2 or sp.M != 2:
        raise BadDimensions("binary decision and binary outcome required (K = M = 2)")
    return lambda d, y0, y1: loss(d, (y0, y1), x)


def standard_constraints_hold(loss: LossTensor, x: Optional[str] = None) -> bool:
    """Loss depends only on the realized outcome ``y_d``."""
    l = _binary_cells(loss, x)
    return (l(0, 0, 0) == l(0, 0, 1) and l(0, 1, 0) == l(0, 1, 1)
            and l(1, 0, 0) == l(1, 1, 0) and l(1, 0, 1) == l(1, 1, 1))


def within_column_balance(loss: LossTensor, x: Optional[str] = None) -> bool:
    """Never + always survivors equals harmed + responders, for each decision."""
    l = _binary_cells(loss, x)
    return all(l(d, 0, 0) + l(d, 1, 1) == l(d, 0, 1) + l(d, 1, 0) for d in (0, 1))


def cross_column_balance(loss: LossTensor, x: Optional[str] = None) -> bool:
    """Balance of the loss differences between the two decisions."""
    l = _binary_cells(loss, x)
    lhs = (l(1, 0, 0) - l(0, 0, 0)) + (l(1, 1, 1) - l(0, 1, 1))
    rhs = (l(1, 1, 0) - l(0, 1, 0)) + (l(1, 0, 1) - l(0, 0, 1))
    return lhs == rhs


FAMILY_PARAMETERS = ("a", "b", "c", "d", "e")

FAMILY_FORMULAS = {
    "omega_0(0,0)": "l(0;0,1) - b - c",
    "omega_0(0,1)": "l(0;1,1) - b - e",
    "omega_1(1,0)": "l(1;1,0) - a - d",
    "omega_1(1,1)": "l(1;1,1) - a - e",
    "omega_0(1,0)": "l(1;0,1) - l(1;1,1) + a - c + e",
    "omega_0(1,1)": "a",
    "omega_1(0,0)": "l(0;1,0) - l(0;1,1) + b - d + e",
    "omega_1(0,1)": "b",
    "varpi(0,0)": "l(1;0,0) - l(1;1,0) - l(1;0,1) + l(1;1,1) + c + d - e",
    "varpi(0,1)": "c",
    "varpi(1,0)": "d",
    "varpi(1,1)": "e",
}


@dataclass(frozen=True)
class BinaryWeightFamily:
    """Five-parameter family of decompositions of a K = M = 2 loss that
    satisfies the cross-column balance."""

    loss: LossTensor
    formulas: Mapping[str, str] = field(default_factory=lambda: dict(FAMILY_FORMULAS))

    def evaluate(self, a=0, b=0, c=0, d=0, e=0, x: Optional[str] = None) -> AdditiveDecomposition:
        """Decomposition at the given parameters (the same in every stratum
        unless ``x`` restricts evaluation to one stratum's values)."""
        a, b, c, d, e = (Fraction(v) for v in (a, b, c, d, e))
        sp = self.loss.spaces
        weights, intercept = {}, {}
        for s in sp.strata:
            l = lambda dd, y0, y1: self.loss(dd, (y0, y1), s)  # noqa: E731
            w = {
                (0, 0, 0): l(0, 0, 1) - b - c,
                (0, 0, 1): l(0, 1, 1) - b - e,
                (1, 1, 0): l(1, 1, 0) - a - d,
                (1, 1, 1): l(1, 1, 1) - a - e,
                (0, 1, 0): l(1, 0, 1) - l(1, 1, 1) + a - c + e,
                (0, 1, 1): a,
                (1, 0, 0): l(0, 1, 0) - l(0, 1, 1) + b - d + e,
                (1, 0, 1): b,
            }
            weights[s] = [w[(k, dd, y)] for k in range(2) for dd in range(2) for y in range(2)]
            intercept[s] = [l(1, 0, 0) - l(1, 1, 0) - l(1, 0, 1) + l(1, 1, 1) + c + d - e, c, d, e]
        return AdditiveDecomposition(sp, weights, intercept)


def binary_weight_family(loss: LossTensor) -> BinaryWeightFamily:
    for x in loss.spaces.strata:
        if not cross_column_balance(loss, x):
            raise RestrictionViolated(
                f"stratum {x!r}: loss violates the cross-column balance, no additive family exists")
    return BinaryWeightFamily(loss)


# --- documents -------------------------------------------------------------

def decomposition_to_document(dec: AdditiveDecomposition) -> dict:
    sp = dec.spaces
    return {
        "K": sp.K,
        "M": sp.M,
        "strata": [
            {
                "label": x,
                "weights": [
                    {"k": k, "d": d, "y": y, "value": format_rational(dec.weight(k, d, y, x))}
                    for k in range(sp.K) for d in range(sp.K) for y in range(sp.M)
                ],
                "intercept": [
                    {"y": list(y), "value": format_rational(dec.intercept_at(y, x))}
                    for y in sp.y_vectors
                ],
            }
            for x in sp.strata
        ],
        "free_params": [{"column": c, "symbol": s} for c, s in dec.free_params],
    }


def decomposition_from_document(doc: Mapping) -> AdditiveDecomposition:
    check_keys(doc, ["K", "M", "strata"], ["free_params"], where="decomposition")
    K = expect_int(doc["K"], "decomposition.K")
    M = expect_int(doc["M"], "decomposition.M")
    strata = doc["strata"]
    if not isinstance(strata, list) or not strata:
        raise SchemaError("decomposition.strata: expected a non-empty list")
    sp = Spaces(K, M, tuple(str(s.get("label")) if isinstance(s, Mapping) else "" for s in strata))
    weights, intercepts = {}, {}
    for x, s in zip(sp.strata, strata):
        where = f"stratum {x!r}"
        check_keys(s, ["label", "weights"], ["intercept"], where=where)
        w: Dict[int, Fraction] = {}
        for e in s["weights"]:
            check_keys(e, ["k", "d", "y", "value"], where=where)
            k, d, y = (expect_int(e[n], where) for n in ("k", "d", "y"))
            if not (0 <= k < K and 0 <= d < K and 0 <= y < M):
                raise SchemaError(f"{where}: weight index ({k},{d},{y}) out of range")
            i = sp.weight_index(k, d, y)
            if i in w:
                raise DuplicateEntry(f"{where}: duplicate weight {weight_label(k, d, y)}")
            w[i] = parse_rational(e["value"], where)
        missing = [i for i in range(sp.n_weights) if i not in w]
        if missing:
            k, rest = divmod(missing[0], K * M)
            d, y = divmod(rest, M)
            raise MissingEntry(f"{where}: missing weight {weight_label(k, d, y)}")
        v = {}
        for e in s.get("intercept", []):
            check_keys(e, ["y", "value"], where=where)
            y = e["y"]
            if not isinstance(y, list) or len(y) != K or any(not isinstance(t, int) or not 0 <= t < M for t in y):
                raise BadDimensions(f"{where}: bad intercept index {y!r}")
            j = sp.y_index(y)
            if j in v:
                raise DuplicateEntry(f"{where}: duplicate intercept {intercept_label(y)}")
            v[j] = parse_rational(e["value"], where)
        weights[x] = [w[i] for i in range(sp.n_weights)]
        intercepts[x] = [v.get(j, Fraction(0)) for j in range(sp.n_outcome_vectors)]
    free = []
    for e in doc.get("free_params", []):
        check_keys(e, ["column", "symbol"], where="free_params")
        free.append((str(e["column"]), str(e["symbol"])))
    return AdditiveDecomposition(sp, weights, intercepts, tuple(free))


def load_decomposition(source: Source) -> AdditiveDecomposition:
    return decomposition_from_document(read_document(source))


def dump_decomposition(dec: AdditiveDecomposition) -> str:
    return dumps(decomposition_to_document(dec))


def not_additive_to_document(cert: NotAdditive) -> dict:
    sp = cert.spaces
    return {
        "K": sp.K,
        "M": sp.M,
        "variant": cert.variant.value,
        "strata": [
            {
                "label": x,
                "residual": [
                    {"d": d, "y": list(y), "value": format_rational(cert.residual[x][sp.index(d, y)])}
                    for d, y in sp.cells
                ],
            }
            for x in sp.strata
        ],
    }
