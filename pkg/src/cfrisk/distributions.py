"""Joint laws of (D*, Y(0), ..., Y(K-1)) per stratum and their observable
marginals.

Models come in two numeric modes. Exact models hold ``Fraction`` entries and
are used for algebra and for the oracle; float models are used for
simulation. Conversion is explicit through :meth:`JointModel.to_float`.
"""
from __future__ import annotations

import csv
import enum
import io
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterator, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .documents import Source, check_keys, dumps, expect_int, format_value, parse_rational, read_document
from .errors import (
    BadDimensions,
    DimensionMismatch,
    DuplicateEntry,
    NeedExtendedView,
    OverlapViolation,
    SchemaError,
    ValidationError,
)
from .linalg import nullspace
from .spaces import Spaces

FLOAT_TOL = 1e-12
DEFAULT_ETA = Fraction(1, 100)


class View(str, enum.Enum):
    """Which observable blocks are available: single-outcome marginals only
    (``a``) or additionally the joint law of the potential outcomes (``b``)."""

    MARGINALS_ONLY = "a"
    EXTENDED = "b"

    @classmethod
    def parse(cls, value: Union[str, "View"]) -> "View":
        if isinstance(value, View):
            return value
        aliases = {"a": cls.MARGINALS_ONLY, "marginals": cls.MARGINALS_ONLY,
                   "b": cls.EXTENDED, "extended": cls.EXTENDED}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise BadDimensions(f"unknown view {value!r}; use 'a' or 'b'") from None


def _is_exact(values) -> bool:
    return all(isinstance(v, (int, Fraction)) and not isinstance(v, bool) for v in values)


def _normalize(values: Sequence, exact: bool) -> tuple:
    return tuple(Fraction(v) for v in values) if exact else tuple(float(v) for v in values)


def _check_distribution(values: Sequence, exact: bool, what: str) -> None:
    if any(v < 0 for v in values):
        raise ValidationError(f"{what}: negative probability")
    total = sum(values)
    if exact and total != 1:
        raise ValidationError(f"{what}: probabilities sum to {total}, not 1")
    if not exact and abs(total - 1.0) > FLOAT_TOL:
        raise ValidationError(f"{what}: probabilities sum to {total!r}, not 1")


@dataclass(frozen=True)
class JointModel:
    """Per-stratum joint law ``p`` over ``(D*, Y(0..K-1))`` (flat index order of
    :class:`Spaces`), assignment propensities ``Pr(D = k | x)`` and stratum
    weights.

    The observed decision D is drawn from the propensity independently of
    ``(D*, Y(.))`` given the stratum, so unconfoundedness holds by
    construction. Overlap is enforced with margin ``eta``.
    """

    spaces: Spaces
    p: Mapping[str, tuple]
    propensity: Mapping[str, tuple] = None
    stratum_weights: Mapping[str, object] = None
    eta: Fraction = DEFAULT_ETA

    def __post_init__(self):
        sp = self.spaces
        propensity = self.propensity
        if propensity is None:
            propensity = {x: [Fraction(1, sp.K)] * sp.K for x in sp.strata}
        weights = self.stratum_weights
        if weights is None:
            weights = {x: Fraction(1, len(sp.strata)) for x in sp.strata}
        for name, m in (("p", self.p), ("propensity", propensity), ("stratum_weights", weights)):
            if set(m) != set(sp.strata):
                raise DimensionMismatch(f"{name}: strata {sorted(m)} do not match {list(sp.strata)}")
        everything = [v for x in sp.strata for v in self.p[x]]
        everything += [v for x in sp.strata for v in propensity[x]] + [weights[x] for x in sp.strata]
        exact = _is_exact(everything)
        p, prop = {}, {}
        for x in sp.strata:
            if len(self.p[x]) != sp.N:
                raise DimensionMismatch(f"p[{x!r}] has {len(self.p[x])} entries, expected {sp.N}")
            if len(propensity[x]) != sp.K:
                raise DimensionMismatch(f"propensity[{x!r}] needs {sp.K} entries")
            p[x] = _normalize(self.p[x], exact)
            prop[x] = _normalize(propensity[x], exact)
            _check_distribution(p[x], exact, f"p[{x!r}]")
            _check_distribution(prop[x], exact, f"propensity[{x!r}]")
            eta = Fraction(self.eta) if exact else float(self.eta)
            if not eta > 0:
                raise OverlapViolation("overlap margin eta must be positive")
            bad = [k for k, v in enumerate(prop[x]) if not eta < v < 1 - eta]
            if bad:
                raise OverlapViolation(
                    f"stratum {x!r}: propensity of decision(s) {bad} outside ({self.eta}, 1 - {self.eta})")
        w = dict(zip(sp.strata, _normalize([weights[x] for x in sp.strata], exact)))
        _check_distribution(list(w.values()), exact, "stratum_weights")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "propensity", prop)
        object.__setattr__(self, "stratum_weights", w)

    @property
    def exact(self) -> bool:
        return isinstance(self.p[self.spaces.strata[0]][0], Fraction)

    def to_float(self) -> "JointModel":
        return JointModel(
            self.spaces,
            {x: [float(v) for v in vec] for x, vec in self.p.items()},
            {x: [float(v) for v in vec] for x, vec in self.propensity.items()},
            {x: float(v) for x, v in self.stratum_weights.items()},
            self.eta,
        )

    def prob(self, d: int, y: Sequence[int], x: Optional[str] = None):
        x = self.spaces.strata[0] if x is None else x
        return self.p[x][self.spaces.index(d, y)]

    def outcome_law(self, x: Optional[str] = None) -> tuple:
        """``Pr(Y(0..K-1) = y | x)`` in ``y_index`` order."""
        sp = self.spaces
        x = sp.strata[0] if x is None else x
        n = sp.n_outcome_vectors
        vec = self.p[x]
        return tuple(sum(vec[d * n + j] for d in range(sp.K)) for j in range(n))

    def decision_law(self, x: Optional[str] = None) -> tuple:
        sp = self.spaces
        x = sp.strata[0] if x is None else x
        n = sp.n_outcome_vectors
        vec = self.p[x]
        return tuple(sum(vec[d * n: (d + 1) * n]) for d in range(sp.K))

    def with_p(self, p: Mapping[str, Sequence]) -> "JointModel":
        return JointModel(self.spaces, p, self.propensity, self.stratum_weights, self.eta)


# --- constructors ----------------------------------------------------------

def uniform_model(spaces: Spaces, **kwargs) -> JointModel:
    return JointModel(spaces, {x: [Fraction(1, spaces.N)] * spaces.N for x in spaces.strata}, **kwargs)


def point_mass_model(spaces: Spaces, d: int, y: Sequence[int], **kwargs) -> JointModel:
    i = spaces.index(d, y)
    return JointModel(spaces, {x: [Fraction(int(j == i)) for j in range(spaces.N)] for x in spaces.strata},
                      **kwargs)


def random_simplex_point(n: int, rng: random.Random, scale: int = 20) -> List[Fraction]:
    """Interior point of the simplex: positive integer numerators over their
    common sum."""
    a = [rng.randint(1, scale) for _ in range(n)]
    total = sum(a)
    return [Fraction(v, total) for v in a]


def random_model(spaces: Spaces, rng: random.Random, scale: int = 20, **kwargs) -> JointModel:
    return JointModel(spaces, {x: random_simplex_point(spaces.N, rng, scale) for x in spaces.strata}, **kwargs)


def system_from_conditional(outcome_law: Mapping[str, Sequence], decision_given_y, spaces: Spaces,
                            **kwargs) -> JointModel:
    """Joint law ``p(d, y) = r(y) * pi(d | y, x)``.

    ``decision_given_y(y, x)`` returns a probability vector over decisions;
    D* may depend on the potential outcomes this way (through unobserved
    covariates).
    """
    n = spaces.n_outcome_vectors
    p = {}
    for x in spaces.strata:
        r = outcome_law[x]
        vec = [Fraction(0)] * spaces.N
        for j, y in enumerate(spaces.y_vectors):
            probs = decision_given_y(y, x)
            for d in range(spaces.K):
                vec[d * n + j] = r[j] * probs[d]
        p[x] = vec
    return JointModel(spaces, p, **kwargs)


def random_system(outcome_law: Mapping[str, Sequence], spaces: Spaces, rng: random.Random,
                  scale: int = 20, **kwargs) -> JointModel:
    """A random decision system whose choice depends on the potential
    outcomes, over a fixed potential-outcome law."""
    table = {(x, y): random_simplex_point(spaces.K, rng, scale) for x in spaces.strata for y in spaces.y_vectors}
    return system_from_conditional(outcome_law, lambda y, x: table[(x, y)], spaces, **kwargs)


# --- marginal matrix and observable view -----------------------------------

@dataclass(frozen=True)
class MarginalMatrix:
    spaces: Spaces
    variant: View
    rows: Tuple[Tuple[int, ...], ...]

    @property
    def shape(self) -> Tuple[int, int]:
        return len(self.rows), self.spaces.N


def marginal_row_index(spaces: Spaces, d: int, k: int, y: int) -> int:
    return (d * spaces.K + k) * spaces.M + y


@lru_cache(maxsize=None)
def _marginal_rows(K: int, M: int, variant: View) -> Tuple[Tuple[int, ...], ...]:
    sp = Spaces(K, M)
    rows = []
    for d in range(K):
        for k in range(K):
            for y in range(M):
                rows.append(tuple(int(dd == d and yy[k] == y) for dd, yy in sp.cells))
    if variant is View.EXTENDED:
        for y in sp.y_vectors:
            rows.append(tuple(int(yy == y) for _, yy in sp.cells))
    return tuple(rows)


def marginal_matrix(spaces: Spaces, variant: Union[str, View] = View.MARGINALS_ONLY) -> MarginalMatrix:
    variant = View.parse(variant)
    return MarginalMatrix(spaces, variant, _marginal_rows(spaces.K, spaces.M, variant))


@dataclass(frozen=True)
class ObservableView:
    """Per-stratum marginals ``Pr(D* = d, Y(k) = y | x)`` at
    ``marginal_row_index(d, k, y)``, followed (extended view only) by
    ``Pr(Y(.) = y | x)`` in ``y_index`` order."""

    spaces: Spaces
    variant: View
    q: Mapping[str, tuple]
    stratum_weights: Mapping[str, object]

    def joint(self, d: int, k: int, y: int, x: Optional[str] = None):
        x = self.spaces.strata[0] if x is None else x
        return self.q[x][marginal_row_index(self.spaces, d, k, y)]

    def outcome_joint(self, y: Sequence[int], x: Optional[str] = None):
        if self.variant is not View.EXTENDED:
            raise NeedExtendedView("the joint law of the potential outcomes is not observable in view 'a'")
        x = self.spaces.strata[0] if x is None else x
        return self.q[x][self.spaces.L_a + self.spaces.y_index(y)]

    def potential_marginal(self, k: int, y: int, x: Optional[str] = None):
        return sum(self.joint(d, k, y, x) for d in range(self.spaces.K))

    def decision_prob(self, d: int, x: Optional[str] = None):
        return sum(self.joint(d, 0, y, x) for y in range(self.spaces.M))


def marginalize(model: JointModel, variant: Union[str, View] = View.MARGINALS_ONLY) -> ObservableView:
    """``q = C p`` per stratum, computed by direct accumulation over cells."""
    variant = View.parse(variant)
    sp = model.spaces
    L = sp.L_b if variant is View.EXTENDED else sp.L_a
    zero = Fraction(0) if model.exact else 0.0
    q = {}
    for x in sp.strata:
        out = [zero] * L
        for i, (d, y) in enumerate(sp.cells):
            pi = model.p[x][i]
            if not pi:
                continue
            for k in range(sp.K):
                out[marginal_row_index(sp, d, k, y[k])] += pi
            if variant is View.EXTENDED:
                out[sp.L_a + sp.y_index(y)] += pi
        q[x] = tuple(out)
    return ObservableView(sp, variant, q, dict(model.stratum_weights))


def observed_conditionals(model: JointModel) -> ObservableView:
    """``Pr(D* = d, Y = y | D = k, x)`` from the law of the observed tuple.

    Builds the joint of ``(D*, D, Y(.))`` with D independent of the rest given
    x, applies ``Y = Y(D)``, and conditions on ``D = k``. Under the model's
    assumptions this coincides with :func:`marginalize` in view ``a``.
    """
    sp = model.spaces
    zero = Fraction(0) if model.exact else 0.0
    q = {}
    for x in sp.strata:
        observed = {}
        for i, (d, y) in enumerate(sp.cells):
            for k in range(sp.K):
                key = (d, k, y[k])
                observed[key] = observed.get(key, zero) + model.p[x][i] * model.propensity[x][k]
        out = [zero] * sp.L_a
        for (d, k, yk), mass in observed.items():
            out[marginal_row_index(sp, d, k, yk)] = mass / model.propensity[x][k]
        q[x] = tuple(out)
    return ObservableView(sp, View.MARGINALS_ONLY, q, dict(model.stratum_weights))


def kernel_basis(matrix: MarginalMatrix) -> List[List[Fraction]]:
    """Exact basis of ``{v : C v = 0, 1^T v = 0}``."""
    rows = [list(r) for r in matrix.rows] + [[1] * matrix.spaces.N]
    return nullspace(rows)


# --- records ---------------------------------------------------------------

class Record(NamedTuple):
    x: int
    d_star: int
    d: int
    y: int


@dataclass(frozen=True)
class RecordBatch:
    """Columnar record storage; iterating yields :class:`Record` tuples.
    ``x`` holds stratum indices into ``spaces.strata``."""

    spaces: Spaces
    x: np.ndarray
    d_star: np.ndarray
    d: np.ndarray
    y: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.x)

    def __iter__(self) -> Iterator[Record]:
        for row in zip(self.x.tolist(), self.d_star.tolist(), self.d.tolist(), self.y.tolist()):
            yield Record(*row)

    @classmethod
    def from_records(cls, spaces: Spaces, records: Sequence[Record]) -> "RecordBatch":
        arr = np.asarray([tuple(r) for r in records], dtype=np.int64).reshape(-1, 4)
        return cls(spaces, arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])

    def take(self, index) -> "RecordBatch":
        return RecordBatch(self.spaces, self.x[index], self.d_star[index], self.d[index], self.y[index])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("x,d_star,d,y\n")
        np.savetxt(buf, np.column_stack([self.x, self.d_star, self.d, self.y]), fmt="%d", delimiter=",")
        return buf.getvalue()


def read_records(path: Union[str, Path], spaces: Spaces) -> RecordBatch:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["x", "d_star", "d", "y"]:
            raise SchemaError(f"records: expected header x,d_star,d,y, got {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise SchemaError(f"records line {lineno}: expected 4 fields")
            try:
                rows.append(Record(*(int(v) for v in row)))
            except ValueError:
                raise SchemaError(f"records line {lineno}: non-integer field") from None
    batch = RecordBatch.from_records(spaces, rows)
    validate_records(batch)
    return batch


def validate_records(batch: RecordBatch) -> None:
    sp = batch.spaces
    for name, arr, hi in (("x", batch.x, len(sp.strata)), ("d_star", batch.d_star, sp.K),
                          ("d", batch.d, sp.K), ("y", batch.y, sp.M)):
        if len(arr) and (arr.min() < 0 or arr.max() >= hi):
            raise SchemaError(f"records: column {name} outside 0..{hi - 1}")


def _stream(seed: int, key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(key,))))


def simulate_records(model: JointModel, n: int, seed: int) -> RecordBatch:
    """Draw ``n`` IID units.

    The stratum comes from the stratum weights, ``(D*, Y(.))`` from ``p``, and
    D from the propensity independently of both; the emitted outcome is
    ``Y(D)``. Stratum assignment uses stream 0 of ``seed``; stratum ``s``
    uses stream ``s + 1``, so results do not depend on evaluation order.
    """
    if n < 1:
        raise ValidationError("n must be at least 1")
    fm = model.to_float()
    sp = fm.spaces
    w = np.array([fm.stratum_weights[x] for x in sp.strata])
    x = _stream(seed, 0).choice(len(sp.strata), size=n, p=w / w.sum())
    d_star = np.empty(n, dtype=np.int64)
    d = np.empty(n, dtype=np.int64)
    y = np.empty(n, dtype=np.int64)
    ycodes = np.array(sp.y_vectors, dtype=np.int64)
    n_y = sp.n_outcome_vectors
    for s, label in enumerate(sp.strata):
        idx = np.flatnonzero(x == s)
        if not len(idx):
            continue
        rng = _stream(seed, s + 1)
        p = np.array(fm.p[label])
        cell = rng.choice(sp.N, size=len(idx), p=p / p.sum())
        prop = np.array(fm.propensity[label])
        dk = rng.choice(sp.K, size=len(idx), p=prop / prop.sum())
        d_star[idx] = cell // n_y
        d[idx] = dk
        y[idx] = ycodes[cell % n_y, dk]
    return RecordBatch(sp, x.astype(np.int64), d_star, d, y)


# --- documents -------------------------------------------------------------

def _parse_prob(value, where: str):
    """Probabilities may be exact (``"p/q"``, ints) or JSON floats."""
    if isinstance(value, float):
        return value
    return parse_rational(value, where)


def model_from_document(doc: Mapping) -> JointModel:
    check_keys(doc, ["K", "M", "strata"], ["eta"], where="model")
    K = expect_int(doc["K"], "model.K")
    M = expect_int(doc["M"], "model.M")
    if K < 2 or M < 2:
        raise BadDimensions(f"model: need K >= 2 and M >= 2, got K={K}, M={M}")
    strata = doc["strata"]
    if not isinstance(strata, list) or not strata:
        raise SchemaError("model.strata: expected a non-empty list")
    labels = []
    for s in strata:
        check_keys(s, ["label", "weight", "propensity", "p"], where="model stratum")
        labels.append(str(s["label"]))
    sp = Spaces(K, M, tuple(labels))
    p, prop, weights = {}, {}, {}
    for x, s in zip(sp.strata, strata):
        where = f"stratum {x!r}"
        weights[x] = _parse_prob(s["weight"], f"{where}.weight")
        if not isinstance(s["propensity"], list) or len(s["propensity"]) != K:
            raise BadDimensions(f"{where}: propensity must list {K} probabilities")
        prop[x] = [_parse_prob(v, f"{where}.propensity") for v in s["propensity"]]
        vec = [Fraction(0)] * sp.N
        seen = set()
        for e in s["p"]:
            check_keys(e, ["d_star", "y", "prob"], where=where)
            d = expect_int(e["d_star"], where)
            y = e["y"]
            if not isinstance(y, list) or len(y) != K:
                raise BadDimensions(f"{where}: y must be a list of {K} integers")
            if not 0 <= d < K or any(not isinstance(t, int) or not 0 <= t < M for t in y):
                raise SchemaError(f"{where}: cell (d_star={d}, y={y}) out of range")
            i = sp.index(d, y)
            if i in seen:
                raise DuplicateEntry(f"{where}: duplicate cell d_star={d}, y={y}")
            seen.add(i)
            vec[i] = _parse_prob(e["prob"], where)
        p[x] = vec
    eta = parse_rational(doc["eta"], "model.eta") if "eta" in doc else DEFAULT_ETA
    return JointModel(sp, p, prop, weights, eta)


def model_to_document(model: JointModel, include_zero: bool = False) -> dict:
    sp = model.spaces
    return {
        "K": sp.K,
        "M": sp.M,
        "strata": [
            {
                "label": x,
                "weight": format_value(model.stratum_weights[x]),
                "propensity": [format_value(v) for v in model.propensity[x]],
                "p": [
                    {"d_star": d, "y": list(y), "prob": format_value(model.p[x][i])}
                    for i, (d, y) in enumerate(sp.cells)
                    if include_zero or model.p[x][i]
                ],
            }
            for x in sp.strata
        ],
    }


def load_model(source: Source) -> JointModel:
    return model_from_document(read_document(source))


def dump_model(model: JointModel) -> str:
    return dumps(model_to_document(model))
