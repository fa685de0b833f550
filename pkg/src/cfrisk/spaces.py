"""Finite decision/outcome/stratum spaces and loss tensors.

Flat index convention used everywhere in the package: a joint cell
``(d, y_0, ..., y_{K-1})`` sits at ``d * M**K + y_index(y)``, where
``y_index`` reads the outcome vector as a base-``M`` number with ``y_0`` the
most significant digit (so ``y_{K-1}`` varies fastest, ``d`` slowest).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Dict, Mapping, Sequence, Tuple

from .documents import (
    Source,
    check_keys,
    dumps,
    expect_int,
    format_rational,
    parse_rational,
    read_document,
)
from .errors import BadDimensions, DimensionMismatch, DuplicateEntry, MissingEntry, SchemaError

YVec = Tuple[int, ...]


@dataclass(frozen=True)
class Spaces:
    K: int
    M: int
    strata: Tuple[str, ...] = ("all",)

    def __post_init__(self):
        if self.K < 2 or self.M < 2:
            raise BadDimensions(f"need K >= 2 and M >= 2, got K={self.K}, M={self.M}")
        strata = tuple(str(s) for s in self.strata)
        if not strata:
            raise BadDimensions("at least one stratum is required")
        if len(set(strata)) != len(strata):
            raise BadDimensions(f"duplicate stratum labels in {strata}")
        object.__setattr__(self, "strata", strata)

    @property
    def N(self) -> int:
        return self.K * self.M ** self.K

    @property
    def n_outcome_vectors(self) -> int:
        return self.M ** self.K

    @property
    def n_weights(self) -> int:
        return self.K * self.K * self.M

    @property
    def L_a(self) -> int:
        return self.K * self.K * self.M

    @property
    def L_b(self) -> int:
        return self.K * self.K * self.M + self.M ** self.K

    @cached_property
    def y_vectors(self) -> Tuple[YVec, ...]:
        return tuple(itertools.product(range(self.M), repeat=self.K))

    @cached_property
    def cells(self) -> Tuple[Tuple[int, YVec], ...]:
        return tuple((d, y) for d in range(self.K) for y in self.y_vectors)

    def y_index(self, y: Sequence[int]) -> int:
        i = 0
        for v in y:
            i = i * self.M + v
        return i

    def index(self, d: int, y: Sequence[int]) -> int:
        return d * self.M ** self.K + self.y_index(y)

    def weight_index(self, k: int, d: int, y: int) -> int:
        return (k * self.K + d) * self.M + y

    def with_strata(self, strata: Sequence[str]) -> "Spaces":
        return Spaces(self.K, self.M, tuple(strata))


def _freeze(spaces: Spaces, values: Mapping[str, Sequence], length: int, what: str) -> Dict[str, Tuple]:
    if set(values) != set(spaces.strata):
        raise DimensionMismatch(f"{what}: strata {sorted(values)} do not match {list(spaces.strata)}")
    out = {}
    for x in spaces.strata:
        vec = tuple(values[x])
        if len(vec) != length:
            raise DimensionMismatch(f"{what}: stratum {x!r} has {len(vec)} values, expected {length}")
        out[x] = vec
    return out


@dataclass(frozen=True, eq=True)
class LossTensor:
    """Counterfactual loss ``l(d; y_0..y_{K-1}, x)`` stored per stratum as a
    flat tuple in the package's index order."""

    spaces: Spaces
    values: Mapping[str, Tuple[Fraction, ...]] = field(compare=True)

    def __post_init__(self):
        vals = _freeze(self.spaces, self.values, self.spaces.N, "loss")
        vals = {x: tuple(Fraction(v) for v in vec) for x, vec in vals.items()}
        object.__setattr__(self, "values", vals)

    def __call__(self, d: int, y: Sequence[int], x: str | None = None) -> Fraction:
        x = self.spaces.strata[0] if x is None else x
        return self.values[x][self.spaces.index(d, y)]

    def vector(self, x: str | None = None) -> Tuple[Fraction, ...]:
        return self.values[self.spaces.strata[0] if x is None else x]

    @classmethod
    def from_function(cls, spaces: Spaces, fn: Callable[[int, YVec, str], object]) -> "LossTensor":
        return cls(spaces, {x: [Fraction(fn(d, y, x)) for d, y in spaces.cells] for x in spaces.strata})

    @classmethod
    def zeros(cls, spaces: Spaces) -> "LossTensor":
        return cls(spaces, {x: [Fraction(0)] * spaces.N for x in spaces.strata})

    def __add__(self, other: "LossTensor") -> "LossTensor":
        if other.spaces != self.spaces:
            raise DimensionMismatch("cannot add losses on different spaces")
        return LossTensor(self.spaces, {x: [a + b for a, b in zip(self.values[x], other.values[x])]
                                        for x in self.spaces.strata})

    def scaled(self, factor) -> "LossTensor":
        f = Fraction(factor)
        return LossTensor(self.spaces, {x: [f * v for v in vec] for x, vec in self.values.items()})


@dataclass(frozen=True, eq=True)
class StandardLoss:
    """Standard loss ``l(d, y, x)`` stored per stratum at ``d * M + y``."""

    spaces: Spaces
    values: Mapping[str, Tuple[Fraction, ...]]

    def __post_init__(self):
        vals = _freeze(self.spaces, self.values, self.spaces.K * self.spaces.M, "standard loss")
        object.__setattr__(self, "values", {x: tuple(Fraction(v) for v in vec) for x, vec in vals.items()})

    def __call__(self, d: int, y: int, x: str | None = None) -> Fraction:
        x = self.spaces.strata[0] if x is None else x
        return self.values[x][d * self.spaces.M + y]

    def as_loss_tensor(self) -> LossTensor:
        """Embed as a counterfactual loss that only reads ``y_d``."""
        return LossTensor.from_function(self.spaces, lambda d, y, x: self(d, y[d], x))


# --- documents -------------------------------------------------------------

def _spaces_from_doc(doc: Mapping, what: str) -> Spaces:
    K = expect_int(doc["K"], f"{what}.K")
    M = expect_int(doc["M"], f"{what}.M")
    if K < 2 or M < 2:
        raise BadDimensions(f"{what}: need K >= 2 and M >= 2, got K={K}, M={M}")
    strata = doc["strata"]
    if not isinstance(strata, list) or not strata:
        raise SchemaError(f"{what}.strata: expected a non-empty list")
    labels = []
    for i, s in enumerate(strata):
        if not isinstance(s, Mapping) or "label" not in s:
            raise SchemaError(f"{what}.strata[{i}]: missing label")
        labels.append(str(s["label"]))
    return Spaces(K, M, tuple(labels))


def _check_y(y, K: int, M: int, where: str) -> YVec:
    if not isinstance(y, list) or len(y) != K:
        raise BadDimensions(f"{where}: y must be a list of {K} integers, got {y!r}")
    out = tuple(expect_int(v, where) for v in y)
    if any(not 0 <= v < M for v in out):
        raise SchemaError(f"{where}: outcome out of range 0..{M - 1} in {list(out)}")
    return out


def loss_from_document(doc: Mapping) -> LossTensor:
    check_keys(doc, ["K", "M", "strata"], where="loss")
    spaces = _spaces_from_doc(doc, "loss")
    K, M = spaces.K, spaces.M
    values = {}
    for si, s in enumerate(doc["strata"]):
        where = f"stratum {spaces.strata[si]!r}"
        check_keys(s, ["label", "entries"], where=where)
        cells: Dict[int, Fraction] = {}
        for ei, e in enumerate(s["entries"]):
            ew = f"{where} entry {ei}"
            check_keys(e, ["d", "y", "loss"], where=ew)
            d = expect_int(e["d"], ew)
            if not 0 <= d < K:
                raise SchemaError(f"{ew}: decision {d} out of range 0..{K - 1}")
            y = _check_y(e["y"], K, M, ew)
            i = spaces.index(d, y)
            if i in cells:
                raise DuplicateEntry(f"{where}: duplicate entry for d={d}, y={list(y)}")
            cells[i] = parse_rational(e["loss"], ew)
        for d, y in spaces.cells:
            if spaces.index(d, y) not in cells:
                raise MissingEntry(f"{where}: missing entry for d={d}, y={list(y)}")
        values[spaces.strata[si]] = [cells[i] for i in range(spaces.N)]
    return LossTensor(spaces, values)


def loss_to_document(loss: LossTensor) -> dict:
    sp = loss.spaces
    return {
        "K": sp.K,
        "M": sp.M,
        "strata": [
            {
                "label": x,
                "entries": [
                    {"d": d, "y": list(y), "loss": format_rational(loss.values[x][sp.index(d, y)])}
                    for d, y in sp.cells
                ],
            }
            for x in sp.strata
        ],
    }


def load_loss(source: Source) -> LossTensor:
    return loss_from_document(read_document(source))


def dump_loss(loss: LossTensor) -> str:
    return dumps(loss_to_document(loss))


def standard_loss_from_document(doc: Mapping) -> StandardLoss:
    check_keys(doc, ["K", "M", "strata"], where="standard loss")
    spaces = _spaces_from_doc(doc, "standard loss")
    K, M = spaces.K, spaces.M
    values = {}
    for si, s in enumerate(doc["strata"]):
        where = f"stratum {spaces.strata[si]!r}"
        check_keys(s, ["label", "entries"], where=where)
        cells: Dict[int, Fraction] = {}
        for ei, e in enumerate(s["entries"]):
            ew = f"{where} entry {ei}"
            check_keys(e, ["d", "y", "loss"], where=ew)
            d, y = expect_int(e["d"], ew), expect_int(e["y"], ew)
            if not (0 <= d < K and 0 <= y < M):
                raise SchemaError(f"{ew}: index (d={d}, y={y}) out of range")
            if d * M + y in cells:
                raise DuplicateEntry(f"{where}: duplicate entry for d={d}, y={y}")
            cells[d * M + y] = parse_rational(e["loss"], ew)
        for d in range(K):
            for y in range(M):
                if d * M + y not in cells:
                    raise MissingEntry(f"{where}: missing entry for d={d}, y={y}")
        values[spaces.strata[si]] = [cells[i] for i in range(K * M)]
    return StandardLoss(spaces, values)


def standard_loss_to_document(std: StandardLoss) -> dict:
    sp = std.spaces
    return {
        "K": sp.K,
        "M": sp.M,
        "strata": [
            {
                "label": x,
                "entries": [
                    {"d": d, "y": y, "loss": format_rational(std(d, y, x))}
                    for d in range(sp.K) for y in range(sp.M)
                ],
            }
            for x in sp.strata
        ],
    }


def load_standard_loss(source: Source) -> StandardLoss:
    return standard_loss_from_document(read_document(source))


def dump_standard_loss(std: StandardLoss) -> str:
    return dumps(standard_loss_to_document(std))
