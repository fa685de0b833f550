"""JSON document helpers shared by every file schema."""
from __future__ import annotations

import json
import re
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Mapping, Union

from .errors import MalformedRational, SchemaError

_RATIONAL = re.compile(r"^[+-]?\d+(/\d+)?$")
_DECIMAL = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")

Source = Union[str, Path, Mapping[str, Any]]


def parse_rational(value: Any, where: str = "") -> Fraction:
    """Parse ``"p/q"``, a decimal literal, or an int into an exact Fraction."""
    if isinstance(value, bool):
        raise MalformedRational(f"{where}: boolean is not a rational")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, str):
        s = value.strip()
        if _RATIONAL.match(s) or _DECIMAL.match(s):
            try:
                return Fraction(s)
            except ZeroDivisionError:
                pass
    raise MalformedRational(f"{where}: cannot parse {value!r} as a rational")


def format_rational(value: Any) -> str:
    f = Fraction(value)
    return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"


def format_value(value: Any) -> Any:
    """Rationals become ``"p/q"`` strings, floats stay numbers."""
    if value is None:
        return None
    if isinstance(value, float):
        return value
    return format_rational(value)


def check_keys(obj: Any, required: Iterable[str], optional: Iterable[str] = (), where: str = "") -> None:
    if not isinstance(obj, Mapping):
        raise SchemaError(f"{where}: expected an object, got {type(obj).__name__}")
    required, allowed = set(required), set(required) | set(optional)
    unknown = set(obj) - allowed
    if unknown:
        raise SchemaError(f"{where}: unknown field(s) {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise SchemaError(f"{where}: missing field(s) {sorted(missing)}")


def expect_int(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"{where}: expected an integer, got {value!r}")
    return value


def read_document(source: Source) -> Mapping[str, Any]:
    """Accept a mapping, a path, or raw JSON text."""
    if isinstance(source, Mapping):
        return source
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc


def dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"
