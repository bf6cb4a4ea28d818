"""Typed values, relations, databases and CSV ingestion.

Values are plain Python objects: ``int`` (arbitrary precision),
``fractions.Fraction`` (rational), ``str`` and ``bool``.  All probabilities and
exact scores in the package are ``Fraction`` as well.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Optional, Union

from .errors import DataError, ValueKindError

Value = Union[int, Fraction, str, bool]

KINDS = ("integer", "rational", "string", "boolean")
_KIND_ALIASES = {
    "int": "integer",
    "integer": "integer",
    "rational": "rational",
    "fraction": "rational",
    "string": "string",
    "str": "string",
    "text": "string",
    "bool": "boolean",
    "boolean": "boolean",
}


def normalize_kind(kind: str) -> str:
    try:
        return _KIND_ALIASES[kind.lower()]
    except KeyError:
        raise DataError(f"unknown value kind {kind!r}; expected one of {', '.join(KINDS)}") from None


def kind_of(value: Value) -> str:
    # bool before int: bool is an int subclass
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, int):
        return "integer"
    if isinstance(value, Fraction):
        return "rational"
    if isinstance(value, str):
        return "string"
    raise ValueKindError(f"unsupported value {value!r} of type {type(value).__name__}")


def is_numeric(value) -> bool:
    return isinstance(value, (int, Fraction)) and not isinstance(value, bool)


def compare(a: Value, b: Value) -> int:
    """Three-way comparison.  Integers and rationals form one numeric order;
    any other mix of kinds is an error."""
    if is_numeric(a) and is_numeric(b):
        pass
    elif kind_of(a) != kind_of(b):
        raise ValueKindError(f"cannot compare {a!r} ({kind_of(a)}) with {b!r} ({kind_of(b)})")
    if a == b:
        return 0
    return -1 if a < b else 1


def parse_value(text: str, kind: str) -> Value:
    kind = normalize_kind(kind)
    text = text.strip() if kind != "string" else text
    if kind == "string":
        return text
    if kind == "integer":
        return int(text)
    if kind == "rational":
        value = Fraction(text)
        return value.numerator if value.denominator == 1 else value
    if text.lower() in ("true", "1"):
        return True
    if text.lower() in ("false", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def guess_value(text: str) -> Value:
    """Parse without a declared kind: integer, then rational, else string."""
    t = text.strip()
    try:
        return int(t)
    except ValueError:
        pass
    try:
        v = Fraction(t)
        return v.numerator if v.denominator == 1 else v
    except (ValueError, ZeroDivisionError):
        return text


def format_value(value: Value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


@dataclass(frozen=True)
class RelationSchema:
    name: str
    columns: tuple  # of (attribute name, kind); kind may be None for derived relations

    def __post_init__(self):
        names = [c for c, _ in self.columns]
        if len(set(names)) != len(names):
            raise DataError(f"relation {self.name}: duplicate attribute names {names}")

    @property
    def arity(self) -> int:
        return len(self.columns)

    @property
    def attribute_names(self) -> tuple:
        return tuple(c for c, _ in self.columns)

    @classmethod
    def untyped(cls, name: str, attributes: Iterable[str]) -> "RelationSchema":
        return cls(name, tuple((a, None) for a in attributes))


@dataclass(frozen=True)
class Relation:
    schema: RelationSchema
    tuples: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "tuples", frozenset(tuple(t) for t in self.tuples))
        arity = self.schema.arity
        for t in self.tuples:
            if len(t) != arity:
                raise DataError(f"relation {self.schema.name}: tuple {t} has arity {len(t)}, expected {arity}")

    @property
    def name(self) -> str:
        return self.schema.name

    def __len__(self) -> int:
        return len(self.tuples)

    def __iter__(self) -> Iterator[tuple]:
        return iter(self.tuples)

    def __contains__(self, t) -> bool:
        return tuple(t) in self.tuples

    def column(self, index: int) -> set:
        return {t[index] for t in self.tuples}


def make_relation(name: str, attributes, tuples, kinds=None) -> Relation:
    if kinds is None:
        schema = RelationSchema.untyped(name, attributes)
    else:
        schema = RelationSchema(name, tuple(zip(attributes, kinds)))
    return Relation(schema, frozenset(tuple(t) for t in tuples))


@dataclass(frozen=True)
class Database:
    relations: Mapping[str, Relation] = field(default_factory=dict)

    def __post_init__(self):
        for name, rel in self.relations.items():
            if rel.name != name:
                raise DataError(f"relation registered as {name!r} is named {rel.name!r}")

    def __getitem__(self, name: str) -> Relation:
        try:
            return self.relations[name]
        except KeyError:
            raise DataError(f"unknown relation {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self.relations

    def with_relations(self, extra: Iterable[Relation]) -> "Database":
        rels = dict(self.relations)
        for r in extra:
            rels[r.name] = r
        return Database(rels)

    @classmethod
    def from_dict(cls, spec: Mapping[str, Iterable[tuple]]) -> "Database":
        """Untyped convenience constructor: ``{"R": [(1, 2), ...]}``; attributes are A1..Ak."""
        rels = {}
        for name, rows in spec.items():
            rows = [tuple(r) for r in rows]
            arity = len(rows[0]) if rows else 0
            rels[name] = make_relation(name, [f"A{i + 1}" for i in range(arity)], rows)
        return cls(rels)


def active_domain(db: Database, restriction: Optional[tuple] = None) -> set:
    """All values in ``db``; with ``restriction=(relation, column)`` only that column."""
    if restriction is not None:
        name, col = restriction
        rel = db[name]
        if not 0 <= col < rel.schema.arity:
            raise DataError(f"relation {name!r} has no column {col}")
        return rel.column(col)
    out = set()
    for rel in db.relations.values():
        for t in rel.tuples:
            out.update(t)
    return out


# --- files -----------------------------------------------------------------

def load_schema(path) -> list:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"schema descriptor not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"schema descriptor {path} is not valid JSON: {exc}") from None
    schemas = []
    seen = set()
    for entry in doc.get("relations", []):
        name = entry["name"]
        if name in seen:
            raise DataError(f"relation {name!r} declared twice")
        seen.add(name)
        cols = tuple((c["name"], normalize_kind(c["kind"])) for c in entry["columns"])
        schemas.append(RelationSchema(name, cols))
    return schemas


def load_database(schema_path, data_dir) -> Database:
    relations = {}
    for schema in load_schema(schema_path):
        path = os.path.join(data_dir, f"{schema.name}.csv")
        relations[schema.name] = _read_relation_csv(schema, path)
    return Database(relations)


def _read_relation_csv(schema: RelationSchema, path) -> Relation:
    if not os.path.exists(path):
        raise DataError(f"relation {schema.name}: missing data file {path}")
    rows = set()
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"relation {schema.name}: {path} has no header row")
        if [h.strip() for h in header] != list(schema.attribute_names):
            raise DataError(
                f"relation {schema.name}: header {header} does not match schema {list(schema.attribute_names)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != schema.arity:
                raise DataError(
                    f"relation {schema.name}, row {lineno}: {len(row)} cells, expected {schema.arity}"
                )
            values = []
            for (col, kind), cell in zip(schema.columns, row):
                try:
                    values.append(parse_value(cell, kind))
                except (ValueError, ZeroDivisionError):
                    raise DataError(
                        f"relation {schema.name}, row {lineno}, column {col}: cannot parse {cell!r} as {kind}"
                    ) from None
            rows.add(tuple(values))
    return Relation(schema, frozenset(rows))


def write_database(db: Database, schema_path, data_dir) -> None:
    os.makedirs(data_dir, exist_ok=True)
    doc = {"relations": []}
    for name in sorted(db.relations):
        rel = db.relations[name]
        cols = []
        for i, (col, kind) in enumerate(rel.schema.columns):
            if kind is None:
                kind = _infer_kind(rel.column(i))
            cols.append({"name": col, "kind": kind})
        doc["relations"].append({"name": name, "columns": cols})
        with open(os.path.join(data_dir, f"{name}.csv"), "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(rel.schema.attribute_names)
            for t in sorted(rel.tuples, key=lambda t: tuple(map(str, t))):
                writer.writerow([format_value(v) for v in t])
    with open(schema_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)


def _infer_kind(values: set) -> str:
    kinds = {kind_of(v) for v in values}
    if not kinds:
        return "integer"
    if kinds <= {"integer"}:
        return "integer"
    if kinds <= {"integer", "rational"}:
        return "rational"
    if len(kinds) == 1:
        return kinds.pop()
    return "string"
