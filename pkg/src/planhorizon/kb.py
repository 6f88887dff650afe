"""Immutable knowledge-base model: entities, concept taxonomy, typed values."""

from __future__ import annotations

import datetime
import json
from dataclasses import dataclass, field


class KBError(Exception):
    pass


class MalformedDocumentError(KBError):
    def __init__(self, message, location=""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


class DanglingReferenceError(KBError):
    pass


class CyclicTaxonomyError(KBError):
    pass


class UnknownConceptError(KBError):
    pass


class KindMismatchError(KBError):
    pass


class UnitMismatchError(KBError):
    pass


class UnsupportedOperatorError(KBError):
    pass


VALUE_KINDS = ("string", "number", "year", "date")
COMPARE_OPS = ("=", "!=", "<", ">")

# accepted aliases on input
_OP_ALIASES = {"≠": "!=", "==": "="}


def _norm_op(op: str) -> str:
    op = _OP_ALIASES.get(op, op)
    if op not in COMPARE_OPS:
        raise UnsupportedOperatorError(f"unknown comparison operator {op!r}")
    return op


@dataclass(frozen=True)
class TypedValue:
    """One of four value kinds: string, number (with unit), year, date."""

    kind: str
    string_value: str | None = None
    numeric_value: float | None = None
    unit: str | None = None
    year_value: int | None = None
    date_value: datetime.date | None = None

    def __post_init__(self):
        if self.kind not in VALUE_KINDS:
            raise KindMismatchError(f"unknown value kind {self.kind!r}")
        populated = {
            "string": self.string_value is not None,
            "number": self.numeric_value is not None,
            "year": self.year_value is not None,
            "date": self.date_value is not None,
        }
        if not populated[self.kind] or sum(populated.values()) != 1:
            raise KindMismatchError(
                f"exactly one payload must be set and match kind={self.kind!r}"
            )

    @staticmethod
    def string(v: str) -> "TypedValue":
        return TypedValue(kind="string", string_value=v)

    @staticmethod
    def number(v: float, unit: str | None = None) -> "TypedValue":
        return TypedValue(kind="number", numeric_value=v, unit=unit)

    @staticmethod
    def year(v: int) -> "TypedValue":
        return TypedValue(kind="year", year_value=int(v))

    @staticmethod
    def date(v: datetime.date) -> "TypedValue":
        return TypedValue(kind="date", date_value=v)

    def payload(self):
        return {
            "string": self.string_value,
            "number": self.numeric_value,
            "year": self.year_value,
            "date": self.date_value,
        }[self.kind]

    def render(self) -> str:
        if self.kind == "number":
            num = self.numeric_value
            text = str(int(num)) if float(num).is_integer() else str(num)
            return f"{text} {self.unit}" if self.unit else text
        if self.kind == "date":
            return self.date_value.isoformat()
        return str(self.payload())

    def to_json(self) -> dict:
        doc = {"kind": self.kind}
        if self.kind == "string":
            doc["value"] = self.string_value
        elif self.kind == "number":
            doc["value"] = self.numeric_value
            if self.unit is not None:
                doc["unit"] = self.unit
        elif self.kind == "year":
            doc["value"] = self.year_value
        else:
            doc["value"] = self.date_value.isoformat()
        return doc

    @staticmethod
    def from_json(doc: dict, location: str = "") -> "TypedValue":
        try:
            kind = doc["kind"]
            value = doc["value"]
        except (KeyError, TypeError) as exc:
            raise MalformedDocumentError(f"bad value object: {exc}", location)
        if kind == "string":
            return TypedValue.string(str(value))
        if kind == "number":
            return TypedValue.number(float(value), doc.get("unit"))
        if kind == "year":
            return TypedValue.year(int(value))
        if kind == "date":
            try:
                return TypedValue.date(datetime.date.fromisoformat(value))
            except ValueError as exc:
                raise MalformedDocumentError(str(exc), location)
        raise MalformedDocumentError(f"unknown value kind {kind!r}", location)


def parse_value_text(text: str, kind_hint: str | None = None) -> TypedValue:
    """Parse a planner-supplied literal like "206 centimetre", "2003", "1980-01-02"."""
    text = str(text).strip()
    if kind_hint == "string":
        return TypedValue.string(text)
    if kind_hint == "year":
        return TypedValue.year(int(text))
    if kind_hint == "date" or (
        kind_hint is None and _looks_like_date(text)
    ):
        return TypedValue.date(datetime.date.fromisoformat(text))
    parts = text.split()
    if parts and _is_number(parts[0]):
        number = float(parts[0])
        unit = " ".join(parts[1:]) or None
        if kind_hint == "number":
            return TypedValue.number(number, unit)
        if kind_hint is None and unit is None and number.is_integer() and 1000 <= number <= 2999:
            return TypedValue.year(int(number))
        if kind_hint is None:
            return TypedValue.number(number, unit)
    if kind_hint == "number":
        raise KindMismatchError(f"cannot parse {text!r} as a number")
    return TypedValue.string(text)


def _is_number(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def _looks_like_date(text: str) -> bool:
    try:
        datetime.date.fromisoformat(text)
        return True
    except ValueError:
        return False


def compare_typed(a: TypedValue, op: str, b: TypedValue) -> bool:
    """Compare two typed values. Strings support only = and !=; numbers need equal units."""
    op = _norm_op(op)
    if a.kind != b.kind:
        raise KindMismatchError(f"cannot compare {a.kind} with {b.kind}")
    if a.kind == "string":
        if op in ("<", ">"):
            raise UnsupportedOperatorError("strings support only = and !=")
        equal = a.string_value == b.string_value
        return equal if op == "=" else not equal
    if a.kind == "number" and a.unit != b.unit:
        raise UnitMismatchError(f"unit mismatch: {a.unit!r} vs {b.unit!r}")
    x, y = a.payload(), b.payload()
    if op == "=":
        return x == y
    if op == "!=":
        return x != y
    if op == "<":
        return x < y
    return x > y


@dataclass(frozen=True)
class AttributeFact:
    key: str
    value: TypedValue
    qualifiers: tuple[tuple[str, TypedValue], ...] = ()


@dataclass(frozen=True)
class RelationEdge:
    predicate: str
    direction: str  # "forward" or "backward"
    target: str  # entity id
    qualifiers: tuple[tuple[str, TypedValue], ...] = ()


@dataclass(frozen=True)
class Entity:
    id: str
    name: str
    instance_of: tuple[str, ...] = ()
    attributes: tuple[AttributeFact, ...] = ()
    relations: tuple[RelationEdge, ...] = ()


@dataclass(frozen=True)
class Concept:
    id: str
    name: str
    subclass_of: tuple[str, ...] = ()


@dataclass(frozen=True)
class KnowledgeBase:
    entities: dict[str, Entity] = field(default_factory=dict)
    concepts: dict[str, Concept] = field(default_factory=dict)
    name_index: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def entity_ids(self) -> list[str]:
        # insertion order is the deterministic tie-break order everywhere
        return list(self.entities)


def _parse_qualifiers(items, location) -> tuple[tuple[str, TypedValue], ...]:
    out = []
    for i, q in enumerate(items or []):
        if "key" not in q or "value" not in q:
            raise MalformedDocumentError("qualifier needs key and value", f"{location}.qualifiers[{i}]")
        out.append((q["key"], TypedValue.from_json(q["value"], f"{location}.qualifiers[{i}]")))
    return tuple(out)


def load_kb(path_or_doc) -> KnowledgeBase:
    """Load and validate a KB document (path, file object, or parsed dict)."""
    if isinstance(path_or_doc, dict):
        doc = path_or_doc
    elif hasattr(path_or_doc, "read"):
        doc = json.load(path_or_doc)
    else:
        with open(path_or_doc, encoding="utf-8") as fh:
            doc = json.load(fh)

    concepts: dict[str, Concept] = {}
    for i, c in enumerate(doc.get("concepts", [])):
        loc = f"concepts[{i}]"
        if "id" not in c or "name" not in c:
            raise MalformedDocumentError("concept needs id and name", loc)
        if c["id"] in concepts:
            raise MalformedDocumentError(f"duplicate concept id {c['id']!r}", loc)
        concepts[c["id"]] = Concept(
            id=c["id"], name=c["name"], subclass_of=tuple(c.get("subclass_of", []))
        )
    for c in concepts.values():
        for parent in c.subclass_of:
            if parent not in concepts:
                raise DanglingReferenceError(
                    f"concept {c.id!r} subclass_of unknown concept {parent!r}"
                )
    _check_acyclic_taxonomy(concepts)

    entities: dict[str, Entity] = {}
    for i, e in enumerate(doc.get("entities", [])):
        loc = f"entities[{i}]"
        if "id" not in e or "name" not in e:
            raise MalformedDocumentError("entity needs id and name", loc)
        if e["id"] in entities:
            raise MalformedDocumentError(f"duplicate entity id {e['id']!r}", loc)
        attributes = tuple(
            AttributeFact(
                key=a["key"],
                value=TypedValue.from_json(a["value"], f"{loc}.attributes[{j}]"),
                qualifiers=_parse_qualifiers(a.get("qualifiers"), f"{loc}.attributes[{j}]"),
            )
            for j, a in enumerate(e.get("attributes", []))
        )
        relations = []
        for j, r in enumerate(e.get("relations", [])):
            rloc = f"{loc}.relations[{j}]"
            direction = r.get("direction", "forward")
            if direction not in ("forward", "backward"):
                raise MalformedDocumentError(f"bad direction {direction!r}", rloc)
            relations.append(
                RelationEdge(
                    predicate=r["predicate"],
                    direction=direction,
                    target=r["target"],
                    qualifiers=_parse_qualifiers(r.get("qualifiers"), rloc),
                )
            )
        entities[e["id"]] = Entity(
            id=e["id"],
            name=e["name"],
            instance_of=tuple(e.get("instance_of", [])),
            attributes=attributes,
            relations=tuple(relations),
        )

    for e in entities.values():
        for cid in e.instance_of:
            if cid not in concepts:
                raise DanglingReferenceError(
                    f"entity {e.id!r} instance_of unknown concept {cid!r}"
                )
        for r in e.relations:
            if r.target not in entities:
                raise DanglingReferenceError(
                    f"entity {e.id!r} relation {r.predicate!r} targets unknown entity {r.target!r}"
                )

    name_index: dict[str, list[str]] = {}
    for e in entities.values():
        name_index.setdefault(e.name, []).append(e.id)
    return KnowledgeBase(
        entities=entities,
        concepts=concepts,
        name_index={k: tuple(v) for k, v in name_index.items()},
    )


def _check_acyclic_taxonomy(concepts: dict[str, Concept]) -> None:
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {cid: WHITE for cid in concepts}

    def visit(cid, stack):
        color[cid] = GRAY
        for parent in concepts[cid].subclass_of:
            if color[parent] == GRAY:
                raise CyclicTaxonomyError(
                    "cyclic subclass_of chain: " + " -> ".join(stack + [parent])
                )
            if color[parent] == WHITE:
                visit(parent, stack + [parent])
        color[cid] = BLACK

    for cid in concepts:
        if color[cid] == WHITE:
            visit(cid, [cid])


def serialize_kb(kb: KnowledgeBase) -> dict:
    return {
        "concepts": [
            {"id": c.id, "name": c.name, "subclass_of": list(c.subclass_of)}
            for c in kb.concepts.values()
        ],
        "entities": [
            {
                "id": e.id,
                "name": e.name,
                "instance_of": list(e.instance_of),
                "attributes": [
                    {
                        "key": a.key,
                        "value": a.value.to_json(),
                        "qualifiers": [
                            {"key": k, "value": v.to_json()} for k, v in a.qualifiers
                        ],
                    }
                    for a in e.attributes
                ],
                "relations": [
                    {
                        "predicate": r.predicate,
                        "direction": r.direction,
                        "target": r.target,
                        "qualifiers": [
                            {"key": k, "value": v.to_json()} for k, v in r.qualifiers
                        ],
                    }
                    for r in e.relations
                ],
            }
            for e in kb.entities.values()
        ],
    }


def concept_closure(kb: KnowledgeBase, concept_id: str) -> set[str]:
    """The concept plus all transitive subclasses (specializations match filters)."""
    if concept_id not in kb.concepts:
        raise UnknownConceptError(f"unknown concept {concept_id!r}")
    children: dict[str, list[str]] = {cid: [] for cid in kb.concepts}
    for c in kb.concepts.values():
        for parent in c.subclass_of:
            children[parent].append(c.id)
    closure = set()
    frontier = [concept_id]
    while frontier:
        cid = frontier.pop()
        if cid in closure:
            continue
        closure.add(cid)
        frontier.extend(children[cid])
    return closure
