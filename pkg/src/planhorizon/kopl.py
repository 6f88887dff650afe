"""Deterministic interpreter for the 27 KoPL tools over a KnowledgeBase.

Every tool returns a ToolOutcome; an empty entity-set result is a failure
(except Count, whose zero is a valid value). Tie-breaking is KB insertion
order throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

from .grounding import Grounder, format_candidate_feedback
from .kb import (
    KnowledgeBase,
    TypedValue,
    compare_typed,
    concept_closure,
    parse_value_text,
    KBError,
)
from .outcome import ToolOutcome


class ContractViolationError(Exception):
    """An engine precondition was violated by the caller (not a tool failure)."""


class ProgramError(Exception):
    pass


@dataclass(frozen=True)
class EntitySet:
    """Ordered, duplicate-free entity ids; optionally paired with admitting facts."""

    ids: tuple[str, ...]
    facts: tuple[tuple, ...] | None = None  # one fact tuple per id, same order

    def __post_init__(self):
        if len(set(self.ids)) != len(self.ids):
            raise ContractViolationError("duplicate ids in EntitySet")
        if self.facts is not None and len(self.facts) != len(self.ids):
            raise ContractViolationError("facts must pair one list per entity")

    def __len__(self):
        return len(self.ids)


@dataclass(frozen=True)
class KoplStep:
    tool: str
    args: dict
    inputs: tuple[int, ...] = ()


@dataclass(frozen=True)
class KoplProgram:
    steps: tuple[KoplStep, ...]


# ---------------------------------------------------------------------------
# Tool catalog: the 27 canonical names with parameter kinds.
# "set" / "value-ref" parameters carry $i step references in plans.

_CATALOG_SPEC = [
    ("FindAll", [], "Look up and return the set of all entities"),
    ("Find", [("name", "string")], "Look up and return the entity set with the given name"),
    ("FilterConcept", [("entities", "set"), ("concept", "string")],
     "Filter the input entity set to instances of a concept (including subclasses)"),
    ("FilterStr", [("entities", "set"), ("key", "string"), ("value", "string")],
     "Filter the input entity set by a string attribute condition"),
    ("FilterNum", [("entities", "set"), ("key", "string"), ("value", "string"), ("op", "op")],
     "Filter the input entity set by a numeric attribute condition"),
    ("FilterYear", [("entities", "set"), ("key", "string"), ("value", "string"), ("op", "op")],
     "Filter the input entity set by a year attribute condition"),
    ("FilterDate", [("entities", "set"), ("key", "string"), ("value", "string"), ("op", "op")],
     "Filter the input entity set by a date attribute condition"),
    ("QFilterStr", [("entities", "set"), ("qkey", "string"), ("qvalue", "string")],
     "Filter the input entity set by a string qualifier of the admitting facts"),
    ("QFilterNum", [("entities", "set"), ("qkey", "string"), ("qvalue", "string"), ("op", "op")],
     "Filter the input entity set by a numeric qualifier of the admitting facts"),
    ("QFilterYear", [("entities", "set"), ("qkey", "string"), ("qvalue", "string"), ("op", "op")],
     "Filter the input entity set by a year qualifier of the admitting facts"),
    ("QFilterDate", [("entities", "set"), ("qkey", "string"), ("qvalue", "string"), ("op", "op")],
     "Filter the input entity set by a date qualifier of the admitting facts"),
    ("Relate", [("entities", "set"), ("relation", "string"), ("direction", "direction")],
     "Traverse to the entity set connected via a specified relation"),
    ("And", [("left", "set"), ("right", "set")], "Take the intersection of two entity sets"),
    ("Or", [("left", "set"), ("right", "set")], "Take the union of two entity sets"),
    ("Count", [("entities", "set")], "Count an entity set"),
    ("SelectAmong", [("entities", "set"), ("key", "string"), ("mode", "mode")],
     "Select the entity with the largest or smallest attribute among a set"),
    ("SelectBetween", [("left", "set"), ("right", "set"), ("key", "string"), ("mode", "mode")],
     "Select from two entities the one whose attribute is greater or less"),
    ("VerifyStr", [("input", "value-ref"), ("value", "string")],
     "Verify that the queried string attribute equals a value"),
    ("VerifyNum", [("input", "value-ref"), ("value", "string"), ("op", "op")],
     "Verify that the queried numeric attribute meets a criterion"),
    ("VerifyYear", [("input", "value-ref"), ("value", "string"), ("op", "op")],
     "Verify that the queried year attribute meets a criterion"),
    ("VerifyDate", [("input", "value-ref"), ("value", "string"), ("op", "op")],
     "Verify that the queried date attribute meets a criterion"),
    ("QueryName", [("entities", "set")], "Access the name of the input entity set"),
    ("QueryRelation", [("left", "set"), ("right", "set")],
     "Access the relation between two entities"),
    ("QueryAttr", [("entities", "set"), ("key", "string")],
     "Access a specified attribute value of the input entity set"),
    ("QueryAttrUnderCondition", [("entities", "set"), ("key", "string"),
                                 ("qkey", "string"), ("qvalue", "string")],
     "Access an attribute value whose fact carries a given qualifier"),
    ("QueryAttrQualifier", [("entities", "set"), ("key", "string"),
                            ("value", "string"), ("qkey", "string")],
     "Access a qualifier value of a specified attribute fact"),
    ("QueryRelationQualifier", [("left", "set"), ("right", "set"),
                                ("relation", "string"), ("qkey", "string")],
     "Access a qualifier value of a specified relation fact"),
]

KOPL_TOOLS = tuple(name for name, _, _ in _CATALOG_SPEC)
_PARAMS = {name: params for name, params, _ in _CATALOG_SPEC}


def kopl_catalog() -> list[dict]:
    """Machine-readable tool catalog embedded in policy prompts."""
    return [
        {
            "name": name,
            "params": [{"name": p, "kind": k} for p, k in params],
            "description": desc,
        }
        for name, params, desc in _CATALOG_SPEC
    ]


def ref_params(tool: str) -> list[str]:
    """Names of parameters that carry step references, in positional order."""
    return [p for p, k in _PARAMS[tool] if k in ("set", "value-ref")]


# ---------------------------------------------------------------------------
# Core operations

_FILTER_KIND = {"FilterStr": "string", "FilterNum": "number",
                "FilterYear": "year", "FilterDate": "date"}
_QFILTER_KIND = {"QFilterStr": "string", "QFilterNum": "number",
                 "QFilterYear": "year", "QFilterDate": "date"}
_VERIFY_KIND = {"VerifyStr": "string", "VerifyNum": "number",
                "VerifyYear": "year", "VerifyDate": "date"}


def find_all(kb: KnowledgeBase) -> ToolOutcome:
    ids = tuple(kb.entities)
    if not ids:
        return ToolOutcome.failure("the knowledge base contains no entities")
    return ToolOutcome.success(EntitySet(ids))


def find(kb: KnowledgeBase, grounder: Grounder, name: str) -> ToolOutcome:
    result = grounder.ground(name, "entity-name")
    if not result.ok:
        return ToolOutcome.failure(
            format_candidate_feedback(result, name, "entity-name"),
            result.candidates,
        )
    ids = kb.name_index.get(result.matched_term, ())
    if not ids:
        return ToolOutcome.failure(f"no entity named {name!r}")
    return ToolOutcome.success(EntitySet(tuple(ids)))


def filter_concept(kb: KnowledgeBase, grounder: Grounder, entities: EntitySet,
                   concept: str) -> ToolOutcome:
    result = grounder.ground(concept, "concept")
    if not result.ok:
        return ToolOutcome.failure(
            format_candidate_feedback(result, concept, "concept"), result.candidates
        )
    by_name = [c.id for c in kb.concepts.values() if c.name == result.matched_term]
    closure: set[str] = set()
    for cid in by_name:
        closure |= concept_closure(kb, cid)
    kept = tuple(i for i in entities.ids if set(kb.entities[i].instance_of) & closure)
    if not kept:
        return ToolOutcome.failure(f"no entities are instances of {concept!r}")
    return ToolOutcome.success(EntitySet(kept))


def _comparable(fact_value: TypedValue, op: str, target: TypedValue) -> bool:
    try:
        return compare_typed(fact_value, op, target)
    except KBError:
        return False  # facts of another kind/unit simply do not match


def filter_attribute(kb: KnowledgeBase, grounder: Grounder, entities: EntitySet,
                     key: str, target: TypedValue, op: str = "=") -> ToolOutcome:
    result = grounder.ground(key, "attribute-key")
    if not result.ok:
        return ToolOutcome.failure(
            format_candidate_feedback(result, key, "attribute-key"), result.candidates
        )
    key = result.matched_term
    kept_ids, kept_facts = [], []
    for eid in entities.ids:
        admitting = tuple(
            fact for fact in kb.entities[eid].attributes
            if fact.key == key and _comparable(fact.value, op, target)
        )
        if admitting:
            kept_ids.append(eid)
            kept_facts.append(admitting)
    if not kept_ids:
        return ToolOutcome.failure(
            f"no entities satisfy {key} {op} {target.render()}"
        )
    return ToolOutcome.success(EntitySet(tuple(kept_ids), tuple(kept_facts)))


def qualifier_filter(grounder: Grounder, entities: EntitySet, qkey: str,
                     qvalue: TypedValue, op: str = "=") -> ToolOutcome:
    if entities.facts is None:
        raise ContractViolationError(
            "qualifier filters need the admitting facts of the previous filter"
        )
    result = grounder.ground(qkey, "qualifier-key")
    if not result.ok:
        return ToolOutcome.failure(
            format_candidate_feedback(result, qkey, "qualifier-key"), result.candidates
        )
    qkey = result.matched_term
    kept_ids, kept_facts = [], []
    for eid, facts in zip(entities.ids, entities.facts):
        admitting = tuple(
            fact for fact in facts
            if any(k == qkey and _comparable(v, op, qvalue) for k, v in fact.qualifiers)
        )
        if admitting:
            kept_ids.append(eid)
            kept_facts.append(admitting)
    if not kept_ids:
        return ToolOutcome.failure(
            f"no admitting facts carry qualifier {qkey} {op} {qvalue.render()}"
        )
    return ToolOutcome.success(EntitySet(tuple(kept_ids), tuple(kept_facts)))


def _neighbors(kb: KnowledgeBase, eid: str, predicate: str, direction: str):
    """Targets reachable from eid via predicate in the given direction."""
    flip = "backward" if direction == "forward" else "forward"
    out = []
    for edge in kb.entities[eid].relations:
        if edge.predicate == predicate and edge.direction == direction:
            out.append((edge.target, edge))
    for other in kb.entities.values():
        if other.id == eid:
            continue
        for edge in other.relations:
            if edge.predicate == predicate and edge.direction == flip and edge.target == eid:
                out.append((other.id, edge))
    return out


def relate(kb: KnowledgeBase, grounder: Grounder, entities: EntitySet,
           relation: str, direction: str = "forward") -> ToolOutcome:
    if direction not in ("forward", "backward"):
        raise ContractViolationError(f"bad direction {direction!r}")
    result = grounder.ground(relation, "relation")
    if not result.ok:
        return ToolOutcome.failure(
            format_candidate_feedback(result, relation, "relation"), result.candidates
        )
    predicate = result.matched_term
    seen: dict[str, list] = {}
    order = []
    for eid in entities.ids:
        for target, edge in _neighbors(kb, eid, predicate, direction):
            if target not in seen:
                seen[target] = []
                order.append(target)
            seen[target].append(edge)
    # deterministic order: KB insertion order
    ordered = [i for i in kb.entities if i in seen]
    if not ordered:
        return ToolOutcome.failure(f"no entities connected via {relation!r}")
    return ToolOutcome.success(
        EntitySet(tuple(ordered), tuple(tuple(seen[i]) for i in ordered))
    )


def set_op(kb: KnowledgeBase, a: EntitySet, b: EntitySet, kind: str) -> ToolOutcome:
    if kind == "and":
        ids = tuple(i for i in a.ids if i in set(b.ids))
        if not ids:
            return ToolOutcome.failure("the intersection is empty")
    elif kind == "or":
        ids = tuple(a.ids) + tuple(i for i in b.ids if i not in set(a.ids))
        if not ids:
            return ToolOutcome.failure("the union of two empty sets is empty")
    else:
        raise ContractViolationError(f"bad set operation {kind!r}")
    return ToolOutcome.success(EntitySet(ids))


def count(entities: EntitySet) -> ToolOutcome:
    return ToolOutcome.success(len(entities.ids))  # zero is a valid value


def _number_attr(kb: KnowledgeBase, eid: str, key: str) -> TypedValue | None:
    for fact in kb.entities[eid].attributes:
        if fact.key == key and fact.value.kind == "number":
            return fact.value
    return None


def select_between(kb: KnowledgeBase, grounder: Grounder, a: EntitySet,
                   b: EntitySet, key: str, mode: str) -> ToolOutcome:
    if not a.ids or not b.ids:
        return ToolOutcome.failure("SelectBetween needs two nonempty entity sets")
    if mode not in ("greater", "less"):
        raise ContractViolationError(f"bad mode {mode!r}")
    result = grounder.ground(key, "attribute-key")
    if not result.ok:
        return ToolOutcome.failure(
            format_candidate_feedback(result, key, "attribute-key"), result.candidates
        )
    key = result.matched_term
    # non-singleton inputs take the first element of each (ambiguity noted)
    ea, eb = a.ids[0], b.ids[0]
    va, vb = _number_attr(kb, ea, key), _number_attr(kb, eb, key)
    if va is None or vb is None:
        missing = ea if va is None else eb
        return ToolOutcome.failure(
            f"entity {kb.entities[missing].name!r} has no numeric attribute {key!r}"
        )
    if va.unit != vb.unit:
        return ToolOutcome.failure(
            f"unit mismatch comparing {key!r}: {va.unit!r} vs {vb.unit!r}"
        )
    op = ">" if mode == "greater" else "<"
    winner = ea if compare_typed(va, op, vb) else eb
    if va.numeric_value == vb.numeric_value:
        winner = ea  # tie breaks toward the first operand
    return ToolOutcome.success(kb.entities[winner].name)


def select_among(kb: KnowledgeBase, grounder: Grounder, entities: EntitySet,
                 key: str, mode: str) -> ToolOutcome:
    if not entities.ids:
        return ToolOutcome.failure("SelectAmong needs a nonempty entity set")
    if mode not in ("largest", "smallest"):
        raise ContractViolationError(f"bad mode {mode!r}")
    result = grounder.ground(key, "attribute-key")
    if not result.ok:
        return ToolOutcome.failure(
            format_candidate_feedback(result, key, "attribute-key"), result.candidates
        )
    key = result.matched_term
    valued = [(eid, _number_attr(kb, eid, key)) for eid in entities.ids]
    valued = [(eid, v) for eid, v in valued if v is not None]
    if not valued:
        return ToolOutcome.failure(f"no entity in the set has numeric attribute {key!r}")
    units = {v.unit for _, v in valued}
    if len(units) > 1:
        return ToolOutcome.failure(f"unit mismatch across {key!r}: {sorted(map(str, units))}")
    best = valued[0]
    for eid, v in valued[1:]:
        if (mode == "largest" and v.numeric_value > best[1].numeric_value) or (
            mode == "smallest" and v.numeric_value < best[1].numeric_value
        ):
            best = (eid, v)
    return ToolOutcome.success(kb.entities[best[0]].name)


def verify(queried: TypedValue, target: TypedValue, op: str = "=") -> ToolOutcome:
    try:
        return ToolOutcome.success("yes" if compare_typed(queried, op, target) else "no")
    except KBError as exc:
        return ToolOutcome.failure(f"cannot verify: {exc}")


def query_name(kb: KnowledgeBase, entities: EntitySet) -> ToolOutcome:
    if not entities.ids:
        return ToolOutcome.failure("cannot query the name of an empty entity set")
    names = tuple(kb.entities[i].name for i in entities.ids)
    return ToolOutcome.success(names[0], details=names)


def query_attr(kb: KnowledgeBase, grounder: Grounder, entities: EntitySet,
               key: str) -> ToolOutcome:
    if not entities.ids:
        return ToolOutcome.failure("cannot query an attribute of an empty entity set")
    result = grounder.ground(key, "attribute-key")
    if not result.ok:
        return ToolOutcome.failure(
            format_candidate_feedback(result, key, "attribute-key"), result.candidates
        )
    key = result.matched_term
    values = tuple(
        fact.value
        for eid in entities.ids
        for fact in kb.entities[eid].attributes
        if fact.key == key
    )
    if not values:
        return ToolOutcome.failure(f"no value for attribute {key!r}")
    return ToolOutcome.success(values[0], details=values)


def query_attr_under_condition(kb: KnowledgeBase, grounder: Grounder,
                               entities: EntitySet, key: str, qkey: str,
                               qvalue: TypedValue) -> ToolOutcome:
    for namespace, term in (("attribute-key", key), ("qualifier-key", qkey)):
        res = grounder.ground(term, namespace)
        if not res.ok:
            return ToolOutcome.failure(
                format_candidate_feedback(res, term, namespace), res.candidates
            )
        if namespace == "attribute-key":
            key = res.matched_term
        else:
            qkey = res.matched_term
    values = tuple(
        fact.value
        for eid in entities.ids
        for fact in kb.entities[eid].attributes
        if fact.key == key
        and any(k == qkey and _comparable(v, "=", qvalue) for k, v in fact.qualifiers)
    )
    if not values:
        return ToolOutcome.failure(
            f"no {key!r} fact carries qualifier {qkey} = {qvalue.render()}"
        )
    return ToolOutcome.success(values[0], details=values)


def query_relation(kb: KnowledgeBase, a: EntitySet, b: EntitySet) -> ToolOutcome:
    if not a.ids or not b.ids:
        return ToolOutcome.failure("QueryRelation needs two nonempty entity sets")
    ea, eb = a.ids[0], b.ids[0]
    predicates = []
    for edge in kb.entities[ea].relations:
        if edge.direction == "forward" and edge.target == eb:
            predicates.append(edge.predicate)
    for edge in kb.entities[eb].relations:
        if edge.direction == "backward" and edge.target == ea:
            predicates.append(edge.predicate)
    if not predicates:
        return ToolOutcome.failure(
            f"no relation from {kb.entities[ea].name!r} to {kb.entities[eb].name!r}"
        )
    return ToolOutcome.success(predicates[0], details=tuple(predicates))


def query_attr_qualifier(kb: KnowledgeBase, grounder: Grounder, entities: EntitySet,
                         key: str, value: TypedValue, qkey: str) -> ToolOutcome:
    for namespace, term in (("attribute-key", key), ("qualifier-key", qkey)):
        res = grounder.ground(term, namespace)
        if not res.ok:
            return ToolOutcome.failure(
                format_candidate_feedback(res, term, namespace), res.candidates
            )
        if namespace == "attribute-key":
            key = res.matched_term
        else:
            qkey = res.matched_term
    found = tuple(
        qv
        for eid in entities.ids
        for fact in kb.entities[eid].attributes
        if fact.key == key and _comparable(fact.value, "=", value)
        for qk, qv in fact.qualifiers
        if qk == qkey
    )
    if not found:
        return ToolOutcome.failure(
            f"no qualifier {qkey!r} on fact {key} = {value.render()}"
        )
    return ToolOutcome.success(found[0], details=found)


def query_relation_qualifier(kb: KnowledgeBase, grounder: Grounder, a: EntitySet,
                             b: EntitySet, relation: str, qkey: str) -> ToolOutcome:
    for namespace, term in (("relation", relation), ("qualifier-key", qkey)):
        res = grounder.ground(term, namespace)
        if not res.ok:
            return ToolOutcome.failure(
                format_candidate_feedback(res, term, namespace), res.candidates
            )
        if namespace == "relation":
            relation = res.matched_term
        else:
            qkey = res.matched_term
    if not a.ids or not b.ids:
        return ToolOutcome.failure("QueryRelationQualifier needs two nonempty sets")
    ea, eb = a.ids[0], b.ids[0]
    found = []
    for edge in kb.entities[ea].relations:
        if edge.predicate == relation and edge.direction == "forward" and edge.target == eb:
            found.extend(qv for qk, qv in edge.qualifiers if qk == qkey)
    for edge in kb.entities[eb].relations:
        if edge.predicate == relation and edge.direction == "backward" and edge.target == ea:
            found.extend(qv for qk, qv in edge.qualifiers if qk == qkey)
    if not found:
        return ToolOutcome.failure(
            f"no qualifier {qkey!r} on the {relation!r} relation"
        )
    return ToolOutcome.success(found[0], details=tuple(found))


# ---------------------------------------------------------------------------
# Dispatch

def run_tool(kb: KnowledgeBase, grounder: Grounder, tool: str, args: dict) -> ToolOutcome:
    """Execute one KoPL tool. Set/value-ref args must already be resolved objects."""
    if tool not in _PARAMS:
        raise ProgramError(f"unknown KoPL tool {tool!r}")

    def val(name, kind):
        return parse_value_text(args[name], kind)

    if tool == "FindAll":
        return find_all(kb)
    if tool == "Find":
        return find(kb, grounder, args["name"])
    if tool == "FilterConcept":
        return filter_concept(kb, grounder, args["entities"], args["concept"])
    if tool in _FILTER_KIND:
        kind = _FILTER_KIND[tool]
        op = args.get("op", "=") if kind != "string" else "="
        return filter_attribute(kb, grounder, args["entities"], args["key"],
                                val("value", kind), op)
    if tool in _QFILTER_KIND:
        kind = _QFILTER_KIND[tool]
        op = args.get("op", "=") if kind != "string" else "="
        return qualifier_filter(grounder, args["entities"], args["qkey"],
                                val("qvalue", kind), op)
    if tool == "Relate":
        return relate(kb, grounder, args["entities"], args["relation"],
                      args.get("direction", "forward"))
    if tool == "And":
        return set_op(kb, args["left"], args["right"], "and")
    if tool == "Or":
        return set_op(kb, args["left"], args["right"], "or")
    if tool == "Count":
        return count(args["entities"])
    if tool == "SelectAmong":
        return select_among(kb, grounder, args["entities"], args["key"], args["mode"])
    if tool == "SelectBetween":
        return select_between(kb, grounder, args["left"], args["right"],
                              args["key"], args["mode"])
    if tool in _VERIFY_KIND:
        kind = _VERIFY_KIND[tool]
        queried = args["input"]
        if not isinstance(queried, TypedValue):
            return ToolOutcome.failure("Verify needs a queried attribute value as input")
        op = args.get("op", "=") if kind != "string" else "="
        return verify(queried, val("value", kind), op)
    if tool == "QueryName":
        return query_name(kb, args["entities"])
    if tool == "QueryRelation":
        return query_relation(kb, args["left"], args["right"])
    if tool == "QueryAttr":
        return query_attr(kb, grounder, args["entities"], args["key"])
    if tool == "QueryAttrUnderCondition":
        return query_attr_under_condition(kb, grounder, args["entities"], args["key"],
                                          args["qkey"], parse_value_text(args["qvalue"]))
    if tool == "QueryAttrQualifier":
        return query_attr_qualifier(kb, grounder, args["entities"], args["key"],
                                    parse_value_text(args["value"]), args["qkey"])
    if tool == "QueryRelationQualifier":
        return query_relation_qualifier(kb, grounder, args["left"], args["right"],
                                        args["relation"], args["qkey"])
    raise ProgramError(f"unhandled tool {tool!r}")  # pragma: no cover


def validate_program(program: KoplProgram) -> None:
    for i, step in enumerate(program.steps):
        if step.tool not in _PARAMS:
            raise ProgramError(f"step {i}: unknown tool {step.tool!r}")
        for j in step.inputs:
            if not (0 <= j < i):
                raise ProgramError(
                    f"step {i}: input {j} does not reference a strictly earlier step"
                )
        if len(step.inputs) != len(ref_params(step.tool)):
            raise ProgramError(
                f"step {i}: {step.tool} expects {len(ref_params(step.tool))} inputs, "
                f"got {len(step.inputs)}"
            )


def execute_program(kb: KnowledgeBase, grounder: Grounder,
                    program: KoplProgram) -> ToolOutcome:
    """Evaluate steps in order, threading outputs by input index."""
    validate_program(program)
    results: list = []
    for i, step in enumerate(program.steps):
        args = dict(step.args)
        for param, j in zip(ref_params(step.tool), step.inputs):
            args[param] = results[j]
        outcome = run_tool(kb, grounder, step.tool, args)
        if not outcome.ok:
            return ToolOutcome.failure(
                f"step {i} ({step.tool}) failed: {outcome.feedback}",
                outcome.candidates,
            )
        results.append(outcome.value)
    return ToolOutcome.success(results[-1]) if results else ToolOutcome.failure(
        "empty program"
    )


def render_value(kb: KnowledgeBase | None, value) -> str:
    """Render any tool output as answer/observation text."""
    if isinstance(value, EntitySet):
        if kb is not None:
            names = [kb.entities[i].name for i in value.ids]
        else:
            names = list(value.ids)
        return "; ".join(names)
    if isinstance(value, TypedValue):
        return value.render()
    return str(value)
