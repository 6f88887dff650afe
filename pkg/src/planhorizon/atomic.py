"""The seven atomic query tools, their S-expression compilation, and an
in-memory graph store that evaluates the same semantics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .grounding import Grounder, format_candidate_feedback
from .kb import (
    KBError,
    MalformedDocumentError,
    TypedValue,
    compare_typed,
    parse_value_text,
)
from .outcome import ToolOutcome


class SExprError(Exception):
    pass


@dataclass(frozen=True)
class GraphNode:
    id: str
    name: str
    classes: tuple[str, ...] = ()


@dataclass(frozen=True)
class GraphStore:
    nodes: dict[str, GraphNode] = field(default_factory=dict)
    triples: tuple[tuple, ...] = ()  # (subject-id, predicate, node-id | TypedValue)

    def node_order(self, ids) -> tuple[str, ...]:
        wanted = set(ids)
        return tuple(i for i in self.nodes if i in wanted)


def load_graph(path_or_doc) -> GraphStore:
    if isinstance(path_or_doc, dict):
        doc = path_or_doc
    else:
        with open(path_or_doc, encoding="utf-8") as fh:
            doc = json.load(fh)
    nodes = {}
    for i, n in enumerate(doc.get("nodes", [])):
        if "id" not in n or "name" not in n:
            raise MalformedDocumentError("node needs id and name", f"nodes[{i}]")
        nodes[n["id"]] = GraphNode(n["id"], n["name"], tuple(n.get("classes", [])))
    triples = []
    for i, t in enumerate(doc.get("triples", [])):
        loc = f"triples[{i}]"
        if t.get("s") not in nodes:
            raise MalformedDocumentError(f"unknown subject {t.get('s')!r}", loc)
        if "o_node" in t:
            if t["o_node"] not in nodes:
                raise MalformedDocumentError(f"unknown object {t['o_node']!r}", loc)
            obj = t["o_node"]
        elif "o_literal" in t:
            obj = TypedValue.from_json(t["o_literal"], loc)
        else:
            raise MalformedDocumentError("triple needs o_node or o_literal", loc)
        triples.append((t["s"], t["p"], obj))
    return GraphStore(nodes=nodes, triples=tuple(triples))


@dataclass(frozen=True)
class NodeSet:
    ids: tuple[str, ...]

    def __len__(self):
        return len(self.ids)


# ---------------------------------------------------------------------------
# S-expressions

HEADS = ("JOIN", "AND", "ARGMIN", "ARGMAX", "LT", "LE", "GT", "GE", "TC", "COUNT")
_ARITY = {"JOIN": 3, "AND": 2, "ARGMIN": 2, "ARGMAX": 2,
          "LT": 2, "LE": 2, "GT": 2, "GE": 2, "TC": 3, "COUNT": 1}

_OP_TO_HEAD = {"<": "LT", "<=": "LE", "≤": "LE", ">": "GT", ">=": "GE", "≥": "GE"}


@dataclass(frozen=True)
class Seed:
    """A leaf term: an entity mention, class name, or typed literal text."""

    text: str


@dataclass(frozen=True)
class App:
    head: str
    args: tuple

    def __post_init__(self):
        if self.head not in HEADS:
            raise SExprError(f"unknown head {self.head!r}")
        if len(self.args) != _ARITY[self.head]:
            raise SExprError(
                f"{self.head} takes {_ARITY[self.head]} arguments, got {len(self.args)}"
            )


SExpr = Seed | App


def _token(text: str) -> str:
    if any(ch in text for ch in ' ()"'):
        return '"' + text.replace('"', '\\"') + '"'
    return text


def serialize_sexpr(expr: SExpr) -> str:
    if isinstance(expr, Seed):
        return _token(expr.text)
    parts = [expr.head]
    for arg in expr.args:
        parts.append(serialize_sexpr(arg) if isinstance(arg, (Seed, App)) else _token(str(arg)))
    return "(" + " ".join(parts) + ")"


def parse_sexpr(text: str) -> SExpr:
    tokens = _tokenize(text)
    expr, rest = _parse_tokens(tokens)
    if rest:
        raise SExprError(f"trailing tokens: {rest!r}")
    return expr


def _tokenize(text: str) -> list[str]:
    tokens, i = [], 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()":
            tokens.append(ch)
            i += 1
        elif ch == '"':
            j, buf = i + 1, []
            while j < len(text) and text[j] != '"':
                if text[j] == "\\" and j + 1 < len(text):
                    j += 1
                buf.append(text[j])
                j += 1
            if j >= len(text):
                raise SExprError("unterminated string")
            tokens.append('"' + "".join(buf))
            i = j + 1
        else:
            j = i
            while j < len(text) and not text[j].isspace() and text[j] not in '()"':
                j += 1
            tokens.append(text[i:j])
            i = j
    return tokens


def _parse_tokens(tokens: list[str]):
    if not tokens:
        raise SExprError("empty expression")
    head, rest = tokens[0], tokens[1:]
    if head == "(":
        if not rest or rest[0] in "()":
            raise SExprError("expected a head symbol after '('")
        name, rest = rest[0], rest[1:]
        args = []
        while rest and rest[0] != ")":
            arg, rest = _parse_tokens(rest)
            args.append(arg)
        if not rest:
            raise SExprError("missing ')'")
        return App(name, tuple(args)), rest[1:]
    if head == ")":
        raise SExprError("unexpected ')'")
    return Seed(head[1:] if head.startswith('"') else head), rest


# ---------------------------------------------------------------------------
# Tool catalog

_CATALOG_SPEC = [
    ("Extract_entity", [("input", "string")],
     "Resolve an input (entity mention, entity class, or literal) to node ids or a typed literal"),
    ("Find_relation", [("relation", "string"), ("direction", "direction"), ("target", "set")],
     "Find entities that point to the given target entities via the specified relation"),
    ("Merge", [("input1", "set"), ("input2", "set")],
     "Compute set intersection of two entity sets"),
    ("Order", [("mode", "mode"), ("input", "set"), ("property", "string")],
     "Find entities with maximum or minimum property value"),
    ("Compare", [("operator", "op"), ("property", "string"), ("literal", "string")],
     "Find entities whose property compares to a literal"),
    ("Time_constraint", [("input", "set"), ("relation", "string"), ("literal", "string")],
     "Filter an input entity set by equality of a temporal property to a year, or 'NOW'"),
    ("Count", [("input", "set")], "Count the number of input entities"),
]

ATOMIC_TOOLS = tuple(name for name, _, _ in _CATALOG_SPEC)
_PARAMS = {name: params for name, params, _ in _CATALOG_SPEC}


def atomic_catalog() -> list[dict]:
    return [
        {"name": name,
         "params": [{"name": p, "kind": k} for p, k in params],
         "description": desc}
        for name, params, desc in _CATALOG_SPEC
    ]


def ref_params(tool: str) -> list[str]:
    return [p for p, k in _PARAMS[tool] if k == "set"]


# ---------------------------------------------------------------------------
# Operations

def _looks_like_literal(text: str) -> bool:
    head = text.split()[0] if text.split() else ""
    try:
        float(head)
        return True
    except ValueError:
        pass
    try:
        import datetime

        datetime.date.fromisoformat(text.strip())
        return True
    except ValueError:
        return False


def extract_entity(store: GraphStore, grounder: Grounder, text: str) -> ToolOutcome:
    if _looks_like_literal(text):
        return ToolOutcome.success(parse_value_text(text))
    name_result = grounder.ground(text, "entity-name")
    if name_result.ok:
        ids = store.node_order(
            [n.id for n in store.nodes.values() if n.name == name_result.matched_term]
        )
        if ids:
            return ToolOutcome.success(NodeSet(ids))
    class_result = grounder.ground(text, "concept")
    if class_result.ok:
        ids = store.node_order(
            [n.id for n in store.nodes.values() if class_result.matched_term in n.classes]
        )
        if ids:
            return ToolOutcome.success(NodeSet(ids))
    return ToolOutcome.failure(
        format_candidate_feedback(name_result, text, "entity-name"),
        name_result.candidates,
    )


def find_relation(store: GraphStore, grounder: Grounder, relation: str,
                  direction: str, target: NodeSet) -> ToolOutcome:
    if not target.ids:
        return ToolOutcome.failure("Find_relation needs a nonempty target set")
    result = grounder.ground(relation, "relation")
    if not result.ok:
        return ToolOutcome.failure(
            format_candidate_feedback(result, relation, "relation"), result.candidates
        )
    predicate = result.matched_term
    wanted = set(target.ids)
    found = []
    for s, p, o in store.triples:
        if p != predicate:
            continue
        if direction == "forward" and isinstance(o, str) and o in wanted:
            found.append(s)
        elif direction == "backward" and s in wanted and isinstance(o, str):
            found.append(o)
    ids = store.node_order(found)
    if not ids:
        return ToolOutcome.failure(f"no entities connected via {relation!r}")
    return ToolOutcome.success(NodeSet(ids))


def merge(a: NodeSet, b: NodeSet) -> ToolOutcome:
    other = set(b.ids)
    ids = tuple(i for i in a.ids if i in other)
    if not ids:
        return ToolOutcome.failure("the intersection is empty")
    return ToolOutcome.success(NodeSet(ids))


def _property_values(store: GraphStore, ids, prop: str):
    out = []
    for nid in ids:
        for s, p, o in store.triples:
            if s == nid and p == prop and isinstance(o, TypedValue):
                out.append((nid, o))
                break
    return out


def order(store: GraphStore, grounder: Grounder, mode: str, nodes: NodeSet,
          prop: str) -> ToolOutcome:
    if mode not in ("argmin", "argmax"):
        return ToolOutcome.failure(f"Order mode must be argmin or argmax, got {mode!r}")
    result = grounder.ground(prop, "relation")
    if not result.ok:
        return ToolOutcome.failure(
            format_candidate_feedback(result, prop, "relation"), result.candidates
        )
    valued = _property_values(store, nodes.ids, result.matched_term)
    if not valued:
        return ToolOutcome.failure(f"no node in the set has property {prop!r}")
    units = {v.unit for _, v in valued if v.kind == "number"}
    if len(units) > 1:
        return ToolOutcome.failure(f"unit mismatch across {prop!r}")
    key = lambda pair: pair[1].payload()
    extreme = (min if mode == "argmin" else max)(valued, key=key)[1].payload()
    ids = store.node_order([nid for nid, v in valued if v.payload() == extreme])
    return ToolOutcome.success(NodeSet(ids))  # ties keep all extrema


def compare(store: GraphStore, grounder: Grounder, operator: str, prop: str,
            literal: TypedValue) -> ToolOutcome:
    operator = {"≤": "<=", "≥": ">="}.get(operator, operator)
    if operator not in ("<", "<=", ">", ">="):
        return ToolOutcome.failure("Compare operator must be one of <, <=, >, >=")
    result = grounder.ground(prop, "relation")
    if not result.ok:
        return ToolOutcome.failure(
            format_candidate_feedback(result, prop, "relation"), result.candidates
        )
    prop = result.matched_term
    found = []
    for s, p, o in store.triples:
        if p != prop or not isinstance(o, TypedValue):
            continue
        try:
            strict = compare_typed(o, operator.rstrip("="), literal)
            equal = compare_typed(o, "=", literal)
        except KBError:
            continue  # incomparable values are skipped
        if strict or (operator.endswith("=") and equal):
            found.append(s)
    ids = store.node_order(found)
    if not ids:
        return ToolOutcome.failure(
            f"no entities with {prop} {operator} {literal.render()}"
        )
    return ToolOutcome.success(NodeSet(ids))


def time_constraint(store: GraphStore, grounder: Grounder, nodes: NodeSet,
                    relation: str, literal: str, eval_year: int) -> ToolOutcome:
    result = grounder.ground(relation, "relation")
    if not result.ok:
        return ToolOutcome.failure(
            format_candidate_feedback(result, relation, "relation"), result.candidates
        )
    relation = result.matched_term
    year = eval_year if str(literal).strip().upper() == "NOW" else int(str(literal).strip())
    kept = []
    for nid in nodes.ids:
        for s, p, o in store.triples:
            if s == nid and p == relation and isinstance(o, TypedValue):
                matches = (o.kind == "year" and o.year_value == year) or (
                    o.kind == "date" and o.date_value.year == year
                )
                if matches:
                    kept.append(nid)
                    break
    ids = store.node_order(kept)
    if not ids:
        return ToolOutcome.failure(f"no entities satisfy {relation} = {year}")
    return ToolOutcome.success(NodeSet(ids))


def count_nodes(nodes: NodeSet) -> ToolOutcome:
    return ToolOutcome.success(len(nodes.ids))


def run_tool(store: GraphStore, grounder: Grounder, tool: str, args: dict,
             eval_year: int = 2026) -> ToolOutcome:
    """Execute one atomic tool with already-resolved set arguments."""
    if tool == "Extract_entity":
        return extract_entity(store, grounder, args["input"])
    if tool == "Find_relation":
        return find_relation(store, grounder, args["relation"],
                             args.get("direction", "forward"), args["target"])
    if tool == "Merge":
        return merge(args["input1"], args["input2"])
    if tool == "Order":
        return order(store, grounder, args["mode"], args["input"], args["property"])
    if tool == "Compare":
        return compare(store, grounder, args["operator"], args["property"],
                       parse_value_text(args["literal"]))
    if tool == "Time_constraint":
        return time_constraint(store, grounder, args["input"], args["relation"],
                               args["literal"], eval_year)
    if tool == "Count":
        return count_nodes(args["input"])
    raise SExprError(f"unknown atomic tool {tool!r}")


# ---------------------------------------------------------------------------
# Chain compilation and S-expression evaluation

def compile_chain(chain) -> SExpr:
    """Convert a chain of atomic tool calls with $i references into one SExpr.

    Each chain element is a mapping {"tool": name, "args": {...}} where set
    parameters hold "$i" references to earlier steps.
    """
    exprs: list[SExpr] = []
    for i, step in enumerate(chain):
        tool, args = step["tool"], step["args"]
        if tool not in _PARAMS:
            raise SExprError(f"step {i}: unknown tool {tool!r}")

        def sub(param):
            ref = args.get(param)
            if not (isinstance(ref, str) and ref.startswith("$")):
                raise SExprError(f"step {i}: {param} must be a $i reference")
            j = int(ref[1:])
            if not (0 <= j < i):
                raise SExprError(f"step {i}: dangling reference {ref}")
            return exprs[j]

        if tool == "Extract_entity":
            exprs.append(Seed(str(args["input"])))
        elif tool == "Find_relation":
            exprs.append(App("JOIN", (Seed(args["relation"]),
                                      Seed(args.get("direction", "forward")),
                                      sub("target"))))
        elif tool == "Merge":
            exprs.append(App("AND", (sub("input1"), sub("input2"))))
        elif tool == "Order":
            head = "ARGMIN" if args["mode"] == "argmin" else "ARGMAX"
            exprs.append(App(head, (sub("input"), Seed(args["property"]))))
        elif tool == "Compare":
            head = _OP_TO_HEAD.get(args["operator"])
            if head is None:
                raise SExprError(f"step {i}: bad operator {args['operator']!r}")
            exprs.append(App(head, (Seed(args["property"]), Seed(str(args["literal"])))))
        elif tool == "Time_constraint":
            exprs.append(App("TC", (sub("input"), Seed(args["relation"]),
                                    Seed(str(args["literal"])))))
        elif tool == "Count":
            exprs.append(App("COUNT", (sub("input"),)))
    if not exprs:
        raise SExprError("empty chain")
    return exprs[-1]


def eval_sexpr(store: GraphStore, grounder: Grounder, expr: SExpr,
               eval_year: int = 2026, _path: str = "") -> ToolOutcome:
    """Bottom-up evaluation; the first failing sub-expression aborts with its path."""

    def fail(outcome: ToolOutcome, path: str) -> ToolOutcome:
        return ToolOutcome.failure(f"at {path or '/'}: {outcome.feedback}",
                                   outcome.candidates)

    if isinstance(expr, Seed):
        outcome = extract_entity(store, grounder, expr.text)
        return outcome if outcome.ok else fail(outcome, _path)

    def child(i):
        return eval_sexpr(store, grounder, expr.args[i], eval_year,
                          f"{_path}/{expr.head}[{i}]")

    if expr.head == "JOIN":
        target = child(2)
        if not target.ok:
            return target
        out = find_relation(store, grounder, expr.args[0].text,
                            expr.args[1].text, target.value)
    elif expr.head == "AND":
        a, b = child(0), child(1)
        if not a.ok:
            return a
        if not b.ok:
            return b
        out = merge(a.value, b.value)
    elif expr.head in ("ARGMIN", "ARGMAX"):
        base = child(0)
        if not base.ok:
            return base
        out = order(store, grounder, expr.head.lower(), base.value, expr.args[1].text)
    elif expr.head in ("LT", "LE", "GT", "GE"):
        op = {"LT": "<", "LE": "<=", "GT": ">", "GE": ">="}[expr.head]
        out = compare(store, grounder, op, expr.args[0].text,
                      parse_value_text(expr.args[1].text))
    elif expr.head == "TC":
        base = child(0)
        if not base.ok:
            return base
        out = time_constraint(store, grounder, base.value, expr.args[1].text,
                              expr.args[2].text, eval_year)
    elif expr.head == "COUNT":
        base = child(0)
        if not base.ok:
            return base
        out = count_nodes(base.value)
    else:  # pragma: no cover
        raise SExprError(f"unknown head {expr.head!r}")
    return out if out.ok else fail(out, _path or "/" + expr.head)


def execute_chain(store: GraphStore, grounder: Grounder, chain,
                  eval_year: int = 2026) -> ToolOutcome:
    """Step-by-step execution of a chain; the oracle twin of eval(compile(chain))."""
    results = []
    for i, step in enumerate(chain):
        args = dict(step["args"])
        for param in ref_params(step["tool"]):
            ref = args[param]
            j = int(str(ref)[1:])
            if not (0 <= j < i):
                raise SExprError(f"step {i}: dangling reference {ref}")
            args[param] = results[j]
        outcome = run_tool(store, grounder, step["tool"], args, eval_year)
        if not outcome.ok:
            return ToolOutcome.failure(f"step {i} failed: {outcome.feedback}",
                                       outcome.candidates)
        results.append(outcome.value)
    if not results:
        return ToolOutcome.failure("empty chain")
    return ToolOutcome.success(results[-1])


def render_node_set(store: GraphStore, value) -> str:
    if isinstance(value, NodeSet):
        return "; ".join(
            f"{i} ({store.nodes[i].name})" if i in store.nodes else i for i in value.ids
        )
    if isinstance(value, TypedValue):
        return value.render()
    return str(value)
