"""Plan and trace representation: $i reference parsing, DAG construction,
depth/breadth metrics, gold-DAG derivation, and repetition detection."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction


class PlanParseError(Exception):
    """Plan text rejected; `reason` is machine-readable for the retry message."""

    def __init__(self, message: str, reason: str):
        super().__init__(message)
        self.reason = reason


@dataclass(frozen=True)
class ToolCall:
    tool: str
    args: dict
    final: bool = False  # SH terminal marker: execute this step, then stop

    def references(self) -> list[int]:
        out = []
        for v in self.args.values():
            if isinstance(v, str) and v.startswith("$") and v[1:].isdigit():
                out.append(int(v[1:]))
        return out

    def to_json(self) -> dict:
        doc = {"tool": self.tool, "args": dict(self.args)}
        if self.final:
            doc["final"] = True
        return doc


@dataclass(frozen=True)
class Plan:
    steps: tuple[ToolCall, ...]
    origin: str = "initial"  # or "replanned-continuation"


def parse_plan(text: str, catalog: list[dict], base_index: int = 0,
               origin: str = "initial") -> Plan:
    """Parse the plan wire format against a tool catalog.

    `base_index` is the absolute index of the first step, nonzero for
    replanned continuations whose references may point at executed steps.
    """
    tools = {entry["name"]: {p["name"] for p in entry["params"]} for entry in catalog}
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PlanParseError(f"plan is not valid JSON: {exc}", "syntax")
    if not isinstance(doc, list):
        raise PlanParseError("plan must be a JSON list of tool calls", "syntax")
    if not doc:
        raise PlanParseError("plan is empty", "empty")
    steps = []
    for i, item in enumerate(doc):
        absolute = base_index + i
        if not isinstance(item, dict) or "tool" not in item:
            raise PlanParseError(f"step {absolute} is not a tool call object", "syntax")
        tool = item["tool"]
        if tool not in tools:
            raise PlanParseError(f"step {absolute}: unknown tool {tool!r}", "unknown-tool")
        args = item.get("args", {})
        if not isinstance(args, dict):
            raise PlanParseError(f"step {absolute}: args must be an object", "syntax")
        for key, value in args.items():
            if key not in tools[tool]:
                raise PlanParseError(
                    f"step {absolute}: {tool} has no parameter {key!r}", "bad-argument"
                )
            if isinstance(value, str) and value.startswith("$"):
                if not value[1:].isdigit():
                    raise PlanParseError(
                        f"step {absolute}: malformed reference {value!r}", "bad-reference"
                    )
                if int(value[1:]) >= absolute:
                    raise PlanParseError(
                        f"step {absolute}: reference {value} does not point to an "
                        "earlier step", "bad-reference"
                    )
        steps.append(ToolCall(tool=tool, args=dict(args), final=bool(item.get("final"))))
    return Plan(steps=tuple(steps), origin=origin)


def serialize_plan(plan: Plan) -> str:
    return json.dumps([step.to_json() for step in plan.steps])


# ---------------------------------------------------------------------------
# Execution graphs

@dataclass(frozen=True)
class ExecutionGraph:
    labels: tuple  # one label per node (tool calls or signatures)
    edges: frozenset  # (j, i) meaning node j feeds node i

    @property
    def node_count(self) -> int:
        return len(self.labels)


def build_dag(plan: Plan) -> ExecutionGraph:
    """One node per step; edge j -> i iff step i references $j."""
    edges = set()
    for i, step in enumerate(plan.steps):
        for j in step.references():
            edges.add((j, i))
    return ExecutionGraph(labels=tuple(plan.steps), edges=frozenset(edges))


def depth(graph: ExecutionGraph) -> int:
    """Critical path length counted in nodes; a single call has depth 1."""
    n = graph.node_count
    if n == 0:
        return 0
    preds: dict[int, list[int]] = {i: [] for i in range(n)}
    for j, i in graph.edges:
        preds[i].append(j)
    longest = [0] * n
    for i in range(n):  # nodes are index-ordered, so predecessors come first
        longest[i] = 1 + max((longest[j] for j in preds[i]), default=0)
    return max(longest)


def breadth(graph: ExecutionGraph) -> Fraction:
    """Average parallelism |V| / depth, kept exact as a rational."""
    return Fraction(graph.node_count, depth(graph))


def derive_gold_dag_kopl(program) -> ExecutionGraph:
    """Build the step tree of a KoPL program and merge structurally identical
    subtrees (same tool, same args, same merged inputs) into single nodes."""
    from .kopl import validate_program

    validate_program(program)
    signatures: list = []
    for step in program.steps:
        sig = (step.tool, tuple(sorted(step.args.items())),
               tuple(signatures[j] for j in step.inputs))
        signatures.append(sig)
    node_of: dict = {}
    order = []
    for sig in signatures:
        if sig not in node_of:
            node_of[sig] = len(order)
            order.append(sig)
    edges = set()
    for sig in order:
        target = node_of[sig]
        for child in sig[2]:
            edges.add((node_of[child], target))
    labels = tuple((sig[0], dict(sig[1])) for sig in order)
    return ExecutionGraph(labels=labels, edges=frozenset(edges))


# ---------------------------------------------------------------------------
# Traces

@dataclass
class Invocation:
    id: int
    mode: str  # sh-next-step | fh-initial | fh-replan
    prompt_text: str
    completion_text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0


@dataclass
class StepRecord:
    step: int
    call: ToolCall
    ok: bool
    observation: str
    value: object = None
    invocation_id: int = -1
    resolved_args: dict = field(default_factory=dict)


@dataclass
class Trace:
    query: str
    question_id: str = ""
    run_id: str = ""
    trial: int = 0
    planner: str = ""
    records: list[StepRecord] = field(default_factory=list)
    invocations: list[Invocation] = field(default_factory=list)
    answer: str | None = None
    status: str = "running"
    replans: int = 0
    format_retries: int = 0

    @property
    def executed_calls(self) -> int:
        return len(self.records)

    def log_lines(self) -> list[str]:
        """Trace log wire format: one structured record per line."""
        lines = []
        tokens = {inv.id: (inv.prompt_tokens, inv.completion_tokens)
                  for inv in self.invocations}
        for rec in self.records:
            tin, tout = tokens.get(rec.invocation_id, (0, 0))
            lines.append(json.dumps({
                "run_id": self.run_id,
                "question_id": self.question_id,
                "trial": self.trial,
                "step": rec.step,
                "tool": rec.call.tool,
                "args": rec.call.args,
                "outcome_kind": "success" if rec.ok else "failure",
                "tokens_in": tin,
                "tokens_out": tout,
            }, sort_keys=True))
        return lines


def canonical_call(record: StepRecord) -> tuple:
    """Canonical (tool, resolved argument map) used for repetition equality."""
    args = record.resolved_args or record.call.args
    return (record.call.tool, tuple(sorted((k, str(v)) for k, v in args.items())))


def detect_repetition(trace: Trace) -> dict:
    """Two executed calls repeat when tool name and resolved arguments agree."""
    keys = [canonical_call(rec) for rec in trace.records]
    pairs = []
    for i in range(len(keys)):
        for j in range(i + 1, len(keys)):
            if keys[i] == keys[j]:
                pairs.append((i, j))
    return {"repeated": bool(pairs), "pairs": pairs}
