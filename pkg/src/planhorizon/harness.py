"""Planning-horizon drivers.

run_sh interleaves one policy invocation per executed step (eager monitoring);
run_fh generates the whole plan upfront and re-invokes the policy only on
execution failure, appending an append-only continuation (lazy monitoring).
Both build the action-observation history with the same serializer, so a
replanning FH policy sees element-wise what an SH policy would see at the
same execution point.
"""

from __future__ import annotations

import importlib.resources
import json
from dataclasses import dataclass, field

from . import atomic, kopl, mocktools
from .grounding import Grounder, SchemaIndex, build_index
from .kb import KnowledgeBase, TypedValue
from .outcome import ToolOutcome
from .plans import Invocation, Plan, PlanParseError, StepRecord, ToolCall, Trace, parse_plan


class HarnessError(Exception):
    pass


class UnknownToolError(HarnessError):
    pass


def load_prompt(name: str) -> str:
    ref = importlib.resources.files("planhorizon.data.prompts") / f"{name}.txt"
    return ref.read_text(encoding="utf-8")


INVALID_FORMAT_MESSAGE = load_prompt("invalid_format").strip()


def whitespace_tokenizer(text: str) -> int:
    return len(text.split())


TOKENIZERS = {"whitespace": whitespace_tokenizer}


@dataclass(frozen=True)
class Budget:
    max_tool_calls: int = 30
    max_replans: int = 8
    max_format_retries: int = 8

    def __post_init__(self):
        if min(self.max_tool_calls, self.max_replans, self.max_format_retries) < 1:
            raise ValueError("all budget fields must be positive")


@dataclass
class TokenStats:
    prompt_tokens: int = 0
    completion_tokens: int = 0
    invocations: int = 0


@dataclass
class Environment:
    """Tool catalog plus a deterministic executor over immutable data."""

    kind: str  # kopl | atomic | mock
    catalog: list[dict]
    kb: KnowledgeBase | None = None
    store: atomic.GraphStore | None = None
    corpus: mocktools.MockCorpus | None = None
    grounder: Grounder | None = None
    eval_year: int = 2026
    top_k: int = 10
    _param_kinds: dict = field(default_factory=dict)

    def __post_init__(self):
        self._param_kinds = {
            entry["name"]: {p["name"]: p["kind"] for p in entry["params"]}
            for entry in self.catalog
        }

    @property
    def robustness(self) -> str:
        return self.grounder.mode if self.grounder else "high"

    def render(self, value) -> str:
        if self.kind == "kopl":
            return kopl.render_value(self.kb, value)
        if self.kind == "atomic":
            return atomic.render_node_set(self.store, value)
        return str(value)

    def execute(self, call: ToolCall, bindings: dict[int, object]) -> tuple[ToolOutcome, dict]:
        """Resolve $i references against executed outputs, then dispatch.

        Returns the outcome and the resolved argument map (used for
        repetition equality)."""
        kinds = self._param_kinds.get(call.tool)
        if kinds is None:
            raise UnknownToolError(f"unknown tool {call.tool!r}")
        resolved = {}
        for name, value in call.args.items():
            kind = kinds.get(name, "string")
            if kind in ("set", "value-ref"):
                if not (isinstance(value, str) and value.startswith("$")):
                    return ToolOutcome.failure(
                        f"parameter {name!r} of {call.tool} must reference a step ($i)"
                    ), dict(call.args)
                j = int(value[1:])
                if j not in bindings:
                    return ToolOutcome.failure(
                        f"reference {value} does not point to a successfully "
                        "executed step"
                    ), dict(call.args)
                resolved[name] = bindings[j]
            elif isinstance(value, str):
                resolved[name] = _substitute_refs(value, bindings, self.render)
            else:
                resolved[name] = value
        if self.kind == "kopl":
            outcome = kopl.run_tool(self.kb, self.grounder, call.tool, resolved)
        elif self.kind == "atomic":
            outcome = atomic.run_tool(self.store, self.grounder, call.tool, resolved,
                                      self.eval_year)
        elif self.kind == "mock":
            if call.tool == "search":
                outcome = mocktools.mock_search(self.corpus, resolved["question"],
                                                self.top_k)
            elif call.tool == "reasoning":
                outcome = mocktools.mock_reasoning(resolved["instruction"])
            else:  # pragma: no cover - catalog guards this
                raise UnknownToolError(call.tool)
        else:
            raise HarnessError(f"unknown environment kind {self.kind!r}")
        repetition_args = {
            k: (self.render(v) if not isinstance(v, (str, int, float)) else v)
            for k, v in resolved.items()
        }
        return outcome, repetition_args


def _substitute_refs(text: str, bindings: dict[int, object], render) -> str:
    """Inline $i substitution for free-text parameters (mock tools)."""
    out, i = [], 0
    while i < len(text):
        if text[i] == "$" and i + 1 < len(text) and text[i + 1].isdigit():
            j = i + 1
            while j < len(text) and text[j].isdigit():
                j += 1
            idx = int(text[i + 1 : j])
            out.append(render(bindings[idx]) if idx in bindings else text[i:j])
            i = j
        else:
            out.append(text[i])
            i += 1
    return "".join(out)


def make_kopl_env(kb: KnowledgeBase, robustness: str = "high", **grounder_kwargs) -> Environment:
    grounder = Grounder(build_index(kb), mode=robustness, **grounder_kwargs)
    return Environment(kind="kopl", catalog=kopl.kopl_catalog(), kb=kb, grounder=grounder)


def make_atomic_env(store: atomic.GraphStore, robustness: str = "high",
                    eval_year: int = 2026, **grounder_kwargs) -> Environment:
    grounder = Grounder(build_index(store), mode=robustness, **grounder_kwargs)
    return Environment(kind="atomic", catalog=atomic.atomic_catalog(), store=store,
                       grounder=grounder, eval_year=eval_year)


def make_mock_env(corpus: mocktools.MockCorpus, top_k: int | None = None) -> Environment:
    return Environment(kind="mock", catalog=mocktools.mock_catalog(), corpus=corpus,
                       grounder=Grounder(SchemaIndex(), mode="high"),
                       top_k=corpus.top_k if top_k is None else top_k)


# ---------------------------------------------------------------------------
# History serialization (shared by SH prompts and FH replanning prompts)

def render_history(env: Environment, records) -> list[dict]:
    return [
        {
            "step": rec.step,
            "tool": rec.call.tool,
            "args": rec.call.args,
            "outcome_kind": "success" if rec.ok else "failure",
            "observation": rec.observation,
        }
        for rec in records
    ]


def serialize_history(history: list[dict]) -> str:
    return json.dumps(history, sort_keys=True)


@dataclass
class PolicyRequest:
    query: str
    mode: str  # sh-next-step | fh-initial | fh-replan
    history: list[dict]
    start_index: int
    system_prompt: str
    user_prompt: str
    errors: list[str] = field(default_factory=list)

    @property
    def prompt(self) -> str:
        return "\n".join([self.system_prompt, self.user_prompt, *self.errors])


def build_prompts(env: Environment, query: str, mode: str, history: list[dict],
                  start_index: int, demonstrations: str = "") -> tuple[str, str]:
    template = load_prompt("sh_system" if mode == "sh-next-step" else "fh_system")
    system = template.format(
        tool_definitions=json.dumps(env.catalog),
        demonstrations=demonstrations or "(none)",
    )
    user = f"Question: {query}"
    if history:
        user += "\n\nExecuted steps:\n" + serialize_history(history)
    if mode == "fh-replan":
        user += "\n\n" + load_prompt("replan_message").format(start_index=start_index)
    return system, user


def _invoke(policy, env: Environment, trace: Trace, query: str, mode: str,
            base_index: int, budget: Budget, tokenizer) -> Plan | None:
    """Invoke the policy with format retries; returns None on retry exhaustion."""
    history = render_history(env, trace.records)
    system, user = build_prompts(env, query, mode, history, base_index)
    errors: list[str] = []
    for attempt in range(budget.max_format_retries):
        request = PolicyRequest(query=query, mode=mode, history=history,
                                start_index=base_index, system_prompt=system,
                                user_prompt=user, errors=list(errors))
        text = policy(request)
        invocation = Invocation(
            id=len(trace.invocations), mode=mode,
            prompt_text=request.prompt, completion_text=text,
            prompt_tokens=tokenizer(request.prompt),
            completion_tokens=tokenizer(text),
        )
        trace.invocations.append(invocation)
        try:
            origin = "replanned-continuation" if mode == "fh-replan" else "initial"
            plan = parse_plan(text, env.catalog, base_index=base_index, origin=origin)
            if mode == "sh-next-step" and len(plan.steps) != 1:
                raise PlanParseError("SH mode must yield exactly one step", "sh-arity")
            return plan
        except PlanParseError:
            trace.format_retries += 1
            errors.append(INVALID_FORMAT_MESSAGE)
    trace.status = "format-failed"
    return None


def _record(trace: Trace, env: Environment, call: ToolCall,
            bindings: dict[int, object]) -> StepRecord:
    outcome, resolved = env.execute(call, bindings)
    rec = StepRecord(
        step=len(trace.records),
        call=call,
        ok=outcome.ok,
        observation=env.render(outcome.value) if outcome.ok else outcome.feedback,
        value=outcome.value if outcome.ok else None,
        invocation_id=len(trace.invocations) - 1,
        resolved_args=resolved,
    )
    trace.records.append(rec)
    if rec.ok:
        bindings[rec.step] = outcome.value
    return rec


def execute_step(env: Environment, call: ToolCall, bindings: dict[int, object],
                 seed: int = 0) -> ToolOutcome:
    """One-off dispatch used outside a driver loop. Deterministic given inputs."""
    outcome, _ = env.execute(call, bindings)
    return outcome


def run_sh(task, policy, env: Environment, budget: Budget = Budget(),
           seed: int = 0, tokenizer=whitespace_tokenizer) -> Trace:
    """Eager monitoring: every executed step is preceded by a policy invocation."""
    trace = Trace(query=task.question, question_id=task.id, planner="sh")
    bindings: dict[int, object] = {}
    failures = 0
    while trace.executed_calls < budget.max_tool_calls:
        plan = _invoke(policy, env, trace, task.question, "sh-next-step",
                       base_index=len(trace.records), budget=budget,
                       tokenizer=tokenizer)
        if plan is None:
            return trace
        rec = _record(trace, env, plan.steps[0], bindings)
        if rec.ok and plan.steps[0].final:
            trace.answer = rec.observation
            trace.status = "answered"
            return trace
        if not rec.ok:
            failures += 1
            if failures >= budget.max_replans:
                trace.status = "retry-budget-failed"
                return trace
    trace.status = "budget-failed"
    return trace


def run_fh(task, policy, env: Environment, budget: Budget = Budget(),
           seed: int = 0, tokenizer=whitespace_tokenizer) -> Trace:
    """Lazy monitoring: one upfront plan; replan only on execution failure.

    The executed prefix is immutable across replans; each continuation is
    appended after the failed step's index and may reference only existing
    outputs."""
    trace = Trace(query=task.question, question_id=task.id, planner="fh")
    bindings: dict[int, object] = {}
    plan = _invoke(policy, env, trace, task.question, "fh-initial",
                   base_index=0, budget=budget, tokenizer=tokenizer)
    if plan is None:
        return trace
    pending = list(plan.steps)
    ptr = 0
    while True:
        if ptr >= len(pending):
            # current plan fully executed: its last output is the answer
            last = trace.records[-1] if trace.records else None
            if last is not None and last.ok:
                trace.answer = last.observation
                trace.status = "answered"
            else:
                trace.status = "budget-failed"
            return trace
        if trace.executed_calls >= budget.max_tool_calls:
            trace.status = "budget-failed"
            return trace
        rec = _record(trace, env, pending[ptr], bindings)
        if rec.ok:
            if pending[ptr].final:
                trace.answer = rec.observation
                trace.status = "answered"
                return trace
            ptr += 1
            continue
        if trace.replans >= budget.max_replans:
            trace.status = "replan-budget-failed"
            return trace
        trace.replans += 1
        start_index = len(trace.records)  # the failed step consumed an index
        continuation = _invoke(policy, env, trace, task.question, "fh-replan",
                               base_index=start_index, budget=budget,
                               tokenizer=tokenizer)
        if continuation is None:
            return trace
        pending = list(continuation.steps)
        ptr = 0


def run_task(task, policy, env: Environment, planner: str,
             budget: Budget = Budget(), seed: int = 0,
             tokenizer=whitespace_tokenizer) -> Trace:
    driver = run_sh if planner == "sh" else run_fh
    return driver(task, policy, env, budget, seed, tokenizer)


def account_tokens(trace: Trace, tokenizer=whitespace_tokenizer) -> TokenStats:
    """Sum per-invocation prompt/completion token counts with the given tokenizer."""
    stats = TokenStats()
    for inv in trace.invocations:
        stats.prompt_tokens += tokenizer(inv.prompt_text)
        stats.completion_tokens += tokenizer(inv.completion_text)
        stats.invocations += 1
    return stats
