import itertools
import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from planhorizon import kopl, plans
from planhorizon.kopl import KoplProgram, KoplStep
from planhorizon.plans import (ExecutionGraph, Plan, PlanParseError, ToolCall,
                               breadth, build_dag, depth, derive_gold_dag_kopl,
                               parse_plan, serialize_plan)

CATALOG = kopl.kopl_catalog()


def longest_path_nodes_bruteforce(n, edges):
    """Enumerate every simple path along edges; oracle for depth()."""
    succ = {i: [] for i in range(n)}
    for j, i in edges:
        succ[j].append(i)
    best = 0

    def walk(node, length):
        nonlocal best
        best = max(best, length)
        for nxt in succ[node]:
            walk(nxt, length + 1)

    for start in range(n):
        walk(start, 1)
    return best


FIG2_PLAN = json.dumps([
    {"tool": "Find", "args": {"name": "Google"}},
    {"tool": "Find", "args": {"name": "Instagram"}},
    {"tool": "Relate", "args": {"entities": "$1", "relation": "parent organization", "direction": "forward"}},
    {"tool": "SelectBetween", "args": {"left": "$0", "right": "$2", "key": "employee_counts", "mode": "greater"}, "final": True},
])


class TestParsePlan:
    def test_wire_format(self):
        plan = parse_plan(FIG2_PLAN, CATALOG)
        assert len(plan.steps) == 4
        assert plan.steps[0] == ToolCall("Find", {"name": "Google"})
        assert plan.steps[3].final

    def test_serialize_round_trip(self):
        plan = parse_plan(FIG2_PLAN, CATALOG)
        assert parse_plan(serialize_plan(plan), CATALOG) == plan

    @pytest.mark.parametrize("text,reason", [
        ("not json", "syntax"),
        ("{}", "syntax"),
        ("[]", "empty"),
        ('[{"tool": "Teleport", "args": {}}]', "unknown-tool"),
        ('[{"tool": "Find", "args": {"nom": "x"}}]', "bad-argument"),
        ('[{"tool": "Find", "args": {"name": "$x"}}]', "bad-reference"),
        ('[{"tool": "Count", "args": {"entities": "$0"}}]', "bad-reference"),
    ])
    def test_rejections_carry_reasons(self, text, reason):
        with pytest.raises(PlanParseError) as err:
            parse_plan(text, CATALOG)
        assert err.value.reason == reason

    def test_base_index_admits_executed_prefix_references(self):
        text = '[{"tool": "Count", "args": {"entities": "$1"}}]'
        with pytest.raises(PlanParseError):
            parse_plan(text, CATALOG, base_index=0)
        plan = parse_plan(text, CATALOG, base_index=2, origin="replanned-continuation")
        assert plan.origin == "replanned-continuation"


class TestMetrics:
    def test_fig2_depth_and_breadth(self):
        graph = build_dag(parse_plan(FIG2_PLAN, CATALOG))
        assert graph.edges == frozenset({(0, 3), (1, 2), (2, 3)})
        assert depth(graph) == 3
        assert breadth(graph) == Fraction(4, 3)

    def test_single_call(self):
        graph = build_dag(Plan(steps=(ToolCall("FindAll", {}),)))
        assert depth(graph) == 1
        assert breadth(graph) == Fraction(1)

    def test_chain(self):
        graph = ExecutionGraph(labels=(0, 1, 2), edges=frozenset({(0, 1), (1, 2)}))
        assert depth(graph) == 3
        assert breadth(graph) == Fraction(1)

    def test_breadth_is_exact_rational(self):
        graph = ExecutionGraph(labels=tuple(range(7)), edges=frozenset({(0, 6)}))
        assert breadth(graph) == Fraction(7, 2)

    def test_random_dags_match_bruteforce(self):
        rng = random.Random(2024)
        for _ in range(500):
            n = rng.randint(1, 8)
            edges = frozenset(
                (j, i)
                for j, i in itertools.combinations(range(n), 2)
                if rng.random() < 0.4
            )
            graph = ExecutionGraph(labels=tuple(range(n)), edges=edges)
            d = depth(graph)
            assert d == longest_path_nodes_bruteforce(n, edges)
            assert d * breadth(graph) == n  # d * b = |V| exactly


class TestGoldDag:
    def test_identical_find_steps_merge(self):
        # the two Find("LeBron James Jr.") steps collapse into one node
        program = KoplProgram(steps=(
            KoplStep("Find", {"name": "LeBron James Jr."}),
            KoplStep("Relate", {"relation": "father", "direction": "forward"}, (0,)),
            KoplStep("Find", {"name": "LeBron James Jr."}),
            KoplStep("SelectBetween", {"key": "height", "mode": "greater"}, (2, 1)),
        ))
        graph = derive_gold_dag_kopl(program)
        assert graph.node_count == 3
        assert depth(graph) == 3
        assert breadth(graph) == Fraction(1)

    def test_distinct_steps_do_not_merge(self):
        program = KoplProgram(steps=(
            KoplStep("Find", {"name": "Google"}),
            KoplStep("Find", {"name": "Instagram"}),
            KoplStep("Relate", {"relation": "parent organization",
                                "direction": "forward"}, (1,)),
            KoplStep("SelectBetween", {"key": "employee_counts",
                                       "mode": "greater"}, (0, 2)),
        ))
        graph = derive_gold_dag_kopl(program)
        assert graph.node_count == 4
        assert depth(graph) == 3
        assert breadth(graph) == Fraction(4, 3)


class TestRepetition:
    def make_trace(self, calls):
        trace = plans.Trace(query="q")
        for i, (tool, args) in enumerate(calls):
            trace.records.append(plans.StepRecord(
                step=i, call=ToolCall(tool, args), ok=True, observation="",
                value=None, invocation_id=0, resolved_args=args))
        return trace

    def test_identical_resolved_args_detected(self):
        trace = self.make_trace([
            ("Find", {"name": "Google"}),
            ("FindAll", {}),
            ("Find", {"name": "Google"}),
        ])
        result = plans.detect_repetition(trace)
        assert result["repeated"] and result["pairs"] == [(0, 2)]

    def test_differing_args_not_detected(self):
        trace = self.make_trace([
            ("Find", {"name": "Google"}),
            ("Find", {"name": "Meta"}),
        ])
        assert not plans.detect_repetition(trace)["repeated"]

    def test_argument_order_is_canonicalized(self):
        trace = self.make_trace([
            ("Relate", {"relation": "father", "direction": "forward"}),
            ("Relate", {"direction": "forward", "relation": "father"}),
        ])
        assert plans.detect_repetition(trace)["repeated"]


@st.composite
def random_graphs(draw):
    n = draw(st.integers(1, 8))
    pairs = list(itertools.combinations(range(n), 2))
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs))) if pairs else []
    return ExecutionGraph(labels=tuple(range(n)), edges=frozenset(chosen))


@settings(max_examples=200)
@given(random_graphs())
def test_depth_breadth_invariants(graph):
    d = depth(graph)
    b = breadth(graph)
    assert 1 <= d <= graph.node_count
    assert d * b == graph.node_count
    assert d == longest_path_nodes_bruteforce(graph.node_count, graph.edges)
