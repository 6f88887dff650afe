"""Task instances and dataset files: question, gold plan, gold answer."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from . import atomic, harness, kb as kbmod, kopl, mocktools
from .plans import Plan, parse_plan


class DatasetError(Exception):
    pass


@dataclass(frozen=True)
class Task:
    id: str
    question: str
    gold_plan: Plan
    gold_answer: tuple[str, ...]
    dataset: str = "fixture"
    controls: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Dataset:
    engine: str
    tasks: tuple[Task, ...]
    env_factory: object  # () -> Environment given a robustness mode

    def make_env(self, robustness: str = "high", **kwargs):
        return self.env_factory(robustness, **kwargs)


def load_dataset(path) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    base = os.path.dirname(os.path.abspath(path))
    engine = doc.get("engine")
    if engine not in ("kopl", "atomic", "mock"):
        raise DatasetError(f"engine must be kopl, atomic, or mock, got {engine!r}")

    if engine == "kopl":
        kb = kbmod.load_kb(os.path.join(base, doc["kb"]))
        catalog_name = "kopl"

        def factory(robustness, **kwargs):
            return harness.make_kopl_env(kb, robustness, **kwargs)
    elif engine == "atomic":
        store = atomic.load_graph(os.path.join(base, doc["graph"]))
        eval_year = doc.get("eval_year", 2026)
        catalog_name = "atomic"

        def factory(robustness, **kwargs):
            return harness.make_atomic_env(store, robustness, eval_year=eval_year,
                                           **kwargs)
    else:
        corpus = mocktools.load_corpus(os.path.join(base, doc["corpus"]))
        catalog_name = "mock"

        def factory(robustness, top_k=None, **kwargs):
            if top_k is None and robustness == "low":
                top_k = 1  # low robustness restricts retrieval to the top hit
            return harness.make_mock_env(corpus, top_k=top_k)

    catalog = {
        "kopl": kopl.kopl_catalog(),
        "atomic": atomic.atomic_catalog(),
        "mock": mocktools.mock_catalog(),
    }[catalog_name]

    tasks = []
    for i, t in enumerate(doc.get("tasks", [])):
        try:
            plan = parse_plan(json.dumps(t["gold_plan"]), catalog)
        except Exception as exc:
            raise DatasetError(f"tasks[{i}] gold plan invalid: {exc}")
        tasks.append(Task(
            id=t["id"],
            question=t["question"],
            gold_plan=plan,
            gold_answer=tuple(t["gold_answer"]),
            dataset=t.get("dataset", "fixture"),
            controls=t.get("controls", {}),
        ))
    return Dataset(engine=engine, tasks=tuple(tasks), env_factory=factory)
