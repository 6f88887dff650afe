"""Desk-scale retrieval and reasoning tools for unstructured-environment runs.

Answerability is table-driven: each corpus document lists the normalized
questions it can answer. The contract under test is the harness's
failure/replan behavior, not QA quality.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .grounding import trigram_similarity
from .kb import MalformedDocumentError
from .outcome import ToolOutcome


@dataclass(frozen=True)
class MockDocument:
    title: str
    text: str
    answers: dict[str, str] = field(default_factory=dict)  # normalized q -> answer


@dataclass(frozen=True)
class MockCorpus:
    documents: tuple[MockDocument, ...]
    top_k: int = 10

    def __post_init__(self):
        titles = [d.title for d in self.documents]
        if len(set(titles)) != len(titles):
            raise MalformedDocumentError("document titles must be unique")
        if self.top_k < 1:
            raise MalformedDocumentError("top_k must be >= 1")


_PUNCT = re.compile(r"[^a-z0-9 ]+")


def normalize_question(text: str) -> str:
    return _PUNCT.sub("", text.lower()).strip()


def load_corpus(path_or_doc, top_k: int = 10) -> MockCorpus:
    if isinstance(path_or_doc, dict):
        doc = path_or_doc
    else:
        with open(path_or_doc, encoding="utf-8") as fh:
            doc = json.load(fh)
    documents = tuple(
        MockDocument(
            title=d["title"],
            text=d.get("text", ""),
            answers={normalize_question(q): a for q, a in d.get("answers", {}).items()},
        )
        for d in doc.get("documents", [])
    )
    return MockCorpus(documents=documents, top_k=doc.get("top_k", top_k))


def rank_documents(corpus: MockCorpus, question: str) -> list[MockDocument]:
    scored = [
        (trigram_similarity(question, f"{d.title} {d.text}"), i, d)
        for i, d in enumerate(corpus.documents)
    ]
    scored.sort(key=lambda t: (-t[0], t[1]))
    return [d for _, _, d in scored]


def mock_search(corpus: MockCorpus, question: str, k: int | None = None) -> ToolOutcome:
    """Inspect the top-k ranked documents for an answerable-question match."""
    k = corpus.top_k if k is None else k
    if k < 1:
        raise ValueError("k must be >= 1")
    needle = normalize_question(question)
    for doc in rank_documents(corpus, question)[:k]:
        if needle in doc.answers:
            return ToolOutcome.success(doc.answers[needle])
    return ToolOutcome.failure(
        f'Error in search: Failed to find the answer to "{question}"\n'
        "No supporting information found in the search result.\n"
        "Retry with a different question or try a different tool."
    )


_COMPARE = re.compile(r"^\s*compare\s*\(\s*(.+?)\s*,\s*(.+?)\s*,\s*(\w+)\s*\)\s*$", re.I)
_EQUALITY = re.compile(r'^\s*equality\s*\(\s*"?(.*?)"?\s*,\s*"?(.*?)"?\s*\)\s*$', re.I)
_PICK = re.compile(r"^\s*pick\s*\(\s*(\w+)\s*,\s*(.+)\)\s*$", re.I)

_SMALLER = ("earlier", "smaller", "less", "lower", "fewer")
_LARGER = ("later", "larger", "greater", "more", "higher")


def mock_reasoning(instruction: str) -> ToolOutcome:
    """Deterministic evaluation of the supported reasoning templates:
    compare(a, b, mode), equality(a, b), pick(mode, v1, v2, ...)."""
    m = _COMPARE.match(instruction)
    if m:
        a, b, mode = m.group(1), m.group(2), m.group(3).lower()
        try:
            na, nb = float(a.replace(",", "")), float(b.replace(",", ""))
        except ValueError:
            return ToolOutcome.failure(
                f"compare needs two numbers, got {a!r} and {b!r}"
            )
        if mode in _SMALLER:
            winner = a if na <= nb else b
        elif mode in _LARGER:
            winner = a if na >= nb else b
        else:
            return ToolOutcome.failure(f"unknown compare mode {mode!r}")
        return ToolOutcome.success(winner.strip())
    m = _EQUALITY.match(instruction)
    if m:
        same = normalize_question(m.group(1)) == normalize_question(m.group(2))
        return ToolOutcome.success("yes" if same else "no")
    m = _PICK.match(instruction)
    if m:
        mode = m.group(1).lower()
        items = [part.strip().strip('"') for part in m.group(2).split(",")]
        if mode == "numeric":
            for item in items:
                try:
                    float(item.replace(",", ""))
                    return ToolOutcome.success(item)
                except ValueError:
                    continue
        elif mode == "nonempty":
            for item in items:
                if item:
                    return ToolOutcome.success(item)
        else:
            return ToolOutcome.failure(f"unknown pick predicate {mode!r}")
        return ToolOutcome.failure("no item satisfies the predicate")
    return ToolOutcome.failure(
        "unsupported reasoning instruction; use compare(a, b, mode), "
        "equality(a, b), or pick(predicate, v1, v2, ...)"
    )


_CATALOG_SPEC = [
    ("search", [("question", "string")],
     "Answers a single-hop question based on retrieved evidence"),
    ("reasoning", [("instruction", "string")],
     "Performs logic/comparison over bound values: compare/equality/pick templates"),
]


def mock_catalog() -> list[dict]:
    return [
        {"name": name,
         "params": [{"name": p, "kind": k} for p, k in params],
         "description": desc}
        for name, params, desc in _CATALOG_SPEC
    ]
