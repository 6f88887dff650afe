"""Schema alignment: exact-first lookup, then soft matching under a robustness mode.

High robustness retrieves up to 10 similar candidates and substitutes the best
one passing the validator; low robustness rejects any non-exact term and feeds
back only the single nearest candidate.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

DEFAULT_THRESHOLD = 0.4
MAX_CANDIDATES_HIGH = 10
MAX_CANDIDATES_LOW = 1

NAMESPACES = ("entity-name", "concept", "attribute-key", "relation", "qualifier-key")


class GroundingError(Exception):
    pass


class UnknownNamespaceError(GroundingError):
    pass


_SEP = re.compile(r"[\s_\-./]+")


def _normalize(term: str) -> str:
    return _SEP.sub(" ", term.strip().lower())


def _trigrams(term: str) -> set[str]:
    if len(term) < 3:
        return {term} if term else set()
    return {term[i : i + 3] for i in range(len(term) - 2)}


def trigram_similarity(a: str, b: str) -> float:
    """Character-trigram Jaccard on normalized terms; 1.0 iff normalized-equal."""
    na, nb = _normalize(a), _normalize(b)
    if na == nb:
        return 1.0
    ta, tb = _trigrams(na), _trigrams(nb)
    if not ta or not tb:
        return 0.0
    inter = len(ta & tb)
    if inter == 0:
        return 0.0
    return inter / (len(ta) + len(tb) - inter)


@dataclass(frozen=True)
class GroundingResult:
    status: str  # exact | soft-matched | failed
    matched_term: str | None
    candidates: tuple[tuple[str, float], ...]  # (term, score), non-increasing
    mode: str

    @property
    def ok(self) -> bool:
        return self.status != "failed"


@dataclass
class SchemaIndex:
    """Per-namespace term sets built from a KnowledgeBase or GraphStore."""

    terms: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def namespace(self, namespace: str) -> tuple[str, ...]:
        if namespace not in NAMESPACES:
            raise UnknownNamespaceError(f"unknown namespace {namespace!r}")
        return self.terms.get(namespace, ())


def build_index(source) -> SchemaIndex:
    """Index every schema term occurring in a KB or graph store."""
    names: dict[str, dict[str, None]] = {ns: {} for ns in NAMESPACES}
    if hasattr(source, "entities"):  # KnowledgeBase
        for c in source.concepts.values():
            names["concept"].setdefault(c.name)
        for e in source.entities.values():
            names["entity-name"].setdefault(e.name)
            for a in e.attributes:
                names["attribute-key"].setdefault(a.key)
                for qk, _ in a.qualifiers:
                    names["qualifier-key"].setdefault(qk)
            for r in e.relations:
                names["relation"].setdefault(r.predicate)
                for qk, _ in r.qualifiers:
                    names["qualifier-key"].setdefault(qk)
    else:  # GraphStore
        for node in source.nodes.values():
            names["entity-name"].setdefault(node.name)
            for cls in node.classes:
                names["concept"].setdefault(cls)
        for s, p, o in source.triples:
            names["relation"].setdefault(p)
    return SchemaIndex(terms={ns: tuple(d) for ns, d in names.items()})


class Grounder:
    """Caches grounding per (term, namespace, mode) within a run for determinism."""

    def __init__(self, index: SchemaIndex, mode: str = "high",
                 similarity=trigram_similarity, threshold: float = DEFAULT_THRESHOLD,
                 validator=None):
        if mode not in ("high", "low"):
            raise GroundingError(f"robustness mode must be high or low, got {mode!r}")
        self.index = index
        self.mode = mode
        self.similarity = similarity
        self.threshold = threshold
        self.validator = validator or (lambda term, cand, score: score >= threshold)
        self._cache: dict[tuple[str, str, str], GroundingResult] = {}

    def ground(self, term: str, namespace: str, mode: str | None = None) -> GroundingResult:
        mode = mode or self.mode
        key = (term, namespace, mode)
        if key not in self._cache:
            self._cache[key] = ground(self.index, term, namespace, mode,
                                      similarity=self.similarity,
                                      validator=self.validator)
        return self._cache[key]


def ground(index: SchemaIndex, term: str, namespace: str, mode: str,
           similarity=trigram_similarity, validator=None) -> GroundingResult:
    """Ground a planner-supplied term against the schema. Exact match always wins."""
    vocabulary = index.namespace(namespace)
    if term in vocabulary:
        return GroundingResult("exact", term, (), mode)
    norm = _normalize(term)
    for candidate in vocabulary:
        if _normalize(candidate) == norm:
            return GroundingResult("exact", candidate, (), mode)

    scored = sorted(
        ((cand, similarity(term, cand)) for cand in vocabulary),
        key=lambda pair: (-pair[1], vocabulary.index(pair[0])),
    )
    if mode == "low":
        return GroundingResult("failed", None, tuple(scored[:MAX_CANDIDATES_LOW]), mode)
    top = tuple(scored[:MAX_CANDIDATES_HIGH])
    validator = validator or (lambda t, c, s: s >= DEFAULT_THRESHOLD)
    for candidate, score in top:
        if validator(term, candidate, score):
            return GroundingResult("soft-matched", candidate, top, mode)
    return GroundingResult("failed", None, top, mode)


def format_candidate_feedback(result: GroundingResult, term: str, namespace: str) -> str:
    names = [cand for cand, _ in result.candidates]
    listing = ", ".join(names) if names else "(none)"
    return (
        f"No schema match for {term!r} in namespace {namespace}. "
        f"Nearest candidates: {listing}"
    )
