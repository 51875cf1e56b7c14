"""Sentence-level co-occurrence knowledge graph over extracted entities.

Edge weights are raw sentence counts; conditional probabilities are exact
fractions of those counts, so P(a|b)*count(b) always reproduces the joint
count without rounding error.
"""

import json
import logging
from bisect import insort
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

from .corpus import Document, split_sentences
from .errors import (
    GraphParseError,
    GraphVersionError,
    UndefinedConditionalError,
    UnknownDrugError,
    UnknownNodeError,
)
from .ner import (
    ATTRIBUTE_CATEGORIES,
    Entity,
    EntityCategory,
    Gazetteer,
    Sentence,
    extract_entities,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

# Deterministic cap on stored evidence references per edge: the smallest
# (doc_id, sentence_index) pairs are kept, so exports do not depend on
# ingestion order.
EVIDENCE_CAP = 20

EvidenceRef = Tuple[str, int]


class _EvidenceList:
    """Sorted, de-duplicated evidence refs, capped at the smallest N."""

    __slots__ = ("refs",)

    def __init__(self, refs: Optional[Iterable[EvidenceRef]] = None):
        self.refs: List[EvidenceRef] = []
        for ref in refs or ():
            self.add(ref)

    def add(self, ref: EvidenceRef) -> None:
        if ref in self.refs:
            return
        insort(self.refs, ref)
        if len(self.refs) > EVIDENCE_CAP:
            self.refs.pop()

    def merge(self, other: "_EvidenceList") -> None:
        for ref in other.refs:
            self.add(ref)


@dataclass
class KGNode:
    lemma_key: str
    category: EntityCategory
    mention_count: int = 0
    sentence_count: int = 0


@dataclass(frozen=True)
class SemanticEdge:
    """Directed subject->object edge labelled with a relation descriptor."""

    subject: str
    object: str
    descriptor: str
    evidence: Tuple[EvidenceRef, ...] = ()


@dataclass
class BuildReport:
    documents: int = 0
    sentences: int = 0
    entities: int = 0
    nodes: int = 0
    cooccurrence_edges: int = 0
    semantic_edges: int = 0
    attribute_edges: int = 0


def _pair(a: str, b: str) -> Tuple[str, str]:
    return (a, b) if a <= b else (b, a)


class KnowledgeGraph:
    """Entity nodes plus co-occurrence, semantic and drug-attribute edges."""

    def __init__(self):
        self.nodes: Dict[str, KGNode] = {}
        self._cooc: Dict[Tuple[str, str], int] = {}
        self._cooc_evidence: Dict[Tuple[str, str], _EvidenceList] = {}
        self._semantic: Dict[Tuple[str, str, str], _EvidenceList] = {}
        self._attributes: Dict[Tuple[str, str, str], List] = {}
        self.total_sentences: int = 0

    # -- construction --------------------------------------------------

    def _node(self, key: str, category: EntityCategory) -> KGNode:
        node = self.nodes.get(key)
        if node is None:
            node = KGNode(lemma_key=key, category=category)
            self.nodes[key] = node
        return node

    def add_sentence(self, sentence: Sentence, entities: List[Entity]) -> None:
        """Fold one sentence's entities into counts, edges and attributes."""
        self.total_sentences += 1
        if not entities:
            return
        ref: EvidenceRef = (sentence.doc_id, sentence.index)

        concept_keys = set()
        for entity in entities:
            if entity.category in ATTRIBUTE_CATEGORIES:
                continue
            node = self._node(entity.lemma_key, entity.category)
            node.mention_count += 1
            concept_keys.add(entity.lemma_key)
        for key in concept_keys:
            self.nodes[key].sentence_count += 1
        for a, b in combinations(sorted(concept_keys), 2):
            pair = (a, b)
            self._cooc[pair] = self._cooc.get(pair, 0) + 1
            self._cooc_evidence.setdefault(pair, _EvidenceList()).add(ref)

        drugs = [e for e in entities if e.category is EntityCategory.CHEMICAL]
        if drugs:
            for entity in entities:
                if entity.category not in ATTRIBUTE_CATEGORIES:
                    continue
                drug = min(drugs, key=lambda d: (_span_gap(d, entity), d.start))
                attr_key = (drug.lemma_key, entity.category.value, entity.surface)
                slot = self._attributes.setdefault(attr_key, [0, _EvidenceList()])
                slot[0] += 1
                slot[1].add(ref)

    def add_semantic_edge(self, edge: SemanticEdge) -> None:
        key = (edge.subject, edge.object, edge.descriptor)
        evl = self._semantic.setdefault(key, _EvidenceList())
        for ref in edge.evidence:
            evl.add(ref)

    # -- queries ---------------------------------------------------------

    def edge_weight(self, a: str, b: str) -> int:
        """Sentences where a and b co-occur; 0 for self-pairs and unknowns."""
        if a == b:
            return 0
        return self._cooc.get(_pair(a, b), 0)

    def conditional_probability(self, a: str, given: str) -> Fraction:
        """P(a | given) as an exact fraction of sentence counts."""
        node = self.nodes.get(given)
        if node is None or node.sentence_count == 0:
            raise UndefinedConditionalError(
                f"no sentences recorded for node {given!r}"
            )
        if a == given:
            return Fraction(1)
        return Fraction(self.edge_weight(a, given), node.sentence_count)

    def neighbors(
        self,
        node: str,
        k: int,
        category_filter: Optional[EntityCategory] = None,
    ) -> List[Tuple[str, Fraction]]:
        """Top-k co-occurring nodes by conditional probability given node.

        Ties break lexicographically by lemma key. Raises UnknownNodeError
        for nodes not in the graph and ValueError for non-positive k.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        if node not in self.nodes:
            raise UnknownNodeError(f"unknown node {node!r}")
        scored = []
        for (a, b), count in self._cooc.items():
            if node == a:
                other = b
            elif node == b:
                other = a
            else:
                continue
            if count == 0:
                continue
            if category_filter is not None:
                other_node = self.nodes.get(other)
                if other_node is None or other_node.category is not category_filter:
                    continue
            scored.append((other, self.conditional_probability(other, node)))
        scored.sort(key=lambda item: (-item[1], item[0]))
        return scored[:k]

    def query_attribute(
        self, drug: str, category: EntityCategory
    ) -> List[Tuple[str, int, List[EvidenceRef]]]:
        """Attribute values reported for a drug, most frequent first.

        Returns (value, count, evidence) triples sorted by count descending
        then value. Raises UnknownDrugError when the drug has no CHEMICAL
        node in the graph.
        """
        node = self.nodes.get(drug)
        if node is None or node.category is not EntityCategory.CHEMICAL:
            raise UnknownDrugError(f"unknown drug {drug!r}")
        rows = [
            (value, slot[0], list(slot[1].refs))
            for (d, cat, value), slot in self._attributes.items()
            if d == drug and cat == category.value
        ]
        rows.sort(key=lambda row: (-row[1], row[0]))
        return rows

    def semantic_edges(self) -> List[SemanticEdge]:
        return [
            SemanticEdge(subject=s, object=o, descriptor=d, evidence=tuple(ev.refs))
            for (s, o, d), ev in sorted(self._semantic.items())
        ]

    def cooccurrence_evidence(self, a: str, b: str) -> List[EvidenceRef]:
        evl = self._cooc_evidence.get(_pair(a, b))
        return list(evl.refs) if evl else []

    # -- merge / serialization -------------------------------------------

    def merge(self, other: "KnowledgeGraph") -> "KnowledgeGraph":
        """Combine two graphs built from disjoint corpora into a new graph."""
        merged = KnowledgeGraph()
        for graph in (self, other):
            merged.total_sentences += graph.total_sentences
            for key, node in graph.nodes.items():
                target = merged._node(key, node.category)
                target.mention_count += node.mention_count
                target.sentence_count += node.sentence_count
            for pair, count in graph._cooc.items():
                merged._cooc[pair] = merged._cooc.get(pair, 0) + count
                merged._cooc_evidence.setdefault(pair, _EvidenceList()).merge(
                    graph._cooc_evidence.get(pair, _EvidenceList())
                )
            for key, evl in graph._semantic.items():
                merged._semantic.setdefault(key, _EvidenceList()).merge(evl)
            for attr_key, slot in graph._attributes.items():
                target_slot = merged._attributes.setdefault(attr_key, [0, _EvidenceList()])
                target_slot[0] += slot[0]
                target_slot[1].merge(slot[1])
        return merged

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "total_sentences": self.total_sentences,
            "nodes": [
                {
                    "lemma_key": node.lemma_key,
                    "category": node.category.value,
                    "mention_count": node.mention_count,
                    "sentence_count": node.sentence_count,
                }
                for _, node in sorted(self.nodes.items())
            ],
            "cooccurrence": [
                {
                    "a": a,
                    "b": b,
                    "count": count,
                    "evidence": [list(r) for r in self.cooccurrence_evidence(a, b)],
                }
                for (a, b), count in sorted(self._cooc.items())
                if count > 0
            ],
            "semantic": [
                {
                    "subject": edge.subject,
                    "object": edge.object,
                    "descriptor": edge.descriptor,
                    "evidence": [list(r) for r in edge.evidence],
                }
                for edge in self.semantic_edges()
            ],
            "attributes": [
                {
                    "drug": drug,
                    "attribute_category": cat,
                    "value": value,
                    "count": slot[0],
                    "evidence": [list(r) for r in slot[1].refs],
                }
                for (drug, cat, value), slot in sorted(self._attributes.items())
            ],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "KnowledgeGraph":
        graph = cls()
        try:
            version = payload["schema_version"]
            if version != SCHEMA_VERSION:
                raise GraphVersionError(
                    f"unsupported graph schema version {version!r} "
                    f"(expected {SCHEMA_VERSION})"
                )
            graph.total_sentences = int(payload["total_sentences"])
            for row in payload["nodes"]:
                graph.nodes[row["lemma_key"]] = KGNode(
                    lemma_key=row["lemma_key"],
                    category=EntityCategory(row["category"]),
                    mention_count=int(row["mention_count"]),
                    sentence_count=int(row["sentence_count"]),
                )
            for row in payload["cooccurrence"]:
                pair = _pair(row["a"], row["b"])
                graph._cooc[pair] = int(row["count"])
                graph._cooc_evidence[pair] = _EvidenceList(
                    (r[0], int(r[1])) for r in row.get("evidence", [])
                )
            for row in payload["semantic"]:
                graph._semantic[
                    (row["subject"], row["object"], row["descriptor"])
                ] = _EvidenceList((r[0], int(r[1])) for r in row.get("evidence", []))
            for row in payload["attributes"]:
                graph._attributes[
                    (row["drug"], row["attribute_category"], row["value"])
                ] = [
                    int(row["count"]),
                    _EvidenceList((r[0], int(r[1])) for r in row.get("evidence", [])),
                ]
        except GraphVersionError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise GraphParseError(f"malformed graph payload: {exc}") from exc
        return graph

    def __eq__(self, other) -> bool:
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def _span_gap(a: Entity, b: Entity) -> int:
    """Characters between two entity spans (0 when they touch or overlap)."""
    return max(0, a.start - b.end, b.start - a.end)


# -- semantic relation patterns -----------------------------------------


@dataclass(frozen=True)
class RelationPattern:
    lemmas: Tuple[str, ...]
    descriptor: str
    reverse: bool


def load_relation_patterns(path: Optional[Path] = None) -> List[RelationPattern]:
    """Load connector phrases (bundled table when no path given).

    Longer phrases sort first so that a specific connector ("treated with")
    beats a generic one ("treats") sharing a lemma; table order breaks ties.
    """
    from .corpus import _data_path, _read_lexicon_lines
    from .ner import _phrase_lemmas

    patterns = []
    seen = set()
    for line in _read_lexicon_lines(path or _data_path("relations.csv")):
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3 or parts[2] not in ("forward", "reverse"):
            logger.warning("ignoring malformed relations row: %r", line)
            continue
        lemmas = _phrase_lemmas(parts[0])
        if not lemmas or lemmas in seen:
            continue
        seen.add(lemmas)
        patterns.append(
            RelationPattern(
                lemmas=lemmas, descriptor=parts[1], reverse=parts[2] == "reverse"
            )
        )
    patterns.sort(key=lambda p: -len(p.lemmas))
    return patterns


def _contains_subsequence(haystack: List[str], needle: Tuple[str, ...]) -> bool:
    n = len(needle)
    return any(
        tuple(haystack[i : i + n]) == needle for i in range(len(haystack) - n + 1)
    )


def extract_semantic_edges(
    sentence: Sentence,
    entities: List[Entity],
    patterns: List[RelationPattern],
) -> List[SemanticEdge]:
    """Find relation phrases between adjacent concept entity pairs.

    For each pair of consecutive non-attribute entities, the token lemmas
    strictly between them are scanned for a connector phrase; the first
    pattern (in table order) that occurs contiguously wins and yields one
    directed edge.
    """
    concepts = [e for e in entities if e.category not in ATTRIBUTE_CATEGORIES]
    edges = []
    ref = (sentence.doc_id, sentence.index)
    for left, right in zip(concepts, concepts[1:]):
        gap = [
            t.lemma
            for t in sentence.tokens
            if left.end <= t.start and t.end <= right.start
        ]
        if not gap:
            continue
        for pattern in patterns:
            if not _contains_subsequence(gap, pattern.lemmas):
                continue
            subject, obj = left.lemma_key, right.lemma_key
            if pattern.reverse:
                subject, obj = obj, subject
            if subject != obj:
                edges.append(
                    SemanticEdge(
                        subject=subject,
                        object=obj,
                        descriptor=pattern.descriptor,
                        evidence=(ref,),
                    )
                )
            break
    return edges


# -- build pipeline ------------------------------------------------------


def build_graph(
    documents: List[Document],
    gazetteer: Gazetteer,
    patterns: Optional[List[RelationPattern]] = None,
) -> Tuple[KnowledgeGraph, BuildReport]:
    """Build a knowledge graph from documents; also returns count report."""
    if patterns is None:
        patterns = load_relation_patterns()
    graph = KnowledgeGraph()
    report = BuildReport(documents=len(documents))
    for doc in documents:
        for sentence in split_sentences(doc):
            entities = extract_entities(sentence, gazetteer)
            report.sentences += 1
            report.entities += len(entities)
            graph.add_sentence(sentence, entities)
            for edge in extract_semantic_edges(sentence, entities, patterns):
                graph.add_semantic_edge(edge)
    report.nodes = len(graph.nodes)
    report.cooccurrence_edges = len(graph._cooc)
    report.semantic_edges = len(graph._semantic)
    report.attribute_edges = len(graph._attributes)
    return graph, report


# -- file round-trip -------------------------------------------------------


def export_graph(graph: KnowledgeGraph, path) -> None:
    """Write the graph as canonical JSON (sorted keys, stable layout)."""
    path = Path(path)
    payload = json.dumps(graph.to_dict(), indent=2, sort_keys=True) + "\n"
    path.write_text(payload, encoding="utf-8")


def import_graph(path) -> KnowledgeGraph:
    """Read a graph file; version and shape problems raise typed errors."""
    path = Path(path)
    if not path.is_file():
        raise GraphParseError(f"graph file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise GraphParseError(
            f"invalid JSON in {path} at line {exc.lineno} column {exc.colno}: "
            f"{exc.msg}"
        ) from exc
    if not isinstance(payload, dict):
        raise GraphParseError(f"graph file {path} must contain a JSON object")
    return KnowledgeGraph.from_dict(payload)
