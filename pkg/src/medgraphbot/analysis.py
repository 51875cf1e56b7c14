"""Corpus-level descriptive statistics: word ranks, symptom counts, trends."""

import logging
from collections import Counter
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .corpus import (
    Document,
    filter_covid_docs,
    remove_stopwords,
    split_sentences,
    tokenize,
)
from .ner import EntityCategory, Gazetteer, extract_entities

logger = logging.getLogger(__name__)


def title_word_frequencies(
    documents: List[Document], top_n: int = 20, covid_only: bool = True
) -> List[Tuple[str, int]]:
    """Most frequent content-word lemmas across document titles.

    Stopwords and punctuation are dropped; counts are mention counts, not
    document counts. Result is sorted by count descending, then lemma.
    """
    if covid_only:
        documents = filter_covid_docs(documents)
    counts: Counter = Counter()
    for doc in documents:
        for token in remove_stopwords(tokenize(doc.title)):
            counts[token.lemma] += 1
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return ranked[:top_n]


def symptom_document_counts(
    documents: List[Document], gazetteer: Gazetteer, covid_only: bool = True
) -> List[Tuple[str, int]]:
    """Documents mentioning each known symptom at least once.

    Every DISEASE key of the gazetteer appears in the result, including the
    ones counted zero times. Sorted by count descending, then key.
    """
    if covid_only:
        documents = filter_covid_docs(documents)
    keys = gazetteer.terms_of(EntityCategory.DISEASE)
    counts = {key: 0 for key in keys}
    for doc in documents:
        seen = set()
        for sentence in split_sentences(doc):
            for entity in extract_entities(sentence, gazetteer):
                if entity.category is EntityCategory.DISEASE:
                    seen.add(entity.lemma_key)
        for key in seen:
            if key in counts:
                counts[key] += 1
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return ranked


@dataclass(frozen=True)
class TrendPoint:
    month: str  # "YYYY-MM"
    document_count: int


def _month_of(doc: Document) -> Optional[str]:
    if doc.publish_date is None:
        return None
    return f"{doc.publish_date.year:04d}-{doc.publish_date.month:02d}"


def _next_month(month: str) -> str:
    year, mon = map(int, month.split("-"))
    if mon == 12:
        return f"{year + 1:04d}-01"
    return f"{year:04d}-{mon + 1:02d}"


def _mentions_term(doc: Document, term_lemmas: Tuple[str, ...]) -> bool:
    for part in (doc.title, doc.abstract, doc.body):
        if not part:
            continue
        lemmas = [t.lemma for t in tokenize(part)]
        n = len(term_lemmas)
        if any(
            tuple(lemmas[i : i + n]) == term_lemmas
            for i in range(len(lemmas) - n + 1)
        ):
            return True
    return False


def monthly_trend(
    documents: List[Document], term: str, covid_only: bool = True
) -> List[TrendPoint]:
    """Documents per month that mention a term (as a lemma sequence).

    The month axis spans from the first to the last dated document in the
    (filtered) corpus with no gaps; months with zero mentions still appear.
    Undated documents are ignored.
    """
    if covid_only:
        documents = filter_covid_docs(documents)
    dated = [d for d in documents if d.publish_date is not None]
    if not dated:
        return []
    term_lemmas = tuple(t.lemma for t in tokenize(term))
    if not term_lemmas:
        raise ValueError("term must contain at least one token")
    months = sorted({_month_of(d) for d in dated})
    counts: Counter = Counter()
    for doc in dated:
        if _mentions_term(doc, term_lemmas):
            counts[_month_of(doc)] += 1
    span = []
    month = months[0]
    while True:
        span.append(TrendPoint(month=month, document_count=counts.get(month, 0)))
        if month == months[-1]:
            break
        month = _next_month(month)
    return span
