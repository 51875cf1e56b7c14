"""Entity extraction: gazetteer phrase matching plus number+unit patterns."""

import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .corpus import Sentence, _data_path, _read_lexicon_lines, lemmatize_word, tokenize
from .errors import GazetteerError

logger = logging.getLogger(__name__)


class EntityCategory(str, Enum):
    DISEASE = "DISEASE"
    CHEMICAL = "CHEMICAL"
    FORM = "FORM"
    ROUTE = "ROUTE"
    FREQUENCY = "FREQUENCY"
    DOSAGE = "DOSAGE"
    STRENGTH = "STRENGTH"
    DURATION = "DURATION"


# Categories that attach to a drug as attribute edges rather than becoming
# co-occurrence nodes.
ATTRIBUTE_CATEGORIES = frozenset(
    {
        EntityCategory.FORM,
        EntityCategory.ROUTE,
        EntityCategory.FREQUENCY,
        EntityCategory.DOSAGE,
        EntityCategory.STRENGTH,
        EntityCategory.DURATION,
    }
)


@dataclass(frozen=True)
class Entity:
    """A recognized span: where it was, what it says, and its graph key."""

    surface: str
    lemma_key: str
    category: EntityCategory
    doc_id: str
    sentence_index: int
    start: int
    end: int


def normalize(surface: str) -> str:
    """Lowercase, lemmatize and whitespace-collapse a surface phrase."""
    return " ".join(lemmatize_word(w) for w in surface.split())


def _phrase_lemmas(phrase: str) -> Tuple[str, ...]:
    return tuple(t.lemma for t in tokenize(phrase))


@dataclass
class Gazetteer:
    """Lemma-sequence lookup table plus number+unit attribute patterns."""

    entries: Dict[Tuple[str, ...], Tuple[EntityCategory, str]] = field(
        default_factory=dict
    )
    unit_patterns: Dict[str, EntityCategory] = field(default_factory=dict)

    def __post_init__(self):
        self._max_len = max((len(k) for k in self.entries), default=1)

    def add_phrase(
        self, phrase: str, category: EntityCategory, canonical: Optional[str] = None
    ) -> None:
        lemmas = _phrase_lemmas(phrase)
        if not lemmas:
            return
        key = canonical if canonical is not None else " ".join(lemmas)
        existing = self.entries.get(lemmas)
        if existing is not None and existing != (category, key):
            raise GazetteerError(
                f"conflicting gazetteer definitions for term {phrase!r}: "
                f"{existing[0].value}/{existing[1]!r} vs {category.value}/{key!r}"
            )
        self.entries[lemmas] = (category, key)
        self._max_len = max(self._max_len, len(lemmas))

    def terms_of(self, category: EntityCategory) -> List[str]:
        """Distinct canonical keys for one category, sorted."""
        return sorted({key for cat, key in self.entries.values() if cat == category})

    def __len__(self) -> int:
        return len(self.entries)


def load_gazetteer(
    path: Optional[Path] = None,
    units_path: Optional[Path] = None,
    colloquial_path: Optional[Path] = None,
    include_colloquial: bool = True,
) -> Gazetteer:
    """Load the term gazetteer (bundled files when no paths are given).

    Colloquial phrasings are folded in as DISEASE synonyms pointing at
    canonical keys so that chat messages and literature share one key space.
    """
    gaz = Gazetteer()
    rows = _read_lexicon_lines(path or _data_path("gazetteer.csv"))
    for line in rows:
        parts = [p.strip() for p in line.split(",")]
        if len(parts) < 2:
            logger.warning("ignoring malformed gazetteer row: %r", line)
            continue
        term, cat_name = parts[0], parts[1]
        canonical = normalize(parts[2]) if len(parts) > 2 and parts[2] else None
        try:
            category = EntityCategory(cat_name)
        except ValueError:
            logger.warning("ignoring gazetteer row with bad category: %r", line)
            continue
        gaz.add_phrase(term, category, canonical)
    if len(gaz) == 0:
        logger.warning("gazetteer file has no usable entries")
    for line in _read_lexicon_lines(units_path or _data_path("units.csv")):
        unit, _, cat_name = line.partition(",")
        try:
            category = EntityCategory(cat_name.strip())
        except ValueError:
            logger.warning("ignoring units row with bad category: %r", line)
            continue
        gaz.unit_patterns[lemmatize_word(unit.strip())] = category
    if include_colloquial:
        for line in _read_lexicon_lines(
            colloquial_path or _data_path("colloquial.csv")
        ):
            phrase, _, key = line.partition(",")
            gaz.add_phrase(phrase.strip(), EntityCategory.DISEASE, normalize(key.strip()))
    return gaz


_NUMBER_RE = re.compile(r"^\d+(?:\.\d+)?$")
_FUSED_RE = re.compile(r"^(\d+(?:\.\d+)?)([a-z]+)$")


def extract_entities(sentence: Sentence, gazetteer: Gazetteer) -> List[Entity]:
    """Extract non-overlapping entities from one sentence.

    Pass 1 runs greedy longest-match of gazetteer lemma sequences left to
    right. Pass 2 applies number+unit patterns ("5 days", "500mg") on token
    spans no gazetteer match covered. Entities come back in span order.
    """
    tokens = sentence.tokens
    n = len(tokens)
    covered = [False] * n
    entities: List[Entity] = []

    i = 0
    while i < n:
        matched = False
        for length in range(min(gazetteer._max_len, n - i), 0, -1):
            seq = tuple(t.lemma for t in tokens[i : i + length])
            hit = gazetteer.entries.get(seq)
            if hit is None:
                continue
            category, key = hit
            entities.append(
                Entity(
                    surface=sentence.text[tokens[i].start : tokens[i + length - 1].end],
                    lemma_key=key,
                    category=category,
                    doc_id=sentence.doc_id,
                    sentence_index=sentence.index,
                    start=tokens[i].start,
                    end=tokens[i + length - 1].end,
                )
            )
            for j in range(i, i + length):
                covered[j] = True
            i += length
            matched = True
            break
        if not matched:
            i += 1

    for i, token in enumerate(tokens):
        if covered[i]:
            continue
        if (
            _NUMBER_RE.match(token.lemma)
            and i + 1 < n
            and not covered[i + 1]
            and tokens[i + 1].lemma in gazetteer.unit_patterns
        ):
            surface = sentence.text[token.start : tokens[i + 1].end]
            entities.append(
                Entity(
                    surface=surface,
                    lemma_key=normalize(surface),
                    category=gazetteer.unit_patterns[tokens[i + 1].lemma],
                    doc_id=sentence.doc_id,
                    sentence_index=sentence.index,
                    start=token.start,
                    end=tokens[i + 1].end,
                )
            )
            covered[i] = covered[i + 1] = True
            continue
        fused = _FUSED_RE.match(token.lemma)
        if fused and fused.group(2) in gazetteer.unit_patterns:
            entities.append(
                Entity(
                    surface=token.surface,
                    lemma_key=normalize(token.surface),
                    category=gazetteer.unit_patterns[fused.group(2)],
                    doc_id=sentence.doc_id,
                    sentence_index=sentence.index,
                    start=token.start,
                    end=token.end,
                )
            )
            covered[i] = True

    entities.sort(key=lambda e: e.start)
    return entities
