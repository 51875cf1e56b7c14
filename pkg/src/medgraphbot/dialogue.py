"""Chat understanding and reply generation.

Intent classification is nearest-example cosine over term frequencies of
lemmatized tokens (stopwords kept: words like "not" carry intent). Replies
come from a template table and pass a banned-phrase safety filter before
they leave this module.
"""

import json
import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .config import DEFAULT_GUIDELINE_URL
from .corpus import Sentence, _data_path, _read_lexicon_lines, tokenize
from .errors import ConfigurationError, PersistenceError, UnknownDrugError
from .kg import KnowledgeGraph
from .ner import Entity, EntityCategory, Gazetteer, extract_entities
from .patient import (
    EventKind,
    PatientEvent,
    PatientProfile,
    PatientStore,
    SESSION_GAP_SECONDS,
    utcnow,
)

logger = logging.getLogger(__name__)

DEFAULT_INTENT_THRESHOLD = 0.35

# The check-in question asked when a patient returns after a session gap.
FOLLOW_UP_TEMPLATE = (
    "You mentioned in our last conversation that you have symptoms of "
    "{symptoms}. How do you feel about them now?"
)


class IntentTag(str, Enum):
    """Supported intents; declaration order breaks classification ties."""

    GREET = "GREET"
    GOODBYE = "GOODBYE"
    AFFIRM = "AFFIRM"
    DENY = "DENY"
    REPORT_SYMPTOM = "REPORT_SYMPTOM"
    REPORT_DRUG = "REPORT_DRUG"
    FIND_DOSAGE = "FIND_DOSAGE"
    ASK_INFO = "ASK_INFO"
    OUT_OF_SCOPE = "OUT_OF_SCOPE"


_TAG_ORDER = {tag: i for i, tag in enumerate(IntentTag)}


@dataclass(frozen=True)
class Intent:
    tag: IntentTag
    confidence: float


@dataclass(frozen=True)
class ParsedMessage:
    text: str
    intent: Intent
    entities: Tuple[Entity, ...]


@dataclass(frozen=True)
class BotResponse:
    text: str
    recorded: Tuple[Tuple[EventKind, str], ...] = ()
    guideline_link: Optional[str] = None
    evidence_sentences: Tuple[str, ...] = ()


def _message_lemmas(text: str) -> List[str]:
    """Lemmas of the word tokens of a message (punctuation dropped)."""
    return [t.lemma for t in tokenize(text) if not _is_punct(t.surface)]


def _is_punct(surface: str) -> bool:
    return not re.search(r"[A-Za-z0-9]", surface)


def _tf_vector(lemmas: Sequence[str]) -> Tuple[Counter, float]:
    counts = Counter(lemmas)
    norm = math.sqrt(sum(c * c for c in counts.values()))
    return counts, norm


def _cosine(a: Tuple[Counter, float], b: Tuple[Counter, float]) -> float:
    counts_a, norm_a = a
    counts_b, norm_b = b
    if norm_a == 0 or norm_b == 0:
        return 0.0
    if len(counts_b) < len(counts_a):
        counts_a, counts_b = counts_b, counts_a
    dot = sum(c * counts_b.get(term, 0) for term, c in counts_a.items())
    return dot / (norm_a * norm_b)


class TrainingSet:
    """Labelled example utterances with precomputed TF vectors."""

    def __init__(self, examples: List[Tuple[str, IntentTag]]):
        self.examples = examples
        self._vectors = [
            (_tf_vector(_message_lemmas(text)), tag) for text, tag in examples
        ]

    def __len__(self) -> int:
        return len(self.examples)

    def tags(self) -> List[IntentTag]:
        return sorted({tag for _, tag in self.examples}, key=_TAG_ORDER.get)

    def best_match(self, text: str) -> Tuple[Optional[IntentTag], float]:
        """Highest cosine tag for a message; ties prefer earlier tag order."""
        vector = _tf_vector(_message_lemmas(text))
        best_tag, best_score = None, 0.0
        for example_vector, tag in self._vectors:
            score = _cosine(vector, example_vector)
            if score > best_score or (
                score == best_score
                and best_tag is not None
                and score > 0
                and _TAG_ORDER[tag] < _TAG_ORDER[best_tag]
            ):
                best_tag, best_score = tag, score
        return best_tag, best_score


def load_training_set(path: Optional[Path] = None) -> TrainingSet:
    """Load intent examples (bundled table when no path is given)."""
    path = path or _data_path("intents.json")
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    examples = [
        (row["text"], IntentTag(row["intent"])) for row in payload["examples"]
    ]
    return TrainingSet(examples)


def classify_intent(
    text: str,
    training_set: TrainingSet,
    threshold: float = DEFAULT_INTENT_THRESHOLD,
) -> Intent:
    """Nearest-example intent; below the threshold it is OUT_OF_SCOPE."""
    if len(training_set) == 0:
        raise ConfigurationError("intent training set is empty")
    tag, score = training_set.best_match(text)
    if tag is None or score < threshold:
        return Intent(tag=IntentTag.OUT_OF_SCOPE, confidence=score)
    return Intent(tag=tag, confidence=score)


def parse_message(
    text: str,
    gazetteer: Gazetteer,
    training_set: TrainingSet,
    threshold: float = DEFAULT_INTENT_THRESHOLD,
) -> ParsedMessage:
    """Classify a chat message and extract its entities."""
    intent = classify_intent(text, training_set, threshold)
    sentence = Sentence(
        doc_id="chat", index=0, text=text, tokens=tuple(tokenize(text))
    )
    entities = tuple(extract_entities(sentence, gazetteer))
    return ParsedMessage(text=text, intent=intent, entities=entities)


def load_templates(path: Optional[Path] = None) -> Dict[str, List[str]]:
    path = path or _data_path("templates.json")
    return json.loads(Path(path).read_text(encoding="utf-8"))


def load_banned_phrases(path: Optional[Path] = None) -> List[str]:
    path = path or _data_path("banned_phrases.txt")
    return [line.lower() for line in _read_lexicon_lines(path)]


def find_banned_phrase(text: str, banned: List[str]) -> Optional[str]:
    lowered = text.lower()
    for phrase in banned:
        if phrase in lowered:
            return phrase
    return None


# Keywords that pick which attribute category a dosage-style question asks
# about; the first matching group wins, DOSAGE is the default.
_ATTRIBUTE_KEYWORDS = (
    (("how long", "duration", "how many days", "for days"), EntityCategory.DURATION),
    (("how often", "frequency", "how frequently"), EntityCategory.FREQUENCY),
    (("strength", "how strong", "concentration"), EntityCategory.STRENGTH),
    (("dosage", "dose", "how much", "how many"), EntityCategory.DOSAGE),
)


def attribute_category_for(text: str) -> EntityCategory:
    lowered = text.lower()
    for keywords, category in _ATTRIBUTE_KEYWORDS:
        if any(kw in lowered for kw in keywords):
            return category
    return EntityCategory.DOSAGE


def format_evidence_ref(doc_id: str, sentence_index: int) -> str:
    return f"{doc_id} (sentence {sentence_index + 1})"


def follow_up_question(
    profile: Optional[PatientProfile],
    now: Optional[datetime] = None,
    session_gap: int = SESSION_GAP_SECONDS,
) -> Optional[str]:
    """Check-in question about the previous session's symptoms, or None.

    Asked only when the last activity is at least one session gap old (the
    next message will open a new session) and the latest session with events
    reported at least one symptom. Symptom keys keep first-report order.
    """
    if profile is None or not profile.sessions:
        return None
    now = now or utcnow()
    last = profile.last_activity()
    if last is None or (now - last).total_seconds() < session_gap:
        return None
    for session in reversed(profile.sessions):
        symptoms = []
        for event in session.events:
            if event.kind is EventKind.SYMPTOM and event.lemma_key not in symptoms:
                symptoms.append(event.lemma_key)
        if symptoms:
            return FOLLOW_UP_TEMPLATE.format(symptoms=", ".join(symptoms))
        if session.events:
            return None
    return None


class DialogueEngine:
    """Binds lexicons, templates and thresholds into one chat responder."""

    def __init__(
        self,
        gazetteer: Optional[Gazetteer] = None,
        training_set: Optional[TrainingSet] = None,
        templates: Optional[Dict[str, List[str]]] = None,
        banned_phrases: Optional[List[str]] = None,
        guideline_url: str = DEFAULT_GUIDELINE_URL,
        intent_threshold: float = DEFAULT_INTENT_THRESHOLD,
        session_gap: int = SESSION_GAP_SECONDS,
    ):
        from .ner import load_gazetteer

        self.gazetteer = gazetteer or load_gazetteer()
        self.training_set = training_set or load_training_set()
        self.templates = templates or load_templates()
        self.banned_phrases = (
            banned_phrases if banned_phrases is not None else load_banned_phrases()
        )
        self.guideline_url = guideline_url
        self.intent_threshold = intent_threshold
        self.session_gap = session_gap

    # -- helpers -----------------------------------------------------------

    def _template(self, key: str, **slots) -> str:
        candidates = self.templates.get(key) or [key]
        return candidates[0].format(**slots)

    def _apply_safety_filter(self, response: BotResponse) -> BotResponse:
        hit = find_banned_phrase(response.text, self.banned_phrases)
        if hit is None:
            return response
        logger.warning("reply suppressed by safety filter (matched %r)", hit)
        fallback = self._template(
            "safety_fallback", guideline_url=self.guideline_url
        )
        return BotResponse(
            text=fallback,
            recorded=response.recorded,
            guideline_link=self.guideline_url,
            evidence_sentences=(),
        )

    # -- public API -------------------------------------------------------

    def parse_message(self, text: str) -> ParsedMessage:
        return parse_message(
            text, self.gazetteer, self.training_set, self.intent_threshold
        )

    def respond(
        self,
        parsed: ParsedMessage,
        patient_id: str,
        store: PatientStore,
        graph: Optional[KnowledgeGraph] = None,
        timestamp: Optional[datetime] = None,
    ) -> BotResponse:
        """Produce the reply for a parsed message, recording events."""
        tag = parsed.intent.tag
        if tag in (IntentTag.REPORT_SYMPTOM, IntentTag.REPORT_DRUG):
            response = self._respond_report(parsed, patient_id, store, timestamp)
        elif tag is IntentTag.FIND_DOSAGE:
            response = self._respond_dosage(parsed, graph)
        elif tag is IntentTag.ASK_INFO:
            response = self._respond_info(parsed, graph)
        elif tag is IntentTag.GREET:
            response = BotResponse(text=self._template("greet"))
        elif tag is IntentTag.GOODBYE:
            response = BotResponse(text=self._template("goodbye"))
        elif tag is IntentTag.AFFIRM:
            response = BotResponse(text=self._template("affirm"))
        elif tag is IntentTag.DENY:
            response = BotResponse(text=self._template("deny"))
        else:
            response = BotResponse(text=self._template("out_of_scope"))
        return self._apply_safety_filter(response)

    def _respond_report(
        self,
        parsed: ParsedMessage,
        patient_id: str,
        store: PatientStore,
        timestamp: Optional[datetime],
    ) -> BotResponse:
        ts = timestamp or utcnow()
        recordable = [
            e
            for e in parsed.entities
            if e.category in (EntityCategory.DISEASE, EntityCategory.CHEMICAL)
        ]
        if not recordable:
            return BotResponse(text=self._template("report_empty"))
        recorded: List[Tuple[EventKind, str]] = []
        try:
            for entity in recordable:
                kind = (
                    EventKind.SYMPTOM
                    if entity.category is EntityCategory.DISEASE
                    else EventKind.DRUG
                )
                store.record_event(
                    patient_id,
                    PatientEvent(
                        timestamp=ts,
                        kind=kind,
                        lemma_key=entity.lemma_key,
                        raw_text=entity.surface,
                    ),
                )
                recorded.append((kind, entity.lemma_key))
        except PersistenceError:
            logger.exception("failed to persist report for %s", patient_id)
            return BotResponse(text=self._template("persistence_error"))
        symptoms = [key for kind, key in recorded if kind is EventKind.SYMPTOM]
        drugs = [key for kind, key in recorded if kind is EventKind.DRUG]
        parts = []
        if symptoms:
            parts.append(
                self._template("symptom_recorded", items=", ".join(symptoms))
            )
        if drugs:
            parts.append(self._template("drug_recorded", items=", ".join(drugs)))
        return BotResponse(text=" ".join(parts), recorded=tuple(recorded))

    def _respond_dosage(
        self, parsed: ParsedMessage, graph: Optional[KnowledgeGraph]
    ) -> BotResponse:
        drug_entity = next(
            (e for e in parsed.entities if e.category is EntityCategory.CHEMICAL),
            None,
        )
        if drug_entity is None:
            return BotResponse(
                text=self._template("dosage_missing_drug"),
                guideline_link=self.guideline_url,
            )
        category = attribute_category_for(parsed.text)
        drug = drug_entity.lemma_key
        if graph is None:
            rows = []
        else:
            try:
                rows = graph.query_attribute(drug, category)
            except UnknownDrugError:
                return BotResponse(
                    text=self._template(
                        "dosage_unknown_drug",
                        drug=drug,
                        guideline_url=self.guideline_url,
                    ),
                    guideline_link=self.guideline_url,
                )
        if not rows:
            return BotResponse(
                text=self._template(
                    "dosage_no_value",
                    category=category.value.lower(),
                    drug=drug,
                    guideline_url=self.guideline_url,
                ),
                guideline_link=self.guideline_url,
            )
        value, count, evidence = rows[0]
        refs = [format_evidence_ref(doc, idx) for doc, idx in evidence[:3]]
        return BotResponse(
            text=self._template(
                "dosage_answer",
                value=value,
                category=category.value.lower(),
                drug=drug,
                evidence="; ".join(refs) or "the collected literature",
                guideline_url=self.guideline_url,
            ),
            guideline_link=self.guideline_url,
            evidence_sentences=tuple(refs),
        )

    def _respond_info(
        self, parsed: ParsedMessage, graph: Optional[KnowledgeGraph]
    ) -> BotResponse:
        topic = next(
            (
                e.lemma_key
                for e in parsed.entities
                if e.category in (EntityCategory.DISEASE, EntityCategory.CHEMICAL)
            ),
            None,
        )
        if graph is not None and topic is not None and topic in graph.nodes:
            related = graph.neighbors(topic, k=3)
            if related:
                refs = []
                for other, _ in related:
                    for doc, idx in graph.cooccurrence_evidence(topic, other)[:1]:
                        refs.append(format_evidence_ref(doc, idx))
                return BotResponse(
                    text=self._template(
                        "ask_info_answer",
                        topic=topic,
                        related=", ".join(key for key, _ in related),
                        guideline_url=self.guideline_url,
                    ),
                    guideline_link=self.guideline_url,
                    evidence_sentences=tuple(refs),
                )
        return BotResponse(
            text=self._template(
                "ask_info_generic", guideline_url=self.guideline_url
            ),
            guideline_link=self.guideline_url,
        )

    def follow_up_question(
        self, profile: Optional[PatientProfile], now: Optional[datetime] = None
    ) -> Optional[str]:
        return follow_up_question(profile, now=now, session_gap=self.session_gap)

    def start_conversation(
        self,
        patient_id: str,
        store: PatientStore,
        now: Optional[datetime] = None,
    ) -> BotResponse:
        """Greeting for a patient opening a chat, plus a follow-up check-in."""
        now = now or store.clock()
        profile = store.get(patient_id)
        text = self._template("greet")
        question = self.follow_up_question(profile, now=now)
        if question:
            text = f"{text} {question}"
        store.touch(patient_id, now)
        return self._apply_safety_filter(BotResponse(text=text))
