"""Plain helpers shared by the test modules (no pytest machinery)."""

from datetime import datetime, timedelta, timezone
from pathlib import Path

from medgraphbot.corpus import Document, Sentence, tokenize
from medgraphbot.patient import EventKind, PatientEvent

PACKAGE_DATA = Path(__file__).resolve().parents[1] / "src" / "medgraphbot" / "data"
FIXTURES = Path(__file__).resolve().parent / "fixtures"
SCHEMAS = Path(__file__).resolve().parents[1] / "api_schemas"

BASE_TIME = datetime(2021, 1, 1, 12, 0, 0, tzinfo=timezone.utc)


def at(seconds: float) -> datetime:
    """Timestamp a given number of seconds after the shared test epoch."""
    return BASE_TIME + timedelta(seconds=seconds)


def symptom(seconds: float, key: str, raw: str = "") -> PatientEvent:
    return PatientEvent(
        timestamp=at(seconds), kind=EventKind.SYMPTOM, lemma_key=key, raw_text=raw
    )


def drug(seconds: float, key: str, raw: str = "") -> PatientEvent:
    return PatientEvent(
        timestamp=at(seconds), kind=EventKind.DRUG, lemma_key=key, raw_text=raw
    )


class FakeClock:
    """Deterministic clock for session-boundary and service tests."""

    def __init__(self, start: datetime = BASE_TIME):
        self.now = start

    def __call__(self) -> datetime:
        return self.now

    def advance(self, seconds: float) -> datetime:
        self.now = self.now + timedelta(seconds=seconds)
        return self.now


def make_sentence(text: str, doc_id: str = "t", index: int = 0) -> Sentence:
    return Sentence(doc_id=doc_id, index=index, text=text, tokens=tuple(tokenize(text)))


def mini_documents():
    """Four one-sentence documents giving P(fever|cough) = 3/4 by hand."""
    texts = ["Fever and cough.", "Fever and cough.", "Fever and cough.",
             "Cough and diarrhea."]
    return [
        Document(doc_id=f"m{i + 1}", title="", abstract=text, body="",
                 publish_date=None)
        for i, text in enumerate(texts)
    ]
