"""Corpus loading, tokenization, lemmatization and sentence splitting.

Everything downstream (entity extraction, graph building, intent
classification) works on the token/lemma representation produced here, so
the rules in this module are deliberately deterministic and dependency-free.
"""

import csv
import json
import logging
import re
from dataclasses import dataclass, field, replace
from datetime import date
from importlib import resources
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Tuple

from .errors import CorpusError, EmptyCorpusError

logger = logging.getLogger(__name__)

# Words or word-joined-by '/- that count as one token; any other non-space
# character is its own (punctuation) token.
_TOKEN_RE = re.compile(r"[A-Za-z0-9]+(?:['\-][A-Za-z0-9]+)*|[^\sA-Za-z0-9]")

_WORD_RE = re.compile(r"[A-Za-z0-9]")

# Substrings that mark a document as coronavirus-related (matched on the
# lowercased title + abstract + body).
COVID_KEYWORDS = (
    "covid-19",
    "coronavirus",
    "cov-2",
    "sars-cov-2",
    "sars-cov",
    "hcov",
    "2019-ncov",
)

# Dots after these tokens do not end a sentence.
_ABBREVIATIONS = frozenset(
    {
        "e.g", "eg", "i.e", "ie", "etc", "et", "al", "cf", "ca", "approx",
        "dr", "mr", "mrs", "ms", "prof", "fig", "figs", "vs", "no", "st",
    }
)

_SENTENCE_BOUNDARY_RE = re.compile(r"[.!?]+")


@dataclass(frozen=True)
class Token:
    """One token with its position in the original text."""

    surface: str
    lemma: str
    start: int
    end: int
    is_stopword: bool = False


@dataclass(frozen=True)
class Sentence:
    """A sentence with its tokens, addressable as (doc_id, index)."""

    doc_id: str
    index: int
    text: str
    tokens: Tuple[Token, ...] = ()


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    abstract: str
    body: str = ""
    publish_date: Optional[date] = None


@dataclass
class LoadResult:
    """Documents that survived loading plus a skip report."""

    documents: List[Document] = field(default_factory=list)
    skipped: int = 0
    errors: List[str] = field(default_factory=list)


def _data_path(name: str) -> Path:
    return Path(str(resources.files("medgraphbot").joinpath("data", name)))


def _read_lexicon_lines(path: Path) -> List[str]:
    lines = []
    for raw in path.read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        lines.append(line)
    return lines


def load_stopwords(path: Optional[Path] = None) -> FrozenSet[str]:
    """Load the stopword lexicon (bundled one when no path is given)."""
    path = path or _data_path("stopwords.txt")
    return frozenset(w.lower() for w in _read_lexicon_lines(path))


def load_lemma_exceptions(path: Optional[Path] = None) -> Dict[str, str]:
    """Load irregular word forms consulted before the suffix rules."""
    path = path or _data_path("lemma_exceptions.csv")
    exceptions: Dict[str, str] = {}
    for line in _read_lexicon_lines(path):
        form, _, lemma = line.partition(",")
        exceptions[form.strip().lower()] = lemma.strip().lower()
    return exceptions


_LEMMA_EXCEPTIONS: Optional[Dict[str, str]] = None


def _lemma_exceptions() -> Dict[str, str]:
    global _LEMMA_EXCEPTIONS
    if _LEMMA_EXCEPTIONS is None:
        _LEMMA_EXCEPTIONS = load_lemma_exceptions()
    return _LEMMA_EXCEPTIONS


_DEFAULT_STOPWORDS: Optional[FrozenSet[str]] = None


def default_stopwords() -> FrozenSet[str]:
    global _DEFAULT_STOPWORDS
    if _DEFAULT_STOPWORDS is None:
        _DEFAULT_STOPWORDS = load_stopwords()
    return _DEFAULT_STOPWORDS


_VOWELS = "aeiou"
# After stripping -ed/-ing these finals almost always come from a dropped 'e'
# (increase, reduce, sneeze, receive, continue).
_E_RESTORE_FINALS = ("c", "v", "z", "u")


def _restore_e(stem: str) -> str:
    if len(stem) <= 3:
        return stem + "e"
    if stem.endswith(_E_RESTORE_FINALS):
        return stem + "e"
    if stem.endswith("s") and not stem.endswith("ss"):
        return stem + "e"
    return stem


def _strip_participle(word: str, suffix: str) -> str:
    stem = word[: -len(suffix)]
    # running -> runn -> run; doubled l/s/z stay (falling, passing, buzzing).
    # An undoubled stem never took a silent e, so it skips the restore step.
    if (
        len(stem) >= 2
        and stem[-1] == stem[-2]
        and stem[-1] not in "lsz"
        and stem[-1] not in _VOWELS
    ):
        return stem[:-1]
    return _restore_e(stem)


def lemmatize_word(word: str) -> str:
    """Reduce one lowercase-able word to its lemma.

    The single-pass rules run to a fixpoint, so applying the function to
    its own output never changes it.
    """
    w = word.lower()
    for _ in range(10):
        reduced = _lemmatize_once(w)
        if reduced == w:
            return w
        w = reduced
    return w


def _lemmatize_once(w: str) -> str:
    """One pass: exception lexicon first, then ordered suffix rules."""
    exc = _lemma_exceptions().get(w)
    if exc is not None:
        return exc
    if not _WORD_RE.search(w):
        return w
    if w.endswith("sses"):
        return w[:-2]
    if w.endswith("ies") and len(w) >= 5:
        return w[:-3] + "y"
    if (w.endswith("shes") or w.endswith("xes")) and len(w) >= 5:
        return w[:-2]
    if (
        w.endswith("s")
        and len(w) >= 4
        and not w.endswith("ss")
        and not w.endswith("us")
        and not w.endswith("is")
    ):
        return w[:-1]
    if w.endswith("ied") and len(w) >= 5:
        return w[:-3] + "y"
    if w.endswith("ing") and len(w) >= 6:
        return _strip_participle(w, "ing")
    # -eed verbs (bleed, need, exceed) already are their own lemma
    if w.endswith("ed") and len(w) >= 5 and not w.endswith("eed"):
        return _strip_participle(w, "ed")
    return w


def tokenize(text: str) -> List[Token]:
    """Split text into word and punctuation tokens with char offsets.

    Hyphenated and apostrophe words ("covid-19", "can't") stay whole; every
    other non-space character becomes a single-char token. Lemmas are filled
    in; punctuation tokens are always flagged as stopwords.
    """
    stopwords = default_stopwords()
    tokens = []
    for m in _TOKEN_RE.finditer(text):
        surface = m.group()
        if _WORD_RE.search(surface):
            lemma = lemmatize_word(surface)
            is_stop = lemma in stopwords or surface.lower() in stopwords
        else:
            lemma = surface
            is_stop = True
        tokens.append(
            Token(
                surface=surface,
                lemma=lemma,
                start=m.start(),
                end=m.end(),
                is_stopword=is_stop,
            )
        )
    return tokens


def lemmatize(token: Token) -> Token:
    """Return the token with lemma (and stopword flag) recomputed."""
    if not _WORD_RE.search(token.surface):
        return replace(token, lemma=token.surface, is_stopword=True)
    lemma = lemmatize_word(token.surface)
    stopwords = default_stopwords()
    is_stop = lemma in stopwords or token.surface.lower() in stopwords
    return replace(token, lemma=lemma, is_stopword=is_stop)


def remove_stopwords(
    tokens: List[Token], stopwords: Optional[FrozenSet[str]] = None
) -> List[Token]:
    """Drop punctuation and tokens whose lemma or surface is a stopword."""
    if stopwords is None:
        return [t for t in tokens if not t.is_stopword]
    return [
        t
        for t in tokens
        if _WORD_RE.search(t.surface)
        and t.lemma not in stopwords
        and t.surface.lower() not in stopwords
    ]


def _is_abbreviation(text: str, dot_index: int) -> bool:
    """True when the dot at dot_index ends a known abbreviation."""
    i = dot_index - 1
    while i >= 0 and (text[i].isalnum() or text[i] == "."):
        i -= 1
    word = text[i + 1 : dot_index].lower()
    if not word:
        return False
    if word in _ABBREVIATIONS:
        return True
    # single letters: initials and the pieces of "e.g." / "i.e."
    return len(word) == 1 and word.isalpha()


def split_into_sentence_spans(text: str) -> List[Tuple[int, int]]:
    """Return (start, end) character spans of the sentences in text.

    A run of '.', '!' or '?' ends a sentence unless it closes a known
    abbreviation or the next word starts lowercase. The spans partition the
    non-whitespace content: every non-space character lands in exactly one.
    """
    spans = []
    start = 0
    for m in _SENTENCE_BOUNDARY_RE.finditer(text):
        end = m.end()
        if end < len(text) and not text[end].isspace() and text[end] not in "\"')]":
            continue
        if "." in m.group() and _is_abbreviation(text, m.start()):
            continue
        # A following lowercase letter means the dot did not end the sentence.
        j = end
        while j < len(text) and (text[j].isspace() or text[j] in "\"')]"):
            j += 1
        if j < len(text) and text[j].islower():
            continue
        while end < len(text) and text[end] in "\"')]":
            end += 1
        if text[start:end].strip():
            spans.append((start, end))
        start = end
    if text[start:].strip():
        spans.append((start, len(text)))
    # trim surrounding whitespace from each span
    trimmed = []
    for s, e in spans:
        while s < e and text[s].isspace():
            s += 1
        while e > s and text[e - 1].isspace():
            e -= 1
        trimmed.append((s, e))
    return trimmed


def split_sentences(doc: Document) -> List[Sentence]:
    """Split a document into tokenized sentences, numbered from 0.

    Title, abstract and body are segmented in that order; sentence indexes
    run continuously across the three fields so (doc_id, index) is unique.
    """
    sentences: List[Sentence] = []
    index = 0
    for part in (doc.title, doc.abstract, doc.body):
        if not part or not part.strip():
            continue
        for s, e in split_into_sentence_spans(part):
            sent_text = part[s:e]
            tokens = tuple(tokenize(sent_text))
            sentences.append(
                Sentence(doc_id=doc.doc_id, index=index, text=sent_text, tokens=tokens)
            )
            index += 1
    return sentences


def _parse_date(value) -> Optional[date]:
    if value is None or value == "":
        return None
    if isinstance(value, date):
        return value
    text = str(value).strip()
    for fmt_len, pad in ((10, ""), (7, "-01"), (4, "-01-01")):
        if len(text) == fmt_len:
            try:
                return date.fromisoformat(text + pad)
            except ValueError:
                return None
    try:
        return date.fromisoformat(text[:10])
    except ValueError:
        return None


_REQUIRED_FIELDS = ("doc_id", "title", "abstract")


def _document_from_record(record: dict) -> Document:
    for fld in _REQUIRED_FIELDS:
        if fld not in record:
            raise ValueError(f"missing field {fld!r}")
    doc_id = str(record["doc_id"]).strip()
    if not doc_id:
        raise ValueError("empty doc_id")
    return Document(
        doc_id=doc_id,
        title=str(record["title"] or ""),
        abstract=str(record["abstract"] or ""),
        body=str(record.get("body") or ""),
        publish_date=_parse_date(record.get("publish_date")),
    )


def load_corpus(path, fmt: str = "jsonl") -> LoadResult:
    """Load a literature corpus.

    ``fmt="jsonl"`` expects one JSON object per line with the fields doc_id,
    title, abstract, body, publish_date. ``fmt="cord19"`` expects a directory
    with a metadata.csv and full-text JSON files. Malformed records are
    skipped and reported, never fatal; an entirely empty corpus is an error.
    """
    path = Path(path)
    if fmt == "jsonl":
        result = _load_jsonl(path)
    elif fmt == "cord19":
        result = _load_cord19(path)
    else:
        raise ValueError(f"unknown corpus format {fmt!r}")
    if not result.documents:
        raise EmptyCorpusError(f"no usable documents in corpus {path}")
    return result


def _load_jsonl(path: Path) -> LoadResult:
    if not path.is_file():
        raise CorpusError(f"corpus file not found: {path}")
    result = LoadResult()
    seen = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                if not isinstance(record, dict):
                    raise ValueError("record is not an object")
                doc = _document_from_record(record)
                if doc.doc_id in seen:
                    raise ValueError(f"duplicate doc_id {doc.doc_id!r}")
            except (json.JSONDecodeError, ValueError) as exc:
                result.skipped += 1
                result.errors.append(f"line {lineno}: {exc}")
                logger.warning("skipping corpus line %d: %s", lineno, exc)
                continue
            seen.add(doc.doc_id)
            result.documents.append(doc)
    return result


def _load_cord19(path: Path) -> LoadResult:
    """Adapter for the CORD-19 layout: metadata.csv plus JSON full texts."""
    metadata = path / "metadata.csv"
    if not metadata.is_file():
        raise CorpusError(f"metadata.csv not found under {path}")
    result = LoadResult()
    seen = set()
    with metadata.open(encoding="utf-8", newline="") as fh:
        for rownum, row in enumerate(csv.DictReader(fh), start=2):
            doc_id = (row.get("cord_uid") or "").strip()
            if not doc_id or doc_id in seen:
                result.skipped += 1
                result.errors.append(f"row {rownum}: missing or duplicate cord_uid")
                continue
            seen.add(doc_id)
            body = ""
            rel = (row.get("pdf_json_files") or "").split(";")[0].strip()
            if rel:
                body = _read_cord19_body(path / rel, result, rownum)
            result.documents.append(
                Document(
                    doc_id=doc_id,
                    title=row.get("title") or "",
                    abstract=row.get("abstract") or "",
                    body=body,
                    publish_date=_parse_date(row.get("publish_time")),
                )
            )
    return result


def _read_cord19_body(json_path: Path, result: LoadResult, rownum: int) -> str:
    try:
        payload = json.loads(json_path.read_text(encoding="utf-8"))
        blocks = payload.get("body_text", [])
        return " ".join(b.get("text", "") for b in blocks if isinstance(b, dict))
    except (OSError, json.JSONDecodeError, AttributeError) as exc:
        result.errors.append(f"row {rownum}: unreadable full text ({exc})")
        logger.warning("row %d: unreadable full text %s: %s", rownum, json_path, exc)
        return ""


def is_covid_related(doc: Document) -> bool:
    """True when any coronavirus keyword occurs in the document text."""
    text = f"{doc.title} {doc.abstract} {doc.body}".lower()
    return any(kw in text for kw in COVID_KEYWORDS)


def filter_covid_docs(docs: List[Document]) -> List[Document]:
    """Keep only coronavirus-related documents, preserving order."""
    return [d for d in docs if is_covid_related(d)]
