"""Corpus loading, sentence splitting, tokenization and lemmatization."""

import json
import string

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from medgraphbot.corpus import (
    Document,
    default_stopwords,
    filter_covid_docs,
    is_covid_related,
    lemmatize_word,
    load_corpus,
    remove_stopwords,
    split_into_sentence_spans,
    split_sentences,
    tokenize,
)
from medgraphbot.errors import CorpusError, EmptyCorpusError

from helpers import FIXTURES

# Hand-checked inflection table: surface form on the left, expected root on
# the right. Fixed points are included on purpose.
LEMMA_PAIRS = [
    ("fevers", "fever"), ("symptoms", "symptom"), ("coughs", "cough"),
    ("headaches", "headache"), ("chills", "chill"), ("drugs", "drug"),
    ("doses", "dose"), ("tablets", "tablet"), ("studies", "study"),
    ("bodies", "body"), ("illnesses", "illness"), ("rashes", "rash"),
    ("reflexes", "reflex"), ("branches", "branch"), ("viruses", "virus"),
    ("diagnoses", "diagnosis"), ("feet", "foot"), ("teeth", "tooth"),
    ("children", "child"), ("women", "woman"), ("men", "man"),
    ("mice", "mouse"), ("lungs", "lung"), ("diseases", "disease"),
    ("causes", "cause"), ("muscles", "muscle"), ("aches", "ache"),
    ("patients", "patient"), ("infections", "infection"),
    ("species", "species"), ("coughing", "cough"), ("sneezing", "sneeze"),
    ("wheezing", "wheeze"), ("vomiting", "vomit"), ("running", "run"),
    ("feeling", "feeling"), ("burning", "burn"), ("itching", "itch"),
    ("breathing", "breath"), ("taking", "take"), ("bleeding", "bleed"),
    ("shivering", "shiver"), ("sweating", "sweat"), ("morning", "morning"),
    ("nothing", "nothing"), ("during", "during"), ("coughed", "cough"),
    ("reported", "report"), ("confirmed", "confirm"), ("tested", "test"),
    ("treated", "treat"), ("recorded", "record"), ("developed", "develop"),
    ("increased", "increase"), ("caused", "cause"), ("reduced", "reduce"),
    ("received", "receive"), ("sneezed", "sneeze"), ("noted", "note"),
    ("admitted", "admit"), ("felt", "feel"), ("took", "take"),
    ("taken", "take"), ("lost", "lose"), ("led", "lead"), ("was", "be"),
    ("has", "have"), ("anything", "anything"), ("fever", "fever"),
    ("diarrhea", "diarrhea"), ("studied", "study"), ("carried", "carry"),
    ("tried", "try"), ("exceeded", "exceed"),
]

# One engineered 30-token sentence that keeps exactly 17 content tokens
# after stopword and punctuation removal (hand-counted against the bundled
# stopword lexicon).
THIRTY_TOKEN_SENTENCE = (
    "Several hospitalized patients developed persistent fever, severe dry "
    "cough, watery diarrhea, and unusual fatigue during the early recovery, "
    "e.g. the second week."
)


# -- tokenize ---------------------------------------------------------------


def test_tokenize_whitespace_words():
    assert [t.surface for t in tokenize("fever and cough")] == [
        "fever", "and", "cough",
    ]


def test_tokenize_keeps_hyphenated_term_and_emits_punctuation():
    surfaces = [t.surface for t in tokenize("COVID-19, fever.")]
    assert surfaces == ["COVID-19", ",", "fever", "."]


def test_tokenize_empty():
    assert tokenize("") == []


def test_tokens_are_ordered_and_non_overlapping():
    tokens = tokenize(THIRTY_TOKEN_SENTENCE)
    for first, second in zip(tokens, tokens[1:]):
        assert first.end <= second.start
    assert all(t.start < t.end for t in tokens)


@given(st.text(max_size=200))
@settings(max_examples=200)
def test_token_surfaces_round_trip_to_source(text):
    for token in tokenize(text):
        assert text[token.start:token.end] == token.surface


def test_token_lemmas_are_lowercase():
    for token in tokenize("Severe FEVERS Reported"):
        assert token.lemma == token.lemma.lower()


# -- lemmatize ---------------------------------------------------------------


@pytest.mark.parametrize("surface,expected", LEMMA_PAIRS)
def test_lemmatize_word_table(surface, expected):
    assert lemmatize_word(surface) == expected


@pytest.mark.parametrize("surface,expected", LEMMA_PAIRS)
def test_lemmatize_word_idempotent_on_table(surface, expected):
    assert lemmatize_word(expected) == expected


def test_lemmatize_case_insensitive():
    assert lemmatize_word("Fevers") == lemmatize_word("fevers") == "fever"
    assert lemmatize_word("COUGHING") == "cough"


@given(
    st.text(alphabet=string.ascii_lowercase, min_size=1, max_size=9),
    st.sampled_from(
        ["", "s", "es", "ies", "ing", "ed", "ied", "ses", "xes", "shes",
         "sses", "eed"]
    ),
)
@settings(max_examples=500)
def test_lemmatize_idempotent_property(stem, suffix):
    once = lemmatize_word(stem + suffix)
    assert lemmatize_word(once) == once


# -- stopwords ---------------------------------------------------------------


def test_remove_stopwords_drops_function_words():
    tokens = tokenize("the fever is high")
    assert [t.surface for t in remove_stopwords(tokens)] == ["fever", "high"]


def test_remove_stopwords_empty():
    assert remove_stopwords([]) == []


def test_remove_stopwords_drops_punctuation():
    tokens = tokenize("fever, cough.")
    assert [t.surface for t in remove_stopwords(tokens)] == ["fever", "cough"]


def test_remove_stopwords_preserves_order():
    kept = remove_stopwords(tokenize("cough before fever after diarrhea"))
    assert [t.surface for t in kept] == ["cough", "fever", "diarrhea"]


def test_thirty_token_sentence_keeps_seventeen_content_tokens():
    tokens = tokenize(THIRTY_TOKEN_SENTENCE)
    assert len(tokens) == 30
    assert len(remove_stopwords(tokens)) == 17


def test_default_stopwords_nonempty_and_lowercase():
    words = default_stopwords()
    assert "the" in words and "and" in words
    assert all(w == w.lower() for w in words)


# -- sentence splitting -------------------------------------------------------


def test_split_two_terminated_sentences():
    doc = Document(doc_id="d", title="", abstract="Fever is common. Cough follows.",
                   body="", publish_date=None)
    sentences = split_sentences(doc)
    assert [s.text for s in sentences] == ["Fever is common.", "Cough follows."]


def test_split_empty_document():
    doc = Document(doc_id="d", title="", abstract="", body="", publish_date=None)
    assert split_sentences(doc) == []


def test_split_handles_abbreviations():
    text = ("Patients reported symptoms, e.g. fever and chills. Smith et al. "
            "confirmed the trend. A third study disagreed.")
    spans = split_into_sentence_spans(text)
    assert [text[s:e] for s, e in spans] == [
        "Patients reported symptoms, e.g. fever and chills.",
        "Smith et al. confirmed the trend.",
        "A third study disagreed.",
    ]


def test_split_no_empty_sentences_on_fixture(all_docs):
    for doc in all_docs:
        for sentence in split_sentences(doc):
            assert sentence.text.strip()


def test_sentence_spans_partition_non_whitespace(all_docs):
    """Spans never overlap and jointly cover every non-space character."""
    for doc in all_docs:
        for part in (doc.title, doc.abstract, doc.body):
            if not part.strip():
                continue
            spans = split_into_sentence_spans(part)
            for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
                assert e1 <= s2
            covered = set()
            for s, e in spans:
                covered.update(range(s, e))
            for i, ch in enumerate(part):
                if not ch.isspace():
                    assert i in covered, (doc.doc_id, part[i - 20:i + 20])


def test_sentence_indexes_continuous_across_fields(all_docs):
    for doc in all_docs:
        indexes = [s.index for s in split_sentences(doc)]
        assert indexes == list(range(len(indexes)))


# -- corpus loading -----------------------------------------------------------


def test_load_single_jsonl_record(tmp_path):
    path = tmp_path / "one.jsonl"
    path.write_text(json.dumps({
        "doc_id": "d1", "title": "Fever in SARS", "abstract": "...",
        "publish_date": "2020-03-01",
    }) + "\n", encoding="utf-8")
    result = load_corpus(path)
    assert len(result.documents) == 1
    doc = result.documents[0]
    assert doc.doc_id == "d1"
    assert doc.title == "Fever in SARS"
    assert doc.publish_date.isoformat() == "2020-03-01"
    assert doc.body == ""


def test_load_empty_file_is_an_error(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("", encoding="utf-8")
    with pytest.raises(EmptyCorpusError):
        load_corpus(path)


def test_load_missing_file_is_an_error(tmp_path):
    with pytest.raises(CorpusError):
        load_corpus(tmp_path / "nope.jsonl")


def test_load_unknown_format_rejected(tmp_path):
    path = tmp_path / "one.jsonl"
    path.write_text("{}\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_corpus(path, fmt="parquet")


def test_malformed_fixture_skips_and_reports():
    result = load_corpus(FIXTURES / "corpus_malformed.jsonl")
    assert len(result.documents) == 18
    assert result.skipped == 2
    assert len(result.errors) == 2
    assert any("line 7" in e for e in result.errors)
    assert any("line 15" in e for e in result.errors)


def test_duplicate_doc_id_rejected(tmp_path):
    path = tmp_path / "dup.jsonl"
    record = {"doc_id": "d1", "title": "A", "abstract": "B"}
    path.write_text(json.dumps(record) + "\n" + json.dumps(record) + "\n",
                    encoding="utf-8")
    result = load_corpus(path)
    assert len(result.documents) == 1
    assert result.skipped == 1
    assert any("duplicate" in e for e in result.errors)


def test_partial_dates_and_null_dates(tmp_path):
    path = tmp_path / "dates.jsonl"
    rows = [
        {"doc_id": "a", "title": "t", "abstract": "x", "publish_date": "2020"},
        {"doc_id": "b", "title": "t", "abstract": "x", "publish_date": "2020-05"},
        {"doc_id": "c", "title": "t", "abstract": "x", "publish_date": None},
        {"doc_id": "d", "title": "t", "abstract": "x"},
    ]
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    docs = load_corpus(path).documents
    assert docs[0].publish_date.isoformat() == "2020-01-01"
    assert docs[1].publish_date.isoformat() == "2020-05-01"
    assert docs[2].publish_date is None
    assert docs[3].publish_date is None


def test_load_cord19_fixture():
    result = load_corpus(FIXTURES / "cord19", fmt="cord19")
    by_id = {d.doc_id: d for d in result.documents}
    assert sorted(by_id) == ["c001", "c002", "c003"]
    assert by_id["c001"].body != ""
    assert by_id["c002"].body == ""
    assert by_id["c003"].body != ""


# -- coronavirus filter -------------------------------------------------------


def test_covid_filter_keyword_in_title():
    doc = Document(doc_id="d", title="SARS-CoV-2 outcomes", abstract="",
                   body="", publish_date=None)
    assert is_covid_related(doc)


def test_covid_filter_drops_unrelated():
    doc = Document(doc_id="d", title="Influenza vaccination", abstract="",
                   body="", publish_date=None)
    assert not is_covid_related(doc)


def test_covid_filter_case_insensitive_and_any_field():
    fields = [
        {"title": "About COVID-19", "abstract": "", "body": ""},
        {"title": "", "abstract": "a hCoV study", "body": ""},
        {"title": "", "abstract": "", "body": "traces of 2019-nCoV found"},
    ]
    for kwargs in fields:
        doc = Document(doc_id="d", publish_date=None, **kwargs)
        assert is_covid_related(doc), kwargs


def test_covid_filter_fixture_count(all_docs, covid_docs):
    assert len(all_docs) == 20
    assert len(covid_docs) == 12


def test_covid_filter_subset_and_order_preserving(all_docs, covid_docs):
    positions = [all_docs.index(d) for d in covid_docs]
    assert positions == sorted(positions)
    assert set(d.doc_id for d in covid_docs) <= set(d.doc_id for d in all_docs)


@given(st.lists(st.sampled_from(["covid-19 report", "influenza note", "hcov data",
                                 "measles study"]), max_size=8))
def test_covid_filter_subset_property(titles):
    docs = [
        Document(doc_id=f"d{i}", title=title, abstract="", body="",
                 publish_date=None)
        for i, title in enumerate(titles)
    ]
    kept = filter_covid_docs(docs)
    assert [d for d in docs if d in kept] == kept
    for doc in kept:
        assert is_covid_related(doc)
    for doc in docs:
        if doc not in kept:
            assert not is_covid_related(doc)
