"""Patient profiles: event recording, sessionization, durable storage,
trajectory similarity and next-symptom prediction."""

import json
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Callable, Dict, FrozenSet, List, Optional, Tuple

from .errors import (
    OutOfOrderEventError,
    PersistenceError,
    SessionNotFoundError,
    StoreUnavailableError,
    UnknownNodeError,
)
from .kg import KnowledgeGraph
from .ner import EntityCategory

logger = logging.getLogger(__name__)

# Gap (seconds) that starts a new session: strictly less than the gap keeps
# the same session, reaching it opens the next one.
SESSION_GAP_SECONDS = 3600

STORE_SCHEMA_VERSION = 1


class EventKind(str, Enum):
    SYMPTOM = "SYMPTOM"
    DRUG = "DRUG"


class PredictionSource(str, Enum):
    COHORT = "COHORT"
    FRINGE = "FRINGE"


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


def parse_timestamp(value: str) -> datetime:
    """Parse an ISO-8601 timestamp, accepting a trailing 'Z'."""
    if value.endswith("Z"):
        value = value[:-1] + "+00:00"
    ts = datetime.fromisoformat(value)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).isoformat()


@dataclass(frozen=True)
class PatientEvent:
    timestamp: datetime
    kind: EventKind
    lemma_key: str
    raw_text: str = ""


@dataclass
class Session:
    session_id: int
    start: datetime
    end: datetime
    events: List[PatientEvent] = field(default_factory=list)


@dataclass
class PatientProfile:
    patient_id: str
    sessions: List[Session] = field(default_factory=list)

    def last_activity(self) -> Optional[datetime]:
        if not self.sessions:
            return None
        return self.sessions[-1].end

    def all_events(self) -> List[PatientEvent]:
        return [e for s in self.sessions for e in s.events]


def profile_to_dict(profile: PatientProfile) -> dict:
    return {
        "schema_version": STORE_SCHEMA_VERSION,
        "patient_id": profile.patient_id,
        "sessions": [
            {
                "session_id": s.session_id,
                "start": format_timestamp(s.start),
                "end": format_timestamp(s.end),
                "events": [
                    {
                        "timestamp": format_timestamp(e.timestamp),
                        "kind": e.kind.value,
                        "lemma_key": e.lemma_key,
                        "raw_text": e.raw_text,
                    }
                    for e in s.events
                ],
            }
            for s in profile.sessions
        ],
    }


def profile_from_dict(payload: dict) -> PatientProfile:
    profile = PatientProfile(patient_id=payload["patient_id"])
    for row in payload.get("sessions", []):
        profile.sessions.append(
            Session(
                session_id=int(row["session_id"]),
                start=parse_timestamp(row["start"]),
                end=parse_timestamp(row["end"]),
                events=[
                    PatientEvent(
                        timestamp=parse_timestamp(e["timestamp"]),
                        kind=EventKind(e["kind"]),
                        lemma_key=e["lemma_key"],
                        raw_text=e.get("raw_text", ""),
                    )
                    for e in row.get("events", [])
                ],
            )
        )
    return profile


def serialize_profile(profile: PatientProfile) -> str:
    """Canonical JSON for a profile; equal profiles give equal bytes."""
    return json.dumps(profile_to_dict(profile), sort_keys=True, indent=2) + "\n"


class PatientStore:
    """Profiles with an append-ahead event log and a compacted snapshot.

    Every accepted event is flushed and fsynced to the log before it is
    applied in memory, so a crash after the acknowledgment cannot lose it.
    ``data_dir=None`` keeps everything in memory (handy for tests).
    """

    def __init__(
        self,
        data_dir=None,
        session_gap: int = SESSION_GAP_SECONDS,
        clock: Optional[Callable[[], datetime]] = None,
    ):
        self.session_gap = session_gap
        self.clock = clock or utcnow
        self.profiles: Dict[str, PatientProfile] = {}
        self._closed = False
        self._log_fh = None
        self.data_dir: Optional[Path] = Path(data_dir) if data_dir else None
        if self.data_dir is not None:
            self.data_dir.mkdir(parents=True, exist_ok=True)
            self._snapshot_path = self.data_dir / "store.json"
            self._log_path = self.data_dir / "events.log"
            self._load()
            self._log_fh = self._log_path.open("a", encoding="utf-8")

    # -- loading ---------------------------------------------------------

    def _load(self) -> None:
        if self._snapshot_path.is_file():
            payload = json.loads(self._snapshot_path.read_text(encoding="utf-8"))
            for row in payload.get("patients", []):
                profile = profile_from_dict(row)
                self.profiles[profile.patient_id] = profile
        if self._log_path.is_file():
            with self._log_path.open(encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        record = json.loads(line)
                    except json.JSONDecodeError:
                        logger.warning("dropping truncated log line")
                        continue
                    self._replay(record)

    def _replay(self, record: dict) -> None:
        patient_id = record["patient_id"]
        ts = parse_timestamp(record["timestamp"])
        if record.get("kind") == "TOUCH":
            self._apply_touch(patient_id, ts)
            return
        event = PatientEvent(
            timestamp=ts,
            kind=EventKind(record["kind"]),
            lemma_key=record["lemma_key"],
            raw_text=record.get("raw_text", ""),
        )
        profile = self.profiles.get(patient_id)
        if profile is not None and profile.sessions:
            # A crash between snapshot and log truncation can leave already
            # compacted records in the log; replaying those must be a no-op.
            tail = profile.sessions[-1].events
            if tail and tail[-1] == event:
                return
        try:
            self._apply_event(patient_id, event)
        except OutOfOrderEventError:
            logger.warning("dropping out-of-order replayed event for %s", patient_id)

    # -- sessionization ---------------------------------------------------

    def _profile(self, patient_id: str) -> PatientProfile:
        profile = self.profiles.get(patient_id)
        if profile is None:
            profile = PatientProfile(patient_id=patient_id)
            self.profiles[patient_id] = profile
        return profile

    def _apply_event(self, patient_id: str, event: PatientEvent) -> PatientProfile:
        profile = self._profile(patient_id)
        last = profile.last_activity()
        if last is not None and event.timestamp < last:
            raise OutOfOrderEventError(
                f"event at {format_timestamp(event.timestamp)} precedes last "
                f"activity at {format_timestamp(last)} for patient {patient_id}"
            )
        if not profile.sessions:
            session = Session(
                session_id=1, start=event.timestamp, end=event.timestamp
            )
            profile.sessions.append(session)
        else:
            session = profile.sessions[-1]
            gap = (event.timestamp - session.end).total_seconds()
            if gap >= self.session_gap:
                session = Session(
                    session_id=session.session_id + 1,
                    start=event.timestamp,
                    end=event.timestamp,
                )
                profile.sessions.append(session)
        session.events.append(event)
        session.end = event.timestamp
        return profile

    def _apply_touch(self, patient_id: str, ts: datetime) -> PatientProfile:
        """Register contact without an event; creates the first session."""
        profile = self._profile(patient_id)
        if not profile.sessions:
            profile.sessions.append(Session(session_id=1, start=ts, end=ts))
        else:
            session = profile.sessions[-1]
            if ts >= session.end:
                gap = (ts - session.end).total_seconds()
                if gap >= self.session_gap:
                    profile.sessions.append(
                        Session(
                            session_id=session.session_id + 1, start=ts, end=ts
                        )
                    )
                else:
                    session.end = ts
        return profile

    # -- persistence --------------------------------------------------------

    @property
    def closed(self) -> bool:
        return self._closed

    def _check_open(self) -> None:
        if self._closed:
            raise StoreUnavailableError("patient store is closed")

    def _append_log(self, record: dict) -> None:
        if self._log_fh is None:
            return
        try:
            self._log_fh.write(json.dumps(record, sort_keys=True) + "\n")
            self._log_fh.flush()
            os.fsync(self._log_fh.fileno())
        except OSError as exc:
            raise PersistenceError(f"cannot append to event log: {exc}") from exc

    def record_event(self, patient_id: str, event: PatientEvent) -> PatientProfile:
        """Validate, persist, then apply one event; returns the profile.

        The event hits the log (flushed and fsynced) before memory changes;
        a failed write leaves the profile untouched and raises
        PersistenceError.
        """
        self._check_open()
        profile = self.profiles.get(patient_id)
        if profile is not None:
            last = profile.last_activity()
            if last is not None and event.timestamp < last:
                raise OutOfOrderEventError(
                    f"event at {format_timestamp(event.timestamp)} precedes "
                    f"last activity at {format_timestamp(last)} for patient "
                    f"{patient_id}"
                )
        self._append_log(
            {
                "patient_id": patient_id,
                "timestamp": format_timestamp(event.timestamp),
                "kind": event.kind.value,
                "lemma_key": event.lemma_key,
                "raw_text": event.raw_text,
            }
        )
        return self._apply_event(patient_id, event)

    def touch(self, patient_id: str, ts: Optional[datetime] = None) -> PatientProfile:
        """Persist a contact (no event); ensures at least one session."""
        self._check_open()
        ts = ts or self.clock()
        profile = self.profiles.get(patient_id)
        if profile is not None:
            last = profile.last_activity()
            if last is not None and ts < last:
                # Contacts never rewind the clock; just report current state.
                return profile
        self._append_log(
            {
                "patient_id": patient_id,
                "timestamp": format_timestamp(ts),
                "kind": "TOUCH",
            }
        )
        return self._apply_touch(patient_id, ts)

    def get(self, patient_id: str) -> Optional[PatientProfile]:
        self._check_open()
        return self.profiles.get(patient_id)

    def patient_ids(self) -> List[str]:
        self._check_open()
        return sorted(self.profiles)

    def compact(self) -> None:
        """Write the snapshot atomically and truncate the event log."""
        if self.data_dir is None:
            return
        payload = {
            "schema_version": STORE_SCHEMA_VERSION,
            "patients": [
                profile_to_dict(p)
                for _, p in sorted(self.profiles.items())
            ],
        }
        tmp = self._snapshot_path.with_suffix(".json.tmp")
        try:
            with tmp.open("w", encoding="utf-8") as fh:
                json.dump(payload, fh, sort_keys=True, indent=2)
                fh.write("\n")
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, self._snapshot_path)
            if self._log_fh is not None:
                self._log_fh.close()
            self._log_fh = self._log_path.open("w", encoding="utf-8")
        except OSError as exc:
            raise PersistenceError(f"cannot write snapshot: {exc}") from exc

    def close(self) -> None:
        if self._closed:
            return
        try:
            self.compact()
        finally:
            if self._log_fh is not None:
                self._log_fh.close()
                self._log_fh = None
            self._closed = True


# -- trajectories ---------------------------------------------------------


@dataclass(frozen=True)
class TrajectoryStep:
    session_id: int
    symptoms: FrozenSet[str]
    drugs: FrozenSet[str]
    fringe: Tuple[Tuple[str, Fraction], ...] = ()


@dataclass(frozen=True)
class Trajectory:
    patient_id: str
    steps: Tuple[TrajectoryStep, ...]


def rank_fringe(
    symptoms: FrozenSet[str],
    graph: KnowledgeGraph,
    k: int,
    exclude: FrozenSet[str] = frozenset(),
) -> List[Tuple[str, Fraction]]:
    """Graph neighbors of a symptom set, scored by max conditional probability.

    Candidates are DISEASE nodes co-occurring with any of the given
    symptoms, excluding the symptoms themselves and the explicit exclusions.
    """
    if k < 1:
        return []
    scores: Dict[str, Fraction] = {}
    for symptom in sorted(symptoms):
        node = graph.nodes.get(symptom)
        if node is None or node.sentence_count == 0:
            continue
        for other, prob in graph.neighbors(
            symptom, k=max(len(graph.nodes), 1), category_filter=EntityCategory.DISEASE
        ):
            if other in symptoms or other in exclude:
                continue
            if other not in scores or prob > scores[other]:
                scores[other] = prob
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return ranked[:k]


def build_step(
    profile: PatientProfile,
    session_id: int,
    graph: Optional[KnowledgeGraph] = None,
    fringe_k: int = 5,
) -> TrajectoryStep:
    """Summarize one session as symptom/drug sets plus its graph fringe."""
    session = next(
        (s for s in profile.sessions if s.session_id == session_id), None
    )
    if session is None:
        raise SessionNotFoundError(
            f"patient {profile.patient_id} has no session {session_id}"
        )
    symptoms = frozenset(
        e.lemma_key for e in session.events if e.kind is EventKind.SYMPTOM
    )
    drugs = frozenset(e.lemma_key for e in session.events if e.kind is EventKind.DRUG)
    fringe: Tuple[Tuple[str, Fraction], ...] = ()
    if graph is not None and symptoms:
        fringe = tuple(rank_fringe(symptoms, graph, fringe_k))
    return TrajectoryStep(
        session_id=session_id, symptoms=symptoms, drugs=drugs, fringe=fringe
    )


def trajectory_of(
    profile: PatientProfile,
    graph: Optional[KnowledgeGraph] = None,
    fringe_k: int = 5,
) -> Trajectory:
    """All sessions of a profile as one trajectory, in session order."""
    steps = tuple(
        build_step(profile, s.session_id, graph, fringe_k) for s in profile.sessions
    )
    return Trajectory(patient_id=profile.patient_id, steps=steps)


def _jaccard(a: FrozenSet[str], b: FrozenSet[str]) -> float:
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def trajectory_similarity(a: Trajectory, b: Trajectory) -> float:
    """Mean per-step symptom Jaccard over the end-aligned overlap.

    The shorter trajectory is aligned against the tail of the longer one; a
    pair of empty symptom sets counts as fully similar.
    """
    if not a.steps or not b.steps:
        raise ValueError("trajectories must have at least one step")
    m = min(len(a.steps), len(b.steps))
    pairs = zip(a.steps[-m:], b.steps[-m:])
    return sum(_jaccard(x.symptoms, y.symptoms) for x, y in pairs) / m


@dataclass(frozen=True)
class Prediction:
    lemma_key: str
    score: float
    source: PredictionSource


def predict_next_symptoms(
    target: Trajectory,
    cohort: List[Trajectory],
    graph: KnowledgeGraph,
    k: int = 5,
    similarity_threshold: float = 0.5,
) -> List[Prediction]:
    """Rank symptoms the target patient may report next.

    Each cohort trajectory is scanned for the prefix most similar to the
    target (ties prefer the latest position); members at or above the
    similarity threshold vote with the symptoms of their following step.
    A candidate's score is (best similarity among its voters) x (voters /
    matching members). Remaining slots are filled from the graph fringe of
    the target's latest symptoms.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not target.steps:
        raise ValueError("target trajectory must have at least one step")
    reported = frozenset().union(*(s.symptoms for s in target.steps))

    votes: Dict[str, List[float]] = {}
    matching = 0
    for member in cohort:
        if member.patient_id == target.patient_id or len(member.steps) < 2:
            continue
        best_sim = None
        best_j = None
        for j in range(len(member.steps) - 1):
            prefix = Trajectory(member.patient_id, member.steps[: j + 1])
            sim = trajectory_similarity(target, prefix)
            if best_sim is None or sim >= best_sim:
                best_sim, best_j = sim, j
        if best_sim is None or best_sim < similarity_threshold:
            continue
        matching += 1
        for key in member.steps[best_j + 1].symptoms - reported:
            votes.setdefault(key, []).append(best_sim)

    predictions: List[Prediction] = []
    if matching:
        scored = [
            (key, max(sims) * (len(sims) / matching)) for key, sims in votes.items()
        ]
        scored.sort(key=lambda item: (-item[1], item[0]))
        predictions = [
            Prediction(lemma_key=key, score=score, source=PredictionSource.COHORT)
            for key, score in scored[:k]
        ]

    if len(predictions) < k:
        taken = frozenset(p.lemma_key for p in predictions)
        last_symptoms = target.steps[-1].symptoms
        for key, prob in rank_fringe(
            last_symptoms, graph, k=k + len(reported) + len(taken),
            exclude=reported | taken,
        ):
            predictions.append(
                Prediction(
                    lemma_key=key, score=float(prob), source=PredictionSource.FRINGE
                )
            )
            if len(predictions) >= k:
                break
    return predictions[:k]
