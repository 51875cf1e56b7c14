"""Exception types shared across the package."""


class MedGraphBotError(Exception):
    """Base class for every error raised by this package."""


class CorpusError(MedGraphBotError):
    """Corpus input that cannot be used at all (missing file, empty corpus)."""


class EmptyCorpusError(CorpusError):
    """A corpus load yielded zero usable documents."""


class GazetteerError(MedGraphBotError):
    """A gazetteer file defines one term with conflicting categories."""


class UnknownNodeError(MedGraphBotError):
    """A graph query referenced a node that is not in the graph."""


class UnknownDrugError(MedGraphBotError):
    """An attribute query referenced a drug with no CHEMICAL node."""


class UndefinedConditionalError(MedGraphBotError):
    """Conditional probability requested against a node with no sentences."""


class GraphParseError(MedGraphBotError):
    """A graph file is not valid JSON or misses required sections."""


class GraphVersionError(MedGraphBotError):
    """A graph file declares a schema version this code does not support."""


class OutOfOrderEventError(MedGraphBotError):
    """A patient event arrived with a timestamp earlier than the last one."""


class SessionNotFoundError(MedGraphBotError):
    """A session id does not exist for the given patient."""


class UnknownPatientError(MedGraphBotError):
    """A patient id has no profile in the store."""


class PersistenceError(MedGraphBotError):
    """Writing to the patient store failed; in-memory state was not changed."""


class StoreUnavailableError(MedGraphBotError):
    """The patient store is closed or cannot be reached."""


class ConfigurationError(MedGraphBotError):
    """Service configuration is invalid; the message names the bad key."""
