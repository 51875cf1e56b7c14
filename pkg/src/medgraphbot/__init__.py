"""Patient-monitoring chatbot backed by a literature-derived knowledge graph."""

__version__ = "0.1.0"
