"""Identity alignments across many wiki-derived knowledge graphs."""
from .model import Alignment, Correspondence, EntityRef, KnowledgeGraph, Provenance

__all__ = ["Alignment", "Correspondence", "EntityRef", "KnowledgeGraph", "Provenance"]
__version__ = "0.1.0"
