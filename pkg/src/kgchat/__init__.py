"""Conversational question answering over knowledge graphs.

Turns multi-turn natural-language dialogue into a small set of validated
SPARQL queries, executes them against a SPARQL endpoint or an embedded
triple store, and returns answers grounded in the graph.
"""

__version__ = "0.1.0"

from kgchat.model import (
    Answer,
    Dialogue,
    EngineConfig,
    EntityRef,
    Fact,
    QuestionContext,
    QIR,
    SessionState,
    Turn,
    VarRef,
    append_turn,
    build_context,
)

__all__ = [
    "Answer",
    "Dialogue",
    "EngineConfig",
    "EntityRef",
    "Fact",
    "QuestionContext",
    "QIR",
    "SessionState",
    "Turn",
    "VarRef",
    "append_turn",
    "build_context",
]
