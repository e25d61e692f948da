"""Chat transport with record/replay cassettes, prompt templates and the LLM stages."""

from .chat import Cassette, CassetteMiss, ChatClient, ChatRequest, ChatResponse, NetworkError
from .prompts import PromptTemplate, default_templates
from .stages import BudgetExhausted, FormatterMismatch, ParseFailure, StageError

__all__ = [
    "BudgetExhausted",
    "Cassette",
    "CassetteMiss",
    "ChatClient",
    "ChatRequest",
    "ChatResponse",
    "FormatterMismatch",
    "NetworkError",
    "ParseFailure",
    "PromptTemplate",
    "StageError",
    "default_templates",
]
