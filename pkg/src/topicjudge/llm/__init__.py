"""LLM-as-a-judge comparison harness: prompts, clients, caching, and judging."""

from .cache import TranscriptCache
from .client import HttpChatClient, ReplayClient
from .judge import LlmJudgeResult, judge_pool_llm
from .prompts import (
    FewShotBlock,
    FewShotExample,
    PromptTemplate,
    RenderedPrompt,
    build_prompt,
    cast_response,
    extract_grade,
)

__all__ = [
    "FewShotBlock",
    "FewShotExample",
    "HttpChatClient",
    "LlmJudgeResult",
    "PromptTemplate",
    "RenderedPrompt",
    "ReplayClient",
    "TranscriptCache",
    "build_prompt",
    "cast_response",
    "extract_grade",
    "judge_pool_llm",
]
