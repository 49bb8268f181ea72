"""Exception types shared across the toolkit."""

from __future__ import annotations


class TopicJudgeError(Exception):
    """Base class for all toolkit errors."""


class ParseError(TopicJudgeError):
    """A qrels, run, or topics stream contains a malformed line."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class DuplicateEntryError(TopicJudgeError):
    """The same key appears more than once where uniqueness is required."""


class StratificationError(TopicJudgeError):
    """A class required for stratified sampling is empty."""


class InsufficientPoolError(TopicJudgeError):
    """A topic's judged pool is too small for the requested sample."""


class SingleClassError(TopicJudgeError):
    """A training set contains only one relevance class; the weighted loss degenerates."""


class UnknownDocumentError(TopicJudgeError):
    """A referenced doc_id does not resolve in the document store."""


class TopicMismatchError(TopicJudgeError):
    """A judge was asked to score documents for a topic it was not trained on.

    This restriction is not overridable: a judge encodes one assessor's notion
    of relevance for exactly one topic.
    """


class BaseModelMismatchError(TopicJudgeError):
    """An adapter was attached to a scorer with a different base model id."""


class AdapterFormatError(TopicJudgeError):
    """An adapter file has a bad magic, unsupported version, or failed checksum."""


class UndefinedMetricError(TopicJudgeError):
    """A metric is mathematically undefined for the given inputs."""


class PromptError(TopicJudgeError):
    """A prompt template or few-shot block violates its contract."""


class LeakageError(PromptError):
    """A few-shot example does not come from the topic's training split."""


class ResponseCastError(TopicJudgeError):
    """An LLM response could not be cast to a relevance label."""

    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


class ScorerProtocolError(TopicJudgeError):
    """The external scorer process timed out or answered out of protocol."""


class TransportError(TopicJudgeError):
    """A chat-completion request failed after exhausting retries."""


class ConfigError(TopicJudgeError):
    """An experiment configuration is missing keys or has invalid values."""
