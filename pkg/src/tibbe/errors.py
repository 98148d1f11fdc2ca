"""Typed errors shared across the harness.

Every error a caller is expected to branch on has its own class; CLI exit
codes are mapped from these in ``tibbe.cli``.
"""

from __future__ import annotations


class TibbeError(Exception):
    """Base class for all harness errors."""


# --- config ---------------------------------------------------------------

class ConfigError(TibbeError):
    pass


# --- corpus ---------------------------------------------------------------

class MissingPath(TibbeError):
    pass


class EmptyCorpus(TibbeError):
    pass


class DuplicateDocId(TibbeError):
    pass


class MalformedDocument(TibbeError):
    pass


class InvalidChunkParams(TibbeError):
    pass


# --- embedding ------------------------------------------------------------

class EmptyText(TibbeError):
    pass


class RemoteUnavailable(TibbeError):
    pass


class DimensionMismatch(TibbeError):
    pass


# --- retrieval ------------------------------------------------------------

class EmptyQuery(TibbeError):
    pass


class UnsupportedVersion(TibbeError):
    pass


class CorruptIndex(TibbeError):
    pass


# --- llm gateway ----------------------------------------------------------

class EmptyMessages(TibbeError):
    pass


class BackendUnavailable(TibbeError):
    pass


class FixtureMiss(TibbeError):
    pass


class OverlongPrompt(TibbeError):
    pass


# --- judge ----------------------------------------------------------------

class EmptyAnswer(TibbeError):
    pass


class NoJsonFound(TibbeError):
    pass


class MissingKey(TibbeError):
    def __init__(self, key: str):
        super().__init__(f"missing key: {key}")
        self.key = key


class OutOfRange(TibbeError):
    def __init__(self, key: str, value: object):
        super().__init__(f"value out of range for {key}: {value!r}")
        self.key = key
        self.value = value


class NoScoredSamples(TibbeError):
    pass


class JudgeParseFailed(TibbeError):
    """Judge output stayed unparseable after the retry budget."""


# --- benchmark ------------------------------------------------------------

class EmptyAilment(TibbeError):
    pass


class MalformedRecord(TibbeError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no


class UnknownCategory(TibbeError):
    pass


class DuplicateQuestionId(TibbeError):
    pass


# --- runner / report --------------------------------------------------------

class CorruptRunData(TibbeError):
    pass


# --- report ---------------------------------------------------------------

class EmptyRun(TibbeError):
    pass


class IncompleteModes(TibbeError):
    def __init__(self, question_id: str, missing: list[str]):
        super().__init__(f"question {question_id} is missing modes: {', '.join(missing)}")
        self.question_id = question_id
        self.missing = missing
