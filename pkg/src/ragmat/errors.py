"""Exception taxonomy shared across the package.

Every error raised by ragmat derives from RagmatError so callers (and the
CLI's exit-code mapping) can catch one base class.
"""

from __future__ import annotations


class RagmatError(Exception):
    """Base class for all ragmat errors."""


class UsageError(RagmatError):
    """Bad command-line invocation."""


class ConfigError(RagmatError):
    """Invalid configuration; message lists each offending field."""


# --- corpus ---------------------------------------------------------------

class MalformedXml(RagmatError):
    def __init__(self, file: str, detail: str):
        self.file = file
        self.detail = detail
        super().__init__(f"{file}: {detail}")


class DuplicateSectionId(RagmatError):
    def __init__(self, doc_id: str, section_id: str):
        self.doc_id = doc_id
        self.section_id = section_id
        super().__init__(f"duplicate section ({doc_id}, {section_id})")


# --- embedder / endpoints --------------------------------------------------

class EndpointError(RagmatError):
    def __init__(self, status: int | None, body: str):
        self.status = status
        self.body = body
        label = status if status is not None else "no response"
        super().__init__(f"endpoint failure ({label}): {body[:500]}")


class DimMismatch(RagmatError):
    """Vectors of different dimension (or embedding model) were mixed."""


class ZeroNorm(RagmatError):
    """Cosine distance is undefined for a zero-norm vector."""


# --- vectorstore -----------------------------------------------------------

class DuplicateChunkId(RagmatError):
    def __init__(self, chunk_id: str):
        self.chunk_id = chunk_id
        super().__init__(f"duplicate chunk id {chunk_id!r}")


# --- pipeline --------------------------------------------------------------

class ModeContextMismatch(RagmatError):
    """Retrieved context presence contradicts the generation mode."""


class EmptyCompletion(RagmatError):
    """The chat endpoint returned no content."""


class RunFailed(RagmatError):
    """Every (profile, config) pair in an experiment run failed."""


# --- textmetrics -----------------------------------------------------------

class DegenerateText(RagmatError):
    """Readability is undefined without at least one word and one sentence."""


# --- ratings ---------------------------------------------------------------

class UnknownConfigLabel(RagmatError):
    def __init__(self, label: str):
        self.label = label
        super().__init__(f"no run outputs for config label {label!r}")


class ScoreOutOfRange(RagmatError):
    """Likert scores must be integers in 1..5."""


class UnknownItemToken(RagmatError):
    """Item token does not belong to the session."""


class MalformedRow(RagmatError):
    def __init__(self, line_no: int, detail: str):
        self.line_no = line_no
        self.detail = detail
        super().__init__(f"line {line_no}: {detail}")


class DuplicateKey(RagmatError):
    """More than one score row for one (rater, profile, config)."""


# --- stats -----------------------------------------------------------------

class EmptyGroup(RagmatError):
    """A statistic was requested over zero records."""


class DegenerateInput(RagmatError):
    """Input leaves the statistic undefined (e.g. zero variance everywhere)."""


class InsufficientData(RagmatError):
    """Too few complete subjects for a reliability estimate."""


class LabelMismatch(RagmatError):
    """Report inputs disagree on which config labels exist."""
