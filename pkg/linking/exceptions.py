"""Error hierarchy shared by every part of the toolkit.

Management commands turn any ``LinkingError`` raised at run time into exit
code 2, so each class name doubles as the user-facing error name.
"""


class LinkingError(Exception):
    """Base class for all toolkit errors."""


# ============================================
# KNOWLEDGE BASE
# ============================================

class KnowledgeBaseError(LinkingError):
    pass


class RecordError(KnowledgeBaseError):
    """An input record is unusable; ``line`` is 1-based."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = [str(part) for part in (path, f"line {line}" if line is not None else None) if part]
        prefix = ", ".join(where) + ": " if where else ""
        super().__init__(f"{prefix}{message}")


class DuplicateTitleError(RecordError):
    pass


class EmptyTitleError(RecordError):
    pass


class MalformedRecordError(RecordError):
    pass


class EmptyDatasetError(KnowledgeBaseError):
    pass


class OutOfRangeError(KnowledgeBaseError, ValueError):
    pass


# ============================================
# TEXT
# ============================================

class TextError(LinkingError):
    pass


class EmptyCorpusError(TextError):
    pass


class SpanOutOfBoundsError(TextError):
    pass


class SpanSplitsTokenError(TextError):
    pass


class InvalidWindowError(TextError):
    pass


class DocBudgetExceededError(TextError):
    pass


# ============================================
# RETRIEVER
# ============================================

class RetrieverError(LinkingError):
    pass


class UnknownTokenOverflowError(RetrieverError):
    pass


class DimensionMismatchError(RetrieverError):
    pass


class EmptyStoreError(RetrieverError):
    pass


class EmptyPositivesError(RetrieverError):
    pass


class InsufficientEntitiesError(RetrieverError):
    pass


# ============================================
# FUSION READER
# ============================================

class FusionModelError(LinkingError):
    pass


class TooManyCandidatesError(FusionModelError):
    pass


class SequenceTooLongError(FusionModelError):
    pass


class DeadEndError(FusionModelError):
    pass


class TargetTooLongError(FusionModelError):
    pass


class NonFiniteGradientError(FusionModelError):
    pass


class DivergenceDetectedError(FusionModelError):
    pass


class GradientCheckError(FusionModelError):
    """Analytic and finite-difference gradients disagree beyond tolerance."""


# ============================================
# OUTPUT GRAMMAR
# ============================================

class GrammarError(LinkingError):
    """A decoded segment does not follow the output grammar."""

    def __init__(self, message, segment=None):
        self.segment = segment
        if segment is not None:
            message = f"segment {segment}: {message}"
        super().__init__(message)


class MalformedSegmentError(GrammarError):
    pass


class EmptyMentionListError(GrammarError):
    pass


class DuplicateEntityError(GrammarError):
    pass


# ============================================
# LINKER / EVALUATION
# ============================================

class LinkerError(LinkingError):
    pass


class NoCandidatesError(LinkerError):
    pass


class EvaluationError(LinkingError):
    pass


class EmptyInputError(EvaluationError):
    pass


class DocMismatchError(EvaluationError):
    pass
