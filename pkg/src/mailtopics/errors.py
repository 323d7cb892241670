"""Exception types raised across the pipeline."""


class MailTopicsError(Exception):
    """Base class for all package errors."""


# ingestion
class UnparsableMessage(MailTopicsError):
    pass


class EmptyDocument(MailTopicsError):
    pass


class EmptyCorpus(MailTopicsError):
    pass


# embeddings
class CountMismatch(MailTopicsError):
    pass


class DimZero(MailTopicsError):
    pass


class CorruptHeader(MailTopicsError):
    pass


class ServiceUnavailable(MailTopicsError):
    pass


class DimMismatchAcrossBatches(MailTopicsError):
    pass


# reduction
class TooFewRows(MailTopicsError):
    pass


class KTooLarge(MailTopicsError):
    pass


class RankDeficientWarning(UserWarning):
    """PCA asked for more components than the data rank supports."""


class ReductionFallbackWarning(UserWarning):
    """Neighbor embedding failed the trustworthiness gate; PCA was used."""


# clustering
class EmptyInput(MailTopicsError):
    pass


# topics / evaluation
class EmptyVocabulary(MailTopicsError):
    pass


class NoTopics(MailTopicsError):
    pass


class MixedConfigs(MailTopicsError):
    pass


class DegeneratePairWarning(UserWarning):
    """A top word never occurs in the coherence reference corpus."""


# lda
class EmptyUpdate(MailTopicsError):
    pass


class PipelineError(MailTopicsError):
    """A stage failed; ``stage`` names it and ``__cause__`` holds the original error."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
