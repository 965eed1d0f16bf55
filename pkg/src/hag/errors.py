"""Exception hierarchy.

Two roots matter to callers: ``ProviderError`` (anything that went wrong
talking to a language model or embedder) and ``DataError`` (bad inputs,
files, or invariant violations).  The CLI maps them to exit codes 2 and 3.
"""

from __future__ import annotations


class HagError(Exception):
    pass


# -- data / validation -------------------------------------------------------

class DataError(HagError):
    pass


class EmptyPopulation(DataError):
    pass


class UnknownDimension(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class NoEvaluableDimensions(DataError):
    pass


class PopulationTooSmall(DataError):
    pass


class InvariantViolation(DataError):
    pass


class FormatVersionMismatch(DataError):
    pass


class UnknownArtifactType(DataError):
    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class AllPruned(DataError):
    pass


class UnreadableSource(DataError):
    pass


class ColumnMapIncomplete(DataError):
    pass


class EmptyDatabase(DataError):
    pass


class InvalidSize(DataError):
    pass


class UnreadableCorpus(DataError):
    pass


class InsufficientVolume(DataError):
    pass


class ConfigError(DataError):
    pass


# -- provider / model side ---------------------------------------------------

class ProviderError(HagError):
    pass


class ProviderUnreachable(ProviderError):
    pass


class OfflineViolation(ProviderUnreachable):
    """A network backend was used while offline mode is active."""


class ReplayMiss(ProviderUnreachable):
    pass


class EmbedderUnreachable(ProviderError):
    pass


class ResponseError(ProviderError):
    """A response was received but failed validation.

    Subclasses name the failure; the repair loop re-prompts on any of them.
    """


class MalformedResponse(ResponseError):
    pass


class NoJsonFound(MalformedResponse):
    pass


class SchemaMismatch(MalformedResponse):
    pass


class EmptyDistribution(ResponseError):
    pass


class DisallowedValue(ResponseError):
    pass


class UnknownDimensionInResponse(ResponseError):
    pass


class ConstraintViolatedInResponse(ResponseError):
    pass


class MalformedJudgeResponse(ResponseError):
    pass


class PartialTree(ProviderError):
    """Tree construction failed part way; ``partial`` holds what was built."""

    def __init__(self, message: str, path, partial):
        super().__init__(message)
        self.path = path
        self.partial = partial


class AugmentationExhausted(ProviderError):
    pass


class GenerationBudgetExceeded(ProviderError):
    pass
