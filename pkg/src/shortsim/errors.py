"""Exception types shared across the toolkit."""


class ShortsimError(Exception):
    """Base class for all toolkit errors."""


# --- tokenizer ---

class EmptyCorpus(ShortsimError):
    pass


class VocabTooSmall(ShortsimError):
    pass


class IdOutOfRange(ShortsimError):
    pass


# --- encoder ---

class SequenceTooLong(ShortsimError):
    pass


# --- pretraining ---

class NoMaskableTokens(ShortsimError):
    pass


class NoMaskedPositions(ShortsimError):
    pass


class NonFiniteGradient(ShortsimError):
    pass


class CheckpointWriteFailed(ShortsimError):
    pass


# --- similarity ---

class NoRealTokens(ShortsimError):
    pass


class ZeroVector(ShortsimError):
    pass


class ModelLoadFailed(ShortsimError):
    pass


# --- evaluation ---

class ConstantInput(ShortsimError):
    pass


class LengthMismatch(ShortsimError):
    pass


# --- pair building ---

class MissingTrendField(ShortsimError):
    pass


class MissingTimestamp(ShortsimError):
    pass


class TooFewScores(ShortsimError):
    pass


class EmptyDataset(ShortsimError):
    pass


# --- corpus / checkpoint I/O ---

class DuplicateId(ShortsimError):
    pass


class TooManyMalformedLines(ShortsimError):
    pass


class CorruptCheckpoint(ShortsimError):
    pass


class ConfigMismatch(ShortsimError):
    pass
