"""Exception types shared across the package."""


class SlideScoreError(Exception):
    """Base class for all slidescore errors."""


class MalformedImage(SlideScoreError):
    """Byte stream could not be decoded as an image."""


class UnsupportedFormat(SlideScoreError):
    """Image container is neither PNG nor JPEG."""


class ModelLoadError(SlideScoreError):
    """Runtime embedding model or its sidecar manifest could not be loaded."""


class EmbeddingLookupMiss(SlideScoreError):
    """Precomputed embedding table has no entry for the requested slide key."""


class DimensionMismatch(SlideScoreError):
    """Vector or matrix dimensions disagree with the expected shape."""


class ParseError(SlideScoreError):
    """File contents could not be parsed."""


class InsufficientData(SlideScoreError):
    """Too few rows or samples for the requested fit."""


class DegenerateInput(SlideScoreError):
    """Input carries no variance to fit on."""


class EmptyDeck(SlideScoreError):
    """Deck contains no slides."""


class EmptyCorpus(SlideScoreError):
    """Corpus directory contains no images."""


class UnreadableDirectory(SlideScoreError):
    """Corpus root does not exist or is not a directory."""


class ConstantInput(SlideScoreError):
    """Correlation input vector is constant."""


class DegenerateR(SlideScoreError):
    """Correlation magnitude of 1 has no finite Fisher transform."""


class TooFewPoints(SlideScoreError):
    """Not enough paired observations for the requested statistic."""


class ZeroTotalVariance(SlideScoreError):
    """Subject totals carry no variance; alpha is undefined."""


class DegenerateAnova(SlideScoreError):
    """ANOVA denominator collapsed to zero; ICC is undefined."""


class AllTied(SlideScoreError):
    """Every rater ranked all subjects equal; concordance is undefined."""


class LengthMismatch(SlideScoreError):
    """Paired vectors differ in length."""


class LabelMismatch(SlideScoreError):
    """Deck labels disagree between score and rating files."""


class ModelVersionMismatch(SlideScoreError):
    """Persisted model file uses an unsupported format version."""


class ChecksumMismatch(SlideScoreError):
    """Persisted model file failed its integrity check."""
