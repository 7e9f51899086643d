"""Exception types raised across the pipeline."""


class RaglineError(Exception):
    """Base class for every error raised by ragline."""


class CorpusError(RaglineError):
    """The corpus directory or one of its documents could not be loaded."""

    def __init__(self, message, file_errors=None):
        super().__init__(message)
        self.file_errors = dict(file_errors or {})


class ExtractionError(RaglineError):
    """Raw document bytes could not be turned into page text."""


class EmbeddingServiceError(RaglineError):
    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status


class DimensionMismatchError(RaglineError):
    def __init__(self, expected, got, record_id=None):
        where = f" for {record_id!r}" if record_id is not None else ""
        super().__init__(f"dimension mismatch{where} (expected {expected}, got {got})")
        self.expected = expected
        self.got = got
        self.record_id = record_id


class IndexFormatError(RaglineError):
    """An index directory is missing, corrupt, or written by an unsupported version."""


class EmbedderMismatchError(RaglineError):
    def __init__(self, index_fingerprint, embedder_fingerprint):
        super().__init__(
            f"embedder/index mismatch: index built with {index_fingerprint!r}, "
            f"query embedder is {embedder_fingerprint!r}"
        )
        self.index_fingerprint = index_fingerprint
        self.embedder_fingerprint = embedder_fingerprint


class PromptError(RaglineError):
    """A prompt could not be assembled from the given inputs."""


class GenerationServiceError(RaglineError):
    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status


class GradesError(RaglineError):
    """Graded-response data is malformed or inconsistent."""


class DegenerateTableError(RaglineError):
    """A 2x2 table has an all-zero row or column."""
