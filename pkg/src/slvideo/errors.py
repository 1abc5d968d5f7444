"""Exception hierarchy shared by every subsystem.

Each error carries a stable machine-readable ``code`` so the HTTP layer and
the CLI can map failures to wire responses without string matching.
"""

from __future__ import annotations


class SlvideoError(Exception):
    """Base class for all domain errors."""

    code = "internal"
    http_status = 500

    def __init__(self, message: str = ""):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__


# --- annotation store ---------------------------------------------------

class MalformedEaf(SlvideoError):
    code = "malformed_eaf"
    http_status = 400


class UnresolvedTimeSlot(SlvideoError):
    code = "unresolved_time_slot"
    http_status = 400


class DanglingReference(SlvideoError):
    code = "dangling_reference"
    http_status = 400


class InvalidInterval(SlvideoError):
    code = "invalid_interval"
    http_status = 400


class EmptyGloss(SlvideoError):
    code = "empty_gloss"
    http_status = 400


class ConcurrentEditConflict(SlvideoError):
    code = "concurrent_edit_conflict"
    http_status = 409

    def __init__(self, message: str = "", current_revision: int | None = None):
        super().__init__(message)
        self.current_revision = current_revision


class UnknownVideo(SlvideoError):
    code = "unknown_video"
    http_status = 404


class EmptyQuery(SlvideoError):
    code = "empty_query"
    http_status = 400


# --- segmenter ----------------------------------------------------------

class NotFacialExpressionTier(SlvideoError):
    code = "not_facial_expression_tier"
    http_status = 400


class MediaMissing(SlvideoError):
    code = "media_missing"
    http_status = 404


class ExtractionFailed(SlvideoError):
    code = "extraction_failed"
    http_status = 500


class PipelineFailed(SlvideoError):
    code = "pipeline_failed"
    http_status = 500


# --- embedder -----------------------------------------------------------

class EncoderUnavailable(SlvideoError):
    code = "encoder_unavailable"
    http_status = 503


class DimensionMismatch(SlvideoError):
    code = "dimension_mismatch"
    http_status = 400


class UnreadableFrame(SlvideoError):
    code = "unreadable_frame"
    http_status = 400


class EmptyInput(SlvideoError):
    code = "empty_input"
    http_status = 400


class DegenerateEmbedding(SlvideoError):
    code = "degenerate_embedding"
    http_status = 400


# --- vector index -------------------------------------------------------

class NotNormalized(SlvideoError):
    code = "not_normalized"
    http_status = 400


class UnknownField(SlvideoError):
    code = "unknown_field"
    http_status = 400


class UnknownDocument(SlvideoError):
    code = "unknown_document"
    http_status = 404


class CorruptIndexFile(SlvideoError):
    code = "corrupt_index_file"
    http_status = 500


class VersionMismatch(SlvideoError):
    code = "version_mismatch"
    http_status = 500


class InvalidDocId(SlvideoError):
    code = "invalid_doc_id"
    http_status = 400


# --- query engine / service --------------------------------------------

class UnknownMode(SlvideoError):
    code = "unknown_mode"
    http_status = 400


class ConfigInvalid(SlvideoError):
    code = "config_invalid"
    http_status = 500


class BindFailure(SlvideoError):
    code = "bind_failure"
    http_status = 500
