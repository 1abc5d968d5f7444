"""Keyframe planning and external frame extraction.

Every native-fps frame tick inside an annotated facial-expression interval
is a keyframe.  Extraction and the optional person-crop / background-removal
steps are external commands configured per corpus; the bundled default
template shells out to ffmpeg for a single-frame seek.
"""

from __future__ import annotations

import logging
import shlex
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

from .annotations import Annotation, TierRole, VideoRecord
from .errors import (
    ExtractionFailed,
    InvalidInterval,
    MediaMissing,
    NotFacialExpressionTier,
    PipelineFailed,
)
from .ids import make_doc_id

logger = logging.getLogger(__name__)

DEFAULT_EXTRACT_TEMPLATE = (
    "ffmpeg -y -loglevel error -ss {timestamp_ms}ms -i {media} -frames:v 1 {out}"
)


@dataclass(frozen=True)
class Segment:
    video_id: str
    annotation_id: str
    start_ms: int
    end_ms: int
    frame_timestamps_ms: tuple[int, ...]
    frame_paths: tuple[Path, ...] = ()

    def __post_init__(self):
        ts = self.frame_timestamps_ms
        if not ts:
            raise InvalidInterval("segment must have at least one keyframe timestamp")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise InvalidInterval("frame timestamps must be strictly ascending")
        if ts[0] < self.start_ms or ts[-1] > self.end_ms:
            raise InvalidInterval("frame timestamps must lie within [start_ms, end_ms]")
        if self.frame_paths and len(self.frame_paths) != len(ts):
            raise InvalidInterval("frame_paths must be empty or parallel to timestamps")

    @property
    def doc_id(self) -> str:
        return make_doc_id(self.video_id, self.annotation_id)


@dataclass(frozen=True)
class PreprocessPipeline:
    """Ordered image-to-image command templates; empty means identity."""

    steps: tuple[str, ...] = ()


def _round_half_up(x: float) -> int:
    return int(x + 0.5)


def plan_keyframes(ann: Annotation, fps: float) -> Segment:
    """Timestamps of every frame tick t_k = round(k*1000/fps) inside the
    closed interval [start_ms, end_ms]; falls back to start_ms when the
    interval contains no tick."""
    if ann.tier_role is not TierRole.FACIAL_EXPRESSION:
        raise NotFacialExpressionTier(
            f"annotation {ann.annotation_id!r} is on a {ann.tier_role.value} tier"
        )
    if fps <= 0:
        raise InvalidInterval(f"fps must be positive, got {fps}")
    if ann.start_ms >= ann.end_ms:
        raise InvalidInterval(
            f"start_ms {ann.start_ms} must be < end_ms {ann.end_ms}"
        )
    tick = 1000.0 / fps
    timestamps = []
    k = max(0, int(ann.start_ms / tick) - 2)
    while True:
        t = _round_half_up(k * tick)
        if t > ann.end_ms:
            break
        if t >= ann.start_ms:
            timestamps.append(t)
        k += 1
    if not timestamps:
        timestamps = [ann.start_ms]
    return Segment(
        video_id=ann.video_id,
        annotation_id=ann.annotation_id,
        start_ms=ann.start_ms,
        end_ms=ann.end_ms,
        frame_timestamps_ms=tuple(timestamps),
    )


def _run_template(template: str, substitutions: dict[str, str], error_cls) -> None:
    argv = [token.format(**substitutions) for token in shlex.split(template)]
    try:
        proc = subprocess.run(argv, capture_output=True, text=True)
    except OSError as exc:
        raise error_cls(f"cannot run {argv[0]!r}: {exc}") from exc
    if proc.returncode != 0:
        raise error_cls(
            f"command {' '.join(argv)!r} exited {proc.returncode}: "
            f"{proc.stderr.strip()[:500]}"
        )


def frame_filename(video_id: str, annotation_id: str, timestamp_ms: int) -> str:
    return f"{video_id}_{annotation_id}_{timestamp_ms}.png"


def extract_frames(
    seg: Segment,
    video: VideoRecord,
    pipeline: PreprocessPipeline,
    out_dir: Path | str,
    extract_template: str = DEFAULT_EXTRACT_TEMPLATE,
) -> Segment:
    """Extract one image per keyframe timestamp and apply the preprocess
    pipeline in order; returns the segment with frame_paths filled."""
    if video.media_path is None or not Path(video.media_path).exists():
        raise MediaMissing(f"media for video {video.video_id!r} not found: "
                           f"{video.media_path}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for ts in seg.frame_timestamps_ms:
        out_path = out_dir / frame_filename(seg.video_id, seg.annotation_id, ts)
        _run_template(extract_template, {
            "media": str(video.media_path),
            "timestamp_ms": str(ts),
            "out": str(out_path),
        }, ExtractionFailed)
        if not out_path.exists():
            raise ExtractionFailed(f"extractor produced no file at {out_path}")
        for step in pipeline.steps:
            with tempfile.NamedTemporaryFile(
                suffix=".png", dir=out_dir, delete=False
            ) as tmp:
                tmp_path = Path(tmp.name)
            try:
                _run_template(step, {
                    "in": str(out_path),
                    "out": str(tmp_path),
                }, PipelineFailed)
                if not tmp_path.exists() or tmp_path.stat().st_size == 0:
                    raise PipelineFailed(f"step {step!r} produced no output")
                tmp_path.replace(out_path)
            finally:
                tmp_path.unlink(missing_ok=True)
        paths.append(out_path)
    return replace(seg, frame_paths=tuple(paths))


def extract_all(
    segments: Iterable[Segment],
    videos: dict[str, VideoRecord],
    pipeline: PreprocessPipeline,
    out_dir: Path | str,
    extract_template: str = DEFAULT_EXTRACT_TEMPLATE,
    workers: int = 4,
) -> list[Segment]:
    """Extract many segments in parallel; filenames are segment-unique, so
    workers never collide on the filesystem."""
    segments = list(segments)

    def one(seg: Segment) -> Segment:
        return extract_frames(
            seg, videos[seg.video_id], pipeline, out_dir, extract_template
        )

    if workers <= 1 or len(segments) <= 1:
        return [one(s) for s in segments]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, segments))


def find_frames(frames_dir: Path | str, video_id: str, annotation_id: str) -> list[Path]:
    """Previously extracted frames for one segment, ordered by timestamp."""
    frames_dir = Path(frames_dir)
    prefix = f"{video_id}_{annotation_id}_"
    found = []
    if frames_dir.is_dir():
        for path in frames_dir.glob(f"{prefix}*.png"):
            ts_part = path.stem[len(prefix):]
            if ts_part.isdigit():
                found.append((int(ts_part), path))
    return [p for _, p in sorted(found)]
