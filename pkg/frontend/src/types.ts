/** Wire types for the retrieval service JSON API. */

export const SEARCH_MODES = [
  'TextPlain',
  'FrameBase',
  'FrameAverage',
  'FrameBest',
  'FrameSummed',
  'FrameAll',
  'Annotation',
  'Combined',
] as const;

export type SearchMode = (typeof SEARCH_MODES)[number];

export interface SearchResult {
  doc_id: string;
  video_id: string;
  annotation_id: string;
  gloss: string;
  start_ms: number;
  end_ms: number;
  score: number;
  rank: number;
}

export interface VideoInfo {
  video_id: string;
  media_path: string | null;
  fps: number;
  duration_ms: number;
}

export interface AnnotationInfo {
  annotation_id: string;
  video_id?: string;
  tier_id: string;
  tier_role: string;
  gloss: string;
  start_ms: number;
  end_ms: number;
  revision: number;
  origin: string;
}

/** The service's shared error envelope. */
export interface ApiErrorBody {
  code: string;
  message: string;
  current_revision?: number;
}

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;
  readonly currentRevision?: number;

  constructor(status: number, body: ApiErrorBody) {
    super(body.message);
    this.name = 'ApiError';
    this.status = status;
    this.code = body.code;
    this.currentRevision = body.current_revision;
  }
}

export interface AnnotationDraft {
  video_id: string;
  /** absent while creating a new annotation */
  annotation_id?: string;
  gloss: string;
  start_ms: number;
  end_ms: number;
  /** base revision the edit applies to; absent while creating */
  revision?: number;
}
