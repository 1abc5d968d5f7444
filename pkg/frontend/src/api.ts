/** Typed fetch client for the retrieval service.
 *
 * Every method resolves with the decoded JSON payload or rejects with
 * ApiError carrying the service error envelope. The client never reorders
 * or filters what the backend returns.
 */

import {
  AnnotationInfo,
  ApiError,
  ApiErrorBody,
  SearchMode,
  SearchResult,
  VideoInfo,
} from './types.js';

export interface ApiClient {
  search(query: string, mode: SearchMode, k?: number): Promise<SearchResult[]>;
  similar(docId: string): Promise<SearchResult[]>;
  videos(): Promise<VideoInfo[]>;
  annotations(videoId: string): Promise<AnnotationInfo[]>;
  createAnnotation(body: {
    video_id: string;
    gloss: string;
    start_ms: number;
    end_ms: number;
  }): Promise<AnnotationInfo>;
  updateAnnotation(
    videoId: string,
    annotationId: string,
    body: { gloss: string; start_ms: number; end_ms: number; revision: number },
  ): Promise<AnnotationInfo>;
  segmentFrames(docId: string): Promise<string[]>;
}

async function decode<T>(resp: Response): Promise<T> {
  const body = await resp.json();
  if (!resp.ok) {
    throw new ApiError(resp.status, body as ApiErrorBody);
  }
  return body as T;
}

export class HttpApiClient implements ApiClient {
  constructor(private readonly baseUrl: string = '') {}

  private url(path: string): string {
    return this.baseUrl + path;
  }

  async search(query: string, mode: SearchMode, k?: number): Promise<SearchResult[]> {
    const payload: Record<string, unknown> = { query, mode };
    if (k !== undefined) {
      payload.k = k;
    }
    const resp = await fetch(this.url('/search'), {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(payload),
    });
    const body = await decode<{ results: SearchResult[] }>(resp);
    return body.results;
  }

  async similar(docId: string): Promise<SearchResult[]> {
    const resp = await fetch(this.url(`/similar/${encodeURIComponent(docId)}`));
    const body = await decode<{ results: SearchResult[] }>(resp);
    return body.results;
  }

  async videos(): Promise<VideoInfo[]> {
    const resp = await fetch(this.url('/videos'));
    const body = await decode<{ videos: VideoInfo[] }>(resp);
    return body.videos;
  }

  async annotations(videoId: string): Promise<AnnotationInfo[]> {
    const resp = await fetch(this.url(`/videos/${encodeURIComponent(videoId)}/annotations`));
    const body = await decode<{ annotations: AnnotationInfo[] }>(resp);
    return body.annotations;
  }

  async createAnnotation(body: {
    video_id: string;
    gloss: string;
    start_ms: number;
    end_ms: number;
  }): Promise<AnnotationInfo> {
    const resp = await fetch(this.url('/annotations'), {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
    return decode<AnnotationInfo>(resp);
  }

  async updateAnnotation(
    videoId: string,
    annotationId: string,
    body: { gloss: string; start_ms: number; end_ms: number; revision: number },
  ): Promise<AnnotationInfo> {
    const path = `/annotations/${encodeURIComponent(videoId)}/${encodeURIComponent(annotationId)}`;
    const resp = await fetch(this.url(path), {
      method: 'PUT',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
    return decode<AnnotationInfo>(resp);
  }

  async segmentFrames(docId: string): Promise<string[]> {
    const resp = await fetch(this.url(`/segments/${encodeURIComponent(docId)}/frames`));
    const body = await decode<{ frames: string[] }>(resp);
    return body.frames;
  }
}
