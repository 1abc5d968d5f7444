/** UI state containers, independent of the DOM.
 *
 * SearchStore owns the query/results lifecycle. Only one search may be in
 * flight: each request takes a sequence token and a response is dropped
 * unless its token is still the latest, so a slow older reply can never
 * overwrite a newer one. Results are stored exactly as the backend returned
 * them; ordering, truncation and scores are the backend's decision.
 *
 * EditorStore owns the annotation draft, including the stale-revision
 * conflict flow: a 409 surfaces the server's current revision and the user
 * chooses whether to rebase the draft onto it before retrying.
 */

import { ApiClient } from './api.js';
import {
  AnnotationDraft,
  AnnotationInfo,
  ApiError,
  SearchMode,
  SearchResult,
} from './types.js';

export type Listener = () => void;

class Observable {
  private listeners: Listener[] = [];

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  protected notify(): void {
    for (const fn of [...this.listeners]) {
      fn();
    }
  }
}

export interface UiError {
  code: string;
  message: string;
}

export interface TrailEntry {
  docId: string;
  gloss: string;
}

export type SearchStatus = 'idle' | 'loading' | 'ready' | 'error';

export interface SearchState {
  status: SearchStatus;
  mode: SearchMode;
  /** last submitted query, '' after a thesaurus hop */
  query: string;
  results: SearchResult[];
  error: UiError | null;
  /** chain of thesaurus hops that produced the current results */
  trail: TrailEntry[];
  /** doc whose filmstrip is open, with its frame URLs once loaded */
  filmstrip: { docId: string; urls: string[] | null } | null;
}

function toUiError(err: unknown): UiError {
  if (err instanceof ApiError) {
    return { code: err.code, message: err.message };
  }
  return { code: 'network', message: err instanceof Error ? err.message : String(err) };
}

export class SearchStore extends Observable {
  private state: SearchState = {
    status: 'idle',
    mode: 'Combined',
    query: '',
    results: [],
    error: null,
    trail: [],
    filmstrip: null,
  };
  private seq = 0;
  private filmstripSeq = 0;

  constructor(private readonly api: ApiClient) {
    super();
  }

  getState(): SearchState {
    return this.state;
  }

  setMode(mode: SearchMode): void {
    this.state = { ...this.state, mode };
    this.notify();
  }

  /** Run a text search. An empty query fails locally without a request. */
  async submitSearch(rawQuery: string): Promise<void> {
    const query = rawQuery.trim();
    if (query === '') {
      this.seq += 1; // outdate any in-flight request
      this.state = {
        ...this.state,
        status: 'error',
        query: rawQuery,
        results: [],
        error: { code: 'empty_query', message: 'Type a word to search for.' },
        trail: [],
        filmstrip: null,
      };
      this.notify();
      return;
    }
    const token = ++this.seq;
    this.state = { ...this.state, status: 'loading', query, error: null };
    this.notify();
    try {
      const results = await this.api.search(query, this.state.mode);
      if (token !== this.seq) {
        return;
      }
      this.state = {
        ...this.state,
        status: 'ready',
        results,
        error: null,
        trail: [],
        filmstrip: null,
      };
    } catch (err) {
      if (token !== this.seq) {
        return;
      }
      this.state = { ...this.state, status: 'error', results: [], error: toUiError(err) };
    }
    this.notify();
  }

  /** Replace the grid with signs similar to a result (a thesaurus hop). */
  async exploreSimilar(source: SearchResult): Promise<void> {
    const token = ++this.seq;
    this.state = { ...this.state, status: 'loading', error: null };
    this.notify();
    try {
      const results = await this.api.similar(source.doc_id);
      if (token !== this.seq) {
        return;
      }
      this.state = {
        ...this.state,
        status: 'ready',
        query: '',
        results,
        error: null,
        trail: [...this.state.trail, { docId: source.doc_id, gloss: source.gloss }],
        filmstrip: null,
      };
    } catch (err) {
      if (token !== this.seq) {
        return;
      }
      this.state = { ...this.state, status: 'error', results: [], error: toUiError(err) };
    }
    this.notify();
  }

  /** Fetch and show the keyframe strip for one result. */
  async openFilmstrip(docId: string): Promise<void> {
    const token = ++this.filmstripSeq;
    this.state = { ...this.state, filmstrip: { docId, urls: null } };
    this.notify();
    try {
      const urls = await this.api.segmentFrames(docId);
      if (token !== this.filmstripSeq) {
        return;
      }
      this.state = { ...this.state, filmstrip: { docId, urls } };
    } catch (err) {
      if (token !== this.filmstripSeq) {
        return;
      }
      this.state = { ...this.state, filmstrip: null, error: toUiError(err) };
    }
    this.notify();
  }

  closeFilmstrip(): void {
    this.filmstripSeq += 1;
    this.state = { ...this.state, filmstrip: null };
    this.notify();
  }
}

export interface EditorState {
  draft: AnnotationDraft | null;
  saving: boolean;
  /** set when a save hit a concurrent edit; holds the server's revision */
  conflict: { currentRevision: number } | null;
  error: UiError | null;
  /** last annotation the server accepted */
  saved: AnnotationInfo | null;
}

export class EditorStore extends Observable {
  private state: EditorState = {
    draft: null,
    saving: false,
    conflict: null,
    error: null,
    saved: null,
  };

  constructor(private readonly api: ApiClient) {
    super();
  }

  getState(): EditorState {
    return this.state;
  }

  beginCreate(videoId: string): void {
    this.state = {
      draft: { video_id: videoId, gloss: '', start_ms: 0, end_ms: 0 },
      saving: false,
      conflict: null,
      error: null,
      saved: null,
    };
    this.notify();
  }

  beginEdit(videoId: string, annotation: AnnotationInfo): void {
    this.state = {
      draft: {
        video_id: videoId,
        annotation_id: annotation.annotation_id,
        gloss: annotation.gloss,
        start_ms: annotation.start_ms,
        end_ms: annotation.end_ms,
        revision: annotation.revision,
      },
      saving: false,
      conflict: null,
      error: null,
      saved: null,
    };
    this.notify();
  }

  updateDraft(patch: Partial<Pick<AnnotationDraft, 'gloss' | 'start_ms' | 'end_ms'>>): void {
    if (!this.state.draft) {
      return;
    }
    this.state = { ...this.state, draft: { ...this.state.draft, ...patch } };
    this.notify();
  }

  cancel(): void {
    this.state = { ...this.state, draft: null, conflict: null, error: null };
    this.notify();
  }

  /** Local checks mirroring the server's interval and gloss rules. */
  validate(): UiError | null {
    const draft = this.state.draft;
    if (!draft) {
      return { code: 'no_draft', message: 'Nothing to save.' };
    }
    if (!Number.isFinite(draft.start_ms) || !Number.isFinite(draft.end_ms)) {
      return { code: 'invalid_interval', message: 'Start and end must be numbers.' };
    }
    if (draft.start_ms >= draft.end_ms) {
      return { code: 'invalid_interval', message: 'Start must be before end.' };
    }
    if (draft.gloss.trim() === '') {
      return { code: 'empty_gloss', message: 'The gloss cannot be empty.' };
    }
    return null;
  }

  /**
   * Persist the draft. Rejected locally when validation fails; a 409 from
   * the server opens the conflict state instead of surfacing an error.
   */
  async save(): Promise<boolean> {
    const draft = this.state.draft;
    if (!draft) {
      return false;
    }
    const invalid = this.validate();
    if (invalid) {
      this.state = { ...this.state, error: invalid };
      this.notify();
      return false;
    }
    this.state = { ...this.state, saving: true, error: null };
    this.notify();
    try {
      let saved: AnnotationInfo;
      if (draft.annotation_id === undefined) {
        saved = await this.api.createAnnotation({
          video_id: draft.video_id,
          gloss: draft.gloss,
          start_ms: draft.start_ms,
          end_ms: draft.end_ms,
        });
      } else {
        saved = await this.api.updateAnnotation(draft.video_id, draft.annotation_id, {
          gloss: draft.gloss,
          start_ms: draft.start_ms,
          end_ms: draft.end_ms,
          revision: draft.revision ?? 0,
        });
      }
      this.state = { draft: null, saving: false, conflict: null, error: null, saved };
      this.notify();
      return true;
    } catch (err) {
      if (err instanceof ApiError && err.code === 'concurrent_edit_conflict') {
        this.state = {
          ...this.state,
          saving: false,
          conflict: { currentRevision: err.currentRevision ?? 0 },
        };
      } else {
        this.state = { ...this.state, saving: false, error: toUiError(err) };
      }
      this.notify();
      return false;
    }
  }

  /**
   * Accept the server's revision and retry the save, keeping the user's
   * gloss and interval edits.
   */
  async rebaseAndRetry(): Promise<boolean> {
    const draft = this.state.draft;
    const conflict = this.state.conflict;
    if (!draft || !conflict) {
      return false;
    }
    this.state = {
      ...this.state,
      draft: { ...draft, revision: conflict.currentRevision },
      conflict: null,
    };
    this.notify();
    return this.save();
  }

  dismissConflict(): void {
    this.state = { ...this.state, conflict: null };
    this.notify();
  }
}
