/** DOM rendering for the search and annotation screens.
 *
 * The view is a thin projection of store state: every store notification
 * re-renders the affected region. Result cards are laid out in the exact
 * order the results arrived from the backend.
 */

import { ApiClient } from './api.js';
import { EditorStore, SearchStore } from './state.js';
import { AnnotationInfo, SEARCH_MODES, SearchResult, VideoInfo } from './types.js';

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

function formatMs(ms: number): string {
  return (ms / 1000).toFixed(2) + 's';
}

export class AppView {
  private readonly searchForm: HTMLFormElement;
  private readonly queryInput: HTMLInputElement;
  private readonly modeSelect: HTMLSelectElement;
  private readonly searchRegion: HTMLElement;
  private readonly editorRegion: HTMLElement;
  private readonly videoSelect: HTMLSelectElement;
  private readonly annotationList: HTMLElement;
  private videos: VideoInfo[] = [];
  private annotations: AnnotationInfo[] = [];

  constructor(
    root: HTMLElement,
    private readonly search: SearchStore,
    private readonly editor: EditorStore,
    private readonly api: ApiClient,
  ) {
    root.innerHTML = '';

    const header = el('header', 'app-header');
    header.appendChild(el('h1', undefined, 'Sign language video search'));
    this.searchForm = el('form', 'search-form');
    this.queryInput = el('input', 'query-input');
    this.queryInput.type = 'search';
    this.queryInput.placeholder = 'Search for a word...';
    this.modeSelect = el('select', 'mode-select');
    for (const mode of SEARCH_MODES) {
      const option = el('option', undefined, mode);
      option.value = mode;
      this.modeSelect.appendChild(option);
    }
    this.modeSelect.value = this.search.getState().mode;
    const submit = el('button', 'search-button', 'Search');
    submit.type = 'submit';
    this.searchForm.append(this.queryInput, this.modeSelect, submit);
    header.appendChild(this.searchForm);
    root.appendChild(header);

    this.searchRegion = el('main', 'search-region');
    root.appendChild(this.searchRegion);

    this.editorRegion = el('section', 'editor-region');
    const editormeta = el('div', 'editor-controls');
    editormeta.appendChild(el('h2', undefined, 'Annotations'));
    this.videoSelect = el('select', 'video-select');
    editormeta.appendChild(this.videoSelect);
    const addButton = el('button', 'new-annotation-button', 'New annotation');
    addButton.type = 'button';
    addButton.addEventListener('click', () => {
      if (this.videoSelect.value) {
        this.editor.beginCreate(this.videoSelect.value);
      }
    });
    editormeta.appendChild(addButton);
    this.editorRegion.appendChild(editormeta);
    this.annotationList = el('div', 'annotation-list');
    this.editorRegion.appendChild(this.annotationList);
    root.appendChild(this.editorRegion);

    this.searchForm.addEventListener('submit', (event) => {
      event.preventDefault();
      void this.search.submitSearch(this.queryInput.value);
    });
    this.modeSelect.addEventListener('change', () => {
      this.search.setMode(this.modeSelect.value as (typeof SEARCH_MODES)[number]);
    });
    this.videoSelect.addEventListener('change', () => {
      void this.loadAnnotations(this.videoSelect.value);
    });

    this.search.subscribe(() => this.renderSearch());
    this.editor.subscribe(() => this.renderEditor());
    this.renderSearch();
    this.renderEditor();
  }

  /** Populate the video picker and the first video's annotation list. */
  async loadVideos(): Promise<void> {
    this.videos = await this.api.videos();
    this.videoSelect.innerHTML = '';
    for (const video of this.videos) {
      const option = el('option', undefined, video.video_id);
      option.value = video.video_id;
      this.videoSelect.appendChild(option);
    }
    if (this.videos.length > 0) {
      this.videoSelect.value = this.videos[0].video_id;
      await this.loadAnnotations(this.videos[0].video_id);
    }
  }

  async loadAnnotations(videoId: string): Promise<void> {
    this.annotations = await this.api.annotations(videoId);
    this.renderEditor();
  }

  private renderSearch(): void {
    const state = this.search.getState();
    this.searchRegion.innerHTML = '';

    if (state.trail.length > 0) {
      const trail = el('nav', 'thesaurus-trail');
      trail.appendChild(el('span', 'trail-label', 'Similar to:'));
      for (const hop of state.trail) {
        trail.appendChild(el('span', 'trail-entry', hop.gloss));
      }
      this.searchRegion.appendChild(trail);
    }

    if (state.error) {
      const banner = el('div', 'error-banner', state.error.message);
      banner.dataset.code = state.error.code;
      this.searchRegion.appendChild(banner);
    }

    if (state.status === 'loading') {
      this.searchRegion.appendChild(el('div', 'loading-indicator', 'Searching...'));
      return;
    }

    if (state.status === 'ready' && state.results.length === 0) {
      this.searchRegion.appendChild(el('div', 'no-results', 'No results.'));
      return;
    }

    if (state.results.length > 0) {
      const grid = el('div', 'result-grid');
      for (const result of state.results) {
        grid.appendChild(this.renderCard(result, state));
      }
      this.searchRegion.appendChild(grid);
    }
  }

  private renderCard(
    result: SearchResult,
    state: ReturnType<SearchStore['getState']>,
  ): HTMLElement {
    const card = el('article', 'result-card');
    card.dataset.docId = result.doc_id;
    card.appendChild(el('span', 'card-rank', String(result.rank)));
    card.appendChild(el('h3', 'card-gloss', result.gloss));
    card.appendChild(
      el(
        'span',
        'card-segment',
        `${result.video_id} ${formatMs(result.start_ms)}-${formatMs(result.end_ms)}`,
      ),
    );
    card.appendChild(el('span', 'card-score', result.score.toFixed(3)));

    const similarButton = el('button', 'similar-button', 'Similar signs');
    similarButton.type = 'button';
    similarButton.addEventListener('click', () => {
      void this.search.exploreSimilar(result);
    });
    card.appendChild(similarButton);

    const framesButton = el('button', 'frames-button', 'Frames');
    framesButton.type = 'button';
    framesButton.addEventListener('click', () => {
      void this.search.openFilmstrip(result.doc_id);
    });
    card.appendChild(framesButton);

    if (state.filmstrip && state.filmstrip.docId === result.doc_id) {
      const strip = el('div', 'filmstrip');
      if (state.filmstrip.urls === null) {
        strip.appendChild(el('span', 'filmstrip-loading', 'Loading frames...'));
      } else {
        for (const url of state.filmstrip.urls) {
          const img = el('img', 'filmstrip-frame');
          img.src = url;
          img.alt = `frame of ${result.gloss}`;
          strip.appendChild(img);
        }
      }
      card.appendChild(strip);
    }
    return card;
  }

  private renderEditor(): void {
    const state = this.editor.getState();
    this.annotationList.innerHTML = '';

    for (const annotation of this.annotations) {
      const row = el('div', 'annotation-row');
      row.dataset.annotationId = annotation.annotation_id;
      row.appendChild(el('span', 'annotation-gloss', annotation.gloss));
      row.appendChild(
        el(
          'span',
          'annotation-span',
          `${formatMs(annotation.start_ms)}-${formatMs(annotation.end_ms)}`,
        ),
      );
      row.appendChild(el('span', 'annotation-revision', `rev ${annotation.revision}`));
      const editButton = el('button', 'edit-button', 'Edit');
      editButton.type = 'button';
      editButton.addEventListener('click', () => {
        this.editor.beginEdit(this.videoSelect.value, annotation);
      });
      row.appendChild(editButton);
      this.annotationList.appendChild(row);
    }

    if (state.draft) {
      this.annotationList.appendChild(this.renderDraftForm());
    }
    if (state.conflict) {
      this.annotationList.appendChild(this.renderConflictDialog(state.conflict.currentRevision));
    }
    if (state.error) {
      const banner = el('div', 'editor-error', state.error.message);
      banner.dataset.code = state.error.code;
      this.annotationList.appendChild(banner);
    }
  }

  private renderDraftForm(): HTMLElement {
    const state = this.editor.getState();
    const draft = state.draft!;
    const form = el('form', 'draft-form');

    const glossInput = el('input', 'draft-gloss');
    glossInput.value = draft.gloss;
    glossInput.addEventListener('input', () => {
      this.editor.updateDraft({ gloss: glossInput.value });
    });
    const startInput = el('input', 'draft-start');
    startInput.type = 'number';
    startInput.value = String(draft.start_ms);
    startInput.addEventListener('input', () => {
      this.editor.updateDraft({ start_ms: Number(startInput.value) });
    });
    const endInput = el('input', 'draft-end');
    endInput.type = 'number';
    endInput.value = String(draft.end_ms);
    endInput.addEventListener('input', () => {
      this.editor.updateDraft({ end_ms: Number(endInput.value) });
    });
    const saveButton = el('button', 'save-button', state.saving ? 'Saving...' : 'Save');
    saveButton.type = 'submit';
    saveButton.disabled = state.saving;
    const cancelButton = el('button', 'cancel-button', 'Cancel');
    cancelButton.type = 'button';
    cancelButton.addEventListener('click', () => this.editor.cancel());

    form.append(glossInput, startInput, endInput, saveButton, cancelButton);
    form.addEventListener('submit', (event) => {
      event.preventDefault();
      void this.editor.save().then((saved) => {
        if (saved) {
          void this.loadAnnotations(this.videoSelect.value);
        }
      });
    });
    return form;
  }

  private renderConflictDialog(currentRevision: number): HTMLElement {
    const dialog = el('div', 'conflict-dialog');
    dialog.appendChild(
      el(
        'p',
        'conflict-message',
        `Someone else changed this annotation (now at revision ${currentRevision}). ` +
          'Apply your edit on top of theirs?',
      ),
    );
    const rebaseButton = el('button', 'rebase-button', 'Apply on newest');
    rebaseButton.type = 'button';
    rebaseButton.addEventListener('click', () => {
      void this.editor.rebaseAndRetry().then((saved) => {
        if (saved) {
          void this.loadAnnotations(this.videoSelect.value);
        }
      });
    });
    const dismissButton = el('button', 'dismiss-button', 'Keep editing');
    dismissButton.type = 'button';
    dismissButton.addEventListener('click', () => this.editor.dismissConflict());
    dialog.append(rebaseButton, dismissButton);
    return dialog;
  }
}
