/** Browser entry point: wire the stores and view to the live service. */

import { HttpApiClient } from './api.js';
import { EditorStore, SearchStore } from './state.js';
import { AppView } from './view.js';

const root = document.getElementById('app');
if (!root) {
  throw new Error('missing #app mount point');
}

const api = new HttpApiClient('');
const search = new SearchStore(api);
const editor = new EditorStore(api);
const view = new AppView(root, search, editor, api);
void view.loadVideos();
