import { ApiClient } from './api.js';
import { AnnotationApp } from './app.js';

const root = document.getElementById('app');
if (!root) {
  throw new Error('missing #app mount point');
}

const app = new AnnotationApp(root, new ApiClient(''));
app.boot().catch((err) => {
  root.textContent = `Failed to reach the annotation service: ${err}`;
});
