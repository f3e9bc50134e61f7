/**
 * DOM rendering. All elements are created through the root's own document,
 * so several independent screens (separate windows, tests) can coexist.
 */

import type { StoppingView } from './api.js';
import type { BatchState } from './state.js';
import { submitEnabled } from './state.js';

export interface Progress {
  labeled: number;
  total: number;
  round: number;
}

export interface ViewHandlers {
  onToggle(docId: number, className: string): void;
  onSubmit(): void;
  onRetry(): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderHeader(root: HTMLElement, progress: Progress): void {
  const doc = root.ownerDocument;
  let header = root.querySelector<HTMLElement>('.progress-header');
  if (!header) {
    header = el(doc, 'header', 'progress-header');
    root.prepend(header);
  }
  header.textContent = '';
  header.appendChild(el(doc, 'span', 'progress-count', `${progress.labeled} / ${progress.total} labeled`));
  header.appendChild(el(doc, 'span', 'progress-round', `round ${progress.round}`));
}

export function renderBatch(
  root: HTMLElement,
  state: BatchState,
  classes: string[],
  handlers: ViewHandlers,
): void {
  const doc = root.ownerDocument;
  let main = root.querySelector<HTMLElement>('.batch-main');
  if (!main) {
    main = el(doc, 'main', 'batch-main');
    root.appendChild(main);
  }
  main.textContent = '';

  const inputType = state.mode === 'single_label' ? 'radio' : 'checkbox';
  for (const docEntry of state.docs) {
    const card = el(doc, 'article', 'doc-card');
    card.dataset.docId = String(docEntry.docId);
    card.appendChild(el(doc, 'p', 'doc-text', docEntry.text));

    const fieldset = el(doc, 'fieldset', 'label-controls');
    fieldset.appendChild(el(doc, 'legend', undefined, `labels for document ${docEntry.docId}`));
    const picked = state.selections.get(docEntry.docId) ?? [];
    for (const className of classes) {
      const label = el(doc, 'label', 'label-option');
      const input = doc.createElement('input');
      input.type = inputType;
      input.name = `doc-${docEntry.docId}`;
      input.value = className;
      input.checked = picked.includes(className);
      input.addEventListener('change', () => handlers.onToggle(docEntry.docId, className));
      label.appendChild(input);
      label.appendChild(doc.createTextNode(` ${className}`));
      fieldset.appendChild(label);
    }
    card.appendChild(fieldset);
    main.appendChild(card);
  }

  const submit = el(doc, 'button', 'submit-batch', 'Submit batch');
  submit.disabled = !submitEnabled(state);
  submit.addEventListener('click', () => handlers.onSubmit());
  main.appendChild(submit);
}

export function refreshSubmitGate(root: HTMLElement, state: BatchState): void {
  const submit = root.querySelector<HTMLButtonElement>('.submit-batch');
  if (submit) {
    submit.disabled = !submitEnabled(state);
  }
}

export function renderTerminal(root: HTMLElement, exportCsvUrl: string, exportJsonlUrl: string): void {
  const doc = root.ownerDocument;
  let main = root.querySelector<HTMLElement>('.batch-main');
  if (!main) {
    main = el(doc, 'main', 'batch-main');
    root.appendChild(main);
  }
  main.textContent = '';
  const panel = el(doc, 'section', 'terminal-screen');
  panel.appendChild(el(doc, 'h2', undefined, 'Pool exhausted'));
  panel.appendChild(el(doc, 'p', undefined, 'Every document has been labeled.'));
  const csv = el(doc, 'a', 'export-link', 'Export CSV');
  csv.setAttribute('href', exportCsvUrl);
  const jsonl = el(doc, 'a', 'export-link', 'Export JSONL');
  jsonl.setAttribute('href', exportJsonlUrl);
  panel.appendChild(csv);
  panel.appendChild(jsonl);
  main.appendChild(panel);
}

export function showStopBanner(root: HTMLElement, stopping: StoppingView): void {
  const doc = root.ownerDocument;
  let banner = root.querySelector<HTMLElement>('.stop-banner');
  if (!banner) {
    banner = el(doc, 'aside', 'stop-banner');
    banner.setAttribute('role', 'status');
    root.prepend(banner);
  }
  const value = stopping.value === null ? '' : ` (${stopping.name} = ${stopping.value.toFixed(4)})`;
  banner.textContent =
    `Stopping criterion satisfied${value}. ` +
    'The model looks stable; you may stop, or keep labeling.';
}

export function clearStopBanner(root: HTMLElement): void {
  root.querySelector('.stop-banner')?.remove();
}

export function showErrorBanner(root: HTMLElement, message: string, handlers: ViewHandlers): void {
  const doc = root.ownerDocument;
  clearErrorBanner(root);
  const banner = el(doc, 'aside', 'error-banner');
  banner.setAttribute('role', 'alert');
  banner.appendChild(el(doc, 'span', undefined, message));
  const retry = el(doc, 'button', 'retry-button', 'Retry');
  retry.addEventListener('click', () => handlers.onRetry());
  banner.appendChild(retry);
  root.prepend(banner);
}

export function clearErrorBanner(root: HTMLElement): void {
  root.querySelector('.error-banner')?.remove();
}
