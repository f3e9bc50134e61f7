/**
 * Pure batch-screen state: which classes are picked per document, whether
 * the batch may be submitted, and how local picks survive a 409 refetch.
 *
 * The state never holds anything the server has confirmed; it is only the
 * annotator's in-progress selections for the currently pending batch.
 */

import type { BatchView, LabelMode } from './api.js';

export interface BatchState {
  seq: number;
  done: boolean;
  mode: LabelMode;
  docs: { docId: number; text: string }[];
  /** docId -> chosen class names (insertion order preserved). */
  selections: Map<number, string[]>;
}

export function createBatchState(batch: BatchView, mode: LabelMode): BatchState {
  return {
    seq: batch.seq,
    done: batch.done,
    mode,
    docs: batch.batch.map((d) => ({ docId: d.doc_id, text: d.text })),
    selections: new Map(batch.batch.map((d) => [d.doc_id, []])),
  };
}

/** Single-label picks replace; multi-label picks toggle. */
export function toggleSelection(state: BatchState, docId: number, className: string): BatchState {
  const current = state.selections.get(docId);
  if (current === undefined) {
    return state;
  }
  let next: string[];
  if (state.mode === 'single_label') {
    next = [className];
  } else if (current.includes(className)) {
    next = current.filter((c) => c !== className);
  } else {
    next = [...current, className];
  }
  const selections = new Map(state.selections);
  selections.set(docId, next);
  return { ...state, selections };
}

/**
 * Submit is legal once every document has a valid selection: exactly one
 * class in single-label mode, any subset (including none) in multi-label.
 */
export function submitEnabled(state: BatchState): boolean {
  if (state.docs.length === 0) {
    return false;
  }
  if (state.mode === 'multi_label') {
    return true;
  }
  return state.docs.every((d) => (state.selections.get(d.docId) ?? []).length === 1);
}

/** Payload for POST .../labels, echoing the batch seq. */
export function labelsPayload(state: BatchState): Record<string, string[]> {
  const payload: Record<string, string[]> = {};
  for (const doc of state.docs) {
    payload[String(doc.docId)] = state.selections.get(doc.docId) ?? [];
  }
  return payload;
}

/**
 * Adopt the authoritative batch after a 409, keeping the annotator's picks
 * for documents that are still part of it.
 */
export function mergeAuthoritative(
  state: BatchState,
  authoritative: BatchView,
  mode: LabelMode,
): BatchState {
  const fresh = createBatchState(authoritative, mode);
  for (const doc of fresh.docs) {
    const kept = state.selections.get(doc.docId);
    if (kept && kept.length) {
      fresh.selections.set(doc.docId, [...kept]);
    }
  }
  return fresh;
}
