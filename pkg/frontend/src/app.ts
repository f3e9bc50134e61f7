/**
 * Screen controller: one pending batch at a time, at most one in-flight
 * mutation, and nothing kept locally that the server has not confirmed
 * (a page reload reconstructs everything from /status + /batch).
 */

import { ApiClient, ApiError, SessionInfo, StoppingView } from './api.js';
import {
  BatchState,
  createBatchState,
  labelsPayload,
  mergeAuthoritative,
  toggleSelection,
} from './state.js';
import {
  clearErrorBanner,
  refreshSubmitGate,
  renderBatch,
  renderHeader,
  renderTerminal,
  showErrorBanner,
  showStopBanner,
} from './view.js';

export class AnnotationApp {
  private session!: SessionInfo;
  private state: BatchState | null = null;
  private total = 0;
  private submitting = false;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
  ) {}

  async boot(): Promise<void> {
    this.session = await this.api.createSession();
    await this.refresh();
  }

  /** Rebuild the whole screen from the server's authoritative state. */
  async refresh(): Promise<void> {
    const status = await this.api.getStatus(this.session.session_id);
    this.total = status.labeled + status.unlabeled;
    renderHeader(this.root, {
      labeled: status.labeled,
      total: this.total,
      round: status.round,
    });
    if (status.stopping.should_stop) {
      showStopBanner(this.root, status.stopping);
    }
    const batch = await this.api.getBatch(this.session.session_id);
    if (batch.done) {
      this.state = null;
      renderTerminal(
        this.root,
        this.api.exportUrl(this.session.session_id, 'csv'),
        this.api.exportUrl(this.session.session_id, 'jsonl'),
      );
      return;
    }
    this.state = createBatchState(batch, this.session.mode);
    this.renderCurrentBatch();
  }

  private renderCurrentBatch(): void {
    if (!this.state) return;
    renderBatch(this.root, this.state, this.session.classes, this.handlers());
  }

  private handlers() {
    return {
      onToggle: (docId: number, className: string) => this.toggle(docId, className),
      onSubmit: () => void this.submit(),
      onRetry: () => void this.retry(),
    };
  }

  toggle(docId: number, className: string): void {
    if (!this.state) return;
    this.state = toggleSelection(this.state, docId, className);
    this.renderCurrentBatch();
  }

  async submit(): Promise<void> {
    if (!this.state || this.submitting) return;
    this.submitting = true;
    try {
      const result = await this.api.submitLabels(
        this.session.session_id,
        this.state.seq,
        labelsPayload(this.state),
      );
      clearErrorBanner(this.root);
      this.afterSubmit(result.labeled, result.round, result.stopping);
      const batch = await this.api.getBatch(this.session.session_id);
      if (batch.done) {
        this.state = null;
        renderTerminal(
          this.root,
          this.api.exportUrl(this.session.session_id, 'csv'),
          this.api.exportUrl(this.session.session_id, 'jsonl'),
        );
      } else {
        this.state = createBatchState(batch, this.session.mode);
        this.renderCurrentBatch();
      }
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // another tab won the race: adopt the authoritative batch, keeping
        // picks for any documents that are still pending
        const batch = await this.api.getBatch(this.session.session_id);
        const status = await this.api.getStatus(this.session.session_id);
        renderHeader(this.root, {
          labeled: status.labeled,
          total: this.total,
          round: status.round,
        });
        if (batch.done) {
          this.state = null;
          renderTerminal(
            this.root,
            this.api.exportUrl(this.session.session_id, 'csv'),
            this.api.exportUrl(this.session.session_id, 'jsonl'),
          );
        } else {
          this.state = this.state
            ? mergeAuthoritative(this.state, batch, this.session.mode)
            : createBatchState(batch, this.session.mode);
          this.renderCurrentBatch();
        }
      } else if (err instanceof ApiError) {
        showErrorBanner(this.root, `Submission rejected: ${err.code}`, this.handlers());
      } else {
        // network failure: selections stay as they are, offer a retry
        showErrorBanner(this.root, 'Network error, labels were not sent.', this.handlers());
      }
    } finally {
      this.submitting = false;
      if (this.state) {
        refreshSubmitGate(this.root, this.state);
      }
    }
  }

  private afterSubmit(labeled: number, round: number, stopping: StoppingView): void {
    renderHeader(this.root, { labeled, total: this.total, round });
    if (stopping.should_stop) {
      showStopBanner(this.root, stopping);
    }
  }

  async retry(): Promise<void> {
    clearErrorBanner(this.root);
    await this.submit();
  }

  /** Test hook: current selections and seq. */
  get batchState(): BatchState | null {
    return this.state;
  }
}
