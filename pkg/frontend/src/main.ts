/**
 * Console bootstrap: token entry -> question picker -> batch list ->
 * transcript + gated decision form.  All state changes round-trip through
 * the HTTP API; the console adds no logic beyond form gating.
 */

import { ApiClient, ApiError, type BatchItem, type FetchLike } from './api';
import { ConsoleSession } from './session';
import {
  renderBatch,
  renderDecisionForm,
  renderQuestionPicker,
  renderTokenForm,
  renderTranscript,
} from './views';

export interface ConsoleOptions {
  baseUrl?: string;
  fetchFn?: FetchLike;
}

export class ConsoleApp {
  readonly session = new ConsoleSession();
  private root: HTMLElement;
  private client: ApiClient | null = null;
  private options: ConsoleOptions;

  constructor(root: HTMLElement, options: ConsoleOptions = {}) {
    this.root = root;
    this.options = options;
  }

  start(): void {
    this.showTokenForm();
  }

  private showTokenForm(message?: string): void {
    this.root.replaceChildren();
    if (message) {
      const note = document.createElement('p');
      note.className = 'auth-message';
      note.textContent = message;
      this.root.appendChild(note);
    }
    this.root.appendChild(
      renderTokenForm((managerId, token) => {
        if (!managerId || !token) return;
        this.session.managerId = managerId;
        this.session.token = token;
        this.client = new ApiClient(
          this.options.baseUrl ?? '',
          token,
          this.options.fetchFn,
        );
        void this.showQuestions();
      }),
    );
  }

  private handleAuthError(error: unknown): boolean {
    if (error instanceof ApiError && error.status === 401) {
      this.client = null;
      this.showTokenForm('Session expired; enter your token again.');
      return true;
    }
    return false;
  }

  async showQuestions(): Promise<void> {
    if (!this.client) return;
    try {
      const questions = await this.client.questions();
      this.root.replaceChildren();
      this.root.appendChild(
        renderQuestionPicker(questions, this.session.selectedQuestionId, (questionId) => {
          this.session.selectedQuestionId = questionId;
          void this.loadBatch();
        }),
      );
      this.root.appendChild(this.batchContainer());
    } catch (error) {
      if (!this.handleAuthError(error)) throw error;
    }
  }

  private batchContainer(): HTMLElement {
    let container = this.root.querySelector<HTMLElement>('#batch-container');
    if (!container) {
      container = document.createElement('div');
      container.id = 'batch-container';
    }
    return container;
  }

  async loadBatch(): Promise<void> {
    if (!this.client || !this.session.selectedQuestionId) return;
    try {
      const batch = await this.client.requestBatch(
        this.session.selectedQuestionId,
        this.session.managerId,
      );
      this.session.setBatch(batch);
      this.renderBatchView();
    } catch (error) {
      if (this.handleAuthError(error)) return;
      if (error instanceof ApiError && error.status === 403) {
        // unreachable through the picker (server only lists whitelisted
        // questions); surfaced anyway in case of drift
        const container = this.batchContainer();
        container.replaceChildren();
        const note = document.createElement('p');
        note.className = 'notice notice-error';
        note.textContent = 'That question is not available for review.';
        container.appendChild(note);
        this.root.appendChild(container);
        return;
      }
      throw error;
    }
  }

  renderBatchView(): void {
    const container = this.batchContainer();
    container.replaceChildren();
    if (this.session.batch) {
      container.appendChild(
        renderBatch(
          this.session.batch,
          (callId) => this.session.draft(callId),
          (item) => void this.openCall(item),
        ),
      );
    }
    if (!container.parentElement) this.root.appendChild(container);
  }

  async openCall(item: BatchItem): Promise<void> {
    if (!this.client || !this.session.batch) return;
    let call;
    try {
      call = await this.client.call(item.call_id);
    } catch (error) {
      if (!this.handleAuthError(error)) throw error;
      return;
    }
    const detail = document.createElement('div');
    detail.id = 'call-detail';

    const draft = this.session.draft(item.call_id);
    const form = renderDecisionForm(
      item.call_id,
      draft,
      (mutate) => {
        mutate(draft);
        form.refresh();
      },
      () => void this.submitReview(item.call_id, form.refresh),
    );
    const transcript = renderTranscript(call, () => {
      this.session.markTranscriptRead(item.call_id);
      form.refresh();
      this.renderBatchView();
    });
    detail.append(transcript.element, form.element);

    const existing = this.root.querySelector('#call-detail');
    if (existing) existing.replaceWith(detail);
    else this.root.appendChild(detail);
  }

  async submitReview(callId: string, refresh: () => void): Promise<void> {
    if (!this.client || !this.session.batch?.batch_id) return;
    const draft = this.session.draft(callId);
    if (!this.session.canSubmit(callId) || !draft.decision) {
      refresh();
      return;
    }
    const rubric = draft.rubricScore.trim();
    try {
      await this.client.submitReview({
        batch_id: this.session.batch.batch_id,
        call_id: callId,
        manager_id: this.session.managerId,
        decision: draft.decision,
        rubric_score: rubric ? Number(rubric) : undefined,
        comment: draft.comment.trim() || undefined,
      });
      draft.submitted = true;
      draft.error = null;
    } catch (error) {
      if (this.handleAuthError(error)) return;
      if (error instanceof ApiError && error.status === 409) {
        draft.duplicate = true;
        draft.submitted = true;
      } else if (error instanceof ApiError) {
        draft.error = error.message;
      } else {
        throw error;
      }
    }
    refresh();
    this.renderBatchView();
  }
}

export function mountConsole(root: HTMLElement, options: ConsoleOptions = {}): ConsoleApp {
  const app = new ConsoleApp(root, options);
  app.start();
  return app;
}

declare global {
  interface Window {
    __coachkitConsole?: ConsoleApp;
  }
}

if (typeof document !== 'undefined' && document.getElementById('app')) {
  window.__coachkitConsole = mountConsole(document.getElementById('app')!);
}
