/**
 * Per-tab review session: the chosen question, the current batch and one
 * draft decision per batch item.  Drafts exist only for items of the
 * current batch; requesting a new batch clears them.
 */

import type { Batch } from './api';

export interface Draft {
  decision: 'positive' | 'negative' | null;
  rubricScore: string;
  comment: string;
  transcriptRead: boolean;
  submitted: boolean;
  duplicate: boolean;
  error: string | null;
}

function emptyDraft(): Draft {
  return {
    decision: null,
    rubricScore: '',
    comment: '',
    transcriptRead: false,
    submitted: false,
    duplicate: false,
    error: null,
  };
}

export class ConsoleSession {
  managerId = '';
  token = '';
  selectedQuestionId: string | null = null;
  batch: Batch | null = null;
  private drafts = new Map<string, Draft>();

  setBatch(batch: Batch | null): void {
    this.batch = batch;
    this.drafts.clear();
    if (batch) {
      for (const item of batch.items) {
        this.drafts.set(item.call_id, emptyDraft());
      }
    }
  }

  draft(callId: string): Draft {
    const existing = this.drafts.get(callId);
    if (!existing) {
      throw new Error(`no draft for call ${callId}: not part of the current batch`);
    }
    return existing;
  }

  hasDraft(callId: string): boolean {
    return this.drafts.has(callId);
  }

  markTranscriptRead(callId: string): void {
    this.draft(callId).transcriptRead = true;
  }

  canSubmit(callId: string): boolean {
    const draft = this.draft(callId);
    return draft.transcriptRead && draft.decision !== null && !draft.submitted;
  }
}
