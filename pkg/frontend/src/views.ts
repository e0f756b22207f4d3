/**
 * DOM rendering for the review console.
 *
 * Views are plain functions returning elements; the transcript panel owns
 * the scroll-to-end gate that keeps the decision form disabled until the
 * manager has actually read the call.
 */

import type { Batch, BatchItem, CallView, Question } from './api';
import type { Draft } from './session';

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderTokenForm(
  onSubmit: (managerId: string, token: string) => void,
): HTMLElement {
  const root = el('div', 'token-form');
  root.appendChild(el('h2', undefined, 'Sign in'));
  const managerInput = el('input');
  managerInput.placeholder = 'manager id';
  managerInput.id = 'manager-id';
  const tokenInput = el('input');
  tokenInput.placeholder = 'access token';
  tokenInput.type = 'password';
  tokenInput.id = 'token';
  const button = el('button', undefined, 'Start reviewing');
  button.addEventListener('click', () => onSubmit(managerInput.value.trim(), tokenInput.value.trim()));
  root.append(managerInput, tokenInput, button);
  return root;
}

export function renderQuestionPicker(
  questions: Question[],
  selected: string | null,
  onPick: (questionId: string) => void,
): HTMLElement {
  const root = el('div', 'question-picker');
  root.appendChild(el('h2', undefined, 'QA question'));
  const select = el('select');
  select.id = 'question-select';
  const placeholder = el('option', undefined, 'choose a question');
  placeholder.value = '';
  select.appendChild(placeholder);
  for (const q of questions) {
    const option = el('option', undefined, `[${q.question_type}] ${q.text}`);
    option.value = q.question_id;
    if (q.question_id === selected) option.selected = true;
    select.appendChild(option);
  }
  select.addEventListener('change', () => {
    if (select.value) onPick(select.value);
  });
  root.appendChild(select);
  return root;
}

export function renderBatch(
  batch: Batch,
  draftOf: (callId: string) => Draft,
  onOpen: (item: BatchItem) => void,
): HTMLElement {
  const root = el('div', 'batch');
  if (!batch.items.length) {
    const empty = el('div', 'empty-state');
    empty.appendChild(el('p', undefined, 'No calls available for review right now.'));
    empty.appendChild(
      el('p', 'hint', 'Every agent has reached the review limit for this period; try again later.'),
    );
    root.appendChild(empty);
    return root;
  }
  const list = el('ul', 'batch-items');
  for (const item of batch.items) {
    const row = el('li', 'batch-item');
    row.dataset.callId = item.call_id;
    row.appendChild(el('span', 'call-id', item.call_id));
    row.appendChild(el('span', 'agent-id', `agent ${item.agent_id}`));
    const draft = draftOf(item.call_id);
    const status = draft.submitted ? 'reviewed' : draft.transcriptRead ? 'read' : 'unread';
    row.appendChild(el('span', `status status-${status}`, status));
    const open = el('button', 'open-call', 'Open transcript');
    open.addEventListener('click', () => onOpen(item));
    row.appendChild(open);
    list.appendChild(row);
  }
  root.appendChild(list);
  return root;
}

export interface TranscriptPanel {
  element: HTMLElement;
  /** Re-evaluate the scroll gate; safe to call any time after mount. */
  checkGate: () => void;
}

export function renderTranscript(call: CallView, onReadToEnd: () => void): TranscriptPanel {
  const root = el('div', 'transcript-panel');
  const header = el('div', 'transcript-header');
  header.appendChild(el('span', 'call-id', call.call_id));
  header.appendChild(el('span', 'agent-id', `agent ${call.agent_id}`));
  if (call.timestamp) header.appendChild(el('span', 'timestamp', call.timestamp));
  root.appendChild(header);

  const scroller = el('div', 'transcript-scroll');
  scroller.id = 'transcript-scroll';
  for (const utterance of call.utterances) {
    const line = el('div', `utterance speaker-${utterance.speaker}`);
    line.appendChild(el('span', 'speaker', utterance.speaker));
    line.appendChild(el('span', 'text', utterance.text));
    scroller.appendChild(line);
  }
  root.appendChild(scroller);

  let done = false;
  const checkGate = () => {
    if (done) return;
    // scrollHeight 0 means the panel has no layout yet; nothing was read
    if (scroller.scrollHeight === 0) return;
    const atEnd = scroller.scrollTop + scroller.clientHeight >= scroller.scrollHeight - 2;
    if (atEnd) {
      done = true;
      onReadToEnd();
    }
  };
  scroller.addEventListener('scroll', checkGate);
  // short transcripts have nothing to scroll; evaluate once after layout
  queueMicrotask(checkGate);
  return { element: root, checkGate };
}

export interface DecisionFormHandle {
  element: HTMLElement;
  refresh: () => void;
}

export function renderDecisionForm(
  callId: string,
  draft: Draft,
  onChange: (mutate: (draft: Draft) => void) => void,
  onSubmit: () => void,
): DecisionFormHandle {
  const root = el('div', 'decision-form');
  root.dataset.callId = callId;
  root.appendChild(el('h3', undefined, 'Final decision'));

  const choices = el('div', 'choices');
  const positive = el('button', 'choice choice-positive', 'Positive call');
  const negative = el('button', 'choice choice-negative', 'Negative call');
  positive.addEventListener('click', () => onChange((d) => (d.decision = 'positive')));
  negative.addEventListener('click', () => onChange((d) => (d.decision = 'negative')));
  choices.append(positive, negative);
  root.appendChild(choices);

  const rubric = el('input', 'rubric-score');
  rubric.placeholder = 'rubric score 0-100 (optional)';
  rubric.value = draft.rubricScore;
  rubric.addEventListener('input', () => onChange((d) => (d.rubricScore = rubric.value)));
  root.appendChild(rubric);

  const comment = el('textarea', 'comment');
  comment.placeholder = 'comment (optional)';
  comment.value = draft.comment;
  comment.addEventListener('input', () => onChange((d) => (d.comment = comment.value)));
  root.appendChild(comment);

  const submit = el('button', 'submit-review', 'Submit decision');
  submit.addEventListener('click', onSubmit);
  root.appendChild(submit);

  const gateNote = el('p', 'gate-note', 'Read the transcript to the end to enable the form.');
  const notice = el('p', 'notice');
  notice.style.display = 'none';
  root.append(gateNote, notice);

  const refresh = () => {
    const enabled = draft.transcriptRead && !draft.submitted;
    for (const button of [positive, negative, submit]) {
      (button as HTMLButtonElement).disabled = !enabled || (button === submit && !draft.decision);
    }
    rubric.disabled = !enabled;
    comment.disabled = !enabled;
    positive.classList.toggle('selected', draft.decision === 'positive');
    negative.classList.toggle('selected', draft.decision === 'negative');
    gateNote.style.display = draft.transcriptRead ? 'none' : '';
    if (draft.duplicate) {
      notice.textContent = 'A decision for this call was already recorded.';
      notice.className = 'notice notice-duplicate';
      notice.style.display = '';
    } else if (draft.error) {
      notice.textContent = draft.error;
      notice.className = 'notice notice-error';
      notice.style.display = '';
    } else if (draft.submitted) {
      notice.textContent = 'Decision recorded.';
      notice.className = 'notice notice-ok';
      notice.style.display = '';
    } else {
      notice.style.display = 'none';
    }
  };
  refresh();
  return { element: root, refresh };
}
