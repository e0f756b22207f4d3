/**
 * Contract test against a stub server: the console renders label-free
 * batches, gates the decision form on reading the transcript to the end,
 * and surfaces duplicate-submission conflicts.
 */

import { beforeEach, describe, expect, it } from 'vitest';

import { sanitize } from '../src/api';
import { mountConsole, type ConsoleApp } from '../src/main';

const QUESTIONS = [
  { question_id: 'q-greeting', text: 'did the agent open the call with a proper greeting', question_type: 'Greeting' },
  { question_id: 'q-closing', text: 'did the agent deliver a proper closing before ending the call', question_type: 'Closing' },
];

const BATCH = {
  batch_id: 'batch-1',
  question_id: 'q-greeting',
  created_at: '2025-06-01T12:00:00Z',
  items: Array.from({ length: 6 }, (_, i) => ({
    call_id: `call-${i}`,
    agent_id: `agent-${i % 3}`,
    transcript_ref: `/api/calls/call-${i}`,
    // canary: a leaky server field the client must never render
    model_score: 0.91 + i / 100,
  })),
};

const CALL = {
  call_id: 'call-0',
  agent_id: 'agent-0',
  timestamp: '2025-05-30T10:00:00Z',
  utterances: [
    { speaker: 'agent', text: 'hello thanks for holding' },
    { speaker: 'customer', text: 'hi there' },
    { speaker: 'agent', text: 'let me take a look at that for you' },
  ],
};

interface StubState {
  reviewCount: number;
  requests: { method: string; path: string; body?: unknown }[];
}

function stubFetch(state: StubState) {
  return async (input: string, init?: RequestInit): Promise<Response> => {
    const method = init?.method ?? 'GET';
    const body = init?.body ? JSON.parse(init.body as string) : undefined;
    state.requests.push({ method, path: input, body });
    const json = (status: number, doc: unknown) =>
      new Response(JSON.stringify(doc), { status, headers: { 'Content-Type': 'application/json' } });

    if (input.endsWith('/api/questions')) return json(200, QUESTIONS);
    if (input.endsWith('/api/recommendations')) return json(200, BATCH);
    if (input.includes('/api/calls/')) return json(200, CALL);
    if (input.endsWith('/api/reviews')) {
      state.reviewCount += 1;
      if (state.reviewCount > 1) {
        return json(409, { code: 'duplicate_decision', message: 'already decided' });
      }
      return json(201, { status: 'recorded' });
    }
    return json(404, { code: 'not_found', message: input });
  };
}

async function flush(): Promise<void> {
  await Promise.resolve();
  await new Promise((resolve) => setTimeout(resolve, 0));
}

function signIn(root: HTMLElement): void {
  (root.querySelector('#manager-id') as HTMLInputElement).value = 'm-1';
  (root.querySelector('#token') as HTMLInputElement).value = 'tok';
  (root.querySelector('.token-form button') as HTMLButtonElement).click();
}

async function openBatch(root: HTMLElement, app: ConsoleApp): Promise<void> {
  signIn(root);
  await flush();
  const select = root.querySelector('#question-select') as HTMLSelectElement;
  select.value = 'q-greeting';
  select.dispatchEvent(new Event('change'));
  await flush();
}

function setScrollMetrics(el: HTMLElement, scrollTop: number, client: number, total: number): void {
  Object.defineProperty(el, 'scrollTop', { value: scrollTop, configurable: true, writable: true });
  Object.defineProperty(el, 'clientHeight', { value: client, configurable: true });
  Object.defineProperty(el, 'scrollHeight', { value: total, configurable: true });
}

describe('review console against a stub server', () => {
  let root: HTMLElement;
  let app: ConsoleApp;
  let state: StubState;

  beforeEach(async () => {
    document.body.innerHTML = '<main id="root"></main>';
    root = document.getElementById('root')!;
    state = { reviewCount: 0, requests: [] };
    app = mountConsole(root, { baseUrl: 'http://stub', fetchFn: stubFetch(state) });
  });

  it('renders a 6-item batch with zero label-derived fields', async () => {
    await openBatch(root, app);
    const rows = root.querySelectorAll('.batch-item');
    expect(rows.length).toBe(6);
    // the canary value and key injected by the stub never reach the DOM
    expect(document.body.innerHTML).not.toContain('model_score');
    expect(document.body.innerHTML).not.toContain('0.91');
    // nor the client state
    const stateJson = JSON.stringify(app.session.batch).toLowerCase();
    for (const fragment of ['"score', '"label', '"prob', 'coachable_p']) {
      expect(stateJson).not.toContain(fragment);
    }
  });

  it('sanitize strips score/label/probability keys recursively', () => {
    const cleaned = sanitize({
      ok: 1,
      label: 'x',
      nested: [{ probability: 0.4, keep: true, scores: [1] }],
    } as Record<string, unknown>);
    expect(cleaned).toEqual({ ok: 1, nested: [{ keep: true }] });
  });

  it('disables the decision form until the transcript is scrolled to the end', async () => {
    await openBatch(root, app);
    (root.querySelector('.batch-item .open-call') as HTMLButtonElement).click();
    await flush();

    const scroller = root.querySelector('#transcript-scroll') as HTMLElement;
    // long transcript: 120px visible of 400px total, still at the top
    setScrollMetrics(scroller, 0, 120, 400);
    scroller.dispatchEvent(new Event('scroll'));
    const submit = () => root.querySelector('.submit-review') as HTMLButtonElement;
    const positive = () => root.querySelector('.choice-positive') as HTMLButtonElement;
    expect(positive().disabled).toBe(true);
    expect(submit().disabled).toBe(true);

    // scroll to the end -> choices unlock; submit still needs a decision
    setScrollMetrics(scroller, 280, 120, 400);
    scroller.dispatchEvent(new Event('scroll'));
    expect(positive().disabled).toBe(false);
    expect(submit().disabled).toBe(true);
    positive().click();
    expect(submit().disabled).toBe(false);
  });

  it('submits a decision and surfaces 409 on duplicate submission', async () => {
    await openBatch(root, app);
    (root.querySelector('.batch-item .open-call') as HTMLButtonElement).click();
    await flush();
    const scroller = root.querySelector('#transcript-scroll') as HTMLElement;
    setScrollMetrics(scroller, 300, 120, 400);
    scroller.dispatchEvent(new Event('scroll'));

    (root.querySelector('.choice-positive') as HTMLButtonElement).click();
    (root.querySelector('.submit-review') as HTMLButtonElement).click();
    await flush();
    expect(root.textContent).toContain('Decision recorded.');
    const review = state.requests.find((r) => r.path.endsWith('/api/reviews'));
    expect(review?.body).toMatchObject({
      batch_id: 'batch-1',
      call_id: 'call-0',
      manager_id: 'm-1',
      decision: 'positive',
    });

    // drive a second submission through a fresh draft to hit the 409 path
    app.session.draft('call-0').submitted = false;
    (root.querySelector('.submit-review') as HTMLButtonElement).disabled = false;
    (root.querySelector('.submit-review') as HTMLButtonElement).click();
    await flush();
    expect(root.textContent).toContain('already recorded');
  });

  it('shows the explanatory empty state when nothing is eligible', async () => {
    state.requests = [];
    const emptyFetch = async (input: string, init?: RequestInit): Promise<Response> => {
      if (input.endsWith('/api/recommendations')) {
        return new Response(
          JSON.stringify({ batch_id: null, question_id: 'q-greeting', created_at: null, items: [] }),
          { status: 200 },
        );
      }
      return stubFetch(state)(input, init);
    };
    document.body.innerHTML = '<main id="root2"></main>';
    const root2 = document.getElementById('root2')!;
    const app2 = mountConsole(root2, { baseUrl: 'http://stub', fetchFn: emptyFetch });
    await openBatch(root2, app2);
    expect(root2.querySelector('.empty-state')).not.toBeNull();
    expect(root2.textContent).toContain('No calls available');
  });

  it('returns to token entry when the token expires', async () => {
    let authorized = true;
    const flakyFetch = async (input: string, init?: RequestInit): Promise<Response> => {
      if (!authorized) {
        return new Response(JSON.stringify({ code: 'unauthenticated', message: 'bad token' }), {
          status: 401,
        });
      }
      return stubFetch(state)(input, init);
    };
    document.body.innerHTML = '<main id="root3"></main>';
    const root3 = document.getElementById('root3')!;
    const app3 = mountConsole(root3, { baseUrl: 'http://stub', fetchFn: flakyFetch });
    signIn(root3);
    await flush();
    authorized = false;
    const select = root3.querySelector('#question-select') as HTMLSelectElement;
    select.value = 'q-greeting';
    select.dispatchEvent(new Event('change'));
    await flush();
    expect(root3.querySelector('.token-form')).not.toBeNull();
    expect(root3.textContent).toContain('Session expired');
  });
});
