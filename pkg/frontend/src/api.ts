/**
 * Typed client for the coachkit HTTP API.
 *
 * The server never sends coachability data to the console; as a second line
 * of defense every payload passes through a sanitizer that strips any key
 * smelling of scores, labels or probabilities before it can reach state or
 * the DOM.
 */

export interface Question {
  question_id: string;
  text: string;
  question_type: string;
}

export interface BatchItem {
  call_id: string;
  agent_id: string;
  transcript_ref: string;
}

export interface Batch {
  batch_id: string | null;
  question_id: string;
  created_at: string | null;
  items: BatchItem[];
}

export interface UtteranceView {
  speaker: string;
  text: string;
}

export interface CallView {
  call_id: string;
  agent_id: string;
  timestamp: string;
  utterances: UtteranceView[];
}

export interface ReviewSubmission {
  batch_id: string;
  call_id: string;
  manager_id: string;
  decision: 'positive' | 'negative';
  rubric_score?: number;
  comment?: string;
}

const FORBIDDEN_KEY_PARTS = ['score', 'label', 'prob', 'coachable'];

function isForbidden(key: string): boolean {
  const lowered = key.toLowerCase();
  // rubric_score is the manager's own input going upstream, never rendered
  // from server payloads; everything else matching the fragments is dropped.
  return FORBIDDEN_KEY_PARTS.some((part) => lowered.includes(part));
}

/** Deep-copy a payload, dropping any key that could carry model output. */
export function sanitize<T>(payload: T): T {
  if (Array.isArray(payload)) {
    return payload.map((entry) => sanitize(entry)) as unknown as T;
  }
  if (payload !== null && typeof payload === 'object') {
    const clean: Record<string, unknown> = {};
    for (const [key, value] of Object.entries(payload as Record<string, unknown>)) {
      if (isForbidden(key)) continue;
      clean[key] = sanitize(value);
    }
    return clean as T;
  }
  return payload;
}

export class ApiError extends Error {
  status: number;
  code: string;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.status = status;
    this.code = code;
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private baseUrl: string;
  private token: string;
  private fetchFn: FetchLike;

  constructor(baseUrl: string, token: string, fetchFn?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/$/, '');
    this.token = token;
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, {
      method,
      headers: {
        'Content-Type': 'application/json',
        Authorization: `Bearer ${this.token}`,
      },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    let doc: unknown = null;
    try {
      doc = await response.json();
    } catch {
      doc = null;
    }
    if (!response.ok) {
      const err = (doc ?? {}) as { code?: string; message?: string };
      throw new ApiError(
        response.status,
        err.code ?? `http_${response.status}`,
        err.message ?? response.statusText,
      );
    }
    return sanitize(doc) as T;
  }

  questions(): Promise<Question[]> {
    return this.request<Question[]>('GET', '/api/questions');
  }

  requestBatch(questionId: string, managerId: string): Promise<Batch> {
    return this.request<Batch>('POST', '/api/recommendations', {
      question_id: questionId,
      manager_id: managerId,
    });
  }

  call(callId: string): Promise<CallView> {
    return this.request<CallView>('GET', `/api/calls/${encodeURIComponent(callId)}`);
  }

  submitReview(review: ReviewSubmission): Promise<void> {
    return this.request<void>('POST', '/api/reviews', review);
  }
}
