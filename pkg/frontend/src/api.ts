/**
 * Typed client for the kgstory gateway HTTP API.
 *
 * Every mutation round-trips through the gateway; the UI never invents
 * state. Non-2xx responses become GatewayError with the server's detail
 * and a retryable flag for 502s.
 */

export type Phase = "awaiting_keywords" | "keywords_ready" | "knowledge_ready" | "complete";

export interface KnowledgeRef {
  triple_id: number;
  text: string;
}

export interface KnowledgeCandidate extends KnowledgeRef {
  score: number;
}

export interface StepView {
  sentence: string;
  provenance: "given" | "generated";
  keywords: string[];
  keyword_source: "predicted" | "extracted" | "human";
  knowledge: KnowledgeRef[];
}

export interface SessionView {
  session_id: string;
  phase: Phase;
  target_length: number;
  knowledge_per_step: number;
  steps: StepView[];
  pending_keywords: string[] | null;
  pending_knowledge: KnowledgeCandidate[] | null;
  pinned_ids: number[] | null;
}

export interface CreateResponse {
  session_id: string;
  predicted_keywords: string[];
}

export interface KeywordsResponse {
  keywords: string[];
  candidates: KnowledgeCandidate[];
}

export interface StepResponse {
  step: StepView;
  complete: boolean;
  predicted_keywords?: string[];
}

export interface SessionConfig {
  target_length?: number;
  knowledge_per_step?: number;
  top_k?: number;
  temperature?: number;
  mode?: "dynamic" | "static";
  seed?: number;
}

export class GatewayError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`gateway ${status}: ${detail}`);
  }

  get retryable(): boolean {
    return this.status === 502;
  }

  get conflict(): boolean {
    return this.status === 409;
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class GatewayClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => globalThis.fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const payload = (await response.json()) as { detail?: unknown };
        if (typeof payload.detail === "string") detail = payload.detail;
        else if (payload.detail !== undefined) detail = JSON.stringify(payload.detail);
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new GatewayError(response.status, detail);
    }
    if (response.status === 204) return undefined as T;
    return (await response.json()) as T;
  }

  createSession(firstSentence: string, config?: SessionConfig): Promise<CreateResponse> {
    return this.request("POST", "/sessions", { first_sentence: firstSentence, config });
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  overrideKeywords(sessionId: string, keywords: string[]): Promise<KeywordsResponse> {
    return this.request("POST", `/sessions/${sessionId}/keywords`, { keywords });
  }

  pinKnowledge(sessionId: string, tripleIds: number[]): Promise<{ pinned: number[] }> {
    return this.request("POST", `/sessions/${sessionId}/knowledge`, { triple_ids: tripleIds });
  }

  step(sessionId: string): Promise<StepResponse> {
    return this.request("POST", `/sessions/${sessionId}/step`, {});
  }

  deleteSession(sessionId: string): Promise<void> {
    return this.request("DELETE", `/sessions/${sessionId}`);
  }

  healthz(): Promise<{ status: string }> {
    return this.request("GET", "/healthz");
  }
}
