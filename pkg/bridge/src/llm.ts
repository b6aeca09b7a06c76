/**
 * Model clients. The judge only needs text completion; requests carry the
 * coalition being evaluated as structured metadata so that the mock client
 * can answer deterministically without parsing prompts.
 */

export interface CompletionRequest {
  prompt: string;
  temperature: number;
  meta?: {
    coalition?: number[];
    kind?: string;
    u?: number[];
    eps?: number;
    k?: number;
    response?: string;
  };
}

export interface LlmClient {
  complete(request: CompletionRequest): Promise<string>;
}

export interface MockGame {
  n: number;
  mwcs: number[][];
  question?: string;
  answer?: string;
  documents?: string[];
  labels?: string[];
}

function covers(coalition: number[], mwc: number[]): boolean {
  const s = new Set(coalition);
  return mwc.every((i) => s.has(i));
}

/**
 * Deterministic stand-in for the model: answers correctly exactly when the
 * provided documents contain a sufficient combination, proposes the
 * sufficient combinations themselves, and allocates uniformly over their
 * members. Used for CI and protocol-conformance runs.
 */
export class MockLlmClient implements LlmClient {
  constructor(private readonly game: MockGame) {}

  async complete(request: CompletionRequest): Promise<string> {
    const meta = request.meta ?? {};
    const answer = this.game.answer ?? "42";
    if (meta.kind === "answer") {
      const coalition = meta.coalition ?? [];
      if (this.game.mwcs.some((m) => covers(coalition, m))) {
        return `The answer is ${answer}.`;
      }
      return "I cannot determine the answer from these documents.";
    }
    if (meta.kind === "grade") {
      return (meta.response ?? "").includes(answer) ? "CORRECT" : "INCORRECT";
    }
    if (meta.kind === "propose_violated") {
      const u = meta.u ?? [];
      const eps = meta.eps ?? 0;
      const violated = this.game.mwcs.filter(
        (m) => m.reduce((acc, i) => acc + (u[i] ?? 0), 0) + eps < 1.0 - 1e-9,
      );
      return JSON.stringify(violated.slice(0, meta.k ?? violated.length));
    }
    if (meta.kind === "propose_seeds") {
      return JSON.stringify(this.game.mwcs.slice(0, meta.k ?? this.game.mwcs.length));
    }
    if (meta.kind === "propose_allocation") {
      const members = new Set(this.game.mwcs.flat());
      const u = Array.from({ length: this.game.n }, (_, i) =>
        members.has(i) ? 1.0 / members.size : 0.0,
      );
      return JSON.stringify(u);
    }
    return "";
  }
}

export interface HttpClientConfig {
  url: string;
  model: string;
  apiKey?: string;
  maxRetries: number;
  retryBaseMs: number;
}

/**
 * Minimal JSON-over-HTTP completion client with exponential-backoff
 * retries. The endpoint is expected to accept {model, prompt, temperature}
 * and answer {text: string}.
 */
export class HttpLlmClient implements LlmClient {
  constructor(private readonly config: HttpClientConfig) {}

  async complete(request: CompletionRequest): Promise<string> {
    let lastError: unknown = null;
    for (let attempt = 0; attempt <= this.config.maxRetries; attempt++) {
      if (attempt > 0) {
        await new Promise((resolve) =>
          setTimeout(resolve, this.config.retryBaseMs * 2 ** (attempt - 1)),
        );
      }
      try {
        const headers: Record<string, string> = { "content-type": "application/json" };
        if (this.config.apiKey) {
          headers.authorization = `Bearer ${this.config.apiKey}`;
        }
        const reply = await fetch(this.config.url, {
          method: "POST",
          headers,
          body: JSON.stringify({
            model: this.config.model,
            prompt: request.prompt,
            temperature: request.temperature,
          }),
        });
        if (!reply.ok) {
          throw new Error(`upstream status ${reply.status}`);
        }
        const payload = (await reply.json()) as { text?: string };
        if (typeof payload.text !== "string") {
          throw new Error("upstream response lacks a text field");
        }
        return payload.text;
      } catch (err) {
        lastError = err;
      }
    }
    throw new Error(`model call failed after ${this.config.maxRetries + 1} attempts: ${lastError}`);
  }
}
