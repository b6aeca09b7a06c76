/**
 * Two-call value estimation: ask the model to answer the question using only
 * the coalition's documents (ignoring world knowledge), then grade the
 * response for correctness with a second call. The grade is binary.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { ValueCache } from "./cache";
import { CompletionRequest, LlmClient } from "./llm";
import { coalitionMask, maskHex } from "./protocol";

export interface JudgeConfig {
  model: string;
  temperature: number;
  maxRetries: number;
  promptDir: string;
  cachePath?: string;
}

export interface InstanceContext {
  n: number;
  question: string;
  answer: string;
  documents: string[];
  labels?: string[];
}

function render(template: string, fields: Record<string, string>): string {
  return template.replace(/\{(\w+)\}/g, (match, key: string) => fields[key] ?? match);
}

export class Judge {
  private readonly cache: ValueCache;
  private readonly templates: { answer: string; grade: string };

  constructor(
    private readonly client: LlmClient,
    private readonly config: JudgeConfig,
    private readonly context: InstanceContext,
  ) {
    this.cache = new ValueCache(config.cachePath);
    this.templates = {
      answer: fs.readFileSync(path.join(config.promptDir, "answer.txt"), "utf-8"),
      grade: fs.readFileSync(path.join(config.promptDir, "grade.txt"), "utf-8"),
    };
  }

  get cacheSize(): number {
    return this.cache.size;
  }

  /** Binary coalition value via answer-then-grade; cached values skip both calls. */
  async value(coalition: number[]): Promise<number> {
    const hex = maskHex(coalitionMask(coalition, this.context.n));
    const cached = this.cache.get(hex);
    if (cached !== undefined) {
      return cached;
    }
    const docs = coalition
      .map((i) => `[doc ${i}] ${this.context.documents[i] ?? ""}`)
      .join("\n");
    const answerPrompt = render(this.templates.answer, {
      question: this.context.question,
      documents: docs || "(no documents)",
    });
    const answerRequest: CompletionRequest = {
      prompt: answerPrompt,
      temperature: this.config.temperature,
      meta: { kind: "answer", coalition },
    };
    const response = await this.client.complete(answerRequest);
    const gradePrompt = render(this.templates.grade, {
      question: this.context.question,
      reference: this.context.answer,
      response,
    });
    const grade = await this.client.complete({
      prompt: gradePrompt,
      temperature: 0.0,
      meta: { kind: "grade", coalition, response },
    });
    const value = /\bCORRECT\b/.test(grade) && !/\bINCORRECT\b/.test(grade) ? 1.0 : 0.0;
    this.cache.put(hex, value);
    return value;
  }
}
