/**
 * Protocol loop: read requests line by line, answer in order. A failed
 * request becomes an {id, error} record; the session itself never dies on a
 * single bad response.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import * as readline from "node:readline";

import { Judge, JudgeConfig, InstanceContext } from "./judge";
import { CompletionRequest, LlmClient } from "./llm";
import { parseRequest, Request, Response, serializeResponse } from "./protocol";

export interface ServerOptions {
  judgeConfig: JudgeConfig;
  client: LlmClient;
  context: InstanceContext;
  name?: string;
  version?: string;
}

function parseIndexLists(text: string, n: number, k: number): number[][] {
  // accept a JSON array of index arrays anywhere in the completion
  const start = text.indexOf("[");
  const end = text.lastIndexOf("]");
  if (start < 0 || end <= start) return [];
  let parsed: unknown;
  try {
    parsed = JSON.parse(text.slice(start, end + 1));
  } catch {
    return [];
  }
  if (!Array.isArray(parsed)) return [];
  const result: number[][] = [];
  for (const entry of parsed) {
    if (!Array.isArray(entry)) continue;
    if (!entry.every((i) => Number.isInteger(i) && i >= 0 && i < n)) continue;
    result.push(entry as number[]);
    if (result.length >= k) break;
  }
  return result;
}

function parseNumberList(text: string, n: number): number[] | null {
  const start = text.indexOf("[");
  const end = text.lastIndexOf("]");
  if (start < 0 || end <= start) return null;
  let parsed: unknown;
  try {
    parsed = JSON.parse(text.slice(start, end + 1));
  } catch {
    return null;
  }
  if (!Array.isArray(parsed) || parsed.length !== n) return null;
  if (!parsed.every((x) => typeof x === "number" && Number.isFinite(x))) return null;
  return parsed as number[];
}

export class BridgeServer {
  private judge: Judge;
  private n: number;

  constructor(private readonly options: ServerOptions) {
    this.n = options.context.n;
    this.judge = new Judge(options.client, options.judgeConfig, options.context);
  }

  private prompt(name: string, fields: Record<string, string>): string {
    const template = fs.readFileSync(
      path.join(this.options.judgeConfig.promptDir, name),
      "utf-8",
    );
    return template.replace(/\{(\w+)\}/g, (match, key: string) => fields[key] ?? match);
  }

  async handle(request: Request): Promise<Response> {
    switch (request.type) {
      case "hello":
        this.n = request.n;
        return {
          id: request.id,
          type: "hello",
          name: this.options.name ?? "leastcore-bridge",
          version: this.options.version ?? "0.1.0",
        };
      case "value": {
        const value = await this.judge.value(request.coalition);
        return { id: request.id, value };
      }
      case "propose_violated": {
        const text = await this.options.client.complete({
          prompt: this.prompt("propose-violated.txt", {
            question: this.options.context.question,
            u: JSON.stringify(request.u),
            eps: String(request.eps),
            k: String(request.k),
          }),
          temperature: this.options.judgeConfig.temperature,
          meta: { kind: "propose_violated", u: request.u, eps: request.eps, k: request.k },
        } as CompletionRequest);
        return { id: request.id, coalitions: parseIndexLists(text, this.n, request.k) };
      }
      case "propose_seeds": {
        const text = await this.options.client.complete({
          prompt: this.prompt("propose-seeds.txt", {
            question: this.options.context.question,
            k: String(request.k),
          }),
          temperature: this.options.judgeConfig.temperature,
          meta: { kind: "propose_seeds", k: request.k },
        });
        return { id: request.id, coalitions: parseIndexLists(text, this.n, request.k) };
      }
      case "propose_allocation": {
        const text = await this.options.client.complete({
          prompt: this.prompt("propose-allocation.txt", {
            question: this.options.context.question,
          }),
          temperature: this.options.judgeConfig.temperature,
          meta: { kind: "propose_allocation" },
        });
        const u = parseNumberList(text, this.n);
        if (u === null) {
          return { id: request.id, error: "model did not return a usable allocation" };
        }
        return { id: request.id, u };
      }
      case "shutdown":
        return { id: request.id, error: "unreachable" }; // handled by the loop
    }
  }

  /** Serve until shutdown or stdin EOF. */
  async serve(input: NodeJS.ReadableStream, output: NodeJS.WritableStream): Promise<void> {
    const lines = readline.createInterface({ input, crlfDelay: Infinity });
    for await (const line of lines) {
      if (!line.trim()) continue;
      let request: Request;
      try {
        request = parseRequest(line);
      } catch (err) {
        output.write(serializeResponse({ id: -1, error: String(err) }) + "\n");
        continue;
      }
      if (request.type === "shutdown") {
        break;
      }
      let response: Response;
      try {
        response = await this.handle(request);
      } catch (err) {
        response = { id: request.id, error: String(err) };
      }
      output.write(serializeResponse(response) + "\n");
    }
  }
}
