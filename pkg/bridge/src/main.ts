/**
 * Entry point. Mock mode (for CI and protocol-conformance runs):
 *
 *   node dist/main.js --mock-game game.json [--cache values.jsonl]
 *
 * Live mode:
 *
 *   node dist/main.js --instance game.json --api-url URL --model ID \
 *       [--api-key-env VAR] [--cache values.jsonl] [--temperature T]
 *
 * The game/instance file supplies {n, question, answer, documents, mwcs?}.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { InstanceContext, JudgeConfig } from "./judge";
import { HttpLlmClient, LlmClient, MockGame, MockLlmClient } from "./llm";
import { BridgeServer } from "./server";

interface Args {
  mockGame?: string;
  instance?: string;
  cache?: string;
  apiUrl?: string;
  model: string;
  apiKeyEnv?: string;
  temperature: number;
  maxRetries: number;
  promptDir: string;
}

function parseArgs(argv: string[]): Args {
  const args: Args = {
    model: "judge-default",
    temperature: 0.0,
    maxRetries: 2,
    promptDir: path.join(__dirname, "..", "prompts"),
  };
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    const next = () => {
      i += 1;
      if (i >= argv.length) throw new Error(`missing value for ${flag}`);
      return argv[i];
    };
    switch (flag) {
      case "--mock-game":
        args.mockGame = next();
        break;
      case "--instance":
        args.instance = next();
        break;
      case "--cache":
        args.cache = next();
        break;
      case "--api-url":
        args.apiUrl = next();
        break;
      case "--model":
        args.model = next();
        break;
      case "--api-key-env":
        args.apiKeyEnv = next();
        break;
      case "--temperature":
        args.temperature = Number(next());
        break;
      case "--max-retries":
        args.maxRetries = Number(next());
        break;
      case "--prompt-dir":
        args.promptDir = next();
        break;
      default:
        throw new Error(`unknown flag ${flag}`);
    }
  }
  return args;
}

export function main(): void {
  const args = parseArgs(process.argv.slice(2));
  const gamePath = args.mockGame ?? args.instance;
  if (!gamePath) {
    process.stderr.write("one of --mock-game or --instance is required\n");
    process.exit(2);
  }
  const game = JSON.parse(fs.readFileSync(gamePath, "utf-8")) as MockGame & {
    question?: string;
    answer?: string;
    documents?: string[];
  };
  const context: InstanceContext = {
    n: game.n,
    question: game.question ?? "(no question provided)",
    answer: game.answer ?? "42",
    documents: game.documents ?? Array.from({ length: game.n }, (_, i) => `document ${i}`),
    labels: game.labels,
  };
  let client: LlmClient;
  if (args.mockGame) {
    client = new MockLlmClient({ ...game, mwcs: game.mwcs ?? [] });
  } else {
    if (!args.apiUrl) {
      process.stderr.write("--api-url is required outside mock mode\n");
      process.exit(2);
    }
    client = new HttpLlmClient({
      url: args.apiUrl,
      model: args.model,
      apiKey: args.apiKeyEnv ? process.env[args.apiKeyEnv] : undefined,
      maxRetries: args.maxRetries,
      retryBaseMs: 250,
    });
  }
  const judgeConfig: JudgeConfig = {
    model: args.model,
    temperature: args.temperature,
    maxRetries: args.maxRetries,
    promptDir: args.promptDir,
    cachePath: args.cache,
  };
  const server = new BridgeServer({ judgeConfig, client, context });
  server
    .serve(process.stdin, process.stdout)
    .then(() => process.exit(0))
    .catch((err) => {
      process.stderr.write(String(err) + "\n");
      process.exit(1);
    });
}

if (require.main === module) {
  main();
}
