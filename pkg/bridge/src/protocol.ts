/**
 * Wire protocol records: newline-delimited JSON over stdin/stdout.
 * Every request carries a monotone integer id; the response echoes it.
 */

export type Request =
  | { id: number; type: "hello"; n: number; labels?: string[]; question_context?: string }
  | { id: number; type: "value"; coalition: number[] }
  | { id: number; type: "propose_violated"; u: number[]; eps: number; k: number }
  | { id: number; type: "propose_seeds"; k: number }
  | { id: number; type: "propose_allocation" }
  | { id: number; type: "shutdown" };

export type Response =
  | { id: number; type: "hello"; name: string; version: string }
  | { id: number; value: number }
  | { id: number; coalitions: number[][] }
  | { id: number; u: number[] }
  | { id: number; error: string };

export class ProtocolError extends Error {}

const REQUEST_TYPES = new Set([
  "hello",
  "value",
  "propose_violated",
  "propose_seeds",
  "propose_allocation",
  "shutdown",
]);

export function parseRequest(line: string): Request {
  let raw: unknown;
  try {
    raw = JSON.parse(line);
  } catch (err) {
    throw new ProtocolError(`request is not valid JSON: ${line}`);
  }
  if (typeof raw !== "object" || raw === null) {
    throw new ProtocolError(`request is not an object: ${line}`);
  }
  const record = raw as Record<string, unknown>;
  if (typeof record.id !== "number" || !Number.isInteger(record.id)) {
    throw new ProtocolError(`request lacks an integer id: ${line}`);
  }
  if (typeof record.type !== "string" || !REQUEST_TYPES.has(record.type)) {
    throw new ProtocolError(`unknown request type: ${String(record.type)}`);
  }
  if (record.type === "value" && !Array.isArray(record.coalition)) {
    throw new ProtocolError("value request lacks a coalition array");
  }
  if (record.type === "propose_violated") {
    if (!Array.isArray(record.u) || typeof record.eps !== "number" || typeof record.k !== "number") {
      throw new ProtocolError("propose_violated request lacks u/eps/k");
    }
  }
  if (record.type === "propose_seeds" && typeof record.k !== "number") {
    throw new ProtocolError("propose_seeds request lacks k");
  }
  return record as unknown as Request;
}

export function serializeResponse(response: Response): string {
  return JSON.stringify(response);
}

/** Bitmask of a coalition given as player indices. */
export function coalitionMask(indices: number[], n: number): bigint {
  let mask = 0n;
  for (const i of indices) {
    if (!Number.isInteger(i) || i < 0 || i >= n) {
      throw new ProtocolError(`player index ${i} outside [0, ${n})`);
    }
    mask |= 1n << BigInt(i);
  }
  return mask;
}

export function maskHex(mask: bigint): string {
  return mask.toString(16);
}
