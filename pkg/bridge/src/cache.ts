/**
 * Value cache: newline-delimited {"mask": hex, "value": number} records,
 * the same file format the solver engine reads and appends.
 */

import * as fs from "node:fs";

export class ValueCache {
  private readonly values = new Map<string, number>();

  constructor(private readonly path?: string) {
    if (path && fs.existsSync(path)) {
      const text = fs.readFileSync(path, "utf-8");
      for (const line of text.split("\n")) {
        if (!line.trim()) continue;
        const record = JSON.parse(line) as { mask: string; value: number };
        this.values.set(record.mask, record.value);
      }
    }
  }

  get(maskHex: string): number | undefined {
    return this.values.get(maskHex);
  }

  /** Store a value; idempotent (a repeat leaves one entry, no new line). */
  put(maskHex: string, value: number): void {
    if (this.values.has(maskHex)) return;
    this.values.set(maskHex, value);
    if (this.path) {
      fs.appendFileSync(this.path, JSON.stringify({ mask: maskHex, value }) + "\n");
    }
  }

  get size(): number {
    return this.values.size;
  }
}
