/**
 * Wire protocol shared by every server in this package.
 *
 * Frames are newline-delimited JSON objects. The client sends one request
 * at a time with a strictly increasing integer id; the server echoes that
 * id on the answer. Failures are answered with `{"id": N, "error": "..."}`
 * and the connection stays open. Nothing but frames may be written to
 * stdout: all logging belongs on stderr.
 */

export const PROTOCOL_VERSION = 1;

export type Capability = "predict" | "gradient";

export interface InfoReply {
  id: number | null;
  protocol: number;
  task: string;
  input_len: number;
  n_outputs: number;
  capabilities: Capability[];
}

export interface ErrorReply {
  id: number | null;
  error: string;
}

/** One JSON frame per line, flushed immediately (pipes deadlock otherwise). */
export function writeFrame(out: NodeJS.WritableStream, frame: unknown): void {
  out.write(JSON.stringify(frame) + "\n");
}

export function errorFrame(id: number | null, message: string): ErrorReply {
  return { id, error: message };
}

/** Pull the id out of a half-trusted inbound frame, if it has a usable one. */
export function frameId(frame: unknown): number | null {
  if (typeof frame === "object" && frame !== null && "id" in frame) {
    const id = (frame as { id: unknown }).id;
    if (typeof id === "number" && Number.isInteger(id)) return id;
  }
  return null;
}

export function isFiniteMatrix(rows: number[][], width: number): boolean {
  return rows.every(
    (row) =>
      Array.isArray(row) &&
      row.length === width &&
      row.every((v) => typeof v === "number" && Number.isFinite(v)),
  );
}

/** Validate an inbound batch: array of numeric rows, each `width` long. */
export function parseBatch(value: unknown, width: number): number[][] {
  if (!Array.isArray(value)) {
    throw new Error("inputs must be an array of rows");
  }
  const rows = value as unknown[];
  for (const row of rows) {
    if (!Array.isArray(row) || row.length !== width) {
      throw new Error(`each input row must have length ${width}`);
    }
    for (const v of row as unknown[]) {
      if (typeof v !== "number" || !Number.isFinite(v)) {
        throw new Error("inputs must be finite numbers");
      }
    }
  }
  return rows as number[][];
}
