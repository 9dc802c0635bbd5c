import { ChildProcess, spawn } from "node:child_process";
import path from "node:path";
import readline from "node:readline";
import { fileURLToPath } from "node:url";
import { afterEach, describe, expect, test } from "vitest";

import { loadLinearModel, predict } from "../src/linear.js";

const HERE = path.dirname(fileURLToPath(import.meta.url));
const ROOT = path.join(HERE, "..");
const FIXTURE = path.join(HERE, "fixtures", "model.json");
const SERVE_LINEAR = path.join(ROOT, "dist", "serve_linear.js");
const SERVE_CUSTOM = path.join(ROOT, "dist", "serve_custom.js");

/** Minimal request/reply client over a spawned server, capturing stdout. */
class Client {
  proc: ChildProcess;
  stdoutLines: string[] = [];
  private queue: string[] = [];
  private waiters: ((line: string) => void)[] = [];
  exited: Promise<number | null>;

  constructor(command: string[]) {
    this.proc = spawn(command[0], command.slice(1), {
      stdio: ["pipe", "pipe", "ignore"],
    });
    const rl = readline.createInterface({ input: this.proc.stdout! });
    rl.on("line", (line) => {
      this.stdoutLines.push(line);
      const w = this.waiters.shift();
      if (w) w(line);
      else this.queue.push(line);
    });
    this.exited = new Promise((resolve) =>
      this.proc.on("exit", (code) => resolve(code)),
    );
  }

  sendRaw(line: string): void {
    this.proc.stdin!.write(line + "\n");
  }

  async request(frame: unknown): Promise<any> {
    this.sendRaw(JSON.stringify(frame));
    return JSON.parse(await this.nextLine());
  }

  nextLine(): Promise<string> {
    if (this.queue.length) return Promise.resolve(this.queue.shift()!);
    return new Promise((resolve, reject) => {
      const t = setTimeout(() => reject(new Error("reply timeout")), 5000);
      this.waiters.push((line) => {
        clearTimeout(t);
        resolve(line);
      });
    });
  }

  kill(): void {
    this.proc.kill();
  }
}

let client: Client | null = null;

function start(command: string[]): Client {
  client = new Client(command);
  return client;
}

afterEach(() => {
  client?.kill();
  client = null;
});

describe("serve_linear", () => {
  test("info describes the model", async () => {
    const c = start(["node", SERVE_LINEAR, FIXTURE]);
    const info = await c.request({ op: "info", id: 1 });
    expect(info).toEqual({
      id: 1,
      protocol: 1,
      task: "classification",
      input_len: 8,
      n_outputs: 2,
      capabilities: ["predict", "gradient"],
    });
  });

  test("predict matches the closed form over the wire", async () => {
    const c = start(["node", SERVE_LINEAR, FIXTURE]);
    const m = loadLinearModel(FIXTURE);
    const batch = [
      [1, 0, 0, 0, 0, 0, 0, 0],
      [0.5, -0.5, 0.25, 2, -1, 0, 1, 0.125],
      new Array(8).fill(0),
    ];
    const r = await c.request({ op: "predict", id: 3, inputs: batch });
    const want = predict(m, batch);
    expect(r.id).toBe(3);
    for (let i = 0; i < batch.length; i++) {
      for (let j = 0; j < 2; j++) {
        expect(Math.abs(r.outputs[i][j] - want[i][j])).toBeLessThan(1e-9);
      }
    }
  });

  test("gradient returns the requested weight row", async () => {
    const c = start(["node", SERVE_LINEAR, FIXTURE]);
    const m = loadLinearModel(FIXTURE);
    for (const target of [0, 1]) {
      const r = await c.request({
        op: "gradient",
        id: 10 + target,
        inputs: [new Array(8).fill(0.3), new Array(8).fill(-2)],
        output_index: target,
      });
      expect(r.gradients).toEqual([m.W[target], m.W[target]]);
    }
  });

  test("malformed line gets an error frame and the loop keeps serving", async () => {
    const c = start(["node", SERVE_LINEAR, FIXTURE]);
    c.sendRaw("{broken json");
    const err = JSON.parse(await c.nextLine());
    expect(err.id).toBeNull();
    expect(err.error).toMatch(/malformed/);
    const info = await c.request({ op: "info", id: 2 });
    expect(info.protocol).toBe(1);
  });

  test("unknown ops and bad payloads are error frames, not crashes", async () => {
    const c = start(["node", SERVE_LINEAR, FIXTURE]);
    const unknown = await c.request({ op: "launch-missiles", id: 5 });
    expect(unknown).toEqual({ id: 5, error: expect.stringContaining("unknown op") });

    const badRow = await c.request({
      op: "predict",
      id: 6,
      inputs: [["a", "b", "c", "d", "e", "f", "g", "h"]],
    });
    expect(badRow.error).toMatch(/finite/);

    const shortRow = await c.request({ op: "predict", id: 7, inputs: [[1, 2]] });
    expect(shortRow.error).toMatch(/length 8/);

    const badIndex = await c.request({
      op: "gradient",
      id: 8,
      inputs: [new Array(8).fill(0)],
      output_index: 9,
    });
    expect(badIndex.error).toMatch(/range/);

    const after = await c.request({ op: "info", id: 9 });
    expect(after.protocol).toBe(1);
  });

  test("stdout carries only JSON frames", async () => {
    const c = start(["node", SERVE_LINEAR, FIXTURE]);
    await c.request({ op: "info", id: 1 });
    c.sendRaw("garbage");
    await c.nextLine();
    await c.request({ op: "predict", id: 2, inputs: [] });
    for (const line of c.stdoutLines) {
      expect(() => JSON.parse(line)).not.toThrow();
    }
  });

  test("shutdown exits 0", async () => {
    const c = start(["node", SERVE_LINEAR, FIXTURE]);
    await c.request({ op: "info", id: 1 });
    c.sendRaw(JSON.stringify({ op: "shutdown" }));
    expect(await c.exited).toBe(0);
  });

  test("missing model argument exits 2", async () => {
    const c = start(["node", SERVE_LINEAR]);
    expect(await c.exited).toBe(2);
  });

  test("unreadable model file exits nonzero", async () => {
    const c = start(["node", SERVE_LINEAR, "/nonexistent/model.json"]);
    expect(await c.exited).not.toBe(0);
  });
});

describe("serve_custom", () => {
  test("declares predict-only capabilities and serves probabilities", async () => {
    const c = start(["node", SERVE_CUSTOM]);
    const info = await c.request({ op: "info", id: 1 });
    expect(info.capabilities).toEqual(["predict"]);
    expect(info.input_len).toBe(30);
    const r = await c.request({
      op: "predict",
      id: 2,
      inputs: [new Array(30).fill(0.5)],
    });
    const sum = r.outputs[0].reduce((a: number, v: number) => a + v, 0);
    expect(Math.abs(sum - 1)).toBeLessThan(1e-12);
  });
});
