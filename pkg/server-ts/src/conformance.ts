/**
 * Protocol conformance suite.
 *
 * Drives a server launch command through handshake, empty batch, large
 * batch, id echo, error frame, and shutdown scenarios. Failures are report
 * content, never exceptions: each failed scenario carries the frame
 * transcript so the deviation can be read directly.
 *
 * Also a CLI:  node dist/conformance.js <server command...>
 */

import { ChildProcess, spawn } from "node:child_process";
import { pathToFileURL } from "node:url";
import readline from "node:readline";

export interface ScenarioResult {
  name: string;
  passed: boolean;
  detail: string;
  transcript: string[];
}

export interface ConformanceReport {
  command: string[];
  passed: boolean;
  scenarios: ScenarioResult[];
}

class Driver {
  proc: ChildProcess;
  transcript: string[] = [];
  private queue: string[] = [];
  private waiter: ((line: string | null) => void) | null = null;
  private eof = false;
  exitCode: number | null = null;
  readonly exited: Promise<number | null>;

  constructor(command: string[], readonly timeoutMs: number) {
    this.proc = spawn(command[0], command.slice(1), {
      stdio: ["pipe", "pipe", "inherit"],
    });
    const rl = readline.createInterface({ input: this.proc.stdout! });
    rl.on("line", (line) => {
      this.transcript.push(`<- ${line}`);
      if (this.waiter) {
        const w = this.waiter;
        this.waiter = null;
        w(line);
      } else {
        this.queue.push(line);
      }
    });
    rl.on("close", () => {
      this.eof = true;
      if (this.waiter) {
        const w = this.waiter;
        this.waiter = null;
        w(null);
      }
    });
    this.exited = new Promise((resolve) => {
      this.proc.on("exit", (code) => {
        this.exitCode = code;
        resolve(code);
      });
    });
  }

  sendRaw(line: string): void {
    this.transcript.push(`-> ${line}`);
    this.proc.stdin!.write(line + "\n");
  }

  send(frame: unknown): void {
    this.sendRaw(JSON.stringify(frame));
  }

  /** Next stdout line, or null on EOF, or a throw on timeout. */
  nextLine(): Promise<string | null> {
    if (this.queue.length) return Promise.resolve(this.queue.shift()!);
    if (this.eof) return Promise.resolve(null);
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => {
        this.waiter = null;
        reject(new Error(`no reply within ${this.timeoutMs}ms`));
      }, this.timeoutMs);
      this.waiter = (line) => {
        clearTimeout(timer);
        resolve(line);
      };
    });
  }

  async nextFrame(): Promise<Record<string, unknown>> {
    const line = await this.nextLine();
    if (line === null) throw new Error("server closed its output");
    return JSON.parse(line);
  }

  kill(): void {
    if (this.exitCode === null) this.proc.kill();
  }
}

type Check = (driver: Driver, state: { id: number; task: string;
  inputLen: number; nOutputs: number }) => Promise<string | null>;

const SCENARIOS: [string, Check][] = [
  [
    "handshake",
    async (d, s) => {
      d.send({ op: "info", id: s.id });
      const r = await d.nextFrame();
      if (r.id !== s.id) return `info reply id ${r.id} != ${s.id}`;
      if (r.protocol !== 1) return `protocol ${r.protocol} != 1`;
      if (!Number.isInteger(r.input_len) || (r.input_len as number) < 1)
        return `bad input_len ${r.input_len}`;
      if (!Number.isInteger(r.n_outputs) || (r.n_outputs as number) < 1)
        return `bad n_outputs ${r.n_outputs}`;
      const caps = r.capabilities;
      if (!Array.isArray(caps) || !caps.includes("predict"))
        return `capabilities ${JSON.stringify(caps)} lack predict`;
      if (!caps.every((c) => c === "predict" || c === "gradient"))
        return `unknown capability in ${JSON.stringify(caps)}`;
      s.task = String(r.task);
      s.inputLen = r.input_len as number;
      s.nOutputs = r.n_outputs as number;
      return null;
    },
  ],
  [
    "empty-batch",
    async (d, s) => {
      d.send({ op: "predict", id: s.id, inputs: [] });
      const r = await d.nextFrame();
      if (r.id !== s.id) return `reply id ${r.id} != ${s.id}`;
      if (!Array.isArray(r.outputs) || r.outputs.length !== 0)
        return `expected empty outputs, got ${JSON.stringify(r.outputs)}`;
      return null;
    },
  ],
  [
    "large-batch",
    async (d, s) => {
      const inputs = Array.from({ length: 256 }, () =>
        new Array(s.inputLen).fill(0),
      );
      d.send({ op: "predict", id: s.id, inputs });
      const r = await d.nextFrame();
      if (r.id !== s.id) return `reply id ${r.id} != ${s.id}`;
      const out = r.outputs;
      if (!Array.isArray(out) || out.length !== 256)
        return `expected 256 output rows, got ${Array.isArray(out) ? out.length : typeof out}`;
      for (const row of out as unknown[]) {
        if (!Array.isArray(row) || row.length !== s.nOutputs)
          return `output row of width ${Array.isArray(row) ? row.length : "?"}`;
        if (!(row as number[]).every((v) => Number.isFinite(v)))
          return "non-finite value in outputs";
        if (s.task === "classification") {
          const sum = (row as number[]).reduce((a, v) => a + v, 0);
          if (Math.abs(sum - 1) > 1e-6) return `probability row sums to ${sum}`;
        }
      }
      return null;
    },
  ],
  [
    "id-echo",
    async (d, s) => {
      s.id += 7; // ids only need to increase, not be consecutive
      d.send({ op: "predict", id: s.id, inputs: [new Array(s.inputLen).fill(0.5)] });
      const r = await d.nextFrame();
      if (r.id !== s.id) return `reply id ${r.id} != ${s.id}`;
      return null;
    },
  ],
  [
    "error-frame",
    async (d, s) => {
      d.sendRaw("!!! definitely not json !!!");
      const junk = await d.nextFrame();
      if (!("error" in junk))
        return `malformed line not answered with an error frame: ${JSON.stringify(junk)}`;
      d.send({ op: "frobnicate", id: s.id });
      const unknown = await d.nextFrame();
      if (unknown.id !== s.id || !("error" in unknown))
        return `unknown op not answered with an id-echoing error frame: ${JSON.stringify(unknown)}`;
      s.id += 1;
      d.send({ op: "info", id: s.id });
      const after = await d.nextFrame();
      if (after.id !== s.id || "error" in after)
        return "server did not recover after error frames";
      return null;
    },
  ],
  [
    "shutdown",
    async (d) => {
      d.send({ op: "shutdown" });
      const code = await Promise.race([
        d.exited,
        new Promise<string>((resolve) =>
          setTimeout(() => resolve("timeout"), d.timeoutMs),
        ),
      ]);
      if (code === "timeout") return "server still running after shutdown";
      if (code !== 0) return `exit code ${code} != 0`;
      return null;
    },
  ],
];

export async function conformanceSuite(
  command: string[],
  opts: { timeoutMs?: number } = {},
): Promise<ConformanceReport> {
  const timeoutMs = opts.timeoutMs ?? 5000;
  const driver = new Driver(command, timeoutMs);
  const state = { id: 1, task: "", inputLen: 1, nOutputs: 1 };
  const scenarios: ScenarioResult[] = [];
  let aborted: string | null = null;

  for (const [name, check] of SCENARIOS) {
    if (aborted) {
      scenarios.push({
        name,
        passed: false,
        detail: `not reached: ${aborted} failed`,
        transcript: [],
      });
      continue;
    }
    const mark = driver.transcript.length;
    let detail: string | null;
    try {
      detail = await check(driver, state);
    } catch (err) {
      detail = String(err);
    }
    state.id += 1;
    scenarios.push({
      name,
      passed: detail === null,
      detail: detail ?? "",
      transcript: driver.transcript.slice(mark),
    });
    if (detail !== null && name === "handshake") aborted = name;
  }

  driver.kill();
  await driver.exited;
  return {
    command,
    passed: scenarios.every((s) => s.passed),
    scenarios,
  };
}

export function formatReport(report: ConformanceReport): string {
  const lines: string[] = [];
  for (const s of report.scenarios) {
    lines.push(s.passed ? `PASS ${s.name}` : `FAIL ${s.name}: ${s.detail}`);
    if (!s.passed) {
      for (const t of s.transcript) lines.push(`     ${t}`);
    }
  }
  const n = report.scenarios.filter((s) => s.passed).length;
  lines.push(`${n}/${report.scenarios.length} scenarios passed`);
  return lines.join("\n");
}

const invokedDirectly =
  process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href;

if (invokedDirectly) {
  const command = process.argv.slice(2);
  if (!command.length) {
    console.error("usage: conformance <server command...>");
    process.exit(2);
  }
  conformanceSuite(command).then((report) => {
    console.log(formatReport(report));
    process.exit(report.passed ? 0 : 1);
  });
}
