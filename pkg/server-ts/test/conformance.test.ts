import path from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, test } from "vitest";

import { conformanceSuite, formatReport } from "../src/conformance.js";

const HERE = path.dirname(fileURLToPath(import.meta.url));
const ROOT = path.join(HERE, "..");
const FIXTURE = path.join(HERE, "fixtures", "model.json");
const SERVE_LINEAR = path.join(ROOT, "dist", "serve_linear.js");

describe("conformanceSuite", () => {
  test("the bundled linear demo passes every scenario", async () => {
    const report = await conformanceSuite(
      ["node", SERVE_LINEAR, FIXTURE],
      { timeoutMs: 5000 },
    );
    expect(report.passed).toBe(true);
    expect(report.scenarios.map((s) => s.name)).toEqual([
      "handshake",
      "empty-batch",
      "large-batch",
      "id-echo",
      "error-frame",
      "shutdown",
    ]);
    const text = formatReport(report);
    expect(text).toContain("PASS handshake");
    expect(text).toContain("6/6 scenarios passed");
  });

  test("a server that ignores inbound ids fails the id-echo scenario", async () => {
    // short timeout: this fixture also never answers junk or unknown ops,
    // so the error-frame scenario runs into its own waits
    const report = await conformanceSuite(
      ["node", path.join(HERE, "fixtures", "no_id.mjs")],
      { timeoutMs: 400 },
    );
    expect(report.passed).toBe(false);
    const byName = Object.fromEntries(
      report.scenarios.map((s) => [s.name, s]),
    );
    // in step while ids are consecutive, caught out by the id jump
    expect(byName["handshake"].passed).toBe(true);
    expect(byName["empty-batch"].passed).toBe(true);
    expect(byName["id-echo"].passed).toBe(false);
    expect(byName["id-echo"].transcript.length).toBeGreaterThan(0);
    expect(formatReport(report)).toMatch(/FAIL id-echo/);
  });

  test("a silent server fails within the configured timeout", async () => {
    const t0 = Date.now();
    const report = await conformanceSuite(
      ["node", path.join(HERE, "fixtures", "silent.mjs")],
      { timeoutMs: 500 },
    );
    const elapsed = Date.now() - t0;
    expect(report.passed).toBe(false);
    expect(report.scenarios[0].name).toBe("handshake");
    expect(report.scenarios[0].passed).toBe(false);
    expect(report.scenarios[0].detail).toMatch(/no reply within/);
    // handshake failure aborts the rest instead of stacking timeouts
    expect(report.scenarios.slice(1).every((s) => !s.passed)).toBe(true);
    expect(elapsed).toBeLessThan(5000);
  });
});
