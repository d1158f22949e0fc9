import { spawnSync } from "child_process";
import * as fs from "fs";
import * as path from "path";
import { beforeAll, describe, expect, it } from "vitest";

import { BRIDGE_JS, makeTempDir, normalMatrix, requireBuild, writeRequest } from "./helpers";

function runBridge(...argv: string[]) {
  return spawnSync("node", [BRIDGE_JS, ...argv], { encoding: "utf8", timeout: 120_000 });
}

function readOutput(dir: string): number[][] {
  return fs
    .readFileSync(path.join(dir, "output.csv"), "utf8")
    .trim()
    .split("\n")
    .map((l) => l.split(",").map(Number));
}

const PARAMS = { n_neighbor: 10, min_dist: 0.25, d_prime: 2, seed: 7 };

beforeAll(requireBuild);

describe("request protocol", () => {
  it("embeds a valid request and exits 0", () => {
    const dir = makeTempDir("bridge-ok-");
    writeRequest(dir, normalMatrix(30, 5, 1), PARAMS);
    const proc = runBridge(dir);
    expect(proc.stderr).toBe("");
    expect(proc.status).toBe(0);
    const out = readOutput(dir);
    expect(out).toHaveLength(30);
    for (const row of out) {
      expect(row).toHaveLength(2);
      for (const v of row) expect(Number.isFinite(v)).toBe(true);
    }
  });

  it("respects d_prime", () => {
    const dir = makeTempDir("bridge-d3-");
    writeRequest(dir, normalMatrix(25, 4, 2), { ...PARAMS, d_prime: 3 });
    expect(runBridge(dir).status).toBe(0);
    expect(readOutput(dir)[0]).toHaveLength(3);
  });

  it("repeats a request byte for byte with the same seed", () => {
    const dir = makeTempDir("bridge-det-");
    writeRequest(dir, normalMatrix(30, 5, 3), PARAMS);
    expect(runBridge(dir).status).toBe(0);
    const first = fs.readFileSync(path.join(dir, "output.csv"), "utf8");
    expect(runBridge(dir).status).toBe(0);
    expect(fs.readFileSync(path.join(dir, "output.csv"), "utf8")).toBe(first);
  });

  it("moves with the seed", () => {
    const dir = makeTempDir("bridge-seed-");
    const rows = normalMatrix(30, 5, 4);
    writeRequest(dir, rows, PARAMS);
    expect(runBridge(dir).status).toBe(0);
    const first = fs.readFileSync(path.join(dir, "output.csv"), "utf8");
    writeRequest(dir, rows, { ...PARAMS, seed: 8 });
    expect(runBridge(dir).status).toBe(0);
    expect(fs.readFileSync(path.join(dir, "output.csv"), "utf8")).not.toBe(first);
  });
});

describe("request validation", () => {
  it("rejects n_neighbor at the row count with a one-line reason", () => {
    const dir = makeTempDir("bridge-nn-");
    writeRequest(dir, normalMatrix(10, 3, 5), PARAMS);
    const proc = runBridge(dir);
    expect(proc.status).toBe(2);
    expect(proc.stderr.trim().split("\n")).toHaveLength(1);
    expect(proc.stderr).toMatch(/n_neighbor/);
    expect(fs.existsSync(path.join(dir, "output.csv"))).toBe(false);
  });

  it.each([
    ["n_neighbor below 2", { ...PARAMS, n_neighbor: 1 }, /between 2 and 100/],
    ["n_neighbor above 100", { ...PARAMS, n_neighbor: 101 }, /between 2 and 100/],
    ["fractional n_neighbor", { ...PARAMS, n_neighbor: 9.5 }, /integer/],
    ["min_dist above 1", { ...PARAMS, min_dist: 1.5 }, /\[0, 1\]/],
    ["negative min_dist", { ...PARAMS, min_dist: -0.5 }, /\[0, 1\]/],
    ["zero d_prime", { ...PARAMS, d_prime: 0 }, /d_prime/],
  ] as const)("rejects %s", (_label, params, message) => {
    const dir = makeTempDir("bridge-bad-");
    writeRequest(dir, normalMatrix(30, 5, 6), params as Record<string, unknown>);
    const proc = runBridge(dir);
    expect(proc.status).toBe(2);
    expect(proc.stderr.trim().split("\n")).toHaveLength(1);
    expect(proc.stderr).toMatch(message);
  });

  it("rejects a missing input.csv", () => {
    const dir = makeTempDir("bridge-noin-");
    fs.writeFileSync(path.join(dir, "params.json"), JSON.stringify(PARAMS));
    const proc = runBridge(dir);
    expect(proc.status).toBe(2);
    expect(proc.stderr).toMatch(/input\.csv/);
  });

  it("rejects a missing params.json", () => {
    const dir = makeTempDir("bridge-nopar-");
    writeRequest(dir, normalMatrix(10, 3, 7), PARAMS);
    fs.rmSync(path.join(dir, "params.json"));
    const proc = runBridge(dir);
    expect(proc.status).toBe(2);
    expect(proc.stderr).toMatch(/params\.json/);
  });

  it("rejects a nonexistent directory and bad usage", () => {
    const missing = runBridge(path.join(makeTempDir("bridge-gone-"), "nope"));
    expect(missing.status).toBe(2);
    expect(missing.stderr).toMatch(/request directory/);
    const usage = runBridge();
    expect(usage.status).toBe(2);
    expect(usage.stderr).toMatch(/usage/);
  });
});
