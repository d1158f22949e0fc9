import * as fs from "fs";
import * as os from "os";
import * as path from "path";
import { fileURLToPath } from "url";

import { mulberry32 } from "../src/bridge";

const HERE = path.dirname(fileURLToPath(import.meta.url));

/** Built bridge entry point; tests exercise the same artifact users run. */
export const BRIDGE_JS = path.join(HERE, "..", "dist", "main.js");

export function requireBuild(): void {
  if (!fs.existsSync(BRIDGE_JS)) {
    throw new Error(`bridge not built: run "npm run build" first (missing ${BRIDGE_JS})`);
  }
}

export function makeTempDir(prefix: string): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), prefix));
}

/** Write a request directory with the given matrix and params object. */
export function writeRequest(dir: string, rows: number[][], params: Record<string, unknown>): void {
  fs.writeFileSync(path.join(dir, "input.csv"), rows.map((r) => r.join(",")).join("\n") + "\n");
  fs.writeFileSync(path.join(dir, "params.json"), JSON.stringify(params, null, 2) + "\n");
}

/** Seeded standard normal via Box-Muller on top of mulberry32. */
export function gaussianSource(seed: number): () => number {
  const rand = mulberry32(seed);
  return () => Math.sqrt(-2 * Math.log(Math.max(rand(), 1e-12))) * Math.cos(2 * Math.PI * rand());
}

/** Deterministic test matrix: n x d of seeded standard normals. */
export function normalMatrix(n: number, d: number, seed: number): number[][] {
  const gauss = gaussianSource(seed);
  return Array.from({ length: n }, () => Array.from({ length: d }, gauss));
}

/** Five Gaussian blobs of 20 points in 10 dimensions, centers at 8 * e_k. */
export function fiveBlobs(seed = 42): number[][] {
  const gauss = gaussianSource(seed);
  const rows: number[][] = [];
  for (let k = 0; k < 5; k++) {
    for (let i = 0; i < 20; i++) {
      const row: number[] = [];
      for (let j = 0; j < 10; j++) row.push((j === k ? 8 : 0) + gauss());
      rows.push(row);
    }
  }
  return rows;
}

export function readCsvTable(file: string): { header: string[]; rows: string[][] } {
  const lines = fs
    .readFileSync(file, "utf8")
    .split(/\r?\n/)
    .filter((l) => l !== "" && !l.startsWith("#"));
  const [head, ...rest] = lines;
  return { header: head.split(","), rows: rest.map((l) => l.split(",")) };
}
