/**
 * Request-directory bridge around umap-js.
 *
 * The caller creates a directory holding
 *
 *   input.csv   - the data matrix, comma-separated, no header
 *   params.json - flat object: raw hyperparameters plus "d_prime" and "seed"
 *
 * and invokes this bridge with the directory as the only argument.  On
 * success the bridge writes output.csv (n rows x d_prime columns, no header)
 * into the same directory and exits 0.  Every validation failure exits
 * nonzero with a one-line stderr reason.
 *
 * Hyperparameters are always raw units, never normalized: n_neighbor is an
 * integer neighborhood size (2..100, and strictly less than the number of
 * rows), min_dist (alias min_distance) is a real in [0, 1].
 *
 * Determinism: the UMAP instance draws all randomness from a PRNG seeded
 * from params.json "seed", so repeating a request reproduces output.csv
 * byte for byte with this umap-js version.
 */

import * as fs from "fs";
import * as path from "path";
import { UMAP } from "umap-js";

export class RequestError extends Error {}

export interface BridgeParams {
  nNeighbor: number;
  minDist: number;
  dPrime: number;
  seedDigits: string;
}

/** Deterministic 32-bit fold (FNV-1a) of the seed's decimal digits.
 *  Working from the digits keeps seeds wider than 2^53 exact, which
 *  JSON.parse alone would not. */
export function foldSeed(digits: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < digits.length; i++) {
    h ^= digits.charCodeAt(i);
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

/** Small fast seeded PRNG (mulberry32), uniform on [0, 1). */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function parseMatrix(text: string, file: string): number[][] {
  const lines = text.trim().split(/\r?\n/);
  if (lines.length === 0 || lines[0] === "") {
    throw new RequestError(`${file} is empty`);
  }
  const rows = lines.map((line, i) => {
    const row = line.split(",").map(Number);
    if (row.some((v) => !Number.isFinite(v))) {
      throw new RequestError(`${file} row ${i} holds a non-numeric value`);
    }
    return row;
  });
  const width = rows[0].length;
  if (rows.some((r) => r.length !== width)) {
    throw new RequestError(`${file} rows have inconsistent widths`);
  }
  return rows;
}

function requireNumber(params: Record<string, unknown>, key: string): number {
  const v = params[key];
  if (typeof v !== "number" || !Number.isFinite(v)) {
    throw new RequestError(`params.json ${key} must be a finite number, got ${JSON.stringify(v)}`);
  }
  return v;
}

function requireInteger(params: Record<string, unknown>, key: string): number {
  const v = requireNumber(params, key);
  if (!Number.isInteger(v)) {
    throw new RequestError(`params.json ${key} must be an integer, got ${v}`);
  }
  return v;
}

export function parseParams(text: string, n: number): BridgeParams {
  let parsed: unknown;
  try {
    parsed = JSON.parse(text);
  } catch (err) {
    throw new RequestError(`params.json is not valid JSON: ${(err as Error).message}`);
  }
  if (typeof parsed !== "object" || parsed === null || Array.isArray(parsed)) {
    throw new RequestError("params.json must hold a flat object");
  }
  const params = parsed as Record<string, unknown>;

  const nNeighbor = requireInteger(params, "n_neighbor");
  if (nNeighbor < 2 || nNeighbor > 100) {
    throw new RequestError(`n_neighbor must be between 2 and 100, got ${nNeighbor}`);
  }
  if (nNeighbor >= n) {
    throw new RequestError(`n_neighbor must be below the ${n} input rows, got ${nNeighbor}`);
  }

  const distKey = "min_dist" in params ? "min_dist"
    : "min_distance" in params ? "min_distance" : "min_dist";
  const minDist = requireNumber(params, distKey);
  if (minDist < 0 || minDist > 1) {
    throw new RequestError(`${distKey} must be within [0, 1], got ${minDist}`);
  }

  const dPrime = requireInteger(params, "d_prime");
  if (dPrime < 1) {
    throw new RequestError(`d_prime must be >= 1, got ${dPrime}`);
  }
  requireInteger(params, "seed");
  const match = text.match(/"seed"\s*:\s*(-?\d+)/);
  const seedDigits = match ? match[1] : String(params["seed"]);

  return { nNeighbor, minDist, dPrime, seedDigits };
}

function readFileOr(dir: string, name: string): string {
  const file = path.join(dir, name);
  if (!fs.existsSync(file)) {
    throw new RequestError(`request directory has no ${name}`);
  }
  return fs.readFileSync(file, "utf8");
}

export function runRequest(dir: string): void {
  if (!fs.existsSync(dir) || !fs.statSync(dir).isDirectory()) {
    throw new RequestError(`not a request directory: ${dir}`);
  }
  const data = parseMatrix(readFileOr(dir, "input.csv"), "input.csv");
  const params = parseParams(readFileOr(dir, "params.json"), data.length);

  const umap = new UMAP({
    nNeighbors: params.nNeighbor,
    minDist: params.minDist,
    nComponents: params.dPrime,
    random: mulberry32(foldSeed(params.seedDigits)),
  });
  const embedding = umap.fit(data);

  if (embedding.length !== data.length ||
      embedding.some((row) => row.length !== params.dPrime || row.some((v) => !Number.isFinite(v)))) {
    throw new Error("umap produced a malformed or non-finite embedding");
  }
  const body = embedding.map((row) => row.map((v) => String(v)).join(",")).join("\n");
  fs.writeFileSync(path.join(dir, "output.csv"), body + "\n");
}

/** Full protocol run; returns the process exit code (0 ok, 2 bad request, 1 internal). */
export function bridgeMain(argv: string[]): number {
  if (argv.length !== 1) {
    process.stderr.write("usage: umap-bridge <request-dir>\n");
    return 2;
  }
  try {
    runRequest(argv[0]);
    return 0;
  } catch (err) {
    if (err instanceof RequestError) {
      process.stderr.write(`umap-bridge: ${err.message}\n`);
      return 2;
    }
    process.stderr.write(`umap-bridge: internal error: ${(err as Error).message}\n`);
    return 1;
  }
}
