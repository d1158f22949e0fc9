/**
 * End-to-end acceptance: the tuning CLI drives the bridge purely through its
 * command-line and file interfaces (config TOML in, manifest/CSV out), with
 * the bridge speaking the request-directory protocol in between.
 *
 * One grid run over (n_neighbor, min_distance) on five well-separated
 * Gaussian blobs backs both checks: the 1-AUC heatmap must bottom out at a
 * small normalized n_neighbor, and the surrogate refitted from the same
 * manifest must rank n_neighbor as the more sensitive hyperparameter.
 */

import { spawnSync } from "child_process";
import * as fs from "fs";
import * as path from "path";
import { beforeAll, describe, expect, it } from "vitest";

import { BRIDGE_JS, fiveBlobs, makeTempDir, readCsvTable, requireBuild } from "./helpers";

const GRID_TOML = (dataCsv: string) => `
[dataset]
kind = "csv"
path = "${dataCsv}"

[tune]
n_repeat = 2
master_seed = 0

[tune.metric]
name = "auc"

[tune.engine]
kind = "external"
name = "umap"
command = ["node", "${BRIDGE_JS}"]
timeout = 120.0

[[tune.space]]
name = "n_neighbor"
kind = "count"
min_count = 2
max_count = 100

[[tune.space]]
name = "min_distance"
kind = "discrete"
values = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]

[grid]
points = 10
`;

function drtune(...argv: string[]) {
  return spawnSync("drtune", argv, { encoding: "utf8", timeout: 580_000 });
}

function report(criterion: string, ok: boolean, detail: string): void {
  process.stdout.write(`[${criterion}] ${ok ? "PASS" : "FAIL"} (${detail})\n`);
}

let workdir: string;
let configFile: string;
let gridDir: string;

beforeAll(() => {
  requireBuild();
  const probe = spawnSync("drtune", ["--help"], { encoding: "utf8" });
  if (probe.error || probe.status !== 0) {
    throw new Error('the "drtune" CLI must be installed and on PATH for acceptance tests');
  }
  workdir = makeTempDir("bridge-acc-");
  const dataCsv = path.join(workdir, "blobs.csv");
  fs.writeFileSync(dataCsv, fiveBlobs().map((r) => r.join(",")).join("\n") + "\n");
  configFile = path.join(workdir, "grid.toml");
  fs.writeFileSync(configFile, GRID_TOML(dataCsv));
  gridDir = path.join(workdir, "grid");
  const proc = drtune("grid", "--config", configFile, "--out", gridDir, "--no-timestamp");
  if (proc.status !== 0) {
    throw new Error(`drtune grid failed (${proc.status}):\n${proc.stderr}`);
  }
}, 600_000);

describe("bridge conformance", () => {
  it(
    "embeds the blobs through the tuning CLI at the grid optimum",
    () => {
      const out = path.join(workdir, "embedding.csv");
      const proc = drtune("embed", "--config", configFile, "--out", out,
        "--raw", "n_neighbor=10,min_distance=0.2", "--no-timestamp");
      expect(proc.stderr).toBe("");
      expect(proc.status).toBe(0);
      const { header, rows } = readCsvTable(out);
      expect(header).toEqual(["x0", "x1"]);
      expect(rows).toHaveLength(100);
      for (const row of rows) expect(row.every((v) => Number.isFinite(Number(v)))).toBe(true);
    },
    120_000,
  );

  it("rejects an invalid n_neighbor with a named reason", () => {
    const dir = makeTempDir("bridge-inv-");
    fs.writeFileSync(path.join(dir, "input.csv"), "1,2\n3,4\n5,6\n");
    fs.writeFileSync(path.join(dir, "params.json"),
      JSON.stringify({ n_neighbor: 3, min_dist: 0.1, d_prime: 2, seed: 0 }));
    const proc = spawnSync("node", [BRIDGE_JS, dir], { encoding: "utf8" });
    expect(proc.status).not.toBe(0);
    expect(proc.stderr).toMatch(/n_neighbor/);
  });

  it("bottoms out at a small normalized n_neighbor on the 1-AUC heatmap", () => {
    const { header, rows } = readCsvTable(path.join(gridDir, "points.csv"));
    const iU = header.indexOf("u_n_neighbor");
    const iAgg = header.indexOf("aggregate");
    const iVar = header.indexOf("variance");
    expect(iU).toBeGreaterThanOrEqual(0);
    expect(rows).toHaveLength(60);
    const best = rows.reduce((a, b) => (Number(a[iAgg]) <= Number(b[iAgg]) ? a : b));
    const bestU = Number(best[iU]);
    const maxVar = Math.max(...rows.map((r) => Number(r[iVar])));
    const ok = bestU < 0.3 && Number.isFinite(maxVar);
    report("bridge-conformance", ok,
      `heatmap argmin at u_n_neighbor=${bestU.toFixed(3)} < 0.3 `
      + `(loss ${Number(best[iAgg]).toFixed(3)}, repeat variance bounded by ${maxVar.toExponential(1)})`);
    expect(bestU).toBeLessThan(0.3);
    expect(Number.isFinite(maxVar)).toBe(true);
  });
});

describe("bridge sensitivity ranking", () => {
  it(
    "ranks n_neighbor above min_distance in first-order Sobol indices",
    () => {
      const out = path.join(workdir, "sobol.csv");
      const proc = drtune("sobol", "--manifest", path.join(gridDir, "manifest.json"),
        "--out", out, "--no-timestamp");
      expect(proc.status).toBe(0);
      const { header, rows } = readCsvTable(out);
      const iDim = header.indexOf("dim");
      const iS1 = header.indexOf("S1");
      const s1 = new Map(rows.map((r) => [r[iDim], Number(r[iS1])]));
      const nn = s1.get("n_neighbor")!;
      const md = s1.get("min_distance")!;
      const ok = nn > md;
      report("bridge-sensitivity", ok, `S1(n_neighbor)=${nn.toFixed(3)} > S1(min_distance)=${md.toFixed(3)}`);
      expect(nn).toBeGreaterThan(md);
    },
    120_000,
  );
});
