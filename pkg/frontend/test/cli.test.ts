import { execFileSync, spawnSync } from "node:child_process";
import { existsSync, mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";

import { beforeAll, describe, expect, it } from "vitest";

const ROOT = fileURLToPath(new URL("..", import.meta.url));
const CLI = join(ROOT, "dist", "cli.js");
const HEADER = "param,value,scenario,mean_energy_J,stderr_J,infeasible_rate,trials";

function run(args: string[]) {
  return spawnSync("node", [CLI, ...args], { encoding: "utf-8" });
}

describe("cli", () => {
  let dir: string;
  let sweep: string;

  beforeAll(() => {
    execFileSync("npx", ["tsc"], { cwd: ROOT });
    dir = mkdtempSync(join(tmpdir(), "figs-"));
    sweep = join(dir, "sweep.csv");
    const rows = [HEADER];
    for (const scen of ["TS-TS", "TS-ES", "ES-TS", "ES-ES", "CONV"]) {
      for (const n of [8, 16, 24]) {
        rows.push(`N,${n},${scen},${0.1 + n * 1e-3},0.01,0,4`);
      }
    }
    writeFileSync(sweep, rows.join("\n") + "\n");
  }, 120_000);

  it("renders a sweep CSV to a non-empty SVG", () => {
    const out = join(dir, "fig.svg");
    const r = run(["--csv", sweep, "--x", "value", "--y", "mean_energy_J",
                   "--err", "stderr_J", "--out", out]);
    expect(r.status).toBe(0);
    expect(existsSync(out)).toBe(true);
    const svg = readFileSync(out, "utf-8");
    expect(svg.length).toBeGreaterThan(1000);
    expect(svg).toContain("Conventional RIS");
  });

  it("fails naming a missing column", () => {
    const out = join(dir, "bad.svg");
    const r = run(["--csv", sweep, "--x", "bogus_col",
                   "--y", "mean_energy_J", "--out", out]);
    expect(r.status).toBe(1);
    expect(r.stderr).toContain("bogus_col");
  });

  it("fails on an empty CSV body", () => {
    const empty = join(dir, "empty.csv");
    writeFileSync(empty, HEADER + "\n");
    const r = run(["--csv", empty, "--x", "value",
                   "--y", "mean_energy_J", "--out", join(dir, "e.svg")]);
    expect(r.status).toBe(1);
    expect(r.stderr).toContain("no data rows");
  });

  it("exits 2 on usage errors", () => {
    expect(run(["--x", "value"]).status).toBe(2);
    expect(run(["--definitely-not-a-flag"]).status).toBe(2);
  });
});
