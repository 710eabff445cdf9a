#!/usr/bin/env node
/** Render a simulator CSV (sweep or convergence trace) as an SVG line
 * figure.
 *
 *   node dist/cli.js --csv sweep.csv --x value --y mean_energy_J \
 *       --out figure.svg [--series scenario] [--err stderr_J] [--log-y]
 *
 * Exit codes: 0 ok, 1 data error (missing column, empty CSV), 2 usage.
 */
import { parseArgs } from "node:util";
import { readFileSync, writeFileSync } from "node:fs";
import { pathToFileURL } from "node:url";

import { parseTable, CsvError } from "./csv.js";
import { renderSvg, FigureSpec } from "./figure.js";

const USAGE =
  "usage: render --csv FILE --x COL --y COL --out FILE " +
  "[--series COL] [--err COL] [--log-y] [--title TEXT]";

export function main(argv: string[]): number {
  let args;
  try {
    args = parseArgs({
      args: argv,
      options: {
        csv: { type: "string" },
        x: { type: "string" },
        y: { type: "string" },
        out: { type: "string" },
        series: { type: "string", default: "scenario" },
        err: { type: "string" },
        "log-y": { type: "boolean", default: false },
        title: { type: "string" },
      },
      allowPositionals: false,
    }).values;
  } catch (e) {
    console.error(`${(e as Error).message}\n${USAGE}`);
    return 2;
  }
  for (const req of ["csv", "x", "y", "out"] as const) {
    if (!args[req]) {
      console.error(`missing --${req}\n${USAGE}`);
      return 2;
    }
  }

  let text: string;
  try {
    text = readFileSync(args.csv!, "utf-8");
  } catch (e) {
    console.error(`cannot read ${args.csv}: ${(e as Error).message}`);
    return 2;
  }

  const spec: FigureSpec = {
    x: args.x!,
    y: args.y!,
    series: args.series!,
    err: args.err,
    logY: args["log-y"],
    title: args.title,
  };
  try {
    const required = [spec.x, spec.y, spec.series];
    if (spec.err) required.push(spec.err);
    const table = parseTable(text, required);
    writeFileSync(args.out!, renderSvg(table, spec));
  } catch (e) {
    if (e instanceof CsvError) {
      console.error(e.message);
      return 1;
    }
    throw e;
  }
  return 0;
}

if (process.argv[1]
    && import.meta.url === pathToFileURL(process.argv[1]).href) {
  process.exitCode = main(process.argv.slice(2));
}
