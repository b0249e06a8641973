/**
 * Figure CLIs:
 *   plot-heatmap --input sweep.csv --metric gini --stat mean --out fig.png
 *   plot-curves  --k 1,2,4 --c 0.75 --out curves.svg
 * Exit codes: 0 ok, 2 bad arguments or schema mismatch, 4 I/O failure.
 */

import { readFileSync, writeFileSync } from "node:fs";

import { curveFamilySvg } from "./curves.js";
import { SchemaError, parseSweepCsv } from "./csv.js";
import { heatmapPng } from "./heatmap.js";

type Args = Record<string, string>;

function parseArgs(argv: string[], allowed: string[]): Args {
  const args: Args = {};
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith("--") || !allowed.includes(key.slice(2))) {
      throw new UsageError(`unknown or malformed option '${key}'`);
    }
    const value = argv[i + 1];
    if (value === undefined) {
      throw new UsageError(`option '${key}' needs a value`);
    }
    args[key.slice(2)] = value;
  }
  return args;
}

class UsageError extends Error {}

function required(args: Args, key: string): string {
  const value = args[key];
  if (value === undefined) {
    throw new UsageError(`missing required option --${key}`);
  }
  return value;
}

export function runHeatmap(argv: string[], log = console.error): number {
  try {
    const args = parseArgs(argv, ["input", "metric", "stat", "out", "vmin", "vmax", "title"]);
    const stat = required(args, "stat");
    if (stat !== "mean" && stat !== "std") {
      throw new UsageError(`--stat must be mean or std, got '${stat}'`);
    }
    let text: string;
    try {
      text = readFileSync(required(args, "input"), "utf-8");
    } catch (err) {
      log(`I/O error: ${(err as Error).message}`);
      return 4;
    }
    const rows = parseSweepCsv(text);
    const png = heatmapPng(rows, {
      metric: required(args, "metric"),
      stat,
      vmin: args.vmin === undefined ? undefined : Number(args.vmin),
      vmax: args.vmax === undefined ? undefined : Number(args.vmax),
      title: args.title,
      warn: log,
    });
    try {
      writeFileSync(required(args, "out"), png);
    } catch (err) {
      log(`I/O error: ${(err as Error).message}`);
      return 4;
    }
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      log(`schema error in column '${err.column}': ${err.message}`);
      return 2;
    }
    if (err instanceof UsageError || err instanceof Error) {
      log(`error: ${(err as Error).message}`);
      return 2;
    }
    return 2;
  }
}

export function runCurves(argv: string[], log = console.error): number {
  try {
    const args = parseArgs(argv, ["k", "c", "out", "ymax"]);
    const ks = required(args, "k")
      .split(",")
      .map((tok) => tok.trim())
      .filter((tok) => tok.length > 0)
      .map((tok) => {
        const v = Number(tok);
        if (Number.isNaN(v) || v < 0) {
          throw new UsageError(`bad curve exponent '${tok}'`);
        }
        return v;
      });
    const svg = curveFamilySvg({
      ks,
      c: Number(required(args, "c")),
      yMax: args.ymax === undefined ? undefined : Number(args.ymax),
    });
    try {
      writeFileSync(required(args, "out"), svg);
    } catch (err) {
      log(`I/O error: ${(err as Error).message}`);
      return 4;
    }
    return 0;
  } catch (err) {
    log(`error: ${(err as Error).message}`);
    return 2;
  }
}
