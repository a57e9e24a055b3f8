#!/usr/bin/env node
/**
 * plot — render allocator experiment artifacts into figures.
 *
 *   plot curve   --in a.csv b.csv      --out figure.svg
 *   plot box     --in a.json b.json    --out figure.svg
 *   plot heatmap --in frame.csv        --out frame.png
 *   plot heatmap --in frames_dir/      --out out_dir/      (numbered sequence)
 *
 * Exit codes: 0 success, 1 render failure, 2 bad input/schema.
 */
import * as fs from "node:fs";
import * as path from "node:path";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { loadSeries, loadBoxSummary, loadFrameGrid, SchemaError } from "./schema.js";
import { renderCurve, renderBox } from "./svg.js";
import { renderHeatmap } from "./png.js";

function fail(code: number, message: string): never {
  process.stderr.write(`plot: ${message}\n`);
  process.exit(code);
}

function runCurve(inputs: string[], out: string): void {
  const series = inputs.map(loadSeries);
  fs.writeFileSync(out, renderCurve(series));
}

function runBox(inputs: string[], out: string): void {
  const summaries = inputs.map(loadBoxSummary);
  fs.writeFileSync(out, renderBox(summaries));
}

function runHeatmap(inputs: string[], out: string): void {
  if (inputs.length !== 1) {
    throw new SchemaError("heatmap takes exactly one input (a frame CSV or a directory of them)");
  }
  const src = inputs[0];
  if (fs.statSync(src).isDirectory()) {
    const frames = fs
      .readdirSync(src)
      .filter((f) => f.endsWith(".csv"))
      .sort();
    if (frames.length === 0) throw new SchemaError(`${src}: no .csv frames found`);
    fs.mkdirSync(out, { recursive: true });
    frames.forEach((f, i) => {
      const png = renderHeatmap(loadFrameGrid(path.join(src, f)));
      fs.writeFileSync(path.join(out, `frame_${String(i).padStart(4, "0")}.png`), png);
    });
  } else {
    fs.writeFileSync(out, renderHeatmap(loadFrameGrid(src)));
  }
}

export function main(argv: string[]): void {
  const parser = yargs(argv)
    .scriptName("plot")
    .command("curve", "overlay line chart from unique-series CSVs")
    .command("box", "grouped box/whisker figure from five-number summary JSONs")
    .command("heatmap", "heat-map PNG(s) from grid frame CSV(s)")
    .option("in", { type: "string", array: true, demandOption: true, describe: "input file(s)" })
    .option("out", { type: "string", demandOption: true, describe: "output path" })
    .demandCommand(1, "specify a figure kind: curve, box, or heatmap")
    .strict()
    .help()
    .exitProcess(false)
    .fail((msg) => fail(2, msg));

  const args = parser.parseSync();
  const kind = String(args._[0]);
  const inputs = (args.in as string[]).flatMap((s) => s.split(",")).filter(Boolean);
  const out = args.out as string;

  for (const f of inputs) {
    if (!fs.existsSync(f)) fail(2, `input not found: ${f}`);
  }

  try {
    if (kind === "curve") runCurve(inputs, out);
    else if (kind === "box") runBox(inputs, out);
    else if (kind === "heatmap") runHeatmap(inputs, out);
    else fail(2, `unknown figure kind '${kind}' (expected curve, box, or heatmap)`);
  } catch (err) {
    if (err instanceof SchemaError) fail(2, err.message);
    fail(1, err instanceof Error ? err.message : String(err));
  }
}

main(hideBin(process.argv));
