/**
 * Input schemas for the three figure kinds.
 *
 * - unique-series CSV: header `alloc_index,unique_blocks`, integer rows.
 * - recycle summary JSON: object with numeric `min`, `q1`, `median`, `q3`, `max`.
 * - heat-map frame CSV: headerless rectangular grid of non-negative integers.
 *
 * All loaders throw SchemaError naming the offending column/field so the CLI
 * can report it and exit nonzero.
 */
import * as fs from "node:fs";
import * as path from "node:path";
import Papa from "papaparse";

export class SchemaError extends Error {}

export interface Series {
  label: string;
  x: number[];
  y: number[];
}

export interface BoxSummary {
  label: string;
  min: number;
  q1: number;
  median: number;
  q3: number;
  max: number;
}

export interface FrameGrid {
  label: string;
  rows: number[][]; // rectangular
  maxValue: number;
}

/** Derive a short series label from a file path, e.g. unique_mad_seed21.csv -> mad. */
export function labelFromPath(file: string): string {
  const base = path.basename(file).replace(/\.[^.]+$/, "");
  const m = base.match(/^(?:unique|recycle)_([A-Za-z0-9]+)/);
  return m ? m[1] : base;
}

export function loadSeries(file: string): Series {
  const text = fs.readFileSync(file, "utf-8");
  const parsed = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  const fields = parsed.meta.fields ?? [];
  for (const required of ["alloc_index", "unique_blocks"]) {
    if (!fields.includes(required)) {
      throw new SchemaError(`${file}: missing column '${required}'`);
    }
  }
  const x: number[] = [];
  const y: number[] = [];
  for (const row of parsed.data) {
    const xi = Number(row["alloc_index"]);
    const yi = Number(row["unique_blocks"]);
    if (!Number.isFinite(xi)) {
      throw new SchemaError(`${file}: non-numeric value in column 'alloc_index'`);
    }
    if (!Number.isFinite(yi)) {
      throw new SchemaError(`${file}: non-numeric value in column 'unique_blocks'`);
    }
    x.push(xi);
    y.push(yi);
  }
  if (x.length === 0) {
    throw new SchemaError(`${file}: no data rows under column 'alloc_index'`);
  }
  return { label: labelFromPath(file), x, y };
}

const BOX_FIELDS = ["min", "q1", "median", "q3", "max"] as const;

export function loadBoxSummary(file: string): BoxSummary {
  const text = fs.readFileSync(file, "utf-8");
  let obj: unknown;
  try {
    obj = JSON.parse(text);
  } catch {
    throw new SchemaError(`${file}: not valid JSON`);
  }
  if (typeof obj !== "object" || obj === null) {
    throw new SchemaError(`${file}: expected a JSON object`);
  }
  const rec = obj as Record<string, unknown>;
  const out: Record<string, number> = {};
  for (const field of BOX_FIELDS) {
    const v = rec[field];
    if (typeof v !== "number" || !Number.isFinite(v)) {
      throw new SchemaError(`${file}: missing or non-numeric field '${field}'`);
    }
    out[field] = v;
  }
  return {
    label: labelFromPath(file),
    min: out.min,
    q1: out.q1,
    median: out.median,
    q3: out.q3,
    max: out.max,
  };
}

export function loadFrameGrid(file: string): FrameGrid {
  const text = fs.readFileSync(file, "utf-8");
  const parsed = Papa.parse<string[]>(text.trim(), {
    header: false,
    skipEmptyLines: true,
  });
  const rows: number[][] = [];
  let width = -1;
  let maxValue = 0;
  for (let r = 0; r < parsed.data.length; r++) {
    const cells = parsed.data[r];
    if (width === -1) width = cells.length;
    if (cells.length !== width) {
      throw new SchemaError(
        `${file}: row ${r} has ${cells.length} columns, expected ${width}`,
      );
    }
    const row: number[] = [];
    for (let c = 0; c < cells.length; c++) {
      const v = Number(cells[c]);
      if (!Number.isInteger(v) || v < 0) {
        throw new SchemaError(`${file}: row ${r} column ${c} is not a non-negative integer`);
      }
      row.push(v);
      if (v > maxValue) maxValue = v;
    }
    rows.push(row);
  }
  if (rows.length === 0) {
    throw new SchemaError(`${file}: empty grid`);
  }
  return { label: path.basename(file).replace(/\.[^.]+$/, ""), rows, maxValue };
}
