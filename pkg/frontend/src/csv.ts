/** Client-side CSV handling for batch what-if uploads.
 *
 * Deliberately CSV-only (no spreadsheet formats): comma-separated, first
 * row header, '.' decimal separator, optional quoted cells. Header names
 * are matched case-insensitively against the schema; target columns and
 * unknown extras are ignored for prediction purposes.
 */

import type { FeatureDescriptor } from "./types";

const IGNORABLE = new Set(["friction_angle_deg", "cohesion_kpa"]);

export interface ParsedRow {
  line: number; // 1-based file line
  features: Record<string, number> | null;
  error: string | null;
}

export interface ParsedFile {
  rows: ParsedRow[];
  ignoredColumns: string[];
  error: string | null;
}

function splitLine(line: string): string[] {
  const cells: string[] = [];
  let current = "";
  let quoted = false;
  for (let i = 0; i < line.length; i++) {
    const ch = line[i];
    if (quoted) {
      if (ch === '"' && line[i + 1] === '"') {
        current += '"';
        i++;
      } else if (ch === '"') {
        quoted = false;
      } else {
        current += ch;
      }
    } else if (ch === '"') {
      quoted = true;
    } else if (ch === ",") {
      cells.push(current);
      current = "";
    } else {
      current += ch;
    }
  }
  cells.push(current);
  return cells;
}

export function parseCsv(text: string, schema: FeatureDescriptor[]): ParsedFile {
  const lines = text.split(/\r\n|\r|\n/).filter((l, i, all) => !(i === all.length - 1 && l === ""));
  if (lines.length === 0 || lines[0].trim() === "") {
    return { rows: [], ignoredColumns: [], error: "no rows: file is empty" };
  }
  const header = splitLine(lines[0]).map((h) => h.trim());
  const lower = header.map((h) => h.toLowerCase());
  const wanted = new Map(schema.map((d) => [d.name.toLowerCase(), d.name]));

  const positions = new Map<string, number>();
  const ignored: string[] = [];
  lower.forEach((name, pos) => {
    const canonical = wanted.get(name);
    if (canonical) {
      positions.set(canonical, pos);
    } else if (!IGNORABLE.has(name)) {
      ignored.push(header[pos]);
    }
  });
  const missing = schema.filter((d) => !positions.has(d.name)).map((d) => d.name);
  if (missing.length > 0) {
    return { rows: [], ignoredColumns: ignored, error: `missing columns: ${missing.join(", ")}` };
  }

  const rows: ParsedRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    if (lines[i].trim() === "") {
      continue;
    }
    const cells = splitLine(lines[i]);
    if (cells.length < header.length) {
      rows.push({ line: i + 1, features: null, error: `expected ${header.length} cells, got ${cells.length}` });
      continue;
    }
    const features: Record<string, number> = {};
    let rowError: string | null = null;
    for (const d of schema) {
      const cell = cells[positions.get(d.name)!].trim();
      const value = Number(cell);
      if (cell === "" || !Number.isFinite(value)) {
        rowError = `bad value ${JSON.stringify(cell)} for ${d.name}`;
        break;
      }
      features[d.name] = value;
    }
    rows.push(rowError ? { line: i + 1, features: null, error: rowError } : { line: i + 1, features, error: null });
  }
  if (rows.length === 0) {
    return { rows, ignoredColumns: ignored, error: "no rows: header only" };
  }
  return { rows, ignoredColumns: ignored, error: null };
}

export interface ResultRow {
  line: number;
  status: "ok" | "error";
  detail: string;
  features: Record<string, number> | null;
  friction_deg: number | null;
  cohesion_kpa: number | null;
  out_of_range: string[];
}

/** Serialize a results table back to CSV for download. */
export function resultsToCsv(rows: ResultRow[], schema: FeatureDescriptor[]): string {
  const head = ["line", "status", ...schema.map((d) => d.name), "friction_deg", "cohesion_kpa", "out_of_range"];
  const out = [head.join(",")];
  for (const row of rows) {
    const cells = [
      String(row.line),
      row.status === "ok" ? "ok" : `error: ${row.detail.replaceAll(",", ";")}`,
      ...schema.map((d) => (row.features ? String(row.features[d.name]) : "")),
      row.friction_deg === null ? "" : String(row.friction_deg),
      row.cohesion_kpa === null ? "" : String(row.cohesion_kpa),
      row.out_of_range.join(";"),
    ];
    out.push(cells.join(","));
  }
  return out.join("\n") + "\n";
}
