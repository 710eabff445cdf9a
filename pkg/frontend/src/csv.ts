import Papa from "papaparse";

/** A parsed CSV: column names plus row objects keyed by column. */
export interface Table {
  columns: string[];
  rows: Record<string, string>[];
}

export class CsvError extends Error {}

export class MissingColumnError extends CsvError {
  constructor(public readonly column: string) {
    super(`missing column: ${column}`);
  }
}

export class EmptyCsvError extends CsvError {
  constructor() {
    super("CSV has no data rows");
  }
}

/** Parse CSV text and check that every required column exists and the
 * body is non-empty. */
export function parseTable(text: string, required: string[]): Table {
  const parsed = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const e = parsed.errors[0];
    throw new CsvError(`CSV parse error: ${e.message} (row ${e.row})`);
  }
  const columns = parsed.meta.fields ?? [];
  for (const col of required) {
    if (!columns.includes(col)) {
      throw new MissingColumnError(col);
    }
  }
  if (parsed.data.length === 0) {
    throw new EmptyCsvError();
  }
  return { columns, rows: parsed.data };
}

/** Numeric cell access. The simulator writes `nan` for aggregates of
 * all-infeasible cells; those parse to NaN (callers drop such points).
 * Anything else non-numeric is a schema error. */
export function num(row: Record<string, string>, col: string): number {
  const raw = (row[col] ?? "").trim().toLowerCase();
  if (raw === "nan") return NaN;
  const v = Number(row[col]);
  if (Number.isNaN(v)) {
    throw new CsvError(`non-numeric value ${JSON.stringify(row[col])} in column ${col}`);
  }
  return v;
}
