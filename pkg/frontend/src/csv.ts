/**
 * Sweep CSV parsing. The schema is fixed:
 *   axis1_name,axis1_value,axis2_name,axis2_value,metric,stat,value
 * Any deviation is reported with the offending column named so the CLI can
 * exit with a useful message.
 */

export const SWEEP_HEADER = [
  "axis1_name",
  "axis1_value",
  "axis2_name",
  "axis2_value",
  "metric",
  "stat",
  "value",
] as const;

export class SchemaError extends Error {
  constructor(message: string, readonly column: string) {
    super(message);
    this.name = "SchemaError";
  }
}

export interface SweepRow {
  axis1Name: string;
  axis1Value: number;
  axis2Name: string;
  axis2Value: number;
  metric: string;
  stat: string;
  value: number;
}

const NUMERIC_COLUMNS: Record<string, number> = {
  axis1_value: 1,
  axis2_value: 3,
  value: 6,
};

export function parseSweepCsv(text: string): SweepRow[] {
  const lines = text.split(/\r?\n/).filter((line) => line.trim().length > 0);
  if (lines.length === 0) {
    throw new SchemaError("empty sweep CSV", "axis1_name");
  }
  const header = lines[0].split(",");
  for (let i = 0; i < SWEEP_HEADER.length; i++) {
    if (header[i] !== SWEEP_HEADER[i]) {
      throw new SchemaError(
        `header column ${i + 1} must be '${SWEEP_HEADER[i]}', got '${header[i] ?? ""}'`,
        SWEEP_HEADER[i],
      );
    }
  }
  if (header.length !== SWEEP_HEADER.length) {
    throw new SchemaError(`unexpected extra column '${header[SWEEP_HEADER.length]}'`, header[SWEEP_HEADER.length]);
  }
  const rows: SweepRow[] = [];
  for (let ln = 1; ln < lines.length; ln++) {
    const parts = lines[ln].split(",");
    if (parts.length !== SWEEP_HEADER.length) {
      throw new SchemaError(`row ${ln + 1} has ${parts.length} fields, expected 7`, "value");
    }
    for (const [column, index] of Object.entries(NUMERIC_COLUMNS)) {
      const parsed = Number(parts[index]);
      if (parts[index].trim() === "" || Number.isNaN(parsed)) {
        throw new SchemaError(`row ${ln + 1}: '${parts[index]}' is not a number in ${column}`, column);
      }
    }
    rows.push({
      axis1Name: parts[0],
      axis1Value: Number(parts[1]),
      axis2Name: parts[2],
      axis2Value: Number(parts[3]),
      metric: parts[4],
      stat: parts[5],
      value: Number(parts[6]),
    });
  }
  return rows;
}

export function metricsIn(rows: SweepRow[]): Set<string> {
  return new Set(rows.map((r) => r.metric));
}

export function statsIn(rows: SweepRow[]): Set<string> {
  return new Set(rows.map((r) => r.stat));
}
