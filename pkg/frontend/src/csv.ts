/** Parser for the service's area.csv (header frame_index,date,area_m2). */

export interface AreaEntry {
  frameIndex: number;
  date: string;
  areaM2: number;
}

export class CsvError extends Error {}

export function parseAreaCsv(text: string): AreaEntry[] {
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length === 0 || lines[0] !== "frame_index,date,area_m2") {
    throw new CsvError(`unexpected area CSV header: ${lines[0] ?? "(empty)"}`);
  }
  return lines.slice(1).map((line, i) => {
    const parts = line.split(",");
    if (parts.length !== 3) throw new CsvError(`bad CSV row ${i + 2}: ${line}`);
    const frameIndex = Number(parts[0]);
    const areaM2 = Number(parts[2]);
    if (!Number.isInteger(frameIndex) || !Number.isFinite(areaM2)) {
      throw new CsvError(`bad CSV values at row ${i + 2}: ${line}`);
    }
    return { frameIndex, date: parts[1] as string, areaM2 };
  });
}
