/** Minimal binary PGM (P5) reader for mask overlays: 0 = background, 255 = scar. */

export interface PgmMask {
  width: number;
  height: number;
  cellSize: number;
  /** row-major, 1 = scar cell */
  bits: Uint8Array;
}

export class PgmError extends Error {}

export function parsePgm(data: Uint8Array): PgmMask {
  if (data.length < 2 || data[0] !== 0x50 || data[1] !== 0x35) {
    throw new PgmError("not a binary PGM (missing P5 magic)");
  }
  let pos = 2;
  let cellSize = 1.0;
  const tokens: number[] = [];

  const isSpace = (b: number | undefined) =>
    b === 0x20 || b === 0x09 || b === 0x0a || b === 0x0d;

  while (tokens.length < 3) {
    if (pos >= data.length) throw new PgmError("truncated PGM header");
    const byte = data[pos];
    if (isSpace(byte)) {
      pos += 1;
    } else if (byte === 0x23) {
      // comment line; may carry "cell_size <v>"
      let end = pos;
      while (end < data.length && data[end] !== 0x0a) end += 1;
      const comment = new TextDecoder().decode(data.subarray(pos + 1, end)).trim();
      const parts = comment.split(/\s+/);
      if (parts.length === 2 && parts[0] === "cell_size") {
        const value = Number(parts[1]);
        if (!Number.isFinite(value)) throw new PgmError("malformed cell_size comment");
        cellSize = value;
      }
      pos = end + 1;
    } else {
      let end = pos;
      while (end < data.length && !isSpace(data[end])) end += 1;
      const token = new TextDecoder().decode(data.subarray(pos, end));
      const value = Number(token);
      if (!Number.isInteger(value)) throw new PgmError(`bad PGM header token ${token}`);
      tokens.push(value);
      pos = end;
    }
  }
  pos += 1; // single whitespace after maxval

  const [width, height, maxval] = tokens as [number, number, number];
  if (width < 1 || height < 1) throw new PgmError(`bad PGM dimensions ${width}x${height}`);
  if (maxval !== 255) throw new PgmError(`unsupported PGM maxval ${maxval}`);
  const expected = width * height;
  if (data.length - pos !== expected) {
    throw new PgmError(`PGM payload is ${data.length - pos} bytes, expected ${expected}`);
  }
  const bits = new Uint8Array(expected);
  for (let i = 0; i < expected; i++) {
    const px = data[pos + i];
    if (px === 255) bits[i] = 1;
    else if (px !== 0) throw new PgmError(`invalid mask pixel ${px}`);
  }
  return { width, height, cellSize, bits };
}
