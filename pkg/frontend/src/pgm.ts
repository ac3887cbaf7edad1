/** Binary PGM (P5) decoding and the saliency heat overlay. */

export interface PgmImage {
  width: number;
  height: number;
  values: Float32Array; // normalized to [0, 1]
}

export function decodePgm(buffer: ArrayBuffer): PgmImage {
  const bytes = new Uint8Array(buffer);
  let pos = 0;
  const isSpace = (c: number) => c === 32 || c === 9 || c === 10 || c === 13;

  function token(): string {
    while (pos < bytes.length) {
      if (bytes[pos] === 35) {
        // comment until end of line
        while (pos < bytes.length && bytes[pos] !== 10) pos++;
      } else if (isSpace(bytes[pos])) {
        pos++;
      } else {
        break;
      }
    }
    const start = pos;
    while (pos < bytes.length && !isSpace(bytes[pos])) pos++;
    return String.fromCharCode(...bytes.subarray(start, pos));
  }

  const magic = token();
  if (magic !== "P5") throw new Error(`expected P5 magic, got ${magic}`);
  const width = parseInt(token(), 10);
  const height = parseInt(token(), 10);
  const maxval = parseInt(token(), 10);
  if (!(width > 0 && height > 0 && maxval > 0 && maxval <= 65535)) {
    throw new Error("invalid PGM header");
  }
  pos++; // single whitespace byte after maxval
  const count = width * height;
  const values = new Float32Array(count);
  if (maxval > 255) {
    if (bytes.length - pos < 2 * count) throw new Error("truncated PGM payload");
    for (let i = 0; i < count; i++) {
      values[i] = ((bytes[pos + 2 * i] << 8) | bytes[pos + 2 * i + 1]) / maxval;
    }
  } else {
    if (bytes.length - pos < count) throw new Error("truncated PGM payload");
    for (let i = 0; i < count; i++) values[i] = bytes[pos + i] / maxval;
  }
  return { width, height, values };
}

/** Blue-to-red heat color for t in [0, 1]. */
export function heatColor(t: number): [number, number, number] {
  const clamped = Math.min(Math.max(t, 0), 1);
  const r = Math.round(255 * Math.min(1, Math.max(0, 1.5 * clamped - 0.25)));
  const g = Math.round(255 * Math.max(0, 1 - Math.abs(2 * clamped - 1)));
  const b = Math.round(255 * Math.min(1, Math.max(0, 1.25 - 1.5 * clamped)));
  return [r, g, b];
}

export const OVERLAY_OPACITY = 0.4;

/** RGBA overlay bytes at fixed 40% opacity for compositing over the photo. */
export function overlayRgba(map: PgmImage): Uint8ClampedArray<ArrayBuffer> {
  const out = new Uint8ClampedArray(new ArrayBuffer(map.width * map.height * 4));
  const alpha = Math.round(OVERLAY_OPACITY * 255);
  for (let i = 0; i < map.values.length; i++) {
    const [r, g, b] = heatColor(map.values[i]);
    out[i * 4] = r;
    out[i * 4 + 1] = g;
    out[i * 4 + 2] = b;
    out[i * 4 + 3] = alpha;
  }
  return out;
}
