/** Paintable binary mask backed by a byte buffer.
 *
 * Brush strokes rasterize hard discs; undo replays the remaining stroke
 * list from an empty canvas, so the buffer is always exactly the strokes'
 * footprint.  The DOM layer turns the buffer into a black/white PNG at
 * upload time.
 */

interface Stroke {
  radius: number;
  points: Array<[number, number]>;
}

export class MaskBuffer {
  private data: Uint8Array;
  private strokes: Stroke[] = [];
  private active: Stroke | null = null;

  constructor(
    readonly width: number,
    readonly height: number,
  ) {
    if (width < 1 || height < 1) throw new Error("mask dimensions must be positive");
    this.data = new Uint8Array(width * height);
  }

  beginStroke(radius: number): void {
    this.active = { radius: Math.max(1, radius), points: [] };
  }

  addPoint(x: number, y: number): void {
    if (!this.active) throw new Error("no active stroke");
    this.active.points.push([x, y]);
    this.stampDisc(x, y, this.active.radius);
  }

  endStroke(): void {
    if (this.active && this.active.points.length > 0) {
      this.strokes.push(this.active);
    }
    this.active = null;
  }

  undo(): void {
    this.strokes.pop();
    this.data.fill(0);
    for (const stroke of this.strokes) {
      for (const [x, y] of stroke.points) this.stampDisc(x, y, stroke.radius);
    }
  }

  clear(): void {
    this.strokes = [];
    this.active = null;
    this.data.fill(0);
  }

  private stampDisc(cx: number, cy: number, radius: number): void {
    const r2 = radius * radius;
    const x0 = Math.max(0, Math.floor(cx - radius));
    const x1 = Math.min(this.width - 1, Math.ceil(cx + radius));
    const y0 = Math.max(0, Math.floor(cy - radius));
    const y1 = Math.min(this.height - 1, Math.ceil(cy + radius));
    for (let y = y0; y <= y1; y++) {
      for (let x = x0; x <= x1; x++) {
        const dx = x - cx;
        const dy = y - cy;
        if (dx * dx + dy * dy <= r2) this.data[y * this.width + x] = 255;
      }
    }
  }

  get(x: number, y: number): number {
    return this.data[y * this.width + x];
  }

  paintedCount(): number {
    let count = 0;
    for (const v of this.data) if (v) count++;
    return count;
  }

  isEmpty(): boolean {
    return this.paintedCount() === 0;
  }

  isFull(): boolean {
    return this.paintedCount() === this.data.length;
  }

  /** A mask must cover something, but not everything, to be optimizable. */
  submitBlockReason(): string | null {
    if (this.isEmpty()) return "paint a region first: the mask is empty";
    if (this.isFull()) return "the mask covers the whole image; leave some background";
    return null;
  }

  pixels(): Uint8Array {
    return this.data.slice();
  }

  /** RGBA bytes (white-on-black) for canvas upload. */
  toRgba(): Uint8ClampedArray<ArrayBuffer> {
    const out = new Uint8ClampedArray(new ArrayBuffer(this.data.length * 4));
    for (let i = 0; i < this.data.length; i++) {
      const v = this.data[i];
      out[i * 4] = v;
      out[i * 4 + 1] = v;
      out[i * 4 + 2] = v;
      out[i * 4 + 3] = 255;
    }
    return out;
  }
}
