/** Debounced render requests with stale-response rejection.
 *
 * Every issued request carries a sequence number.  A response is displayed
 * only if its sequence number is greater than that of the frame currently
 * on screen, so out-of-order completions (slow server, racing requests)
 * can never paint a stale frame.  The displayed frame therefore always
 * converges to the last requested slider position.
 */

export type RenderFetch<T> = (alpha: number) => Promise<T>;
export type DisplayFn<T> = (payload: T, alpha: number, seq: number) => void;

export interface RenderQueueOptions {
  debounceMs?: number;
}

export class RenderQueue<T> {
  private issued = 0;
  private displayed = 0;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private pendingAlpha: number | null = null;
  private readonly debounceMs: number;
  private settled: Promise<void> = Promise.resolve();
  onError: ((error: unknown) => void) | null = null;

  constructor(
    private readonly fetchRender: RenderFetch<T>,
    private readonly display: DisplayFn<T>,
    options: RenderQueueOptions = {},
  ) {
    this.debounceMs = options.debounceMs ?? 150;
  }

  /** Debounced: trailing-edge fire after debounceMs of silence. */
  request(alpha: number): void {
    this.pendingAlpha = alpha;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => this.flush(), this.debounceMs);
  }

  /** Issue the pending request immediately. */
  flush(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    if (this.pendingAlpha === null) return;
    const alpha = this.pendingAlpha;
    this.pendingAlpha = null;
    const seq = ++this.issued;
    const attempt = this.fetchRender(alpha).then(
      (payload) => {
        if (seq > this.displayed) {
          this.displayed = seq;
          this.display(payload, alpha, seq);
        }
      },
      (error) => {
        // failures leave the displayed state untouched
        if (this.onError) this.onError(error);
      },
    );
    this.settled = this.settled.then(() => attempt);
  }

  /** Resolves once every request issued so far has completed. */
  idle(): Promise<void> {
    return this.settled;
  }

  get displayedSeq(): number {
    return this.displayed;
  }

  get issuedSeq(): number {
    return this.issued;
  }
}
