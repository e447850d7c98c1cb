/**
 * Session state for the explorer. Pure data + transitions, no DOM and no
 * network: panels render from this and the client is called with what it
 * holds. Mix weights stay a convex combination through every slider drag,
 * and the history is append-only for the lifetime of the session.
 */

export interface HistoryEntry {
  readonly request: unknown;
  readonly thumbnail: string;
}

export interface InterpolationState {
  idI: number | null;
  idJ: number | null;
  steps: number;
  position: number; // frame index the scrubber points at
}

const WEIGHT_DECIMALS = 2;

/** Round weights to 2 decimals so they still sum to exactly 1.00: round
 * every entry down the usual way, then push the residual onto the largest
 * weight. */
export function displayWeights(weights: number[]): number[] {
  const factor = 10 ** WEIGHT_DECIMALS;
  const rounded = weights.map((w) => Math.round(w * factor) / factor);
  const residual = 1 - rounded.reduce((a, b) => a + b, 0);
  if (Math.abs(residual) > 1e-9 && rounded.length > 0) {
    let k = 0;
    rounded.forEach((w, i) => {
      if (w > rounded[k]!) k = i;
    });
    rounded[k] = Math.round((rounded[k]! + residual) * factor) / factor;
  }
  return rounded;
}

export class SessionState {
  sourceId: number | null = null;
  donors = new Map<string, number>();
  mixComponentIds: number[] = [];
  private weights: number[] = [];
  interpolation: InterpolationState = {
    idI: null,
    idJ: null,
    steps: 8,
    position: 0,
  };
  private readonly historyEntries: HistoryEntry[] = [];

  get mixWeights(): readonly number[] {
    return this.weights;
  }

  get history(): readonly HistoryEntry[] {
    return this.historyEntries;
  }

  addMixComponent(id: number): void {
    this.mixComponentIds.push(id);
    const n = this.mixComponentIds.length;
    this.weights = Array(n).fill(1 / n);
  }

  removeMixComponent(index: number): void {
    this.mixComponentIds.splice(index, 1);
    this.weights.splice(index, 1);
    const total = this.weights.reduce((a, b) => a + b, 0);
    if (this.weights.length > 0) {
      this.weights = total > 0
        ? this.weights.map((w) => w / total)
        : Array(this.weights.length).fill(1 / this.weights.length);
    }
  }

  /**
   * Drag slider `index` to `value`; the remaining weights are rescaled
   * proportionally so the vector stays on the simplex after every change.
   */
  setMixWeight(index: number, value: number): void {
    if (index < 0 || index >= this.weights.length) {
      throw new RangeError(`no mix component at index ${index}`);
    }
    const v = Math.min(1, Math.max(0, value));
    const others = this.weights.reduce((a, b, i) => (i === index ? a : a + b), 0);
    this.weights = this.weights.map((w, i) => {
      if (i === index) return v;
      if (others > 0) return (w / others) * (1 - v);
      return (1 - v) / (this.weights.length - 1);
    });
  }

  setInterpolationEndpoints(idI: number, idJ: number): void {
    this.interpolation.idI = idI;
    this.interpolation.idJ = idJ;
    this.interpolation.position = 0;
  }

  scrubTo(position: number): void {
    const last = this.interpolation.steps - 1;
    this.interpolation.position = Math.min(last, Math.max(0, position));
  }

  recordResult(request: unknown, thumbnail: string): void {
    this.historyEntries.push({ request, thumbnail });
  }
}
