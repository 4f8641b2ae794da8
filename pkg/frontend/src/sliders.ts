// Slider panel state. Only a small subset of latent dimensions get sliders;
// the subset is chosen by largest |mu| on the current window so the sliders
// move the directions the encoder actually uses.

export const DEFAULT_SLIDER_COUNT = 8;

/** Indices of the k largest |mu| components, ties toward the lower index. */
export function topDims(mu: number[], k: number = DEFAULT_SLIDER_COUNT): number[] {
  const order = mu
    .map((value, index) => ({ index, mag: Math.abs(value) }))
    .sort((a, b) => b.mag - a.mag || a.index - b.index);
  return order.slice(0, Math.min(k, mu.length)).map((d) => d.index);
}

export class SliderPanel {
  dims: number[] = [];
  deltas = new Map<number, number>();
  /** When false, deltas clear and dims re-rank after every step. */
  persist = false;

  constructor(
    readonly latentDim: number,
    readonly sliderCount: number = DEFAULT_SLIDER_COUNT,
  ) {}

  rankFrom(mu: number[]): void {
    if (mu.length !== this.latentDim) {
      throw new Error(`mu length ${mu.length} != latent dim ${this.latentDim}`);
    }
    this.dims = topDims(mu, this.sliderCount);
    for (const dim of [...this.deltas.keys()]) {
      if (!this.dims.includes(dim)) this.deltas.delete(dim);
    }
  }

  setDelta(dim: number, value: number): void {
    if (!this.dims.includes(dim)) {
      throw new Error(`no slider for latent dim ${dim}`);
    }
    if (value === 0) this.deltas.delete(dim);
    else this.deltas.set(dim, value);
  }

  reset(): void {
    this.deltas.clear();
  }

  /** Sum of one-hot deltas, or null when every slider sits at zero. */
  deltaVector(): number[] | null {
    if (this.deltas.size === 0) return null;
    const vector = new Array<number>(this.latentDim).fill(0);
    for (const [dim, value] of this.deltas) vector[dim] = value;
    return vector;
  }

  /** Called after a step has been accepted by the server. */
  afterStep(mu: number[]): void {
    if (!this.persist) {
      this.reset();
      this.rankFrom(mu);
    }
  }
}
