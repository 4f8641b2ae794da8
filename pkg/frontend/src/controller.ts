// DOM-free studio state machine: one server session, the rendered roll, and
// the slider panel. Every displayed column comes from a server response; the
// invariant cols == W + steps * stride is re-checked after each mutation.

import { ApiClient, ApiError, MidiIngest, ModelInfo, StepResult } from "./api";
import { Grid, gridToRle, rleToGrid } from "./rle";
import { SliderPanel } from "./sliders";

export class StaleSessionError extends Error {}

export class Studio {
  roll: Grid;
  sessionId: string | null = null;
  threshold: number;
  stepsTaken = 0;
  stepping = false;
  readonly sliders: SliderPanel;

  private thresholdDirty = false;

  constructor(
    readonly api: ApiClient,
    readonly info: ModelInfo,
  ) {
    this.roll = new Grid(info.n_pitches, 0);
    this.threshold = info.threshold;
    this.sliders = new SliderPanel(info.latent_dim);
  }

  static async connect(api: ApiClient): Promise<Studio> {
    return new Studio(api, await api.modelInfo());
  }

  expectedCols(): number {
    return this.info.window_cols + this.stepsTaken * this.info.stride_cols;
  }

  private checkColumnCount(): void {
    if (this.roll.nCols !== this.expectedCols()) {
      throw new Error(
        `roll has ${this.roll.nCols} columns, expected ${this.expectedCols()}`,
      );
    }
  }

  setThreshold(value: number): void {
    if (value < 0 || value > 1) throw new Error(`threshold ${value} not in [0, 1]`);
    this.threshold = value;
    this.thresholdDirty = true;
  }

  /** Start a composition from a seeded (or zero) latent draw. */
  async seedRandom(seed?: number): Promise<void> {
    const session = await this.api.createSession({
      seed,
      threshold: this.threshold,
    });
    await this.adopt(session.id, session.window, session.threshold);
  }

  /** Start from the first window's worth of an uploaded file's roll,
   *  zero-padded on the right when the file is shorter. */
  async seedFromIngest(ingest: MidiIngest): Promise<void> {
    const w = this.info.window_cols;
    const nPitches = ingest.pitch_hi - ingest.pitch_lo + 1;
    const full = rleToGrid(ingest.cells, nPitches, ingest.n_cols);
    let window = full.slice(0, Math.min(w, full.nCols));
    if (window.nCols < w) {
      window = window.concat(new Grid(window.nPitches, w - window.nCols));
    }
    const session = await this.api.createSession({
      window: gridToRle(window),
      threshold: this.threshold,
    });
    await this.adopt(session.id, session.window, session.threshold);
  }

  private async adopt(id: string, windowRle: [number, number, number][], threshold: number): Promise<void> {
    this.sessionId = id;
    this.threshold = threshold;
    this.thresholdDirty = false;
    this.stepsTaken = 0;
    this.roll = rleToGrid(windowRle, this.info.n_pitches, this.info.window_cols);
    this.checkColumnCount();
    const latent = await this.api.encode(windowRle);
    this.sliders.rankFrom(latent.mu);
  }

  /** Append one stride of server-generated columns; returns them for preview. */
  async step(): Promise<Grid> {
    if (!this.sessionId) throw new Error("no active session");
    if (this.stepping) throw new Error("a step is already in flight");
    this.stepping = true;
    try {
      const options: { latent_delta?: number[]; threshold?: number } = {};
      const delta = this.sliders.deltaVector();
      if (delta) options.latent_delta = delta;
      if (this.thresholdDirty) options.threshold = this.threshold;

      let result: StepResult;
      try {
        result = await this.api.step(this.sessionId, options);
      } catch (err) {
        if (err instanceof ApiError && err.status === 404) {
          throw new StaleSessionError(`session ${this.sessionId} is gone`);
        }
        throw err;
      }

      const newCols = rleToGrid(
        result.new_cols,
        this.info.n_pitches,
        this.info.stride_cols,
      );
      this.roll = this.roll.concat(newCols);
      this.stepsTaken = result.step;
      this.threshold = result.threshold;
      this.thresholdDirty = false;
      this.checkColumnCount();
      this.sliders.afterStep(result.latent.mu);
      return newCols;
    } finally {
      this.stepping = false;
    }
  }

  async exportMidi(): Promise<ArrayBuffer> {
    if (!this.sessionId) throw new Error("no active session");
    return this.api.exportMidi(this.sessionId);
  }
}
