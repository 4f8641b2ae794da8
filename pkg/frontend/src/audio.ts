// Audio preview of appended columns with plain oscillators. Fidelity is a
// non-goal; consecutive on-cells merge into one sustained note.

import type { Grid } from "./rle";

export interface PreviewNote {
  pitch: number; // MIDI number
  startMs: number;
  durationMs: number;
}

export function gridToNotes(grid: Grid, pitchLo: number, gridMs: number): PreviewNote[] {
  const notes: PreviewNote[] = [];
  for (let r = 0; r < grid.nPitches; r++) {
    let runStart = -1;
    for (let c = 0; c <= grid.nCols; c++) {
      const on = c < grid.nCols && grid.at(r, c) !== 0;
      if (on && runStart < 0) runStart = c;
      if (!on && runStart >= 0) {
        notes.push({
          pitch: pitchLo + r,
          startMs: runStart * gridMs,
          durationMs: (c - runStart) * gridMs,
        });
        runStart = -1;
      }
    }
  }
  notes.sort((a, b) => a.startMs - b.startMs || a.pitch - b.pitch);
  return notes;
}

export function midiToHz(pitch: number): number {
  return 440 * Math.pow(2, (pitch - 69) / 12);
}

export class Player {
  private ctx: AudioContext | null = null;

  private context(): AudioContext {
    if (!this.ctx) this.ctx = new AudioContext();
    return this.ctx;
  }

  play(notes: PreviewNote[]): void {
    if (notes.length === 0) return;
    const ctx = this.context();
    void ctx.resume();
    const t0 = ctx.currentTime + 0.05;
    for (const note of notes) {
      const osc = ctx.createOscillator();
      const gain = ctx.createGain();
      osc.type = "triangle";
      osc.frequency.value = midiToHz(note.pitch);
      const start = t0 + note.startMs / 1000;
      const stop = start + note.durationMs / 1000;
      gain.gain.setValueAtTime(0.12, start);
      gain.gain.setTargetAtTime(0, stop - 0.03, 0.01);
      osc.connect(gain).connect(ctx.destination);
      osc.start(start);
      osc.stop(stop + 0.05);
    }
  }
}
