// Binary windows travel as run-length triples [pitchRow, startCol, length]
// over an (nPitches, nCols) grid, rows ascending, runs left to right.

export type RleTriple = [number, number, number];

export class Grid {
  readonly nPitches: number;
  readonly nCols: number;
  readonly cells: Uint8Array; // row-major, index = row * nCols + col

  constructor(nPitches: number, nCols: number, cells?: Uint8Array) {
    if (nPitches < 1 || nCols < 0) {
      throw new Error(`bad grid shape ${nPitches}x${nCols}`);
    }
    this.nPitches = nPitches;
    this.nCols = nCols;
    this.cells = cells ?? new Uint8Array(nPitches * nCols);
    if (this.cells.length !== nPitches * nCols) {
      throw new Error(
        `cell buffer ${this.cells.length} != ${nPitches}x${nCols}`,
      );
    }
  }

  at(row: number, col: number): number {
    return this.cells[row * this.nCols + col];
  }

  set(row: number, col: number, value: 0 | 1): void {
    this.cells[row * this.nCols + col] = value;
  }

  /** Columns [from, to) as a new grid. */
  slice(from: number, to: number): Grid {
    const out = new Grid(this.nPitches, to - from);
    for (let r = 0; r < this.nPitches; r++) {
      for (let c = from; c < to; c++) {
        out.cells[r * out.nCols + (c - from)] = this.at(r, c);
      }
    }
    return out;
  }

  /** This grid followed by `other` along the column axis. */
  concat(other: Grid): Grid {
    if (other.nPitches !== this.nPitches) {
      throw new Error(`pitch count ${other.nPitches} != ${this.nPitches}`);
    }
    const out = new Grid(this.nPitches, this.nCols + other.nCols);
    for (let r = 0; r < this.nPitches; r++) {
      out.cells.set(
        this.cells.subarray(r * this.nCols, (r + 1) * this.nCols),
        r * out.nCols,
      );
      out.cells.set(
        other.cells.subarray(r * other.nCols, (r + 1) * other.nCols),
        r * out.nCols + this.nCols,
      );
    }
    return out;
  }

  equals(other: Grid): boolean {
    return (
      this.nPitches === other.nPitches &&
      this.nCols === other.nCols &&
      this.cells.every((v, i) => v === other.cells[i])
    );
  }

  /** Index just past the last column containing any sounding cell; 0 if silent. */
  lastSoundingCol(): number {
    for (let c = this.nCols - 1; c >= 0; c--) {
      for (let r = 0; r < this.nPitches; r++) {
        if (this.at(r, c)) return c + 1;
      }
    }
    return 0;
  }
}

export function rleToGrid(
  triples: RleTriple[],
  nPitches: number,
  nCols: number,
): Grid {
  const grid = new Grid(nPitches, nCols);
  for (const [row, start, len] of triples) {
    if (len < 1) throw new Error(`run length ${len} < 1`);
    if (row < 0 || row >= nPitches || start < 0 || start + len > nCols) {
      throw new Error(`run [${row}, ${start}, ${len}] outside ${nPitches}x${nCols}`);
    }
    for (let c = start; c < start + len; c++) grid.set(row, c, 1);
  }
  return grid;
}

export function gridToRle(grid: Grid): RleTriple[] {
  const triples: RleTriple[] = [];
  for (let r = 0; r < grid.nPitches; r++) {
    let start = -1;
    for (let c = 0; c <= grid.nCols; c++) {
      const on = c < grid.nCols && grid.at(r, c) !== 0;
      if (on && start < 0) start = c;
      if (!on && start >= 0) {
        triples.push([r, start, c - start]);
        start = -1;
      }
    }
  }
  return triples;
}
