// Canvas painter for the rendered roll. Pure drawing: the grid is the only
// source of truth, so the canvas pixel width is a direct function of it.

import type { Grid } from "./rle";

export const CELL_W = 7;
export const CELL_H = 9;

export interface PaintOptions {
  seedCols: number; // tinted differently from generated columns
  playheadCol?: number;
}

export function canvasSize(grid: Grid): { width: number; height: number } {
  return { width: grid.nCols * CELL_W, height: grid.nPitches * CELL_H };
}

export function paintRoll(
  canvas: HTMLCanvasElement,
  grid: Grid,
  options: PaintOptions,
): void {
  const { width, height } = canvasSize(grid);
  canvas.width = width;
  canvas.height = height;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;

  ctx.fillStyle = "#14161c";
  ctx.fillRect(0, 0, width, height);

  ctx.fillStyle = "#1d2330";
  ctx.fillRect(0, 0, options.seedCols * CELL_W, height);

  for (let c = 0; c < grid.nCols; c++) {
    for (let r = 0; r < grid.nPitches; r++) {
      if (!grid.at(r, c)) continue;
      // row 0 is the lowest pitch; draw it at the bottom
      const y = (grid.nPitches - 1 - r) * CELL_H;
      ctx.fillStyle = c < options.seedCols ? "#7aa2f7" : "#9ece6a";
      ctx.fillRect(c * CELL_W + 1, y + 1, CELL_W - 2, CELL_H - 2);
    }
  }

  ctx.strokeStyle = "#3b4261";
  ctx.beginPath();
  for (let c = 10; c < grid.nCols; c += 10) {
    ctx.moveTo(c * CELL_W + 0.5, 0);
    ctx.lineTo(c * CELL_W + 0.5, height);
  }
  ctx.stroke();

  if (options.playheadCol !== undefined && options.playheadCol < grid.nCols) {
    ctx.fillStyle = "rgba(255, 200, 80, 0.25)";
    ctx.fillRect(options.playheadCol * CELL_W, 0, CELL_W, height);
  }
}
