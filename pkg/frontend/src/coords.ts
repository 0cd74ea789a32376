/**
 * Canvas-to-grid coordinate mapping. The invariant that matters: a click on
 * the canvas pixel at the center of cell (r, c) posts a prompt at exactly
 * (r, c), for any canvas size that shows the whole grid.
 */

export interface Cell {
  row: number;
  col: number;
}

export function canvasToCell(
  x: number,
  y: number,
  canvasWidth: number,
  canvasHeight: number,
  gridWidth: number,
  gridHeight: number,
): Cell | null {
  if (x < 0 || y < 0 || x >= canvasWidth || y >= canvasHeight) return null;
  const col = Math.min(gridWidth - 1, Math.floor((x / canvasWidth) * gridWidth));
  const row = Math.min(gridHeight - 1, Math.floor((y / canvasHeight) * gridHeight));
  return { row, col };
}

export function cellToCanvasCenter(
  row: number,
  col: number,
  canvasWidth: number,
  canvasHeight: number,
  gridWidth: number,
  gridHeight: number,
): { x: number; y: number } {
  return {
    x: ((col + 0.5) / gridWidth) * canvasWidth,
    y: ((row + 0.5) / gridHeight) * canvasHeight,
  };
}
