export const GRID_ROWS = 5;
export const GRID_COLS = 5;
export const PIN_COUNT = GRID_ROWS * GRID_COLS;
export const DEFAULT_STROKE_MM = 10;

export interface GridCell {
  pin: number;
  row: number;
  col: number;
  heightMm: number;
  /** height/stroke clamped to [0, 1]; drives the visual extent */
  fraction: number;
  label: string;
}

/** Pure view model: the same frame always yields the same cells. */
export function gridCells(heights: readonly number[], strokeMm: number): GridCell[] {
  if (heights.length !== PIN_COUNT) {
    throw new Error(`expected ${PIN_COUNT} heights, got ${heights.length}`);
  }
  if (!(strokeMm > 0)) {
    throw new Error(`stroke must be positive, got ${strokeMm}`);
  }
  return heights.map((heightMm, pin) => {
    const fraction = Math.min(1, Math.max(0, heightMm / strokeMm));
    return {
      pin,
      row: Math.floor(pin / GRID_COLS),
      col: pin % GRID_COLS,
      heightMm,
      fraction,
      label: heightMm.toFixed(1),
    };
  });
}

export function hoverReadout(cell: GridCell): string {
  return `pin (${cell.row},${cell.col}): ${cell.heightMm.toFixed(2)} mm`;
}

/** What renderGrid writes per cell; a plain object in tests, DOM nodes in the app. */
export interface CellView {
  bar: { style: { height: string; backgroundColor: string } };
  label: { textContent: string | null };
}

export function cellColor(fraction: number): string {
  // darker and bluer as the pin rises: elevation cue on a flat page
  const light = Math.round(90 - fraction * 55);
  return `hsl(210, 70%, ${light}%)`;
}

export function renderGrid(cells: readonly GridCell[], views: readonly CellView[]): void {
  if (cells.length !== views.length) {
    throw new Error(`have ${views.length} cell views for ${cells.length} cells`);
  }
  for (let i = 0; i < cells.length; i++) {
    const cell = cells[i];
    const view = views[i];
    view.bar.style.height = `${(cell.fraction * 100).toFixed(1)}%`;
    view.bar.style.backgroundColor = cellColor(cell.fraction);
    view.label.textContent = cell.label;
  }
}
