import { describe, expect, it } from "vitest";
import {
  PIN_COUNT,
  cellColor,
  gridCells,
  hoverReadout,
  renderGrid,
  type CellView,
} from "../src/grid.js";

const STROKE = 10;

function stubViews(count = PIN_COUNT): CellView[] {
  return Array.from({ length: count }, () => ({
    bar: { style: { height: "", backgroundColor: "" } },
    label: { textContent: null as string | null },
  }));
}

describe("gridCells", () => {
  it("renders the all-zero frame flat with 0.0 readouts", () => {
    const cells = gridCells(new Array(PIN_COUNT).fill(0), STROKE);
    expect(cells).toHaveLength(PIN_COUNT);
    for (const cell of cells) {
      expect(cell.fraction).toBe(0);
      expect(cell.label).toBe("0.0");
    }
  });

  it("puts a full-stroke center pin at full visual extent", () => {
    const heights = new Array(PIN_COUNT).fill(0);
    heights[12] = STROKE;
    const cells = gridCells(heights, STROKE);
    expect(cells[12].fraction).toBe(1);
    expect(cells[12].row).toBe(2);
    expect(cells[12].col).toBe(2);
    for (const cell of cells) {
      if (cell.pin !== 12) expect(cell.fraction).toBe(0);
    }
  });

  it("clamps the visual extent to the stroke range", () => {
    const heights = new Array(PIN_COUNT).fill(0);
    heights[0] = STROKE * 2;
    heights[1] = -3;
    const cells = gridCells(heights, STROKE);
    expect(cells[0].fraction).toBe(1);
    expect(cells[1].fraction).toBe(0);
    expect(cells[1].label).toBe("-3.0"); // readout still shows the reported value
  });

  it("is pure: the same frame yields identical cells", () => {
    const heights = Array.from({ length: PIN_COUNT }, (_, i) => (i * 0.37) % STROKE);
    expect(gridCells(heights, STROKE)).toEqual(gridCells(heights, STROKE));
  });

  it("rejects frames that are not 25 pins and non-positive strokes", () => {
    expect(() => gridCells([1, 2, 3], STROKE)).toThrow(/expected 25/);
    expect(() => gridCells(new Array(PIN_COUNT).fill(0), 0)).toThrow(/stroke/);
  });
});

describe("renderGrid", () => {
  it("writes identical DOM-level values for the same frame", () => {
    const heights = Array.from({ length: PIN_COUNT }, (_, i) => (i % 5) * 2.5);
    const first = stubViews();
    const second = stubViews();
    renderGrid(gridCells(heights, STROKE), first);
    renderGrid(gridCells(heights, STROKE), second);
    expect(first).toEqual(second);
    expect(first[4].bar.style.height).toBe("100.0%");
    expect(first[0].bar.style.height).toBe("0.0%");
    expect(first[2].label.textContent).toBe("5.0");
  });

  it("overwrites stale values from a previous frame", () => {
    const views = stubViews();
    const up = new Array(PIN_COUNT).fill(STROKE);
    const down = new Array(PIN_COUNT).fill(0);
    renderGrid(gridCells(up, STROKE), views);
    renderGrid(gridCells(down, STROKE), views);
    for (const view of views) {
      expect(view.bar.style.height).toBe("0.0%");
      expect(view.label.textContent).toBe("0.0");
    }
  });

  it("refuses a cell/view count mismatch", () => {
    expect(() => renderGrid(gridCells(new Array(PIN_COUNT).fill(0), STROKE), stubViews(24)))
      .toThrow(/24/);
  });
});

describe("hover readout", () => {
  it("names the pin by grid position with a two-decimal height", () => {
    const heights = new Array(PIN_COUNT).fill(0);
    heights[12] = 7.125;
    const cells = gridCells(heights, STROKE);
    expect(hoverReadout(cells[12])).toBe("pin (2,2): 7.13 mm");
    expect(hoverReadout(cells[0])).toBe("pin (0,0): 0.00 mm");
  });
});

describe("cellColor", () => {
  it("darkens monotonically as the pin rises", () => {
    expect(cellColor(0)).toBe("hsl(210, 70%, 90%)");
    expect(cellColor(1)).toBe("hsl(210, 70%, 35%)");
    const lightness = (c: string) => Number(/ (\d+)%\)$/.exec(c)![1]);
    let previous = lightness(cellColor(0));
    for (let f = 0.1; f <= 1.0001; f += 0.1) {
      const current = lightness(cellColor(f));
      expect(current).toBeLessThanOrEqual(previous);
      previous = current;
    }
  });
});
