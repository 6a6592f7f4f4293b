/** 2D panel view: draws the decoded panel masks to scale and highlights
 * stitched edges. Shapes come from the service's map container; nothing is
 * recomputed client-side. */

import type { PanelMask } from "./obj.js";

const PANEL_FILL = "rgba(70, 110, 160, 0.35)";
const PANEL_EDGE = "rgba(40, 70, 110, 0.9)";

export function drawPanels(
  canvas: HTMLCanvasElement,
  masks: PanelMask[],
  stitchedPanels: Set<string>,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (!masks.length) return;

  // lay panels side by side, to scale
  interface Box {
    mask: PanelMask;
    minI: number;
    maxI: number;
    minJ: number;
    maxJ: number;
  }
  const boxes: Box[] = masks.map((mask) => {
    let minI = mask.height;
    let maxI = -1;
    let minJ = mask.width;
    let maxJ = -1;
    for (let i = 0; i < mask.height; i++) {
      for (let j = 0; j < mask.width; j++) {
        if (mask.grid[i * mask.width + j]) {
          minI = Math.min(minI, i);
          maxI = Math.max(maxI, i);
          minJ = Math.min(minJ, j);
          maxJ = Math.max(maxJ, j);
        }
      }
    }
    return { mask, minI, maxI, minJ, maxJ };
  });
  const gapCm = 6;
  const totalW = boxes.reduce((acc, b) => acc + (b.maxJ - b.minJ + 1) * b.mask.pitch + gapCm, 0);
  const maxH = Math.max(...boxes.map((b) => (b.maxI - b.minI + 1) * b.mask.pitch));
  const scale = Math.min((canvas.width - 20) / totalW, (canvas.height - 40) / maxH);

  let xCm = 0;
  for (const b of boxes) {
    const px = b.mask.pitch * scale;
    const x0 = 10 + xCm * scale;
    const y0 = canvas.height - 24;
    ctx.fillStyle = PANEL_FILL;
    for (let i = b.minI; i <= b.maxI; i++) {
      for (let j = b.minJ; j <= b.maxJ; j++) {
        if (b.mask.grid[i * b.mask.width + j]) {
          ctx.fillRect(x0 + (j - b.minJ) * px, y0 - (i - b.minI + 1) * px, px + 0.5, px + 0.5);
        }
      }
    }
    ctx.strokeStyle = stitchedPanels.has(b.mask.id) ? "#e45756" : PANEL_EDGE;
    ctx.lineWidth = stitchedPanels.has(b.mask.id) ? 2 : 1;
    ctx.strokeRect(
      x0 - 1,
      y0 - (b.maxI - b.minI + 1) * px - 1,
      (b.maxJ - b.minJ + 1) * px + 2,
      (b.maxI - b.minI + 1) * px + 2,
    );
    ctx.fillStyle = "#222";
    ctx.font = "11px sans-serif";
    ctx.fillText(b.mask.id, x0, canvas.height - 8);
    xCm += (b.maxJ - b.minJ + 1) * b.mask.pitch + gapCm;
  }
}

export interface SliderSpec {
  group: string;
  index: number;
  value: number;
}

/** Slider rows for every present group: h coefficients each, the handles of
 * the 2D panel editor. */
export function sliderSpecs(
  groups: string[],
  presence: number[],
  coefficients: number[][],
): SliderSpec[] {
  const out: SliderSpec[] = [];
  groups.forEach((g, gi) => {
    if (!presence[gi]) return;
    coefficients[gi].forEach((value, index) => {
      out.push({ group: g, index, value });
    });
  });
  return out;
}
