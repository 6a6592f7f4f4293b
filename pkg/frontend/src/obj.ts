/** Parser for the service's OBJ mesh export: v/f lines, panel groups, and
 * the seam-pair comment records. */

export interface MeshData {
  vertices: Float64Array; // 3 * n
  faces: Uint32Array; // 3 * m, zero-based
  facePanel: string[];
  seamBands: Array<Array<[number, number]>>;
}

export function parseObj(text: string): MeshData {
  const verts: number[] = [];
  const faces: number[] = [];
  const facePanel: string[] = [];
  const seamBands: Array<Array<[number, number]>> = [];
  let group = "";
  for (const line of text.split("\n")) {
    const parts = line.trim().split(/\s+/);
    if (parts[0] === "v") {
      verts.push(Number(parts[1]), Number(parts[2]), Number(parts[3]));
    } else if (parts[0] === "g") {
      group = parts[1] ?? "";
    } else if (parts[0] === "f") {
      for (let k = 1; k <= 3; k++) {
        faces.push(Number(parts[k].split("/")[0]) - 1);
      }
      facePanel.push(group.startsWith("panel_") ? group.slice(6) : "");
    } else if (parts[0] === "#" && parts[1] === "seam") {
      const pairs: Array<[number, number]> = [];
      for (const token of parts.slice(3)) {
        const [a, b] = token.split(":");
        pairs.push([Number(a) - 1, Number(b) - 1]);
      }
      seamBands.push(pairs);
    }
  }
  return {
    vertices: Float64Array.from(verts),
    faces: Uint32Array.from(faces),
    facePanel,
    seamBands,
  };
}

export interface PanelMask {
  id: string;
  height: number;
  width: number;
  pitch: number;
  originX: number;
  originY: number;
  grid: Uint8Array; // height * width, row-major
}

/** Parse the binary map container (SEWKMAP1): per-panel masks plus their
 * panel-to-map transforms. Positions are skipped; the editor only draws
 * the 2D panel shapes. */
export function parseMapContainer(buffer: ArrayBuffer): PanelMask[] {
  const view = new DataView(buffer);
  const magic = new TextDecoder().decode(new Uint8Array(buffer, 0, 8));
  if (magic !== "SEWKMAP1") {
    throw new Error(`not a map container (magic ${magic})`);
  }
  const count = view.getUint32(8, true);
  const height = view.getUint32(12, true);
  const width = view.getUint32(16, true);
  const pitch = view.getFloat64(20, true);
  let off = 28;
  const nbits = Math.ceil((height * width) / 8);
  const out: PanelMask[] = [];
  for (let p = 0; p < count; p++) {
    const idLen = view.getUint16(off, true);
    off += 2;
    const id = new TextDecoder().decode(new Uint8Array(buffer, off, idLen));
    off += idLen;
    const originX = view.getFloat64(off, true);
    const originY = view.getFloat64(off + 8, true);
    off += 16;
    const packed = new Uint8Array(buffer, off, nbits);
    off += nbits;
    const grid = new Uint8Array(height * width);
    for (let i = 0; i < height * width; i++) {
      grid[i] = (packed[i >> 3] >> (7 - (i & 7))) & 1;
    }
    off += height * width * 3 * 4; // skip float32 positions
    out.push({ id, height, width, pitch, originX, originY, grid });
  }
  return out;
}
