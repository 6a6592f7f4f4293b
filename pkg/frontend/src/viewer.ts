/** Dependency-free 3D wireframe viewer with orbit controls.
 *
 * Meshes come exclusively from GET /mesh/{id}; this module only projects
 * and draws. Seam bands are overdrawn in per-band colors.
 */

import type { MeshData } from "./obj.js";

const SEAM_COLORS = ["#e45756", "#f58518", "#54a24b", "#4c78a8", "#b279a2", "#eeca3b"];

export interface Orbit {
  theta: number;
  phi: number;
  distance: number;
  center: [number, number, number];
}

export function fitOrbit(mesh: MeshData): Orbit {
  const v = mesh.vertices;
  const lo = [Infinity, Infinity, Infinity];
  const hi = [-Infinity, -Infinity, -Infinity];
  for (let i = 0; i < v.length; i += 3) {
    for (let k = 0; k < 3; k++) {
      lo[k] = Math.min(lo[k], v[i + k]);
      hi[k] = Math.max(hi[k], v[i + k]);
    }
  }
  const span = Math.max(hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2], 1);
  return {
    theta: 0.5,
    phi: 0.25,
    distance: 1.8 * span,
    center: [(lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2, (lo[2] + hi[2]) / 2],
  };
}

export function project(
  orbit: Orbit,
  width: number,
  height: number,
  v: Float64Array,
): Float64Array {
  const ct = Math.cos(orbit.theta);
  const st = Math.sin(orbit.theta);
  const cp = Math.cos(orbit.phi);
  const sp = Math.sin(orbit.phi);
  const scale = (0.9 * Math.min(width, height)) / orbit.distance;
  const out = new Float64Array((v.length / 3) * 2);
  for (let i = 0, j = 0; i < v.length; i += 3, j += 2) {
    const x = v[i] - orbit.center[0];
    const y = v[i + 1] - orbit.center[1];
    const z = v[i + 2] - orbit.center[2];
    // yaw about y, then pitch about x
    const x1 = ct * x + st * z;
    const z1 = -st * x + ct * z;
    const y1 = cp * y - sp * z1;
    out[j] = width / 2 + x1 * scale;
    out[j + 1] = height / 2 - y1 * scale;
  }
  return out;
}

export class MeshViewer {
  orbit: Orbit = { theta: 0.5, phi: 0.25, distance: 100, center: [0, 0, 0] };
  private mesh: MeshData | null = null;
  private dragging = false;
  private lastX = 0;
  private lastY = 0;

  constructor(private canvas: HTMLCanvasElement) {
    canvas.addEventListener("pointerdown", (e) => {
      this.dragging = true;
      this.lastX = e.clientX;
      this.lastY = e.clientY;
      canvas.setPointerCapture(e.pointerId);
    });
    canvas.addEventListener("pointermove", (e) => {
      if (!this.dragging) return;
      this.orbit.theta += (e.clientX - this.lastX) * 0.01;
      this.orbit.phi = Math.max(
        -1.4,
        Math.min(1.4, this.orbit.phi + (e.clientY - this.lastY) * 0.01),
      );
      this.lastX = e.clientX;
      this.lastY = e.clientY;
      this.draw();
    });
    canvas.addEventListener("pointerup", () => {
      this.dragging = false;
    });
    canvas.addEventListener(
      "wheel",
      (e) => {
        e.preventDefault();
        this.orbit.distance *= Math.exp(e.deltaY * 0.001);
        this.draw();
      },
      { passive: false },
    );
  }

  setMesh(mesh: MeshData): void {
    const keepView = this.mesh !== null;
    const old = this.orbit;
    this.mesh = mesh;
    this.orbit = keepView
      ? { ...fitOrbit(mesh), theta: old.theta, phi: old.phi, distance: old.distance }
      : fitOrbit(mesh);
    this.draw();
  }

  draw(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const { width, height } = this.canvas;
    ctx.clearRect(0, 0, width, height);
    if (!this.mesh) return;
    const pts = project(this.orbit, width, height, this.mesh.vertices);
    ctx.strokeStyle = "rgba(40, 40, 60, 0.45)";
    ctx.lineWidth = 0.5;
    ctx.beginPath();
    const f = this.mesh.faces;
    for (let i = 0; i < f.length; i += 3) {
      const a = f[i] * 2;
      const b = f[i + 1] * 2;
      const c = f[i + 2] * 2;
      ctx.moveTo(pts[a], pts[a + 1]);
      ctx.lineTo(pts[b], pts[b + 1]);
      ctx.lineTo(pts[c], pts[c + 1]);
      ctx.closePath();
    }
    ctx.stroke();
    this.mesh.seamBands.forEach((band, si) => {
      ctx.strokeStyle = SEAM_COLORS[si % SEAM_COLORS.length];
      ctx.lineWidth = 2;
      ctx.beginPath();
      for (const [a, b] of band) {
        ctx.moveTo(pts[a * 2], pts[a * 2 + 1]);
        ctx.lineTo(pts[b * 2], pts[b * 2 + 1]);
      }
      ctx.stroke();
    });
  }
}
