/** Editor wiring: load a pattern, edit coefficients with sliders or swap a
 * group block, watch the 3D garment re-decode after every committed edit. */

import { SewkitApi, parseEmbedding, type EditOp } from "./api.js";
import { parseMapContainer, parseObj } from "./obj.js";
import { drawPanels, sliderSpecs } from "./panels.js";
import { DecodeGate, EditorSession, debounce } from "./session.js";
import { MeshViewer } from "./viewer.js";

const api = new SewkitApi("");
const gate = new DecodeGate();

let session: EditorSession | null = null;
let viewer: MeshViewer;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setStatus(text: string, isError = false): void {
  const banner = el<HTMLDivElement>("status");
  banner.textContent = text;
  banner.className = isError ? "status error" : "status";
}

async function refreshViews(): Promise<void> {
  if (!session) return;
  const signal = gate.begin();
  try {
    const ref = await api.decode(session.current, session.patternDoc, signal);
    session.meshId = ref.mesh_id;
    const [objText, mapsBuf] = await Promise.all([api.mesh(ref.mesh_id), api.maps(ref.maps_id)]);
    const mesh = parseObj(objText);
    viewer.setMesh(mesh);
    const masks = parseMapContainer(mapsBuf);
    const stitched = new Set<string>();
    const doc = session.patternDoc as { stitches?: Array<{ a: [string, number]; b: [string, number] }> };
    for (const st of doc.stitches ?? []) {
      stitched.add(st.a[0]);
      stitched.add(st.b[0]);
    }
    drawPanels(el<HTMLCanvasElement>("panels"), masks, stitched);
    setStatus(`mesh ${ref.mesh_id} | ${mesh.vertices.length / 3} vertices`);
  } catch (err) {
    if ((err as Error).name === "AbortError") return;
    setStatus(`decode failed: ${(err as Error).message} (mesh is stale)`, true);
  } finally {
    gate.settle();
  }
}

function rebuildSliders(): void {
  if (!session) return;
  const emb = parseEmbedding(session.current);
  const host = el<HTMLDivElement>("sliders");
  host.textContent = "";
  const live = debounce((label: HTMLSpanElement, value: number) => {
    label.textContent = value.toFixed(2);
  }, 150);
  for (const spec of sliderSpecs(emb.groups, emb.presence, emb.coefficients)) {
    if (spec.index >= 4) continue; // leading components carry most variance
    const row = document.createElement("div");
    row.className = "slider-row";
    const label = document.createElement("label");
    label.textContent = `${spec.group}[${spec.index}]`;
    const value = document.createElement("span");
    value.textContent = spec.value.toFixed(2);
    const input = document.createElement("input");
    input.type = "range";
    input.min = "-300";
    input.max = "300";
    input.step = "0.5";
    input.value = String(spec.value);
    input.addEventListener("input", () => live(value, Number(input.value)));
    input.addEventListener("change", () => {
      void commitEdits([
        { op: "set", group: spec.group, index: spec.index, value: Number(input.value) },
      ]);
    });
    row.append(label, input, value);
    host.append(row);
  }
}

async function commitEdits(edits: EditOp[]): Promise<void> {
  if (!session) return;
  try {
    const edited = await api.edit(session.current, edits);
    session.commit(edits, edited);
    rebuildSliders();
    await refreshViews();
  } catch (err) {
    setStatus(`edit failed: ${(err as Error).message}`, true);
  }
}

async function loadPattern(text: string): Promise<void> {
  try {
    const doc = JSON.parse(text);
    const raw = await api.encode(doc);
    session = new EditorSession(raw, doc);
    rebuildSliders();
    await refreshViews();
  } catch (err) {
    setStatus(`load failed: ${(err as Error).message}`, true);
  }
}

function wire(): void {
  viewer = new MeshViewer(el<HTMLCanvasElement>("viewport"));
  el<HTMLInputElement>("pattern-file").addEventListener("change", async (e) => {
    const file = (e.target as HTMLInputElement).files?.[0];
    if (file) await loadPattern(await file.text());
  });
  el<HTMLButtonElement>("undo").addEventListener("click", async () => {
    if (session?.undo() !== null) {
      rebuildSliders();
      await refreshViews();
    }
  });
  el<HTMLButtonElement>("redo").addEventListener("click", async () => {
    if (session?.redo() !== null) {
      rebuildSliders();
      await refreshViews();
    }
  });
  void api
    .health()
    .then((h) => setStatus(`service ok | groups: ${h.groups.join(", ")}`))
    .catch((err) => setStatus(`service unreachable: ${err.message}`, true));
}

if (typeof document !== "undefined") {
  wire();
}
