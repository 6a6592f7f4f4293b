/** End-to-end editor loop against the real Python service.
 *
 * Builds a tiny dataset/registry/checkpoint through the sewkit CLI (cached
 * in .e2e-artifacts), starts `sewkit serve`, then drives a slider edit:
 * encode -> /edit -> /decode -> /mesh, asserting the returned embedding
 * matches a direct API computation byte for byte and that undo restores the
 * original bytes.
 */

import { type ChildProcess, execFileSync, spawn } from "node:child_process";
import { existsSync, readFileSync } from "node:fs";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { SewkitApi, parseEmbedding, type EditOp } from "../src/api.js";
import { parseMapContainer, parseObj } from "../src/obj.js";
import { EditorSession } from "../src/session.js";

const PYTHON = process.env.SEWKIT_PYTHON ?? "python3";
const ROOT = join(__dirname, "..");
const ART = join(ROOT, ".e2e-artifacts");
const PORT = 8734;

let server: ChildProcess | null = null;
let api: SewkitApi;
let patternDoc: unknown;

function cli(...args: string[]): void {
  execFileSync(PYTHON, ["-m", "sewkit.cli", ...args], {
    cwd: ROOT,
    stdio: "pipe",
    timeout: 600_000,
  });
}

async function waitForHealth(base: string, tries = 120): Promise<void> {
  for (let i = 0; i < tries; i++) {
    try {
      const resp = await fetch(`${base}/health`);
      if (resp.ok) return;
    } catch {
      /* not up yet */
    }
    await new Promise((r) => setTimeout(r, 500));
  }
  throw new Error("service did not come up");
}

beforeAll(async () => {
  if (!existsSync(join(ART, "decoder.ckpt"))) {
    cli("gen-data", "--n", "8", "--seed", "77", "--out", join(ART, "data"));
    cli("fit-pca", "--manifest", join(ART, "data", "manifest.json"),
        "--out", join(ART, "bases.pca"));
    cli("train", "--manifest", join(ART, "data", "manifest.json"),
        "--registry", join(ART, "bases.pca"),
        "--epochs", "4", "--batch", "4", "--lr", "0.05",
        "--out", join(ART, "decoder.ckpt"), "--no-figures");
  }
  server = spawn(
    PYTHON,
    ["-m", "sewkit.cli", "serve",
     "--registry", join(ART, "bases.pca"),
     "--checkpoint", join(ART, "decoder.ckpt"),
     "--bind", `127.0.0.1:${PORT}`],
    { cwd: ROOT, stdio: "ignore" },
  );
  api = new SewkitApi(`http://127.0.0.1:${PORT}`);
  await waitForHealth(`http://127.0.0.1:${PORT}`);
  patternDoc = JSON.parse(readFileSync(join(ART, "data", "sample_0000.pat"), "utf-8"));
}, 600_000);

afterAll(() => {
  server?.kill();
});

describe("editor loop", () => {
  it("slider edit round trip is byte-exact and undo restores it", async () => {
    const initialRaw = await api.encode(patternDoc);
    const session = new EditorSession(initialRaw, patternDoc);

    // pick the first present group, as the slider UI would
    const emb = parseEmbedding(initialRaw);
    const group = emb.groups.find((_, i) => emb.presence[i] === 1);
    expect(group).toBeDefined();
    const edits: EditOp[] = [{ op: "set", group: group!, index: 0, value: 42.5 }];

    // the committed edit goes through POST /edit only
    const editedRaw = await api.edit(session.current, edits);
    session.commit(edits, editedRaw);

    // direct API computation of the same edit must agree byte for byte
    const direct = await api.edit(initialRaw, edits);
    expect(session.current).toBe(direct);

    // decode + fetch geometry for the viewer
    const ref = await api.decode(session.current, patternDoc);
    expect(ref.mesh_id).toMatch(/^[0-9a-f]{16}$/);
    const mesh = parseObj(await api.mesh(ref.mesh_id));
    expect(mesh.vertices.length / 3).toBeGreaterThan(100);
    expect(mesh.faces.length / 3).toBeGreaterThan(100);
    const masks = parseMapContainer(await api.maps(ref.maps_id));
    expect(masks.length).toBeGreaterThan(0);

    // undo restores the exact initial bytes
    expect(session.undo()).toBe(initialRaw);
    expect(session.current).toBe(initialRaw);

    // replaying the edit log from the initial embedding reproduces the
    // edited state byte for byte
    session.redo();
    let replayed = session.initialRaw;
    for (const ops of session.editLog()) {
      replayed = await api.edit(replayed, ops);
    }
    expect(replayed).toBe(session.current);
  }, 120_000);

  it("empty edit echoes byte-identically", async () => {
    const raw = await api.encode(patternDoc);
    expect(await api.edit(raw, [])).toBe(raw);
  }, 60_000);

  it("interpolation endpoints match the source embedding", async () => {
    const raw = await api.encode(patternDoc);
    const other = await api.edit(raw, [
      { op: "set", group: parseEmbedding(raw).groups[1], index: 0, value: -3 },
    ]);
    expect(await api.interp(raw, other, 1.0)).toBe(raw);
  }, 60_000);

  it("validation errors surface with codes", async () => {
    await expect(
      api.encode({ format: "sewkit/1", panels: [], stitches: [] }),
    ).rejects.toMatchObject({ status: 400 });
  }, 60_000);
});
