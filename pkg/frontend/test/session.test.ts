import { describe, expect, it } from "vitest";

import { EditorSession, debounce } from "../src/session.js";
import type { EditOp } from "../src/api.js";

const E0 = '{"format":"sewkit-embedding/1","coefficients":[[0,0]]}';
const E1 = '{"format":"sewkit-embedding/1","coefficients":[[1,0]]}';
const E2 = '{"format":"sewkit-embedding/1","coefficients":[[1,2]]}';

const editA: EditOp[] = [{ op: "set", group: "g", index: 0, value: 1 }];
const editB: EditOp[] = [{ op: "set", group: "g", index: 1, value: 2 }];

describe("EditorSession", () => {
  it("starts at the initial embedding", () => {
    const s = new EditorSession(E0, {});
    expect(s.current).toBe(E0);
    expect(s.canUndo).toBe(false);
  });

  it("undo restores exact bytes", () => {
    const s = new EditorSession(E0, {});
    s.commit(editA, E1);
    s.commit(editB, E2);
    expect(s.current).toBe(E2);
    expect(s.undo()).toBe(E1);
    expect(s.undo()).toBe(E0);
    expect(s.undo()).toBeNull();
  });

  it("redo round-trips losslessly", () => {
    const s = new EditorSession(E0, {});
    s.commit(editA, E1);
    s.undo();
    expect(s.redo()).toBe(E1);
    expect(s.current).toBe(E1);
  });

  it("a new commit clears the redo stack", () => {
    const s = new EditorSession(E0, {});
    s.commit(editA, E1);
    s.undo();
    s.commit(editB, E2);
    expect(s.canRedo).toBe(false);
    expect(s.current).toBe(E2);
  });

  it("keeps the edit log in order for replay", () => {
    const s = new EditorSession(E0, {});
    s.commit(editA, E1);
    s.commit(editB, E2);
    expect(s.editLog()).toEqual([editA, editB]);
  });
});

describe("debounce", () => {
  it("fires once with the last arguments", async () => {
    const calls: number[] = [];
    const f = debounce((x: number) => calls.push(x), 20);
    f(1);
    f(2);
    f(3);
    await new Promise((r) => setTimeout(r, 60));
    expect(calls).toEqual([3]);
  });
});
