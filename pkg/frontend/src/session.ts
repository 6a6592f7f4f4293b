/** Editor session: the current embedding (raw canonical text), the pattern
 * document, the undo/redo stacks, and the edit log.
 *
 * Embeddings only change through service responses; the session never
 * rewrites coefficient values itself. Undo and redo restore the exact bytes
 * the service returned, and replaying the edit log from the initial
 * embedding reproduces the current one byte for byte.
 */

import type { EditOp } from "./api.js";

interface Step {
  embeddingRaw: string;
  edits: EditOp[];
}

export class EditorSession {
  private past: Step[] = [];
  private future: Step[] = [];
  private currentRaw: string;
  readonly initialRaw: string;

  meshId: string | null = null;
  selectedGroup: string | null = null;
  selectedComponent = 0;

  constructor(
    initialEmbeddingRaw: string,
    public patternDoc: unknown,
  ) {
    this.initialRaw = initialEmbeddingRaw;
    this.currentRaw = initialEmbeddingRaw;
  }

  get current(): string {
    return this.currentRaw;
  }

  /** Record a committed edit: the ops sent and the embedding returned. */
  commit(edits: EditOp[], embeddingRaw: string): void {
    this.past.push({ embeddingRaw: this.currentRaw, edits });
    this.currentRaw = embeddingRaw;
    this.future = [];
  }

  get canUndo(): boolean {
    return this.past.length > 0;
  }

  get canRedo(): boolean {
    return this.future.length > 0;
  }

  undo(): string | null {
    const step = this.past.pop();
    if (!step) return null;
    this.future.push({ embeddingRaw: this.currentRaw, edits: step.edits });
    this.currentRaw = step.embeddingRaw;
    return this.currentRaw;
  }

  redo(): string | null {
    const step = this.future.pop();
    if (!step) return null;
    this.past.push({ embeddingRaw: this.currentRaw, edits: step.edits });
    this.currentRaw = step.embeddingRaw;
    return this.currentRaw;
  }

  /** Every committed edit list since the initial embedding, in order. */
  editLog(): EditOp[][] {
    return this.past.map((s) => s.edits);
  }
}

/** Latest-wins guard for in-flight decode requests: starting a new request
 * aborts the pending one, so stale meshes never land. */
export class DecodeGate {
  private controller: AbortController | null = null;

  begin(): AbortSignal {
    this.controller?.abort();
    this.controller = new AbortController();
    return this.controller.signal;
  }

  settle(): void {
    this.controller = null;
  }
}

/** Trailing debounce used by the sliders (150 ms per the design). */
export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  ms = 150,
): (...args: A) => void {
  let timer: ReturnType<typeof setTimeout> | undefined;
  return (...args: A) => {
    clearTimeout(timer);
    timer = setTimeout(() => fn(...args), ms);
  };
}
