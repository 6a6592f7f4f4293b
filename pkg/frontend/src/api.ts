/** Typed client for the sewkit editing service.
 *
 * Embedding documents are kept as raw response text everywhere: the service
 * serializes canonically, so byte equality of these strings is the undo and
 * replay invariant of the editor.
 */

export interface EmbeddingDoc {
  format: string;
  groups: string[];
  h: number;
  presence: number[];
  coefficients: number[][];
}

export interface DecodeRef {
  mesh_id: string;
  maps_id: string;
}

export type EditOp =
  | { op: "set"; group: string; index: number; value: number }
  | { op: "swap"; group: string; coefficients: number[]; presence: number };

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
    public codes: string[] = [],
  ) {
    super(message);
  }
}

async function raise(resp: Response): Promise<never> {
  let message = `${resp.status}`;
  let codes: string[] = [];
  try {
    const doc = await resp.json();
    message = doc.error ?? message;
    codes = doc.codes ?? [];
  } catch {
    /* non-JSON error body */
  }
  throw new ApiError(resp.status, message, codes);
}

export class SewkitApi {
  constructor(
    private base: string,
    private fetchImpl: typeof fetch = fetch,
  ) {}

  private async postRaw(path: string, body: unknown, signal?: AbortSignal): Promise<string> {
    const resp = await this.fetchImpl(this.base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
    if (!resp.ok) await raise(resp);
    return resp.text();
  }

  async health(): Promise<{ status: string; groups: string[]; h: number }> {
    const resp = await this.fetchImpl(this.base + "/health");
    if (!resp.ok) await raise(resp);
    return resp.json();
  }

  /** Encode a pattern document; returns the raw embedding text. */
  encode(patternDoc: unknown): Promise<string> {
    return this.postRaw("/encode", patternDoc);
  }

  /** Apply edits to an embedding; returns the raw edited embedding text. */
  edit(embeddingRaw: string, edits: EditOp[]): Promise<string> {
    return this.postRaw("/edit", { embedding: JSON.parse(embeddingRaw), edits });
  }

  interp(sourceRaw: string, targetRaw: string, alpha: number): Promise<string> {
    return this.postRaw("/interp", {
      source: JSON.parse(sourceRaw),
      target: JSON.parse(targetRaw),
      alpha,
    });
  }

  async decode(embeddingRaw: string, patternDoc: unknown, signal?: AbortSignal): Promise<DecodeRef> {
    const text = await this.postRaw(
      "/decode",
      { embedding: JSON.parse(embeddingRaw), pattern: patternDoc },
      signal,
    );
    return JSON.parse(text);
  }

  async mesh(id: string): Promise<string> {
    const resp = await this.fetchImpl(`${this.base}/mesh/${id}`);
    if (!resp.ok) await raise(resp);
    return resp.text();
  }

  async maps(id: string): Promise<ArrayBuffer> {
    const resp = await this.fetchImpl(`${this.base}/maps/${id}`);
    if (!resp.ok) await raise(resp);
    return resp.arrayBuffer();
  }
}

export function parseEmbedding(raw: string): EmbeddingDoc {
  return JSON.parse(raw) as EmbeddingDoc;
}
