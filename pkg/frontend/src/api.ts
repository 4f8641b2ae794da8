// Typed client for the composer service JSON API. All model math happens
// server-side; this file only shapes requests and decodes responses.

import type { RleTriple } from "./rle";

export interface ModelInfo {
  input_dim: number;
  hidden_dim: number;
  latent_dim: number;
  window_seconds: number;
  window_cols: number;
  stride_cols: number;
  grid_ms: number;
  pitch_lo: number;
  pitch_hi: number;
  n_pitches: number;
  beta: number;
  threshold: number;
}

export interface Latent {
  mu: number[];
  logvar: number[];
}

export interface SessionInfo {
  id: string;
  window: RleTriple[];
  threshold: number;
  step: number;
}

export interface StepResult {
  new_cols: RleTriple[];
  latent: Latent;
  step: number;
  threshold: number;
}

export interface MidiIngest {
  pitch_lo: number;
  pitch_hi: number; // band matches the served model; rows = hi - lo + 1
  n_cols: number;
  cells: RleTriple[];
  dropped_notes: number;
  warnings: string[];
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

export type FetchLike = typeof fetch;

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetchImpl(this.base + path, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        if (typeof body?.error === "string") detail = body.error;
      } catch {
        // keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return response;
  }

  private async postJson(path: string, payload: unknown): Promise<Response> {
    return this.request(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  async modelInfo(): Promise<ModelInfo> {
    return (await this.request("/api/model")).json();
  }

  async encode(window: RleTriple[]): Promise<Latent> {
    return (await this.postJson("/api/encode", { window })).json();
  }

  async createSession(options: {
    window?: RleTriple[];
    seed?: number;
    threshold?: number;
  }): Promise<SessionInfo> {
    return (await this.postJson("/api/session", options)).json();
  }

  async step(
    sessionId: string,
    options: { latent_delta?: number[]; threshold?: number } = {},
  ): Promise<StepResult> {
    return (await this.postJson(`/api/session/${sessionId}/step`, options)).json();
  }

  async exportMidi(sessionId: string): Promise<ArrayBuffer> {
    const response = await this.request(`/api/session/${sessionId}/export`);
    return response.arrayBuffer();
  }

  async uploadMidi(data: ArrayBuffer | Blob, name = "upload.mid"): Promise<MidiIngest> {
    const form = new FormData();
    const blob = data instanceof Blob ? data : new Blob([data], { type: "audio/midi" });
    form.append("file", blob, name);
    return (await this.request("/api/midi", { method: "POST", body: form })).json();
  }
}
