// Thin fetch client for the annotation service.

import type { BatchPayload, Decision, Progress } from "./types.js";

export class ApiError extends Error {
  constructor(
    message: string,
    public status: number,
  ) {
    super(message);
  }
}

export class Client {
  constructor(private base: string = "") {}

  /** Next unlabeled batch, or null when everything is labeled. */
  async nextBatch(maxFrames?: number): Promise<BatchPayload | null> {
    const query = maxFrames ? `?max=${maxFrames}` : "";
    const res = await fetch(`${this.base}/api/batches/next${query}`);
    if (res.status === 204) return null;
    if (!res.ok) throw new ApiError(await res.text(), res.status);
    return (await res.json()) as BatchPayload;
  }

  async submitLabels(batchId: string, decisions: Decision[]): Promise<void> {
    const res = await fetch(`${this.base}/api/batches/${batchId}/labels`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ decisions, annotator: "ui" }),
    });
    if (!res.ok) throw new ApiError(await res.text(), res.status);
  }

  async progress(): Promise<Progress> {
    const res = await fetch(`${this.base}/api/progress`);
    if (!res.ok) throw new ApiError(await res.text(), res.status);
    return (await res.json()) as Progress;
  }

  imageUrl(url: string): string {
    return `${this.base}${url}`;
  }
}
