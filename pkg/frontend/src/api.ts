/** Thin client for the editing service; all pixel math stays server-side. */

import { RecipeDocument } from "./ranges.js";

export interface SessionInfo {
  id: string;
  width: number;
  height: number;
  job: string;
  message: string;
  has_recipe: boolean;
  styles: number;
}

export interface OptimizeRequest {
  mode?: "increase" | "decrease";
  iters?: number;
  seed?: number;
  styles?: number;
}

async function expectOk(response: Response): Promise<Response> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      if (body && typeof body.detail === "string") detail = body.detail;
    } catch {
      // non-JSON error body
    }
    const error = new Error(detail) as Error & { status?: number };
    error.status = response.status;
    throw error;
  }
  return response;
}

export class ServiceClient {
  constructor(private readonly base: string = "") {}

  async createSession(image: Blob, mask: Blob, resizeMask = false): Promise<string> {
    const form = new FormData();
    form.append("image", image, "image.png");
    form.append("mask", mask, "mask.png");
    form.append("resize_mask", String(resizeMask));
    const response = await expectOk(
      await fetch(`${this.base}/sessions`, { method: "POST", body: form }),
    );
    return (await response.json()).id as string;
  }

  async info(sessionId: string): Promise<SessionInfo> {
    const response = await expectOk(await fetch(`${this.base}/sessions/${sessionId}`));
    return response.json();
  }

  async optimize(sessionId: string, options: OptimizeRequest): Promise<void> {
    await expectOk(
      await fetch(`${this.base}/sessions/${sessionId}/optimize`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(options),
      }),
    );
  }

  async params(sessionId: string): Promise<RecipeDocument> {
    const response = await expectOk(await fetch(`${this.base}/sessions/${sessionId}/params`));
    return response.json();
  }

  async patchParams(sessionId: string, patch: object): Promise<void> {
    await expectOk(
      await fetch(`${this.base}/sessions/${sessionId}/params`, {
        method: "PATCH",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(patch),
      }),
    );
  }

  async fetchRender(sessionId: string, alpha: number, maxDim = 512): Promise<Blob> {
    const response = await expectOk(
      await fetch(
        `${this.base}/sessions/${sessionId}/render?alpha=${alpha}&max_dim=${maxDim}`,
      ),
    );
    return response.blob();
  }

  async fetchSaliency(sessionId: string, stage: "before" | "after"): Promise<ArrayBuffer> {
    const response = await expectOk(
      await fetch(`${this.base}/sessions/${sessionId}/saliency?stage=${stage}`),
    );
    return response.arrayBuffer();
  }

  async metrics(sessionId: string): Promise<Record<string, number | null>> {
    const response = await expectOk(await fetch(`${this.base}/sessions/${sessionId}/metrics`));
    return response.json();
  }
}
