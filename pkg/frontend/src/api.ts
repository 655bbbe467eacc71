/** Thin fetch client for the task service HTTP API. */

import type {
  AnnotationRecordData,
  EntityData,
  Protocol,
  SubmitResponse,
  TaskResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}

export class TaskServiceClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.url(path), init);
    if (!response.ok) {
      const body = await response.text();
      throw new ApiError(`${path}: ${response.status} ${body}`, response.status);
    }
    return (await response.json()) as T;
  }

  async health(): Promise<{ status: string; documents: number }> {
    return this.request("/api/health");
  }

  async nextTask(annotator: string, protocol?: Protocol): Promise<TaskResponse> {
    const params = new URLSearchParams({ annotator });
    if (protocol) params.set("protocol", protocol);
    return this.request(`/api/task?${params}`);
  }

  /** Used both for per-action draft sync and for the final submission. */
  async submitAnnotation(record: AnnotationRecordData): Promise<SubmitResponse> {
    return this.request("/api/annotation", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(record),
    });
  }

  async addEntity(annotatorId: string, documentId: string, name: string): Promise<EntityData> {
    return this.request("/api/entity", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ annotator_id: annotatorId, document_id: documentId, name }),
    });
  }
}
