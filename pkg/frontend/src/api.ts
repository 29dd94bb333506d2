/** Thin typed client for the inference service. */

import type {
  BatchResponse,
  ExplainResponse,
  PredictResponse,
  SchemaResponse,
  Target,
} from "./types";

export class ApiFailure extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(detail);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(url, init);
  let body: unknown = null;
  try {
    body = await resp.json();
  } catch {
    // non-JSON body falls through to the status check below
  }
  if (!resp.ok) {
    const detail =
      body && typeof body === "object" && "detail" in body
        ? String((body as { detail: unknown }).detail)
        : `request failed with status ${resp.status}`;
    throw new ApiFailure(resp.status, detail);
  }
  return body as T;
}

export function fetchSchema(): Promise<SchemaResponse> {
  return request<SchemaResponse>("/api/v1/schema");
}

export function predictOne(
  features: Record<string, number>,
  signal?: AbortSignal,
): Promise<PredictResponse> {
  return request<PredictResponse>("/api/v1/predict", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ features }),
    signal,
  });
}

export function predictBatch(
  rows: Record<string, number>[],
  signal?: AbortSignal,
): Promise<BatchResponse> {
  return request<BatchResponse>("/api/v1/predict", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ batch: rows }),
    signal,
  });
}

export function explain(
  features: Record<string, number>,
  target: Target,
  signal?: AbortSignal,
): Promise<ExplainResponse> {
  return request<ExplainResponse>("/api/v1/explain", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ features, target, method: "kernel" }),
    signal,
  });
}
