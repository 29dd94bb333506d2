/** Wire types for the inference-service JSON API (the UI's only data source). */

export interface FeatureDescriptor {
  name: string;
  unit: string;
  kind: string;
  fit_min: number;
  fit_max: number;
}

export interface SchemaResponse {
  features: FeatureDescriptor[];
  models: Record<string, string | null>;
}

export interface PredictionRow {
  features: Record<string, number>;
  predictions: { friction_deg: number; cohesion_kpa: number };
  out_of_range: string[];
}

export interface PredictResponse extends PredictionRow {
  models: Record<string, string | null>;
}

export interface BatchResponse {
  results: PredictionRow[];
  models: Record<string, string | null>;
}

export interface PhiEntry {
  name: string;
  value: number;
  phi: number;
}

export interface WaterfallStep {
  label: string;
  phi: number;
  cumulative: number;
}

export interface ExplainResponse {
  target: string;
  base_value: number;
  prediction: number;
  method: string;
  n_samples: number | null;
  full_enumeration: boolean;
  background: Record<string, unknown>;
  features: PhiEntry[];
  waterfall: WaterfallStep[];
  model_sha256: string | null;
}

export type Target = "friction" | "cohesion";

export interface ApiError {
  status: number;
  detail: string;
}
