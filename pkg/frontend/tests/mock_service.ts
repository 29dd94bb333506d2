/** Deterministic in-test stand-in for the inference service.
 *
 * The arithmetic here plays the server's role; tests assert that every
 * number the UI displays came from these responses, never from UI code.
 */

import type { FeatureDescriptor, PredictionRow, WaterfallStep } from "../src/types";

export const FEATURE_NAMES = [
  "food_waste", "garden_waste", "paper_cardboard", "textiles", "plastics",
  "rubber", "nappies", "metal", "glass", "other", "size_10_15_mm",
  "size_5_10_mm", "size_2_5_mm", "size_lt_2_mm", "fine_fraction",
  "moisture_content", "density_kn_m3",
];

export function schemaFeatures(): FeatureDescriptor[] {
  return FEATURE_NAMES.map((name) => ({
    name,
    unit: name === "density_kn_m3" ? "kN/m^3" : "fraction",
    kind: name === "density_kn_m3" || name === "moisture_content" ? "physical" : "composition-fraction",
    fit_min: name === "density_kn_m3" ? 4.0 : 0.0,
    fit_max: name === "density_kn_m3" ? 10.0 : 0.8,
  }));
}

const FRICTION = { base: 30.0, plastics: 10.0, food_waste: -5.0, density_kn_m3: 0.5 };
const COHESION = { base: 5.0, textiles: 2.0, food_waste: -1.5, plastics: 0.75 };

function predictRow(features: Record<string, number>): PredictionRow {
  const friction =
    FRICTION.base +
    FRICTION.plastics * features.plastics +
    FRICTION.food_waste * features.food_waste +
    FRICTION.density_kn_m3 * features.density_kn_m3;
  const cohesion =
    COHESION.base +
    COHESION.textiles * features.textiles +
    COHESION.food_waste * features.food_waste +
    COHESION.plastics * features.plastics;
  const out = schemaFeatures()
    .filter((d) => features[d.name] < d.fit_min || features[d.name] > d.fit_max)
    .map((d) => d.name);
  return {
    features,
    predictions: { friction_deg: friction, cohesion_kpa: cohesion },
    out_of_range: out,
  };
}

function explainDoc(features: Record<string, number>, target: string) {
  const coeffs: Record<string, number> =
    target === "friction"
      ? { plastics: FRICTION.plastics, food_waste: FRICTION.food_waste, density_kn_m3: FRICTION.density_kn_m3 }
      : { textiles: COHESION.textiles, food_waste: COHESION.food_waste, plastics: COHESION.plastics };
  const base = target === "friction" ? FRICTION.base : COHESION.base;
  const phi = FEATURE_NAMES.map((name) => ({
    name,
    value: features[name],
    phi: (coeffs[name] ?? 0) * features[name],
  }));
  const prediction = base + phi.reduce((acc, e) => acc + e.phi, 0);
  const steps: WaterfallStep[] = [{ label: "base", phi: 0, cumulative: base }];
  let cumulative = base;
  for (const entry of [...phi].sort((a, b) => Math.abs(b.phi) - Math.abs(a.phi))) {
    if (entry.phi === 0) continue;
    cumulative += entry.phi;
    steps.push({ label: entry.name, phi: entry.phi, cumulative });
  }
  return {
    target,
    base_value: base,
    prediction,
    method: "kernel",
    n_samples: 64,
    full_enumeration: false,
    background: { seed: 1, source_size: 5 },
    features: phi,
    waterfall: steps,
    model_sha256: "mock",
  };
}

export interface RecordedCall {
  url: string;
  body: unknown;
  response: unknown;
}

export interface MockOptions {
  failNetworkOnce?: boolean;
  missingFeature?: string;
}

export function installMockFetch(options: MockOptions = {}): RecordedCall[] {
  const calls: RecordedCall[] = [];
  let networkFailed = false;

  globalThis.fetch = (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    if (options.failNetworkOnce && !networkFailed && url.includes("/predict")) {
      networkFailed = true;
      throw new TypeError("fetch failed");
    }
    const respond = (doc: unknown, status = 200) => {
      calls.push({ url, body: init?.body ? JSON.parse(String(init.body)) : null, response: doc });
      return new Response(JSON.stringify(doc), {
        status,
        headers: { "Content-Type": "application/json" },
      });
    };
    if (url.endsWith("/api/v1/schema")) {
      return respond({ features: schemaFeatures(), models: { friction: "mock", cohesion: "mock" } });
    }
    if (url.endsWith("/api/v1/predict")) {
      const body = JSON.parse(String(init!.body)) as {
        features?: Record<string, number>;
        batch?: Record<string, number>[];
      };
      const rows = body.batch ?? [body.features!];
      for (const row of rows) {
        for (const name of FEATURE_NAMES) {
          if (!(name in row)) {
            return respond({ detail: `missing feature '${name}'` }, 400);
          }
        }
        if (options.missingFeature && options.missingFeature in row) {
          return respond({ detail: `missing feature '${options.missingFeature}'` }, 400);
        }
      }
      if (body.batch) {
        return respond({ results: body.batch.map(predictRow), models: { friction: "mock", cohesion: "mock" } });
      }
      return respond({ ...predictRow(body.features!), models: { friction: "mock", cohesion: "mock" } });
    }
    if (url.endsWith("/api/v1/explain")) {
      const body = JSON.parse(String(init!.body)) as {
        features: Record<string, number>;
        target: string;
      };
      return respond(explainDoc(body.features, body.target));
    }
    throw new Error(`unexpected url ${url}`);
  }) as typeof fetch;

  return calls;
}
