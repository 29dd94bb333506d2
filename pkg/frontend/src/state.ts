/** Form state: raw text per feature, dirty flags, validation, share links.
 *
 * Raw strings are the source of truth so share links restore the form
 * exactly as typed. Validation never blocks out-of-fit-range values; those
 * only produce a visible warning (what-if exploration extrapolates).
 */

import type { FeatureDescriptor, Target } from "./types";

export interface FieldState {
  raw: string;
  dirty: boolean;
  error: string | null;
  warning: string | null;
}

export interface FormState {
  order: string[];
  descriptors: Map<string, FeatureDescriptor>;
  fields: Map<string, FieldState>;
  target: Target;
}

/** Showcase defaults used when the service exposes the standard schema. */
export const EXAMPLE_VALUES: Record<string, string> = {
  food_waste: "0.31",
  garden_waste: "0.01",
  paper_cardboard: "0.05",
  textiles: "0.08",
  plastics: "0.35",
  rubber: "0.01",
  nappies: "0.02",
  metal: "0.01",
  glass: "0.01",
  other: "0.05",
  size_10_15_mm: "0.15",
  size_5_10_mm: "0.15",
  size_2_5_mm: "0.12",
  size_lt_2_mm: "0.10",
  fine_fraction: "0.08",
  moisture_content: "0.55",
  density_kn_m3: "7.23",
};

function validate(descriptor: FeatureDescriptor, raw: string): Pick<FieldState, "error" | "warning"> {
  if (raw.trim() === "") {
    return { error: "required", warning: null };
  }
  const value = Number(raw);
  if (!Number.isFinite(value)) {
    return { error: "must be a number", warning: null };
  }
  if (value < descriptor.fit_min || value > descriptor.fit_max) {
    return {
      error: null,
      warning: `outside fit range [${descriptor.fit_min}, ${descriptor.fit_max}]: prediction extrapolates`,
    };
  }
  return { error: null, warning: null };
}

export function initForm(descriptors: FeatureDescriptor[], target: Target = "friction"): FormState {
  const state: FormState = {
    order: descriptors.map((d) => d.name),
    descriptors: new Map(descriptors.map((d) => [d.name, d])),
    fields: new Map(),
    target,
  };
  for (const d of descriptors) {
    const raw = EXAMPLE_VALUES[d.name] ?? String(d.fit_min);
    state.fields.set(d.name, { raw, dirty: false, ...validate(d, raw) });
  }
  return state;
}

export function setField(state: FormState, name: string, raw: string): void {
  const descriptor = state.descriptors.get(name);
  if (!descriptor) {
    throw new Error(`unknown field ${name}`);
  }
  state.fields.set(name, { raw, dirty: true, ...validate(descriptor, raw) });
}

export function firstError(state: FormState): { name: string; error: string } | null {
  for (const name of state.order) {
    const field = state.fields.get(name)!;
    if (field.error) {
      return { name, error: field.error };
    }
  }
  return null;
}

/** Numeric view of the form; only valid when firstError() is null. */
export function formValues(state: FormState): Record<string, number> {
  const values: Record<string, number> = {};
  for (const name of state.order) {
    values[name] = Number(state.fields.get(name)!.raw);
  }
  return values;
}

export function encodeShareLink(state: FormState): string {
  const params = new URLSearchParams();
  params.set("target", state.target);
  for (const name of state.order) {
    params.set(`f.${name}`, state.fields.get(name)!.raw);
  }
  return `#${params.toString()}`;
}

export function decodeShareLink(hash: string): { values: Map<string, string>; target: Target | null } {
  const values = new Map<string, string>();
  let target: Target | null = null;
  const raw = hash.startsWith("#") ? hash.slice(1) : hash;
  if (!raw) {
    return { values, target };
  }
  const params = new URLSearchParams(raw);
  for (const [key, value] of params.entries()) {
    if (key === "target" && (value === "friction" || value === "cohesion")) {
      target = value;
    } else if (key.startsWith("f.")) {
      values.set(key.slice(2), value);
    }
  }
  return { values, target };
}

export function applyShareLink(state: FormState, hash: string): void {
  const { values, target } = decodeShareLink(hash);
  if (target) {
    state.target = target;
  }
  for (const [name, raw] of values.entries()) {
    if (state.descriptors.has(name)) {
      setField(state, name, raw);
    }
  }
}
