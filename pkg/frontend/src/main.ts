/** Controller: boots from the schema endpoint, wires the form, predict
 * and explain calls, batch upload and share links. At most one in-flight
 * explain cycle: a new submission aborts and supersedes the previous one. */

import { ApiFailure, explain, fetchSchema, predictBatch, predictOne } from "./api";
import { parseCsv, resultsToCsv, type ResultRow } from "./csv";
import {
  applyShareLink,
  encodeShareLink,
  firstError,
  formValues,
  initForm,
  setField,
  type FormState,
} from "./state";
import type { ExplainResponse, FeatureDescriptor, PredictResponse, Target } from "./types";
import {
  appSkeleton,
  clearMessage,
  refreshField,
  renderBatchTable,
  renderExplanation,
  renderForm,
  renderPredictions,
  showMessage,
} from "./view";

interface AppState {
  form: FormState;
  schema: FeatureDescriptor[];
  current: PredictResponse | null;
  previous: PredictResponse | null;
  inflight: AbortController | null;
}

export async function boot(root: HTMLElement): Promise<AppState> {
  root.innerHTML = appSkeleton();
  const messageBox = root.querySelector<HTMLElement>("#message-box")!;
  const formEl = root.querySelector<HTMLElement>("#param-form")!;
  const predictionPanel = root.querySelector<HTMLElement>("#prediction-panel")!;
  const explanationPanel = root.querySelector<HTMLElement>("#explanation-panel")!;
  const targetSelect = root.querySelector<HTMLSelectElement>("#target-select")!;
  const batchMessage = root.querySelector<HTMLElement>("#batch-message")!;
  const batchResults = root.querySelector<HTMLElement>("#batch-results")!;

  let schemaResponse;
  try {
    schemaResponse = await fetchSchema();
  } catch (err) {
    showMessage(messageBox, `cannot reach the inference service: ${String(err)}`, {
      retry: () => void boot(root),
    });
    throw err;
  }

  const state: AppState = {
    form: initForm(schemaResponse.features),
    schema: schemaResponse.features,
    current: null,
    previous: null,
    inflight: null,
  };
  applyShareLink(state.form, window.location.hash);
  targetSelect.value = state.form.target;

  renderForm(formEl, state.form, (name, raw) => {
    setField(state.form, name, raw);
    refreshField(formEl, state.form, name);
  });

  async function submit(): Promise<void> {
    clearMessage(messageBox);
    const invalid = firstError(state.form);
    if (invalid) {
      showMessage(messageBox, `field ${invalid.name}: ${invalid.error}`);
      return;
    }
    state.inflight?.abort();
    const controller = new AbortController();
    state.inflight = controller;
    const values = formValues(state.form);
    try {
      const [prediction, explanation] = await Promise.all([
        predictOne(values, controller.signal),
        explain(values, state.form.target, controller.signal),
      ]);
      if (controller.signal.aborted) {
        return;
      }
      state.previous = state.current;
      state.current = prediction;
      renderPredictions(predictionPanel, { current: prediction, previous: state.previous });
      renderExplanation(explanationPanel, explanation);
    } catch (err) {
      if (controller.signal.aborted) {
        return;
      }
      if (err instanceof ApiFailure) {
        const named = state.schema.find((d) => err.detail.includes(d.name));
        showMessage(messageBox, named ? `field ${named.name}: ${err.detail}` : err.detail);
      } else {
        showMessage(messageBox, `network failure: ${String(err)}`, { retry: () => void submit() });
      }
    } finally {
      if (state.inflight === controller) {
        state.inflight = null;
      }
    }
  }

  async function reExplain(target: Target): Promise<void> {
    state.form.target = target;
    const invalid = firstError(state.form);
    if (invalid || !state.current) {
      return;
    }
    state.inflight?.abort();
    const controller = new AbortController();
    state.inflight = controller;
    try {
      const explanation: ExplainResponse = await explain(
        formValues(state.form),
        target,
        controller.signal,
      );
      if (!controller.signal.aborted) {
        renderExplanation(explanationPanel, explanation);
      }
    } catch (err) {
      if (!controller.signal.aborted) {
        showMessage(messageBox, `explanation failed: ${String(err)}`, {
          retry: () => void reExplain(target),
        });
      }
    } finally {
      if (state.inflight === controller) {
        state.inflight = null;
      }
    }
  }

  root.querySelector<HTMLButtonElement>("#predict-btn")!.addEventListener("click", () => void submit());
  targetSelect.addEventListener("change", () => void reExplain(targetSelect.value as Target));

  root.querySelector<HTMLButtonElement>("#share-btn")!.addEventListener("click", () => {
    const hash = encodeShareLink(state.form);
    window.location.hash = hash;
    const urlField = root.querySelector<HTMLInputElement>("#share-url")!;
    urlField.hidden = false;
    urlField.value = window.location.href;
  });

  const batchInput = root.querySelector<HTMLInputElement>("#batch-input")!;
  batchInput.addEventListener("change", async () => {
    clearMessage(batchMessage);
    batchResults.innerHTML = "";
    const file = batchInput.files?.[0];
    if (!file) {
      return;
    }
    const text = await file.text();
    await loadBatchText(text);
  });

  async function loadBatchText(text: string): Promise<void> {
    const parsed = parseCsv(text, state.schema);
    if (parsed.error && parsed.rows.length === 0) {
      showMessage(batchMessage, parsed.error);
      return;
    }
    if (parsed.ignoredColumns.length > 0) {
      showMessage(batchMessage, `ignored columns: ${parsed.ignoredColumns.join(", ")}`);
    }
    const valid = parsed.rows.filter((r) => r.features !== null);
    let results: ResultRow[] = [];
    let byLine = new Map<number, ResultRow>();
    if (valid.length > 0) {
      try {
        const response = await predictBatch(valid.map((r) => r.features!));
        response.results.forEach((res, i) => {
          byLine.set(valid[i].line, {
            line: valid[i].line,
            status: "ok",
            detail: "",
            features: res.features,
            friction_deg: res.predictions.friction_deg,
            cohesion_kpa: res.predictions.cohesion_kpa,
            out_of_range: res.out_of_range,
          });
        });
      } catch (err) {
        showMessage(batchMessage, `batch request failed: ${String(err)}`, {
          retry: () => void loadBatchText(text),
        });
        return;
      }
    }
    results = parsed.rows.map(
      (row) =>
        byLine.get(row.line) ?? {
          line: row.line,
          status: "error" as const,
          detail: row.error ?? "invalid row",
          features: row.features,
          friction_deg: null,
          cohesion_kpa: null,
          out_of_range: [],
        },
    );
    const csv = resultsToCsv(results, state.schema);
    const href = `data:text/csv;charset=utf-8,${encodeURIComponent(csv)}`;
    renderBatchTable(batchResults, results, href);
  }

  // expose for tests and render the initial prediction
  (root as HTMLElement & { __app?: unknown }).__app = { state, submit, reExplain, loadBatchText };
  await submit();
  return state;
}

if (!import.meta.env?.TEST && typeof document !== "undefined") {
  const root = document.getElementById("app");
  if (root) {
    void boot(root);
  }
}
