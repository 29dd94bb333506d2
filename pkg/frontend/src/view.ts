/** DOM rendering. All scientific numbers shown come from API responses;
 * the only arithmetic here is 2-decimal display rounding and the deltas
 * between the current and previous displayed results. */

import { phiBarsSvg, round2, waterfallSvg } from "./charts";
import type { ResultRow } from "./csv";
import type { FormState } from "./state";
import type { ExplainResponse, PredictResponse } from "./types";

export function appSkeleton(): string {
  return `
  <header><h1>Waste shear-strength what-if</h1></header>
  <main class="two-section">
    <section id="input-section">
      <h2>Input Parameters</h2>
      <div id="message-box" hidden></div>
      <form id="param-form"></form>
      <div class="actions">
        <button id="predict-btn" type="button">Predict & explain</button>
        <button id="share-btn" type="button">Share link</button>
        <input id="share-url" readonly hidden />
      </div>
      <div id="batch-panel">
        <h3>Batch upload (CSV)</h3>
        <input id="batch-input" type="file" accept=".csv,text/csv" />
        <div id="batch-message" hidden></div>
        <div id="batch-results"></div>
      </div>
    </section>
    <section id="results-section">
      <h2>Prediction Results</h2>
      <div id="prediction-panel"></div>
      <div class="explain-controls">
        <label for="target-select">Explained target</label>
        <select id="target-select">
          <option value="friction" selected>friction angle</option>
          <option value="cohesion">cohesion</option>
        </select>
      </div>
      <div id="explanation-panel"></div>
    </section>
  </main>`;
}

export function renderForm(
  container: HTMLElement,
  state: FormState,
  onInput: (name: string, raw: string) => void,
): void {
  container.innerHTML = "";
  for (const name of state.order) {
    const descriptor = state.descriptors.get(name)!;
    const field = state.fields.get(name)!;
    const row = document.createElement("div");
    row.className = "field" + (field.dirty ? " dirty" : "");
    row.dataset.feature = name;

    const label = document.createElement("label");
    label.htmlFor = `field-${name}`;
    label.textContent = descriptor.unit ? `${name} (${descriptor.unit})` : name;

    const input = document.createElement("input");
    input.id = `field-${name}`;
    input.name = name;
    input.type = "text";
    input.inputMode = "decimal";
    input.value = field.raw;
    input.addEventListener("input", () => onInput(name, input.value));

    const note = document.createElement("span");
    note.className = field.error ? "error" : field.warning ? "warning" : "note";
    note.textContent = field.error ?? field.warning ?? "";

    row.append(label, input, note);
    container.append(row);
  }
}

/** Refresh one field's message/dirty class without rebuilding the form. */
export function refreshField(container: HTMLElement, state: FormState, name: string): void {
  const row = container.querySelector<HTMLElement>(`.field[data-feature="${name}"]`);
  const field = state.fields.get(name);
  if (!row || !field) {
    return;
  }
  row.classList.toggle("dirty", field.dirty);
  const note = row.querySelector<HTMLElement>("span")!;
  note.className = field.error ? "error" : field.warning ? "warning" : "note";
  note.textContent = field.error ?? field.warning ?? "";
}

export interface ResultsViewModel {
  current: PredictResponse;
  previous: PredictResponse | null;
}

function deltaSpan(id: string, current: number, previous: number | null): string {
  if (previous === null) {
    return "";
  }
  const delta = current - previous;
  const sign = delta >= 0 ? "+" : "";
  return `<span class="delta" id="${id}">(${sign}${round2(delta)} vs previous)</span>`;
}

export function renderPredictions(container: HTMLElement, vm: ResultsViewModel): void {
  const { current, previous } = vm;
  const warn = current.out_of_range.length
    ? `<p class="warning" id="range-warning">extrapolating outside fit range: ${current.out_of_range.join(", ")}</p>`
    : "";
  container.innerHTML = `
    <div class="prediction">
      <div class="target-card">
        <span class="name">friction angle</span>
        <span class="value" id="friction-value">${round2(current.predictions.friction_deg)}</span>
        <span class="unit">deg</span>
        ${deltaSpan("friction-delta", current.predictions.friction_deg, previous?.predictions.friction_deg ?? null)}
      </div>
      <div class="target-card">
        <span class="name">cohesion</span>
        <span class="value" id="cohesion-value">${round2(current.predictions.cohesion_kpa)}</span>
        <span class="unit">kPa</span>
        ${deltaSpan("cohesion-delta", current.predictions.cohesion_kpa, previous?.predictions.cohesion_kpa ?? null)}
      </div>
    </div>
    ${warn}`;
}

export function renderExplanation(container: HTMLElement, explain: ExplainResponse): void {
  const unit = explain.target === "friction" ? "deg" : "kPa";
  const steps = explain.waterfall;
  const rows = steps
    .map(
      (s, i) =>
        `<tr class="wf-step" data-label="${s.label}" data-phi="${i === 0 ? "" : round2(s.phi)}" ` +
        `data-cumulative="${round2(s.cumulative)}">` +
        `<td>${s.label}</td><td>${i === 0 ? "" : (s.phi >= 0 ? "+" : "") + round2(s.phi)}</td>` +
        `<td>${round2(s.cumulative)}</td></tr>`,
    )
    .join("");
  const bars = explain.features
    .slice()
    .sort((a, b) => Math.abs(b.phi) - Math.abs(a.phi))
    .slice(0, 10);
  container.innerHTML = `
    <p>
      base <span id="explain-base">${round2(explain.base_value)}</span> ${unit}
      → prediction <span id="explain-prediction">${round2(explain.prediction)}</span> ${unit}
      <span class="provenance">method ${explain.method}${explain.full_enumeration ? " (full enumeration)" : ""}</span>
    </p>
    ${waterfallSvg(steps)}
    <table id="waterfall-table"><thead><tr><th>step</th><th>phi</th><th>cumulative</th></tr></thead>
    <tbody>${rows}</tbody></table>
    <h3>Top contributions</h3>
    ${phiBarsSvg(bars)}`;
}

export function renderBatchTable(
  container: HTMLElement,
  rows: ResultRow[],
  downloadHref: string,
): void {
  const body = rows
    .map((row) => {
      const status =
        row.status === "ok"
          ? `<td class="ok">ok</td>`
          : `<td class="row-error">line ${row.line}: ${row.detail}</td>`;
      const friction = row.friction_deg === null ? "" : round2(row.friction_deg);
      const cohesion = row.cohesion_kpa === null ? "" : round2(row.cohesion_kpa);
      const flags = row.out_of_range.join(", ");
      return `<tr class="batch-row ${row.status}">${status}<td>${friction}</td><td>${cohesion}</td><td>${flags}</td></tr>`;
    })
    .join("");
  container.innerHTML = `
    <p><a id="batch-download" download="predictions.csv" href="${downloadHref}">Download results CSV</a></p>
    <table id="batch-table">
      <thead><tr><th>status</th><th>friction (deg)</th><th>cohesion (kPa)</th><th>out of range</th></tr></thead>
      <tbody>${body}</tbody>
    </table>`;
}

export function showMessage(
  box: HTMLElement,
  text: string,
  options: { retry?: () => void } = {},
): void {
  box.hidden = false;
  box.innerHTML = `<span class="message-text">${text}</span>`;
  if (options.retry) {
    const btn = document.createElement("button");
    btn.id = "retry-btn";
    btn.type = "button";
    btn.textContent = "Retry";
    btn.addEventListener("click", options.retry);
    box.append(" ", btn);
  }
}

export function clearMessage(box: HTMLElement): void {
  box.hidden = true;
  box.innerHTML = "";
}
