// Wiring: session picker, metrics chart, influence panel, target selection,
// DI/CC launch with polling, and the commit/discard review loop.

import { ApiClient, ApiError } from "./api";
import { buildInfluenceView } from "./influenceView";
import { buildMetricsView, latestDroppedClasses } from "./metricsView";
import { pollJob } from "./poll";
import { buildReviewRows } from "./reviewView";
import {
  canCommit, canDiscard, initialState, jobResolved, jobStarted, jobUpdated,
  launchGate, reviewableResult, toggleTarget, ViewState,
} from "./state";
import {
  renderError, renderInfluencePanel, renderMetricsChart, renderReviewTable,
} from "./render";
import type { MetricsResponse } from "./types";

const baseUrl =
  new URLSearchParams(window.location.search).get("api") ??
  "http://127.0.0.1:8321";
const api = new ApiClient(baseUrl);

let state: ViewState = initialState();
let metrics: MetricsResponse | null = null;

const $ = (id: string) => document.getElementById(id) as HTMLElement;

function setState(next: ViewState) {
  state = next;
  redraw();
}

async function loadSession() {
  const input = $("session-input") as HTMLInputElement;
  const id = input.value.trim();
  try {
    const summary = await api.getSession(id);
    metrics = await api.getMetrics(id);
    setState({
      ...initialState(),
      sessionId: summary.session_id,
      numClasses: summary.num_classes,
      selectedEpoch: summary.current_epoch,
    });
  } catch (err) {
    showError(err);
  }
}

async function refreshMetrics() {
  if (!state.sessionId) return;
  metrics = await api.getMetrics(state.sessionId);
  redraw();
}

async function loadInfluence() {
  if (!state.sessionId || state.selectedEpoch === null) return;
  const panel = $("influence-panel");
  panel.replaceChildren();
  try {
    let influence;
    try {
      influence = await api.getInfluence(state.sessionId, state.selectedEpoch);
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        const { job_id } = await api.buildInfluence(state.sessionId,
                                                    state.selectedEpoch);
        await pollJob(api, job_id, () => undefined);
        influence = await api.getInfluence(state.sessionId,
                                           state.selectedEpoch);
      } else {
        throw err;
      }
    }
    const ceiling = await api.getCeiling(state.sessionId, state.selectedEpoch);
    panel.appendChild(renderInfluencePanel(
      buildInfluenceView(influence, ceiling)));
  } catch (err) {
    showError(err);
  }
}

async function launch(mode: "DI" | "CC") {
  if (!state.sessionId) return;
  const gate = launchGate({ ...state, mode });
  if (!gate.enabled) return;
  try {
    const { job_id } = await api.startPareto(state.sessionId, mode,
                                             state.targets);
    const job = await api.getJob(job_id);
    setState(jobStarted({ ...state, mode }, job));
    const done = await pollJob(api, job_id, (update) =>
      setState(jobUpdated(state, update)));
    setState(jobUpdated(state, done));
    if (done.state === "failed") {
      showError(new Error(done.error ?? "job failed"));
    }
  } catch (err) {
    showError(err);
  }
}

async function commitActive() {
  const result = reviewableResult(state);
  if (!result || !state.sessionId || !state.activeJob) return;
  try {
    await api.commit(state.sessionId, state.activeJob.job_id);
    setState(jobResolved(state));
    await refreshMetrics();
  } catch (err) {
    showError(err);
  }
}

function discardActive() {
  setState(jobResolved(state));
}

function showError(err: unknown) {
  const message = err instanceof ApiError
    ? `service error ${err.status}: ${err.message}`
    : String(err);
  $("error-slot").replaceChildren(renderError(message));
}

function redraw() {
  $("error-slot").replaceChildren();
  const metricsSlot = $("metrics-panel");
  metricsSlot.replaceChildren();
  if (metrics) {
    const view = buildMetricsView(metrics);
    metricsSlot.appendChild(renderMetricsChart(view));
    const dropped = latestDroppedClasses(view);
    $("drop-hint").textContent = dropped.length
      ? `classes ${dropped.join(", ")} dropped in the latest epoch ` +
        "(course-correction candidates)"
      : "no drops in the latest epoch";
  }

  const targetsSlot = $("target-buttons");
  targetsSlot.replaceChildren();
  for (let c = 0; c < state.numClasses; c++) {
    const btn = document.createElement("button");
    btn.textContent = `class ${c}`;
    btn.className = state.targets.includes(c) ? "target selected" : "target";
    btn.addEventListener("click", () => setState(toggleTarget(state, c)));
    targetsSlot.appendChild(btn);
  }

  const gate = launchGate(state);
  for (const mode of ["DI", "CC"] as const) {
    const btn = $(`launch-${mode.toLowerCase()}`) as HTMLButtonElement;
    btn.disabled = !gate.enabled;
    btn.title = gate.reason ?? "";
  }
  $("launch-reason").textContent = gate.reason ?? "";

  const jobSlot = $("job-panel");
  jobSlot.replaceChildren();
  if (state.activeJob) {
    const p = document.createElement("p");
    p.textContent =
      `${state.activeJob.kind} ${state.activeJob.job_id}: ` +
      `${state.activeJob.state} ` +
      `(${Math.round(state.activeJob.progress * 100)}%)`;
    jobSlot.appendChild(p);
  }

  const reviewSlot = $("review-panel");
  reviewSlot.replaceChildren();
  const result = reviewableResult(state);
  if (result && canCommit(state)) {
    reviewSlot.appendChild(renderReviewTable(
      buildReviewRows(result), commitActive, discardActive));
  } else if (canDiscard(state)) {
    const btn = document.createElement("button");
    btn.textContent = "Dismiss failed job";
    btn.addEventListener("click", discardActive);
    reviewSlot.appendChild(btn);
  }
}

function init() {
  $("load-session").addEventListener("click", loadSession);
  $("launch-di").addEventListener("click", () => launch("DI"));
  $("launch-cc").addEventListener("click", () => launch("CC"));
  $("load-influence").addEventListener("click", loadInfluence);
  redraw();
}

document.addEventListener("DOMContentLoaded", init);
