// Dashboard state machine. Mutating API calls are only reachable through
// explicit operator actions, and only when the state allows them: launching
// needs a proper non-empty target subset and no job in flight; commit and
// discard exist only once a pareto job has reached "done".

import type { JobStatus, ParetoJobResult } from "./types";

export type Mode = "DI" | "CC";

export interface ViewState {
  sessionId: string | null;
  numClasses: number;
  selectedEpoch: number | null;
  targets: number[];
  mode: Mode;
  activeJob: JobStatus | null;
}

export function initialState(): ViewState {
  return {
    sessionId: null,
    numClasses: 0,
    selectedEpoch: null,
    targets: [],
    mode: "DI",
    activeJob: null,
  };
}

export function toggleTarget(state: ViewState, classIndex: number): ViewState {
  if (classIndex < 0 || classIndex >= state.numClasses) return state;
  const targets = state.targets.includes(classIndex)
    ? state.targets.filter((t) => t !== classIndex)
    : [...state.targets, classIndex].sort((a, b) => a - b);
  return { ...state, targets };
}

export interface LaunchGate {
  enabled: boolean;
  reason: string | null;
}

/** Launch needs a non-empty, proper subset of the classes and a free slot. */
export function launchGate(state: ViewState): LaunchGate {
  if (state.sessionId === null) {
    return { enabled: false, reason: "no session selected" };
  }
  if (state.activeJob && !isTerminal(state.activeJob)) {
    return { enabled: false, reason: "a job is already running" };
  }
  if (state.targets.length === 0) {
    return { enabled: false, reason: "select at least one target class" };
  }
  if (state.targets.length >= state.numClasses) {
    return {
      enabled: false,
      reason: "leave at least one non-target class to protect",
    };
  }
  return { enabled: true, reason: null };
}

export function isTerminal(job: JobStatus): boolean {
  return job.state === "done" || job.state === "failed";
}

export function jobStarted(state: ViewState, job: JobStatus): ViewState {
  return { ...state, activeJob: job };
}

export function jobUpdated(state: ViewState, job: JobStatus): ViewState {
  if (!state.activeJob || state.activeJob.job_id !== job.job_id) return state;
  return { ...state, activeJob: job };
}

/** The staged result is reviewable only when the job has finished cleanly. */
export function reviewableResult(state: ViewState): ParetoJobResult | null {
  const job = state.activeJob;
  if (!job || job.state !== "done" || !job.result) return null;
  if (!("best_delta" in job.result)) return null;
  return job.result;
}

export function canCommit(state: ViewState): boolean {
  return reviewableResult(state) !== null;
}

export function canDiscard(state: ViewState): boolean {
  const job = state.activeJob;
  return job !== null && isTerminal(job);
}

/** Both commit and discard clear the job slot. */
export function jobResolved(state: ViewState): ViewState {
  return { ...state, activeJob: null, targets: [] };
}
