// Before/after review table for a finished pareto job, mirroring the
// per-class accuracy comparison layout: one row per class, targets
// highlighted, change column in percent with two decimals.
//
// Every number is taken verbatim from the job's result payload (the service
// reports both the reference and the reweighted accuracies); the dashboard
// formats, it never computes.

import { formatAccuracy, formatChangePercent } from "./format";
import type { ParetoJobResult } from "./types";

export interface ReviewRow {
  classIndex: number;
  isTarget: boolean;
  before: string;
  after: string;
  change: string;
  improved: boolean;
}

export function buildReviewRows(result: ParetoJobResult): ReviewRow[] {
  return result.best_delta.map((delta, c) => ({
    classIndex: c,
    isTarget: result.targets.includes(c),
    before: formatAccuracy(result.reference_accuracy[c]),
    after: formatAccuracy(result.per_class_accuracy[c]),
    change: formatChangePercent(delta),
    improved: delta > 0,
  }));
}
