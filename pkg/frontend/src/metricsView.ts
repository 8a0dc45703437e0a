// View-model for the per-class accuracy chart. One line per class; a class
// is flagged at epoch e when its accuracy dropped relative to e-1 — the
// trigger the operator watches for before launching a course correction.

import type { MetricsResponse } from "./types";

export interface SeriesPoint {
  epoch: number;
  accuracy: number;
}

export interface ClassSeries {
  classIndex: number;
  points: SeriesPoint[];
}

export interface DropFlag {
  classIndex: number;
  epoch: number;
  from: number;
  to: number;
}

export interface MetricsView {
  numClasses: number;
  series: ClassSeries[];
  dropFlags: DropFlag[];
  latestEpoch: number | null;
}

export function buildMetricsView(metrics: MetricsResponse): MetricsView {
  const k = metrics.num_classes;
  const series: ClassSeries[] = [];
  for (let c = 0; c < k; c++) {
    series.push({
      classIndex: c,
      points: metrics.epochs.map((e) => ({
        epoch: e.epoch,
        accuracy: e.per_class_accuracy[c],
      })),
    });
  }
  const dropFlags: DropFlag[] = [];
  for (let i = 1; i < metrics.epochs.length; i++) {
    const prev = metrics.epochs[i - 1];
    const cur = metrics.epochs[i];
    for (let c = 0; c < k; c++) {
      if (cur.per_class_accuracy[c] < prev.per_class_accuracy[c]) {
        dropFlags.push({
          classIndex: c,
          epoch: cur.epoch,
          from: prev.per_class_accuracy[c],
          to: cur.per_class_accuracy[c],
        });
      }
    }
  }
  const latestEpoch =
    metrics.epochs.length > 0
      ? metrics.epochs[metrics.epochs.length - 1].epoch
      : null;
  return { numClasses: k, series, dropFlags, latestEpoch };
}

/** Classes flagged at the latest epoch: the suggested CC target set. */
export function latestDroppedClasses(view: MetricsView): number[] {
  if (view.latestEpoch === null) return [];
  return view.dropFlags
    .filter((f) => f.epoch === view.latestEpoch)
    .map((f) => f.classIndex)
    .sort((a, b) => a - b);
}
