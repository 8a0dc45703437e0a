// View-model for influence geometry. Two classes render as a scatter with
// quadrant shading and the y = -x reference line; more classes fall back to
// a heatmap of the raw matrix. Census membership comes from the ceiling
// report, never recomputed here.

import type { CeilingResponse, InfluenceResponse } from "./types";

export type Region = "joint_positive" | "joint_negative" | "mixed";

export interface ScatterPoint {
  sampleId: number;
  x: number;
  y: number;
  label: number;
  region: Region;
}

export interface HeatmapCell {
  row: number;
  sampleId: number;
  classIndex: number;
  value: number;
}

export interface InfluenceViewModel {
  kind: "scatter" | "heatmap";
  numClasses: number;
  points: ScatterPoint[];
  cells: HeatmapCell[];
  valueRange: [number, number];
  censusCounts: Record<Region, number>;
  verdict: string;
  residualRatio: number;
}

function regionOf(sampleId: number, census: CeilingResponse["census"]): Region {
  if (census.joint_positive.includes(sampleId)) return "joint_positive";
  if (census.joint_negative.includes(sampleId)) return "joint_negative";
  return "mixed";
}

export function buildInfluenceView(
  influence: InfluenceResponse,
  ceiling: CeilingResponse,
): InfluenceViewModel {
  const k = influence.values.length > 0 ? influence.values[0].length : 0;
  const flat = influence.values.flat();
  const valueRange: [number, number] =
    flat.length > 0 ? [Math.min(...flat), Math.max(...flat)] : [0, 0];
  const censusCounts = {
    joint_positive: ceiling.census.joint_positive.length,
    joint_negative: ceiling.census.joint_negative.length,
    mixed: ceiling.census.mixed.length,
  };
  const base = {
    numClasses: k,
    valueRange,
    censusCounts,
    verdict: ceiling.verdict,
    residualRatio: ceiling.residual_ratio,
  };
  if (k === 2) {
    const jp = new Set(ceiling.census.joint_positive);
    const jn = new Set(ceiling.census.joint_negative);
    const points = influence.sample_ids.map((id, i) => ({
      sampleId: id,
      x: influence.values[i][0],
      y: influence.values[i][1],
      label: influence.labels[i],
      region: (jp.has(id)
        ? "joint_positive"
        : jn.has(id)
          ? "joint_negative"
          : "mixed") as Region,
    }));
    return { ...base, kind: "scatter", points, cells: [] };
  }
  const cells: HeatmapCell[] = [];
  influence.sample_ids.forEach((id, i) => {
    for (let c = 0; c < k; c++) {
      cells.push({ row: i, sampleId: id, classIndex: c,
                   value: influence.values[i][c] });
    }
  });
  return { ...base, kind: "heatmap", points: [], cells };
}

export { regionOf };
