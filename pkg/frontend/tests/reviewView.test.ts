import { describe, expect, it } from "vitest";

import { formatChangePercent } from "../src/format";
import { buildReviewRows } from "../src/reviewView";
import type { JobStatus, ParetoJobResult } from "../src/types";
import jobDoneFixture from "./fixtures/job_done.json";

const jobDone = jobDoneFixture as JobStatus;
const result = jobDone.result as ParetoJobResult;

describe("review table from the recorded course-correction job", () => {
  it("shows one row per class with fixture values to two decimals", () => {
    const rows = buildReviewRows(result);
    expect(rows).toHaveLength(result.best_delta.length);
    rows.forEach((row, c) => {
      expect(row.before).toBe(result.reference_accuracy[c].toFixed(4));
      expect(row.after).toBe(result.per_class_accuracy[c].toFixed(4));
      expect(row.change).toBe(
        `${result.best_delta[c] > 0 ? "+" : ""}` +
          `${(result.best_delta[c] * 100).toFixed(2)}%`,
      );
    });
  });

  it("highlights exactly the job's target classes", () => {
    const rows = buildReviewRows(result);
    const highlighted = rows.filter((r) => r.isTarget).map((r) => r.classIndex);
    expect(highlighted).toEqual(result.targets);
  });

  it("targets improved in the recorded job", () => {
    const rows = buildReviewRows(result);
    for (const t of result.targets) {
      expect(rows[t].improved).toBe(true);
    }
  });

  it("formats reference-style changes with sign and two decimals", () => {
    expect(formatChangePercent(0.1602)).toBe("+16.02%");
    expect(formatChangePercent(-0.0231)).toBe("-2.31%");
    expect(formatChangePercent(0)).toBe("0.00%");
  });
});
