// SVG/DOM rendering of the view-models. No numbers are computed here beyond
// pixel coordinates; values shown in text come straight from the models.

import { formatChangePercent, formatPercent } from "./format";
import type { InfluenceViewModel } from "./influenceView";
import type { MetricsView } from "./metricsView";
import type { ReviewRow } from "./reviewView";

const CLASS_COLORS = [
  "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

export function classColor(classIndex: number): string {
  return CLASS_COLORS[classIndex % CLASS_COLORS.length];
}

const SVG_NS = "http://www.w3.org/2000/svg";

function svgElement<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | number>,
): SVGElementTagNameMap[K] {
  const el = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    el.setAttribute(key, String(value));
  }
  return el;
}

export function renderMetricsChart(
  view: MetricsView,
  width = 640,
  height = 300,
): SVGSVGElement {
  const pad = 40;
  const svg = svgElement("svg", { width, height, class: "metrics-chart" });
  if (view.series.length === 0 || view.series[0].points.length === 0) {
    const empty = svgElement("text", { x: width / 2, y: height / 2,
                                       "text-anchor": "middle" });
    empty.textContent = "no epochs trained yet";
    svg.appendChild(empty);
    return svg;
  }
  const maxEpoch = Math.max(1, view.latestEpoch ?? 1);
  const x = (epoch: number) => pad + (epoch / maxEpoch) * (width - 2 * pad);
  const y = (acc: number) => height - pad - acc * (height - 2 * pad);

  for (const tick of [0, 0.25, 0.5, 0.75, 1.0]) {
    svg.appendChild(svgElement("line", {
      x1: pad, x2: width - pad, y1: y(tick), y2: y(tick),
      stroke: "#ddd", "stroke-width": 1,
    }));
    const label = svgElement("text", { x: 4, y: y(tick) + 4, "font-size": 10 });
    label.textContent = formatPercent(tick);
    svg.appendChild(label);
  }

  const flagged = new Set(view.dropFlags.map((f) => `${f.classIndex}:${f.epoch}`));
  for (const series of view.series) {
    const path = series.points
      .map((p, i) => `${i === 0 ? "M" : "L"}${x(p.epoch)},${y(p.accuracy)}`)
      .join(" ");
    svg.appendChild(svgElement("path", {
      d: path, fill: "none", stroke: classColor(series.classIndex),
      "stroke-width": 2, "data-class": series.classIndex,
    }));
    for (const p of series.points) {
      const dropped = flagged.has(`${series.classIndex}:${p.epoch}`);
      const dot = svgElement("circle", {
        cx: x(p.epoch), cy: y(p.accuracy), r: dropped ? 5 : 3,
        fill: dropped ? "#d62728" : classColor(series.classIndex),
        "data-class": series.classIndex, "data-epoch": p.epoch,
        "data-dropped": String(dropped),
      });
      const title = svgElement("title", {});
      title.textContent =
        `class ${series.classIndex} @ epoch ${p.epoch}: ` +
        formatPercent(p.accuracy) + (dropped ? " (dropped)" : "");
      dot.appendChild(title);
      svg.appendChild(dot);
    }
  }
  return svg;
}

export function renderInfluencePanel(model: InfluenceViewModel): HTMLElement {
  const panel = document.createElement("div");
  panel.className = "influence-panel";

  const summary = document.createElement("p");
  summary.className = "ceiling-summary";
  summary.textContent =
    `verdict: ${model.verdict} | residual ratio ` +
    `${model.residualRatio.toFixed(4)} | joint+ ` +
    `${model.censusCounts.joint_positive}, joint- ` +
    `${model.censusCounts.joint_negative}, mixed ${model.censusCounts.mixed}`;
  panel.appendChild(summary);

  const size = 360;
  const svg = svgElement("svg", { width: size, height: size });
  if (model.kind === "scatter") {
    const extent = Math.max(
      Math.abs(model.valueRange[0]), Math.abs(model.valueRange[1]), 1e-12);
    const scale = (v: number) => size / 2 + (v / extent) * (size / 2 - 10);
    // quadrant shading and the tradeoff reference line
    svg.appendChild(svgElement("rect", {
      x: size / 2, y: 0, width: size / 2, height: size / 2,
      fill: "#2ca02c", opacity: 0.06,
    }));
    svg.appendChild(svgElement("rect", {
      x: 0, y: size / 2, width: size / 2, height: size / 2,
      fill: "#d62728", opacity: 0.06,
    }));
    svg.appendChild(svgElement("line", {
      x1: scale(-extent), y1: size - scale(extent),
      x2: scale(extent), y2: size - scale(-extent),
      stroke: "#2ca02c", "stroke-dasharray": "4 3",
    }));
    svg.appendChild(svgElement("line", {
      x1: 0, x2: size, y1: size / 2, y2: size / 2, stroke: "#999",
    }));
    svg.appendChild(svgElement("line", {
      y1: 0, y2: size, x1: size / 2, x2: size / 2, stroke: "#999",
    }));
    for (const p of model.points) {
      svg.appendChild(svgElement("circle", {
        cx: scale(p.x), cy: size - scale(p.y), r: 2.5,
        fill: p.region === "joint_negative" ? "#d62728"
          : p.region === "joint_positive" ? "#2ca02c"
            : classColor(p.label),
        opacity: 0.7, "data-sample": p.sampleId, "data-region": p.region,
      }));
    }
  } else {
    const rows = Math.max(1, model.cells.length / Math.max(model.numClasses, 1));
    const cellW = size / Math.max(model.numClasses, 1);
    const cellH = size / rows;
    const extent = Math.max(
      Math.abs(model.valueRange[0]), Math.abs(model.valueRange[1]), 1e-12);
    for (const cell of model.cells) {
      const t = cell.value / extent; // -1..1
      const color = t >= 0
        ? `rgba(44, 160, 44, ${Math.min(1, t)})`
        : `rgba(214, 39, 40, ${Math.min(1, -t)})`;
      svg.appendChild(svgElement("rect", {
        x: cell.classIndex * cellW, y: cell.row * cellH,
        width: Math.ceil(cellW), height: Math.max(1, Math.ceil(cellH)),
        fill: color, "data-sample": cell.sampleId,
      }));
    }
  }
  panel.appendChild(svg);
  return panel;
}

export function renderReviewTable(
  rows: ReviewRow[],
  onCommit: () => void,
  onDiscard: () => void,
): HTMLElement {
  const container = document.createElement("div");
  container.className = "review-panel";
  const table = document.createElement("table");
  table.innerHTML =
    "<thead><tr><th>Category</th><th>Before</th><th>After</th>" +
    "<th>Change (%)</th></tr></thead>";
  const body = document.createElement("tbody");
  for (const row of rows) {
    const tr = document.createElement("tr");
    if (row.isTarget) tr.className = "target-row";
    tr.innerHTML =
      `<td>${row.classIndex}${row.isTarget ? " *" : ""}</td>` +
      `<td>${row.before}</td><td>${row.after}</td>` +
      `<td class="${row.improved ? "gain" : "loss"}">${row.change}</td>`;
    body.appendChild(tr);
  }
  table.appendChild(body);
  container.appendChild(table);

  const commit = document.createElement("button");
  commit.textContent = "Commit weighted epoch";
  commit.className = "commit-btn";
  commit.addEventListener("click", onCommit);
  const discard = document.createElement("button");
  discard.textContent = "Discard";
  discard.className = "discard-btn";
  discard.addEventListener("click", onDiscard);
  container.append(commit, discard);
  return container;
}

export function renderError(message: string): HTMLElement {
  const div = document.createElement("div");
  div.className = "error-panel";
  div.textContent = message;
  return div;
}

export { formatChangePercent };
