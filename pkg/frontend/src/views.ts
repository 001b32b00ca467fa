// DOM rendering. Every number shown here arrived from the API; these
// functions only format and lay out.

import type { NodeDoc } from "./types.js";
import type {
  BaselineRow,
  ChartWindow,
  DrillRow,
  HeatmapData,
  PickerRow,
} from "./viewmodel.js";
import { nodeLabel } from "./viewmodel.js";

const PALETTE = [
  "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
  "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
];

export function colorFor(source: string, legend: Map<string, string>): string {
  let color = legend.get(source);
  if (!color) {
    color = PALETTE[legend.size % PALETTE.length];
    legend.set(source, color);
  }
  return color;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderTargetPicker(
  rows: PickerRow[],
  selected: string,
  onPick: (query: string) => void,
): HTMLElement {
  const box = el("div", "panel target-picker");
  box.appendChild(el("h2", undefined, "Target queries"));
  const list = el("ul", "picker-list");
  for (const row of rows) {
    const item = el("li", row.query === selected ? "picker-row selected" : "picker-row");
    const button = el("button", "pick", row.query);
    button.dataset.query = row.query;
    button.addEventListener("click", () => onPick(row.query));
    item.appendChild(button);
    item.appendChild(
      el(
        "span",
        "summary",
        ` worst ${row.worstClass} slowdown ${row.worstSlowdown.toFixed(2)}, ` +
          `blocked ${row.blockedSeconds.toFixed(1)}s`,
      ),
    );
    list.appendChild(item);
  }
  box.appendChild(list);
  return box;
}

export function renderBreadcrumb(
  path: { id: string; label: string }[],
  onJump: (depth: number) => void,
  onBack: () => void,
  onForward: () => void,
  canBack: boolean,
  canForward: boolean,
): HTMLElement {
  const box = el("div", "breadcrumb");
  const back = el("button", "nav-back", "< back");
  back.disabled = !canBack;
  back.addEventListener("click", onBack);
  const fwd = el("button", "nav-forward", "forward >");
  fwd.disabled = !canForward;
  fwd.addEventListener("click", onForward);
  box.appendChild(back);
  box.appendChild(fwd);
  path.forEach((hop, depth) => {
    const crumb = el("button", "crumb", hop.label);
    crumb.dataset.nodeId = hop.id;
    crumb.addEventListener("click", () => onJump(depth));
    box.appendChild(crumb);
    if (depth < path.length - 1) box.appendChild(el("span", "sep", " / "));
  });
  return box;
}

export function renderDrillPanel(
  doc: NodeDoc,
  target: string,
  rows: DrillRow[],
  onDescend: (nodeId: string) => void,
): HTMLElement {
  const box = el("div", "panel drill-panel");
  const dor = doc.node.dor[target] ?? 0;
  box.appendChild(el("h2", undefined, nodeLabel(doc.node)));
  const meta = el("p", "node-meta");
  meta.textContent =
    `level ${doc.node.level}, contribution ${doc.node.vc.toPrecision(4)}, ` +
    `responsibility ${dor.toFixed(4)}`;
  meta.dataset.dor = String(dor);
  box.appendChild(meta);

  if (!rows.length) {
    box.appendChild(el("p", "empty-state", "No deeper contributors."));
    return box;
  }
  const table = el("table", "drill-table");
  const head = el("tr");
  for (const h of ["contributor", "share", ""]) head.appendChild(el("th", undefined, h));
  table.appendChild(head);
  const maxScore = rows[0]?.score || 1;
  for (const row of rows) {
    const tr = el("tr", "drill-row");
    tr.dataset.nodeId = row.id;
    tr.dataset.score = String(row.score);
    const name = el("td");
    const link = el("button", "descend", row.label);
    link.addEventListener("click", () => onDescend(row.id));
    name.appendChild(link);
    tr.appendChild(name);
    tr.appendChild(el("td", "score", row.score.toFixed(4)));
    const barCell = el("td", "bar-cell");
    const bar = el("div", "bar");
    bar.style.width = `${(100 * row.score) / (maxScore || 1)}%`;
    barCell.appendChild(bar);
    tr.appendChild(barCell);
    table.appendChild(tr);
  }
  box.appendChild(table);
  return box;
}

export function renderWindowChart(windows: ChartWindow[]): HTMLElement {
  const box = el("div", "panel window-chart");
  box.appendChild(el("h2", undefined, "Responsibility shares per window"));
  const legend = new Map<string, string>();
  const chart = el("div", "chart");
  const maxTotal = Math.max(...windows.map((w) => w.total), 1e-9);
  for (const win of windows) {
    const col = el("div", "chart-column");
    col.dataset.window = win.label;
    const stack = el("div", "stack");
    stack.style.height = `${Math.round((160 * win.total) / maxTotal)}px`;
    for (const seg of win.segments) {
      const piece = el("div", "segment");
      piece.dataset.source = seg.source;
      piece.dataset.share = String(seg.share);
      piece.title = `${seg.source}: ${seg.share.toFixed(3)}`;
      piece.style.height = `${(100 * seg.share) / (win.total || 1)}%`;
      piece.style.background = colorFor(seg.source, legend);
      stack.appendChild(piece);
    }
    col.appendChild(stack);
    col.appendChild(el("div", "chart-label", win.label));
    chart.appendChild(col);
  }
  box.appendChild(chart);
  const key = el("div", "legend");
  for (const [source, color] of legend) {
    const item = el("span", "legend-item", source);
    item.style.borderLeft = `12px solid ${color}`;
    key.appendChild(item);
  }
  box.appendChild(key);
  return box;
}

export function renderHeatmap(stage: string, data: HeatmapData): HTMLElement {
  const box = el("div", "panel heatmap");
  box.appendChild(el("h2", undefined, `Blocked penalty heatmap: stage ${stage}`));
  const table = el("table", "heat-table");
  const head = el("tr");
  head.appendChild(el("th"));
  for (const host of data.hosts) head.appendChild(el("th", undefined, host));
  table.appendChild(head);
  const byKey = new Map(data.cells.map((c) => [`${c.request}|${c.host}`, c]));
  for (const request of data.requests) {
    const tr = el("tr");
    tr.appendChild(el("th", undefined, request));
    for (const host of data.hosts) {
      const cell = byKey.get(`${request}|${host}`);
      const td = el("td", "heat-cell");
      if (cell) {
        td.dataset.value = String(cell.value);
        td.textContent = cell.value > 0 ? cell.value.toPrecision(2) : "";
        const alpha = 0.08 + 0.92 * cell.intensity;
        td.style.background = `rgba(225, 87, 89, ${cell.value > 0 ? alpha : 0})`;
      }
      tr.appendChild(td);
    }
    table.appendChild(tr);
  }
  box.appendChild(table);
  return box;
}

export function renderBaselinePanel(rows: BaselineRow[], k: number): HTMLElement {
  const box = el("div", "panel baseline-panel");
  box.appendChild(el("h2", undefined, "Baselines vs blame attribution"));
  const table = el("table", "baseline-table");
  const head = el("tr");
  for (const h of ["source", "lifetime overlap (s)", "task overlap (s)", "responsibility"]) {
    head.appendChild(el("th", undefined, h));
  }
  table.appendChild(head);
  for (const row of rows.slice(0, k)) {
    const tr = el("tr", "baseline-row");
    tr.dataset.source = row.source;
    tr.appendChild(el("td", undefined, row.source));
    tr.appendChild(el("td", undefined, row.naive.toFixed(1)));
    tr.appendChild(el("td", undefined, row.deep.toFixed(1)));
    tr.appendChild(el("td", undefined, row.dor.toFixed(4)));
    table.appendChild(tr);
  }
  box.appendChild(table);
  return box;
}

export function renderErrorBanner(message: string, onRetry: () => void): HTMLElement {
  const box = el("div", "banner error");
  box.appendChild(el("span", undefined, message));
  const retry = el("button", "retry", "retry");
  retry.addEventListener("click", onRetry);
  box.appendChild(retry);
  return box;
}

export function renderEmptyState(message: string): HTMLElement {
  return el("div", "empty-state", message);
}
