// Pure builders turning API documents into render-ready structures.
// Keeping these free of DOM and fetch makes the explorer's numbers
// testable end-to-end against a live service.

import type {
  GraphDoc,
  GraphNode,
  NodeDoc,
  RankedDoc,
  WindowsDoc,
} from "./types.js";

export interface PickerRow {
  query: string;
  nodeId: string;
  worstClass: string;
  worstSlowdown: number;
  blockedSeconds: number;
}

export function targetPickerRows(graph: GraphDoc): PickerRow[] {
  const rows: PickerRow[] = [];
  for (const node of graph.nodes) {
    if (node.level !== 0) continue;
    const slow = (node.payload["slowdown"] ?? {}) as Record<string, number>;
    const blocked = (node.payload["blocked_s"] ?? {}) as Record<string, number>;
    let worstClass = "-";
    let worst = 0;
    for (const [cls, value] of Object.entries(slow)) {
      if (value >= worst) {
        worst = value;
        worstClass = cls;
      }
    }
    rows.push({
      query: String(node.payload["query"]),
      nodeId: node.id,
      worstClass,
      worstSlowdown: worst,
      blockedSeconds: Object.values(blocked).reduce((a, b) => a + b, 0),
    });
  }
  rows.sort((a, b) => b.worstSlowdown - a.worstSlowdown || (a.query < b.query ? -1 : 1));
  return rows;
}

export interface DrillRow {
  id: string;
  level: number;
  label: string;
  /** Share of the parent's responsibility carried over this edge. */
  score: number;
  impactFactor: number;
  vc: number;
}

export function nodeLabel(node: { level: number; payload: Record<string, unknown> }): string {
  const p = node.payload;
  switch (node.level) {
    case 0:
      return `query ${p["query"]}`;
    case 1:
      return `stage ${p["stage"]}`;
    case 2:
      return `${p["resource"]}`;
    case 3:
      return `${p["request"]} @ ${p["host"]}`;
    case 4:
      return `blame: ${p["source"]} (${p["request"]} @ ${p["host"]})`;
    case 5:
      return `source stage ${p["source"]}`;
    default:
      return `source query ${p["source"]}`;
  }
}

/**
 * Children of the current node ranked by their share of its
 * responsibility (edge impact factor x the node's own responsibility).
 * The scores of all children sum to the parent's displayed value.
 */
export function drillRows(doc: NodeDoc, target: string): DrillRow[] {
  const parentDor = doc.node.dor[target] ?? 0;
  const rows = doc.children.map((child) => ({
    id: child.id,
    level: child.level,
    label: nodeLabel(child),
    score: child.if * parentDor,
    impactFactor: child.if,
    vc: child.vc,
  }));
  rows.sort((a, b) => b.score - a.score || (a.id < b.id ? -1 : 1));
  return rows;
}

export interface ChartSegment {
  source: string;
  share: number;
}

export interface ChartWindow {
  label: string;
  t0: number;
  t1: number;
  total: number;
  segments: ChartSegment[];
}

/**
 * Stacked per-window shares, top-k sources per window, largest first.
 * Shares below the display floor (0.1% of the window's mass, min 1e-4)
 * would render sub-pixel and are dropped.
 */
export function windowChartData(doc: WindowsDoc, k = 5): ChartWindow[] {
  return doc.windows.map((w) => {
    const mass = Object.values(w.shares).reduce((a, b) => a + (b > 0 ? b : 0), 0);
    const floor = Math.max(1e-4, mass * 1e-3);
    const entries = Object.entries(w.shares)
      .filter(([, v]) => v >= floor)
      .sort((a, b) => b[1] - a[1] || (a[0] < b[0] ? -1 : 1))
      .slice(0, k);
    return {
      label: `${w.t0.toFixed(1)}-${w.t1.toFixed(1)}s`,
      t0: w.t0,
      t1: w.t1,
      total: entries.reduce((acc, [, v]) => acc + v, 0),
      segments: entries.map(([source, share]) => ({ source, share })),
    };
  });
}

export interface HeatCell {
  request: string;
  host: string;
  value: number;
  /** value / max over the matrix; 0 when the matrix is all-zero */
  intensity: number;
}

export interface HeatmapData {
  requests: string[];
  hosts: string[];
  cells: HeatCell[];
}

/** Blocked-penalty integrals of a target stage as a request x host grid. */
export function heatmapData(graph: GraphDoc, stage: string): HeatmapData {
  const cells: HeatCell[] = [];
  const requests = new Set<string>();
  const hosts = new Set<string>();
  let max = 0;
  for (const node of graph.nodes) {
    if (node.level !== 3 || node.payload["stage"] !== stage) continue;
    const request = String(node.payload["request"]);
    const host = String(node.payload["host"]);
    requests.add(request);
    hosts.add(host);
    max = Math.max(max, node.vc);
    cells.push({ request, host, value: node.vc, intensity: 0 });
  }
  for (const cell of cells) {
    cell.intensity = max > 0 ? cell.value / max : 0;
  }
  return {
    requests: [...requests].sort(),
    hosts: [...hosts].sort(),
    cells,
  };
}

export interface BaselineRow {
  source: string;
  naive: number;
  deep: number;
  dor: number;
}

/** Side-by-side source ranking: lifetime overlap, task overlap, engine. */
export function baselineComparison(
  naive: RankedDoc,
  deep: RankedDoc,
  graph: GraphDoc,
  target: string,
): BaselineRow[] {
  const dorBySource = new Map<string, number>();
  for (const node of graph.nodes) {
    if (node.level === 6) {
      dorBySource.set(String(node.payload["source"]), node.dor[target] ?? 0);
    }
  }
  const naiveBy = new Map(naive.entries.map((e) => [e.id, e.score]));
  const deepBy = new Map(deep.entries.map((e) => [e.id, e.score]));
  const sources = new Set([...naiveBy.keys(), ...deepBy.keys(), ...dorBySource.keys()]);
  const rows = [...sources].map((source) => ({
    source,
    naive: naiveBy.get(source) ?? 0,
    deep: deepBy.get(source) ?? 0,
    dor: dorBySource.get(source) ?? 0,
  }));
  rows.sort((a, b) => b.dor - a.dor || (a.source < b.source ? -1 : 1));
  return rows;
}

export function l0NodeId(graph: GraphDoc, target: string): string | undefined {
  return graph.nodes.find(
    (n) => n.level === 0 && n.payload["query"] === target,
  )?.id;
}

export function stagesOf(graph: GraphDoc, target: string): string[] {
  return graph.nodes
    .filter((n) => n.level === 1 && n.payload["query"] === target)
    .map((n) => String(n.payload["stage"]))
    .sort();
}

export function rootNode(graph: GraphDoc, target: string): GraphNode | undefined {
  return graph.nodes.find(
    (n) => n.level === 0 && n.payload["query"] === target,
  );
}
