// Explorer bootstrap: session form, target picker, level drill-down,
// windowed share chart, penalty heatmap and baseline comparison.

import { ApiClient } from "./api.js";
import { StateStore, ascendTo, descend } from "./state.js";
import type { NodeDoc, ViewState } from "./types.js";
import {
  baselineComparison,
  drillRows,
  heatmapData,
  l0NodeId,
  nodeLabel,
  stagesOf,
  targetPickerRows,
  windowChartData,
} from "./viewmodel.js";
import {
  renderBaselinePanel,
  renderBreadcrumb,
  renderDrillPanel,
  renderEmptyState,
  renderErrorBanner,
  renderHeatmap,
  renderTargetPicker,
  renderWindowChart,
} from "./views.js";

const MAX_K = 50; // client-side cap for ranked lists

function defaultBase(): string {
  const port = new URLSearchParams(location.search).get("port") ?? "8780";
  return `http://${location.hostname || "127.0.0.1"}:${port}`;
}

export class ExplorerApp {
  readonly store = new StateStore();
  private nodeCache = new Map<string, NodeDoc>();

  constructor(
    private api: ApiClient,
    private root: HTMLElement,
  ) {
    this.store.subscribe(() => void this.render());
  }

  async openSession(sessionId: string, target: string, k: number): Promise<void> {
    const graph = await this.api.graph(sessionId);
    const rootId = l0NodeId(graph, target);
    this.nodeCache.clear();
    this.store.push({
      sessionId,
      target,
      drillPath: rootId ? [rootId] : [],
      k: Math.min(k, MAX_K),
      windowBounds: [],
    });
  }

  setWindows(bounds: [number, number][]): void {
    const cur = this.store.current;
    if (cur) this.store.push({ ...cur, windowBounds: bounds });
  }

  private async fetchNode(state: ViewState, nodeId: string): Promise<NodeDoc> {
    const key = `${state.sessionId}|${nodeId}`;
    let doc = this.nodeCache.get(key);
    if (!doc) {
      doc = await this.api.node(state.sessionId, nodeId);
      this.nodeCache.set(key, doc);
    }
    return doc;
  }

  async render(): Promise<void> {
    const state = this.store.current;
    if (!state) return;
    this.root.replaceChildren();
    try {
      const graph = await this.api.graph(state.sessionId);
      if (!graph.nodes.length) {
        this.root.appendChild(
          renderEmptyState("This session has an empty graph: nothing to explore."),
        );
        return;
      }
      const picker = renderTargetPicker(
        targetPickerRows(graph),
        state.target,
        (query) => void this.openSession(state.sessionId, query, state.k),
      );
      this.root.appendChild(picker);

      if (!state.drillPath.length) {
        this.root.appendChild(renderEmptyState("Pick a target query to drill down."));
        return;
      }

      const hops = await Promise.all(
        state.drillPath.map((id) => this.fetchNode(state, id)),
      );
      const crumbs = hops.map((doc, i) => ({
        id: state.drillPath[i],
        label: nodeLabel(doc.node),
      }));
      this.root.appendChild(
        renderBreadcrumb(
          crumbs,
          (depth) => this.store.push(ascendTo(state, depth)),
          () => this.store.back(),
          () => this.store.forward(),
          this.store.canBack,
          this.store.canForward,
        ),
      );
      const currentDoc = hops[hops.length - 1];
      const rows = drillRows(currentDoc, state.target).slice(0, state.k);
      this.root.appendChild(
        renderDrillPanel(currentDoc, state.target, rows, (nodeId) =>
          this.store.push(descend(state, nodeId)),
        ),
      );

      if (state.windowBounds.length) {
        const windows = await this.api.windows(
          state.sessionId,
          state.windowBounds,
          state.target,
        );
        this.root.appendChild(renderWindowChart(windowChartData(windows, state.k)));
      }

      const stages = stagesOf(graph, state.target);
      if (stages.length) {
        this.root.appendChild(renderHeatmap(stages[0], heatmapData(graph, stages[0])));
      }

      const [naive, deep] = await Promise.all([
        this.api.baselineRanked(state.sessionId, "naive", state.target),
        this.api.baselineRanked(state.sessionId, "deep", state.target),
      ]);
      this.root.appendChild(
        renderBaselinePanel(
          baselineComparison(naive, deep, graph, state.target),
          state.k,
        ),
      );
    } catch (err) {
      this.root.appendChild(
        renderErrorBanner(
          `Service unreachable or stale session: ${String(err)}`,
          () => void this.render(),
        ),
      );
    }
  }
}

function wireSessionForm(app: ExplorerApp, api: ApiClient): void {
  const form = document.getElementById("session-form") as HTMLFormElement | null;
  if (!form) return;
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const data = new FormData(form);
    const tracePath = String(data.get("trace") ?? "");
    const targets = String(data.get("targets") ?? "")
      .split(",")
      .map((s) => s.trim())
      .filter(Boolean);
    const k = Math.max(1, Number(data.get("k") ?? 5));
    void api
      .createSession(tracePath, targets)
      .then((info) => app.openSession(info.session_id, targets[0], k))
      .catch((err) => alert(`session creation failed: ${err}`));
  });
  const windowsForm = document.getElementById("windows-form") as HTMLFormElement | null;
  windowsForm?.addEventListener("submit", (event) => {
    event.preventDefault();
    const raw = String(new FormData(windowsForm).get("bounds") ?? "");
    const bounds = raw
      .split(",")
      .map((part) => part.split(":").map(Number))
      .filter((pair) => pair.length === 2 && pair.every(Number.isFinite))
      .map(([a, b]) => [a, b] as [number, number]);
    app.setWindows(bounds);
  });
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  const api = new ApiClient(defaultBase());
  const app = new ExplorerApp(api, document.getElementById("app") as HTMLElement);
  wireSessionForm(app, api);
}
