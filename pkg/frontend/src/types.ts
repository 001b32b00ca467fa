// API payload shapes, mirroring the service's JSON exactly.

export interface GraphNode {
  id: string;
  level: number;
  payload: Record<string, unknown>;
  vc: number;
  dor: Record<string, number>;
}

export interface GraphEdge {
  from: string;
  to: string;
  if: number;
}

export interface GraphDoc {
  nodes: GraphNode[];
  edges: GraphEdge[];
}

export interface NeighborNode extends GraphNode {
  if: number;
}

export interface NodeDoc {
  node: GraphNode;
  children: NeighborNode[];
  parents: NeighborNode[];
}

export interface RankedEntry {
  id: string;
  score: number;
}

export interface RankedDoc {
  k: number;
  entries: RankedEntry[];
}

export interface TopkDoc {
  columns: string[];
  rows: (string | number)[][];
}

export interface WindowShares {
  t0: number;
  t1: number;
  shares: Record<string, number>;
}

export interface WindowsDoc {
  target: string;
  windows: WindowShares[];
}

export interface SessionInfo {
  session_id: string;
  targets: string[];
  nodes: number;
  edges: number;
  created_at: string;
  warnings: string[];
}

export interface BlockedBaselineDoc {
  query: string;
  stages: Record<string, Record<string, number>>;
  total: Record<string, number>;
}

// Client-side navigation state: the single source of truth for rendering.
export interface ViewState {
  sessionId: string;
  target: string;
  drillPath: string[]; // node ids from the L0 node downward
  k: number;
  windowBounds: [number, number][];
}
