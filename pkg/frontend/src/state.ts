// Navigation state with history: back/forward replay identical panels
// because rendering is a pure function of the current ViewState.

import type { ViewState } from "./types.js";

export class StateStore {
  private history: ViewState[] = [];
  private cursor = -1;
  private listeners: ((state: ViewState) => void)[] = [];

  get current(): ViewState | undefined {
    return this.cursor >= 0 ? this.history[this.cursor] : undefined;
  }

  get canBack(): boolean {
    return this.cursor > 0;
  }

  get canForward(): boolean {
    return this.cursor >= 0 && this.cursor < this.history.length - 1;
  }

  push(state: ViewState): void {
    this.history = this.history.slice(0, this.cursor + 1);
    this.history.push(state);
    this.cursor = this.history.length - 1;
    this.emit();
  }

  back(): void {
    if (this.canBack) {
      this.cursor -= 1;
      this.emit();
    }
  }

  forward(): void {
    if (this.canForward) {
      this.cursor += 1;
      this.emit();
    }
  }

  subscribe(fn: (state: ViewState) => void): void {
    this.listeners.push(fn);
  }

  private emit(): void {
    const state = this.current;
    if (state) {
      for (const fn of this.listeners) fn(state);
    }
  }
}

export function descend(state: ViewState, nodeId: string): ViewState {
  return { ...state, drillPath: [...state.drillPath, nodeId] };
}

export function ascendTo(state: ViewState, depth: number): ViewState {
  return { ...state, drillPath: state.drillPath.slice(0, depth + 1) };
}
