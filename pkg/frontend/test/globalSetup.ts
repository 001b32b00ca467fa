// Spawns the analysis service with fixture traces for the e2e suite.

import { spawn, execFileSync, type ChildProcess } from "node:child_process";
import { mkdirSync } from "node:fs";
import path from "node:path";
import { fileURLToPath } from "node:url";

const HERE = path.dirname(fileURLToPath(import.meta.url));
export const FIXTURES = path.join(HERE, ".fixtures");
export const PORT = 8791;
export const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess | undefined;

function cli(...args: string[]): void {
  execFileSync("python3", ["-m", "contendscope.cli", ...args], {
    stdio: ["ignore", "ignore", "inherit"],
  });
}

async function waitReady(): Promise<void> {
  for (let i = 0; i < 100; i++) {
    try {
      const resp = await fetch(`${BASE}/sessions`);
      if (resp.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 150));
  }
  throw new Error("analysis service did not become ready");
}

export async function setup(): Promise<void> {
  mkdirSync(FIXTURES, { recursive: true });
  cli(
    "simulate", "--scenario", "io-external-load", "--seed", "9",
    "--out", path.join(FIXTURES, "io.jsonl"),
    "--truth", path.join(FIXTURES, "io-truth.json"),
  );
  cli(
    "simulate", "--scenario", "cpu-internal-hog", "--seed", "3",
    "--out", path.join(FIXTURES, "hog.jsonl"),
    "--truth", path.join(FIXTURES, "hog-truth.json"),
  );
  server = spawn(
    "python3",
    ["-m", "contendscope.cli", "serve", "--port", String(PORT)],
    { stdio: ["ignore", "ignore", "inherit"] },
  );
  await waitReady();
}

export async function teardown(): Promise<void> {
  server?.kill("SIGTERM");
}
