import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

export const DIST_MAIN = join(dirname(fileURLToPath(import.meta.url)), "..", "dist", "main.js");

export const XOR_NET = {
  layers: [
    { w: [[1, 1], [1, 1], [-1, -1], [-1, -1]], b: [0, -1, 1, 0], act: "relu" },
    { w: [[2, -4, 2, -4], [-2, 4, -2, 4]], b: [0.5, -0.5], act: "id" },
  ],
  labels: 2,
};

export const IDENTITY_NET = {
  layers: [{ w: [[1, 0], [0, 1]], b: [0, 0], act: "id" }],
  labels: 2,
};

export function writeNet(doc: unknown): string {
  const dir = mkdtempSync(join(tmpdir(), "modelserver-"));
  const path = join(dir, "net.json");
  writeFileSync(path, JSON.stringify(doc));
  return path;
}
