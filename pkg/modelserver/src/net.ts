/**
 * Feed-forward evaluation of the builtin weight JSON format:
 *   {"layers": [{"w": [[...]], "b": [...], "act": "relu"|"id"}], "labels": L}
 * Logits are softmaxed after the last layer. Plain double-precision loops so
 * the numbers line up with any other straightforward implementation.
 */

import { createHash } from "node:crypto";
import { readFileSync } from "node:fs";

export interface Layer {
  w: number[][];
  b: number[];
  act: "relu" | "id";
}

export interface NetDoc {
  layers: Layer[];
  labels: number;
}

export interface LoadedNet {
  doc: NetDoc;
  digest: string;
  inputSize: number;
}

export function loadNet(path: string): LoadedNet {
  const blob = readFileSync(path);
  const doc = JSON.parse(blob.toString("utf-8")) as NetDoc;
  if (!Array.isArray(doc.layers) || doc.layers.length === 0) {
    throw new Error(`${path}: weight file needs a nonempty "layers" array`);
  }
  let width = doc.layers[0].w[0].length;
  doc.layers.forEach((layer, i) => {
    if (layer.w.length !== layer.b.length) {
      throw new Error(`layer ${i}: weight rows ${layer.w.length} != bias length ${layer.b.length}`);
    }
    for (const row of layer.w) {
      if (row.length !== width) {
        throw new Error(`layer ${i}: expected input width ${width}, row has ${row.length}`);
      }
    }
    width = layer.w.length;
  });
  if (width !== doc.labels) {
    throw new Error(`final layer width ${width} != labels ${doc.labels}`);
  }
  return {
    doc,
    digest: createHash("sha256").update(blob).digest("hex"),
    inputSize: doc.layers[0].w[0].length,
  };
}

export function forward(doc: NetDoc, input: number[]): number[] {
  let h = input;
  for (const layer of doc.layers) {
    const out = new Array<number>(layer.w.length);
    for (let r = 0; r < layer.w.length; r++) {
      const row = layer.w[r];
      let v = layer.b[r];
      for (let c = 0; c < row.length; c++) {
        v += row[c] * h[c];
      }
      out[r] = layer.act === "relu" && v < 0 ? 0 : v;
    }
    h = out;
  }
  let top = -Infinity;
  for (const v of h) top = Math.max(top, v);
  const exps = h.map((v) => Math.exp(v - top));
  const total = exps.reduce((a, b) => a + b, 0);
  return exps.map((e) => e / total);
}

export function validInput(net: LoadedNet, input: unknown): input is number[] {
  return (
    Array.isArray(input) &&
    input.length === net.inputSize &&
    input.every((v) => typeof v === "number" && Number.isFinite(v))
  );
}
