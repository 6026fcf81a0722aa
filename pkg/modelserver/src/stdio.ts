/**
 * Stdio mode: emit the handshake line, then answer each request line with a
 * response line. Strictly sequential (declares "concurrent": false); a
 * malformed request yields an error object and the loop continues.
 */

import { createInterface } from "node:readline";

import { forward, validInput, type LoadedNet } from "./net.js";
import { handshake, type ErrorResponse } from "./protocol.js";

export function serveStdio(net: LoadedNet): void {
  const emit = (obj: unknown) => process.stdout.write(JSON.stringify(obj) + "\n");
  emit(handshake(net, false));
  const rl = createInterface({ input: process.stdin, terminal: false });
  rl.on("line", (line) => {
    const trimmed = line.trim();
    if (!trimmed) return;
    let id: string | null = null;
    try {
      const msg = JSON.parse(trimmed) as Record<string, unknown>;
      id = typeof msg.id === "string" ? msg.id : null;
      if (id === null) throw new Error("request must carry a string id");
      if (!validInput(net, msg.input)) {
        throw new Error(`input must be ${net.inputSize} finite numbers`);
      }
      emit({ id, scores: forward(net.doc, msg.input) });
    } catch (err) {
      const response: ErrorResponse = { id, error: String(err instanceof Error ? err.message : err) };
      emit(response);
    }
  });
}
