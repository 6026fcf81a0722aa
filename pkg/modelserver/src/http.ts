/**
 * HTTP mode: GET /handshake and POST /classify, JSON in and out. Stateless
 * per request (declares "concurrent": true). Malformed bodies get HTTP 400
 * with a JSON error object. Prints "PORT <n>" once listening so harnesses
 * can bind port 0.
 */

import { createServer, type IncomingMessage, type ServerResponse } from "node:http";

import { forward, validInput, type LoadedNet } from "./net.js";
import { handshake } from "./protocol.js";

function send(res: ServerResponse, code: number, body: unknown): void {
  const blob = JSON.stringify(body);
  res.writeHead(code, {
    "Content-Type": "application/json",
    "Content-Length": Buffer.byteLength(blob),
  });
  res.end(blob);
}

function readBody(req: IncomingMessage): Promise<string> {
  return new Promise((resolve, reject) => {
    const chunks: Buffer[] = [];
    req.on("data", (c: Buffer) => chunks.push(c));
    req.on("end", () => resolve(Buffer.concat(chunks).toString("utf-8")));
    req.on("error", reject);
  });
}

export function serveHttp(net: LoadedNet, port: number): void {
  const shake = handshake(net, true);
  const server = createServer(async (req, res) => {
    if (req.method === "GET" && req.url === "/handshake") {
      send(res, 200, shake);
      return;
    }
    if (req.method === "POST" && req.url === "/classify") {
      let id: string | null = null;
      try {
        const msg = JSON.parse(await readBody(req)) as Record<string, unknown>;
        id = typeof msg.id === "string" ? msg.id : null;
        if (id === null) throw new Error("request must carry a string id");
        if (!validInput(net, msg.input)) {
          throw new Error(`input must be ${net.inputSize} finite numbers`);
        }
        send(res, 200, { id, scores: forward(net.doc, msg.input) });
      } catch (err) {
        send(res, 400, { id, error: String(err instanceof Error ? err.message : err) });
      }
      return;
    }
    send(res, 404, { error: `no route for ${req.method} ${req.url}` });
  });
  server.listen(port, "127.0.0.1", () => {
    const addr = server.address();
    const bound = typeof addr === "object" && addr !== null ? addr.port : port;
    process.stdout.write(`PORT ${bound}\n`);
  });
}
