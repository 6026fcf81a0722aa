import { loadNet } from "./net.js";
import { serveHttp } from "./http.js";
import { serveStdio } from "./stdio.js";

function usage(): never {
  process.stderr.write(
    "usage: main.js stdio <weights.json>\n" +
    "       main.js http <weights.json> [port]   (port 0 picks a free one)\n",
  );
  process.exit(2);
}

const [mode, weights, portArg] = process.argv.slice(2);
if (!mode || !weights) usage();

let net;
try {
  net = loadNet(weights);
} catch (err) {
  process.stderr.write(`error: ${err instanceof Error ? err.message : err}\n`);
  process.exit(1);
}

if (mode === "stdio") {
  serveStdio(net);
} else if (mode === "http") {
  serveHttp(net, portArg ? Number(portArg) : 0);
} else {
  usage();
}
