/** The certbound/1 wire protocol: handshake, request, and response shapes. */

import type { LoadedNet } from "./net.js";

export const PROTOCOL = "certbound/1";

export interface Handshake {
  protocol: typeof PROTOCOL;
  labels: number;
  shape: number[];
  digest: string;
  concurrent: boolean;
}

export interface ClassifyRequest {
  id: string;
  input: number[];
}

export interface ClassifyResponse {
  id: string;
  scores: number[];
}

export interface ErrorResponse {
  id: string | null;
  error: string;
}

export function handshake(net: LoadedNet, concurrent: boolean): Handshake {
  return {
    protocol: PROTOCOL,
    labels: net.doc.labels,
    shape: [net.inputSize],
    digest: net.digest,
    concurrent,
  };
}
