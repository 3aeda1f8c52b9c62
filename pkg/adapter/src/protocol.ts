/**
 * Wire types for the tokenmark serve protocol, version 1.
 * One JSON object per line in each direction; every request gets exactly
 * one response. See PROTOCOL.md at the repository root for field semantics.
 */

export const PROTOCOL_VERSION = 1;

export type SparseProbs = {
  topk: Array<[number, number]>;
  pmax: number;
  pmin: number;
};

export interface HelloRequest {
  type: "hello";
  version: number;
  vocab_size: number;
  x: number;
  gamma: number;
  payload_bits: string;
  bias_mode?: "set" | "dense";
}

export interface StepRequest {
  type: "step";
  probs: number[] | SparseProbs;
  last_id: number | null;
  last_text: string | null;
}

export interface FinishRequest {
  type: "finish";
  last_id?: number | null;
  last_text?: string | null;
}

export type Request = HelloRequest | StepRequest | FinishRequest;

export interface HelloAck {
  type: "hello-ack";
  session: number;
  version: number;
}

export interface StepAck {
  type: "step-ack";
  decision: "dormant" | "skip" | "rollback" | "embed";
  pattern: number | null;
  rollback: number;
  bit_index: number | null;
  round: number | null;
  allowed: number[] | null;
  biased: number[] | null;
}

export interface FinishAck {
  type: "finish-ack";
  status: "complete" | "partial" | "none";
  rounds: number;
  bits: number;
  tokens: number;
}

export interface ErrorResponse {
  type: "error";
  code: string;
  message: string;
}

export type Response = HelloAck | StepAck | FinishAck | ErrorResponse;

export function encodeLine(msg: Request): string {
  return JSON.stringify(msg) + "\n";
}

export function parseResponse(line: string): Response {
  const value = JSON.parse(line) as Response;
  if (typeof value !== "object" || value === null || !("type" in value)) {
    throw new Error(`malformed response line: ${line}`);
  }
  return value;
}
