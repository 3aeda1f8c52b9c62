/**
 * The adapter proper: spawns (or attaches to) a core serve process and runs
 * one decode loop against it. The adapter holds no watermark logic; it
 * forwards distributions, applies the returned sampling constraint, and
 * reports each sampled token back, so the core stays the single source of
 * truth.
 */

import { ChildProcess, spawn } from "node:child_process";
import { createInterface, Interface } from "node:readline";
import { Readable, Writable } from "node:stream";

import {
  FinishAck,
  HelloAck,
  PROTOCOL_VERSION,
  Request,
  Response,
  StepAck,
  encodeLine,
  parseResponse,
} from "./protocol.js";
import { TokenDistributionModel, argmax, argmaxWithin } from "./fakeModel.js";
import { Vocab } from "./vocab.js";

export class ProtocolFailure extends Error {
  constructor(
    readonly code: string,
    message: string,
  ) {
    super(`${code}: ${message}`);
  }
}

/** Line-synchronous request/response channel to a serve process. */
export class CoreConnection {
  private readonly lines: AsyncIterator<string>;
  private readonly stdin: Writable;

  constructor(
    private readonly proc: ChildProcess,
    reader?: Interface,
  ) {
    if (!proc.stdout || !proc.stdin) throw new Error("serve process needs piped stdio");
    const rl = reader ?? createInterface({ input: proc.stdout as Readable });
    this.lines = rl[Symbol.asyncIterator]();
    this.stdin = proc.stdin;
  }

  static launch(command: string[], options: { cwd?: string } = {}): CoreConnection {
    const [bin, ...args] = command;
    const proc = spawn(bin, args, { stdio: ["pipe", "pipe", "inherit"], cwd: options.cwd });
    return new CoreConnection(proc);
  }

  get alive(): boolean {
    return this.proc.exitCode === null && !this.proc.killed;
  }

  async request(msg: Request): Promise<Response> {
    return this.requestRaw(encodeLine(msg));
  }

  /** Send a raw line (conformance tests use this to send malformed input). */
  async requestRaw(line: string): Promise<Response> {
    this.stdin.write(line.endsWith("\n") ? line : line + "\n");
    const next = await this.lines.next();
    if (next.done) throw new Error("serve process closed its output");
    return parseResponse(next.value);
  }

  async close(): Promise<number | null> {
    this.stdin.end();
    if (this.proc.exitCode !== null) return this.proc.exitCode;
    return new Promise((resolve) => this.proc.once("exit", (code) => resolve(code)));
  }
}

export interface SessionOptions {
  x: number;
  gamma: number;
  payloadBits: string;
  biasMode?: "set" | "dense";
}

export interface SessionResult {
  tokens: number[];
  text: string;
  status: FinishAck["status"];
  rounds: number;
  bits: number;
  stepAcks: StepAck[];
}

function expect<T extends Response["type"]>(resp: Response, type: T): Extract<Response, { type: T }> {
  if (resp.type === "error") throw new ProtocolFailure(resp.code, resp.message);
  if (resp.type !== type) throw new Error(`expected ${type}, got ${resp.type}`);
  return resp as Extract<Response, { type: T }>;
}

/**
 * Drive one full generation: hello, one step per decoded token, finish.
 * Sampling follows the protocol contract: greedy within `allowed` for embed
 * decisions (lowest id on ties), plain greedy otherwise.
 */
export async function runSession(
  core: CoreConnection,
  model: TokenDistributionModel,
  vocab: Vocab,
  options: SessionOptions,
): Promise<SessionResult> {
  const hello = await core.request({
    type: "hello",
    version: PROTOCOL_VERSION,
    vocab_size: vocab.size,
    x: options.x,
    gamma: options.gamma,
    payload_bits: options.payloadBits,
    ...(options.biasMode ? { bias_mode: options.biasMode } : {}),
  });
  expect(hello, "hello-ack") satisfies HelloAck;

  const tokens: number[] = [];
  const stepAcks: StepAck[] = [];
  let last: number | null = null;
  for (;;) {
    const probs = model.next(tokens);
    if (probs === null) break;
    const resp = await core.request({
      type: "step",
      probs,
      last_id: last,
      last_text: last === null ? null : vocab.text(last),
    });
    const ack = expect(resp, "step-ack");
    stepAcks.push(ack);
    const token =
      ack.decision === "embed" && ack.allowed !== null
        ? argmaxWithin(probs, ack.allowed)
        : argmax(probs);
    tokens.push(token);
    last = token;
  }

  const fin = expect(
    await core.request({
      type: "finish",
      last_id: last,
      last_text: last === null ? null : vocab.text(last),
    }),
    "finish-ack",
  );
  return {
    tokens,
    text: vocab.detokenize(tokens),
    status: fin.status,
    rounds: fin.rounds,
    bits: fin.bits,
    stepAcks,
  };
}
