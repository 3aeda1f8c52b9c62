import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { Vocab } from "../src/vocab.js";

/** Core CLI invocation, overridable for non-PATH installs. */
export function coreCommand(): string[] {
  const env = process.env.TOKENMARK_CMD;
  return env ? env.split(" ") : ["tokenmark"];
}

/** Deterministic 32-bit generator (mulberry32) for scripts and payloads. */
export function rng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

const SPECIALS = ["\n   ", "    ", " == ", "#aa ", "(ab ", ") cd", "def ", "x\nyz"];
const LETTERS = "abcdefghjkmnpqrstuvwxyz";

/** Fixed-width (hence prefix-free) token table for the fake model. */
export function buildHostVocab(seed: number, size: number): Vocab {
  const texts = [...SPECIALS];
  const next = rng(seed);
  const seen = new Set(texts);
  while (texts.length < size) {
    let word = "";
    for (let i = 0; i < 4; i++) word += LETTERS[Math.floor(next() * LETTERS.length)];
    if (!seen.has(word)) {
      seen.add(word);
      texts.push(word);
    }
  }
  return new Vocab(texts);
}

/** Random token script opening with the newline token (id 0). */
export function buildScript(seed: number, vocabSize: number, length: number): number[] {
  const next = rng(seed);
  const script = [0];
  for (let i = 0; i < length; i++) script.push(Math.floor(next() * vocabSize));
  return script;
}

export function buildPayloadBits(seed: number, half: number): string {
  const next = rng(seed);
  let bits = "";
  for (let i = 0; i < half; i++) bits += next() < 0.5 ? "0" : "1";
  return bits;
}

export function makeWorkDir(): string {
  return mkdtempSync(join(tmpdir(), "tokenmark-adapter-"));
}

export function writeVocabFile(dir: string, vocab: Vocab): string {
  const path = join(dir, "vocab.tsv");
  writeFileSync(path, vocab.toFileString(), "utf-8");
  return path;
}

export interface ReferenceRun {
  code: string;
  trace: string;
  exitCode: number;
}

/** In-process reference: the core's own embed CLI on the same script. */
export function runReferenceEmbed(
  dir: string,
  tag: string,
  vocabPath: string,
  script: number[],
  payloadBits: string,
  opts: { x: number; gamma: number; seed: number },
): ReferenceRun {
  const codePath = join(dir, `ref-${tag}.py`);
  const tracePath = join(dir, `ref-${tag}.jsonl`);
  const [bin, ...pre] = coreCommand();
  const result = spawnSync(
    bin,
    [
      ...pre,
      "embed",
      "--vocab", vocabPath,
      "--payload-bits", payloadBits,
      "--x", String(opts.x),
      "--gamma", String(opts.gamma),
      "--seed", String(opts.seed),
      "--provider", "scripted",
      "--script", script.join(","),
      "--out", codePath,
      "--trace", tracePath,
    ],
    { encoding: "utf-8" },
  );
  if (result.status !== 0 && result.status !== 1) {
    throw new Error(`reference embed failed (${result.status}): ${result.stderr}`);
  }
  return {
    code: readFileSync(codePath, "utf-8"),
    trace: readFileSync(tracePath, "utf-8"),
    exitCode: result.status ?? -1,
  };
}
