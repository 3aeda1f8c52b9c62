"""Randomized soak: round-trip recovery, serve-path parity, protocol fuzz.

Heavier than the acceptance suite; intended for manual runs when touching
the kernels, the pattern machine, or the protocol.

Usage:
    python benchmarks/soak.py [sessions]
"""

from __future__ import annotations

import json
import sys
import time

import numpy as np

from tokenmark import corpus, kernels
from tokenmark.detector import detect
from tokenmark.embedder import EmbedConfig, embed
from tokenmark.payload import WatermarkPayload, bits_to_str
from tokenmark.providers import CodeTemplateProvider, ScriptedProvider, SeededRandomProvider
from tokenmark.serve import ProtocolServer

GAMMAS = (0.25, 0.375, 0.5, 0.625, 0.75)


def build_session(i: int, demo):
    kind = i % 3
    x = (8, 12, 16, 24, 32)[i % 5]
    if kind == 0:
        vocab = corpus.build_random_vocab(50_000 + i, 32 + 8 * (i % 9), trigger_fraction=0.05 + 0.04 * (i % 9))
        provider = SeededRandomProvider(vocab, seed=90_000 + i, outlier_rate=(0.1, 0.35, 0.6)[i % 3],
                                        newline_period=3 + (i % 5), noise=(0.02, 0.1, 0.4)[i % 3])
        budget = 100 + (i % 4) * 60
    elif kind == 1:
        vocab = corpus.build_random_vocab(70_000 + i, 48, trigger_fraction=0.18)
        rng = np.random.default_rng(i)
        newline = next(t for t in range(len(vocab)) if "\n" in vocab.text(t))
        provider = ScriptedProvider(len(vocab), [newline] + [int(v) for v in rng.integers(0, len(vocab), size=120)])
        budget = 140
    else:
        vocab = demo
        provider = CodeTemplateProvider(demo, seed=20_000 + i, dual_rate=(0.0, 0.1, 0.3)[i % 3])
        budget = 180 + (i % 5) * 60
        x = (16, 24)[i % 2]
    config = EmbedConfig(max_new_tokens=budget, x=x, gamma=GAMMAS[i % 5],
                         seed=kernels.mix64(31_000 + i), chained_hash=(i % 7 != 0))
    payload = WatermarkPayload.from_user_id(kernels.mix64(i) % (1 << (x // 2)), x)
    return vocab, provider, payload, config


def soak_round_trip(n_sessions: int) -> int:
    demo = corpus.build_demo_vocab()
    complete = 0
    failures = 0
    for i in range(n_sessions):
        vocab, provider, payload, config = build_session(i, demo)
        result = embed([], payload, provider, vocab, config)
        if result.summary.status != "complete":
            continue
        complete += 1
        out = detect(result.text(vocab), vocab, config)
        if not (out.detected and out.user_bits == payload.detection_bits):
            failures += 1
            print(f"  ROUND-TRIP FAILURE at session {i}: {out.reason}")
    print(f"round-trip: {complete}/{n_sessions} complete, {failures} failures")
    return failures


def soak_serve_parity(n_sessions: int) -> int:
    demo = corpus.build_demo_vocab()
    mismatches = 0
    for i in range(n_sessions):
        vocab, provider, payload, config = build_session(i * 3 + 1, demo)
        reference = embed([], payload, provider, vocab, config)
        server = ProtocolServer(vocab, config)
        resp = server.handle_line(json.dumps({
            "type": "hello", "version": 1, "vocab_size": len(vocab),
            "x": config.x, "gamma": config.gamma,
            "payload_bits": bits_to_str(payload.detection_bits)}))
        assert resp["type"] == "hello-ack", resp
        tokens: list[int] = []
        last = None
        while len(tokens) < config.max_new_tokens:
            probs = provider([], tokens)
            if probs is None:
                break
            ack = server.handle_line(json.dumps({
                "type": "step", "probs": probs.tolist(), "last_id": last,
                "last_text": None if last is None else vocab.text(last)}))
            if ack["decision"] == "embed":
                tid = max(ack["allowed"], key=lambda t: (probs[t], -t))
            else:
                tid = int(np.argmax(probs))
            tokens.append(tid)
            last = tid
        fin = server.handle_line(json.dumps({
            "type": "finish", "last_id": last,
            "last_text": None if last is None else vocab.text(last)}))
        if tokens != reference.tokens or fin["status"] != reference.summary.status:
            mismatches += 1
            print(f"  SERVE MISMATCH at session {i}")
    print(f"serve parity: {n_sessions} sessions, {mismatches} mismatches")
    return mismatches


def soak_protocol_fuzz(n_lines: int) -> None:
    import random

    rnd = random.Random(99)
    vocab = corpus.build_random_vocab(5, 32)
    server = ProtocolServer(vocab, EmbedConfig(x=8))
    pieces = ['{', '}', '"type"', ':', '"hello"', '"step"', '"probs"', '[', ']', '0.5', ',',
              'null', '-1', '1e308', '"\\u0000"', 'true', '"version"', '"vocab_size"',
              '"payload_bits"', '"101"', '"x"', '8', '"finish"', '"topk"']
    for _ in range(n_lines):
        line = "".join(rnd.choice(pieces) for _ in range(rnd.randrange(1, 14)))
        resp = server.handle_line(line)
        assert isinstance(resp, dict) and "type" in resp
    resp = server.handle_line(json.dumps({
        "type": "hello", "version": 1, "vocab_size": 32, "x": 8,
        "gamma": 0.5, "payload_bits": "1010"}))
    alive = resp["type"] == "hello-ack"
    print(f"protocol fuzz: {n_lines} lines, server alive: {alive}")
    assert alive


def main() -> int:
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 300
    t0 = time.time()
    bad = soak_round_trip(n)
    bad += soak_serve_parity(max(20, n // 5))
    soak_protocol_fuzz(2000)
    print(f"total {time.time() - t0:.1f}s, {bad} problems")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
