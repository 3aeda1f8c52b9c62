"""Serve protocol: conformance and byte-equality against in-process embedding.

Drives the ProtocolServer directly (in process) and, for one case, the real
``tokenmark serve`` subprocess over pipes.
"""

from __future__ import annotations

import json
import subprocess
import sys

import numpy as np
import pytest

from tokenmark import corpus
from tokenmark.embedder import EmbedConfig, embed, write_trace
from tokenmark.payload import WatermarkPayload, bits_to_str
from tokenmark.providers import ScriptedProvider
from tokenmark.serve import (
    E_BAD_MESSAGE,
    E_STATE,
    E_TOKEN,
    E_VERSION,
    E_VOCAB_SIZE,
    PROTOCOL_VERSION,
    ProtocolServer,
)


@pytest.fixture()
def session_vocab():
    return corpus.build_random_vocab(77, 48)


@pytest.fixture()
def base_config():
    return EmbedConfig(x=8, seed=4242, max_new_tokens=200)


def hello_msg(vocab, payload, x=8, gamma=0.5, **extra):
    msg = {
        "type": "hello",
        "version": PROTOCOL_VERSION,
        "vocab_size": len(vocab),
        "x": x,
        "gamma": gamma,
        "payload_bits": bits_to_str(payload.detection_bits),
    }
    msg.update(extra)
    return msg


def drive_session(server, vocab, provider, payload, x=8):
    """Adapter-side loop: greedy sampling under returned constraints."""
    resp = server.handle_line(json.dumps(hello_msg(vocab, payload, x=x)))
    assert resp["type"] == "hello-ack", resp
    tokens: list[int] = []
    last = None
    while True:
        probs = provider([], tokens)
        if probs is None:
            break
        msg = {
            "type": "step",
            "probs": probs.tolist(),
            "last_id": last,
            "last_text": None if last is None else vocab.text(last),
        }
        ack = server.handle_line(json.dumps(msg))
        assert ack["type"] == "step-ack", ack
        if ack["decision"] == "embed":
            allowed = ack["allowed"]
            token = max(allowed, key=lambda i: (probs[i], -i))
        else:
            token = int(np.argmax(probs))
        tokens.append(token)
        last = token
    fin = server.handle_line(
        json.dumps(
            {
                "type": "finish",
                "last_id": last,
                "last_text": None if last is None else vocab.text(last),
            }
        )
    )
    assert fin["type"] == "finish-ack", fin
    return tokens, fin


def make_script(vocab, seed, length=80):
    rng = np.random.default_rng(seed)
    newline = next(i for i in range(len(vocab)) if "\n" in vocab.text(i))
    ids = rng.integers(0, len(vocab), size=length).tolist()
    return [newline] + [int(i) for i in ids]


class TestPathEquivalence:
    def test_serve_matches_in_process_embed(self, session_vocab, base_config, tmp_path):
        for case in range(5):
            script = make_script(session_vocab, seed=100 + case)
            provider = ScriptedProvider(len(session_vocab), script)
            payload = WatermarkPayload.from_user_id(5 + case, 8)
            reference = embed([], payload, provider, session_vocab, base_config)

            trace_path = tmp_path / f"serve-{case}.jsonl"
            server = ProtocolServer(session_vocab, base_config, trace_path=str(trace_path))
            tokens, fin = drive_session(server, session_vocab, provider, payload)

            assert tokens == reference.tokens
            assert fin["status"] == reference.summary.status
            assert fin["rounds"] == reference.summary.rounds
            assert fin["bits"] == reference.summary.bits
            ref_path = tmp_path / f"ref-{case}.jsonl"
            with open(ref_path, "w", encoding="utf-8") as fp:
                write_trace(fp, reference.trace, reference.summary)
            assert trace_path.read_bytes() == ref_path.read_bytes()

    def test_dense_bias_mode_returns_vector(self, session_vocab, base_config):
        server = ProtocolServer(session_vocab, base_config)
        payload = WatermarkPayload.from_user_id(5, 8)
        resp = server.handle_line(
            json.dumps(hello_msg(session_vocab, payload, bias_mode="dense"))
        )
        assert resp["type"] == "hello-ack"
        provider = ScriptedProvider(len(session_vocab), make_script(session_vocab, 7))
        tokens = []
        last = None
        saw_biased = False
        while True:
            probs = provider([], tokens)
            if probs is None:
                break
            ack = server.handle_line(
                json.dumps(
                    {
                        "type": "step",
                        "probs": probs.tolist(),
                        "last_id": last,
                        "last_text": None if last is None else session_vocab.text(last),
                    }
                )
            )
            if ack["decision"] == "embed":
                assert ack["biased"] is not None and len(ack["biased"]) == len(session_vocab)
                saw_biased = True
                token = max(ack["allowed"], key=lambda i: (probs[i], -i))
            else:
                token = int(np.argmax(probs))
            tokens.append(token)
            last = token
        assert saw_biased


class TestConformance:
    def test_malformed_json_yields_error_and_survives(self, session_vocab, base_config):
        server = ProtocolServer(session_vocab, base_config)
        resp = server.handle_line("{not json")
        assert resp["type"] == "error" and resp["code"] == E_BAD_MESSAGE
        # The process-level loop must keep serving.
        payload = WatermarkPayload.from_user_id(1, 8)
        assert server.handle_line(json.dumps(hello_msg(session_vocab, payload)))[
            "type"
        ] == "hello-ack"

    def test_version_mismatch(self, session_vocab, base_config):
        server = ProtocolServer(session_vocab, base_config)
        payload = WatermarkPayload.from_user_id(1, 8)
        msg = hello_msg(session_vocab, payload, version=99)
        resp = server.handle_line(json.dumps(msg))
        assert resp["type"] == "error" and resp["code"] == E_VERSION

    def test_vocab_size_mismatch(self, session_vocab, base_config):
        server = ProtocolServer(session_vocab, base_config)
        payload = WatermarkPayload.from_user_id(1, 8)
        msg = hello_msg(session_vocab, payload)
        msg["vocab_size"] = 7
        resp = server.handle_line(json.dumps(msg))
        assert resp["type"] == "error" and resp["code"] == E_VOCAB_SIZE

    def test_step_without_hello(self, session_vocab, base_config):
        server = ProtocolServer(session_vocab, base_config)
        resp = server.handle_line(json.dumps({"type": "step", "probs": []}))
        assert resp["type"] == "error" and resp["code"] == E_STATE

    def test_missing_last_token_detected(self, session_vocab, base_config):
        server = ProtocolServer(session_vocab, base_config)
        payload = WatermarkPayload.from_user_id(1, 8)
        server.handle_line(json.dumps(hello_msg(session_vocab, payload)))
        probs = np.full(len(session_vocab), 1.0 / len(session_vocab))
        ack = server.handle_line(
            json.dumps({"type": "step", "probs": probs.tolist(), "last_id": None})
        )
        assert ack["type"] == "step-ack"
        resp = server.handle_line(
            json.dumps({"type": "step", "probs": probs.tolist(), "last_id": None})
        )
        assert resp["type"] == "error" and resp["code"] == E_STATE

    def test_token_text_mismatch_rejected(self, session_vocab, base_config):
        server = ProtocolServer(session_vocab, base_config)
        payload = WatermarkPayload.from_user_id(1, 8)
        server.handle_line(json.dumps(hello_msg(session_vocab, payload)))
        probs = np.full(len(session_vocab), 1.0 / len(session_vocab))
        server.handle_line(json.dumps({"type": "step", "probs": probs.tolist(), "last_id": None}))
        resp = server.handle_line(
            json.dumps(
                {"type": "step", "probs": probs.tolist(), "last_id": 0, "last_text": "wrong"}
            )
        )
        assert resp["type"] == "error" and resp["code"] == E_TOKEN

    def test_bad_payload_bits(self, session_vocab, base_config):
        server = ProtocolServer(session_vocab, base_config)
        msg = {
            "type": "hello",
            "version": PROTOCOL_VERSION,
            "vocab_size": len(session_vocab),
            "x": 8,
            "gamma": 0.5,
            "payload_bits": "10x0",
        }
        resp = server.handle_line(json.dumps(msg))
        assert resp["type"] == "error" and resp["code"] == E_BAD_MESSAGE

    def test_finish_before_newline_reports_none(self, session_vocab, base_config):
        server = ProtocolServer(session_vocab, base_config)
        payload = WatermarkPayload.from_user_id(1, 8)
        server.handle_line(json.dumps(hello_msg(session_vocab, payload)))
        plain = next(
            i for i in range(len(session_vocab)) if "\n" not in session_vocab.text(i)
        )
        probs = np.full(len(session_vocab), 0.001)
        probs[plain] = 1.0 - 0.001 * (len(session_vocab) - 1)
        last = None
        for _ in range(5):
            ack = server.handle_line(
                json.dumps(
                    {
                        "type": "step",
                        "probs": probs.tolist(),
                        "last_id": last,
                        "last_text": None if last is None else session_vocab.text(last),
                    }
                )
            )
            assert ack["decision"] == "dormant"
            last = plain
        fin = server.handle_line(
            json.dumps({"type": "finish", "last_id": last, "last_text": session_vocab.text(last)})
        )
        assert fin["type"] == "finish-ack" and fin["status"] == "none"

    def test_empty_session_finish(self, session_vocab, base_config):
        server = ProtocolServer(session_vocab, base_config)
        payload = WatermarkPayload.from_user_id(1, 8)
        server.handle_line(json.dumps(hello_msg(session_vocab, payload)))
        fin = server.handle_line(json.dumps({"type": "finish"}))
        assert fin["type"] == "finish-ack" and fin["status"] == "none"

    def test_sparse_mode_round_trip(self, session_vocab, base_config):
        from tokenmark.detector import detect

        server = ProtocolServer(session_vocab, base_config)
        payload = WatermarkPayload.from_user_id(13, 8)
        server.handle_line(json.dumps(hello_msg(session_vocab, payload)))
        provider = ScriptedProvider(len(session_vocab), make_script(session_vocab, 31))
        tokens: list[int] = []
        last = None
        k = 12
        while True:
            probs = provider([], tokens)
            if probs is None:
                break
            top = np.argsort(probs)[-k:]
            sparse = {
                "topk": [[int(i), float(probs[i])] for i in sorted(top)],
                "pmax": float(probs.max()),
                "pmin": float(probs.min()),
            }
            ack = server.handle_line(
                json.dumps(
                    {
                        "type": "step",
                        "probs": sparse,
                        "last_id": last,
                        "last_text": None if last is None else session_vocab.text(last),
                    }
                )
            )
            assert ack["type"] == "step-ack", ack
            if ack["decision"] == "embed":
                # Sample within the allowed set using the full distribution,
                # as a host with its own dense view would.
                token = max(ack["allowed"], key=lambda i: (probs[i], -i))
            else:
                token = int(np.argmax(probs))
            tokens.append(token)
            last = token
        fin = server.handle_line(
            json.dumps({"type": "finish", "last_id": last, "last_text": session_vocab.text(last)})
        )
        assert fin["type"] == "finish-ack"
        if fin["status"] == "complete":
            out = detect(session_vocab.detokenize(tokens), session_vocab, base_config)
            assert out.detected and out.user_bits == payload.detection_bits


class TestSubprocess:
    def test_serve_subprocess_round_trip(self, tmp_path):
        vocab = corpus.build_random_vocab(9, 32)
        vocab_path = tmp_path / "vocab.tsv"
        with open(vocab_path, "w", encoding="utf-8") as fp:
            vocab.save(fp)
        payload = WatermarkPayload.from_user_id(3, 8)
        provider = ScriptedProvider(len(vocab), make_script(vocab, 55, length=60))
        config = EmbedConfig(x=8, seed=99, max_new_tokens=200)
        reference = embed([], payload, provider, vocab, config)

        proc = subprocess.Popen(
            [
                sys.executable, "-m", "tokenmark.cli", "serve",
                "--vocab", str(vocab_path), "--seed", "99", "--x", "8",
            ],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
        )

        def rpc(msg):
            proc.stdin.write(json.dumps(msg) + "\n")
            proc.stdin.flush()
            return json.loads(proc.stdout.readline())

        try:
            resp = rpc(hello_msg(vocab, payload))
            assert resp["type"] == "hello-ack"
            tokens: list[int] = []
            last = None
            while True:
                probs = provider([], tokens)
                if probs is None:
                    break
                ack = rpc(
                    {
                        "type": "step",
                        "probs": probs.tolist(),
                        "last_id": last,
                        "last_text": None if last is None else vocab.text(last),
                    }
                )
                if ack["decision"] == "embed":
                    token = max(ack["allowed"], key=lambda i: (probs[i], -i))
                else:
                    token = int(np.argmax(probs))
                tokens.append(token)
                last = token
            fin = rpc({"type": "finish", "last_id": last, "last_text": vocab.text(last)})
            assert fin["status"] == reference.summary.status
            assert tokens == reference.tokens
        finally:
            proc.stdin.close()
            proc.wait(timeout=10)
