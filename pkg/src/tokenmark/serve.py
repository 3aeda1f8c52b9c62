"""Line-delimited JSON protocol for driving embedding from a host process.

The core owns all watermark logic and the partition secrets; the host owns
the model and the decode loop.  Per step the host sends the distribution
plus the previously sampled token, and receives either nothing to do or the
set of token ids it must sample from.  See PROTOCOL.md for the field-by-field
contract.  Every request gets exactly one response; a request that fails
aborts the session with an ``error`` response but never the process.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from typing import IO

import numpy as np

from tokenmark import outlier as outlier_mod
from tokenmark.embedder import EmbedConfig, EmbedSession, SessionError, write_trace
from tokenmark.payload import PayloadError, WatermarkPayload, parse_bits
from tokenmark.vocab import Vocabulary

PROTOCOL_VERSION = 1

E_BAD_MESSAGE = "bad-message"
E_VERSION = "version-mismatch"
E_VOCAB_SIZE = "vocab-size-mismatch"
E_STATE = "protocol-state"
E_DISTRIBUTION = "bad-distribution"
E_TOKEN = "bad-token"
E_INTERNAL = "internal"


class ProtocolError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class ProtocolServer:
    """One serve process: at most one active session at a time."""

    def __init__(self, vocab: Vocabulary, base_config: EmbedConfig, trace_path: str | None = None):
        self.vocab = vocab
        self.base_config = base_config
        self.trace_path = trace_path
        self.session: EmbedSession | None = None
        self.bias_mode = "set"
        self._session_counter = 0

    def handle_line(self, line: str) -> dict:
        try:
            return self._dispatch(line)
        except ProtocolError as exc:
            self.session = None
            return {"type": "error", "code": exc.code, "message": str(exc)}
        except Exception as exc:  # noqa: BLE001 - protocol totality over crashes
            self.session = None
            return {"type": "error", "code": E_INTERNAL, "message": f"{type(exc).__name__}: {exc}"}

    def _dispatch(self, line: str) -> dict:
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(E_BAD_MESSAGE, f"not valid JSON: {exc}") from None
        if not isinstance(msg, dict) or "type" not in msg:
            raise ProtocolError(E_BAD_MESSAGE, "message must be an object with a 'type' field")
        kind = msg["type"]
        if kind == "hello":
            return self._handle_hello(msg)
        if kind == "step":
            return self._handle_step(msg)
        if kind == "finish":
            return self._handle_finish(msg)
        raise ProtocolError(E_BAD_MESSAGE, f"unknown message type {kind!r}")

    def _handle_hello(self, msg: dict) -> dict:
        version = msg.get("version")
        if version != PROTOCOL_VERSION:
            raise ProtocolError(E_VERSION, f"protocol version {version!r}, expected {PROTOCOL_VERSION}")
        vocab_size = msg.get("vocab_size")
        if vocab_size != len(self.vocab):
            raise ProtocolError(
                E_VOCAB_SIZE, f"host vocabulary has {vocab_size} tokens, core has {len(self.vocab)}"
            )
        try:
            bits = parse_bits(msg["payload_bits"])
        except (KeyError, TypeError, PayloadError) as exc:
            raise ProtocolError(E_BAD_MESSAGE, f"bad payload_bits: {exc}") from None
        x = msg.get("x", self.base_config.x)
        gamma = msg.get("gamma", self.base_config.gamma)
        if not isinstance(x, int) or 2 * len(bits) != x:
            raise ProtocolError(E_BAD_MESSAGE, f"payload_bits length {len(bits)} does not match x={x}")
        self.bias_mode = msg.get("bias_mode", "set")
        if self.bias_mode not in ("set", "dense"):
            raise ProtocolError(E_BAD_MESSAGE, f"unknown bias_mode {self.bias_mode!r}")
        config = dataclasses.replace(self.base_config, x=x, gamma=gamma)
        try:
            config.validate(len(self.vocab))
            payload = WatermarkPayload(detection_bits=bits)
            self.session = EmbedSession(payload, self.vocab, config)
        except (ValueError, PayloadError) as exc:
            raise ProtocolError(E_BAD_MESSAGE, str(exc)) from None
        self._session_counter += 1
        return {"type": "hello-ack", "session": self._session_counter, "version": PROTOCOL_VERSION}

    def _commit_last(self, msg: dict) -> None:
        last_id = msg.get("last_id")
        has_pending = self.session is not None and self.session.has_pending
        if last_id is None:
            if has_pending:
                raise ProtocolError(E_STATE, "previous step is missing its sampled token")
            return
        if not has_pending:
            raise ProtocolError(E_STATE, "no step awaiting a sampled token")
        if not isinstance(last_id, int) or not 0 <= last_id < len(self.vocab):
            raise ProtocolError(E_TOKEN, f"token id {last_id!r} outside vocabulary")
        expected_text = self.vocab.text(last_id)
        last_text = msg.get("last_text")
        if last_text is not None and last_text != expected_text:
            raise ProtocolError(
                E_TOKEN, f"token text mismatch for id {last_id}: host vocabulary differs"
            )
        try:
            self.session.commit_token(last_id)
        except SessionError as exc:
            raise ProtocolError(E_TOKEN, str(exc)) from None

    def _parse_probs(self, raw) -> tuple[np.ndarray, np.ndarray | None]:
        n = len(self.vocab)
        if isinstance(raw, list):
            if len(raw) != n:
                raise ProtocolError(E_DISTRIBUTION, f"dense vector has {len(raw)} entries, vocab has {n}")
            return np.asarray(raw, dtype=np.float64), None
        if isinstance(raw, dict) and "topk" in raw:
            # Experimental sparse mode: outlier statistics run over the top-k
            # entries only, and the remainder is padded with the reported
            # global minimum so the gap bias is preserved.
            try:
                pmax = float(raw["pmax"])
                pmin = float(raw["pmin"])
                pairs = [(int(i), float(p)) for i, p in raw["topk"]]
            except (KeyError, TypeError, ValueError) as exc:
                raise ProtocolError(E_DISTRIBUTION, f"bad sparse distribution: {exc}") from None
            if self.bias_mode == "dense":
                raise ProtocolError(E_DISTRIBUTION, "sparse probabilities require bias_mode 'set'")
            dense = np.full(n, pmin, dtype=np.float64)
            ids = []
            for tid, p in pairs:
                if not 0 <= tid < n:
                    raise ProtocolError(E_DISTRIBUTION, f"sparse token id {tid} outside vocabulary")
                dense[tid] = p
                ids.append(tid)
            if not ids:
                raise ProtocolError(E_DISTRIBUTION, "sparse distribution has no entries")
            if dense.max() > pmax + 1e-12 or dense.min() < pmin - 1e-12:
                raise ProtocolError(E_DISTRIBUTION, "sparse entries exceed reported pmax/pmin bounds")
            return dense, np.asarray(sorted(ids), dtype=np.int64)
        raise ProtocolError(E_DISTRIBUTION, "probs must be a dense list or a sparse topk object")

    def _handle_step(self, msg: dict) -> dict:
        if self.session is None:
            raise ProtocolError(E_STATE, "no active session; send hello first")
        self._commit_last(msg)
        probs, sparse_ids = self._parse_probs(msg.get("probs"))
        try:
            plan = self.session.prepare_step(probs, sparse_ids=sparse_ids)
        except outlier_mod.DistributionError as exc:
            raise ProtocolError(E_DISTRIBUTION, str(exc)) from None
        ack: dict = {
            "type": "step-ack",
            "decision": plan.decision,
            "pattern": plan.pattern,
            "rollback": plan.rollback_applied,
            "bit_index": plan.bit_index,
            "round": plan.round_index,
            "allowed": None,
            "biased": None,
        }
        if plan.decision == "embed":
            if self.bias_mode == "dense":
                ack["biased"] = outlier_mod.apply_gap_bias(
                    probs, _MaskView(plan.allowed)
                ).tolist()
            ack["allowed"] = np.flatnonzero(plan.allowed).tolist()
        return ack

    def _handle_finish(self, msg: dict) -> dict:
        if self.session is None:
            raise ProtocolError(E_STATE, "no active session; send hello first")
        self._commit_last(msg)
        if self.session.has_pending:
            raise ProtocolError(E_STATE, "finish while a step is awaiting its sampled token")
        result = self.session.finish()
        if self.trace_path:
            with open(self.trace_path, "w", encoding="utf-8") as fp:
                write_trace(fp, result.trace, result.summary)
        self.session = None
        return {
            "type": "finish-ack",
            "status": result.summary.status,
            "rounds": result.summary.rounds,
            "bits": result.summary.bits,
            "tokens": result.summary.tokens,
        }


class _MaskView:
    """Minimal PartitionMask stand-in for the dense-bias response path."""

    def __init__(self, member: np.ndarray):
        self.member = member
        self.total_size = int(member.size)


def run(vocab: Vocabulary, config: EmbedConfig, trace_path: str | None = None,
        stdin: IO[str] | None = None, stdout: IO[str] | None = None) -> int:
    """Serve loop over text streams; returns the process exit code."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    server = ProtocolServer(vocab, config, trace_path=trace_path)
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        response = server.handle_line(line)
        stdout.write(json.dumps(response, separators=(",", ":")) + "\n")
        stdout.flush()
    return 0
