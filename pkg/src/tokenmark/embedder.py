"""Embedding loop: partition-constrained greedy decoding with an audit trace.

The session object separates *planning* a step (pattern decision, partition,
outlier handling) from *committing* the sampled token, so the same logic
serves both the in-process loop here and the line-protocol serve mode where
the host samples and reports back.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from tokenmark import outlier as outlier_mod
from tokenmark import skipper as skipper_mod
from tokenmark.payload import WatermarkPayload
from tokenmark.skipper import Decision, PatternSets, SkipperState
from tokenmark.vocab import HashChain, PartitionMask, Vocabulary, partition, partition_size

DEFAULT_SEED = 123456789

# Provider contract: (prompt_ids, generated_ids) -> probability vector over
# the vocabulary, or None to signal end of sequence.  Must be deterministic.
TokenDistributionProvider = Callable[[Sequence[int], Sequence[int]], Optional[np.ndarray]]


class SessionError(RuntimeError):
    pass


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EmbedConfig:
    """Knobs shared by embedding and detection.

    ``thr_p_dis`` is accepted for config compatibility but has no effect.
    ``chained_hash=False`` pins the partition seed to ``seed`` for the whole
    run (the fixed-hash comparison mode of the eval harness).
    """

    max_new_tokens: int = 400
    gamma: float = 0.5
    x: int = 24
    outlier_scale: float = 1.5
    seed: int = DEFAULT_SEED
    chained_hash: bool = True
    start_on_newline: bool = True
    thr_p_dis: float | None = None
    pattern_sets: PatternSets = field(default_factory=PatternSets)

    def validate(self, vocab_size: int | None = None) -> None:
        if self.max_new_tokens < 1:
            raise ConfigError(f"max_new_tokens must be >= 1, got {self.max_new_tokens}")
        if self.x < 2 or self.x % 2:
            raise ConfigError(f"watermark length must be even and >= 2, got {self.x}")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError(f"gamma must be in (0, 1), got {self.gamma}")
        if self.outlier_scale <= 0:
            raise ConfigError(f"outlier scale must be positive, got {self.outlier_scale}")
        if vocab_size is not None:
            try:
                partition_size(vocab_size, self.gamma)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None

    @property
    def half(self) -> int:
        return self.x // 2


@dataclass(frozen=True)
class TraceRecord:
    """One generated token's audit entry."""

    step: int
    token_id: int
    decision: str  # "dormant" | "embed" | "skip" | "rollback"
    pattern: int | None = None
    rollback_requested: int = 0
    rollback_applied: int = 0
    bit_index: int | None = None  # within-round position
    round_index: int | None = None
    phase: str | None = None  # "detect" | "correct"
    intended_bit: int | None = None
    in_selected: bool | None = None  # sampled token's membership in the hash-selected set
    outlier_count: int | None = None
    tolerance: int | None = None
    hash_before: int | None = None
    hash_after: int | None = None

    def to_json(self) -> str:
        rec = {
            "step": self.step,
            "token": self.token_id,
            "decision": self.decision,
            "pattern": self.pattern,
            "rollback_requested": self.rollback_requested,
            "rollback_applied": self.rollback_applied,
            "bit_index": self.bit_index,
            "round": self.round_index,
            "phase": self.phase,
            "intended": self.intended_bit,
            "in_selected": self.in_selected,
            "outliers": self.outlier_count,
            "tolerance": self.tolerance,
            "hash_before": None if self.hash_before is None else f"{self.hash_before:016x}",
            "hash_after": None if self.hash_after is None else f"{self.hash_after:016x}",
        }
        return json.dumps(rec, separators=(",", ":"))


@dataclass(frozen=True)
class TraceSummary:
    status: str  # "complete" | "partial" | "none"
    rounds: int
    bits: int
    tokens: int

    def to_json(self) -> str:
        rec = {
            "summary": True,
            "status": self.status,
            "rounds": self.rounds,
            "bits": self.bits,
            "tokens": self.tokens,
        }
        return json.dumps(rec, separators=(",", ":"))


@dataclass
class EmbedResult:
    tokens: list[int]
    trace: list[TraceRecord]
    summary: TraceSummary

    @property
    def status(self) -> str:
        return self.summary.status

    def text(self, vocab: Vocabulary) -> str:
        return vocab.detokenize(self.tokens)


def write_trace(fp, trace: list[TraceRecord], summary: TraceSummary) -> None:
    for rec in trace:
        fp.write(rec.to_json() + "\n")
    fp.write(summary.to_json() + "\n")


@dataclass
class StepPlan:
    """Planned outcome for the step about to be sampled."""

    decision: str  # "dormant" | "embed" | "skip" | "rollback"
    pattern: int | None = None
    rollback_requested: int = 0
    rollback_applied: int = 0
    bit_index: int | None = None
    round_index: int | None = None
    phase: str | None = None
    intended_bit: int | None = None
    allowed: np.ndarray | None = None  # membership vector to sample from
    d_member: np.ndarray | None = None
    side_member: np.ndarray | None = None
    report: outlier_mod.OutlierReport | None = None
    hash_before: int | None = None
    wrapped: bool = False

    def sample(self, probs: np.ndarray) -> int:
        if self.decision == "embed":
            return outlier_mod.biased_argmax(probs, self.allowed)
        return outlier_mod.greedy_argmax(probs)


class EmbedSession:
    """Stateful embedding run over one generation stream."""

    def __init__(self, payload: WatermarkPayload | None, vocab: Vocabulary, config: EmbedConfig):
        config.validate(len(vocab))
        if payload is not None and payload.x != config.x:
            raise ConfigError(
                f"payload length {payload.x} does not match configured length {config.x}"
            )
        self.payload = payload
        self.vocab = vocab
        self.config = config
        self.chain = HashChain(config.seed, chained=config.chained_hash)
        self.state = SkipperState(x=config.x)
        self.active = False
        self.tolerance = [0] * config.half
        self.tokens: list[int] = []
        self.trace: list[TraceRecord] = []
        self._prev_text: str | None = None
        self._pending: StepPlan | None = None

    @property
    def enabled(self) -> bool:
        return self.payload is not None

    @property
    def has_pending(self) -> bool:
        return self._pending is not None

    def prepare_step(self, probs: np.ndarray, sparse_ids: np.ndarray | None = None) -> StepPlan:
        """Decide the upcoming step and compute its sampling constraint.

        ``sparse_ids`` marks the experimental top-k path of the serve
        protocol: the vector is a pmin-padded reconstruction, so the sum
        check is skipped and outlier statistics run over just those entries.
        """
        if self._pending is not None:
            raise SessionError("previous step was never committed")
        if sparse_ids is None:
            probs = outlier_mod.validate_distribution(probs, expected_size=len(self.vocab))
        else:
            probs = np.asarray(probs, dtype=np.float64)
            if probs.size != len(self.vocab):
                raise outlier_mod.DistributionError(
                    f"distribution size {probs.size} does not match vocabulary size {len(self.vocab)}"
                )
        if not self.enabled or not self.active:
            plan = StepPlan(decision="dormant")
        else:
            decision = skipper_mod.inspect(self.state, self._prev_text, self.config.pattern_sets)
            plan = self._plan_from_decision(decision, probs, sparse_ids)
        self._pending = plan
        return plan

    def _detect_outliers(self, probs: np.ndarray, sparse_ids: np.ndarray | None):
        if sparse_ids is None:
            return outlier_mod.detect_upper_outliers(probs, self.config.outlier_scale)
        sub = outlier_mod.detect_upper_outliers(probs[sparse_ids], self.config.outlier_scale)
        return outlier_mod.OutlierReport(
            upper_outliers=np.sort(sparse_ids[sub.upper_outliers]),
            f_upper=sub.f_upper,
            q1=sub.q1,
            q3=sub.q3,
            s=sub.s,
        )

    def _plan_from_decision(
        self, decision: Decision, probs: np.ndarray, sparse_ids: np.ndarray | None = None
    ) -> StepPlan:
        applied = 0
        if decision.kind == "rollback":
            applied = skipper_mod.rollback_bits(self.state, self.chain, decision.rollback)
            return StepPlan(
                decision="rollback",
                pattern=decision.pattern,
                rollback_requested=decision.rollback,
                rollback_applied=applied,
            )
        if decision.kind == "skip":
            return StepPlan(decision="skip", pattern=decision.pattern)

        bit_index = decision.bit_index
        phase = "detect" if bit_index < self.config.half else "correct"
        if phase == "detect":
            intended = self.payload.detection_bits[bit_index]
        else:
            intended = self.tolerance[bit_index - self.config.half]
        hash_before = self.chain.current
        mask = partition(len(self.vocab), hash_before, self.config.gamma)
        side = mask if intended == 1 else mask.complement()
        report = None
        allowed = side
        if phase == "detect":
            report = self._detect_outliers(probs, sparse_ids)
            allowed = outlier_mod.augment_partition(side, report, hash_before)
        return StepPlan(
            decision="embed",
            pattern=decision.pattern,
            bit_index=bit_index,
            round_index=decision.round_index,
            phase=phase,
            intended_bit=intended,
            allowed=allowed.member,
            d_member=mask.member,
            side_member=side.member,
            report=report,
            hash_before=hash_before,
            wrapped=decision.wrapped,
        )

    def commit_token(self, token_id: int) -> TraceRecord:
        """Record the sampled token and advance session state."""
        plan = self._pending
        if plan is None:
            raise SessionError("no step prepared")
        self._pending = None
        if not 0 <= token_id < len(self.vocab):
            raise SessionError(f"token id {token_id} outside vocabulary")

        tolerance = None
        in_selected = None
        hash_after = None
        if plan.decision == "embed":
            if not plan.allowed[token_id]:
                raise SessionError(
                    f"sampled token {token_id} is outside the allowed partition side"
                )
            in_selected = bool(plan.d_member[token_id])
            if plan.phase == "detect":
                tolerance = outlier_mod.tolerance_bit(token_id, plan.report, plan.side_member)
                self.tolerance[plan.bit_index] = tolerance
            hash_after = self.chain.advance(token_id)
            if plan.wrapped:
                # Round finished: next round records fresh outlier events.
                self.tolerance = [0] * self.config.half

        record = TraceRecord(
            step=len(self.tokens),
            token_id=token_id,
            decision=plan.decision,
            pattern=plan.pattern,
            rollback_requested=plan.rollback_requested,
            rollback_applied=plan.rollback_applied,
            bit_index=plan.bit_index,
            round_index=plan.round_index,
            phase=plan.phase,
            intended_bit=plan.intended_bit,
            in_selected=in_selected,
            outlier_count=None if plan.report is None else plan.report.count,
            tolerance=tolerance,
            hash_before=plan.hash_before,
            hash_after=hash_after,
        )
        self.trace.append(record)
        self.tokens.append(token_id)
        text = self.vocab.text(token_id)
        if self.enabled and not self.active and self.config.start_on_newline:
            if "\n" in text:
                self.active = True  # embedding starts from the next token
        elif self.enabled and not self.config.start_on_newline:
            self.active = True
        self._prev_text = text
        return record

    def finish(self) -> EmbedResult:
        rounds = self.state.pattern7_round
        bits = self.chain.position
        if rounds >= 1:
            status = "complete"
        elif bits > 0:
            status = "partial"
        else:
            status = "none"
        summary = TraceSummary(status=status, rounds=rounds, bits=bits, tokens=len(self.tokens))
        return EmbedResult(tokens=list(self.tokens), trace=list(self.trace), summary=summary)


def embed(
    prompt: Sequence[int],
    payload: WatermarkPayload | None,
    provider: TokenDistributionProvider,
    vocab: Vocabulary,
    config: EmbedConfig,
) -> EmbedResult:
    """Run the full embedding loop: greedy decoding under partition constraints.

    ``payload=None`` disables the watermark entirely, which must reproduce
    plain greedy decoding of the provider.
    """
    session = EmbedSession(payload, vocab, config)
    for _ in range(config.max_new_tokens):
        probs = provider(prompt, session.tokens)
        if probs is None:
            break
        plan = session.prepare_step(probs)
        token_id = plan.sample(np.asarray(probs, dtype=np.float64))
        session.commit_token(token_id)
    return session.finish()


def greedy_generate(
    prompt: Sequence[int],
    provider: TokenDistributionProvider,
    vocab: Vocabulary,
    config: EmbedConfig,
) -> list[int]:
    """Watermark-free greedy decoding baseline."""
    tokens: list[int] = []
    for _ in range(config.max_new_tokens):
        probs = provider(prompt, tokens)
        if probs is None:
            break
        probs = outlier_mod.validate_distribution(probs, expected_size=len(vocab))
        tokens.append(outlier_mod.greedy_argmax(probs))
    return tokens
