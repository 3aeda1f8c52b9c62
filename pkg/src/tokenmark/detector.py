"""Model-free watermark extraction.

Needs only the vocabulary, the pattern machine, and the embed-time secrets
(seed, gamma, watermark length, pattern sets).  The token stream is replayed
through the same skip/rollback decisions the embedder made; surviving tokens
yield one bit each from partition membership, and rounds are recovered by
XORing each round's correction half back onto its detection half.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from tokenmark import skipper as skipper_mod
from tokenmark.embedder import EmbedConfig
from tokenmark.payload import Bits, bits_to_int, recover
from tokenmark.skipper import SkipperState
from tokenmark.vocab import HashChain, TokenizeError, Vocabulary, partition

FAIL_TOKENIZATION = "tokenization-error"
FAIL_NO_ANCHOR = "no-newline-anchor"
FAIL_INSUFFICIENT = "insufficient-bits"
FAIL_CONFLICT = "round-conflict"


@dataclass(frozen=True)
class ReplayRecord:
    """Decision taken for one token during detection replay."""

    position: int  # index into the token stream
    token_id: int
    decision: str  # "embed" | "skip" | "rollback"
    pattern: int | None
    rollback_requested: int
    rollback_applied: int
    bit_index: int | None
    round_index: int | None
    extracted_bit: int | None
    hash_before: int | None
    hash_after: int | None


@dataclass
class DetectionResult:
    detected: bool
    user_bits: Bits | None = None
    user_id: int | None = None
    rounds_used: int = 0
    reason: str | None = None
    round_values: list[Bits] = field(default_factory=list)
    bit_stream: Bits = ()
    replay: list[ReplayRecord] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.detected


def detect(code: str, vocab: Vocabulary, config: EmbedConfig) -> DetectionResult:
    """Recover the embedded user bits from code text alone.

    The config must match the embed-time settings; never raises on
    well-formed input, returning an enumerated failure reason instead.
    """
    config.validate(len(vocab))
    try:
        ids = vocab.tokenize(code)
    except TokenizeError:
        return DetectionResult(detected=False, reason=FAIL_TOKENIZATION)

    texts = [vocab.text(i) for i in ids]
    anchor = None
    if config.start_on_newline:
        for i, text in enumerate(texts):
            if "\n" in text:
                anchor = i
                break
    elif ids:
        anchor = 0
    if anchor is None:
        return DetectionResult(detected=False, reason=FAIL_NO_ANCHOR)

    chain = HashChain(config.seed, chained=config.chained_hash)
    state = SkipperState(x=config.x)
    bits: list[int] = []
    replay: list[ReplayRecord] = []

    for pos in range(anchor + 1, len(ids)):
        decision = skipper_mod.inspect(state, texts[pos - 1], config.pattern_sets)
        extracted = None
        hash_before = None
        hash_after = None
        applied = 0
        if decision.kind == "rollback":
            applied = skipper_mod.rollback_bits(state, chain, decision.rollback)
            del bits[len(bits) - applied :]
        elif decision.kind == "embed":
            hash_before = chain.current
            mask = partition(len(vocab), hash_before, config.gamma)
            extracted = int(mask.member[ids[pos]])
            bits.append(extracted)
            hash_after = chain.advance(ids[pos])
        replay.append(
            ReplayRecord(
                position=pos,
                token_id=ids[pos],
                decision=decision.kind,
                pattern=decision.pattern,
                rollback_requested=decision.rollback,
                rollback_applied=applied,
                bit_index=decision.bit_index,
                round_index=decision.round_index,
                extracted_bit=extracted,
                hash_before=hash_before,
                hash_after=hash_after,
            )
        )

    rounds = [tuple(bits[i : i + config.x]) for i in range(0, len(bits) - config.x + 1, config.x)]
    base = DetectionResult(
        detected=False,
        bit_stream=tuple(bits),
        replay=replay,
    )
    if not rounds:
        base.reason = FAIL_INSUFFICIENT
        return base

    half = config.half
    recovered = [recover(r[:half], r[half:]) for r in rounds]
    base.round_values = recovered
    if any(r != recovered[0] for r in recovered[1:]):
        base.reason = FAIL_CONFLICT
        return base

    base.detected = True
    base.user_bits = recovered[0]
    base.user_id = bits_to_int(recovered[0])
    base.rounds_used = len(recovered)
    return base
