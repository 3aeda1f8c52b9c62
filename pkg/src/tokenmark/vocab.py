"""Token vocabulary, greedy tokenizer, hash chain, and vocabulary partitioner.

This is the shared substrate of embedding and detection: both sides must
tokenize identically, walk the same hash chain, and derive the same
partitions, or the recovered bits drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import IO, Iterable

import numpy as np

from tokenmark import kernels


class VocabError(ValueError):
    """Raised for malformed vocabulary files or invalid entries."""


class TokenizeError(ValueError):
    """Raised when input text cannot be segmented with the vocabulary."""

    def __init__(self, message: str, offset: int):
        super().__init__(message)
        self.offset = offset


_ESCAPES = {"n": "\n", "t": "\t", "\\": "\\"}
_UNESCAPES = {"\n": "\\n", "\t": "\\t", "\\": "\\\\"}


def _unescape(text: str, lineno: int) -> str:
    out: list[str] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\":
            if i + 1 >= len(text) or text[i + 1] not in _ESCAPES:
                raise VocabError(f"line {lineno}: bad escape in token text")
            out.append(_ESCAPES[text[i + 1]])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def escape_token_text(text: str) -> str:
    return "".join(_UNESCAPES.get(ch, ch) for ch in text)


class Vocabulary:
    """Ordered token table: ids are contiguous 0..n-1, texts unique."""

    def __init__(self, texts: Iterable[str]):
        self._texts: list[str] = list(texts)
        if len(self._texts) < 2:
            raise VocabError("vocabulary needs at least 2 tokens")
        self._ids: dict[str, int] = {}
        for tid, text in enumerate(self._texts):
            if not text:
                raise VocabError(f"token {tid}: empty text")
            if text in self._ids:
                raise VocabError(f"token {tid}: duplicate text {text!r}")
            self._ids[text] = tid
        self._max_len = max(len(t) for t in self._texts)

    def __len__(self) -> int:
        return len(self._texts)

    def text(self, token_id: int) -> str:
        return self._texts[token_id]

    def id_of(self, text: str) -> int:
        return self._ids[text]

    def __contains__(self, text: str) -> bool:
        return text in self._ids

    @property
    def texts(self) -> list[str]:
        return list(self._texts)

    def tokenize(self, code: str) -> list[int]:
        """Greedy leftmost-longest segmentation.

        At each position the longest matching entry is consumed; a position
        with no match raises :class:`TokenizeError` carrying the byte offset.
        """
        ids: list[int] = []
        pos = 0
        n = len(code)
        while pos < n:
            limit = min(self._max_len, n - pos)
            for length in range(limit, 0, -1):
                tid = self._ids.get(code[pos : pos + length])
                if tid is not None:
                    ids.append(tid)
                    pos += length
                    break
            else:
                offset = len(code[:pos].encode("utf-8"))
                raise TokenizeError(
                    f"no vocabulary entry matches input at byte offset {offset}", offset
                )
        return ids

    def detokenize(self, ids: Iterable[int]) -> str:
        return "".join(self._texts[i] for i in ids)

    def is_prefix_free(self) -> bool:
        """True when no entry is a proper prefix of another entry.

        A prefix-free table guarantees detokenize/tokenize round-trips, which
        is what makes desk-scale detection exact; real model vocabularies do
        not have this property and may mis-split after tampering.
        """
        ordered = sorted(self._texts)
        for a, b in zip(ordered, ordered[1:]):
            if b.startswith(a):
                return False
        return True

    def save(self, fp: IO[str]) -> None:
        for tid, text in enumerate(self._texts):
            fp.write(f"{tid}\t{escape_token_text(text)}\n")


def load_vocabulary(fp: IO[str]) -> Vocabulary:
    """Parse the line-delimited vocab format: ``<id><TAB><escaped-text>``.

    Escapes: ``\\n`` ``\\t`` ``\\\\``.  Comment lines start with ``#!``.
    Ids must ascend contiguously from 0.  Errors name the offending line.
    """
    texts: list[str] = []
    seen: dict[str, int] = {}
    expected = 0
    for lineno, raw in enumerate(fp, start=1):
        line = raw.rstrip("\n")
        if not line or line.startswith("#!"):
            continue
        if "\t" not in line:
            raise VocabError(f"line {lineno}: missing tab separator")
        id_part, text_part = line.split("\t", 1)
        try:
            tid = int(id_part)
        except ValueError:
            raise VocabError(f"line {lineno}: bad token id {id_part!r}") from None
        if tid != expected:
            if tid in range(expected):
                raise VocabError(f"line {lineno}: duplicate id {tid}")
            raise VocabError(f"line {lineno}: non-contiguous id {tid} (expected {expected})")
        text = _unescape(text_part, lineno)
        if not text:
            raise VocabError(f"line {lineno}: empty token text")
        if text in seen:
            raise VocabError(f"line {lineno}: duplicate text (same as id {seen[text]})")
        seen[text] = tid
        texts.append(text)
        expected += 1
    if expected < 2:
        raise VocabError("vocabulary needs at least 2 tokens")
    return Vocabulary(texts)


class HashChain:
    """Running 64-bit hash with a snapshot stack for bit rollbacks.

    ``advance`` is called once per bit-carrying token.  When ``chained`` is
    false the current value stays pinned to the seed (the fixed-hash mode of
    the eval harness) but snapshots are still tracked so rollback accounting
    is unchanged.
    """

    def __init__(self, seed: int, chained: bool = True):
        self.seed = seed & kernels.MASK64
        self.current = self.seed
        self.chained = chained
        self._snapshots: list[tuple[int, int]] = []  # (bit_position, prior hash)

    @property
    def position(self) -> int:
        return len(self._snapshots)

    def advance(self, token_id: int) -> int:
        self._snapshots.append((self.position, self.current))
        if self.chained:
            self.current = kernels.advance(self.current, token_id)
        return self.current

    def rollback(self, count: int) -> int:
        """Pop up to ``count`` snapshots; returns how many were popped."""
        popped = min(count, len(self._snapshots))
        for _ in range(popped):
            _, self.current = self._snapshots.pop()
        return popped

    def snapshot_positions(self) -> list[int]:
        return [pos for pos, _ in self._snapshots]


@dataclass
class PartitionMask:
    """One split of the vocabulary: ``member[i]`` is True for selected ids."""

    member: np.ndarray
    gamma: float

    @property
    def total_size(self) -> int:
        return int(self.member.size)

    @property
    def size(self) -> int:
        return int(np.count_nonzero(self.member))

    @property
    def selected(self) -> frozenset[int]:
        return frozenset(int(i) for i in np.flatnonzero(self.member))

    def complement(self) -> "PartitionMask":
        return PartitionMask(member=~self.member, gamma=1.0 - self.gamma)

    def with_added(self, ids: Iterable[int]) -> "PartitionMask":
        member = self.member.copy()
        ids = list(ids)
        if ids:
            member[np.asarray(ids, dtype=np.int64)] = True
        return PartitionMask(member=member, gamma=self.gamma)


def partition_size(total: int, gamma: float) -> int:
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must be in (0, 1), got {gamma}")
    k = math.ceil(gamma * total)
    if not 1 <= k <= total - 1:
        raise ValueError(f"gamma {gamma} leaves an empty side for vocabulary size {total}")
    return k


def partition(vocab_size: int, hash_value: int, gamma: float) -> PartitionMask:
    """Deterministic split of 0..n-1 into selected / complement.

    Seeds the streamed generator with ``hash_value`` and selects exactly
    ``ceil(gamma * n)`` distinct ids by partial Fisher-Yates; identical
    inputs give identical masks.
    """
    k = partition_size(vocab_size, gamma)
    member = kernels.partition_member(hash_value & kernels.MASK64, vocab_size, k)
    return PartitionMask(member=member, gamma=gamma)
