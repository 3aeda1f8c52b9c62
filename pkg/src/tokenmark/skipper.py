"""Code-structure skip patterns.

Decides, per generation step, whether the next token carries a watermark
bit, is skipped, or forces previously assigned bits to be rescinded.  The
decision is a pure function of the previously emitted token's text plus the
machine state, which is what lets detection replay embedding exactly.

Pattern summary (first match wins; one lock slot, so an active pattern
blocks the others):

1. keyword trigger (``def``, ``print``, ...)  -> skip until a newline token
2. unmatched bracket/quote opener             -> skip until the matching closer
3. assignment/comparison/comment symbol       -> rescind this line's bits, skip until newline
4. triple-quote/backtick delimiter            -> rescind the trigger's bit, skip until same delimiter
5. whitespace-only token                      -> rescind its own bit if it carried one; skip
6. exclusivity: lowest-numbered trigger wins; locked means no new trigger
7. all bits placed -> wrap the cursor and keep embedding rounds
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from tokenmark.vocab import HashChain

_IDENT_CHARS = frozenset("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_")
_WHITESPACE = frozenset(" \t\n")

DEFAULT_SET_A = ("def", "class", "print", "pprint", "int", "float", "str", "for", "while", "if", "elif")
DEFAULT_SET_B = {"(": ")", "[": "]", "{": "}", "'": "'", '"': '"'}
# Two-character symbols first so "==" is seen before "=".
DEFAULT_SET_C = ("==", ">=", "<=", "!=", "=", "#", ">", "<")
DEFAULT_SET_D = ('"""', "'''", "```")


@dataclass(frozen=True)
class PatternSets:
    """Trigger lexemes; overridable so an operator can adapt them to a vocabulary."""

    set_a: tuple[str, ...] = DEFAULT_SET_A
    set_b: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_SET_B))
    set_c: tuple[str, ...] = DEFAULT_SET_C
    set_d: tuple[str, ...] = DEFAULT_SET_D

    @classmethod
    def from_config(cls, raw: dict[str, str]) -> "PatternSets":
        """Build from a flat config section; values are comma-separated lexemes.

        ``set_b`` entries are opener+closer pairs written side by side, e.g.
        ``(), [], '', ""``.
        """
        kwargs = {}
        if "set_a" in raw:
            kwargs["set_a"] = tuple(_split_lexemes(raw["set_a"]))
        if "set_b" in raw:
            pairs = {}
            for item in _split_lexemes(raw["set_b"]):
                if len(item) != 2:
                    raise ValueError(f"set_b entry must be an opener+closer pair, got {item!r}")
                pairs[item[0]] = item[1]
            kwargs["set_b"] = pairs
        if "set_c" in raw:
            sym = sorted(_split_lexemes(raw["set_c"]), key=len, reverse=True)
            kwargs["set_c"] = tuple(sym)
        if "set_d" in raw:
            kwargs["set_d"] = tuple(_split_lexemes(raw["set_d"]))
        return cls(**kwargs)


def _split_lexemes(value: str) -> list[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


@dataclass
class SkipperState:
    """Mutable per-session pattern state; create one per embed/detect run."""

    x: int
    lock: int | None = None  # active pattern id, 1..4
    lock_opener: str | None = None  # pattern 2: the opening symbol
    lock_delim: str | None = None  # pattern 4: the delimiter string
    bit_cursor: int = 0  # next bit index within the current round
    line_anchor: int = 0  # cursor value recorded at the last newline token
    pattern7_round: int = 0  # completed rounds
    bits_assigned: int = 0  # net bits over all rounds (mirrors the hash chain)
    prev_carried_bit: bool = False  # whether the token now being inspected carried a bit

    def copy(self) -> "SkipperState":
        return replace(self)


@dataclass(frozen=True)
class Decision:
    """Outcome for one step: embed a bit, skip, or rollback-then-skip."""

    kind: str  # "embed" | "skip" | "rollback"
    pattern: int | None = None  # trigger or active-lock pattern id (7 for embed)
    rollback: int = 0  # requested rescind count (before clamping)
    bit_index: int | None = None  # within-round index for embed decisions
    round_index: int | None = None
    wrapped: bool = False  # this embed completed a round

    @property
    def carries_bit(self) -> bool:
        return self.kind == "embed"


def _is_whitespace_only(text: str) -> bool:
    return all(ch in _WHITESPACE for ch in text)


def _match_keyword(text: str, keywords: tuple[str, ...]) -> str | None:
    trimmed = text.strip(" \t\n")
    for kw in keywords:
        if trimmed == kw:
            return kw
        if trimmed.startswith(kw) and trimmed[len(kw)] not in _IDENT_CHARS:
            return kw
    return None


def _carve_delimiters(text: str, delimiters: tuple[str, ...]) -> str:
    """Remove triple-delimiter runs so they are not scanned as single quotes."""
    if not any(d[0] in text for d in delimiters if d):
        return text
    out: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        for d in delimiters:
            if text.startswith(d, i):
                i += len(d)
                break
        else:
            out.append(text[i])
            i += 1
    return "".join(out)


def _find_unmatched_opener(text: str, pairs: dict[str, str], delimiters: tuple[str, ...]) -> str | None:
    """Earliest opener in the token with no matching closer inside the token.

    Pairs closed within the same token are ignored; for quote characters
    (opener == closer) occurrences pair up left to right, so an odd count
    leaves the last one open.
    """
    carved = _carve_delimiters(text, delimiters)
    best_pos: int | None = None
    best_opener: str | None = None
    for opener, closer in pairs.items():
        if opener == closer:
            positions = [i for i, ch in enumerate(carved) if ch == opener]
            if len(positions) % 2 == 1:
                pos = positions[-1]
            else:
                continue
        else:
            stack: list[int] = []
            for i, ch in enumerate(carved):
                if ch == opener:
                    stack.append(i)
                elif ch == closer and stack:
                    stack.pop()
            if not stack:
                continue
            pos = stack[0]
        if best_pos is None or pos < best_pos:
            best_pos = pos
            best_opener = opener
    return best_opener


def _contains_closer(text: str, opener: str, pairs: dict[str, str], delimiters: tuple[str, ...]) -> bool:
    """True when the token closes an earlier opener, ignoring self-closed pairs."""
    carved = _carve_delimiters(text, delimiters)
    closer = pairs[opener]
    if opener == closer:
        return carved.count(opener) % 2 == 1
    balance = 0
    for ch in carved:
        if ch == opener:
            balance += 1
        elif ch == closer:
            if balance > 0:
                balance -= 1
            else:
                return True
    return False


def _match_symbol(text: str, symbols: tuple[str, ...]) -> str | None:
    """Leftmost match; at each position longer symbols are tried first."""
    for i in range(len(text)):
        for sym in symbols:
            if text.startswith(sym, i):
                return sym
    return None


def _match_delimiter(text: str, delimiters: tuple[str, ...]) -> str | None:
    for i in range(len(text)):
        for d in delimiters:
            if text.startswith(d, i):
                return d
    return None


def inspect(state: SkipperState, token_text: str, sets: PatternSets | None = None) -> Decision:
    """Decide the current step from the previously emitted token.

    Mutates ``state`` (locks, cursor, anchors).  Rollback decisions leave the
    cursor untouched; apply them with :func:`rollback_bits`, which also pops
    the hash chain.
    """
    sets = sets or _DEFAULT_SETS
    entry_cursor = state.bit_cursor

    if _is_whitespace_only(token_text):
        # Pattern 5: layout tokens must not keep a bit of their own.
        if state.prev_carried_bit:
            decision = Decision(kind="rollback", pattern=5, rollback=1)
        else:
            decision = Decision(kind="skip", pattern=5)
    elif state.lock is not None:
        # Pattern 6: an active lock suppresses every other trigger.
        pattern = state.lock
        if pattern == 2 and _contains_closer(token_text, state.lock_opener, sets.set_b, sets.set_d):
            _clear_lock(state)
        elif pattern == 4 and state.lock_delim in token_text:
            _clear_lock(state)
        # Newline-terminated locks (patterns 1 and 3) are cleared below.
        decision = Decision(kind="skip", pattern=pattern)
    else:
        keyword = _match_keyword(token_text, sets.set_a)
        opener = None if keyword else _find_unmatched_opener(token_text, sets.set_b, sets.set_d)
        symbol = None if keyword or opener else _match_symbol(token_text, sets.set_c)
        delim = None
        if not (keyword or opener or symbol):
            delim = _match_delimiter(token_text, sets.set_d)
        if keyword is not None:
            # Pattern 1: keyword span; no rollback of the keyword's own bit.
            state.lock = 1
            decision = Decision(kind="skip", pattern=1)
        elif opener is not None:
            # Pattern 2: bracketed/quoted span.
            state.lock = 2
            state.lock_opener = opener
            decision = Decision(kind="skip", pattern=2)
        elif symbol is not None:
            # Pattern 3: rescind the current line ('#': just the trigger's own bit).
            if symbol == "#":
                count = 1 if state.prev_carried_bit else 0
            else:
                count = max(0, state.bit_cursor - state.line_anchor)
            state.lock = 3
            kind = "rollback" if count > 0 else "skip"
            decision = Decision(kind=kind, pattern=3, rollback=count)
        elif delim is not None:
            # Pattern 4: multi-line string; rescind the delimiter's own bit.
            count = 1 if state.prev_carried_bit else 0
            state.lock = 4
            state.lock_delim = delim
            kind = "rollback" if count > 0 else "skip"
            decision = Decision(kind=kind, pattern=4, rollback=count)
        else:
            # Pattern 7: plain token, embed; wrap the cursor at round end.
            bit_index = state.bit_cursor
            round_index = state.pattern7_round
            state.bit_cursor += 1
            state.bits_assigned += 1
            wrapped = False
            if state.bit_cursor >= state.x:
                state.bit_cursor = 0
                state.pattern7_round += 1
                state.line_anchor = 0
                wrapped = True
            decision = Decision(
                kind="embed",
                pattern=7,
                bit_index=bit_index,
                round_index=round_index,
                wrapped=wrapped,
            )

    if "\n" in token_text:
        if state.lock in (1, 3):
            _clear_lock(state)
        # Bits on the next line start at the pre-advance cursor; after a
        # round wrap the anchor clamps to the round start.
        state.line_anchor = min(entry_cursor, state.bit_cursor)

    state.prev_carried_bit = decision.carries_bit
    return decision


def _clear_lock(state: SkipperState) -> None:
    state.lock = None
    state.lock_opener = None
    state.lock_delim = None


def classify_token(token_text: str, sets: PatternSets | None = None) -> str | None:
    """Which trigger class a token text falls into, if any (diagnostics)."""
    sets = sets or _DEFAULT_SETS
    if _is_whitespace_only(token_text):
        return "whitespace"
    if _match_keyword(token_text, sets.set_a):
        return "keyword"
    if _find_unmatched_opener(token_text, sets.set_b, sets.set_d):
        return "opener"
    if _match_symbol(token_text, sets.set_c):
        return "symbol"
    if _match_delimiter(token_text, sets.set_d):
        return "delimiter"
    return None


def rollback_bits(state: SkipperState, chain: HashChain, count: int) -> int:
    """Rescind up to ``count`` bits: cursor back, hash chain popped.

    Clamps at the current round's start and at the snapshots actually
    available (the degenerate line-start case); returns the applied count.
    Emitted tokens are untouched; only watermark accounting moves.
    """
    if count <= 0:
        return 0
    applied = min(count, state.bit_cursor, chain.position)
    if applied > 0:
        popped = chain.rollback(applied)
        assert popped == applied
        state.bit_cursor -= applied
        state.bits_assigned -= applied
        state.line_anchor = min(state.line_anchor, state.bit_cursor)
    return applied


_DEFAULT_SETS = PatternSets()
