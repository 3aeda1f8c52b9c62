"""Desk-scale vocabularies, the demo code template, and attack phrase banks.

Every vocabulary built here is prefix-free (no entry is a proper prefix of
another), which makes greedy tokenization invertible: detokenize followed by
tokenize reproduces the exact token boundaries.  Real model vocabularies do
not have this property; these fixtures deliberately do, so desk-scale
round-trips are exact and failures mean logic bugs, not split drift.
String literals therefore use single quotes (a bare ``"`` entry would be a
prefix of the ``\"\"\"`` docstring delimiter).
"""

from __future__ import annotations

import numpy as np

from tokenmark import kernels
from tokenmark.skipper import PatternSets
from tokenmark.vocab import Vocabulary

STRUCTURE_TOKENS = (
    "\n", "    ", "import ", "def ", "class ", "for ", "while ", "if ",
    "elif ", "print", "return ", "yield ", " in ", " = ", " == ", " + ",
    " < ", "(", ")", ":", ", ", "#", '"""', "'", "pass",
)

# Identifiers used by the demo template.
TEMPLATE_IDENTIFIERS = (
    "fetch", "url", "retries", "data", "load", "count", "items", "parse",
    "drain", "queue", "limit", "buffer", "scan", "emit", "alpha", "beta",
    "delta", "agent", "run", "pages", "total", "entry", "visit", "cursor",
    "sweep", "nodes", "depth", "order", "sort", "probe", "offset", "pivot",
    "label", "self", "os", "sys",
)

# Replacement pool for identifier-renaming attacks; kept out of the template
# so renames are visible, but present in the vocabulary so attacked code
# still tokenizes.
RESERVE_IDENTIFIERS = (
    "omega", "sigma", "kappa", "zeta", "theta", "lumen", "quill", "ember",
    "sable", "frond",
)

# '#' comment bodies (leading space, run to end of line).
TEMPLATE_COMMENTS = (" retry on failure",)
RESERVE_COMMENTS = (" todo tighten bounds", " note audit this pass", " check stale flag")

# Docstring bodies (padded with spaces on both sides).
TEMPLATE_DOCSTRINGS = (" pull one remote page ", " keeps visitor state ")
RESERVE_DOCSTRINGS = (" rebuilt from draft ", " spare manual notes ")

# Single-quoted string contents.
TEMPLATE_STRINGS = ("warm cache",)
RESERVE_STRINGS = ("cold start", "hot standby")

DIGIT_TOKENS = tuple(str(d) for d in range(10))

DEMO_TEMPLATE = '''import os
import sys

def fetch(url, retries):
    """ pull one remote page """
    data = load(url)
    count = 0
    while count < retries:
        items = parse(data)
        count = count + 1
    # retry on failure
    print(items)
    return items, count

def drain(queue, limit):
    buffer = scan(queue)
    label = 'warm cache'
    emit(buffer, limit)
    'warm cache'
    yield buffer, limit, queue
    yield alpha, beta, delta
    return buffer

class agent:
    """ keeps visitor state """
    def run(self, pages):
        total = 0
        for entry in pages:
            total = total + visit(entry)
        emit(scan(pages), total)
        yield total, pages, cursor
        return total

def sweep(nodes, depth):
    order = sort(nodes)
    probe(order, depth, cursor)
    yield order, depth, nodes
    yield cursor, offset, pivot
    return order, depth
'''


def check_prefix_free(texts: list[str]) -> list[tuple[str, str]]:
    """Return all (prefix, extension) entry pairs; empty means prefix-free."""
    bad = []
    ordered = sorted(texts)
    for i, a in enumerate(ordered):
        for b in ordered[i + 1 :]:
            if not b.startswith(a):
                break
            bad.append((a, b))
    return bad


def build_demo_vocab() -> Vocabulary:
    """The standard template vocabulary: structure + identifiers + banks."""
    texts = list(STRUCTURE_TOKENS)
    texts += TEMPLATE_IDENTIFIERS + RESERVE_IDENTIFIERS
    texts += TEMPLATE_COMMENTS + RESERVE_COMMENTS
    texts += TEMPLATE_DOCSTRINGS + RESERVE_DOCSTRINGS
    texts += TEMPLATE_STRINGS + RESERVE_STRINGS
    texts += DIGIT_TOKENS
    bad = check_prefix_free(texts)
    if bad:
        raise AssertionError(f"demo vocabulary is not prefix-free: {bad}")
    return Vocabulary(texts)


def benign_token_mask(vocab: Vocabulary, sets: PatternSets | None = None) -> np.ndarray:
    """True for tokens that never trigger a skip pattern or carry layout.

    Used to shape mock-provider noise so that freely chosen (correction
    phase) tokens do not wreck the code structure of a sample.
    """
    sets = sets or PatternSets()
    special = set("".join(sets.set_b.keys()) + "".join(sets.set_b.values()))
    special.update("".join(sets.set_c))
    mask = np.zeros(len(vocab), dtype=bool)
    for tid in range(len(vocab)):
        text = vocab.text(tid)
        if any(ch in " \t\n" for ch in text):
            continue
        if any(ch in special for ch in text):
            continue
        if any(d in text for d in sets.set_d):
            continue
        if any(text == kw or text.startswith(kw) for kw in sets.set_a):
            continue
        mask[tid] = True
    return mask


RANDOM_ALPHABET = "abcdefghjkmnpqrstuvwxyz"

RANDOM_SPECIALS = (
    "\n   ",  # whitespace-only with newline
    "    ",  # whitespace-only
    " == ",  # assignment/comparison trigger
    "#aa ",  # comment trigger
    "(ab ",  # opener
    ") cd",  # closer
    "def ",  # keyword trigger
    "x\nyz",  # newline inside a plain token
)

# For the sweep harness: only newline-terminated effects (no bracket locks,
# which can become permanent in short synthetic runs) and extra whitespace
# variants so tasks differ in how hostile they are to bit placement.
EVAL_SPECIALS = (
    "\n   ",
    "    ",
    "\t   ",
    " \t  ",
    "  \t ",
    "\t\t  ",
    " == ",
    "#aa ",
    "def ",
    "x\nyz",
)


def build_random_vocab(
    seed: int,
    size: int,
    trigger_fraction: float = 0.15,
    specials: tuple[str, ...] = RANDOM_SPECIALS,
) -> Vocabulary:
    """Fixed-width token table for randomized sessions.

    All entries are exactly 4 characters (hence prefix-free).  A slice of
    the table consists of pattern-trigger and whitespace lookalikes so that
    random sessions exercise the skip machinery, and one entry is always a
    newline token so embedding can activate.
    """
    if size < 16:
        raise ValueError("random vocabulary needs at least 16 entries")
    n_trigger = max(1, min(int(size * trigger_fraction), len(specials)))
    texts = list(specials[:n_trigger])
    state = kernels.mix64(seed ^ 0xA5A5A5A5)
    seen = set(texts)
    while len(texts) < size:
        state, value = kernels.stream_next(state)
        chars = []
        for _ in range(4):
            chars.append(RANDOM_ALPHABET[value % len(RANDOM_ALPHABET)])
            value //= len(RANDOM_ALPHABET)
        text = "".join(chars)
        if text not in seen:
            seen.add(text)
            texts.append(text)
    bad = check_prefix_free(texts)
    if bad:
        raise AssertionError(f"random vocabulary is not prefix-free: {bad}")
    return Vocabulary(texts)
