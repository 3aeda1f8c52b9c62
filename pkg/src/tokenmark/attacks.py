"""Textual tamper attacks and the robustness evaluation harness.

Eight attack kinds in two families: the first five mutate existing code
elements, the last three insert new ones.  Attacks are line/regex based
(the threat model is a low-effort developer editing code by hand, not an
AST rewriter) and draw replacements from the fixed phrase banks in
``corpus`` so attacked code still tokenizes under the demo vocabulary.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field

from tokenmark import corpus, kernels
from tokenmark.detector import detect
from tokenmark.embedder import EmbedConfig
from tokenmark.payload import Bits
from tokenmark.vocab import Vocabulary

MODIFY_IDENTIFIERS = "modify-identifiers"
MODIFY_IO = "modify-io"
MODIFY_COMMENTS = "modify-comments"
MODIFY_DATA = "modify-data"
MODIFY_ASSIGNMENTS = "modify-assignments"
ADD_COMMENTS = "add-comments"
ADD_ASSIGNMENTS = "add-assignments"
ADD_REDUNDANT = "add-redundant"

TYPE1_KINDS = (MODIFY_IDENTIFIERS, MODIFY_IO, MODIFY_COMMENTS, MODIFY_DATA, MODIFY_ASSIGNMENTS)
TYPE2_KINDS = (ADD_COMMENTS, ADD_ASSIGNMENTS, ADD_REDUNDANT)
ALL_KINDS = TYPE1_KINDS + TYPE2_KINDS

# Rename targets are restricted to the corpus identifier pools; renaming an
# arbitrary word could land inside a phrase token and break tokenization.
_RENAMEABLE = tuple(corpus.TEMPLATE_IDENTIFIERS + corpus.RESERVE_IDENTIFIERS)


@dataclass(frozen=True)
class AttackOutcome:
    code: str
    kind: str
    applied: bool  # False: no applicable site, code returned unchanged
    description: str = ""


def apply_attack(code: str, kind: str, seed: int, intensity: int = 1) -> AttackOutcome:
    """Apply one seeded attack of the given kind to code text."""
    rng = random.Random(seed)
    if kind not in ALL_KINDS:
        raise ValueError(f"unknown attack kind {kind!r}")
    fn = _DISPATCH[kind]
    out = code
    notes = []
    applied = False
    for _ in range(max(1, intensity)):
        out, note = fn(out, rng)
        if note:
            applied = True
            notes.append(note)
    return AttackOutcome(code=out, kind=kind, applied=applied, description="; ".join(notes))


def _attack_identifiers(code: str, rng: random.Random) -> tuple[str, str]:
    present = [w for w in _RENAMEABLE if re.search(rf"\b{re.escape(w)}\b", code)]
    if not present:
        return code, ""
    target = rng.choice(present)
    pool = [w for w in corpus.RESERVE_IDENTIFIERS if w != target and w not in present]
    if not pool:
        pool = [w for w in corpus.RESERVE_IDENTIFIERS if w != target]
    replacement = rng.choice(pool)
    out = re.sub(rf"\b{re.escape(target)}\b", replacement, code)
    return out, f"renamed {target} -> {replacement}"


_PRINT_RE = re.compile(r"^(?P<indent>[ \t]*)print\((?P<args>[^\n]*)\)[ \t]*$", re.MULTILINE)


def _attack_io(code: str, rng: random.Random) -> tuple[str, str]:
    sites = list(_PRINT_RE.finditer(code))
    if not sites:
        return code, ""
    site = rng.choice(sites)
    if rng.random() < 0.5:
        new_args = rng.choice(corpus.RESERVE_IDENTIFIERS)
        out = code[: site.start()] + f"{site.group('indent')}print({new_args})" + code[site.end() :]
        return out, f"rewrote print args to {new_args}"
    start, end = site.start(), site.end()
    if end < len(code) and code[end] == "\n":
        end += 1
    return code[:start] + code[end:], "removed print statement"


_COMMENT_RE = re.compile(r"#[^\n]*")
_DOCSTRING_RE = re.compile(r'"""[^"]*"""')


def _attack_comments(code: str, rng: random.Random) -> tuple[str, str]:
    comments = list(_COMMENT_RE.finditer(code))
    docstrings = list(_DOCSTRING_RE.finditer(code))
    if not comments and not docstrings:
        return code, ""
    if comments and (not docstrings or rng.random() < 0.6):
        site = rng.choice(comments)
        if rng.random() < 0.5:
            body = rng.choice(corpus.RESERVE_COMMENTS)
            return code[: site.start()] + "#" + body + code[site.end() :], "rewrote comment"
        return code[: site.start()] + code[site.end() :], "removed comment"
    site = rng.choice(docstrings)
    body = rng.choice(corpus.RESERVE_DOCSTRINGS)
    return code[: site.start()] + '"""' + body + '"""' + code[site.end() :], "rewrote docstring"


_DIGIT_RE = re.compile(r"\b\d\b")
_STRING_RE = re.compile(r"'[^'\n]*'")


def _attack_data(code: str, rng: random.Random) -> tuple[str, str]:
    digits = list(_DIGIT_RE.finditer(code))
    strings = list(_STRING_RE.finditer(code))
    if not digits and not strings:
        return code, ""
    if digits and (not strings or rng.random() < 0.5):
        site = rng.choice(digits)
        new = str(rng.randrange(10))
        return code[: site.start()] + new + code[site.end() :], f"changed literal to {new}"
    site = rng.choice(strings)
    body = rng.choice(corpus.RESERVE_STRINGS)
    return code[: site.start()] + "'" + body + "'" + code[site.end() :], "rewrote string literal"


_ASSIGN_RE = re.compile(
    r"^(?P<indent>[ \t]*)(?P<name>[A-Za-z_][A-Za-z0-9_]*) = (?P<rhs>[^\n=][^\n]*)$",
    re.MULTILINE,
)


def _attack_assignments(code: str, rng: random.Random) -> tuple[str, str]:
    sites = list(_ASSIGN_RE.finditer(code))
    if not sites:
        return code, ""
    site = rng.choice(sites)
    if rng.random() < 0.5:
        rhs = str(rng.randrange(10))
        out = (
            code[: site.start()]
            + f"{site.group('indent')}{site.group('name')} = {rhs}"
            + code[site.end() :]
        )
        return out, f"rewrote assignment of {site.group('name')}"
    start, end = site.start(), site.end()
    if end < len(code) and code[end] == "\n":
        end += 1
    return code[:start] + code[end:], f"removed assignment of {site.group('name')}"


def _line_starts(code: str) -> list[int]:
    starts = [0]
    for i, ch in enumerate(code):
        if ch == "\n" and i + 1 < len(code):
            starts.append(i + 1)
    return starts


def _indent_at(code: str, pos: int) -> str:
    m = re.match(r"[ \t]*", code[pos:])
    indent = m.group(0) if m else ""
    # Keep whole 4-space units so the insertion tokenizes as indent tokens.
    return "    " * (len(indent.replace("\t", "    ")) // 4)


def _attack_add_comments(code: str, rng: random.Random) -> tuple[str, str]:
    body = rng.choice(corpus.RESERVE_COMMENTS)
    if rng.random() < 0.3:
        # Append at the end of a non-empty line.
        ends = [i for i, ch in enumerate(code) if ch == "\n" and i > 0 and code[i - 1] != "\n"]
        if ends:
            pos = rng.choice(ends)
            return code[:pos] + "#" + body + code[pos:], "appended comment at line end"
    starts = _line_starts(code)
    pos = rng.choice(starts)
    indent = _indent_at(code, pos)
    return code[:pos] + f"{indent}#{body}\n" + code[pos:], "inserted comment line"


def _attack_add_assignments(code: str, rng: random.Random) -> tuple[str, str]:
    starts = _line_starts(code)
    pos = rng.choice(starts)
    indent = _indent_at(code, pos)
    name = rng.choice(corpus.RESERVE_IDENTIFIERS)
    value = rng.randrange(10)
    return code[:pos] + f"{indent}{name} = {value}\n" + code[pos:], f"inserted assignment {name}"


def _attack_add_redundant(code: str, rng: random.Random) -> tuple[str, str]:
    starts = _line_starts(code)
    pos = rng.choice(starts)
    indent = _indent_at(code, pos)
    if rng.random() < 0.5:
        stmt = "pass"
    else:
        name = rng.choice(corpus.RESERVE_IDENTIFIERS)
        stmt = f"{name} = {name}"
    return code[:pos] + f"{indent}{stmt}\n" + code[pos:], f"inserted statement {stmt!r}"


_DISPATCH = {
    MODIFY_IDENTIFIERS: _attack_identifiers,
    MODIFY_IO: _attack_io,
    MODIFY_COMMENTS: _attack_comments,
    MODIFY_DATA: _attack_data,
    MODIFY_ASSIGNMENTS: _attack_assignments,
    ADD_COMMENTS: _attack_add_comments,
    ADD_ASSIGNMENTS: _attack_add_assignments,
    ADD_REDUNDANT: _attack_add_redundant,
}


@dataclass
class RobustnessMatrix:
    """Survival counts per attack kind over an embedded corpus."""

    per_kind: dict[str, tuple[int, int]] = field(default_factory=dict)  # kind -> (survived, total)
    excluded: int = 0  # samples whose pre-attack detection failed

    @property
    def survived(self) -> int:
        return sum(s for s, _ in self.per_kind.values())

    @property
    def total(self) -> int:
        return sum(t for _, t in self.per_kind.values())

    @property
    def survival_rate(self) -> float:
        return self.survived / self.total if self.total else 0.0

    def render_table(self) -> str:
        lines = ["kind\tsurvived\ttotal\trate"]
        for kind in ALL_KINDS:
            if kind not in self.per_kind:
                continue
            s, t = self.per_kind[kind]
            lines.append(f"{kind}\t{s}\t{t}\t{s / t if t else 0.0:.3f}")
        lines.append(f"total\t{self.survived}\t{self.total}\t{self.survival_rate:.3f}")
        if self.excluded:
            lines.append(f"# excluded samples (pre-attack detection failed): {self.excluded}")
        return "\n".join(lines) + "\n"


def robustness_eval(
    samples: list[tuple[str, Bits]],
    kinds: tuple[str, ...],
    trials_per_kind: int,
    vocab: Vocabulary,
    config: EmbedConfig,
    seed: int = 0,
) -> RobustnessMatrix:
    """Attack each sample ``trials_per_kind`` times per kind and re-detect.

    A trial survives when detection still reports the expected user bits.
    Samples that fail detection before any attack are excluded and counted.
    """
    matrix = RobustnessMatrix()
    usable: list[tuple[str, Bits]] = []
    for code, expected in samples:
        result = detect(code, vocab, config)
        if result.detected and result.user_bits == expected:
            usable.append((code, expected))
        else:
            matrix.excluded += 1
    for kind_index, kind in enumerate(kinds):
        survived = 0
        total = 0
        for idx, (code, expected) in enumerate(usable):
            for trial in range(trials_per_kind):
                trial_seed = kernels.mix64(
                    ((seed << 32) ^ (kind_index << 24) ^ (idx << 8) ^ trial) & kernels.MASK64
                )
                outcome = apply_attack(code, kind, trial_seed)
                result = detect(outcome.code, vocab, config)
                total += 1
                if result.detected and result.user_bits == expected:
                    survived += 1
        matrix.per_kind[kind] = (survived, total)
    return matrix
