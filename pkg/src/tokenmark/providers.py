"""Mock token-distribution providers.

Stand-ins for a real model's next-token distribution.  All three kinds are
deterministic functions of their seed and the generation history, which is
what makes embed runs and their traces reproducible in tests.

The scripted provider's distribution formula is intentionally trivial
(``SCRIPT_MASS`` on the scripted token, the remainder uniform) so that a
host-side fake model can reproduce it bit-for-bit over the serve protocol;
see PROTOCOL.md.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from tokenmark import corpus, kernels
from tokenmark.vocab import Vocabulary

SCRIPT_MASS = 0.85
TEMPLATE_MASS = 0.9
TEMPLATE_DUAL_MASSES = (0.55, 0.35)


def _subseed(*parts: int) -> int:
    state = 0
    for part in parts:
        state = kernels.mix64(state ^ (part & kernels.MASK64))
    return state


class ScriptedProvider:
    """Puts most probability mass on a fixed token script; EOS at its end."""

    def __init__(self, vocab_size: int, script: Sequence[int]):
        if not script:
            raise ValueError("scripted provider needs a non-empty script")
        for tid in script:
            if not 0 <= tid < vocab_size:
                raise ValueError(f"script token {tid} outside vocabulary of {vocab_size}")
        self.vocab_size = vocab_size
        self.script = list(script)

    def __call__(self, prompt: Sequence[int], generated: Sequence[int]) -> np.ndarray | None:
        step = len(generated)
        if step >= len(self.script):
            return None
        probs = np.full(self.vocab_size, (1.0 - SCRIPT_MASS) / (self.vocab_size - 1))
        probs[self.script[step]] = SCRIPT_MASS
        return probs


class SeededRandomProvider:
    """Pseudo-random distributions: a stable per-task profile plus step noise.

    The stable profile is what gives the fixed-vs-chained hash comparison
    its teeth: over one pinned partition, the highest-profile token of each
    side is essentially constant across steps, so when that token is a
    whitespace or rescind trigger, every bit on that side is systematically
    rolled back.  A chained hash redraws the partition per bit and only
    pays an occasional rollback.

    ``outlier_rate`` injects a dominant token (occasionally two) so the
    outlier-admission path is exercised; every ``newline_period`` steps the
    newline token dominates instead, so output forms lines.
    """

    def __init__(
        self,
        vocab: Vocabulary,
        seed: int,
        outlier_rate: float = 0.3,
        newline_period: int = 5,
        noise: float = 0.1,
    ):
        self.vocab = vocab
        self.seed = seed
        self.outlier_rate = outlier_rate
        self.newline_period = max(2, newline_period)
        self.noise = noise
        profile_rng = np.random.default_rng(_subseed(seed, 0xBA5E))
        self.profile = profile_rng.random(len(vocab)) + 0.01
        self.newline_id = next(
            tid for tid in range(len(vocab)) if "\n" in vocab.text(tid)
        )

    def __call__(self, prompt: Sequence[int], generated: Sequence[int]) -> np.ndarray | None:
        step = len(generated)
        last = generated[-1] if generated else -1
        rng = np.random.default_rng(_subseed(self.seed, step + 1, last + 2))
        base = self.profile + self.noise * rng.random(len(self.vocab))
        boost = rng.random()
        if step % self.newline_period == 0:
            base[self.newline_id] = base.sum() * 4.0
        elif boost < self.outlier_rate:
            target = int(rng.integers(len(self.vocab)))
            if boost < self.outlier_rate / 4.0:
                second = int(rng.integers(len(self.vocab)))
                base[target] = base.sum() * 3.0
                base[second] = base.sum() * 1.5
            else:
                base[target] = base.sum() * (3.0 + 4.0 * rng.random())
        return base / base.sum()


class CodeTemplateProvider:
    """Walks a code template, strongly preferring each template token.

    The template token dominates every step (so it surfaces as the step's
    probability outlier and survives embedding via outlier admission), while
    the residual noise is shaped toward structurally harmless tokens so the
    freely chosen correction-phase tokens keep the sample code-like.  With
    probability ``dual_rate`` a second dominant token appears, exercising
    the multi-outlier admission case.
    """

    def __init__(
        self,
        vocab: Vocabulary,
        seed: int = 0,
        template: str | None = None,
        dual_rate: float = 0.1,
    ):
        self.vocab = vocab
        self.seed = seed
        text = corpus.DEMO_TEMPLATE if template is None else template
        self.script = vocab.tokenize(text)
        benign = corpus.benign_token_mask(vocab)
        if not benign.any():
            raise ValueError("template vocabulary has no structurally harmless tokens")
        self.noise_weights = np.where(benign, 1.0, 1e-3)
        self.benign_ids = np.flatnonzero(benign)
        self.dual_rate = dual_rate

    def __call__(self, prompt: Sequence[int], generated: Sequence[int]) -> np.ndarray | None:
        step = len(generated)
        if step >= len(self.script):
            return None
        rng = np.random.default_rng(_subseed(self.seed, step + 1))
        target = self.script[step]
        masses = {target: TEMPLATE_MASS}
        if rng.random() < self.dual_rate:
            second = int(rng.choice(self.benign_ids))
            if second != target:
                masses = {target: TEMPLATE_DUAL_MASSES[0], second: TEMPLATE_DUAL_MASSES[1]}
        noise = rng.random(len(self.vocab)) * self.noise_weights
        for tid in masses:
            noise[tid] = 0.0
        noise *= (1.0 - sum(masses.values())) / noise.sum()
        probs = noise
        for tid, mass in masses.items():
            probs[tid] = mass
        return probs


def make_mock_provider(kind: str, vocab: Vocabulary, **kwargs):
    """Factory over the three mock kinds: scripted, seeded-random, code-template."""
    if kind == "scripted":
        return ScriptedProvider(len(vocab), kwargs.pop("script"))
    if kind == "seeded-random":
        return SeededRandomProvider(vocab, **kwargs)
    if kind == "code-template":
        return CodeTemplateProvider(vocab, **kwargs)
    raise ValueError(f"unknown provider kind {kind!r}")
