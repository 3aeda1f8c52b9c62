"""Controlled-variable evaluation sweeps over mock generation tasks.

One knob varies per run (partition fraction, output budget, or hash mode)
while everything else stays fixed; results come back as plain rows suitable
for a tab-separated table.  The hash comparison pits the default chained
mode against a pinned seed: with history-keyed mock providers, plain greedy
decoding is eventually periodic, and a pinned partition makes degenerate
rescind loops permanent, which is the desk-scale analogue of the quality
collapse a fixed hash causes in real generation.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from tokenmark import corpus, kernels
from tokenmark.attacks import ALL_KINDS, RobustnessMatrix, robustness_eval
from tokenmark.detector import detect
from tokenmark.embedder import EmbedConfig, embed
from tokenmark.payload import WatermarkPayload
from tokenmark.providers import CodeTemplateProvider, SeededRandomProvider
from tokenmark.vocab import Vocabulary

GAMMA_GRID = (0.25, 0.375, 0.5, 0.625, 0.75)
LENGTH_GRID = (200, 300, 400, 500, 600)

_TASK_VOCAB_SIZE = 32


@dataclass(frozen=True)
class SweepRow:
    knob: str
    value: str
    embed_success: float
    detect_success: float
    tasks: int


def render_rows(rows: list[SweepRow]) -> str:
    lines = ["knob\tvalue\tembed_success\tdetect_success\ttasks"]
    for row in rows:
        lines.append(
            f"{row.knob}\t{row.value}\t{row.embed_success:.3f}\t{row.detect_success:.3f}\t{row.tasks}"
        )
    return "\n".join(lines) + "\n"


def _task(index: int, base_seed: int) -> tuple[Vocabulary, SeededRandomProvider, int, int]:
    # Per-task trigger density varies, so tasks range from easy to hostile.
    density_rng = kernels.mix64(base_seed ^ (index * 3 + 5))
    trigger_fraction = 0.2 + 0.25 * ((density_rng & 0xFFFF) / 0xFFFF)
    vocab = corpus.build_random_vocab(
        kernels.mix64(base_seed ^ (index * 2 + 1)),
        _TASK_VOCAB_SIZE,
        trigger_fraction=trigger_fraction,
        specials=corpus.EVAL_SPECIALS,
    )
    provider = SeededRandomProvider(
        vocab,
        seed=kernels.mix64(base_seed ^ (index * 2 + 2)),
        outlier_rate=0.2,
        newline_period=5,
        noise=0.08,
    )
    user_seed = kernels.mix64(base_seed ^ (index + 0x1234))
    hash_seed = kernels.mix64(base_seed ^ (index + 0xABCD))
    return vocab, provider, user_seed, hash_seed


def _run_tasks(
    n_tasks: int,
    base_seed: int,
    config: EmbedConfig,
) -> tuple[float, float]:
    """Returns (embed success rate, detect success rate among completions)."""
    completed = 0
    detected = 0
    for i in range(n_tasks):
        vocab, provider, user_seed, hash_seed = _task(i, base_seed)
        payload = WatermarkPayload.from_user_id(user_seed % (1 << config.half), config.x)
        task_config = dataclasses.replace(config, seed=hash_seed)
        result = embed([], payload, provider, vocab, task_config)
        if result.status != "complete":
            continue
        completed += 1
        out = detect(result.text(vocab), vocab, task_config)
        if out.detected and out.user_bits == payload.detection_bits:
            detected += 1
    embed_rate = completed / n_tasks if n_tasks else 0.0
    detect_rate = detected / completed if completed else 0.0
    return embed_rate, detect_rate


def run_gamma_sweep(
    grid: tuple[float, ...] = GAMMA_GRID,
    n_tasks: int = 50,
    base_seed: int = 2024,
    config: EmbedConfig | None = None,
) -> list[SweepRow]:
    config = config or EmbedConfig()
    rows = []
    for gamma in grid:
        cfg = dataclasses.replace(config, gamma=gamma)
        embed_rate, detect_rate = _run_tasks(n_tasks, base_seed, cfg)
        rows.append(SweepRow("gamma", f"{gamma}", embed_rate, detect_rate, n_tasks))
    return rows


def run_length_sweep(
    grid: tuple[int, ...] = LENGTH_GRID,
    n_tasks: int = 50,
    base_seed: int = 2024,
    config: EmbedConfig | None = None,
) -> list[SweepRow]:
    config = config or EmbedConfig()
    rows = []
    for length in grid:
        cfg = dataclasses.replace(config, max_new_tokens=length)
        embed_rate, detect_rate = _run_tasks(n_tasks, base_seed, cfg)
        rows.append(SweepRow("max_new_tokens", f"{length}", embed_rate, detect_rate, n_tasks))
    return rows


def run_hash_comparison(
    n_tasks: int = 50,
    base_seed: int = 2024,
    config: EmbedConfig | None = None,
) -> list[SweepRow]:
    config = config or EmbedConfig()
    rows = []
    for label, chained in (("chained", True), ("fixed", False)):
        cfg = dataclasses.replace(config, chained_hash=chained)
        embed_rate, detect_rate = _run_tasks(n_tasks, base_seed, cfg)
        rows.append(SweepRow("hash_mode", label, embed_rate, detect_rate, n_tasks))
    return rows


def build_attack_corpus(
    n_samples: int,
    base_seed: int,
    config: EmbedConfig,
) -> tuple[Vocabulary, list[tuple[str, tuple[int, ...]]]]:
    """Embedded template samples for the robustness matrix."""
    vocab = corpus.build_demo_vocab()
    samples = []
    for i in range(n_samples):
        payload = WatermarkPayload.from_user_id(
            kernels.mix64(base_seed ^ (i + 77)) % (1 << config.half), config.x
        )
        provider = CodeTemplateProvider(vocab, seed=kernels.mix64(base_seed ^ (i + 311)))
        task_config = dataclasses.replace(config, seed=kernels.mix64(base_seed ^ (i + 991)))
        result = embed([], payload, provider, vocab, task_config)
        if result.status == "complete":
            samples.append((result.text(vocab), payload.detection_bits, task_config))
    return vocab, samples


def run_attack_matrix(
    n_samples: int = 25,
    trials_per_kind: int = 3,
    base_seed: int = 2024,
    config: EmbedConfig | None = None,
) -> RobustnessMatrix:
    config = config or EmbedConfig()
    vocab, samples = build_attack_corpus(n_samples, base_seed, config)
    total = RobustnessMatrix()
    for sample_index, (code, bits, task_config) in enumerate(samples):
        matrix = robustness_eval(
            [(code, bits)],
            ALL_KINDS,
            trials_per_kind,
            vocab,
            task_config,
            seed=kernels.mix64(base_seed ^ (sample_index + 1)),
        )
        total.excluded += matrix.excluded
        for kind, (s, t) in matrix.per_kind.items():
            old_s, old_t = total.per_kind.get(kind, (0, 0))
            total.per_kind[kind] = (old_s + s, old_t + t)
    return total
