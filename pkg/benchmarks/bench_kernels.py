"""Benchmark: compiled kernel backend vs the pure-Python fallback.

Times the two hot kernels (hash-chain step and vocabulary partition) across
realistic vocabulary sizes, plus one full embed+detect round trip through
the public API under whichever backend is active.

Usage:
    python benchmarks/bench_kernels.py
"""

from __future__ import annotations

import time

from tokenmark import kernels
from tokenmark.kernels import pure

try:
    from tokenmark.kernels import _speed
except ImportError:
    _speed = None

SIZES = (1024, 8192, 32022)
GAMMA = 0.5


def best_of(fn, repeat=5) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_partition(impl, n: int, rounds: int) -> float:
    k = n // 2

    def run():
        h = 12345
        for i in range(rounds):
            impl.partition_member(h, n, k)
            h = impl.advance(h, i % n)

    return best_of(run) / rounds


def bench_advance(impl, rounds: int = 200_000) -> float:
    def run():
        h = 1
        for i in range(rounds):
            h = impl.advance(h, i & 1023)

    return best_of(run, repeat=3) / rounds


def main() -> None:
    backends = [("pure-python", pure)]
    if _speed is not None:
        backends.append(("compiled", _speed))
    print(f"active backend: {kernels.BACKEND}")
    print()
    print("hash-chain step (per call):")
    for name, impl in backends:
        print(f"  {name:12s} {bench_advance(impl) * 1e9:10.1f} ns")
    print()
    print("vocabulary partition (per call, gamma=0.5):")
    for n in SIZES:
        rounds = max(3, 200_000 // n)
        row = [f"|V|={n:<6d}"]
        for name, impl in backends:
            per = bench_partition(impl, n, rounds)
            row.append(f"{name} {per * 1e6:9.1f} us")
        print("  " + "   ".join(row))
    if _speed is not None:
        n = 32022
        ratio = bench_partition(pure, n, 3) / bench_partition(_speed, n, 30)
        print(f"\ncompiled speedup on |V|={n} partition: {ratio:.0f}x")

    # End-to-end: one template session, embed + detect.
    from tokenmark import corpus
    from tokenmark.detector import detect
    from tokenmark.embedder import EmbedConfig, embed
    from tokenmark.payload import WatermarkPayload
    from tokenmark.providers import CodeTemplateProvider

    vocab = corpus.build_demo_vocab()
    config = EmbedConfig(max_new_tokens=400, x=24, seed=987654321)
    payload = WatermarkPayload.from_user_id(2871, 24)
    provider = CodeTemplateProvider(vocab, seed=7)

    t0 = time.perf_counter()
    result = embed([], payload, provider, vocab, config)
    embed_s = time.perf_counter() - t0
    code = result.text(vocab)
    t0 = time.perf_counter()
    out = detect(code, vocab, config)
    detect_s = time.perf_counter() - t0
    assert out.detected
    print(
        f"\nend-to-end (backend={kernels.BACKEND}): embed {embed_s * 1e3:.1f} ms, "
        f"detect {detect_s * 1e3:.1f} ms for {result.summary.tokens} tokens"
    )


if __name__ == "__main__":
    main()
