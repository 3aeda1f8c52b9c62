"""Command-line surface: embed, detect, attack, eval, vocab, serve.

Exit codes: 0 success (embed: complete; detect: watermark found), 1 the
operation ran but did not succeed (embed incomplete; detect negative), 2
configuration or input errors.

A config file (INI format) can supply defaults for any long flag in its
``[run]`` section; explicit flags win.  A ``[patterns]`` section overrides
the skip-pattern trigger sets (one comma-separated lexeme list per set).
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import sys
from pathlib import Path

from tokenmark import corpus, serve as serve_mod, skipper as skipper_mod, sweeps
from tokenmark.attacks import ALL_KINDS, apply_attack
from tokenmark.detector import detect
from tokenmark.embedder import ConfigError, DEFAULT_SEED, EmbedConfig, embed, write_trace
from tokenmark.outlier import DistributionError
from tokenmark.payload import PayloadError, WatermarkPayload, bits_to_str, parse_bits
from tokenmark.providers import make_mock_provider
from tokenmark.skipper import PatternSets
from tokenmark.vocab import TokenizeError, VocabError, load_vocabulary


class CliError(Exception):
    """Invalid configuration or input; maps to exit code 2."""


def _load_config_file(path: str | None) -> tuple[dict[str, str], PatternSets]:
    if path is None:
        return {}, PatternSets()
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=None)
    try:
        with open(path, encoding="utf-8") as fp:
            parser.read_file(fp)
    except OSError as exc:
        raise CliError(f"cannot read config file: {exc}") from None
    except configparser.Error as exc:
        raise CliError(f"bad config file: {exc}") from None
    run = {k.replace("_", "-"): v for k, v in parser.items("run")} if parser.has_section("run") else {}
    if parser.has_section("patterns"):
        try:
            sets = PatternSets.from_config(dict(parser.items("patterns")))
        except ValueError as exc:
            raise CliError(f"bad [patterns] section: {exc}") from None
    else:
        sets = PatternSets()
    return run, sets


def _setting(args: argparse.Namespace, file_cfg: dict[str, str], name: str, default, cast):
    """Flag value, else config-file value, else default."""
    value = getattr(args, name.replace("-", "_"), None)
    if value is not None:
        return value
    if name in file_cfg:
        raw = file_cfg[name]
        if cast is bool:
            return raw.strip().lower() in ("1", "true", "yes", "on")
        return cast(raw)
    return default


def _build_embed_config(args, file_cfg, sets: PatternSets) -> EmbedConfig:
    config = EmbedConfig(
        max_new_tokens=_setting(args, file_cfg, "max-new-tokens", 400, int),
        gamma=_setting(args, file_cfg, "gamma", 0.5, float),
        x=_setting(args, file_cfg, "x", 24, int),
        outlier_scale=_setting(args, file_cfg, "outlier-scale", 1.5, float),
        seed=_setting(args, file_cfg, "seed", DEFAULT_SEED, int),
        chained_hash=not _setting(args, file_cfg, "fixed-hash", False, bool),
        thr_p_dis=_setting(args, file_cfg, "thr-p-dis", None, float),
        pattern_sets=sets,
    )
    try:
        config.validate()
    except ConfigError as exc:
        raise CliError(str(exc)) from None
    return config


def _load_vocab(args, file_cfg):
    path = _setting(args, file_cfg, "vocab", None, str)
    if not path:
        raise CliError("a vocabulary file is required (--vocab)")
    try:
        with open(path, encoding="utf-8") as fp:
            return load_vocabulary(fp)
    except OSError as exc:
        raise CliError(f"cannot read vocabulary: {exc}") from None
    except VocabError as exc:
        raise CliError(f"bad vocabulary file: {exc}") from None


def _build_payload(args, file_cfg, x: int) -> WatermarkPayload:
    bits = _setting(args, file_cfg, "payload-bits", None, str)
    user_id = _setting(args, file_cfg, "user-id", None, int)
    try:
        if bits is not None:
            parsed = parse_bits(bits)
            if 2 * len(parsed) != x:
                raise CliError(f"payload bit string must have length {x // 2}")
            return WatermarkPayload(detection_bits=parsed)
        if user_id is not None:
            return WatermarkPayload.from_user_id(user_id, x)
    except PayloadError as exc:
        raise CliError(str(exc)) from None
    raise CliError("a payload is required: --user-id or --payload-bits")


def _build_provider(args, file_cfg, vocab):
    kind = _setting(args, file_cfg, "provider", "code-template", str)
    seed = _setting(args, file_cfg, "provider-seed", 0, int)
    try:
        if kind == "scripted":
            raw = _setting(args, file_cfg, "script", None, str)
            script_file = _setting(args, file_cfg, "script-file", None, str)
            if script_file:
                raw = Path(script_file).read_text(encoding="utf-8")
            if not raw:
                raise CliError("scripted provider needs --script or --script-file")
            script = [int(t) for t in raw.replace("\n", ",").split(",") if t.strip()]
            return make_mock_provider("scripted", vocab, script=script)
        if kind == "seeded-random":
            return make_mock_provider(
                "seeded-random",
                vocab,
                seed=seed,
                outlier_rate=_setting(args, file_cfg, "outlier-rate", 0.3, float),
                newline_period=_setting(args, file_cfg, "newline-period", 5, int),
                noise=_setting(args, file_cfg, "provider-noise", 0.1, float),
            )
        if kind == "code-template":
            template_file = _setting(args, file_cfg, "template-file", None, str)
            template = Path(template_file).read_text(encoding="utf-8") if template_file else None
            return make_mock_provider(
                "code-template",
                vocab,
                seed=seed,
                template=template,
                dual_rate=_setting(args, file_cfg, "dual-rate", 0.1, float),
            )
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot build provider: {exc}") from None
    raise CliError(f"unknown provider kind {kind!r}")


def cmd_embed(args) -> int:
    file_cfg, sets = _load_config_file(args.config)
    vocab = _load_vocab(args, file_cfg)
    config = _build_embed_config(args, file_cfg, sets)
    payload = _build_payload(args, file_cfg, config.x)
    provider = _build_provider(args, file_cfg, vocab)
    prompt_text = _setting(args, file_cfg, "prompt", "", str)
    try:
        prompt = vocab.tokenize(prompt_text) if prompt_text else []
    except TokenizeError as exc:
        raise CliError(f"prompt does not tokenize: {exc}") from None
    try:
        result = embed(prompt, payload, provider, vocab, config)
    except (ConfigError, DistributionError) as exc:
        raise CliError(str(exc)) from None
    code = result.text(vocab)
    out_path = _setting(args, file_cfg, "out", None, str)
    if out_path:
        Path(out_path).write_text(code, encoding="utf-8")
    else:
        sys.stdout.write(code)
    trace_path = _setting(args, file_cfg, "trace", None, str)
    if trace_path:
        with open(trace_path, "w", encoding="utf-8") as fp:
            write_trace(fp, result.trace, result.summary)
    print(
        f"status={result.summary.status} rounds={result.summary.rounds} "
        f"bits={result.summary.bits} tokens={result.summary.tokens} "
        f"user_bits={bits_to_str(payload.detection_bits)}",
        file=sys.stderr,
    )
    return 0 if result.summary.status == "complete" else 1


def cmd_detect(args) -> int:
    file_cfg, sets = _load_config_file(args.config)
    vocab = _load_vocab(args, file_cfg)
    config = _build_embed_config(args, file_cfg, sets)
    if args.code == "-":
        code = sys.stdin.read()
    else:
        try:
            code = Path(args.code).read_text(encoding="utf-8")
        except OSError as exc:
            raise CliError(f"cannot read code file: {exc}") from None
    result = detect(code, vocab, config)
    report_path = _setting(args, file_cfg, "report", None, str)
    if report_path:
        report = {
            "detected": result.detected,
            "user_id": result.user_id,
            "user_bits": None if result.user_bits is None else bits_to_str(result.user_bits),
            "rounds_used": result.rounds_used,
            "reason": result.reason,
            "bits_extracted": len(result.bit_stream),
            "rounds": [bits_to_str(r) for r in result.round_values],
        }
        Path(report_path).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    if result.detected:
        print(
            f"detected user_id={result.user_id} "
            f"user_bits={bits_to_str(result.user_bits)} rounds={result.rounds_used}"
        )
        return 0
    print(f"not-detected reason={result.reason}")
    return 1


def cmd_attack(args) -> int:
    code = sys.stdin.read()
    outcome = apply_attack(code, args.kind, args.seed, intensity=args.intensity)
    sys.stdout.write(outcome.code)
    if not outcome.applied:
        print("no-op: no applicable site for this attack kind", file=sys.stderr)
    elif outcome.description:
        print(outcome.description, file=sys.stderr)
    return 0


def cmd_eval(args) -> int:
    file_cfg, sets = _load_config_file(args.config)
    config = _build_embed_config(args, file_cfg, sets)
    tasks = _setting(args, file_cfg, "tasks", 50, int)
    base_seed = _setting(args, file_cfg, "eval-seed", 2024, int)
    grid = _setting(args, file_cfg, "grid", None, str)
    mode = args.mode
    if mode == "gamma":
        values = tuple(float(v) for v in grid.split(",")) if grid else sweeps.GAMMA_GRID
        table = sweeps.render_rows(sweeps.run_gamma_sweep(values, tasks, base_seed, config))
    elif mode == "length":
        values = tuple(int(v) for v in grid.split(",")) if grid else sweeps.LENGTH_GRID
        table = sweeps.render_rows(sweeps.run_length_sweep(values, tasks, base_seed, config))
    elif mode == "hash":
        if grid:
            raise CliError("the hash comparison has no grid; drop --grid")
        table = sweeps.render_rows(sweeps.run_hash_comparison(tasks, base_seed, config))
    elif mode == "attacks":
        matrix = sweeps.run_attack_matrix(
            n_samples=tasks,
            trials_per_kind=_setting(args, file_cfg, "trials", 3, int),
            base_seed=base_seed,
            config=config,
        )
        table = matrix.render_table()
    else:  # pragma: no cover - argparse restricts choices
        raise CliError(f"unknown eval mode {mode!r}")
    out_path = _setting(args, file_cfg, "out", None, str)
    if out_path:
        Path(out_path).write_text(table, encoding="utf-8")
    else:
        sys.stdout.write(table)
    return 0


def cmd_vocab(args) -> int:
    if args.action == "demo":
        vocab = corpus.build_demo_vocab()
        out_path = args.out
        if out_path:
            with open(out_path, "w", encoding="utf-8") as fp:
                vocab.save(fp)
        else:
            vocab.save(sys.stdout)
        if args.template_out:
            Path(args.template_out).write_text(corpus.DEMO_TEMPLATE, encoding="utf-8")
        return 0
    # inspect
    file_cfg, sets = _load_config_file(args.config)
    vocab = _load_vocab(args, file_cfg)
    counts: dict[str, int] = {}
    for tid in range(len(vocab)):
        kind = skipper_mod.classify_token(vocab.text(tid), sets) or "plain"
        counts[kind] = counts.get(kind, 0) + 1
    newline_bearing = sum(1 for t in vocab.texts if "\n" in t)
    print(f"size\t{len(vocab)}")
    print(f"max_token_length\t{max(len(t) for t in vocab.texts)}")
    print(f"prefix_free\t{vocab.is_prefix_free()}")
    print(f"newline_bearing\t{newline_bearing}")
    for kind in ("plain", "whitespace", "keyword", "opener", "symbol", "delimiter"):
        print(f"trigger_{kind}\t{counts.get(kind, 0)}")
    return 0


def cmd_serve(args) -> int:
    file_cfg, sets = _load_config_file(args.config)
    vocab = _load_vocab(args, file_cfg)
    config = _build_embed_config(args, file_cfg, sets)
    trace_path = _setting(args, file_cfg, "trace", None, str)
    return serve_mod.run(vocab, config, trace_path=trace_path)


def _add_common(parser: argparse.ArgumentParser, vocab_required: bool = True) -> None:
    parser.add_argument("--config", help="INI config file with [run] and [patterns] sections")
    if vocab_required:
        parser.add_argument("--vocab", help="vocabulary file (id<TAB>escaped-text per line)")
    parser.add_argument("--seed", type=int, help=f"initial hash seed (default {DEFAULT_SEED})")
    parser.add_argument("--gamma", type=float, help="selected-partition fraction (default 0.5)")
    parser.add_argument("--x", type=int, help="total watermark length in bits (default 24)")
    parser.add_argument("--outlier-scale", type=float, help="whisker scale S (default 1.5)")
    parser.add_argument("--max-new-tokens", type=int, help="generation budget L (default 400)")
    parser.add_argument(
        "--fixed-hash",
        action="store_const",
        const=True,
        help="pin the partition seed instead of chaining it token to token",
    )
    parser.add_argument("--thr-p-dis", type=float, help="accepted for compatibility; unused")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tokenmark",
        description="Multi-bit, tamper-aware watermarking for generated code",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed", help="generate watermarked code with a mock provider")
    _add_common(p)
    p.add_argument("--user-id", type=int, help="user id to encode (x/2 bits)")
    p.add_argument("--payload-bits", help="explicit detection bit string of length x/2")
    p.add_argument("--provider", choices=["scripted", "seeded-random", "code-template"])
    p.add_argument("--provider-seed", type=int, help="mock provider seed")
    p.add_argument("--script", help="comma-separated token ids for the scripted provider")
    p.add_argument("--script-file", help="file with token ids for the scripted provider")
    p.add_argument("--template-file", help="code template for the code-template provider")
    p.add_argument("--dual-rate", type=float, help="two-outlier injection rate (code-template)")
    p.add_argument("--outlier-rate", type=float, help="outlier injection rate (seeded-random)")
    p.add_argument("--newline-period", type=int, help="newline cadence (seeded-random)")
    p.add_argument("--provider-noise", type=float, help="per-step noise scale (seeded-random)")
    p.add_argument("--prompt", help="prompt text (tokenized, passed to the provider)")
    p.add_argument("--out", help="write generated code here (default stdout)")
    p.add_argument("--trace", help="write the JSONL audit trace here")
    p.set_defaults(fn=cmd_embed)

    p = sub.add_parser("detect", help="recover the watermark from code text")
    _add_common(p)
    p.add_argument("code", help="code file to check, or - for stdin")
    p.add_argument("--report", help="write a JSON detection report here")
    p.set_defaults(fn=cmd_detect)

    p = sub.add_parser("attack", help="apply one tamper attack (stdin -> stdout)")
    p.add_argument("--kind", required=True, choices=list(ALL_KINDS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--intensity", type=int, default=1, help="number of mutation sites")
    p.set_defaults(fn=cmd_attack)

    p = sub.add_parser("eval", help="controlled-variable sweeps and the attack matrix")
    _add_common(p, vocab_required=False)
    p.add_argument("--mode", required=True, choices=["gamma", "length", "hash", "attacks"])
    p.add_argument("--grid", help="comma-separated grid for gamma/length modes")
    p.add_argument("--tasks", type=int, help="tasks per grid point (default 50)")
    p.add_argument("--trials", type=int, help="attack trials per kind per sample (default 3)")
    p.add_argument("--eval-seed", type=int, help="base seed for task generation (default 2024)")
    p.add_argument("--out", help="write the table here (default stdout)")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("vocab", help="vocabulary utilities")
    p.add_argument("action", choices=["inspect", "demo"])
    p.add_argument("--config", help="INI config file")
    p.add_argument("--vocab", help="vocabulary file to inspect")
    p.add_argument("--out", help="demo: write the vocabulary file here")
    p.add_argument("--template-out", help="demo: also write the demo code template here")
    p.set_defaults(fn=cmd_vocab)

    p = sub.add_parser("serve", help="line-JSON protocol mode for a host adapter")
    _add_common(p)
    p.add_argument("--trace", help="write the session trace here at finish")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        return 2


if __name__ == "__main__":
    sys.exit(main())
