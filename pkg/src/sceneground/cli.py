"""Command-line surface: parse, ground, optimize, bench.

Every subcommand accepts ``--config file.json`` holding the same fields as
its flags; precedence is flags > config > defaults. Exit codes: 0 success,
1 runtime error, 2 input validation error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .dsl import DefinitionError
from .executor import ExecutionError, FeatureCache, execute, grounding_result
from .expression import ExpressionError, parse_expression, serialize_expression
from .llm import EndpointConfig, LlmError, parse_utterance_via_llm
from .optimizer import (
    MutationSource,
    OptimizerConfig,
    SuiteError,
    default_example_graph,
    load_suite,
    optimize_encoder,
)
from .registry import EncoderRegistry, load_registry, save_registry
from .scene import SceneError, load_scene

VALIDATION_ERRORS = (SceneError, ExpressionError, DefinitionError, SuiteError)


class CliError(ValueError):
    """Input validation failure at the command level (exit code 2)."""


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise CliError(f"config {path} must be a JSON object")
    return raw


def _resolve(args: argparse.Namespace, config: dict, key: str, default=None, required=False):
    """flags > config > defaults; flag values of None mean "not given"."""
    value = getattr(args, key, None)
    if value is None:
        value = config.get(key, default)
    if required and value is None:
        raise CliError(f"missing required option --{key.replace('_', '-')}")
    return value


def _write_or_print(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_parse(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    out = _resolve(args, config, "out")
    offline = _resolve(args, config, "offline_expr")
    infile = _resolve(args, config, "infile")
    utterance = _resolve(args, config, "utterance")
    if offline:
        expr = parse_expression(Path(offline).read_text(encoding="utf-8"))
        _write_or_print(serialize_expression(expr) + "\n", out)
        return 0
    if infile:
        lines = []
        for raw in Path(infile).read_text(encoding="utf-8").splitlines():
            if raw.strip():
                lines.append(serialize_expression(parse_expression(raw)))
        _write_or_print("\n".join(lines) + "\n", out)
        return 0
    if not utterance:
        raise CliError("need --utterance, --in, or --offline-expr")
    try:
        expr = parse_utterance_via_llm(utterance, EndpointConfig.from_env())
    except (LlmError, ExpressionError) as exc:
        raise LlmError(f"could not parse utterance {utterance!r}: {exc}") from None
    _write_or_print(serialize_expression(expr) + "\n", out)
    return 0


def cmd_ground(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    scene_path = _resolve(args, config, "scene", required=True)
    expr_path = _resolve(args, config, "expr", required=True)
    registry_path = _resolve(args, config, "registry")
    top_k = int(_resolve(args, config, "top_k", 5))
    threshold = float(_resolve(args, config, "threshold", 0.9))
    out = _resolve(args, config, "out")

    scene = load_scene(scene_path)
    expr = parse_expression(Path(expr_path).read_text(encoding="utf-8"))
    registry = load_registry(registry_path) if registry_path else EncoderRegistry()
    score = execute(expr, scene, FeatureCache(scene, registry))
    result = grounding_result(scene, expr, score, top_k=top_k, threshold=threshold)
    _write_or_print(json.dumps(result, indent=2) + "\n", out)
    return 0


def cmd_optimize(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    relation = _resolve(args, config, "relation", required=True)
    suite_path = _resolve(args, config, "suite", required=True)
    scenes_dir = _resolve(args, config, "scenes", required=True)
    source_kind = _resolve(args, config, "source", "mutate")
    registry_path = _resolve(args, config, "registry", required=True)
    log_path = _resolve(args, config, "log")
    cfg = OptimizerConfig(
        n_iter=int(_resolve(args, config, "n_iter", 5)),
        n_sample=int(_resolve(args, config, "n_sample", 5)),
        top_k=int(_resolve(args, config, "top_k", 3)),
        seed=int(_resolve(args, config, "seed", 0)),
    )

    suite = load_suite(suite_path, scenes_dir)
    registry = load_registry(registry_path) if Path(registry_path).exists() else EncoderRegistry()
    if source_kind == "llm":
        from .llm import LlmClient
        from .optimizer import LlmSource

        source = LlmSource(client=LlmClient(EndpointConfig.from_env()))
    elif source_kind == "mutate":
        source = MutationSource()
    else:
        raise CliError(f"unknown source {source_kind!r}; expected mutate or llm")
    log: list[dict] = []
    best, history = optimize_encoder(relation, suite, source, registry, cfg,
                                     graph=default_example_graph(), log=log)
    for iteration, rate in enumerate(history, 1):
        print(f"iteration {iteration}: best pass rate {rate:.4f}")
    save_registry(registry, registry_path)
    if log_path:
        Path(log_path).write_text(
            "\n".join(json.dumps(entry) for entry in log) + "\n", encoding="utf-8")
    print(f"accepted encoder for {relation!r} "
          f"(hash {best.digest()[:12]}, final pass rate {history[-1]:.4f})")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    from .bench import emit_plot_data, report_to_dict, run_bench

    config = _load_config(args.config)
    dataset = _resolve(args, config, "dataset", required=True)
    registry_path = _resolve(args, config, "registry")
    top_k = int(_resolve(args, config, "top_k", 5))
    threshold = float(_resolve(args, config, "threshold", 0.9))
    workers = int(_resolve(args, config, "workers", 1))
    baseline = bool(_resolve(args, config, "baseline", False))
    plots = _resolve(args, config, "plots")
    out = _resolve(args, config, "out")

    registry = load_registry(registry_path) if registry_path else EncoderRegistry()
    report = run_bench(dataset, registry, top_k=top_k, threshold=threshold,
                       workers=workers, with_baseline=baseline)
    report.config["registry"] = registry_path or "builtin"
    payload = json.dumps(report_to_dict(report), indent=2) + "\n"
    _write_or_print(payload, out)
    if plots:
        emit_plot_data(dataset, registry, plots, top_k=top_k, threshold=threshold)
    summary = ", ".join(f"{k}={v:.4f}" if isinstance(v, float) else f"{k}={v}"
                        for k, v in report.aggregates.items())
    print(summary, file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sceneground",
        description="Ground referring expressions in 3D box scenes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="utterance or expression file -> canonical expression")
    p.add_argument("--utterance", help="utterance to parse via the configured endpoint")
    p.add_argument("--in", dest="infile", help="JSON-lines file of expressions to canonicalize")
    p.add_argument("--offline-expr", dest="offline_expr",
                   help="pre-parsed expression file (no network)")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--config", help="JSON config file (flags take precedence)")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("ground", help="rank scene objects against an expression")
    p.add_argument("--scene")
    p.add_argument("--expr")
    p.add_argument("--registry", help="encoder registry file (default: builtins)")
    p.add_argument("--top-k", dest="top_k", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--config", help="JSON config file (flags take precedence)")
    p.set_defaults(func=cmd_ground)

    p = sub.add_parser("optimize", help="search for a better encoder on a test suite")
    p.add_argument("--relation")
    p.add_argument("--suite")
    p.add_argument("--scenes", help="directory of scene files")
    p.add_argument("--source", choices=("mutate", "llm"))
    p.add_argument("--n-iter", dest="n_iter", type=int)
    p.add_argument("--n-sample", dest="n_sample", type=int)
    p.add_argument("--top-k", dest="top_k", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--registry", help="registry file to update")
    p.add_argument("--log", help="JSON-lines run log")
    p.add_argument("--config", help="JSON config file (flags take precedence)")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("bench", help="run a grounding benchmark directory")
    p.add_argument("--dataset")
    p.add_argument("--registry", help="encoder registry file (default: builtins)")
    p.add_argument("--top-k", dest="top_k", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--baseline", action="store_true", default=None,
                   help="include the random same-category baseline")
    p.add_argument("--plots", help="directory for CSV plot data")
    p.add_argument("--out", help="report file (default stdout)")
    p.add_argument("--config", help="JSON config file (flags take precedence)")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, *VALIDATION_ERRORS) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ExecutionError, LlmError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
