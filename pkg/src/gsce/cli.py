"""Command-line entry point: ``gsce <command> [options]``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
Errors are also written to stderr as a single JSON object.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from gsce.corpus import CorpusError, generate_corpus, load_corpus, validate_task
from gsce.prompt import METHODS, PromptError
from gsce.runner import AgentConfig, ConfigError, RunPlan, run_plan, sweep_k
from gsce.scoring import Tolerance, aggregate, read_results, render_report

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _fail(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse calls this for every usage problem
        sys.exit(_fail("usage", f"{self.prog}: {message}", EXIT_USAGE))


def _methods(text: str) -> list[str]:
    names = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in names if m not in METHODS]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown method {', '.join(bad) or text!r}; choose from {', '.join(METHODS)}")
    return names


def _agent(text: str) -> tuple[str, str | None]:
    kind, _, fault = text.partition(":")
    if kind not in ("http", "replay", "oracle", "faulty"):
        raise argparse.ArgumentTypeError(f"unknown agent {text!r}")
    if (kind == "faulty") != bool(fault):
        raise argparse.ArgumentTypeError("use faulty:<fault> (flip_z_sign, ignore_body_frame, emit_prose)")
    return kind, fault or None


def _counts(text: str) -> list[int]:
    try:
        counts = [int(c) for c in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"counts must be integers, got {text!r}") from None
    if len(counts) != 3 or any(c < 0 for c in counts):
        raise argparse.ArgumentTypeError("counts must be three non-negative integers a,b,c")
    return counts


def _add_run_options(p: argparse.ArgumentParser, with_method: bool = True) -> None:
    # defaults are None so that a --config file can fill them in
    p.add_argument("--config", help="JSON file with option values; flags take precedence")
    p.add_argument("--corpus", help="corpus JSON file")
    if with_method:
        p.add_argument("--method", type=_methods, help="base|constraints|examples|gsce (comma-separated for several)")
        p.add_argument("--k", type=int, help="number of examples")
    p.add_argument("--cot", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--constraint-impl", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--repeats", type=int)
    p.add_argument("--agent", type=_agent, help="http | replay | oracle | faulty:<fault>")
    p.add_argument("--endpoint", help="base URL of an OpenAI-compatible API")
    p.add_argument("--api-key-env", help="environment variable holding the API key")
    p.add_argument("--model")
    p.add_argument("--temperature", type=float)
    p.add_argument("--max-tokens", type=int)
    p.add_argument("--cache", help="response cache directory (records unless --agent replay)")
    p.add_argument("--out", help="results file (JSON lines)")
    p.add_argument("--parallelism", type=int)
    p.add_argument("--pos-eps", type=float)
    p.add_argument("--yaw-eps", type=float)
    p.add_argument("--completeness", choices=("lcs", "prefix"))
    p.add_argument("--library", help="example library JSON")
    p.add_argument("--texts-dir", help="directory with guidelines.md, skill_apis.md, constraints.md")
    p.add_argument("--step-limit", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gsce", description="Prompt-framework evaluation harness for LLM drone control.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-corpus", help="generate a task corpus")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--counts", type=_counts, default=[15, 15, 14], help="tasks per family A,B,C")
    p.add_argument("--out", required=True)

    p = sub.add_parser("validate", help="check every task against its oracle program")
    p.add_argument("--corpus", required=True)

    p = sub.add_parser("run", help="evaluate methods over a corpus")
    _add_run_options(p)

    p = sub.add_parser("report", help="aggregate results files into a table")
    p.add_argument("--in", dest="inputs", nargs="+", required=True)
    p.add_argument("--format", choices=("markdown", "csv", "json"), default="markdown")
    p.add_argument("--out")

    p = sub.add_parser("sweep-k", help="run gsce for each example count in a range")
    _add_run_options(p, with_method=False)
    p.add_argument("--min", dest="k_min", type=int)
    p.add_argument("--max", dest="k_max", type=int)
    p.add_argument("--format", choices=("markdown", "csv", "json"), default="markdown")
    return parser


_DEFAULTS = {
    "method": ["gsce"],
    "repeats": 3,
    "agent": ("oracle", None),
    "api_key_env": "GSCE_API_KEY",
    "temperature": 0.0,
    "max_tokens": 2048,
    "parallelism": 4,
    "pos_eps": 0.1,
    "yaw_eps": 1.0,
    "completeness": "lcs",
    "step_limit": 1000,
    "k_min": 0,
    "k_max": 8,
}


def _merged(args: argparse.Namespace) -> dict:
    opts = {k: v for k, v in vars(args).items()}
    if args.config:
        try:
            file_opts = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(file_opts, dict):
            raise UsageError("config file must hold a JSON object")
        for key, value in file_opts.items():
            key = key.replace("-", "_")
            if key not in opts:
                raise UsageError(f"unknown config key {key!r}")
            if opts[key] is None:
                try:
                    if key == "method":
                        value = _methods(value) if isinstance(value, str) else _methods(",".join(value))
                    elif key == "agent":
                        value = _agent(value)
                except argparse.ArgumentTypeError as exc:
                    raise UsageError(str(exc)) from None
                opts[key] = value
    for key, value in _DEFAULTS.items():
        if key in opts and opts[key] is None:
            opts[key] = value
    return opts


def _plan(opts: dict) -> RunPlan:
    for key in ("corpus", "out"):
        if not opts.get(key):
            raise UsageError(f"--{key} is required")
    kind, fault = opts["agent"]
    try:
        tol = Tolerance(opts["pos_eps"], opts["yaw_eps"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return RunPlan(
        corpus_path=opts["corpus"],
        out_path=opts["out"],
        methods=opts.get("method") or ["gsce"],
        k=opts.get("k"),
        cot=opts["cot"],
        constraint_impl=opts["constraint_impl"],
        repeats=opts["repeats"],
        agent=AgentConfig(
            kind=kind,
            fault=fault,
            endpoint=opts["endpoint"],
            api_key_env=opts["api_key_env"],
            cache_dir=opts["cache"],
        ),
        model=opts["model"],
        tolerance=tol,
        parallelism=opts["parallelism"],
        library_path=opts["library"],
        texts_dir=opts["texts_dir"],
        temperature=opts["temperature"],
        max_tokens=opts["max_tokens"],
        step_limit=opts["step_limit"],
        completeness_mode=opts["completeness"],
    )


def _report_text(paths, fmt: str) -> str:
    results = [r for p in paths for r in read_results(p)]
    return render_report(aggregate(results), fmt)


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "gen-corpus":
        corpus = generate_corpus(args.seed, args.counts)
        corpus.save(args.out)
        print(f"wrote {len(corpus.tasks)} tasks to {args.out}")
        return EXIT_OK

    if args.command == "validate":
        corpus = load_corpus(args.corpus, validate=False)
        failures = 0
        for task in corpus.tasks:
            try:
                validate_task(task)
            except CorpusError as exc:
                failures += 1
                print(f"FAIL {exc}")
        print(f"{len(corpus.tasks) - failures}/{len(corpus.tasks)} tasks valid")
        return EXIT_RUNTIME if failures else EXIT_OK

    if args.command == "report":
        text = _report_text(args.inputs, args.format)
        if args.out:
            Path(args.out).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
        return EXIT_OK

    opts = _merged(args)
    plan = _plan(opts)
    if args.command == "run":
        out = run_plan(plan)
    else:
        if opts["k_min"] < 0 or opts["k_max"] < opts["k_min"]:
            raise UsageError("need 0 <= --min <= --max")
        out = sweep_k(plan, range(opts["k_min"], opts["k_max"] + 1))
        sys.stdout.write(_report_text([out], args.format))
    print(f"results written to {out}", file=sys.stderr)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _dispatch(args)
    except UsageError as exc:
        return _fail("usage", str(exc), EXIT_USAGE)
    except (ConfigError, PromptError, CorpusError) as exc:
        return _fail("config", str(exc), EXIT_USAGE)
    except FileNotFoundError as exc:
        return _fail("config", f"file not found: {exc.filename}", EXIT_USAGE)
    except Exception as exc:  # noqa: BLE001
        return _fail("runtime", f"{type(exc).__name__}: {exc}", EXIT_RUNTIME)


if __name__ == "__main__":
    sys.exit(main())
