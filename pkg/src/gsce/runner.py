"""Batch evaluation: corpus x method x repeat, executed with a worker pool."""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from gsce.corpus import CorpusFile, Task, load_corpus
from gsce.dronesim import DEFAULT_TAKEOFF_ALTITUDE_M, Simulator
from gsce.llmclient import (
    Agent,
    ChatRequest,
    FaultyAgent,
    HttpAgent,
    LLMError,
    OracleAgent,
    ReplayAgent,
    ResponseCache,
    cache_key,
    recording,
)
from gsce.prompt import (
    ExampleEntry,
    MethodConfig,
    PromptError,
    PromptTexts,
    compose,
    load_example_library,
    load_texts,
    preset,
)
from gsce.scoring import DEFAULT_TOLERANCE, RunResult, Tolerance, filter_noops, score_run, write_results
from gsce.skillscript import DEFAULT_STEP_LIMIT, SkillScriptError, interpret, parse

log = logging.getLogger(__name__)

_FENCE_RE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)


class ConfigError(ValueError):
    """The plan cannot be executed as configured."""


class NoCode(Exception):
    category = "NoCode"


@dataclass(frozen=True)
class ExtractedCode:
    source: str
    extraction_mode: str  # "fenced" or "whole_response"


def extract_code(response_text: str) -> ExtractedCode:
    """Concatenate all fenced blocks, or fall back to the whole response.

    Raises :class:`NoCode` when there is nothing to run.
    """
    blocks = _FENCE_RE.findall(response_text)
    if blocks:
        source = "\n".join(b.rstrip("\n") for b in blocks)
        if source.strip():
            return ExtractedCode(source, "fenced")
        raise NoCode("fenced code blocks are empty")
    if not response_text.strip():
        raise NoCode("empty response")
    return ExtractedCode(response_text, "whole_response")


@dataclass
class RunContext:
    """Everything a single run needs besides the task and method."""

    agent: Agent
    library: Sequence[ExampleEntry]
    texts: PromptTexts
    model: str
    tolerance: Tolerance = DEFAULT_TOLERANCE
    temperature: float = 0.0
    max_tokens: int = 2048
    step_limit: int = DEFAULT_STEP_LIMIT
    takeoff_altitude_m: float = DEFAULT_TAKEOFF_ALTITUDE_M
    completeness_mode: str = "lcs"


def execute_run(task: Task, config: MethodConfig, ctx: RunContext, repeat_index: int = 0) -> RunResult:
    """Compose, query, extract, parse, interpret and score one task once.

    Failures at any stage are recorded in the result; completeness is then
    computed from whatever transitions were logged before the failure.
    """
    bundle = compose(
        config, ctx.library, ctx.texts.guidelines, ctx.texts.skill_apis, ctx.texts.constraints, task.query
    )
    request = ChatRequest(
        system_text=bundle.system_text,
        user_text=bundle.user_text,
        model=ctx.model,
        temperature=ctx.temperature,
        max_tokens=ctx.max_tokens,
        repeat_index=repeat_index,
    )
    sim = Simulator(takeoff_altitude_m=ctx.takeoff_altitude_m)
    error: str | None = None
    message: str | None = None
    try:
        response = ctx.agent.complete(request)
        code = extract_code(response)
        outcome = interpret(parse(code.source), sim, ctx.step_limit)
        if not outcome.ok:
            error, message = outcome.error.category, str(outcome.error)
    except LLMError as exc:
        error, message = "LLMError", str(exc)
    except (NoCode, SkillScriptError) as exc:
        error, message = exc.category, str(exc)
    actual = filter_noops(sim.log, ctx.tolerance)
    success, completeness = score_run(actual, task.ground_truth, ctx.tolerance, ctx.completeness_mode)
    if error is not None:
        success = False
    return RunResult(
        task_id=task.id,
        method=config.method,
        model=ctx.model,
        k=config.k,
        cot=config.cot,
        constraint_impl=config.constraint_impl,
        repeat_index=repeat_index,
        success=success,
        completeness=completeness,
        error_category=error,
        error_message=message,
        actual_transitions=[t.as_list() for t in actual],
        response_ref=cache_key(request),
    )


# -- plans ------------------------------------------------------------------


@dataclass
class AgentConfig:
    kind: str = "oracle"  # http | replay | oracle | faulty
    fault: str | None = None
    endpoint: str | None = None
    api_key_env: str = "GSCE_API_KEY"
    cache_dir: str | None = None
    timeout: float = 60.0
    max_attempts: int = 3
    max_concurrency: int = 4
    min_interval: float = 0.0

    def default_model(self) -> str:
        if self.kind == "oracle":
            return "oracle"
        if self.kind == "faulty":
            return f"faulty-{self.fault}"
        return "gpt-4-turbo-2024-04-09"


def build_agent(cfg: AgentConfig, corpus: CorpusFile) -> Agent:
    if cfg.kind == "oracle":
        agent: Agent = OracleAgent(corpus)
    elif cfg.kind == "faulty":
        try:
            agent = FaultyAgent(corpus, cfg.fault or "")
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    elif cfg.kind == "http":
        if not cfg.endpoint:
            raise ConfigError("the http agent needs an endpoint URL")
        agent = HttpAgent(
            cfg.endpoint,
            api_key_env=cfg.api_key_env,
            timeout=cfg.timeout,
            max_attempts=cfg.max_attempts,
            max_concurrency=cfg.max_concurrency,
            min_interval=cfg.min_interval,
        )
    elif cfg.kind == "replay":
        if not cfg.cache_dir:
            raise ConfigError("the replay agent needs a cache directory")
        if not ResponseCache(cfg.cache_dir).path.exists():
            raise ConfigError(f"no response cache at {cfg.cache_dir}")
        return ReplayAgent(ResponseCache(cfg.cache_dir), strict=True)
    else:
        raise ConfigError(f"unknown agent kind {cfg.kind!r}")
    if cfg.cache_dir:
        agent = recording(agent, ResponseCache(cfg.cache_dir))
    return agent


@dataclass
class RunPlan:
    corpus_path: str
    out_path: str
    methods: Sequence[str] = ("gsce",)
    k: int | None = None
    cot: bool | None = None
    constraint_impl: bool | None = None
    repeats: int = 3
    agent: AgentConfig = field(default_factory=AgentConfig)
    model: str | None = None
    tolerance: Tolerance = DEFAULT_TOLERANCE
    parallelism: int = 4
    library_path: str | None = None
    texts_dir: str | None = None
    temperature: float = 0.0
    max_tokens: int = 2048
    step_limit: int = DEFAULT_STEP_LIMIT
    takeoff_altitude_m: float = DEFAULT_TAKEOFF_ALTITUDE_M
    completeness_mode: str = "lcs"

    def configs(self) -> list[MethodConfig]:
        try:
            return [preset(m, self.k, self.cot, self.constraint_impl) for m in self.methods]
        except PromptError as exc:
            raise ConfigError(str(exc)) from None


def prepare(plan: RunPlan) -> tuple[list[tuple[Task, MethodConfig, int]], RunContext]:
    """Validate ``plan`` and expand it into (task, config, repeat) triples."""
    if plan.repeats < 1:
        raise ConfigError("repeats must be at least 1")
    if plan.parallelism < 1:
        raise ConfigError("parallelism must be at least 1")
    if plan.completeness_mode not in ("lcs", "prefix"):
        raise ConfigError(f"unknown completeness mode {plan.completeness_mode!r}")
    configs = plan.configs()
    library = load_example_library(plan.library_path)
    for cfg in configs:
        if cfg.k > len(library):
            raise ConfigError(f"k={cfg.k} exceeds the example library size ({len(library)})")
    corpus = load_corpus(plan.corpus_path)
    texts = load_texts(plan.texts_dir)
    ctx = RunContext(
        agent=build_agent(plan.agent, corpus),
        library=library,
        texts=texts,
        model=plan.model or plan.agent.default_model(),
        tolerance=plan.tolerance,
        temperature=plan.temperature,
        max_tokens=plan.max_tokens,
        step_limit=plan.step_limit,
        takeoff_altitude_m=plan.takeoff_altitude_m,
        completeness_mode=plan.completeness_mode,
    )
    triples = [(t, cfg, r) for t in corpus.tasks for cfg in configs for r in range(plan.repeats)]
    return triples, ctx


def execute_all(triples, ctx: RunContext, parallelism: int) -> list[RunResult]:
    if parallelism == 1:
        return [execute_run(t, cfg, ctx, r) for t, cfg, r in triples]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        futures = [pool.submit(execute_run, t, cfg, ctx, r) for t, cfg, r in triples]
        return [f.result() for f in futures]


def run_plan(plan: RunPlan) -> Path:
    """Execute every triple in ``plan`` and write sorted JSON-lines results."""
    triples, ctx = prepare(plan)
    log.info("running %d evaluations with parallelism %d", len(triples), plan.parallelism)
    results = execute_all(triples, ctx, plan.parallelism)
    out = Path(plan.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_results(results, out)
    return out


def sweep_k(plan: RunPlan, k_values: Sequence[int]) -> Path:
    """Run the gsce method once per example count and write all results to one file."""
    results: list[RunResult] = []
    for k in k_values:
        triples, ctx = prepare(replace(plan, methods=("gsce",), k=k))
        results.extend(execute_all(triples, ctx, plan.parallelism))
    out = Path(plan.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_results(results, out)
    return out
