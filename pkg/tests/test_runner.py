import pytest

from gsce.corpus import CorpusFile, default_corpus_path, load_corpus, sample_tasks
from gsce.llmclient import FaultyAgent, OracleAgent
from gsce.prompt import load_example_library, load_texts, preset
from gsce.runner import (
    AgentConfig,
    ConfigError,
    NoCode,
    RunContext,
    RunPlan,
    execute_run,
    extract_code,
    prepare,
    run_plan,
)
from gsce.scoring import read_results


class Canned:
    """Agent that always answers with the same text."""

    def __init__(self, text):
        self.text = text
        self.requests = []

    def complete(self, request):
        self.requests.append(request)
        return self.text


@pytest.fixture(scope="module")
def base_ctx():
    return dict(library=load_example_library(), texts=load_texts(), model="test")


def ctx_with(agent, base_ctx, **kw):
    return RunContext(agent=agent, **base_ctx, **kw)


# -- extraction -------------------------------------------------------------


def test_extract_single_block():
    got = extract_code("Here you go:\n```python\ntakeoff()\n```\nDone.")
    assert (got.source, got.extraction_mode) == ("takeoff()", "fenced")


def test_extract_joins_blocks_in_order():
    text = "```\ntakeoff()\n```\nthen\n```skillscript\nfly_to(0, 0, -3)\nland()\n```"
    assert extract_code(text).source == "takeoff()\nfly_to(0, 0, -3)\nland()"


def test_extract_whole_response_fallback():
    got = extract_code("takeoff()\nland()\n")
    assert got.extraction_mode == "whole_response"


@pytest.mark.parametrize("text", ["", "   \n", "```\n\n```"])
def test_extract_nothing(text):
    with pytest.raises(NoCode):
        extract_code(text)


# -- single runs ------------------------------------------------------------


@pytest.mark.parametrize("task", sample_tasks(), ids=lambda t: t.id)
def test_oracle_run_succeeds(task, base_ctx):
    ctx = ctx_with(OracleAgent(CorpusFile(sample_tasks())), base_ctx)
    result = execute_run(task, preset("gsce"), ctx)
    assert result.success and result.completeness == 1.0
    assert result.error_category is None
    assert len(result.actual_transitions) == len(task.ground_truth)
    assert len(result.response_ref) == 64


def test_z_sign_fault(base_ctx):
    task = sample_tasks()[0]
    ctx = ctx_with(FaultyAgent(CorpusFile(sample_tasks()), "flip_z_sign"), base_ctx)
    result = execute_run(task, preset("gsce"), ctx)
    assert (result.success, result.completeness, result.error_category) == (False, 0.0, None)


def test_prose_fault(base_ctx):
    ctx = ctx_with(FaultyAgent(CorpusFile(sample_tasks()), "emit_prose"), base_ctx)
    result = execute_run(sample_tasks()[0], preset("base"), ctx)
    assert result.error_category == "ParseError"
    assert not result.success


@pytest.mark.parametrize(
    "text, category",
    [
        ("", "NoCode"),
        ("```\ntakeoff()\nteleport(1, 2, 3)\n```", "UnknownFunction"),
        ("```\nfly_to(0, 0, -5)\n```", "RuntimeError"),
        ("```\ntakeoff()\nx = 1\nx = 2\nx = 3\n```", "StepLimitExceeded"),
    ],
)
def test_error_categories(text, category, base_ctx):
    ctx = ctx_with(Canned(text), base_ctx, step_limit=3)
    result = execute_run(sample_tasks()[0], preset("gsce"), ctx)
    assert result.error_category == category
    assert not result.success and result.error_message


def test_partial_progress_counts_toward_completeness(base_ctx):
    text = "```\ntakeoff()\np = get_drone_position()\nfly_to(p.x, p.y, p.z + 5)\nboom()\n```"
    result = execute_run(sample_tasks()[0], preset("gsce"), ctx_with(Canned(text), base_ctx))
    assert result.error_category == "UnknownFunction"
    assert result.completeness == 0.5


def test_noops_are_filtered(base_ctx):
    text = "takeoff()\nfly_to(0, 0, -1.5)\nset_yaw(0)\nfly_to(0, 0, 3.5)\nfly_to(0, 0, -0.5)"
    result = execute_run(sample_tasks()[0], preset("gsce"), ctx_with(Canned(text), base_ctx))
    assert result.success
    assert result.actual_transitions == [[0, 0, 5, 0], [0, 0, -4, 0]]


def test_request_carries_run_settings(base_ctx):
    agent = Canned("takeoff()")
    ctx = ctx_with(agent, base_ctx, temperature=0.7, max_tokens=99)
    execute_run(sample_tasks()[0], preset("gsce"), ctx, repeat_index=2)
    (req,) = agent.requests
    assert (req.temperature, req.max_tokens, req.repeat_index, req.model) == (0.7, 99, 2, "test")
    assert req.user_text == sample_tasks()[0].query


def test_each_run_starts_from_a_fresh_simulator(base_ctx):
    ctx = ctx_with(OracleAgent(CorpusFile(sample_tasks())), base_ctx)
    first = [execute_run(t, preset("gsce"), ctx) for t in sample_tasks()]
    second = [execute_run(t, preset("gsce"), ctx) for t in reversed(sample_tasks())]
    assert first == list(reversed(second))


# -- plans ------------------------------------------------------------------


def test_plan_cardinality(tmp_path):
    out = run_plan(RunPlan(str(default_corpus_path()), str(tmp_path / "r.jsonl")))
    results = read_results(out)
    assert len(results) == 44 * 1 * 3
    assert len({(r.task_id, r.repeat_index) for r in results}) == 132
    assert all(r.success for r in results)


def test_plan_multiple_methods(tmp_path):
    plan = RunPlan(str(default_corpus_path()), str(tmp_path / "r.jsonl"),
                   methods=("base", "examples"), repeats=2)
    results = read_results(run_plan(plan))
    assert len(results) == 44 * 2 * 2
    assert {(r.method, r.k) for r in results} == {("base", 0), ("examples", 3)}


@pytest.mark.parametrize(
    "changes",
    [
        dict(k=9),
        dict(repeats=0),
        dict(parallelism=0),
        dict(methods=("fancy",)),
        dict(methods=("base",), k=2),
        dict(agent=AgentConfig(kind="http")),
        dict(agent=AgentConfig(kind="replay", cache_dir="/nonexistent/cache")),
        dict(agent=AgentConfig(kind="faulty", fault="nope")),
        dict(completeness_mode="fuzzy"),
    ],
)
def test_bad_plans(changes, tmp_path):
    plan = RunPlan(str(default_corpus_path()), str(tmp_path / "r.jsonl"), **changes)
    with pytest.raises(ConfigError):
        prepare(plan)


def test_empty_library_allows_only_k_zero(tmp_path):
    lib = tmp_path / "lib.json"
    lib.write_text("")
    ok = RunPlan(str(default_corpus_path()), str(tmp_path / "r.jsonl"), methods=("base", "constraints"),
                 library_path=str(lib), repeats=1)
    assert len(read_results(run_plan(ok))) == 88
    with pytest.raises(ConfigError):
        prepare(RunPlan(str(default_corpus_path()), str(tmp_path / "r.jsonl"), library_path=str(lib)))


def test_empty_corpus(tmp_path):
    path = tmp_path / "c.json"
    CorpusFile([]).save(path)
    out = run_plan(RunPlan(str(path), str(tmp_path / "r.jsonl")))
    assert read_results(out) == []
    assert load_corpus(path).tasks == []
