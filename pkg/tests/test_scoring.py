import json
import random
from itertools import combinations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from gsce.dronesim import StateTransition as T
from gsce.scoring import (
    RunResult,
    Tolerance,
    aggregate,
    filter_noops,
    lcs_length,
    render_report,
    score_run,
    transitions_match,
)


def brute_force_lcs(actual, gt, tol):
    """Largest subset of ``actual`` (kept in order) that embeds in ``gt``."""
    best = 0
    for size in range(len(actual), 0, -1):
        for idx in combinations(range(len(actual)), size):
            j = 0
            for i in idx:
                while j < len(gt) and not transitions_match(actual[i], gt[j], tol):
                    j += 1
                if j == len(gt):
                    break
                j += 1
            else:
                return size
    return best


BASE = [T(0, 0, 5, 0), T(0, 0, -4, 0), T(0, 0, 0, 90), T(4, 0, 0, 0), T(0, 8.66, -5, 0)]


def jitter(rng, t, scale=0.15):
    return T(t.dx + rng.uniform(-scale, scale), t.dy + rng.uniform(-scale, scale),
             t.dz + rng.uniform(-scale, scale), t.dyaw + rng.uniform(-1.5, 1.5))


def random_pair(rng):
    gt = [rng.choice(BASE) for _ in range(rng.randrange(1, 9))]
    actual = [jitter(rng, rng.choice(BASE)) for _ in range(rng.randrange(0, 9))]
    return actual, gt


def test_lcs_matches_brute_force():
    rng = random.Random(0)
    tol = Tolerance()
    for _ in range(300):
        actual, gt = random_pair(rng)
        assert lcs_length(actual, gt, tol) == brute_force_lcs(actual, gt, tol)


@pytest.mark.parametrize(
    "a, b, expected",
    [
        (T(0, 0, 5, 0), T(0, 0, 5.05, 0), True),
        (T(0, 0, 5, 0), T(0, 0, -5, 0), False),
        (T(0, 0, 0, 179.5), T(0, 0, 0, -179.9), True),
        (T(0, 0, 0, 10), T(0, 0, 0, 11.5), False),
        (T(1, 1, 1, 0), T(1.08, 0.92, 1.0, 0), True),
    ],
)
def test_transitions_match(a, b, expected):
    assert transitions_match(a, b, Tolerance()) is expected


def test_filter_noops():
    assert filter_noops([T(0, 0, 0, 0), T(1, 0, 0, 0)]) == [T(1, 0, 0, 0)]
    assert filter_noops([]) == []
    assert filter_noops([T(0.05, 0, 0, 0.5), T(0, 0, 0, 360)]) == []


transitions = st.builds(
    T,
    st.floats(-0.3, 0.3),
    st.floats(-0.3, 0.3),
    st.floats(-0.3, 0.3),
    st.floats(-3, 3),
)


@given(st.lists(transitions, max_size=10))
def test_filter_idempotent(log):
    once = filter_noops(log)
    assert filter_noops(once) == once


def test_score_exact_match():
    gt = [T(0, 0, 5, 0), T(0, 0, -4, 0)]
    assert score_run(list(gt), gt) == (True, 1.0)


def test_score_prefix_only():
    gt = [T(0, 0, 5, 0), T(0, 0, -4, 0)]
    assert score_run(gt[:1], gt) == (False, 0.5)


def test_score_z_sign_confusion():
    gt = [T(0, 0, 5, 0), T(0, 0, -4, 0)]
    assert score_run([T(0, 0, -5, 0), T(0, 0, 4, 0)], gt) == (False, 0.0)


def test_extra_transition_keeps_full_completeness_but_fails():
    gt = [T(0, 0, 5, 0), T(0, 0, -4, 0)]
    assert score_run([T(0, 0, 5, 0), T(3, 0, 0, 0), T(0, 0, -4, 0)], gt) == (False, 1.0)


def test_prefix_mode():
    gt = [T(0, 0, 5, 0), T(0, 0, -4, 0)]
    actual = [T(3, 0, 0, 0), T(0, 0, -4, 0)]
    assert score_run(actual, gt, completeness_mode="lcs")[1] == 0.5
    assert score_run(actual, gt, completeness_mode="prefix")[1] == 0.0


def test_empty_ground_truth_rejected():
    with pytest.raises(ValueError):
        score_run([], [])


def test_score_properties_on_random_logs():
    rng = random.Random(12)
    for _ in range(300):
        actual, gt = random_pair(rng)
        tol = Tolerance(rng.uniform(0.05, 0.2), rng.uniform(0.5, 2))
        ok, comp = score_run(actual, gt, tol)
        if ok:
            assert comp == 1.0
        longer = actual + [jitter(rng, rng.choice(BASE))]
        assert score_run(longer, gt, tol)[1] >= comp
        wider = Tolerance(tol.pos_eps * 2, tol.yaw_eps * 2)
        if ok:
            assert score_run(actual, gt, wider)[0]


def make_result(i, success, comp=None, method="gsce", model="m"):
    comp = 1.0 if success else (comp if comp is not None else 0.5)
    return RunResult(f"T{i:03d}", method, model, 3, True, True, i % 3, success, comp)


def test_run_result_invariants():
    with pytest.raises(ValueError):
        RunResult("t", "gsce", "m", 3, True, True, 0, True, 0.5)
    with pytest.raises(ValueError):
        RunResult("t", "gsce", "m", 3, True, True, 0, True, 1.0, error_category="ParseError")
    with pytest.raises(ValueError):
        RunResult("t", "gsce", "m", 3, True, True, 0, False, 0.0, error_category="Oops")


@pytest.mark.parametrize("successes, shown", [(120, "90.9%"), (10, "7.6%"), (132, "100.0%"), (0, "0.0%")])
def test_aggregate_rates(successes, shown):
    results = [make_result(i, i < successes) for i in range(132)]
    (cell,) = aggregate(results).cells
    assert cell.runs == 132
    assert cell.sr == pytest.approx(successes / 132)
    assert shown in render_report(aggregate(results))


def test_aggregate_groups_and_is_order_independent():
    rng = random.Random(4)
    results = [make_result(i, rng.random() < 0.5, rng.random(), method=rng.choice(["base", "gsce"]))
               for i in range(60)]
    report = aggregate(results)
    assert [c.method for c in report.cells] == ["base", "gsce"]
    assert report.total_runs == 60
    shuffled = results[:]
    rng.shuffle(shuffled)
    assert aggregate(shuffled) == report


def test_empty_report():
    report = aggregate([])
    assert report.cells == []
    assert render_report(report, "csv") == "method,model,k,cot,constraint_impl,runs,SR,completeness\n"


def test_formats_agree():
    results = [make_result(i, i % 4 != 0, 0.25) for i in range(44)] + \
              [make_result(i, i % 2 == 0, method="base") for i in range(44)]
    report = aggregate(results)
    md = render_report(report, "markdown")
    csv_text = render_report(report, "csv")
    data = json.loads(render_report(report, "json"))
    for cell in data["cells"]:
        sr, comp = f"{cell['SR']:.1f}%", f"{cell['completeness']:.1f}%"
        assert sr in md and comp in md
        assert f"{sr},{comp}" in csv_text


def test_unknown_format():
    with pytest.raises(ValueError):
        render_report(aggregate([]), "html")
