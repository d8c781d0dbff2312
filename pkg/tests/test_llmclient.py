import hashlib
import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from gsce.corpus import CorpusFile, execute_oracle, sample_tasks
from gsce.dronesim import Simulator
from gsce.llmclient import (
    CacheCollisionError,
    ChatRequest,
    FaultyAgent,
    HttpAgent,
    LLMError,
    OracleAgent,
    ReplayAgent,
    ResponseCache,
    cache_key,
    complete,
    recording,
)
from gsce.runner import extract_code
from gsce.skillscript import interpret, parse


def req(user="Fly 5 meters down, then fly 4 meters up.", **kw):
    return ChatRequest(system_text=kw.pop("system_text", "sys"), user_text=user, model=kw.pop("model", "m"), **kw)


class Stub:
    """Local chat-completions server. ``plan`` maps call number -> (status, body|None)."""

    def __init__(self, plan=None, delay=0.0):
        self.plan = plan or {}
        self.delay = delay
        self.calls = 0
        self.in_flight = 0
        self.max_in_flight = 0
        self.headers = []
        self.bodies = []
        self.lock = threading.Lock()
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                with stub.lock:
                    stub.calls += 1
                    n = stub.calls
                    stub.in_flight += 1
                    stub.max_in_flight = max(stub.max_in_flight, stub.in_flight)
                    stub.headers.append(dict(self.headers))
                    stub.bodies.append(body)
                try:
                    time.sleep(stub.delay(body) if callable(stub.delay) else stub.delay)
                    status, payload = stub.plan.get(n, (200, None))
                    if payload is None:
                        payload = {"choices": [{"message": {"role": "assistant",
                                                            "content": "echo:" + body["messages"][1]["content"]},
                                                "finish_reason": "stop"}]}
                    data = json.dumps(payload).encode()
                    self.send_response(status)
                    self.send_header("Content-Type", "application/json")
                    self.send_header("Content-Length", str(len(data)))
                    self.end_headers()
                    self.wfile.write(data)
                finally:
                    with stub.lock:
                        stub.in_flight -= 1

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.server.server_address[1]}/v1"
        threading.Thread(target=self.server.serve_forever, daemon=True).start()

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def stub_factory():
    stubs = []

    def make(**kw):
        s = Stub(**kw)
        stubs.append(s)
        return s

    yield make
    for s in stubs:
        s.close()


@pytest.fixture
def corpus():
    return CorpusFile(sample_tasks())


# -- cache keys -------------------------------------------------------------


def test_cache_key_is_stable():
    assert cache_key(req()) == cache_key(req())
    assert len(cache_key(req())) == 64


def test_cache_key_includes_repeat_index():
    assert cache_key(req(repeat_index=0)) != cache_key(req(repeat_index=1))


def test_cache_key_ignores_keyword_order():
    a = ChatRequest(system_text="s", user_text="u", model="m", temperature=0.0, max_tokens=10, repeat_index=2)
    b = ChatRequest(repeat_index=2, max_tokens=10, temperature=0.0, model="m", user_text="u", system_text="s")
    assert cache_key(a) == cache_key(b)


def test_cache_key_frozen_value():
    # pins the canonical encoding so recorded caches stay readable across versions
    r = ChatRequest(system_text="s", user_text="u", model="m")
    canonical = '{"max_tokens":2048,"model":"m","repeat_index":0,"system_text":"s","temperature":0.0,"user_text":"u"}'
    assert cache_key(r) == hashlib.sha256(canonical.encode()).hexdigest()
    assert cache_key(r) == "951491ed27cccb0884a4e1cc600b95b5ba87f2469812f842f553295c999c0841"


def test_request_validation():
    with pytest.raises(ValueError):
        req(temperature=-0.1)
    with pytest.raises(ValueError):
        req(repeat_index=-1)


# -- cache / replay ---------------------------------------------------------


def test_replay_hit_and_strict_miss(tmp_path):
    cache = ResponseCache(tmp_path)
    cache.put(req(), "recorded text")
    agent = ReplayAgent(ResponseCache(tmp_path))
    assert complete(agent, req()) == "recorded text"
    with pytest.raises(LLMError, match="cache miss"):
        agent.complete(req(repeat_index=1))


def test_cache_file_is_jsonl(tmp_path):
    cache = ResponseCache(tmp_path / "c")
    cache.put(req(), "a")
    cache.put(req(repeat_index=1), "b")
    cache.put(req(), "ignored duplicate")
    lines = (tmp_path / "c" / "responses.jsonl").read_text().splitlines()
    assert len(lines) == 2
    rec = json.loads(lines[0])
    assert set(rec) == {"request_hash", "response_text", "model", "timestamp", "request"}
    assert rec["request_hash"] == cache_key(req())


def test_cache_collision_detected(tmp_path):
    cache = ResponseCache(tmp_path)
    cache.put(req(), "a")
    path = cache.path
    rec = json.loads(path.read_text())
    rec["request"]["user_text"] = "something else"
    with open(path, "a") as fh:
        fh.write(json.dumps(rec) + "\n")
    with pytest.raises(CacheCollisionError):
        ResponseCache(tmp_path)


def test_recording_wrapper(tmp_path, corpus):
    cache = ResponseCache(tmp_path)
    agent = recording(OracleAgent(corpus), cache)
    first = agent.complete(req())
    assert len(cache) == 1
    assert ReplayAgent(ResponseCache(tmp_path)).complete(req()) == first


# -- oracle / faulty --------------------------------------------------------


def run_response(text):
    sim = Simulator()
    outcome = interpret(parse(extract_code(text).source), sim)
    return outcome, sim.log


def test_oracle_sample_task_one(corpus):
    text = OracleAgent(corpus).complete(req())
    assert text.startswith("```")
    outcome, log = run_response(text)
    assert outcome.ok
    assert [t.as_list() for t in log] == [[0, 0, 5, 0], [0, 0, -4, 0]]


def test_oracle_unknown_query(corpus):
    with pytest.raises(LLMError):
        OracleAgent(corpus).complete(req(user="Do a barrel roll."))


def test_flip_z_negates_only_dz(corpus):
    for task in corpus.tasks:
        _, log = run_response(FaultyAgent(corpus, "flip_z_sign").complete(req(user=task.query)))
        good = execute_oracle(task.maneuvers)
        for a, b in zip(good, log):
            assert (b.dx, b.dy, b.dyaw) == pytest.approx((a.dx, a.dy, a.dyaw))
            assert b.dz == pytest.approx(-a.dz)


def test_ignore_body_frame_breaks_turned_moves(corpus):
    task = corpus.tasks[1]  # turn 90 then 4 m left
    _, log = run_response(FaultyAgent(corpus, "ignore_body_frame").complete(req(user=task.query)))
    assert log[1].as_list() == pytest.approx([0, -4, 0, 0])


def test_emit_prose_has_no_code(corpus):
    text = FaultyAgent(corpus, "emit_prose").complete(req())
    assert "```" not in text
    with pytest.raises(Exception) as info:
        parse(extract_code(text).source)
    assert info.value.category == "ParseError"


def test_unknown_fault(corpus):
    with pytest.raises(ValueError):
        FaultyAgent(corpus, "explode")


# -- http -------------------------------------------------------------------


def test_http_round_trip_and_wire_format(stub_factory, monkeypatch):
    monkeypatch.setenv("GSCE_API_KEY", "sk-test-123")
    stub = stub_factory()
    agent = HttpAgent(stub.url, backoff=0.01)
    assert agent.complete(req(user="hello", max_tokens=77, temperature=0.5)) == "echo:hello"
    body = stub.bodies[0]
    assert body == {
        "model": "m",
        "temperature": 0.5,
        "max_tokens": 77,
        "messages": [{"role": "system", "content": "sys"}, {"role": "user", "content": "hello"}],
    }
    assert stub.headers[0]["Authorization"] == "Bearer sk-test-123"


def test_http_retries_transient_errors(stub_factory):
    stub = stub_factory(plan={1: (503, {"error": "busy"}), 2: (429, {"error": "slow down"})})
    agent = HttpAgent(stub.url, backoff=0.01, max_attempts=3)
    assert agent.complete(req(user="x")) == "echo:x"
    assert stub.calls == 3


def test_http_gives_up_after_max_attempts(stub_factory):
    stub = stub_factory(plan={n: (500, {"error": "down"}) for n in range(1, 10)})
    with pytest.raises(LLMError, match="3 attempts"):
        HttpAgent(stub.url, backoff=0.01).complete(req())
    assert stub.calls == 3


def test_http_client_error_is_not_retried(stub_factory):
    stub = stub_factory(plan={1: (401, {"error": "bad key"})})
    with pytest.raises(LLMError, match="401"):
        HttpAgent(stub.url, backoff=0.01).complete(req())
    assert stub.calls == 1


def test_http_truncation_is_an_error(stub_factory):
    payload = {"choices": [{"message": {"content": "```\ntakeoff("}, "finish_reason": "length"}]}
    stub = stub_factory(plan={1: (200, payload)})
    with pytest.raises(LLMError, match="truncated"):
        HttpAgent(stub.url).complete(req())


def test_http_malformed_response(stub_factory):
    stub = stub_factory(plan={1: (200, {"unexpected": True})})
    with pytest.raises(LLMError, match="malformed"):
        HttpAgent(stub.url).complete(req())


def test_http_timeout(stub_factory):
    stub = stub_factory(delay=0.5)
    with pytest.raises(LLMError, match="timed out"):
        HttpAgent(stub.url, timeout=0.1, max_attempts=2, backoff=0.01).complete(req())


def test_http_connection_refused():
    with pytest.raises(LLMError, match="transport"):
        HttpAgent("http://127.0.0.1:9", max_attempts=1).complete(req())


def test_http_concurrency_cap_and_no_cross_wiring(stub_factory):
    stub = stub_factory(delay=lambda body: 0.02 * (hash(body["messages"][1]["content"]) % 4))
    agent = HttpAgent(stub.url, max_concurrency=3)
    results = {}

    def worker(i):
        results[i] = agent.complete(req(user=f"task-{i}"))

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(24)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert results == {i: f"echo:task-{i}" for i in range(24)}
    assert 1 < stub.max_in_flight <= 3


def test_http_key_never_logged(stub_factory, monkeypatch, caplog):
    monkeypatch.setenv("GSCE_API_KEY", "sk-secret-value")
    stub = stub_factory(plan={1: (500, {"error": "x"})})
    with caplog.at_level("DEBUG"):
        HttpAgent(stub.url, backoff=0.01).complete(req())
    assert "sk-secret-value" not in caplog.text
