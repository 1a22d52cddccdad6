import json
import threading
import time

import pytest

from folkit.generate import (
    GenConfig,
    RetryPolicy,
    cache_key,
    generate,
    ingest_offline,
    sampling_plan,
)
from folkit.story import write_jsonl

from sample_stories import (
    sat_nl_story,
    soccer_nl_story,
    worksheet_nl_story,
    worksheet_story,
)


class FakeResponse:
    def __init__(self, status_code=200, payload=None, body=None):
        self.status_code = status_code
        self._payload = payload
        self._body = body

    def json(self):
        if self._payload is None:
            raise ValueError(f"not json: {self._body!r}")
        return self._payload


class FakeSession:
    """Chat-completion endpoint double that records concurrency and calls."""

    def __init__(self, completion_for=None, fail=None, latency=0.0):
        self.completion_for = completion_for or (lambda body: "<EVALUATE>\nFOL: P(a)\nFOL: Q(a)\n</EVALUATE>")
        self.fail = fail or (lambda body: None)
        self.latency = latency
        self.calls = 0
        self.in_flight = 0
        self.max_in_flight = 0
        self._lock = threading.Lock()

    def post(self, url, json=None, headers=None, timeout=None):
        with self._lock:
            self.calls += 1
            self.in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self.in_flight)
        try:
            if self.latency:
                time.sleep(self.latency)
            failure = self.fail(json)
            if failure is not None:
                return failure
            content = self.completion_for(json)
            return FakeResponse(
                payload={"choices": [{"message": {"content": content}}]}
            )
        finally:
            with self._lock:
                self.in_flight -= 1


def config(**overrides):
    defaults = dict(
        endpoint="http://fake.test/v1/chat/completions",
        models=("model-a",),
        retry=RetryPolicy(max_attempts=2, backoff_base=0.0),
        max_in_flight=3,
    )
    defaults.update(overrides)
    return GenConfig(**defaults)


def exemplars():
    import random

    from folkit.story import NlStory
    from folkit.story import Label
    from story_gen import random_fol_story

    pool = [
        (worksheet_nl_story(), worksheet_story()),
        (soccer_nl_story(), soccer_nl_story().gold_fol),
    ]
    for i in range(6):
        fol = random_fol_story(random.Random(1000 + i))
        texts = tuple(f"Exemplar sentence {j}." for j in range(len(fol.premises)))
        nl = NlStory(f"exemplar-{i}", texts, "Exemplar conclusion.", Label.TRUE)
        pool.append((nl, fol))
    return pool


def test_sampling_plan_default_is_30_per_story():
    plan = sampling_plan(config())
    assert len(plan) == 30
    # 1 model x 2 temperatures x 3 shot counts = 6 combos, 5 samples each.
    combos = {(m, t, s) for m, t, s, _ in plan}
    assert len(combos) == 6
    assert all(sum(1 for p in plan if p[:3] == c) == 5 for c in combos)


def test_sampling_plan_remainder_round_robin():
    plan = sampling_plan(config(total_samples=8, temperatures=(0.25, 0.6), shot_counts=(2,)))
    # Two combos, eight samples: 4 + 4.
    by_combo = {}
    for m, t, s, _ in plan:
        by_combo[(m, t, s)] = by_combo.get((m, t, s), 0) + 1
    assert sorted(by_combo.values()) == [4, 4]
    plan = sampling_plan(config(total_samples=7, temperatures=(0.25, 0.6), shot_counts=(2,)))
    by_combo = {}
    for m, t, s, _ in plan:
        by_combo[(m, t, s)] = by_combo.get((m, t, s), 0) + 1
    assert sorted(by_combo.values()) == [3, 4]


def test_sampling_plan_explicit_samples_per_combination():
    plan = sampling_plan(config(samples_per_combination=2))
    assert len(plan) == 12


def test_generate_produces_one_record_per_plan_entry():
    session = FakeSession()
    records = generate([sat_nl_story()], exemplars(), config(), session=session)
    assert len(records) == 30
    assert session.calls == 30
    assert all(r.story is not None for r in records)
    keys = {(r.meta.model_name, r.meta.temperature, r.meta.shots, r.meta.sample_index)
            for r in records}
    assert len(keys) == 30


def test_generate_warm_cache_makes_no_requests(tmp_path):
    cfg = config(cache_dir=str(tmp_path / "cache"))
    first = FakeSession()
    generate([sat_nl_story()], exemplars(), cfg, session=first)
    assert first.calls == 30
    second = FakeSession()
    records = generate([sat_nl_story()], exemplars(), cfg, session=second)
    assert second.calls == 0
    assert len(records) == 30
    # Cached timestamps are reused verbatim.
    assert all(r.meta.timestamp for r in records)


def test_generate_network_failure_records(tmp_path):
    session = FakeSession(fail=lambda body: FakeResponse(status_code=500))
    records = generate([sat_nl_story()], exemplars(),
                       config(cache_dir=str(tmp_path / "c")), session=session)
    assert all(r.failure_reason == "network" for r in records)
    assert all(r.raw_completion is None for r in records)
    # Two attempts per task.
    assert session.calls == 60


def test_generate_malformed_body_is_network_error():
    session = FakeSession(fail=lambda body: FakeResponse(status_code=200, payload={"nope": 1}))
    records = generate([sat_nl_story()], exemplars(),
                       config(total_samples=2, shot_counts=(2,), temperatures=(0.25,)),
                       session=session)
    assert all(r.failure_reason == "network" for r in records)


def test_generate_resumes_missing_records_only(tmp_path):
    cfg = config(cache_dir=str(tmp_path / "cache"))

    # Every high-temperature request fails (retries included), so the first
    # pass caches only the low-temperature half.
    def fail_hot(body):
        return FakeResponse(status_code=503) if body["temperature"] == 0.6 else None

    first = FakeSession(fail=fail_hot)
    records = generate([sat_nl_story()], exemplars(), cfg, session=first)
    failed = [r for r in records if r.failure_reason == "network"]
    assert len(failed) == 15

    second = FakeSession()
    records2 = generate([sat_nl_story()], exemplars(), cfg, session=second)
    assert second.calls == len(failed)
    assert all(r.failure_reason != "network" for r in records2)


def test_max_in_flight_never_exceeded():
    session = FakeSession(latency=0.005)
    cfg = config(max_in_flight=3)
    generate([sat_nl_story()], exemplars(), cfg, session=session)
    assert session.max_in_flight <= 3


def test_cache_key_distinguishes_all_fields():
    base = cache_key("prompt", "model", 0.25, 0)
    assert cache_key("prompt2", "model", 0.25, 0) != base
    assert cache_key("prompt", "model2", 0.25, 0) != base
    assert cache_key("prompt", "model", 0.6, 0) != base
    assert cache_key("prompt", "model", 0.25, 1) != base


def test_ingest_offline(tmp_path):
    path = tmp_path / "candidates.jsonl"
    rows = [
        {
            "story_id": f"s{i}",
            "model": "m",
            "shots": 2,
            "temperature": 0.25,
            "sample_index": i,
            "completion": "<EVALUATE>\nFOL: P(a)\nFOL: Q(a)\n</EVALUATE>",
        }
        for i in range(10)
    ]
    write_jsonl(path, rows)
    records = ingest_offline(path)
    assert len(records) == 10
    assert all(r.label is None for r in records)
    assert all(r.story is None for r in records)  # parsing happens later


def test_ingest_offline_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("", encoding="utf-8")
    assert ingest_offline(path) == []


def test_ingest_offline_skips_bad_records(tmp_path):
    path = tmp_path / "candidates.jsonl"
    rows = [
        {"story_id": "a", "model": "m", "shots": 2, "temperature": 0.25,
         "sample_index": 0, "completion": "x"},
        {"story_id": "b", "model": "m", "shots": 2, "temperature": 0.25,
         "sample_index": 1},  # no completion
    ]
    write_jsonl(path, rows)
    records = ingest_offline(path)
    assert len(records) == 1


def test_gen_config_validation():
    with pytest.raises(ValueError):
        config(models=())
    with pytest.raises(ValueError):
        config(samples_per_combination=0)
    with pytest.raises(ValueError):
        config(max_in_flight=0)


def test_generate_against_live_http_endpoint(tmp_path, monkeypatch):
    # End-to-end over real sockets: a local chat-completions stand-in that
    # echoes a fixed completion and records the bearer header.
    import json as jsonlib
    import threading
    from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

    seen_auth = []

    class Endpoint(BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def do_POST(self):
            length = int(self.headers.get("Content-Length", "0"))
            body = jsonlib.loads(self.rfile.read(length))
            seen_auth.append(self.headers.get("Authorization"))
            assert body["n"] == 1
            assert body["messages"][0]["role"] == "user"
            payload = jsonlib.dumps(
                {"choices": [{"message": {
                    "content": "<EVALUATE>\nFOL: P(a)\nFOL: Q(a)\n</EVALUATE>"}}]}
            ).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

    server = ThreadingHTTPServer(("127.0.0.1", 0), Endpoint)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    monkeypatch.setenv("FOLKIT_API_KEY", "sk-test-123")
    try:
        cfg = config(
            endpoint=f"http://127.0.0.1:{server.server_address[1]}/v1/chat/completions",
            total_samples=4,
            shot_counts=(2,),
            temperatures=(0.25,),
            cache_dir=str(tmp_path / "cache"),
        )
        records = generate([sat_nl_story()], exemplars(), cfg)
        assert len(records) == 4
        assert all(r.story is not None for r in records)
        assert seen_auth and all(a == "Bearer sk-test-123" for a in seen_auth)
    finally:
        server.shutdown()
        server.server_close()
