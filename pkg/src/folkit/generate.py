"""Candidate pool production via chat-completion endpoints, with caching.

Every (story, model, temperature, shots, sample_index) combination yields one
candidate record.  Completions are cached on disk keyed by a content hash of
(prompt, model, temperature, sample_index); warm cache entries are never
re-fetched, which also makes interrupted runs resumable: restarting fetches
exactly the missing records.

The sampling plan fills a per-story sample budget (30 by default) across the
models x temperatures x shot-counts grid, split evenly with the remainder
assigned round-robin; ``samples_per_combination`` overrides the division.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from itertools import product
from pathlib import Path
from typing import Sequence

import requests

from .story import (
    CandidateRecord,
    CompletionParseError,
    GenerationMeta,
    NlStory,
    FolStory,
    build_prompt,
    candidate_from_record,
    parse_completion,
    read_jsonl,
)

log = logging.getLogger(__name__)


class NetworkError(Exception):
    pass


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    backoff_base: float = 0.5

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


@dataclass(frozen=True)
class GenConfig:
    endpoint: str
    models: tuple[str, ...]
    api_key_env: str = "FOLKIT_API_KEY"
    temperatures: tuple[float, ...] = (0.25, 0.6)
    shot_counts: tuple[int, ...] = (2, 4, 8)
    samples_per_combination: int | None = None
    total_samples: int = 30
    max_in_flight: int = 4
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    cache_dir: str | None = None
    request_timeout: float = 60.0

    def __post_init__(self):
        if not self.models:
            raise ValueError("need at least one model")
        if self.samples_per_combination is not None and self.samples_per_combination < 1:
            raise ValueError("samples_per_combination must be >= 1")
        if self.total_samples < 1:
            raise ValueError("total_samples must be >= 1")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")


def sampling_plan(config: GenConfig) -> list[tuple[str, float, int, int]]:
    """Per-story plan of (model, temperature, shots, sample_index) tuples."""
    combos = list(product(config.models, config.temperatures, config.shot_counts))
    plan: list[tuple[str, float, int, int]] = []
    if config.samples_per_combination is not None:
        counts = [config.samples_per_combination] * len(combos)
    else:
        base, remainder = divmod(config.total_samples, len(combos))
        counts = [base + (1 if i < remainder else 0) for i in range(len(combos))]
    for (model, temperature, shots), count in zip(combos, counts):
        for index in range(count):
            plan.append((model, temperature, shots, index))
    return plan


def cache_key(prompt: str, model: str, temperature: float, sample_index: int) -> str:
    payload = json.dumps(
        [prompt, model, temperature, sample_index], ensure_ascii=False, sort_keys=True
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class CompletionCache:
    """Content-addressed completion store with serialized writes."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, key: str) -> dict | None:
        path = self._path(key)
        if not path.exists():
            return None
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            return None

    def put(self, key: str, entry: dict):
        path = self._path(key)
        with self._write_lock:
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(entry, ensure_ascii=False), encoding="utf-8")
            os.replace(tmp, path)


def _fetch_completion(
    session,
    config: GenConfig,
    api_key: str | None,
    prompt: str,
    model: str,
    temperature: float,
) -> str:
    headers = {"Content-Type": "application/json"}
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    body = {
        "model": model,
        "temperature": temperature,
        "n": 1,
        "messages": [{"role": "user", "content": prompt}],
    }
    last_error = "no attempts made"
    for attempt in range(config.retry.max_attempts):
        if attempt:
            time.sleep(config.retry.backoff_base * (2 ** (attempt - 1)))
        try:
            response = session.post(
                config.endpoint, json=body, headers=headers, timeout=config.request_timeout
            )
        except requests.RequestException as exc:
            last_error = f"request failed: {exc}"
            continue
        if getattr(response, "status_code", 0) != 200:
            last_error = f"status {getattr(response, 'status_code', '?')}"
            continue
        try:
            payload = response.json()
            content = payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            last_error = f"malformed response body: {exc}"
            continue
        if not isinstance(content, str):
            last_error = "completion content is not a string"
            continue
        return content
    raise NetworkError(last_error)


def generate(
    stories: Sequence[NlStory],
    exemplars: Sequence[tuple[NlStory, FolStory]],
    config: GenConfig,
    session=None,
) -> list[CandidateRecord]:
    """Produce one candidate per (story, model, temperature, shots, sample).

    Network failures exhaust the retry policy and yield a record with
    ``failure_reason='network'``; the pipeline continues.  Completions are
    parsed into stories immediately.
    """
    if session is None:
        session = requests.Session()
    api_key = os.environ.get(config.api_key_env)
    cache = CompletionCache(config.cache_dir) if config.cache_dir else None
    plan = sampling_plan(config)

    tasks: list[tuple[NlStory, str, float, int, int, str]] = []
    for story in stories:
        for model, temperature, shots, sample_index in plan:
            prompt = build_prompt(story, exemplars, shots)
            tasks.append((story, model, temperature, shots, sample_index, prompt))

    def run_task(task) -> CandidateRecord:
        story, model, temperature, shots, sample_index, prompt = task
        key = cache_key(prompt, model, temperature, sample_index)
        entry = cache.get(key) if cache else None
        if entry is None:
            try:
                completion = _fetch_completion(
                    session, config, api_key, prompt, model, temperature
                )
            except NetworkError as exc:
                log.warning(
                    "generation failed for story %s (%s, t=%s, %s-shot, sample %d): %s",
                    story.id, model, temperature, shots, sample_index, exc,
                )
                meta = GenerationMeta(model, shots, temperature, sample_index)
                return CandidateRecord(story.id, meta, None, failure_reason="network")
            entry = {
                "completion": completion,
                "created_at": datetime.now(timezone.utc).isoformat(),
            }
            if cache:
                cache.put(key, entry)
        meta = GenerationMeta(
            model, shots, temperature, sample_index, timestamp=entry.get("created_at", "")
        )
        record = CandidateRecord(story.id, meta, entry["completion"])
        try:
            record.story = parse_completion(entry["completion"], len(story.premises))
        except CompletionParseError as exc:
            record.failure_reason = exc.reason
        return record

    with ThreadPoolExecutor(max_workers=config.max_in_flight) as pool:
        return list(pool.map(run_task, tasks))


def ingest_offline(path: str | Path) -> list[CandidateRecord]:
    """Load candidate records from an interchange file, labels pending.

    Malformed lines are skipped with a logged diagnostic.  Completions are
    not parsed here since that needs the corpus premise counts; run
    :func:`folkit.story.parse_candidates` afterwards.
    """
    records: list[CandidateRecord] = []
    skipped = 0
    for lineno, obj in read_jsonl(path):
        try:
            records.append(candidate_from_record(obj))
        except (KeyError, ValueError, TypeError) as exc:
            skipped += 1
            log.warning("%s:%d: skipping candidate record: %s", path, lineno, exc)
    if skipped:
        log.warning("%s: skipped %d candidate record(s)", path, skipped)
    return records
