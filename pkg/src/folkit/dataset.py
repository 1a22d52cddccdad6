"""Label-match filtering of candidate pools into trainer-ready datasets.

Per story: candidates whose computed label matches the gold label become
supervised fine-tuning instances and the chosen side of preference pairs;
mismatching or erroring candidates become rejected sides.  Pairing samples
chosen/rejected without replacement up to the smaller pool (the full cross
product is available behind ``pairing='all'``).  All output ordering is
deterministic under a fixed seed, byte for byte.

Completion texts are the canonically rendered evaluate blocks for parsed
candidates, so re-parsing and re-classifying an emitted completion
reproduces its label; unparseable rejected candidates keep their raw text.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .labeling import ErrorReason, LabelResult, classify, error_result
from .prover import Budget, DEFAULT_BUDGET
from .story import (
    CandidateRecord,
    FolStory,
    GOLD_LABELS,
    Label,
    NlStory,
    build_prompt,
    format_evaluate_block,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SftInstance:
    story_id: str
    prompt: str
    completion: str
    label_of_completion: Label


@dataclass(frozen=True)
class PrefPair:
    story_id: str
    prompt: str
    chosen: str
    rejected: str
    chosen_label: Label
    rejected_label: Label

    def __post_init__(self):
        if self.chosen == self.rejected:
            raise ValueError("chosen and rejected must differ")


@dataclass
class BuildStats:
    corpus: Counter = field(default_factory=Counter)
    sft: Counter = field(default_factory=Counter)
    pref: Counter = field(default_factory=Counter)
    stories_without_match: int = 0

    def to_dict(self) -> dict:
        rows = {}
        for label in GOLD_LABELS:
            rows[label.value] = {
                "corpus": self.corpus.get(label, 0),
                "sft": self.sft.get(label, 0),
                "pref": self.pref.get(label, 0),
            }
        rows["Total"] = {
            "corpus": sum(self.corpus.values()),
            "sft": sum(self.sft.values()),
            "pref": sum(self.pref.values()),
        }
        return {"per_label": rows, "stories_without_match": self.stories_without_match}

    def format_table(self) -> str:
        data = self.to_dict()["per_label"]
        lines = [f"{'Logical Label':<14} {'corpus':>8} {'sft':>8} {'pref':>8}"]
        for name in [l.value for l in GOLD_LABELS] + ["Total"]:
            row = data[name]
            lines.append(f"{name:<14} {row['corpus']:>8} {row['sft']:>8} {row['pref']:>8}")
        return "\n".join(lines)


@dataclass
class BuildResult:
    sft: list[SftInstance]
    pref: list[PrefPair]
    stats: BuildStats


def label_candidate(record: CandidateRecord, budget: Budget = DEFAULT_BUDGET) -> LabelResult | None:
    """Label one candidate; records with no completion at all stay unlabeled."""
    if record.story is not None:
        return classify(record.story, budget)
    if record.raw_completion is None:
        return None
    if record.failure_reason == "alignment":
        return error_result(ErrorReason.ALIGNMENT)
    return error_result(ErrorReason.PARSE)


def label_all(
    candidates: Sequence[CandidateRecord],
    budget: Budget = DEFAULT_BUDGET,
    workers: int = 0,
) -> list[CandidateRecord]:
    """Attach a LabelResult to every candidate that has a completion."""
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda r: label_candidate(r, budget), candidates))
    else:
        results = [label_candidate(r, budget) for r in candidates]
    for record, result in zip(candidates, results):
        record.label = result
    return list(candidates)


def _completion_text(story: NlStory, record: CandidateRecord, dialect: str) -> str | None:
    if record.story is not None:
        try:
            return format_evaluate_block(story, record.story, dialect)
        except ValueError:
            # Premise counts diverge from the NL story; fall back to pairing
            # FOL lines with placeholder text so the block stays parseable.
            patched = NlStory(
                story.id,
                tuple(f"(sentence {i + 1})" for i in range(len(record.story.premises))),
                story.conclusion,
                story.gold_label,
            )
            return format_evaluate_block(patched, record.story, dialect)
    return record.raw_completion


def _content_hash(*parts: str) -> str:
    digest = hashlib.sha256()
    for part in parts:
        digest.update(part.encode("utf-8"))
        digest.update(b"\x00")
    return digest.hexdigest()


def build(
    stories: Sequence[NlStory],
    candidates: Sequence[CandidateRecord],
    seed: int = 0,
    sft_target: int | None = None,
    pref_target: int | None = None,
    pairing: str = "sampled",
    prompt_shots: int = 0,
    exemplars: Sequence[tuple[NlStory, FolStory]] = (),
    dialect: str = "ascii",
) -> BuildResult:
    """Filter labeled candidates into SFT instances and preference pairs."""
    if pairing not in ("sampled", "all"):
        raise ValueError("pairing must be 'sampled' or 'all'")
    by_story: dict[str, list[CandidateRecord]] = {}
    for record in candidates:
        by_story.setdefault(record.story_id, []).append(record)

    stats = BuildStats()
    sft: list[SftInstance] = []
    pref: list[PrefPair] = []

    for story in stories:
        stats.corpus[story.gold_label] += 1
        pool = [r for r in by_story.get(story.id, []) if r.label is not None]
        matching: dict[str, Label] = {}
        rejected: dict[str, Label] = {}
        for record in pool:
            text = _completion_text(story, record, dialect)
            if text is None:
                continue
            if record.label.label == story.gold_label:
                matching.setdefault(text, record.label.label)
            else:
                rejected.setdefault(text, record.label.label)
        for text in matching:
            rejected.pop(text, None)

        if not matching:
            stats.stories_without_match += 1
            log.info("story %s contributed nothing: no label-matching candidate", story.id)
            continue

        prompt = build_prompt(story, exemplars, prompt_shots, dialect)
        chosen_texts = sorted(matching)
        rejected_texts = sorted(rejected)
        for text in chosen_texts:
            sft.append(SftInstance(story.id, prompt, text, matching[text]))

        rng = random.Random(f"{seed}|{story.id}")
        if pairing == "all":
            combos = [(c, r) for c in chosen_texts for r in rejected_texts]
        else:
            shuffled_chosen = list(chosen_texts)
            shuffled_rejected = list(rejected_texts)
            rng.shuffle(shuffled_chosen)
            rng.shuffle(shuffled_rejected)
            combos = list(zip(shuffled_chosen, shuffled_rejected))
        for chosen_text, rejected_text in combos:
            pref.append(
                PrefPair(
                    story.id,
                    prompt,
                    chosen_text,
                    rejected_text,
                    matching[chosen_text],
                    rejected[rejected_text],
                )
            )

    sft = _subsample(sft, sft_target, lambda s: s.label_of_completion, f"{seed}|sft")
    pref = _subsample(pref, pref_target, lambda p: p.chosen_label, f"{seed}|pref")

    sft.sort(key=lambda s: (s.story_id, _content_hash(s.completion)))
    pref.sort(key=lambda p: (p.story_id, _content_hash(p.chosen, p.rejected)))
    for instance in sft:
        stats.sft[instance.label_of_completion] += 1
    for pair in pref:
        stats.pref[pair.chosen_label] += 1
    return BuildResult(sft, pref, stats)


def _subsample(items: list, target: int | None, label_of, seed: str) -> list:
    """Stratified subsampling to ``target`` preserving per-label proportions."""
    if target is None or target >= len(items):
        return items
    if target < 0:
        raise ValueError("target must be >= 0")
    groups: dict[Label, list] = {}
    for item in items:
        groups.setdefault(label_of(item), []).append(item)
    total = len(items)
    labels = sorted(groups, key=lambda l: l.value)
    quotas = {label: target * len(groups[label]) // total for label in labels}
    remainders = sorted(
        labels,
        key=lambda l: (-(target * len(groups[l]) / total - quotas[l]), l.value),
    )
    shortfall = target - sum(quotas.values())
    for label in remainders[:shortfall]:
        quotas[label] += 1
    rng = random.Random(seed)
    out = []
    for label in labels:
        group = groups[label]
        quota = min(quotas[label], len(group))
        out.extend(rng.sample(group, quota))
    return out


def _atomic_write(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def emit(
    result: BuildResult,
    out_dir: str | Path,
    manifest: dict | None = None,
) -> dict[str, Path]:
    """Write sft.jsonl, pref.jsonl, stats.json, and build_manifest.json.

    Files are replaced atomically so an interrupted emit never leaves a
    half-written dataset behind.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "sft": out / "sft.jsonl",
        "pref": out / "pref.jsonl",
        "stats": out / "stats.json",
        "manifest": out / "build_manifest.json",
    }
    _atomic_write(
        paths["sft"],
        "".join(
            json.dumps(
                {"prompt": instance.prompt, "completion": instance.completion},
                ensure_ascii=False,
                sort_keys=True,
            )
            + "\n"
            for instance in result.sft
        ),
    )
    _atomic_write(
        paths["pref"],
        "".join(
            json.dumps(
                {"prompt": pair.prompt, "chosen": pair.chosen, "rejected": pair.rejected},
                ensure_ascii=False,
                sort_keys=True,
            )
            + "\n"
            for pair in result.pref
        ),
    )
    stats_payload = result.stats.to_dict()
    _atomic_write(paths["stats"], json.dumps(stats_payload, indent=2, sort_keys=True) + "\n")
    manifest_payload = dict(manifest or {})
    manifest_payload["counts"] = stats_payload["per_label"]
    _atomic_write(
        paths["manifest"], json.dumps(manifest_payload, indent=2, sort_keys=True) + "\n"
    )
    return paths
