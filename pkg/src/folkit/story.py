"""Story data model, corpus I/O, prompt construction, and completion parsing.

Interchange formats (line-delimited JSON, UTF-8):

* corpus record: ``{id, premises: [str], conclusion: str, label: str,
  premises_fol?: [str], conclusion_fol?: str}``
* candidate record: ``{story_id, model, shots, temperature, sample_index,
  completion}``

Prompts wrap each part of a story in HTML-style tags (``<PREMISES>``,
``<CONCLUSION>``, ``<EVALUATE>``) and alternate ``TEXT:``/``FOL:`` lines
inside the evaluate block, ending with the conclusion pair.  Gold labels are
never emitted in prompts.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Sequence, TYPE_CHECKING

from .syntax import Formula, ParseError, parse_formula, render

if TYPE_CHECKING:
    from .labeling import LabelResult

log = logging.getLogger(__name__)


class Label(str, Enum):
    TRUE = "True"
    FALSE = "False"
    UNCERTAIN = "Uncertain"
    ERROR = "Error"

    def __str__(self):
        return self.value


GOLD_LABELS = (Label.TRUE, Label.FALSE, Label.UNCERTAIN)

_LABEL_ALIASES = {
    "true": Label.TRUE,
    "false": Label.FALSE,
    "uncertain": Label.UNCERTAIN,
    "unknown": Label.UNCERTAIN,
}


def normalize_label(raw: str) -> Label:
    """Case-insensitive gold label normalization; 'Unknown' means Uncertain."""
    key = raw.strip().casefold()
    if key not in _LABEL_ALIASES:
        raise ValueError(f"unrecognized label {raw!r}")
    return _LABEL_ALIASES[key]


@dataclass(frozen=True)
class FolStory:
    """Ordered premise formulas plus exactly one conclusion formula."""

    premises: tuple[Formula, ...]
    conclusion: Formula
    raw_lines: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "premises", tuple(self.premises))
        object.__setattr__(self, "raw_lines", tuple(self.raw_lines))
        object.__setattr__(self, "warnings", tuple(self.warnings))
        if not self.premises:
            raise ValueError("a story needs at least one premise")


@dataclass(frozen=True)
class NlStory:
    id: str
    premises: tuple[str, ...]
    conclusion: str
    gold_label: Label
    gold_fol: FolStory | None = None

    def __post_init__(self):
        object.__setattr__(self, "premises", tuple(self.premises))
        if not self.premises:
            raise ValueError("a story needs at least one premise")
        if self.gold_label not in GOLD_LABELS:
            raise ValueError(f"gold label must be True/False/Uncertain, got {self.gold_label}")


@dataclass(frozen=True)
class GenerationMeta:
    model_name: str
    shots: int
    temperature: float
    sample_index: int
    timestamp: str = ""

    def __post_init__(self):
        if self.shots < 1:
            raise ValueError("shots must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass
class CandidateRecord:
    """One sampled FOL translation of one story, plus its processing state.

    ``failure_reason`` is one of ``parse``, ``alignment``, ``network`` or
    None; ``label`` stays None until the labeling pass runs.
    """

    story_id: str
    meta: GenerationMeta
    raw_completion: str | None
    story: FolStory | None = None
    failure_reason: str | None = None
    label: "LabelResult | None" = None


# ---------------------------------------------------------------------------
# Corpus I/O
# ---------------------------------------------------------------------------


def read_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                log.warning("%s:%d: unreadable record: %s", path, lineno, exc)
                continue
            if not isinstance(obj, dict):
                log.warning("%s:%d: record is not an object", path, lineno)
                continue
            yield lineno, obj


def write_jsonl(path: str | Path, rows: Iterable[dict]):
    with open(path, "w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")


def _parse_fol_story(premises_fol: Sequence[str], conclusion_fol: str) -> FolStory:
    premises = tuple(parse_formula(s) for s in premises_fol)
    conclusion = parse_formula(conclusion_fol)
    return FolStory(premises, conclusion, tuple(premises_fol) + (conclusion_fol,))


def load_corpus(path: str | Path) -> list[NlStory]:
    """Load a corpus file; malformed lines are skipped with a logged warning."""
    stories: list[NlStory] = []
    skipped = 0
    for lineno, obj in read_jsonl(path):
        try:
            premises = obj["premises"]
            conclusion = obj["conclusion"]
            label = normalize_label(obj["label"])
            if not isinstance(premises, list) or not premises:
                raise ValueError("premises must be a non-empty list")
            if not isinstance(conclusion, str) or not conclusion.strip():
                raise ValueError("conclusion must be a non-empty string")
            story_id = str(obj.get("id", f"line-{lineno}"))
            gold_fol = None
            if obj.get("premises_fol") and obj.get("conclusion_fol"):
                try:
                    gold_fol = _parse_fol_story(obj["premises_fol"], obj["conclusion_fol"])
                    if len(gold_fol.premises) != len(premises):
                        log.warning(
                            "%s:%d: gold FOL has %d premises for %d sentences; dropping it",
                            path, lineno, len(gold_fol.premises), len(premises),
                        )
                        gold_fol = None
                except (ParseError, ValueError) as exc:
                    log.warning("%s:%d: gold FOL unusable: %s", path, lineno, exc)
            stories.append(
                NlStory(story_id, tuple(str(p) for p in premises), conclusion, label, gold_fol)
            )
        except (KeyError, ValueError, TypeError) as exc:
            skipped += 1
            log.warning("%s:%d: skipping malformed record: %s", path, lineno, exc)
    if skipped:
        log.warning("%s: skipped %d malformed record(s)", path, skipped)
    return stories


# ---------------------------------------------------------------------------
# Prompt construction
# ---------------------------------------------------------------------------

INSTRUCTION_HEADER = (
    "You are an expert in working with first-order logic (FOL) problems.\n"
    "You will be given a set of premise sentences and a single conclusion sentence.\n"
    "Translate each premise sentence and the conclusion sentence into FOL expressions\n"
    "that a theorem prover can evaluate, using the syntax of the Python NLTK logic module.\n"
)

_QUERY_LEAD = (
    "Now translate the following example, keeping exactly the format shown above.\n"
    "Do not generate any explanations.\n"
)


def format_evaluate_block(nl: NlStory, fol: FolStory, dialect: str = "ascii") -> str:
    """Render a story as a tagged ``TEXT:``/``FOL:`` evaluate block."""
    if len(nl.premises) != len(fol.premises):
        raise ValueError(
            f"premise count mismatch: {len(nl.premises)} texts vs {len(fol.premises)} formulas"
        )
    lines = ["<EVALUATE>"]
    for text, formula in zip(nl.premises, fol.premises):
        lines.append(f"TEXT: {text}")
        lines.append(f"FOL: {render(formula, dialect)}")
    lines.append(f"TEXT: {nl.conclusion}")
    lines.append(f"FOL: {render(fol.conclusion, dialect)}")
    lines.append("</EVALUATE>")
    return "\n".join(lines)


def _story_header(nl: NlStory) -> str:
    lines = ["<PREMISES>"]
    lines.extend(nl.premises)
    lines.append("</PREMISES>")
    lines.append("<CONCLUSION>")
    lines.append(nl.conclusion)
    lines.append("</CONCLUSION>")
    return "\n".join(lines)


def build_prompt(
    story: NlStory,
    exemplars: Sequence[tuple[NlStory, FolStory]],
    shots: int,
    dialect: str = "ascii",
) -> str:
    """Build the few-shot translation prompt for one story.

    Byte-deterministic for fixed inputs.  ``shots`` may be zero, which yields
    the instruction plus the query story only.
    """
    if shots < 0:
        raise ValueError("shots must be >= 0")
    if shots > len(exemplars):
        raise ValueError(f"asked for {shots} shots but only {len(exemplars)} exemplars given")
    parts = [INSTRUCTION_HEADER]
    if shots:
        parts.append("Here are some examples of the task:\n")
        for i, (nl, fol) in enumerate(exemplars[:shots], start=1):
            parts.append(f"Example {i}:")
            parts.append(_story_header(nl))
            parts.append(format_evaluate_block(nl, fol, dialect))
            parts.append("")
    parts.append(_QUERY_LEAD)
    parts.append(_story_header(story))
    parts.append("<EVALUATE>\n")
    return "\n".join(parts)


# ---------------------------------------------------------------------------
# Completion parsing
# ---------------------------------------------------------------------------


class CompletionParseError(Exception):
    """A completion could not be turned into a story.

    ``reason`` is ``"parse"`` (no usable FOL content) or ``"alignment"``
    (FOL lines parsed but do not form at least one premise plus a
    conclusion).
    """

    def __init__(self, reason: str, message: str, diagnostics=()):
        self.reason = reason
        self.diagnostics = list(diagnostics)
        super().__init__(message)


_FOL_LINE_RE = re.compile(r"^\s*FOL:\s*(.+?)\s*$", re.MULTILINE)


def parse_completion(text: str, expected_premise_count: int) -> FolStory:
    """Extract a FolStory from a model completion.

    Reads the first ``<EVALUATE>`` region (tolerating a missing closing tag),
    collects the ``FOL:`` lines in order, and treats the last one as the
    conclusion.  A premise-count mismatch is recorded as a warning on the
    returned story rather than an error.
    """
    warnings: list[str] = []
    start = text.find("<EVALUATE>")
    if start < 0:
        raise CompletionParseError("parse", "completion has no <EVALUATE> section")
    region_start = start + len("<EVALUATE>")
    end = text.find("</EVALUATE>", region_start)
    if end < 0:
        region = text[region_start:]
        warnings.append("missing </EVALUATE> closing tag; read to end of completion")
    else:
        region = text[region_start:end]

    fol_lines = _FOL_LINE_RE.findall(region)
    if not fol_lines:
        raise CompletionParseError("parse", "no FOL: lines found in the evaluate section")

    formulas: list[Formula] = []
    for line in fol_lines:
        try:
            formulas.append(parse_formula(line))
        except ParseError as exc:
            raise CompletionParseError(
                "parse", f"unparseable FOL line: {line!r}", exc.diagnostics
            ) from exc

    if len(formulas) < 2:
        raise CompletionParseError(
            "alignment", "need at least one premise line and a conclusion line"
        )
    premises, conclusion = formulas[:-1], formulas[-1]
    if len(premises) != expected_premise_count:
        warnings.append(
            f"expected {expected_premise_count} premises but found {len(premises)}"
        )
    return FolStory(tuple(premises), conclusion, tuple(fol_lines), tuple(warnings))


def parse_candidates(records: Iterable[CandidateRecord], stories_by_id: dict[str, NlStory]):
    """Attach parse results to candidate records in place.

    Records without a completion (network failures) are left untouched.
    """
    for record in records:
        if record.raw_completion is None or record.story is not None:
            continue
        nl = stories_by_id.get(record.story_id)
        expected = len(nl.premises) if nl else 0
        try:
            record.story = parse_completion(record.raw_completion, expected)
            record.failure_reason = None
        except CompletionParseError as exc:
            record.story = None
            record.failure_reason = exc.reason


# ---------------------------------------------------------------------------
# Candidate record interchange
# ---------------------------------------------------------------------------


def candidate_to_record(candidate: CandidateRecord) -> dict:
    return {
        "story_id": candidate.story_id,
        "model": candidate.meta.model_name,
        "shots": candidate.meta.shots,
        "temperature": candidate.meta.temperature,
        "sample_index": candidate.meta.sample_index,
        "completion": candidate.raw_completion,
    }


def candidate_from_record(obj: dict) -> CandidateRecord:
    meta = GenerationMeta(
        model_name=str(obj["model"]),
        shots=int(obj["shots"]),
        temperature=float(obj["temperature"]),
        sample_index=int(obj["sample_index"]),
    )
    completion = obj["completion"]
    if not isinstance(completion, str):
        raise ValueError("completion must be a string")
    return CandidateRecord(str(obj["story_id"]), meta, completion)
