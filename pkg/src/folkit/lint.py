"""Automated diagnostics for inconsistent predicate usage in FOL stories.

These are proxies for the failure modes that make a generated story
unprovable or silently uncertain: one concept split across near-duplicate
predicate names, one name used at two arities, conclusions whose vocabulary
never appears in the premises, premise predicates unreachable from the
conclusion, and formulas that only work because of implicit universal
closure.  Syntax errors are tagged separately from stored parse failures.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from .story import CandidateRecord, FolStory, Label
from .syntax import (
    BINARY_TYPES,
    Equality,
    Formula,
    FunctionApp,
    PredicateApp,
    QUANTIFIER_TYPES,
    Not,
    Term,
    Variable,
    free_variables,
)

EQUALITY_NAME = "="


class DiagnosticKind(str, Enum):
    ARITY_MISMATCH = "ArityMismatch"
    NEAR_DUPLICATE_PREDICATE = "NearDuplicatePredicate"
    CONCLUSION_VOCABULARY_DISJOINT = "ConclusionVocabularyDisjoint"
    UNUSED_PREMISE_PREDICATE = "UnusedPremisePredicate"
    FREE_VARIABLE_CLOSED = "FreeVariableClosed"
    SYNTAX_ERROR = "SyntaxError"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class LintDiagnostic:
    kind: DiagnosticKind
    formula_indices: tuple[int, ...]
    symbols: tuple[str, ...]
    message: str

    def __str__(self):
        where = ",".join(str(i) for i in self.formula_indices)
        return f"{self.kind.value}({', '.join(self.symbols)}) [formulas {where}]: {self.message}"


@dataclass(frozen=True)
class SignatureRow:
    kind: str  # "predicate" | "function" | "constant"
    name: str
    arity: int
    formula_indices: tuple[int, ...]


@dataclass(frozen=True)
class SignatureTable:
    rows: tuple[SignatureRow, ...]

    def predicates(self) -> dict[str, dict[int, tuple[int, ...]]]:
        out: dict[str, dict[int, tuple[int, ...]]] = {}
        for row in self.rows:
            if row.kind == "predicate":
                out.setdefault(row.name, {})[row.arity] = row.formula_indices
        return out

    def functions(self) -> dict[str, dict[int, tuple[int, ...]]]:
        out: dict[str, dict[int, tuple[int, ...]]] = {}
        for row in self.rows:
            if row.kind == "function":
                out.setdefault(row.name, {})[row.arity] = row.formula_indices
        return out


def _collect(f: Formula, sink: dict[tuple[str, str, int], set[int]], index: int):
    def walk_term(t: Term):
        if isinstance(t, Variable):
            return
        if isinstance(t, FunctionApp):
            sink.setdefault(("function", t.name, len(t.args)), set()).add(index)
            for a in t.args:
                walk_term(a)
        else:
            sink.setdefault(("constant", t.name, 0), set()).add(index)

    def walk(g: Formula):
        if isinstance(g, PredicateApp):
            sink.setdefault(("predicate", g.name, len(g.args)), set()).add(index)
            for a in g.args:
                walk_term(a)
        elif isinstance(g, Equality):
            sink.setdefault(("predicate", EQUALITY_NAME, 2), set()).add(index)
            walk_term(g.left)
            walk_term(g.right)
        elif isinstance(g, Not):
            walk(g.operand)
        elif isinstance(g, BINARY_TYPES):
            walk(g.left)
            walk(g.right)
        elif isinstance(g, QUANTIFIER_TYPES):
            walk(g.body)

    walk(f)


def signatures(story: FolStory) -> SignatureTable:
    """Complete symbol census of a story, keyed by kind, name, and arity."""
    sink: dict[tuple[str, str, int], set[int]] = {}
    for i, premise in enumerate(story.premises):
        _collect(premise, sink, i)
    _collect(story.conclusion, sink, len(story.premises))
    rows = [
        SignatureRow(kind, name, arity, tuple(sorted(indices)))
        for (kind, name, arity), indices in sorted(sink.items())
    ]
    return SignatureTable(tuple(rows))


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb))
            )
        previous = current
    return previous[-1]


def _predicate_indices(table: SignatureTable, name: str) -> tuple[int, ...]:
    merged: set[int] = set()
    for indices in table.predicates().get(name, {}).values():
        merged.update(indices)
    return tuple(sorted(merged))


def lint(
    story: FolStory,
    near_dup_edit_distance: int = 2,
    near_dup_suffix: int = 6,
) -> list[LintDiagnostic]:
    """All consistency diagnostics for one parsed story."""
    table = signatures(story)
    diagnostics: list[LintDiagnostic] = []
    conclusion_index = len(story.premises)

    # One name used at several arities.
    for census in (table.predicates(), table.functions()):
        for name, arity_map in sorted(census.items()):
            if len(arity_map) > 1:
                indices = tuple(sorted({i for idx in arity_map.values() for i in idx}))
                arities = "/".join(str(a) for a in sorted(arity_map))
                diagnostics.append(
                    LintDiagnostic(
                        DiagnosticKind.ARITY_MISMATCH,
                        indices,
                        (name,),
                        f"{name} used at arities {arities}",
                    )
                )

    # Near-duplicate predicate names.
    names = sorted(n for n in table.predicates() if n != EQUALITY_NAME)
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            prefix_pair = (a.startswith(b) and len(a) - len(b) <= near_dup_suffix) or (
                b.startswith(a) and len(b) - len(a) <= near_dup_suffix
            )
            if prefix_pair or edit_distance(a, b) <= near_dup_edit_distance:
                indices = tuple(
                    sorted(set(_predicate_indices(table, a)) | set(_predicate_indices(table, b)))
                )
                diagnostics.append(
                    LintDiagnostic(
                        DiagnosticKind.NEAR_DUPLICATE_PREDICATE,
                        indices,
                        (a, b),
                        f"{a} and {b} look like the same predicate",
                    )
                )

    # Conclusion vocabulary must intersect the premises.
    per_formula: list[set[str]] = [set() for _ in range(conclusion_index + 1)]
    for row in table.rows:
        if row.kind != "predicate":
            continue
        for idx in row.formula_indices:
            per_formula[idx].add(row.name)
    conclusion_preds = per_formula[conclusion_index]
    premise_preds = set().union(*per_formula[:conclusion_index]) if conclusion_index else set()
    if conclusion_preds and not (conclusion_preds & premise_preds):
        diagnostics.append(
            LintDiagnostic(
                DiagnosticKind.CONCLUSION_VOCABULARY_DISJOINT,
                (conclusion_index,),
                tuple(sorted(conclusion_preds)),
                "no conclusion predicate occurs in any premise",
            )
        )

    # Premise predicates unreachable from the conclusion via shared formulas.
    reachable = set(conclusion_preds)
    changed = True
    while changed:
        changed = False
        for preds in per_formula:
            if preds & reachable and not preds <= reachable:
                reachable |= preds
                changed = True
    for name in sorted(premise_preds - conclusion_preds):
        if name not in reachable:
            diagnostics.append(
                LintDiagnostic(
                    DiagnosticKind.UNUSED_PREMISE_PREDICATE,
                    _predicate_indices(table, name),
                    (name,),
                    f"{name} cannot reach the conclusion through shared formulas",
                )
            )

    # Formulas that rely on implicit universal closure.
    for idx, formula in enumerate(list(story.premises) + [story.conclusion]):
        names_free = free_variables(formula)
        if names_free:
            diagnostics.append(
                LintDiagnostic(
                    DiagnosticKind.FREE_VARIABLE_CLOSED,
                    (idx,),
                    tuple(names_free),
                    "free variables closed by implicit universal quantification",
                )
            )

    return diagnostics


def lint_candidate(record: CandidateRecord, **thresholds) -> list[LintDiagnostic]:
    """Lint a candidate; parse failures yield a single SyntaxError diagnostic."""
    if record.story is None:
        reason = record.failure_reason or "parse"
        return [
            LintDiagnostic(
                DiagnosticKind.SYNTAX_ERROR,
                (),
                (),
                f"completion could not be parsed ({reason})",
            )
        ]
    return lint(record.story, **thresholds)


FAILURE_TAGS = ("L3_syntax", "consistency_suspect", "other_logic")


def tag_failures(
    candidates: Iterable[CandidateRecord],
    golds_by_story: dict[str, Label],
) -> dict[str, int]:
    """Histogram of failure modes over labeled, non-matching candidates.

    Parse errors are syntax failures; mismatches whose story lints dirty are
    consistency suspects; the rest are other logic failures.  Matching
    candidates and unlabeled records do not contribute.
    """
    histogram = {tag: 0 for tag in FAILURE_TAGS}
    for record in candidates:
        if record.label is None:
            continue
        gold = golds_by_story.get(record.story_id)
        if gold is not None and record.label.label == gold:
            continue
        reason = record.label.error_reason
        if reason is not None and reason.value == "Parse":
            histogram["L3_syntax"] += 1
        elif record.story is not None and lint(record.story):
            histogram["consistency_suspect"] += 1
        else:
            histogram["other_logic"] += 1
    return histogram
