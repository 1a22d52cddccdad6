import json
import random

import pytest

from folkit.story import (
    CompletionParseError,
    FolStory,
    Label,
    NlStory,
    build_prompt,
    format_evaluate_block,
    load_corpus,
    normalize_label,
    parse_completion,
    parse_candidates,
    CandidateRecord,
    GenerationMeta,
)
from folkit.syntax import Not, PredicateApp, Constant, alpha_equal, parse_formula

from sample_stories import (
    WORKSHEET_CONCLUSION_FOL,
    WORKSHEET_CONCLUSION_NL,
    WORKSHEET_PREMISES_FOL,
    WORKSHEET_PREMISES_NL,
    sat_nl_story,
    soccer_nl_story,
    worksheet_nl_story,
    worksheet_story,
)
from story_gen import random_fol_story


def test_normalize_label_aliases():
    assert normalize_label("UNKNOWN") is Label.UNCERTAIN
    assert normalize_label("true") is Label.TRUE
    assert normalize_label(" False ") is Label.FALSE
    with pytest.raises(ValueError):
        normalize_label("maybe")


def test_fol_story_requires_premises():
    with pytest.raises(ValueError):
        FolStory((), parse_formula("P(a)"))


def test_nl_story_rejects_error_gold():
    with pytest.raises(ValueError):
        NlStory("x", ("p",), "c", Label.ERROR)


def test_generation_meta_validation():
    with pytest.raises(ValueError):
        GenerationMeta("m", 0, 0.5, 0)
    with pytest.raises(ValueError):
        GenerationMeta("m", 2, -0.1, 0)


# ---------------------------------------------------------------------------
# Corpus loading
# ---------------------------------------------------------------------------


def _write_corpus(path, rows):
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")


def test_load_corpus(tmp_path, caplog):
    corpus = tmp_path / "corpus.jsonl"
    _write_corpus(
        corpus,
        [
            {"id": "a", "premises": ["p1", "p2"], "conclusion": "c", "label": "True"},
            {"id": "b", "premises": ["p1"], "conclusion": "c", "label": "UNKNOWN"},
            {"id": "broken", "premises": ["p1"], "label": "True"},  # no conclusion
            {
                "id": "with-fol",
                "premises": ["p1"],
                "conclusion": "c",
                "label": "False",
                "premises_fol": ["P(a)"],
                "conclusion_fol": "Q(a)",
            },
        ],
    )
    stories = load_corpus(corpus)
    assert [s.id for s in stories] == ["a", "b", "with-fol"]
    assert stories[1].gold_label is Label.UNCERTAIN
    assert stories[2].gold_fol is not None
    assert alpha_equal(stories[2].gold_fol.conclusion, parse_formula("Q(a)"))


def test_load_corpus_skips_unreadable_lines(tmp_path):
    corpus = tmp_path / "corpus.jsonl"
    corpus.write_text(
        '{"id": "ok", "premises": ["p"], "conclusion": "c", "label": "True"}\n'
        "this is not json\n",
        encoding="utf-8",
    )
    stories = load_corpus(corpus)
    assert len(stories) == 1


def test_load_corpus_drops_misaligned_gold_fol(tmp_path):
    corpus = tmp_path / "corpus.jsonl"
    _write_corpus(
        corpus,
        [
            {
                "id": "short-fol",
                "premises": ["p1", "p2"],
                "conclusion": "c",
                "label": "True",
                "premises_fol": ["P(a)"],  # one formula for two sentences
                "conclusion_fol": "Q(a)",
            }
        ],
    )
    stories = load_corpus(corpus)
    assert len(stories) == 1
    assert stories[0].gold_fol is None


def test_load_corpus_keeps_story_when_gold_fol_is_broken(tmp_path):
    corpus = tmp_path / "corpus.jsonl"
    _write_corpus(
        corpus,
        [
            {
                "id": "bad-fol",
                "premises": ["p"],
                "conclusion": "c",
                "label": "True",
                "premises_fol": ["P((("],
                "conclusion_fol": "Q(a)",
            }
        ],
    )
    stories = load_corpus(corpus)
    assert len(stories) == 1
    assert stories[0].gold_fol is None


# ---------------------------------------------------------------------------
# Prompt construction
# ---------------------------------------------------------------------------


def exemplars():
    return [
        (worksheet_nl_story(), worksheet_story()),
        (soccer_nl_story(), soccer_nl_story().gold_fol),
    ]


def test_prompt_first_line():
    prompt = build_prompt(sat_nl_story(), exemplars(), shots=2)
    assert prompt.splitlines()[0] == (
        "You are an expert in working with first-order logic (FOL) problems."
    )


def test_prompt_structure_two_shot():
    prompt = build_prompt(sat_nl_story(), exemplars(), shots=2)
    assert prompt.count("<PREMISES>") == 3
    assert prompt.count("</PREMISES>") == 3
    assert prompt.count("<CONCLUSION>") == 3
    assert prompt.count("<EVALUATE>") == 3
    assert prompt.count("</EVALUATE>") == 2  # the query block stays open
    assert prompt.rstrip().endswith("<EVALUATE>")
    assert "Example 1:" in prompt and "Example 2:" in prompt
    # TEXT/FOL alternation ends with the conclusion pair.
    block = prompt.split("<EVALUATE>")[1]
    lines = [l for l in block.splitlines() if l.startswith(("TEXT:", "FOL:"))]
    assert lines[-2] == f"TEXT: {WORKSHEET_CONCLUSION_NL}"
    assert lines[-1] == f"FOL: {WORKSHEET_CONCLUSION_FOL}"


def test_prompt_zero_shot():
    prompt = build_prompt(sat_nl_story(), [], shots=0)
    assert "Example" not in prompt
    assert prompt.count("<EVALUATE>") == 1
    assert "<PREMISES>" in prompt


def test_prompt_deterministic():
    a = build_prompt(sat_nl_story(), exemplars(), shots=2)
    b = build_prompt(sat_nl_story(), exemplars(), shots=2)
    assert a == b


def test_prompt_never_contains_gold_labels():
    prompt = build_prompt(sat_nl_story(), exemplars(), shots=2)
    assert "Label" not in prompt
    assert "True" not in prompt.replace("True F1", "")


def test_prompt_shot_count_validation():
    with pytest.raises(ValueError):
        build_prompt(sat_nl_story(), exemplars(), shots=3)


# ---------------------------------------------------------------------------
# Completion parsing
# ---------------------------------------------------------------------------


WORKSHEET_COMPLETION = "\n".join(
    ["<EVALUATE>"]
    + [
        line
        for text, fol in zip(WORKSHEET_PREMISES_NL, WORKSHEET_PREMISES_FOL)
        for line in (f"TEXT:\t{text}", f"FOL:\t{fol}")
    ]
    + [f"TEXT:\t{WORKSHEET_CONCLUSION_NL}", f"FOL:\t{WORKSHEET_CONCLUSION_FOL}", "</EVALUATE>"]
)


def test_parse_completion_worksheet_block():
    story = parse_completion(WORKSHEET_COMPLETION, expected_premise_count=6)
    assert len(story.premises) == 6
    assert story.warnings == ()
    assert alpha_equal(
        story.conclusion, Not(PredicateApp("Dispensable", (Constant("Worksheet"),)))
    )


def test_parse_completion_missing_evaluate():
    with pytest.raises(CompletionParseError) as excinfo:
        parse_completion("FOL: P(a)\nFOL: Q(a)", expected_premise_count=1)
    assert excinfo.value.reason == "parse"


def test_parse_completion_no_fol_lines():
    with pytest.raises(CompletionParseError) as excinfo:
        parse_completion("<EVALUATE>\nTEXT: something\n</EVALUATE>", 1)
    assert excinfo.value.reason == "parse"


def test_parse_completion_alignment_warning():
    text = "<EVALUATE>\nFOL: P(a)\nFOL: Q(a)\nFOL: R(a)\n</EVALUATE>"
    story = parse_completion(text, expected_premise_count=4)
    assert len(story.premises) == 2
    assert any("expected 4 premises" in w for w in story.warnings)


def test_parse_completion_missing_closing_tag():
    text = "<EVALUATE>\nFOL: P(a)\nFOL: Q(a)"
    story = parse_completion(text, expected_premise_count=1)
    assert any("closing tag" in w for w in story.warnings)
    assert len(story.premises) == 1


def test_parse_completion_single_formula_is_alignment_failure():
    with pytest.raises(CompletionParseError) as excinfo:
        parse_completion("<EVALUATE>\nFOL: P(a)\n</EVALUATE>", 1)
    assert excinfo.value.reason == "alignment"


def test_parse_completion_bad_formula_is_parse_failure():
    with pytest.raises(CompletionParseError) as excinfo:
        parse_completion("<EVALUATE>\nFOL: P(a\nFOL: Q(a)\n</EVALUATE>", 1)
    assert excinfo.value.reason == "parse"
    assert excinfo.value.diagnostics


def test_parse_completion_takes_first_evaluate_region():
    text = (
        "<EVALUATE>\nFOL: P(a)\nFOL: Q(a)\n</EVALUATE>\n"
        "<EVALUATE>\nFOL: R(a)\nFOL: S(a)\n</EVALUATE>"
    )
    story = parse_completion(text, 1)
    assert alpha_equal(story.premises[0], parse_formula("P(a)"))


def _expand_xor(f):
    # The ascii dialect has no xor operator, so round trips return the
    # either/or expansion; normalize the pre-image the same way.
    from folkit.syntax import And, BINARY_TYPES, Not, Or, QUANTIFIER_TYPES, Xor

    if isinstance(f, Xor):
        left, right = _expand_xor(f.left), _expand_xor(f.right)
        return Or(And(left, Not(right)), And(Not(left), right))
    if isinstance(f, Not):
        return Not(_expand_xor(f.operand))
    if isinstance(f, BINARY_TYPES):
        return type(f)(_expand_xor(f.left), _expand_xor(f.right))
    if isinstance(f, QUANTIFIER_TYPES):
        return type(f)(f.var, _expand_xor(f.body))
    return f


def test_evaluate_block_round_trip_random():
    for seed in range(100):
        fol = random_fol_story(random.Random(seed))
        texts = tuple(f"Sentence {i}." for i in range(len(fol.premises)))
        nl = NlStory(f"s{seed}", texts, "Conclusion.", Label.TRUE)
        block = format_evaluate_block(nl, fol)
        parsed = parse_completion(block, expected_premise_count=len(fol.premises))
        assert parsed.warnings == ()
        assert len(parsed.premises) == len(fol.premises)
        for mine, theirs in zip(fol.premises, parsed.premises):
            assert alpha_equal(_expand_xor(mine), theirs), seed
        assert alpha_equal(_expand_xor(fol.conclusion), parsed.conclusion), seed


def test_parse_candidates_fills_state():
    nl = sat_nl_story()
    records = [
        CandidateRecord(nl.id, GenerationMeta("m", 2, 0.25, 0), WORKSHEET_COMPLETION),
        CandidateRecord(nl.id, GenerationMeta("m", 2, 0.25, 1), "no tags at all"),
        CandidateRecord(nl.id, GenerationMeta("m", 2, 0.25, 2), None,
                        failure_reason="network"),
    ]
    parse_candidates(records, {nl.id: nl})
    assert records[0].story is not None
    assert any("expected 4 premises" in w for w in records[0].story.warnings)
    assert records[1].story is None and records[1].failure_reason == "parse"
    assert records[2].story is None and records[2].failure_reason == "network"
