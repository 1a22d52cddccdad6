"""Shared FOL fixture strings and story builders used across the test suite.

The SAT stories are a chosen/rejected pair of translations of one
college-admissions reasoning story (the rejected one splits a concept across
SAT and SAT2016); the worksheet and soccer-ranking stories are the two
few-shot exemplars.  Strings are kept verbatim, including their original mix
of ASCII and Unicode notation.
"""

from __future__ import annotations

from folkit.story import FolStory, Label, NlStory
from folkit.syntax import parse_formula

SAT_SOURCE_PREMISES = [
    "Own(sat, collegeBoard) ∧ ¬Own(sat, others)",
    "Test(sat, readiness)",
    "∀x (Year(x) ∧ Before2016(x) ⇒ ¬AlignHighSchool(x))",
    "∃x (Year(x) ∧ Since2016(x) ∧ AlignHighSchool(x))",
]

SAT_CHOSEN_PREMISES = [
    "∀x. (SAT(x) ⇒ CollegeBoardOwns(x))",
    "∀x. (SAT(x) ⇒ CollegeReady(x))",
    "∀x. (SAT(x) ∧ ¬Aligned(x))",
    "∀x. (SAT(x) ∧ IntroducedIn2016(x) ⇒ Aligned(x))",
]
SAT_CHOSEN_CONCLUSION = "∀x. (IntroducedIn2016(x) ⇒ Aligned(x))"

SAT_REJECTED_PREMISES = [
    "∀x. (SAT(x) ⇒ CollegeBoard(x))",
    "∀x. (SAT(x) ⇒ CollegeReady(x))",
    "∀x. (SAT(x) ∧ ¬AlignedWithHighSchool(x))",
    "∀x. (SAT2016(x) ⇒ AlignedWithHighSchool(x))",
]
SAT_REJECTED_CONCLUSION = "∀x. (Since2016(x) ∧ AlignedWithHighSchool(x))"

WORKSHEET_PREMISES_NL = [
    "All dispensable things are environment-friendly.",
    "All woodware is dispensable.",
    "All paper is woodware.",
    "No good things are bad.",
    "All environment-friendly things are good.",
    "A worksheet is either paper or is environment-friendly.",
]
WORKSHEET_CONCLUSION_NL = "A worksheet is not dispensable."
WORKSHEET_PREMISES_FOL = [
    "all x. (Dispensable(x) -> EnvironmentFriendly(x))",
    "all x. (Woodware(x) -> Dispensable(x))",
    "all x. (Paper(x) -> Woodware(x))",
    "all x. (Good(x) -> -Bad(x))",
    "all x. (EnvironmentFriendly(x) -> Good(x))",
    "((Paper(Worksheet) & -EnvironmentFriendly(Worksheet)) | (-Paper(Worksheet) & EnvironmentFriendly(Worksheet)))",
]
WORKSHEET_CONCLUSION_FOL = "-Dispensable(Worksheet)"

SOCCER_PREMISES_NL = [
    "A La Liga soccer team ranks higher than another if it receives more points.",
    "If two La Liga soccer teams recieve the same points, the team which recieves more points from the games between the two teams ranks higher.",
    "Real Madrid and Barcelona are both La Liga soccer teams.",
    "In La Liga 2021-2022, Real Madrid recieves 86 points and Barcelon recieves 73 points.",
    "In La Liga 2021-2022, Real Madrid and Barcelona both recieve 3 points from the games between them.",
]
SOCCER_CONCLUSION_NL = "In La Liga 2021-2022, Real Madrid ranks higher than Barcelona."
SOCCER_PREMISES_FOL = [
    "all x. all y. (LaLiga(x) & LaLiga(y) & MorePoints(x, y) -> HigherRank(x, y))",
    "all x. all y. (LaLiga(x) & LaLiga(y) & -MorePoints(x, y) & -MorePoints(y, x) & MorePointsInGameBetween(x, y) -> HigherRank(x, y))",
    "LaLiga(RealMadrid) & LaLiga(Barcelona)",
    "MorePoints(RealMadrid, Barcelona)",
    "-MorePointsInGameBetween(RealMadrid, Barcelona) & -MorePointsInGameBetween(Barcelona, RealMadrid)",
]
SOCCER_CONCLUSION_FOL = "HigherRank(RealMadrid, Barcelona)"

# Every corpus-sourced FOL string, used for the parse/round-trip gate.
CORPUS_FOL_STRINGS = (
    SAT_SOURCE_PREMISES
    + SAT_CHOSEN_PREMISES
    + [SAT_CHOSEN_CONCLUSION]
    + SAT_REJECTED_PREMISES
    + [SAT_REJECTED_CONCLUSION]
    + WORKSHEET_PREMISES_FOL
    + [WORKSHEET_CONCLUSION_FOL]
    + SOCCER_PREMISES_FOL
    + [SOCCER_CONCLUSION_FOL]
)

# Mixed-notation strings from qualitative error discussions; they must parse
# but carry no asserted label.
EXTRA_FOL_STRINGS = [
    "FliesTo(Susan, LGAAirport)",
    "¬EqualAirports(Daniel, Susan)",
    "¬(DepartFrom(x) ∧ ArriveAt(x))",
    "∀x ∀y (Departure(x) ∧ Arrival(y) ∧ ¬SameAirport(x, y))",
    "FliesFrom(John, LGAAirport)",
    "FliesFrom(Susan, LGAAirport)",
    "¬((Fly(Rock) ∨ Bird(Rock)) ⇒ (¬Fly(Rock) ∧ -Breathes(Rock)))",
    "(¬Fly(Rock) & ¬Bird(Rock)) ⇒ (¬Fly(Rock) & ¬Breathe(Rock))",
    "((Database(James) ∧ ¬PartTime(James)) ∨ (¬Database(James) ∧ PartTime(James)))",
    "(TakesDatabaseCourse(James) ∨ HasPartTimeJob(James))",
    "(TakeDatabaseCourse(James) ∨ PartTimeJob(James))",
]


def fol_story(premises: list[str], conclusion: str) -> FolStory:
    return FolStory(
        tuple(parse_formula(s) for s in premises),
        parse_formula(conclusion),
        tuple(premises) + (conclusion,),
    )


def sat_chosen_story() -> FolStory:
    return fol_story(SAT_CHOSEN_PREMISES, SAT_CHOSEN_CONCLUSION)


def sat_rejected_story() -> FolStory:
    return fol_story(SAT_REJECTED_PREMISES, SAT_REJECTED_CONCLUSION)


def soccer_story() -> FolStory:
    return fol_story(SOCCER_PREMISES_FOL, SOCCER_CONCLUSION_FOL)


def worksheet_story() -> FolStory:
    return fol_story(WORKSHEET_PREMISES_FOL, WORKSHEET_CONCLUSION_FOL)


def worksheet_nl_story() -> NlStory:
    return NlStory(
        "worksheet",
        tuple(WORKSHEET_PREMISES_NL),
        WORKSHEET_CONCLUSION_NL,
        Label.UNCERTAIN,
        gold_fol=worksheet_story(),
    )


def soccer_nl_story() -> NlStory:
    return NlStory(
        "soccer",
        tuple(SOCCER_PREMISES_NL),
        SOCCER_CONCLUSION_NL,
        Label.TRUE,
        gold_fol=soccer_story(),
    )


def sat_nl_story() -> NlStory:
    return NlStory(
        "sat-alignment",
        (
            "The SAT test is wholly owned and developed by the College Board.",
            "The SAT test is intended to assess student's readiness for college.",
            "The SAT was originally designed not to be aligned with high school curricula.",
            "Several adjustments were made for the version of the SAT introduced in 2016 to reflect more closely on what students learn in high school.",
        ),
        "Since 2016 the SAT has been better aligned with high school curricula.",
        Label.TRUE,
    )
