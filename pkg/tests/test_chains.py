import logging
import random
import time

import pytest

from conftest import PolicyModel, QueueModel
from regionchain.chains import (
    ChainBuilderConfig,
    build_chain,
    classify_question_type,
    parse_step_output,
    render_chain,
    step_letter,
    validate_chain,
)
from regionchain.core import (
    BBox,
    Dataset,
    GroundedSample,
    QuestionType,
    ReasoningChain,
    ReasoningStep,
    Region,
    Relation,
    Role,
    Sample,
    encode,
)
from regionchain.errors import ChainFailed, ParseError, RangeError, UsageError


def grounded(n: int) -> GroundedSample:
    regions = tuple(Region(BBox(10 * i, 0, 10 * i + 8, 8), f"region text {i}") for i in range(n))
    return GroundedSample(
        Sample("c1", Dataset.DOCVQA, "img/c.png", "What is the total price?", ("12",)),
        regions,
        ("total", "price"),
    )


def step_text(region, role, relation, reasoning="looks relevant"):
    return f"SELECTED_REGION: Region {region}, ROLE: {role}, REASONING: {reasoning}, RELATIONSHIP: {relation}"


class TestClassify:
    @pytest.mark.parametrize(
        "response,expected",
        [
            ("sequential", QuestionType.SEQUENTIAL),
            ("Parallel", QuestionType.PARALLEL),
            ("The question is parallel.", QuestionType.PARALLEL),
        ],
    )
    def test_parse(self, response, expected):
        assert classify_question_type(QueueModel([response]), "q?", ["a"]) is expected

    def test_ambiguous_defaults_to_sequential(self, caplog):
        with caplog.at_level(logging.WARNING):
            assert classify_question_type(QueueModel(["maybe"]), "q?", []) is QuestionType.SEQUENTIAL
        assert "ambiguous" in caplog.text

    def test_empty_question(self):
        with pytest.raises(UsageError):
            classify_question_type(QueueModel([]), " ", [])


# (text, region, role, relation, reasoning)
VARIANTS = [
    (
        "SELECTED_REGION: Region 2, ROLE: evidence, REASONING: price label shows the total, RELATIONSHIP: sequential",
        2, Role.EVIDENCE, Relation.SEQUENTIAL, "price label shows the total",
    ),
    (
        "selected_region: [Region 0]\nrole: direct_answer\nreasoning: matches\nrelationship: none",
        0, Role.DIRECT_ANSWER, Relation.NONE, "matches",
    ),
    (
        "SELECTED_REGION: [Region 1], ROLE: [keyword_match], REASONING: [title row], RELATIONSHIP: [none]",
        1, Role.KEYWORD_MATCH, Relation.NONE, "title row",
    ),
    (
        "Selected_Region: region 3\nRole: Conclusion\nReasoning: the sum is 12\nRelationship: Parallel",
        3, Role.CONCLUSION, Relation.PARALLEL, "the sum is 12",
    ),
    (
        "**SELECTED_REGION:** Region 1\n**ROLE:** evidence\n**REASONING:** second column\n**RELATIONSHIP:** sequential",
        1, Role.EVIDENCE, Relation.SEQUENTIAL, "second column",
    ),
    (
        "[SELECTED_REGION]: Region 0, [ROLE]: keyword_match, [REASONING]: header, [RELATIONSHIP]: none",
        0, Role.KEYWORD_MATCH, Relation.NONE, "header",
    ),
    (
        "SELECTED_REGION: 2\nROLE: evidence\nREASONING: bare index\nRELATIONSHIP: sequential",
        2, Role.EVIDENCE, Relation.SEQUENTIAL, "bare index",
    ),
    (
        "Selected Region: Region 1\nRole: keyword match\nReasoning: spaces in labels\nRelationship: none",
        1, Role.KEYWORD_MATCH, Relation.NONE, "spaces in labels",
    ),
    (
        "Here is my answer.\nSELECTED_REGION: Region 3\nROLE: evidence\nREASONING: preamble ignored\nRELATIONSHIP: parallel\n",
        3, Role.EVIDENCE, Relation.PARALLEL, "preamble ignored",
    ),
    (
        "ROLE: evidence\nSELECTED_REGION: Region 2\nRELATIONSHIP: sequential\nREASONING: fields out of order",
        2, Role.EVIDENCE, Relation.SEQUENTIAL, "fields out of order",
    ),
    (
        "SELECTED_REGION: Region 1, ROLE: evidence, REASONING: its role as ROLE: support is clear, "
        "RELATIONSHIP: sequential",
        1, Role.EVIDENCE, Relation.SEQUENTIAL, "its role as ROLE: support is clear",
    ),
    (
        "SELECTED_REGION:Region 0,ROLE:direct-answer,REASONING:no spaces,RELATIONSHIP:NONE",
        0, Role.DIRECT_ANSWER, Relation.NONE, "no spaces",
    ),
    (
        "  selected_region :  Region 2 ;\n  role :  evidence ;\n  reasoning :  padded ;\n  relationship :  sequential ;",
        2, Role.EVIDENCE, Relation.SEQUENTIAL, "padded",
    ),
    (
        "SELECTED_REGION: `Region 1`\nROLE: \"evidence\"\nREASONING: quoted values\nRELATIONSHIP: 'parallel'",
        1, Role.EVIDENCE, Relation.PARALLEL, "quoted values",
    ),
]

MALFORMED = [
    ("ROLE: evidence, REASONING: x, RELATIONSHIP: none", ParseError, "SELECTED_REGION"),
    ("SELECTED_REGION: Region 1, REASONING: x, RELATIONSHIP: none", ParseError, "ROLE"),
    ("SELECTED_REGION: Region 1, ROLE: evidence, RELATIONSHIP: none", ParseError, "REASONING"),
    ("SELECTED_REGION: Region 1, ROLE: evidence, REASONING: x", ParseError, "RELATIONSHIP"),
    ("SELECTED_REGION: Region 1, ROLE: guess, REASONING: x, RELATIONSHIP: none", ParseError, "ROLE"),
    ("SELECTED_REGION: Region 1, ROLE: evidence, REASONING: x, RELATIONSHIP: diagonal", ParseError, "RELATIONSHIP"),
    ("SELECTED_REGION: the top one, ROLE: evidence, REASONING: x, RELATIONSHIP: none", ParseError, "SELECTED_REGION"),
    ("SELECTED_REGION: Region 1, ROLE: evidence, REASONING: , RELATIONSHIP: none", ParseError, "REASONING"),
]


class TestParse:
    @pytest.mark.parametrize("text,region,role,relation,reasoning", VARIANTS)
    def test_variants(self, text, region, role, relation, reasoning):
        step = parse_step_output(text, 4)
        assert (step.region_index, step.role, step.relation, step.reasoning) == (region, role, relation, reasoning)

    def test_variant_count(self):
        assert len(VARIANTS) >= 12

    @pytest.mark.parametrize("text,exc,field", MALFORMED)
    def test_malformed_names_field(self, text, exc, field):
        with pytest.raises(exc) as info:
            parse_step_output(text, 4)
        assert info.value.field == field
        assert field in str(info.value)

    def test_out_of_range(self):
        with pytest.raises(RangeError):
            parse_step_output(step_text(4, "evidence", "none"), 4)

    def test_bad_region_count(self):
        with pytest.raises(UsageError):
            parse_step_output(step_text(0, "evidence", "none"), 0)


class TestBuild:
    def test_single_region(self):
        model = QueueModel([step_text(0, "direct_answer", "none", "the label reads 12")])
        chain = build_chain(model, grounded(1))
        assert len(chain.steps) == 1 and chain.steps[0].relation is Relation.NONE
        assert chain.branches == ((0,),)
        assert "Region 0" in model.prompts[0] and "Used" not in model.prompts[0]
        assert render_chain(chain) == "Step 1 [Region 0, direct_answer]: the label reads 12\nChain: A"

    def test_sequential_three(self):
        model = QueueModel(
            [
                "sequential",
                step_text(1, "keyword_match", "none"),
                step_text(0, "evidence", "sequential"),
                step_text(2, "conclusion", "sequential"),
            ]
        )
        chain = build_chain(model, grounded(3))
        assert chain.question_type is QuestionType.SEQUENTIAL
        assert [s.region_index for s in chain.steps] == [1, 0, 2]
        assert chain.branches == ((0, 1, 2),)
        assert render_chain(chain).endswith("\nChain: A→B→C")
        assert "Used 0/3 regions" in model.prompts[1]
        assert "Used 2/3 regions" in model.prompts[3]
        # The chosen region disappears from the candidates.
        assert "Region 1: region text 1" not in model.prompts[2]

    def test_two_branches(self):
        model = QueueModel(
            [
                "parallel",
                step_text(0, "keyword_match", "none"),
                step_text(1, "evidence", "sequential"),
                step_text(2, "evidence", "parallel"),
                step_text(3, "evidence", "sequential"),
            ]
        )
        chain = build_chain(model, grounded(4))
        assert chain.branches == ((0, 1), (2, 3))
        text = render_chain(chain)
        assert text.endswith("\nChain: A→B, C→D")
        assert "Step 2 [Region 1, evidence]: looks relevant\n\nStep 3" in text

    def test_first_relation_forced_none(self):
        model = QueueModel(["sequential", step_text(0, "keyword_match", "parallel"), step_text(1, "conclusion", "none")])
        chain = build_chain(model, grounded(2))
        assert [s.relation for s in chain.steps] == [Relation.NONE, Relation.SEQUENTIAL]

    def test_max_steps(self):
        model = QueueModel(["sequential"] + [step_text(i, "evidence", "sequential") for i in range(4)])
        chain = build_chain(model, grounded(4), ChainBuilderConfig(max_steps=2))
        assert len(chain.steps) == 2

    def test_retry_then_success(self):
        model = QueueModel(["sequential", "garbage", step_text(0, "keyword_match", "none"), step_text(1, "conclusion", "sequential")])
        chain = build_chain(model, grounded(2))
        assert len(chain.steps) == 2 and not chain.truncated
        assert "could not be used" in model.prompts[2]

    def test_reused_region_retried_then_truncated(self):
        model = QueueModel(
            ["sequential", step_text(0, "keyword_match", "none"), step_text(0, "evidence", "sequential"), "junk"]
        )
        chain = build_chain(model, grounded(3))
        assert len(chain.steps) == 1 and chain.truncated

    def test_entry_failure(self):
        with pytest.raises(ChainFailed):
            build_chain(QueueModel(["sequential", "junk", "junk"]), grounded(2))

    def test_no_regions(self):
        gs = grounded(1)
        object.__setattr__(gs, "regions", ())
        with pytest.raises(UsageError):
            build_chain(QueueModel([]), gs)

    def test_crop_refs_follow_available_regions(self):
        model = QueueModel(["sequential", step_text(1, "keyword_match", "none"), step_text(0, "conclusion", "sequential")])
        build_chain(model, grounded(2))
        assert model.requests[1].image_refs == ("img/c.png", "img/c.png#crop=0,0,8,8", "img/c.png#crop=10,0,18,8")
        assert model.requests[2].image_refs == ("img/c.png", "img/c.png#crop=0,0,8,8")


def random_policy(rng: random.Random, n: int):
    roles = [r.value for r in Role]
    relations = [r.value for r in Relation]

    def policy(prompt: str) -> str:
        if "sequential or parallel" in prompt:
            return rng.choice(["sequential", "parallel", "unsure"])
        roll = rng.random()
        if roll < 0.1:
            return "no idea"
        region = rng.randrange(n + 1)  # sometimes out of range
        role = rng.choice(roles + ["evidence"] * 4)
        return step_text(region, role, rng.choice(relations), f"reason {rng.random():.3f}")

    return policy


def test_randomized_policies():
    rng = random.Random(1234)
    t0 = time.perf_counter()
    built = failed = 0
    for _ in range(500):
        n = rng.randint(1, 6)
        gs = grounded(n)
        cfg = ChainBuilderConfig(max_steps=rng.choice([None, 1, 2, 3, 8]))
        try:
            chain = build_chain(PolicyModel(random_policy(rng, n)), gs, cfg)
        except ChainFailed:
            failed += 1
            continue
        built += 1
        indices = [s.region_index for s in chain.steps]
        assert len(indices) == len(set(indices))
        assert len(chain.steps) <= min(n, cfg.max_steps or n)
        assert validate_chain(chain, gs) == []
    assert built > 400
    assert time.perf_counter() - t0 < 10


class TestRender:
    def test_letters(self):
        assert [step_letter(i) for i in (0, 1, 25, 26, 27, 701, 702)] == ["A", "B", "Z", "AA", "AB", "ZZ", "AAA"]

    def test_distinct_structures_render_differently(self):
        def chain(branches):
            steps = []
            starts = {b[0] for b in branches}
            for pos in range(4):
                rel = Relation.NONE if pos == 0 else (Relation.PARALLEL if pos in starts else Relation.SEQUENTIAL)
                steps.append(ReasoningStep(pos, Role.EVIDENCE, "r", rel))
            return ReasoningChain(tuple(steps), branches)

        shapes = [((0, 1, 2, 3),), ((0, 1), (2, 3)), ((0,), (1, 2, 3)), ((0, 1, 2), (3,)), ((0,), (1,), (2,), (3,))]
        assert len({render_chain(chain(s)) for s in shapes}) == len(shapes)


class TestValidate:
    def _record(self, steps, branches):
        return {
            "steps": [
                {"region_index": r, "role": "evidence", "reasoning": "x", "relation": rel} for r, rel in steps
            ],
            "branches": branches,
            "question_type": "sequential",
        }

    def test_valid(self):
        gs = grounded(3)
        rec = self._record([(0, "none"), (1, "sequential"), (2, "sequential")], [[0, 1, 2]])
        assert validate_chain(rec, gs) == []

    def test_repeated(self):
        rec = self._record([(2, "none"), (2, "sequential")], [[0, 1]])
        assert validate_chain(rec, grounded(3)) == ["region 2 repeated"]

    def test_initial_relation(self):
        rec = self._record([(0, "sequential")], [[0]])
        assert validate_chain(rec, grounded(3)) == ["initial relation must be none"]

    def test_out_of_range_and_bad_role(self):
        assert validate_chain(self._record([(5, "none")], [[0]]), grounded(3)) == ["step 1 region 5 out of range"]
        bad = self._record([(0, "none")], [[0]])
        bad["steps"][0]["role"] = "guess"
        assert validate_chain(bad, grounded(3))[0].startswith("step 1:")

    def test_round_trip_of_built_chain(self):
        model = QueueModel(["parallel", step_text(0, "keyword_match", "none"), step_text(1, "conclusion", "parallel")])
        chain = build_chain(model, grounded(2))
        import json

        assert validate_chain(json.loads(encode(chain)), grounded(2)) == []
