import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import DATA, QueueModel, PolicyModel, load_jsonl
from oracles import variant_match
from regionchain.core import (
    BBox,
    Dataset,
    GroundedSample,
    PredictionRecord,
    Region,
    Sample,
    Strategy,
)
from regionchain.errors import ReportError, UsageError
from regionchain.evaluation import (
    BBOX_PARSE_FAILED,
    MatchConfig,
    accuracy_report,
    answers_match,
    extract_core_answer,
    normalize_answer,
    parse_viscot_bbox,
    percent,
    rescore,
    run_strategy,
)
from regionchain.filtering import is_compound_answer
from regionchain.records import read_records


class TestNormalize:
    @pytest.mark.parametrize(
        "raw,expected",
        [
            ("Paris.", "paris"),
            ("The red car", "red car"),
            ("5.0 %", "5.0%"),
            ("  Hello,   World!  ", "hello world"),
            ("$1,200.", "1200"),
            ("-3.5", "-3.5"),
            ("the", "the"),
            ("state-of-the-art", "state of the art"),
        ],
    )
    def test_examples(self, raw, expected):
        assert normalize_answer(raw) == expected

    def test_articles_optional(self):
        assert normalize_answer("The red car", strip_articles=False) == "the red car"


class TestExtract:
    @pytest.mark.parametrize(
        "response,expected",
        [
            ("The answer is 42.", "42"),
            ("42", "42"),
            ("Step 1 ... Step 2 ...\nblue", "blue"),
            ("First answer is 3. On reflection the answer is 4.", "4"),
            ("Answer: The Eiffel Tower", "eiffel tower"),
            ("The answer is 3.5 meters. Done", "3.5 meters"),
            ("", ""),
        ],
    )
    def test_examples(self, response, expected):
        assert extract_core_answer(response) == expected


class TestMatch:
    def test_examples(self):
        assert answers_match("The answer is 42.", ["42"])
        assert answers_match("paris", ["Paris"])
        assert not answers_match("blue", ["red"])

    def test_numeric_forms(self):
        assert answers_match("5", ["5%"]) and answers_match("5.0", ["5"])
        assert not answers_match("5.1", ["5"])

    def test_containment_limited_to_short_golds(self):
        assert answers_match("It is a red car parked outside", ["red car"])
        assert not answers_match("one two three four five", ["two three four five"])
        assert answers_match("one two three four five", ["two three four five"], MatchConfig(containment_max_gold_tokens=4))

    def test_needs_gold(self):
        with pytest.raises(UsageError):
            answers_match("x", [])

    def test_sandwich_not_compound(self):
        assert not is_compound_answer("sandwich")

    @given(st.text(min_size=1, max_size=30))
    def test_reflexive(self, s):
        if normalize_answer(s):
            assert answers_match(s, [s])

    @given(st.text(alphabet=st.characters(min_codepoint=32, max_codepoint=126), min_size=1, max_size=30))
    def test_case_and_whitespace_invariant(self, s):
        if normalize_answer(s):
            assert answers_match(f"  {s.upper()} ", [s.lower()])
            assert answers_match(s.lower(), [f"\t{s.upper()}  "])

    def test_oracle_corpus(self):
        rows = load_jsonl(DATA / "matcher_pairs.jsonl")
        assert len(rows) == 200
        disagreements = [r["id"] for r in rows if answers_match(r["prediction"], r["golds"]) != variant_match(r["prediction"], r["golds"])]
        assert disagreements == []
        positives = sum(variant_match(r["prediction"], r["golds"]) for r in rows)
        assert 80 <= positives <= 120


def grounded(n=2, size=(1000, 1000), answers=("42",), relation=""):
    regions = tuple(Region(BBox(10 * i, 10, 10 * i + 8, 30), f"cell {i}", relation=relation) for i in range(n))
    return GroundedSample(Sample("g1", Dataset.DOCVQA, "img/g.png", "What is the total?", answers), regions, ("total",), size)


class TestStrategies:
    def test_direct(self):
        model = QueueModel(["42"])
        pred = run_strategy("direct", model, grounded())
        assert pred.correct and pred.extracted_answer == "42" and pred.region_count == 2
        assert model.prompts == ["What is the total?"]

    def test_viscot_normalized_box(self):
        model = QueueModel(["[0.1, 0.1, 0.5, 0.5]", "The answer is 42."])
        pred = run_strategy(Strategy.VISCOT, model, grounded())
        assert model.requests[1].image_refs == ("img/g.png", "img/g.png#crop=100,100,500,500")
        assert pred.correct

    def test_viscot_unparseable(self):
        model = QueueModel(["somewhere in the middle"])
        pred = run_strategy(Strategy.VISCOT, model, grounded())
        assert pred.flags == (BBOX_PARSE_FAILED,) and not pred.correct
        assert len(model.prompts) == 1
        assert rescore(pred, ["somewhere in the middle"]) == pred

    def test_viscot_box_parser(self):
        assert parse_viscot_bbox("box [100, 50, 300, 400]", (1000, 1000)) == BBox(100, 50, 300, 400)
        assert parse_viscot_bbox("[-20, 0, 2000, 50]", (1000, 1000)) == BBox(0, 0, 1000, 50)
        assert parse_viscot_bbox("[0.1, 0.1, 0.5, 0.5]", None) is None
        assert parse_viscot_bbox("[5, 5, 5, 9]", (100, 100)) is None

    def test_cocot_calls_per_region(self):
        model = PolicyModel(lambda p: "cell shows 42" if "Based on the description" in p else "The answer is 42")
        pred = run_strategy(Strategy.COCOT, model, grounded(3))
        assert len(model.prompts) == 4
        assert "Region 2: cell shows 42" in model.prompts[-1]
        assert model.requests[1].image_refs[1] == "img/g.png#crop=10,10,18,30"
        assert pred.correct

    def test_minus_and_replaced_rar_inputs(self):
        model = QueueModel(["x", "y"])
        run_strategy(Strategy.MINUS_RAR, model, grounded(2))
        run_strategy(Strategy.REPLACED_RAR, model, grounded(2, relation="parallel"))
        assert "Region 1: cell 1 [10, 10, 18, 30]" in model.prompts[0]
        assert "Region 1 (parallel): cell 1" in model.prompts[1]

    def test_qwen_rar(self):
        model = QueueModel(["The answer is 42"])
        assert run_strategy(Strategy.QWEN_RAR, model, grounded(), chain_text="Step 1 ...\nChain: A").correct
        assert "Chain: A" in model.prompts[0]
        with pytest.raises(UsageError):
            run_strategy(Strategy.QWEN_RAR, QueueModel([]), grounded())


def pred(sid, ok, n, strategy="direct"):
    return PredictionRecord(sid, strategy, "", "", ok, n)


def index(*specs):
    out = {}
    for sid, n, ds in specs:
        regions = tuple(Region(BBox(i, 0, i + 1, 1), "r") for i in range(n))
        out[sid] = GroundedSample(Sample(sid, ds, "i", "q", ("a",)), regions)
    return out


class TestReport:
    def test_percent_rounding(self):
        assert percent(1, 3) == 33.3 and percent(2, 3) == 66.7 and percent(1, 8) == 12.5
        assert percent(1, 16) == 6.3  # 6.25 rounds half up
        assert percent(0, 0) is None

    def test_simple_split(self):
        specs = [(f"s{i}", 1, Dataset.GQA) for i in range(4)] + [(f"m{i}", 2, Dataset.GQA) for i in range(2)]
        preds = [pred("s0", True, 1), pred("s1", True, 1), pred("s2", False, 1), pred("s3", False, 1)]
        preds += [pred("m0", True, 2), pred("m1", False, 2)]
        r = accuracy_report(preds, index(*specs))
        assert r.accuracy["direct"]["gqa"] == {"single": 50.0, "multi": 50.0, "overall": 50.0}

    def test_empty_split_rendered_as_dash(self):
        r = accuracy_report([pred("s0", True, 1)], index(("s0", 1, Dataset.GQA)))
        assert r.accuracy["direct"]["gqa"]["multi"] is None
        assert "—" in r.render_text()

    def test_average_pools_datasets(self):
        specs = [("a", 1, Dataset.GQA), ("b", 1, Dataset.DOCVQA), ("c", 2, Dataset.DOCVQA)]
        r = accuracy_report([pred("a", True, 1), pred("b", False, 1), pred("c", True, 2)], index(*specs))
        assert r.accuracy["direct"]["average"] == {"single": 50.0, "multi": 100.0, "overall": 66.7}
        assert r.datasets == ["gqa", "docvqa", "average"]

    def test_unjoinable(self):
        with pytest.raises(ReportError) as info:
            accuracy_report([pred("zz", True, 1), pred("aa", True, 1)], {})
        assert "aa" in str(info.value) and "zz" in str(info.value)

    def test_duplicates(self):
        specs = index(("a", 1, Dataset.GQA))
        with pytest.raises(UsageError):
            accuracy_report([pred("a", True, 1), pred("a", False, 1)], specs)

    def test_unknown_baseline(self):
        with pytest.raises(UsageError):
            accuracy_report([pred("a", True, 1)], index(("a", 1, Dataset.GQA)), baseline="cocot")

    def test_fixture_deltas(self):
        grounded_rows = read_records(DATA / "report_grounded.jsonl", GroundedSample)
        preds = read_records(DATA / "report_predictions.jsonl", PredictionRecord)
        r = accuracy_report(preds, {g.sample_id: g for g in grounded_rows}, baseline="direct")
        # Hand arithmetic: direct 90/300, 45/200, 135/500; qwen_rar 140/300, 72/200, 212/500.
        assert r.accuracy["direct"]["docvqa"] == {"single": 30.0, "multi": 22.5, "overall": 27.0}
        assert r.accuracy["qwen_rar"]["docvqa"] == {"single": 46.7, "multi": 36.0, "overall": 42.4}
        assert r.delta["qwen_rar"]["docvqa"] == {"single": 16.7, "multi": 13.5, "overall": 15.4}
        text = r.render_text()
        assert "Delta vs direct" in text and "+15.4" in text and "+16.7" in text

    @given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=40))
    def test_overall_between_splits(self, rows):
        specs, preds = [], []
        for i, (multi, ok) in enumerate(rows):
            n = 2 if multi else 1
            specs.append((f"x{i}", n, Dataset.TEXTVQA))
            preds.append(pred(f"x{i}", ok, n))
        acc = accuracy_report(preds, index(*specs)).accuracy["direct"]["textvqa"]
        if acc["single"] is not None and acc["multi"] is not None:
            lo, hi = sorted((acc["single"], acc["multi"]))
            assert lo - 0.05 <= acc["overall"] <= hi + 0.05
