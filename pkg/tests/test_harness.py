"""Scenario harness tests: fixture scores, confusion identity, ablation."""

import json

import numpy as np
import pytest

from hiaer.evalharness import (
    ABLATION_RATES,
    EmptyScenarioError,
    HarnessError,
    Scenario,
    TAXONOMY,
    build_report,
    compute_iacc,
    emit_report,
    load_bundled_scenarios,
    load_reference_tables,
    make_ablation_client,
    render_ablation,
    render_report,
    render_reference_tables,
    report_from_dict,
    report_to_dict,
    run_ablation,
    run_scenarios,
)
from hiaer.intent import IntentEngine

# published interaction-study figures the fixtures are built to reproduce
EXPECTED = {
    "S1": (12, -0.46, 0.64),
    "S2": (14, 0.53, 0.49),
    "S3": (14, 0.36, 0.29),
    "S4": (14, -0.32, 0.47),
    "S5": (13, 0.03, 0.25),
    "S6": (12, 0.11, 0.29),
}
TRUTH = {
    "S1": "Aggression",
    "S2": "Celebration",
    "S3": "CalmGreeting",
    "S4": "Disappointment",
    "S5": "Neutral",
    "S6": "Ambiguous",
}


@pytest.fixture(scope="module")
def scenarios():
    return load_bundled_scenarios()


@pytest.fixture(scope="module")
def results(scenarios):
    return run_scenarios(scenarios)


@pytest.fixture(scope="module")
def report(results, scenarios):
    return build_report(results, scenarios)


class TestFixtureScores:
    def test_ninety_results_in_canonical_order(self, results):
        assert len(results) == 90
        keys = [(r.scenario, r.trial) for r in results]
        assert keys == sorted(keys)
        assert {r.scenario for r in results} == set(EXPECTED)

    @pytest.mark.parametrize("sid", sorted(EXPECTED))
    def test_per_scenario_accuracy_exact(self, report, sid):
        row = {m.scenario: m for m in report.per_scenario}[sid]
        correct, v_avg, a_avg = EXPECTED[sid]
        assert row.trials == 15
        assert row.correct == correct
        assert row.iacc == correct / 15
        assert row.mean_valence == pytest.approx(v_avg, abs=1e-9)
        assert row.mean_arousal == pytest.approx(a_avg, abs=1e-9)

    def test_overall_accuracy(self, report):
        assert report.overall_iacc == 79 / 90
        assert round(100 * report.overall_iacc, 1) == 87.8

    def test_fallback_rate(self, report):
        per = {m.scenario: m.fallbacks for m in report.per_scenario}
        assert per == {"S1": 0, "S2": 0, "S3": 0, "S4": 0, "S5": 1, "S6": 12}
        assert report.fallback_rate == 13 / 90

    def test_confusion_trace_identity(self, report):
        # diagonal over the six truths must equal the per-scenario corrects
        for sid, truth in TRUTH.items():
            assert report.confusion[truth][truth] == EXPECTED[sid][0]
        trace = sum(report.confusion[t][t] for t in TRUTH.values())
        assert trace == 79

    def test_confusion_rows_sum_to_trials(self, report):
        for truth in TRUTH.values():
            assert sum(report.confusion[truth].values()) == 15

    def test_taxonomy_covers_confusion(self, report):
        assert set(report.confusion) == set(TAXONOMY)
        for row in report.confusion.values():
            assert set(row) == set(TAXONOMY)

    def test_effective_prediction_counts_fallbacks_as_ambiguous(self, results):
        fell = [r for r in results if r.fell_back]
        assert len(fell) == 13
        assert all(r.effective == "Ambiguous" for r in fell)
        # S6 fallbacks are scored correct, the stray S5 one is not
        s5 = [r for r in fell if r.scenario == "S5"]
        assert len(s5) == 1 and s5[0].effective != TRUTH["S5"]

    def test_latencies_recorded(self, results):
        assert all(r.latency_s > 0 for r in results)
        assert all(r.latency_s < 3.0 for r in results)


class TestDeterminism:
    def test_seed_does_not_change_sorted_results(self, scenarios, results):
        subset = [sc for sc in scenarios if sc.id == "S3"]
        a = run_scenarios(subset, rng_seed=0)
        b = run_scenarios(subset, rng_seed=99)
        assert a == b
        assert a == tuple(r for r in results if r.scenario == "S3")

    def test_workers_do_not_change_results(self, scenarios, results):
        subset = [sc for sc in scenarios if sc.id == "S2"]
        parallel = run_scenarios(subset, workers=4)
        assert parallel == tuple(r for r in results if r.scenario == "S2")


class TestScoring:
    def test_compute_iacc_means_over_trials(self, results):
        per, overall = compute_iacc(results, TRUTH)
        assert per["S1"] == 12 / 15
        assert overall == 79 / 90

    def test_empty_scenario_rejected(self, results):
        truth = dict(TRUTH, S7="Neutral")
        with pytest.raises(EmptyScenarioError, match="S7"):
            compute_iacc(results, truth)

    def test_result_for_unknown_scenario_rejected(self, results, scenarios):
        known = [sc for sc in scenarios if sc.id != "S6"]
        with pytest.raises(HarnessError, match="S6"):
            build_report(results, known)

    def test_rater_scores_echoed_never_synthesized(self, results, scenarios, report):
        assert report.rater_scores is None
        rated = build_report(
            results,
            scenarios,
            rater_scores={"S1": {"s_select": 4.2, "s_affect": 3.9, "note": "x"}},
        )
        assert rated.rater_scores == {"S1": {"s_select": 4.2, "s_affect": 3.9}}

    def test_scenario_needs_trials(self, scenarios):
        sc = scenarios[0]
        with pytest.raises(HarnessError, match="at least one trial"):
            Scenario(
                id=sc.id,
                description=sc.description,
                path=sc.path,
                ground_truth_intent=sc.ground_truth_intent,
                designated_quadrant=sc.designated_quadrant,
                trials=0,
            )

    def test_unknown_bundled_id(self):
        with pytest.raises(HarnessError, match="missing fixture"):
            load_bundled_scenarios(["S9"])


class TestReportRoundTrip:
    def test_dict_round_trip(self, report):
        doc = report_to_dict(report)
        again = report_to_dict(report_from_dict(doc))
        assert again == doc
        assert json.loads(json.dumps(doc)) == doc

    def test_dict_fields(self, report):
        doc = report_to_dict(report)
        assert doc["overall_iacc"] == 79 / 90
        rows = {r["scenario"]: r for r in doc["per_scenario"]}
        assert rows["S2"]["correct"] == 14
        assert len(rows["S2"]["va_points"]) == 15


class TestReferenceTables:
    def test_bundled_tables(self):
        ref = load_reference_tables()
        assert len(ref.table_ii["rows"]) == 6
        by_id = {r["scenario"]: r for r in ref.table_ii["rows"]}
        assert by_id["S1"]["iacc_pct"] == 80.0
        assert by_id["S1"]["v_avg"] == -0.46
        assert by_id["S1"]["a_avg"] == 0.64
        assert ref.table_iii["intent_avg_s"] == 2.392
        assert ref.table_iii["video_stream_hz"] == 20
        assert ref.table_iii["whole_body_hz"] == 50
        assert ref.table_iv == {"prompt_only": 0.20, "image_only": 0.77, "combined": 0.87}

    def test_fixtures_match_reference_rows(self, report):
        ref = load_reference_tables()
        rows = {m.scenario: m for m in report.per_scenario}
        for row in ref.table_ii["rows"]:
            m = rows[row["scenario"]]
            assert round(100 * m.iacc, 1) == row["iacc_pct"]
            assert round(m.mean_valence, 2) == row["v_avg"]
            assert round(m.mean_arousal, 2) == row["a_avg"]


class TestAblation:
    def test_default_counts_follow_rates(self, scenarios):
        client = make_ablation_client(scenarios)
        sizes = {m: len(s) for m, s in client.correct_sets.items()}
        assert sizes == {"combined": 78, "image_only": 69, "prompt_only": 18}
        assert client.correct_sets["prompt_only"] <= client.correct_sets["image_only"]
        assert client.correct_sets["image_only"] <= client.correct_sets["combined"]

    def test_full_set_reproduces_published_rates(self, scenarios):
        engine = IntentEngine(make_ablation_client(scenarios))
        out = run_ablation(engine, scenarios)
        assert out.accuracies == {
            "combined": 78 / 90,
            "image_only": 69 / 90,
            "prompt_only": 18 / 90,
        }
        assert out.accuracies["combined"] == pytest.approx(0.8667, abs=5e-5)
        assert out.accuracies["image_only"] == pytest.approx(0.7667, abs=5e-5)
        assert out.accuracies["prompt_only"] == pytest.approx(0.2000, abs=5e-5)
        assert out.flagged == ()

    def test_subset_derives_proportional_counts(self):
        subset = load_bundled_scenarios(["S1", "S2"])
        client = make_ablation_client(subset)
        sizes = {m: len(s) for m, s in client.correct_sets.items()}
        assert sizes == {"combined": 26, "image_only": 23, "prompt_only": 6}
        engine = IntentEngine(client)
        out = run_ablation(engine, subset)
        assert out.accuracies == {
            "combined": 26 / 30,
            "image_only": 23 / 30,
            "prompt_only": 6 / 30,
        }

    @pytest.mark.parametrize("seed", [0, 7, 123])
    def test_ordering_forced_for_any_seed(self, seed):
        subset = load_bundled_scenarios(["S3"])
        engine = IntentEngine(make_ablation_client(subset, rng_seed=seed))
        out = run_ablation(engine, subset)
        acc = out.accuracies
        assert acc["prompt_only"] <= acc["image_only"] <= acc["combined"]

    def test_mode_insensitive_collapses_the_gap(self):
        subset = load_bundled_scenarios(["S2"])
        engine = IntentEngine(make_ablation_client(subset, mode_insensitive=True))
        out = run_ablation(engine, subset)
        assert len(set(out.accuracies.values())) == 1

    def test_non_nested_counts_rejected(self, scenarios):
        with pytest.raises(HarnessError, match="not nested"):
            make_ablation_client(scenarios, correct_counts=(10, 20, 5))

    def test_counts_beyond_total_rejected(self):
        subset = load_bundled_scenarios(["S1"])
        with pytest.raises(HarnessError, match="not nested"):
            make_ablation_client(subset, correct_counts=(40, 20, 5))

    def test_unknown_mode_rejected(self, scenarios):
        engine = IntentEngine(make_ablation_client(scenarios))
        with pytest.raises(HarnessError, match="telepathy"):
            run_ablation(engine, scenarios, modes=("telepathy",))


class TestRendering:
    def test_report_table(self, report):
        text = render_report(report)
        assert "Scenario    I_acc   V_avg   A_avg" in text
        assert "overall I_acc 87.8%" in text
        assert "fallback rate 14.4%" in text
        assert "Confusion (rows truth, cols effective prediction)" in text
        s1_line = next(l for l in text.splitlines() if l.startswith("S1"))
        assert "80.0%" in s1_line and "-0.46" in s1_line and "0.64" in s1_line

    def test_report_with_reference_appendix(self, report):
        text = render_report(report, load_reference_tables())
        assert "Reference (published figures, display only)" in text
        assert "2.392" in text

    def test_reference_tables_render(self):
        text = render_reference_tables(load_reference_tables())
        assert "video stream   20 Hz" in text
        assert "intent         2.392 s avg" in text
        assert "planner        0.087 s avg per window" in text
        assert "whole body     50 Hz" in text
        assert "combined     0.87" in text

    def test_ablation_render(self, scenarios):
        engine = IntentEngine(make_ablation_client(scenarios))
        out = run_ablation(engine, scenarios)
        text = render_ablation(out, load_reference_tables())
        assert "prompt_only" in text and "0.2000" in text
        assert "0.87" in text  # reference column

    def test_rater_columns_blank_without_scores(self, report):
        line = next(l for l in render_report(report).splitlines() if l.startswith("S1"))
        assert "-" in line.split("%", 1)[1]


class TestEmit:
    def test_text(self, report, tmp_path):
        paths = emit_report(report, "text", tmp_path)
        assert [p.name for p in paths] == ["report.txt"]
        assert "overall I_acc" in paths[0].read_text()

    def test_structured(self, report, tmp_path):
        paths = emit_report(report, "structured", tmp_path)
        assert [p.name for p in paths] == ["report.json"]
        doc = json.loads(paths[0].read_text())
        assert doc["overall_iacc"] == 79 / 90

    def test_plots(self, report, tmp_path):
        paths = emit_report(report, "plots", tmp_path)
        assert sorted(p.name for p in paths) == ["latency_hist.png", "va_scatter.png"]
        for p in paths:
            assert p.stat().st_size > 1000
            assert p.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_unknown_format(self, report, tmp_path):
        with pytest.raises(HarnessError, match="unknown report format"):
            emit_report(report, "interpretive_dance", tmp_path)


class TestRates:
    def test_published_fractions(self):
        assert ABLATION_RATES == {"combined": 13 / 15, "image_only": 23 / 30, "prompt_only": 1 / 5}
        assert int(90 * ABLATION_RATES["combined"]) == 78
        assert int(90 * ABLATION_RATES["image_only"]) == 69
        assert int(90 * ABLATION_RATES["prompt_only"]) == 18
