import json

import pytest

from geosalience.corpus import parse_post_record
from geosalience.descriptors import (AlignmentError, MismatchError,
                                     PatternConfig, PatternKind,
                                     annotate_mentions, evaluate_against_gold,
                                     match_descriptors)
from geosalience.mentions import extract_mentions
from tests.conftest import make_post


@pytest.fixture()
def config(alias_table):
    return PatternConfig(state_alias_table=alias_table)


def run_matcher(post, region, index, config):
    mentions = extract_mentions(post, region, index)
    matches = match_descriptors(post, mentions, config, index)
    return mentions, matches


class TestTable3Patterns:
    def test_state_pattern(self, small_index, regions, config):
        post = make_post([
            ("San", 6, "nsubj", "B-LOCATION"), ("Juan", 1, "flat", "I-LOCATION"),
            (",", 1, "punct", "O"), ("PR", 1, "appos", "O"),
            ("is", 6, "aux", "O"), ("flooding", 0, "root", "O"),
        ])
        _, matches = run_matcher(post, regions["maria"], small_index, config)
        assert len(matches) == 1
        assert matches[0].kind is PatternKind.STATE
        assert matches[0].context_span == (4, 4)

    def test_modifier_pattern(self, small_index, regions, config):
        post = make_post([
            ("San", 10, "nsubj", "B-LOCATION"), ("Juan", 1, "flat", "I-LOCATION"),
            (",", 1, "punct", "O"), ("capital", 1, "appos", "O"),
            ("of", 6, "case", "O"), ("Puerto", 4, "nmod", "B-LOCATION"),
            ("Rico", 6, "flat", "I-LOCATION"), (",", 1, "punct", "O"),
            ("is", 10, "aux", "O"), ("flooding", 0, "root", "O"),
        ])
        _, matches = run_matcher(post, regions["maria"], small_index, config)
        assert len(matches) == 1
        match = matches[0]
        assert match.kind is PatternKind.MODIFIER
        assert match.context_span == (6, 7)
        assert match.context_population > match.head_population

    def test_compound_pattern(self, small_index, regions, config):
        post = make_post([
            ("the", 4, "det", "O"), ("Vega", 4, "compound", "B-LOCATION"),
            ("Alta", 2, "flat", "I-LOCATION"), ("neighborhood", 9, "nsubj", "O"),
            ("of", 6, "case", "O"), ("San", 4, "nmod", "B-LOCATION"),
            ("Juan", 6, "flat", "I-LOCATION"), ("is", 9, "cop", "O"),
            ("gone", 0, "root", "O"),
        ])
        mentions, matches = run_matcher(post, regions["maria"], small_index, config)
        by_head = {m.head_span: m for m in matches}
        assert by_head[(2, 3)].kind is PatternKind.COMPOUND
        assert by_head[(2, 3)].context_span == (6, 7)
        # the context mention itself gets no COMPOUND from its own span
        assert (6, 7) not in by_head

    def test_conjunction_pattern(self, small_index, regions, config):
        post = make_post([
            ("San", 10, "nsubj", "B-LOCATION"), ("Juan", 1, "flat", "I-LOCATION"),
            (",", 4, "punct", "O"), ("Guayama", 1, "conj", "B-LOCATION"),
            ("and", 6, "cc", "O"), ("Vieques", 1, "conj", "B-LOCATION"),
            (",", 6, "punct", "O"), ("Puerto", 6, "appos", "B-LOCATION"),
            ("Rico", 8, "flat", "I-LOCATION"), ("lack", 0, "root", "O"),
            ("power", 10, "obj", "O"),
        ])
        _, matches = run_matcher(post, regions["maria"], small_index, config)
        kinds = {m.head_span: m.kind for m in matches}
        assert kinds[(1, 2)] is PatternKind.CONJUNCTION
        assert kinds[(4, 4)] is PatternKind.CONJUNCTION
        assert kinds[(6, 6)] is PatternKind.STATE

    def test_no_descriptor(self, small_index, regions, config):
        post = make_post([
            ("San", 4, "nsubj", "B-LOCATION"), ("Juan", 1, "flat", "I-LOCATION"),
            ("is", 4, "aux", "O"), ("flooding", 0, "root", "O"),
        ])
        _, matches = run_matcher(post, regions["maria"], small_index, config)
        assert matches == []


class TestMatchRules:
    def test_at_most_one_match_per_mention(self, small_index, regions, config, gold_records):
        for raw in gold_records:
            post = parse_post_record(json.dumps(raw), strict=False)
            mentions, matches = run_matcher(post, regions["maria"], small_index, config)
            heads = [m.head_span for m in matches]
            assert len(heads) == len(set(heads))

    def test_population_check_recomputable(self, small_index, regions, config, gold_records):
        for raw in gold_records:
            post = parse_post_record(json.dumps(raw), strict=False)
            _, matches = run_matcher(post, regions["maria"], small_index, config)
            for m in matches:
                if m.kind is PatternKind.STATE or m.context_is_state:
                    continue
                assert m.context_population is not None
                assert m.head_population is not None
                assert m.context_population > m.head_population

    def test_unknown_population_fails_check(self, regions, config):
        # Context location missing from the gazetteer: population unknown.
        from geosalience.gazetteer import build_index
        index = build_index([
            "1\tPonce\tPonce\t\t18.0\t-66.0\tP\tPPL\tPR\t\t113\t\t\t\t152634\t\t\tUTC\t2017-01-01",
        ])
        post = make_post([
            ("Ponce", 7, "nsubj", "B-LOCATION"), (",", 1, "punct", "O"),
            ("part", 1, "appos", "O"), ("of", 5, "case", "O"),
            ("Atlantis", 3, "nmod", "B-LOCATION"), (",", 1, "punct", "O"),
            ("sank", 0, "root", "O"),
        ])
        from geosalience.gazetteer import RegionSpec
        region = RegionSpec("maria", frozenset({("PR", "*")}))
        _, matches = run_matcher(post, region, index, config)
        assert matches == []

    def test_population_check_can_be_disabled(self, small_index, regions, alias_table):
        config = PatternConfig(state_alias_table=alias_table,
                               require_population_check=False)
        # "the San Juan district of Lajas": context smaller than head.
        post = make_post([
            ("the", 4, "det", "O"), ("San", 4, "compound", "B-LOCATION"),
            ("Juan", 2, "flat", "I-LOCATION"), ("district", 7, "nsubj", "O"),
            ("of", 6, "case", "O"), ("Lajas", 4, "nmod", "B-LOCATION"),
            ("flooded", 0, "root", "O"),
        ])
        _, matches = run_matcher(post, regions["maria"], small_index, config)
        assert any(m.head_span == (2, 3) and m.kind is PatternKind.COMPOUND
                   for m in matches)
        strict_config = PatternConfig(state_alias_table=alias_table)
        _, matches = run_matcher(post, regions["maria"], small_index, strict_config)
        # with the check on, the higher-population head gets no match
        assert not any(m.head_span == (2, 3) for m in matches)

    def test_disabling_all_kinds_yields_nothing(self, small_index, regions, alias_table,
                                                gold_records):
        config = PatternConfig(state_alias_table=alias_table,
                               enabled_kinds=frozenset())
        for raw in gold_records[:10]:
            post = parse_post_record(json.dumps(raw), strict=False)
            _, matches = run_matcher(post, regions["maria"], small_index, config)
            assert matches == []

    def test_invariant_to_unrelated_suffix_tokens(self, small_index, regions, config):
        base = [
            ("San", 6, "nsubj", "B-LOCATION"), ("Juan", 1, "flat", "I-LOCATION"),
            (",", 1, "punct", "O"), ("PR", 1, "appos", "O"),
            ("is", 6, "aux", "O"), ("flooding", 0, "root", "O"),
        ]
        extended = base + [("badly", 6, "advmod", "O"), ("today", 6, "obl", "O")]
        _, m1 = run_matcher(make_post(base), regions["maria"], small_index, config)
        _, m2 = run_matcher(make_post(extended), regions["maria"], small_index, config)
        assert [(m.kind, m.head_span, m.context_span) for m in m1] == \
               [(m.kind, m.head_span, m.context_span) for m in m2]

    def test_label_map_adapts_foreign_tagsets(self, small_index, regions, alias_table):
        # Stanford-style "prep/pobj" arcs mapped onto the nmod rule set.
        config = PatternConfig(state_alias_table=alias_table,
                               label_map={"nn": "compound", "prep": "nmod"})
        post = make_post([
            ("the", 4, "det", "O"), ("Vega", 4, "nn", "B-LOCATION"),
            ("Alta", 2, "flat", "I-LOCATION"), ("neighborhood", 9, "nsubj", "O"),
            ("of", 6, "case", "O"), ("San", 4, "prep", "B-LOCATION"),
            ("Juan", 6, "flat", "I-LOCATION"), ("is", 9, "cop", "O"),
            ("gone", 0, "root", "O"),
        ])
        mentions = extract_mentions(post, regions["maria"], small_index)
        matches = match_descriptors(post, mentions, config, small_index)
        assert any(m.kind is PatternKind.COMPOUND for m in matches)


class TestAnnotateMentions:
    def test_sets_descriptor_fields(self, small_index, regions, config):
        post = make_post([
            ("San", 6, "nsubj", "B-LOCATION"), ("Juan", 1, "flat", "I-LOCATION"),
            (",", 1, "punct", "O"), ("PR", 1, "appos", "O"),
            ("is", 6, "aux", "O"), ("flooding", 0, "root", "O"),
        ])
        mentions, matches = run_matcher(post, regions["maria"], small_index, config)
        annotated = annotate_mentions(mentions, matches)
        assert annotated[0].has_descriptor
        assert annotated[0].descriptor_kind == "STATE"

    def test_no_matches_all_false(self, small_index, regions, config):
        post = make_post([
            ("Ponce", 2, "nsubj", "B-LOCATION"), ("flooded", 0, "root", "O"),
        ])
        mentions, matches = run_matcher(post, regions["maria"], small_index, config)
        annotated = annotate_mentions(mentions, matches)
        assert all(not m.has_descriptor for m in annotated)

    def test_idempotent(self, small_index, regions, config):
        post = make_post([
            ("Guayama", 4, "nsubj", "B-LOCATION"), (",", 1, "punct", "O"),
            ("PR", 1, "appos", "O"), ("flooded", 0, "root", "O"),
        ])
        mentions, matches = run_matcher(post, regions["maria"], small_index, config)
        once = annotate_mentions(mentions, matches)
        twice = annotate_mentions(once, matches)
        assert once == twice

    def test_context_mentions_flagged(self, small_index, regions, config):
        post = make_post([
            ("the", 4, "det", "O"), ("Vega", 4, "compound", "B-LOCATION"),
            ("Alta", 2, "flat", "I-LOCATION"), ("neighborhood", 9, "nsubj", "O"),
            ("of", 6, "case", "O"), ("San", 4, "nmod", "B-LOCATION"),
            ("Juan", 6, "flat", "I-LOCATION"), ("is", 9, "cop", "O"),
            ("gone", 0, "root", "O"),
        ])
        mentions, matches = run_matcher(post, regions["maria"], small_index, config)
        annotated = {m.span: m for m in annotate_mentions(mentions, matches)}
        assert annotated[(2, 3)].has_descriptor
        assert not annotated[(2, 3)].is_context
        assert annotated[(6, 7)].is_context

    def test_unknown_mention_raises(self, small_index, regions, config):
        post = make_post([
            ("Guayama", 4, "nsubj", "B-LOCATION"), (",", 1, "punct", "O"),
            ("PR", 1, "appos", "O"), ("flooded", 0, "root", "O"),
        ])
        mentions, matches = run_matcher(post, regions["maria"], small_index, config)
        with pytest.raises(MismatchError):
            annotate_mentions([], matches)


class TestEvaluateAgainstGold:
    def test_perfect_agreement(self):
        gold = {("p", 1, 1): "STATE", ("p", 2, 2): None}
        report = evaluate_against_gold(gold, gold)
        assert report.precision == 1.0
        assert report.recall == 1.0
        assert not report.degenerate_precision

    def test_degenerate_precision_flagged(self):
        gold = {("p", 1, 1): "STATE", ("p", 2, 2): "STATE"}
        predicted = {("p", 1, 1): None, ("p", 2, 2): None}
        report = evaluate_against_gold(predicted, gold)
        assert report.precision == 1.0
        assert report.degenerate_precision
        assert report.recall == 0.0

    def test_constructed_confusion_arithmetic(self):
        # 10 gold positives; 1 false positive and 1 false negative.
        gold, predicted = {}, {}
        for i in range(10):
            gold[("p", i, i)] = "STATE"
            predicted[("p", i, i)] = "STATE"
        gold[("p", 10, 10)] = "MODIFIER"      # missed -> FN
        predicted[("p", 10, 10)] = None
        gold[("p", 11, 11)] = None            # spurious -> FP
        predicted[("p", 11, 11)] = "STATE"
        # one extra agreed positive to make P = R = 10/11 as constructed
        report = evaluate_against_gold(predicted, gold)
        assert report.true_positives == 10
        assert report.precision == pytest.approx(10 / 11)
        assert report.recall == pytest.approx(10 / 11)
        assert report.per_kind_confusion[("MODIFIER", "none")] == 1
        assert report.per_kind_confusion[("none", "STATE")] == 1

    def test_mismatched_keys_raise(self):
        with pytest.raises(AlignmentError):
            evaluate_against_gold({("p", 1, 1): None}, {("q", 1, 1): None})


class TestGoldFixture:
    def test_designed_disagreements_only(self, small_index, regions, config, gold_records):
        predicted, gold = {}, {}
        for raw in gold_records:
            post = parse_post_record(json.dumps(raw), strict=False)
            mentions, matches = run_matcher(post, regions["maria"], small_index, config)
            annotated = {m.span: m.descriptor_kind for m in annotate_mentions(mentions, matches)}
            for entry in raw["gold"]:
                span = tuple(entry["span"])
                assert span in annotated, (raw["post_id"], span)
                if entry["context"]:
                    continue
                key = (raw["post_id"], *span)
                predicted[key] = annotated[span]
                gold[key] = None if entry["kind"] == "none" else entry["kind"]
        report = evaluate_against_gold(predicted, gold)
        assert report.false_positives == 1
        assert report.false_negatives == 2
        disagreements = {k for k in gold if (gold[k] is None) != (predicted[k] is None)}
        assert disagreements == {("g048", 3, 3), ("g049", 1, 2), ("g050", 1, 1)}
        # kinds agree exactly on every shared positive
        for key in gold:
            if gold[key] and predicted[key]:
                assert gold[key] == predicted[key], key
