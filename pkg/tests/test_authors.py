import random

import pytest

from geosalience.authors import (OrganizationRules, build_author_profiles,
                                 classify_local, classify_organization,
                                 nearest_rank_percentile, posted_in_all_phases,
                                 select_active_authors)
from geosalience.corpus import SECONDS_PER_DAY
from geosalience.gazetteer import GazetteerEntry, RegionSpec
from geosalience.mentions import LocationMention
from geosalience.timeline import PeakInfo
from tests.conftest import make_post

MARIA = RegionSpec("maria", frozenset({("PR", "*")}),
                   frozenset({"Puerto Rico", "PR"}))


class TestClassifyLocal:
    def test_profile_with_region_alias(self, small_index):
        assert classify_local("San Juan, PR", MARIA, small_index) == (True, "matched_alias")

    def test_profile_outside_region(self, small_index):
        assert classify_local("Chicago, IL", MARIA, small_index) == (False, "no_match")

    def test_missing_profile(self, small_index):
        assert classify_local(None, MARIA, small_index) == (False, "no_profile")
        assert classify_local("   ", MARIA, small_index) == (False, "no_profile")

    def test_in_region_city_name_matches(self, small_index):
        region = RegionSpec("maria", frozenset({("PR", "*")}), frozenset())
        got, provenance = classify_local("living in guayama!", region, small_index)
        assert got and provenance == "matched_alias"

    def test_token_boundary_matching(self, small_index):
        # "pr" must not fire inside "priceless"
        assert classify_local("priceless views", MARIA, small_index)[0] is False
        assert classify_local("PR resident", MARIA, small_index)[0] is True

    def test_monotone_in_aliases(self, small_index):
        smaller = RegionSpec("maria", frozenset({("PR", "*")}), frozenset())
        larger = RegionSpec("maria", frozenset({("PR", "*")}),
                            frozenset({"Boricua"}))
        for profile in ("Boricua al fin", "San Juan", "nowhere"):
            if classify_local(profile, smaller, small_index)[0]:
                assert classify_local(profile, larger, small_index)[0]


class TestClassifyOrganization:
    def test_keyword_match(self):
        meta = {"name": "County Weather Service", "description": "official alerts"}
        assert classify_organization(meta) == (True, "keyword_match")

    def test_empty_metadata(self):
        assert classify_organization(None) == (False, "no_metadata")
        assert classify_organization({}) == (False, "no_metadata")

    def test_ratio_threshold_inclusive(self):
        rules = OrganizationRules(name_keywords=(), description_keywords=(),
                                  follower_friend_ratio=10.0)
        exactly = {"name": "x", "description": "y", "followers": 1000, "friends": 100}
        assert classify_organization(exactly, rules) == (True, "ratio_threshold")
        below = {"name": "x", "description": "y", "followers": 999, "friends": 100}
        assert classify_organization(below, rules) == (False, "no_match")

    def test_rule_file_round_trip(self, tmp_path):
        path = tmp_path / "rules.json"
        path.write_text('{"name_keywords": ["bot"], "description_keywords": [],'
                        ' "follower_friend_ratio": 5.0}')
        rules = OrganizationRules.from_file(path)
        assert classify_organization({"name": "storm bot"}, rules)[0] is True
        assert classify_organization({"name": "weather watcher"}, rules)[0] is False

    def test_deterministic(self):
        meta = {"name": "Relief Agency", "description": "", "followers": 1, "friends": 1}
        results = {classify_organization(meta) for _ in range(5)}
        assert len(results) == 1


def posts_with_counts(counts, event="maria"):
    posts = []
    for author, count in counts.items():
        for i in range(count):
            posts.append(make_post([("x", 0, "root", "O")],
                                   post_id=f"{author}-{i}", author_id=author,
                                   event_id=event, timestamp=1505908800 + i))
    return posts


class TestSelectActiveAuthors:
    def test_hundred_distinct_counts(self):
        counts = {f"a{i:03d}": i + 1 for i in range(100)}
        active = select_active_authors(posts_with_counts(counts))["maria"]
        # nearest-rank: threshold is the 95th smallest count, so the author
        # at the percentile value plus the five above it are kept
        assert active == {f"a{i:03d}" for i in range(94, 100)}
        assert len(active) >= 5

    def test_all_equal_counts(self):
        counts = {f"a{i}": 3 for i in range(10)}
        active = select_active_authors(posts_with_counts(counts))["maria"]
        assert active == set(counts)

    def test_skewed_counts_match_sort_oracle(self):
        rng = random.Random(51)
        counts = {f"a{i}": rng.choice([1, 1, 1, 2, 3, 5, 8, 40]) for i in range(200)}
        active = select_active_authors(posts_with_counts(counts))["maria"]
        ordered = sorted(counts.values())
        import math
        threshold = ordered[math.ceil(0.95 * len(ordered)) - 1]
        assert active == {a for a, c in counts.items() if c >= threshold}

    def test_order_invariant(self):
        rng = random.Random(52)
        counts = {f"a{i}": rng.randint(1, 30) for i in range(50)}
        posts = posts_with_counts(counts)
        a = select_active_authors(posts)
        rng.shuffle(posts)
        b = select_active_authors(posts)
        assert a == b

    def test_nearest_rank_helper(self):
        assert nearest_rank_percentile([1, 2, 3, 4], 50) == 2
        assert nearest_rank_percentile([5], 95) == 5
        with pytest.raises(ValueError):
            nearest_rank_percentile([], 95)


ENTRY = GazetteerEntry(1, "Ponce", (), "P", "PPL", "PR", "113", 152634, 18.0, -66.6)


def loc_mention(author, day, location_id=1):
    entry = GazetteerEntry(location_id, "Ponce", (), "P", "PPL", "PR", "113",
                           152634, 18.0, -66.6)
    return LocationMention(
        post_id=f"{author}-{day}", span=(1, 1), surface="Ponce", entry=entry,
        event_id="maria", timestamp=day * SECONDS_PER_DAY + 60, author_id=author)


class TestPostedInAllPhases:
    PEAKS = {1: PeakInfo(peak_day=10, t_buffer=1)}

    def test_missing_during_phase(self):
        mentions = [loc_mention("a", 2), loc_mention("a", 20)]
        assert not posted_in_all_phases("a", "maria", mentions, self.PEAKS)

    def test_one_post_per_phase(self):
        mentions = [loc_mention("a", 2), loc_mention("a", 10), loc_mention("a", 20)]
        assert posted_in_all_phases("a", "maria", mentions, self.PEAKS)

    def test_synthetic_roster_matches_set_cover_oracle(self):
        rng = random.Random(61)
        mentions = []
        for i in range(40):
            author = f"a{i}"
            for _ in range(rng.randint(1, 6)):
                mentions.append(loc_mention(author, rng.randint(0, 25)))
        for i in range(40):
            author = f"a{i}"
            phases = set()
            for m in mentions:
                if m.author_id != author:
                    continue
                day = int(m.timestamp // SECONDS_PER_DAY)
                phases.add("pre" if day < 9 else ("post" if day > 11 else "during"))
            expected = phases == {"pre", "during", "post"}
            assert posted_in_all_phases(author, "maria", mentions, self.PEAKS) == expected


class TestBuildAuthorProfiles:
    def test_profiles_assembled(self, small_index):
        posts = [
            make_post([("x", 0, "root", "O")], post_id="p1", author_id="local1",
                      profile="San Juan, Puerto Rico"),
            make_post([("x", 0, "root", "O")], post_id="p2", author_id="org1",
                      metadata={"name": "Storm News", "description": ""}),
            make_post([("x", 0, "root", "O")], post_id="p3", author_id="nobody"),
        ]
        profiles = build_author_profiles(posts, {"maria": MARIA}, small_index)
        assert profiles["local1"].is_local
        assert profiles["org1"].is_organization
        assert profiles["nobody"].local_provenance == "no_profile"
        assert profiles["nobody"].organization_provenance == "no_metadata"
        assert profiles["local1"].post_count_per_event == {"maria": 1}


class TestLocalWithoutIndex:
    def test_alias_only_matching(self):
        region = RegionSpec("maria", frozenset({("PR", "*")}),
                            frozenset({"Puerto Rico", "PR"}))
        assert classify_local("San Juan, PR", region, None) == (True, "matched_alias")
        assert classify_local("Guayama life", region, None) == (False, "no_match")
