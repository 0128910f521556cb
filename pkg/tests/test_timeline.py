import random

import pytest

from geosalience.corpus import SECONDS_PER_DAY
from geosalience.gazetteer import GazetteerEntry
from geosalience.mentions import LocationMention
from geosalience.timeline import (EmptyInput, PeakInfo, Phase, TimelineBin,
                                  TimelineSeries, build_timeline,
                                  descriptor_rate_series,
                                  filter_sparse_locations, find_peak,
                                  phase_of, phase_of_day)

ENTRY = GazetteerEntry(geoname_id=1, canonical_name="Ponce", alternate_names=(),
                       feature_class="P", feature_code="PPL", country_code="PR",
                       admin1_code="113", population=152634, latitude=18.0,
                       longitude=-66.6)


def mention(day, descriptor=False, post="p", span=(1, 1)):
    return LocationMention(
        post_id=f"{post}{day}-{random.random()}", span=span, surface="Ponce",
        entry=ENTRY, event_id="maria", timestamp=day * SECONDS_PER_DAY + 3600,
        author_id="a1", has_descriptor=descriptor,
        descriptor_kind="STATE" if descriptor else None)


def series_of(counts, start_day=0):
    bins = tuple(TimelineBin(start_day + i, c, 0) for i, c in enumerate(counts))
    return TimelineSeries(location_id=1, event_id="maria", bins=bins)


class TestBuildTimeline:
    def test_single_day(self):
        ms = [mention(5), mention(5, descriptor=True), mention(5)]
        series = build_timeline(ms)
        assert len(series.bins) == 1
        assert series.bins[0] == TimelineBin(5, 3, 1)

    def test_zero_fill_between_active_days(self):
        series = build_timeline([mention(0), mention(2)])
        assert [b.day for b in series.bins] == [0, 1, 2]
        assert series.bins[1] == TimelineBin(1, 0, 0)

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            build_timeline([])

    def test_counts_match_group_by_oracle(self):
        rng = random.Random(17)
        ms = [mention(rng.randint(0, 30), descriptor=rng.random() < 0.4)
              for _ in range(200)]
        series = build_timeline(ms)
        counts, descs = {}, {}
        for m in ms:
            d = int(m.timestamp // SECONDS_PER_DAY)
            counts[d] = counts.get(d, 0) + 1
            if m.has_descriptor:
                descs[d] = descs.get(d, 0) + 1
        for b in series.bins:
            assert b.mention_count == counts.get(b.day, 0)
            assert b.descriptor_count == descs.get(b.day, 0)
        assert series.total_mentions == len(ms)  # conservation

    def test_mixed_locations_rejected(self):
        other = LocationMention(
            post_id="x", span=(1, 1), surface="Lajas",
            entry=GazetteerEntry(2, "Lajas", (), "P", "PPL", "PR", "079",
                                 4116, 18.0, -67.0),
            event_id="maria", timestamp=0.0, author_id="a")
        with pytest.raises(ValueError):
            build_timeline([mention(0), other])


class TestFindPeak:
    def test_argmax(self):
        assert find_peak(series_of([2, 5, 3])).peak_day == 1

    def test_tie_breaks_earliest(self):
        assert find_peak(series_of([1, 1, 1])).peak_day == 0

    def test_matches_scan_oracle(self):
        rng = random.Random(23)
        for _ in range(50):
            counts = [rng.randint(0, 9) for _ in range(rng.randint(1, 40))]
            got = find_peak(series_of(counts)).peak_day
            assert got == counts.index(max(counts))

    def test_invariant_under_zero_padding(self):
        counts = [0, 3, 7, 2]
        base = find_peak(series_of(counts)).peak_day
        padded = find_peak(series_of(counts + [0, 0, 0])).peak_day
        assert base == padded


class TestPhaseOf:
    def test_paper_definition(self):
        peak = PeakInfo(peak_day=5, t_buffer=1)
        assert phase_of_day(3, peak) is Phase.PRE
        assert phase_of_day(4, peak) is Phase.DURING
        assert phase_of_day(7, peak) is Phase.POST
        assert phase_of(3 * SECONDS_PER_DAY + 100, peak) is Phase.PRE

    def test_zero_buffer(self):
        peak = PeakInfo(peak_day=5, t_buffer=0)
        assert phase_of_day(4, peak) is Phase.PRE
        assert phase_of_day(5, peak) is Phase.DURING
        assert phase_of_day(6, peak) is Phase.POST

    def test_partition_matches_interval_oracle(self):
        rng = random.Random(31)
        for _ in range(100):
            peak_day = rng.randint(0, 30)
            buffer = rng.choice([0, 1, 2])
            peak = PeakInfo(peak_day=peak_day, t_buffer=buffer)
            for day in range(-5, 40):
                got = phase_of_day(day, peak)
                if day < peak_day - buffer:
                    expected = Phase.PRE
                elif day > peak_day + buffer:
                    expected = Phase.POST
                else:
                    expected = Phase.DURING
                assert got is expected
            # exactly one phase per day: implied by the branch structure


class TestFilterSparse:
    def test_four_dates_dropped(self):
        series = build_timeline([mention(d) for d in (0, 1, 2, 3)])
        assert filter_sparse_locations([series], min_dates=5) == []

    def test_five_dates_kept(self):
        series = build_timeline([mention(d) for d in (0, 1, 2, 3, 4)])
        assert filter_sparse_locations([series], min_dates=5) == [series]

    def test_zero_days_do_not_count(self):
        series = build_timeline([mention(d) for d in (0, 2, 4, 6, 8)])
        assert series.active_dates == 5
        assert filter_sparse_locations([series]) == [series]

    def test_mixed_set_matches_counting_oracle(self):
        rng = random.Random(41)
        all_series = []
        for _ in range(30):
            days = sorted(rng.sample(range(0, 20), rng.randint(1, 12)))
            all_series.append(build_timeline([mention(d) for d in days]))
        kept = filter_sparse_locations(all_series, min_dates=5)
        oracle = [s for s in all_series
                  if sum(1 for b in s.bins if b.mention_count) >= 5]
        assert kept == oracle


class TestDescriptorRate:
    def test_quarter_rate(self):
        series = TimelineSeries(1, "maria", (TimelineBin(0, 4, 1),))
        assert descriptor_rate_series(series) == [(0, 0.25)]

    def test_zero_bin_undefined(self):
        series = TimelineSeries(1, "maria", (TimelineBin(0, 0, 0),))
        assert descriptor_rate_series(series) == [(0, None)]

    def test_elementwise_division_oracle(self):
        rng = random.Random(43)
        bins = []
        for d in range(25):
            f = rng.randint(0, 6)
            bins.append(TimelineBin(d, f, rng.randint(0, f) if f else 0))
        series = TimelineSeries(1, "maria", tuple(bins))
        rates = dict(descriptor_rate_series(series))
        for b in bins:
            expected = b.descriptor_count / b.mention_count if b.mention_count else None
            assert rates[b.day] == expected


class TestPeakLookup:
    def test_peak_for_supports_both_key_shapes(self):
        from geosalience.timeline import peak_for
        scoped = {("maria", 1): PeakInfo(10, 1)}
        flat = {1: PeakInfo(12, 1)}
        assert peak_for(scoped, "maria", 1).peak_day == 10
        assert peak_for(flat, "maria", 1).peak_day == 12
        assert peak_for(scoped, "harvey", 1) is None
