"""Per-location mention timelines, attention peaks, and phase assignment.

Days are UTC calendar days (integer days since the epoch). The peak of a
series is the earliest day attaining the maximal raw mention count; phases
partition time around it with a symmetric buffer.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .corpus import day_to_iso, utc_day
from .mentions import LocationMention


class EmptyInput(ValueError):
    pass


class Phase(enum.Enum):
    PRE = "Pre"
    DURING = "During"
    POST = "Post"


@dataclass(frozen=True)
class TimelineBin:
    day: int
    mention_count: int
    descriptor_count: int


@dataclass(frozen=True)
class TimelineSeries:
    location_id: int
    event_id: str
    bins: tuple[TimelineBin, ...]   # contiguous days, zero-filled

    @property
    def total_mentions(self) -> int:
        return sum(b.mention_count for b in self.bins)

    @property
    def active_dates(self) -> int:
        return sum(1 for b in self.bins if b.mention_count > 0)


@dataclass(frozen=True)
class PeakInfo:
    peak_day: int
    t_buffer: int = 1

    @property
    def during_start(self) -> int:
        return self.peak_day - self.t_buffer

    @property
    def during_end(self) -> int:
        return self.peak_day + self.t_buffer


def build_timeline(mentions: Sequence[LocationMention]) -> TimelineSeries:
    """Daily counts for one location, zero-filled between first and last
    active day. descriptor_count counts mentions with has_descriptor."""
    if not mentions:
        raise EmptyInput("no mentions to bin")
    locations = {m.location_id for m in mentions}
    events = {m.event_id for m in mentions}
    if len(locations) != 1 or len(events) != 1:
        raise ValueError("mentions must share one location and one event")
    counts: dict[int, list[int]] = {}
    for m in mentions:
        day = utc_day(m.timestamp)
        bucket = counts.setdefault(day, [0, 0])
        bucket[0] += 1
        if m.has_descriptor:
            bucket[1] += 1
    first, last = min(counts), max(counts)
    bins = tuple(
        TimelineBin(day, *counts.get(day, (0, 0)))
        for day in range(first, last + 1)
    )
    return TimelineSeries(location_id=locations.pop(), event_id=events.pop(), bins=bins)


def find_peak(series: TimelineSeries, t_buffer: int = 1) -> PeakInfo:
    """Earliest day attaining the maximal mention count."""
    if not series.bins:
        raise EmptyInput("series has no bins")
    best = max(series.bins, key=lambda b: (b.mention_count, -b.day))
    return PeakInfo(peak_day=best.day, t_buffer=t_buffer)


def phase_of_day(day: int, peak: PeakInfo) -> Phase:
    if day < peak.peak_day - peak.t_buffer:
        return Phase.PRE
    if day > peak.peak_day + peak.t_buffer:
        return Phase.POST
    return Phase.DURING


def phase_of(timestamp: float, peak: PeakInfo) -> Phase:
    """Phase of a UTC timestamp relative to a location's peak."""
    return phase_of_day(utc_day(timestamp), peak)


def peak_for(peaks: Mapping, event_id: str, location_id: int) -> Optional["PeakInfo"]:
    """Look up a peak keyed by (event_id, location_id) or plain location_id."""
    peak = peaks.get((event_id, location_id))
    if peak is None:
        peak = peaks.get(location_id)
    return peak


def filter_sparse_locations(series_set: Iterable[TimelineSeries],
                            min_dates: int = 5) -> list[TimelineSeries]:
    """Keep locations mentioned on at least `min_dates` separate dates."""
    return [s for s in series_set if s.active_dates >= min_dates]


def descriptor_rate_series(series: TimelineSeries) -> list[tuple[int, Optional[float]]]:
    """Per-day descriptor rate d_t/f_t; None (not 0) on zero-mention days."""
    return [
        (b.day, b.descriptor_count / b.mention_count if b.mention_count else None)
        for b in series.bins
    ]


def figure_rows(series: TimelineSeries, peak: PeakInfo) -> list[dict]:
    """Plot-data rows: day, log10 frequency, descriptor rate, phase."""
    import math

    rows = []
    for b in series.bins:
        rate = b.descriptor_count / b.mention_count if b.mention_count else None
        rows.append({
            "day": day_to_iso(b.day),
            "log10_frequency": math.log10(b.mention_count) if b.mention_count else None,
            "descriptor_rate": rate,
            "phase": phase_of_day(b.day, peak).value,
            "is_peak": b.day == peak.peak_day,
        })
    return rows
