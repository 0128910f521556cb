"""Location mention extraction: BIO runs filtered through region-scoped resolution."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Optional

from .corpus import AnnotatedPost
from .gazetteer import GazetteerEntry, GazetteerIndex, Outcome, RegionSpec, resolve


@dataclass(frozen=True)
class LocationMention:
    """A resolved location reference; the unit of analysis (one regression row).

    `is_context` marks mentions that sit inside another mention's descriptor
    phrase; they stay extractable but are excluded from analysis samples.
    """
    post_id: str
    span: tuple[int, int]       # token index range, 1-based inclusive
    surface: str
    entry: GazetteerEntry
    event_id: str
    timestamp: float
    author_id: str
    group_id: Optional[str] = None
    has_descriptor: bool = False
    descriptor_kind: Optional[str] = None
    is_context: bool = False

    @property
    def location_id(self) -> int:
        return self.entry.geoname_id

    @property
    def key(self) -> tuple[str, int, int]:
        return (self.post_id, self.span[0], self.span[1])

    def with_descriptor(self, kind: Optional[str]) -> "LocationMention":
        return replace(self, has_descriptor=kind is not None, descriptor_kind=kind)


def location_spans(post: AnnotatedPost) -> list[tuple[int, int]]:
    """Contiguous B/I-LOCATION runs as (start, end) token index pairs."""
    spans = []
    start = None
    for token in post.tokens:
        if token.ner == "B-LOCATION":
            if start is not None:
                spans.append((start, token.index - 1))
            start = token.index
        elif token.ner == "I-LOCATION":
            continue  # validated BIO: always continues an open LOCATION run
        else:
            if start is not None:
                spans.append((start, token.index - 1))
                start = None
    if start is not None:
        spans.append((start, post.tokens[-1].index))
    return spans


def span_surface(post: AnnotatedPost, span: tuple[int, int]) -> str:
    return " ".join(post.tokens[i - 1].form for i in range(span[0], span[1] + 1))


def extract_mentions(post: AnnotatedPost, region: RegionSpec,
                     index: GazetteerIndex) -> list[LocationMention]:
    """Candidate spans that resolve unambiguously within the region, in span order."""
    mentions = []
    for span in location_spans(post):
        surface = span_surface(post, span)
        result = resolve(surface, region, index)
        if not result.resolved:
            continue
        mentions.append(LocationMention(
            post_id=post.post_id, span=span, surface=surface,
            entry=result.entry, event_id=post.event_id,
            timestamp=post.timestamp, author_id=post.author_id,
            group_id=post.group_id,
        ))
    return mentions


@dataclass
class ExtractionStats:
    candidates: int = 0
    kept: int = 0
    dropped_by_reason: dict = None

    def __post_init__(self):
        if self.dropped_by_reason is None:
            self.dropped_by_reason = {
                "NotFound": 0, "Ambiguous": 0, "OutsideRegion": 0, "FeatureFiltered": 0,
            }

    def to_dict(self) -> dict:
        return {"candidates": self.candidates, "kept": self.kept,
                "dropped_by_reason": dict(self.dropped_by_reason)}


def extraction_stats(posts: Iterable[AnnotatedPost], region: RegionSpec,
                     index: GazetteerIndex) -> ExtractionStats:
    """Partition candidate spans into kept vs dropped-by-reason.

    kept + sum(dropped_by_reason) == candidates, always. A NotFound whose
    name exists in the dump outside the mention stratum counts as
    FeatureFiltered.
    """
    stats = ExtractionStats()
    for post in posts:
        for span in location_spans(post):
            stats.candidates += 1
            surface = span_surface(post, span)
            result = resolve(surface, region, index)
            if result.resolved:
                stats.kept += 1
            elif result.outcome is Outcome.NOT_FOUND and index.feature_filtered(surface):
                stats.dropped_by_reason["FeatureFiltered"] += 1
            else:
                stats.dropped_by_reason[result.outcome.value] += 1
    return stats
