"""Author-level predicates: locality, organization status, activity selection."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .corpus import AnnotatedPost
from .gazetteer import GazetteerIndex, RegionSpec
from .mentions import LocationMention
from .timeline import Phase, peak_for, phase_of

_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)


def _word_normalize(text: str) -> str:
    """Lowercased words joined by single spaces, for token-boundary matching."""
    return " ".join(_WORD_RE.findall(text.casefold()))


def _contains_phrase(haystack_norm: str, phrase: str) -> bool:
    phrase_norm = _word_normalize(phrase)
    if not phrase_norm:
        return False
    return f" {phrase_norm} " in f" {haystack_norm} "


def classify_local(profile_location: Optional[str], region: RegionSpec,
                   index: Optional[GazetteerIndex] = None,
                   ) -> tuple[bool, str]:
    """Local iff the profile names the region or any in-region city.

    Matching is case-folded and token-boundary based. Provenance is one of
    matched_alias, no_profile, no_match.
    """
    if profile_location is None or not profile_location.strip():
        return False, "no_profile"
    haystack = _word_normalize(profile_location)
    for alias in sorted(region.local_name_aliases):
        if _contains_phrase(haystack, alias):
            return True, "matched_alias"
    if index is not None:
        for name in sorted(index.names_in_region(region)):
            if _contains_phrase(haystack, name):
                return True, "matched_alias"
    return False, "no_match"


@dataclass(frozen=True)
class OrganizationRules:
    """Editable rule file for the organization heuristic."""
    name_keywords: tuple[str, ...] = (
        "news", "weather", "agency", "dept", "department", "official",
        "rescue", "relief", "service", "emergency", "gov",
    )
    description_keywords: tuple[str, ...] = (
        "official", "agency", "news", "alerts", "relief", "rescue",
        "nonprofit", "organization",
    )
    follower_friend_ratio: float = 20.0

    @classmethod
    def from_file(cls, path) -> "OrganizationRules":
        with open(path, encoding="utf-8") as handle:
            raw = json.load(handle)
        return cls(
            name_keywords=tuple(raw.get("name_keywords", cls.name_keywords)),
            description_keywords=tuple(raw.get("description_keywords", cls.description_keywords)),
            follower_friend_ratio=float(raw.get("follower_friend_ratio", cls.follower_friend_ratio)),
        )


def classify_organization(author_metadata: Optional[Mapping],
                          rules: OrganizationRules = OrganizationRules(),
                          ) -> tuple[bool, str]:
    """Deterministic rule score over profile metadata.

    Keyword hit in name/description, or follower/friend ratio at or above
    the threshold (inclusive), marks an organization.
    """
    if not author_metadata:
        return False, "no_metadata"
    name = _word_normalize(str(author_metadata.get("name", "")))
    description = _word_normalize(str(author_metadata.get("description", "")))
    for kw in rules.name_keywords:
        if _contains_phrase(name, kw):
            return True, "keyword_match"
    for kw in rules.description_keywords:
        if _contains_phrase(description, kw):
            return True, "keyword_match"
    followers = author_metadata.get("followers")
    friends = author_metadata.get("friends")
    if isinstance(followers, (int, float)) and isinstance(friends, (int, float)) and friends > 0:
        if followers / friends >= rules.follower_friend_ratio:
            return True, "ratio_threshold"
    return False, "no_match"


def nearest_rank_percentile(values: Sequence[float], percentile: float) -> float:
    """Nearest-rank percentile: the value at rank ceil(p/100 * n) of the
    ascending sort."""
    if not values:
        raise ValueError("empty sample")
    ordered = sorted(values)
    rank = max(1, math.ceil(percentile / 100.0 * len(ordered)))
    return ordered[min(rank, len(ordered)) - 1]


def post_counts_by_event(posts: Iterable[AnnotatedPost]) -> dict[str, dict[str, int]]:
    counts: dict[str, dict[str, int]] = {}
    for post in posts:
        per_event = counts.setdefault(post.event_id, {})
        per_event[post.author_id] = per_event.get(post.author_id, 0) + 1
    return counts


def select_active_authors(posts: Iterable[AnnotatedPost],
                          percentile: float = 95.0) -> dict[str, set[str]]:
    """Per event, authors whose post volume is at or above the percentile
    of all authors' volumes (nearest-rank); ties at the threshold kept."""
    counts = post_counts_by_event(posts)
    active: dict[str, set[str]] = {}
    for event, per_author in counts.items():
        threshold = nearest_rank_percentile(list(per_author.values()), percentile)
        active[event] = {a for a, c in per_author.items() if c >= threshold}
    return active


def phases_covered(author_id: str, event_id: str,
                   mentions: Iterable[LocationMention],
                   peaks: Mapping) -> set[Phase]:
    covered = set()
    for m in mentions:
        if m.author_id != author_id or m.event_id != event_id:
            continue
        peak = peak_for(peaks, m.event_id, m.location_id)
        if peak is None:
            continue
        covered.add(phase_of(m.timestamp, peak))
    return covered


def posted_in_all_phases(author_id: str, event_id: str,
                         mentions: Iterable[LocationMention],
                         peaks: Mapping) -> bool:
    """True iff the author's mentions cover Pre, During and Post."""
    return phases_covered(author_id, event_id, mentions, peaks) == {
        Phase.PRE, Phase.DURING, Phase.POST}


@dataclass
class AuthorProfile:
    author_id: str
    is_local: bool
    local_provenance: str
    is_organization: bool
    organization_provenance: str
    post_count_per_event: dict = field(default_factory=dict)
    is_active_per_event: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "author_id": self.author_id,
            "is_local": self.is_local,
            "local_provenance": self.local_provenance,
            "is_organization": self.is_organization,
            "organization_provenance": self.organization_provenance,
            "post_count_per_event": dict(sorted(self.post_count_per_event.items())),
            "is_active_per_event": dict(sorted(self.is_active_per_event.items())),
        }


def build_author_profiles(posts: Sequence[AnnotatedPost],
                          regions: Mapping[str, RegionSpec],
                          index: Optional[GazetteerIndex] = None,
                          rules: OrganizationRules = OrganizationRules(),
                          percentile: float = 95.0) -> dict[str, AuthorProfile]:
    """Assemble one profile per author over the whole corpus.

    Locality uses the region of the author's first event (events in this
    artifact have disjoint author populations in practice).
    """
    counts = post_counts_by_event(posts)
    active = select_active_authors(posts, percentile)
    latest_meta: dict[str, tuple[Optional[str], Optional[Mapping], str]] = {}
    for post in posts:
        known = latest_meta.get(post.author_id)
        if known is None or (known[0] is None and known[1] is None):
            latest_meta[post.author_id] = (
                post.author_profile_location, post.author_metadata, post.event_id)

    profiles = {}
    for author_id, (profile_loc, metadata, event_id) in latest_meta.items():
        region = regions.get(event_id)
        if region is not None:
            is_local, local_prov = classify_local(profile_loc, region, index)
        else:
            is_local, local_prov = False, "no_profile" if not profile_loc else "no_match"
        is_org, org_prov = classify_organization(metadata, rules)
        profiles[author_id] = AuthorProfile(
            author_id=author_id,
            is_local=is_local, local_provenance=local_prov,
            is_organization=is_org, organization_provenance=org_prov,
            post_count_per_event={
                e: per.get(author_id, 0) for e, per in counts.items()
                if author_id in per},
            is_active_per_event={
                e: author_id in members for e, members in active.items()
                if author_id in counts.get(e, {})},
        )
    return profiles
