"""Explanatory-variable construction per location mention.

Each analysis variant populates exactly its own variable subset:

* rq1_grouped — grouped (Facebook-style) corpora: location importance,
  author in-group activity, group locality and size, location/group fixed
  effects.
* rq1_event — event (Twitter-style) corpora: location importance, author
  organization/locality, URL and media flags, location/event fixed effects.
* rq2a — rq1_event plus the temporal variables (days since event start,
  during-peak, post-peak).
* rq2b — rq2a plus author history and audience-engagement variables,
  restricted to active authors who posted in every phase.

Unknown author locality/organization (no usable metadata) is kept as a
third level through the paired ``*_unknown`` indicators rather than being
imputed false. Every "prior" feature is a function of strictly earlier
timestamps only.
"""

from __future__ import annotations

import logging
import math
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .corpus import AnnotatedPost, utc_day
from .gazetteer import GazetteerIndex, resolve_best
from .mentions import LocationMention
from .timeline import Phase, peak_for, phase_of
from .authors import AuthorProfile, posted_in_all_phases

logger = logging.getLogger(__name__)

RARE = "RARE"

VARIANTS = ("rq1_grouped", "rq1_event", "rq2a", "rq2b")


class MissingPrerequisite(ValueError):
    pass


class DegenerateColumn(Warning):
    pass


@dataclass(frozen=True)
class AnalysisSpec:
    variant: str
    rare_threshold: int = 20
    author_rare_threshold: int = 2      # single-post authors fold into RARE
    exclude_context_mentions: bool = True
    log_prior_mentions: bool = True
    standardize: bool = True
    author_fixed_effects: bool = False  # robustness: author FE replaces author flags
    active_percentile: float = 95.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown analysis variant {self.variant!r}")


def analysis_variables(spec: AnalysisSpec) -> dict[str, list[str]]:
    """Declared variable sets of the variant: numeric, binary, categorical."""
    if spec.variant == "rq1_grouped":
        numeric = ["prior_location_mentions", "author_group_posts", "group_size"]
        binary = ["location_local_to_group"]
        categorical = ["location_id", "group_id"]
        return {"numeric": numeric, "binary": binary, "categorical": categorical}

    numeric = ["prior_location_mentions"]
    binary = ["is_organization", "is_organization_unknown",
              "is_local", "is_local_unknown", "has_url", "has_media"]
    categorical = ["location_id", "event_id"]
    if spec.variant in ("rq2a", "rq2b"):
        numeric.append("days_since_start")
        binary.extend(["during_peak", "post_peak"])
    if spec.variant == "rq2b":
        numeric.extend(["author_event_posts", "author_event_location_posts",
                        "prior_engagement", "delta_prior_engagement"])
        binary.append("prior_engagement_missing")
    if spec.author_fixed_effects:
        for name in ("is_organization", "is_organization_unknown",
                     "is_local", "is_local_unknown"):
            if name in binary:
                binary.remove(name)
        categorical.append("author_id")
    return {"numeric": numeric, "binary": binary, "categorical": categorical}


@dataclass(frozen=True)
class FeatureRow:
    key: tuple[str, int, int]           # (post_id, span_start, span_end)
    y: int
    numeric: dict
    binary: dict
    categorical: dict


@dataclass(frozen=True)
class GroupInfo:
    group_id: str
    admin_units: frozenset
    size: int = 0

    def contains(self, country_code: str, admin1_code: str) -> bool:
        return ((country_code, admin1_code) in self.admin_units
                or (country_code, "*") in self.admin_units)


def build_group_info(posts: Iterable[AnnotatedPost],
                     group_admin_units: Mapping[str, frozenset]) -> dict[str, GroupInfo]:
    """Group size = unique members who posted in the group."""
    members: dict[str, set] = {}
    for post in posts:
        if post.group_id is not None:
            members.setdefault(post.group_id, set()).add(post.author_id)
    return {
        gid: GroupInfo(group_id=gid,
                       admin_units=frozenset(group_admin_units.get(gid, ())),
                       size=len(authors))
        for gid, authors in members.items()
    }


class EngagementTable:
    """Author-day engagement z-scores for one event.

    e(a, t) is the mean over an author's day-t posts of log1p(raw
    engagement), z-scored across all author-days of the event. Zero
    variance (including a single author-day) maps everything to 0.
    """

    def __init__(self, zscores: Mapping[tuple[str, int], float]):
        self._z = dict(zscores)

    def zscore(self, author_id: str, day: int) -> Optional[float]:
        return self._z.get((author_id, day))

    def features(self, author_id: str, day: int) -> tuple[float, float, bool]:
        """(prior_engagement, delta, missing): z at t-1, change from t-2 to
        t-1; missing days contribute 0 and set the indicator."""
        z1 = self.zscore(author_id, day - 1)
        z2 = self.zscore(author_id, day - 2)
        missing = z1 is None
        prior = z1 if z1 is not None else 0.0
        delta = (z1 if z1 is not None else 0.0) - (z2 if z2 is not None else 0.0)
        return prior, delta, missing


def build_engagement_table(posts: Iterable[AnnotatedPost]) -> EngagementTable:
    sums: dict[tuple[str, int], list[float]] = {}
    for post in posts:
        if post.engagement is None:
            continue
        key = (post.author_id, post.day)
        bucket = sums.setdefault(key, [0.0, 0.0])
        bucket[0] += math.log1p(post.engagement)
        bucket[1] += 1.0
    if not sums:
        return EngagementTable({})
    means = {key: total / count for key, (total, count) in sums.items()}
    values = np.array(list(means.values()))
    mu = float(values.mean())
    sd = float(values.std())
    if sd == 0.0:
        return EngagementTable({key: 0.0 for key in means})
    return EngagementTable({key: (v - mu) / sd for key, v in means.items()})


def engagement_features(table: EngagementTable, author_id: str,
                        day: int) -> tuple[float, float, bool]:
    return table.features(author_id, day)


def _prior_count(sorted_timestamps: list[float], timestamp: float) -> int:
    return bisect_left(sorted_timestamps, timestamp)


def build_rows(posts: Sequence[AnnotatedPost],
               mentions: Sequence[LocationMention],
               analysis: AnalysisSpec,
               *,
               peaks: Optional[Mapping] = None,
               profiles: Optional[Mapping[str, AuthorProfile]] = None,
               groups: Optional[Mapping[str, GroupInfo]] = None,
               index: Optional[GazetteerIndex] = None,
               ) -> list[FeatureRow]:
    """Materialize one FeatureRow per analysis-sample mention.

    Raises MissingPrerequisite when the variant needs peaks, profiles,
    group info or a gazetteer index that was not supplied.
    """
    variables = analysis_variables(analysis)
    needs_peaks = analysis.variant in ("rq2a", "rq2b")
    if needs_peaks and peaks is None:
        raise MissingPrerequisite(f"{analysis.variant} requires peaks")
    if analysis.variant != "rq1_grouped" and profiles is None and not analysis.author_fixed_effects:
        raise MissingPrerequisite(f"{analysis.variant} requires author profiles")
    if analysis.variant == "rq1_grouped" and (groups is None or index is None):
        raise MissingPrerequisite("rq1_grouped requires group info and a gazetteer index")

    sample = [m for m in mentions
              if not (analysis.exclude_context_mentions and m.is_context)]
    if analysis.variant == "rq1_grouped":
        sample = [m for m in sample if m.group_id is not None]

    if analysis.variant == "rq2b":
        if profiles is None:
            raise MissingPrerequisite("rq2b requires author profiles")
        eligible = set()
        for author_id, profile in profiles.items():
            for event_id, active in profile.is_active_per_event.items():
                if active and posted_in_all_phases(author_id, event_id, sample, peaks):
                    eligible.add((author_id, event_id))
        sample = [m for m in sample if (m.author_id, m.event_id) in eligible]

    posts_by_id = {p.post_id: p for p in posts}
    event_start: dict[str, int] = {}
    for post in posts:
        day = post.day
        if post.event_id not in event_start or day < event_start[post.event_id]:
            event_start[post.event_id] = day

    # Strictly-prior counters: post timestamps per (event, author) and per
    # (event, author, location); mention replay for location frequency.
    author_event_posts: dict[tuple[str, str], list[float]] = {}
    for post in posts:
        author_event_posts.setdefault((post.event_id, post.author_id), []).append(post.timestamp)
    for stamps in author_event_posts.values():
        stamps.sort()
    author_group_totals: dict[tuple[str, str], int] = {}
    for post in posts:
        if post.group_id is not None:
            key = (post.group_id, post.author_id)
            author_group_totals[key] = author_group_totals.get(key, 0) + 1
    author_loc_posts: dict[tuple[str, str, int], list[float]] = {}
    seen_posts: set[tuple[str, int, str]] = set()
    for m in mentions:
        if analysis.exclude_context_mentions and m.is_context:
            continue
        dedup = (m.post_id, m.location_id, m.event_id)
        if dedup in seen_posts:
            continue
        seen_posts.add(dedup)
        author_loc_posts.setdefault(
            (m.event_id, m.author_id, m.location_id), []).append(m.timestamp)
    for stamps in author_loc_posts.values():
        stamps.sort()

    engagement_tables: dict[str, EngagementTable] = {}
    if analysis.variant == "rq2b":
        by_event: dict[str, list[AnnotatedPost]] = {}
        for post in posts:
            by_event.setdefault(post.event_id, []).append(post)
        engagement_tables = {e: build_engagement_table(ps) for e, ps in by_event.items()}

    ordered = sorted(sample, key=lambda m: (m.timestamp, m.post_id, m.span))
    scope_counts: dict[tuple[str, int], int] = {}
    pending: list[tuple[float, tuple[str, int]]] = []

    rows = []
    for mention in ordered:
        # Flush mentions with strictly earlier timestamps into the counters.
        while pending and pending[0][0] < mention.timestamp:
            _, key = pending.pop(0)
            scope_counts[key] = scope_counts.get(key, 0) + 1
        post = posts_by_id.get(mention.post_id)
        if post is None:
            raise MissingPrerequisite(f"mention {mention.key} has no post record")
        scope = mention.group_id if analysis.variant == "rq1_grouped" else mention.event_id
        scope_key = (scope, mention.location_id)
        prior_mentions = scope_counts.get(scope_key, 0)
        pending.append((mention.timestamp, scope_key))

        numeric: dict[str, float] = {}
        binary: dict[str, int] = {}
        categorical: dict[str, str] = {}

        value = float(prior_mentions)
        numeric["prior_location_mentions"] = math.log1p(value) if analysis.log_prior_mentions else value

        if analysis.variant == "rq1_grouped":
            group = groups.get(mention.group_id)
            if group is None:
                raise MissingPrerequisite(f"no group info for {mention.group_id!r}")
            numeric["author_group_posts"] = float(
                author_group_totals.get((mention.group_id, mention.author_id), 0))
            numeric["group_size"] = float(group.size)
            best = resolve_best(mention.surface, index)
            local = best is not None and group.contains(best.country_code, best.admin1_code)
            binary["location_local_to_group"] = int(local)
            categorical["location_id"] = str(mention.location_id)
            categorical["group_id"] = mention.group_id
        else:
            if not analysis.author_fixed_effects:
                profile = profiles.get(mention.author_id)
                if profile is None:
                    binary["is_organization"] = 0
                    binary["is_organization_unknown"] = 1
                    binary["is_local"] = 0
                    binary["is_local_unknown"] = 1
                else:
                    org_unknown = profile.organization_provenance == "no_metadata"
                    loc_unknown = profile.local_provenance == "no_profile"
                    binary["is_organization"] = int(profile.is_organization)
                    binary["is_organization_unknown"] = int(org_unknown)
                    binary["is_local"] = int(profile.is_local)
                    binary["is_local_unknown"] = int(loc_unknown)
            binary["has_url"] = int(post.has_url)
            binary["has_media"] = int(post.has_media)
            categorical["location_id"] = str(mention.location_id)
            categorical["event_id"] = mention.event_id
            if analysis.author_fixed_effects:
                categorical["author_id"] = mention.author_id

        if analysis.variant in ("rq2a", "rq2b"):
            peak = peak_for(peaks, mention.event_id, mention.location_id)
            if peak is None:
                raise MissingPrerequisite(
                    f"no peak for location {mention.location_id}")
            phase = phase_of(mention.timestamp, peak)
            binary["during_peak"] = int(phase is Phase.DURING)
            binary["post_peak"] = int(phase is Phase.POST)
            numeric["days_since_start"] = float(
                utc_day(mention.timestamp) - event_start[mention.event_id])

        if analysis.variant == "rq2b":
            stamps = author_event_posts.get((mention.event_id, mention.author_id), [])
            numeric["author_event_posts"] = math.log1p(_prior_count(stamps, mention.timestamp))
            loc_stamps = author_loc_posts.get(
                (mention.event_id, mention.author_id, mention.location_id), [])
            numeric["author_event_location_posts"] = math.log1p(
                _prior_count(loc_stamps, mention.timestamp))
            table = engagement_tables.get(mention.event_id, EngagementTable({}))
            prior_eng, delta_eng, missing = table.features(
                mention.author_id, utc_day(mention.timestamp))
            numeric["prior_engagement"] = prior_eng
            numeric["delta_prior_engagement"] = delta_eng
            binary["prior_engagement_missing"] = int(missing)

        ordered_numeric = {name: numeric[name] for name in variables["numeric"]}
        ordered_binary = {name: binary[name] for name in variables["binary"]}
        ordered_categorical = {name: categorical[name] for name in variables["categorical"]}
        rows.append(FeatureRow(
            key=mention.key, y=int(mention.has_descriptor),
            numeric=ordered_numeric, binary=ordered_binary,
            categorical=ordered_categorical))
    return rows


def bin_rare_categories(values: Sequence[str], threshold: int = 20,
                        ) -> tuple[list[str], dict[str, str]]:
    """Replace categories occurring fewer than `threshold` times with RARE.

    Returns the rewritten column and the recorded mapping.
    """
    counts: dict[str, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    mapping = {v: RARE for v, c in counts.items() if c < threshold}
    return [mapping.get(v, v) for v in values], mapping


def apply_rare_binning(rows: Sequence[FeatureRow], analysis: AnalysisSpec,
                       ) -> tuple[list[FeatureRow], dict[str, dict[str, str]]]:
    """RARE-bin every fixed-effect column of the built rows."""
    from dataclasses import replace

    if not rows:
        return list(rows), {}
    maps: dict[str, dict[str, str]] = {}
    new_columns: dict[str, list[str]] = {}
    for name in rows[0].categorical:
        threshold = (analysis.author_rare_threshold if name == "author_id"
                     else analysis.rare_threshold)
        column = [r.categorical[name] for r in rows]
        binned, mapping = bin_rare_categories(column, threshold)
        new_columns[name] = binned
        if mapping:
            maps[name] = mapping
    out = []
    for i, row in enumerate(rows):
        out.append(replace(row, categorical={
            name: new_columns[name][i] for name in row.categorical}))
    return out, maps


@dataclass(frozen=True)
class ColumnMeta:
    name: str
    kind: str                       # intercept | numeric | binary | onehot
    mean: float = 0.0
    sd: float = 1.0
    group: Optional[str] = None     # categorical column for onehot entries
    level: Optional[str] = None

    def to_dict(self) -> dict:
        out = {"name": self.name, "kind": self.kind}
        if self.kind == "numeric":
            out.update(mean=self.mean, sd=self.sd)
        if self.kind == "onehot":
            out.update(group=self.group, level=self.level)
        return out


@dataclass
class DesignMatrix:
    X: np.ndarray
    y: np.ndarray
    columns: list[ColumnMeta]
    row_keys: list[tuple]
    references: dict[str, str] = field(default_factory=dict)  # categorical -> reference level
    dropped: list[tuple[str, str]] = field(default_factory=list)
    standardized: bool = True

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def penalty_mask(self, penalize_fixed_effects: bool = True) -> np.ndarray:
        """True for columns subject to the penalty; the intercept never is."""
        mask = np.ones(len(self.columns), dtype=bool)
        for i, col in enumerate(self.columns):
            if col.kind == "intercept":
                mask[i] = False
            elif col.kind == "onehot" and not penalize_fixed_effects:
                mask[i] = False
        return mask

    def fixed_effect_flags(self) -> np.ndarray:
        return np.array([c.kind == "onehot" for c in self.columns])


def encode(rows: Sequence[FeatureRow], standardize_numeric: bool = True) -> DesignMatrix:
    """Dense design matrix: intercept, standardized numerics, binaries, and
    one-hot fixed effects with the first sorted level as the reference.

    Zero-variance columns are dropped with a warning and recorded.
    """
    if not rows:
        raise ValueError("no rows to encode")
    numeric_names = list(rows[0].numeric)
    binary_names = list(rows[0].binary)
    categorical_names = list(rows[0].categorical)
    n = len(rows)

    blocks: list[np.ndarray] = [np.ones((n, 1))]
    columns: list[ColumnMeta] = [ColumnMeta(name="intercept", kind="intercept")]
    dropped: list[tuple[str, str]] = []

    for name in numeric_names:
        col = np.array([r.numeric[name] for r in rows], dtype=float)
        if not np.all(np.isfinite(col)):
            raise ValueError(f"non-finite values in numeric column {name!r}")
        mean, sd = float(col.mean()), float(col.std())
        if sd == 0.0:
            dropped.append((name, "zero variance"))
            logger.warning("dropping degenerate numeric column %r", name)
            continue
        if standardize_numeric:
            blocks.append(((col - mean) / sd).reshape(-1, 1))
            columns.append(ColumnMeta(name=name, kind="numeric", mean=mean, sd=sd))
        else:
            blocks.append(col.reshape(-1, 1))
            columns.append(ColumnMeta(name=name, kind="numeric", mean=0.0, sd=1.0))

    for name in binary_names:
        col = np.array([r.binary[name] for r in rows], dtype=float)
        if col.min() == col.max():
            dropped.append((name, "zero variance"))
            logger.warning("dropping degenerate binary column %r", name)
            continue
        blocks.append(col.reshape(-1, 1))
        columns.append(ColumnMeta(name=name, kind="binary"))

    references: dict[str, str] = {}
    for name in categorical_names:
        values = [r.categorical[name] for r in rows]
        levels = sorted(set(values))
        references[name] = levels[0]
        for level in levels[1:]:
            col = np.array([1.0 if v == level else 0.0 for v in values])
            blocks.append(col.reshape(-1, 1))
            columns.append(ColumnMeta(name=f"{name}={level}", kind="onehot",
                                      group=name, level=level))

    X = np.hstack(blocks)
    y = np.array([r.y for r in rows], dtype=float)
    return DesignMatrix(X=X, y=y, columns=columns,
                        row_keys=[r.key for r in rows], references=references,
                        dropped=dropped, standardized=standardize_numeric)


def decode(dm: DesignMatrix) -> list[FeatureRow]:
    """Reconstruct rows from the matrix and its metadata (round-trip check)."""
    rows = []
    for i, key in enumerate(dm.row_keys):
        numeric: dict[str, float] = {}
        binary: dict[str, int] = {}
        categorical: dict[str, str] = {name: ref for name, ref in dm.references.items()}
        for j, col in enumerate(dm.columns):
            value = dm.X[i, j]
            if col.kind == "numeric":
                numeric[col.name] = value * col.sd + col.mean if dm.standardized else value
            elif col.kind == "binary":
                binary[col.name] = int(round(value))
            elif col.kind == "onehot" and value == 1.0:
                categorical[col.group] = col.level
        rows.append(FeatureRow(key=key, y=int(dm.y[i]), numeric=numeric,
                               binary=binary, categorical=categorical))
    return rows
