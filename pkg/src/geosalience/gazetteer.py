"""GeoNames-backed gazetteer: name index, region-scoped resolution, populations.

The index holds two strata:

* mention entries — rows passing the feature filter (default: populated
  places ``P.*`` plus county-level ``A.ADM2``); these are the only rows a
  location mention may resolve to.
* context entries — first-order admin divisions, countries/territories
  (``A.ADM1``, ``A.PCL*``, ``A.TERR``); kept regardless of the filter so
  that state checks and population lookups for context locations (states,
  territories) work even though such places are never valid mentions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

GEONAMES_COLUMNS = 19  # allCountries.txt dump format

CONTEXT_FEATURE_CODES_PREFIX = ("PCL",)
CONTEXT_FEATURE_CODES = ("ADM1", "TERR")


class DumpFormatError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class GazetteerEntry:
    geoname_id: int
    canonical_name: str
    alternate_names: tuple[str, ...]
    feature_class: str
    feature_code: str
    country_code: str
    admin1_code: str
    population: int
    latitude: float
    longitude: float

    @property
    def admin_unit(self) -> tuple[str, str]:
        return (self.country_code, self.admin1_code)


@dataclass(frozen=True)
class RegionSpec:
    """Affected region of one event, as a set of admin units.

    admin_units are (country_code, admin1_code) pairs; admin1_code "*"
    matches any first-order division of that country.
    """
    region_id: str
    admin_units: frozenset[tuple[str, str]]
    local_name_aliases: frozenset[str] = frozenset()
    window: Optional[tuple[float, float]] = None  # UTC seconds, inclusive

    def contains(self, entry: GazetteerEntry) -> bool:
        return ((entry.country_code, entry.admin1_code) in self.admin_units
                or (entry.country_code, "*") in self.admin_units)


class Outcome(enum.Enum):
    RESOLVED = "Resolved"
    AMBIGUOUS = "Ambiguous"
    NOT_FOUND = "NotFound"
    OUTSIDE_REGION = "OutsideRegion"


@dataclass(frozen=True)
class ResolutionResult:
    outcome: Outcome
    entry: Optional[GazetteerEntry] = None
    candidate_count: int = 0

    @property
    def resolved(self) -> bool:
        return self.outcome is Outcome.RESOLVED


def normalize_name(name: str) -> str:
    """Case-fold and collapse whitespace; the only matching normalization."""
    return " ".join(name.casefold().split())


def default_feature_filter(feature_class: str, feature_code: str) -> bool:
    """Cities and counties: populated places plus second-order admin divisions."""
    return feature_class == "P" or (feature_class == "A" and feature_code == "ADM2")


def is_context_feature(feature_class: str, feature_code: str) -> bool:
    if feature_class != "A":
        return False
    return (feature_code in CONTEXT_FEATURE_CODES
            or feature_code.startswith(CONTEXT_FEATURE_CODES_PREFIX))


class GazetteerIndex:
    """Immutable after build; safe for concurrent reads."""

    def __init__(self) -> None:
        self._names: dict[str, list[GazetteerEntry]] = {}
        self._context_names: dict[str, list[GazetteerEntry]] = {}
        self._excluded_names: set[str] = set()
        self.entry_count = 0
        self.context_entry_count = 0

    def _register(self, table: dict[str, list[GazetteerEntry]],
                  entry: GazetteerEntry) -> None:
        for name in (entry.canonical_name, *entry.alternate_names):
            key = normalize_name(name)
            if not key:
                continue
            bucket = table.setdefault(key, [])
            if all(e.geoname_id != entry.geoname_id for e in bucket):
                bucket.append(entry)

    def add(self, entry: GazetteerEntry, keep: bool, context: bool) -> None:
        if keep:
            self._register(self._names, entry)
            self.entry_count += 1
        if context:
            self._register(self._context_names, entry)
            self.context_entry_count += 1
        if not keep and not context:
            for name in (entry.canonical_name, *entry.alternate_names):
                key = normalize_name(name)
                if key:
                    self._excluded_names.add(key)

    def finalize(self) -> None:
        # Deterministic candidate order regardless of dump row order.
        for table in (self._names, self._context_names):
            for bucket in table.values():
                bucket.sort(key=lambda e: e.geoname_id)

    def lookup(self, name: str) -> list[GazetteerEntry]:
        """Mention-stratum candidates (cities/counties) for a name."""
        return list(self._names.get(normalize_name(name), ()))

    def lookup_context(self, name: str) -> list[GazetteerEntry]:
        """Admin-level candidates (states, territories, countries)."""
        return list(self._context_names.get(normalize_name(name), ()))

    def lookup_any(self, name: str) -> list[GazetteerEntry]:
        key = normalize_name(name)
        seen: dict[int, GazetteerEntry] = {}
        for entry in (*self._names.get(key, ()), *self._context_names.get(key, ())):
            seen.setdefault(entry.geoname_id, entry)
        return sorted(seen.values(), key=lambda e: e.geoname_id)

    def feature_filtered(self, name: str) -> bool:
        """True when the name exists in the dump but only outside the
        mention stratum (wrong feature class for a mention)."""
        key = normalize_name(name)
        if key in self._names:
            return False
        return key in self._context_names or key in self._excluded_names

    def names_in_region(self, region: RegionSpec) -> frozenset[str]:
        """Normalized names (canonical + alternates) of in-region mention entries."""
        names = set()
        for key, bucket in self._names.items():
            if any(region.contains(e) for e in bucket):
                names.add(key)
        return frozenset(names)


def parse_dump_row(fields: list[str], line_no: int) -> GazetteerEntry:
    if len(fields) != GEONAMES_COLUMNS:
        raise DumpFormatError(line_no, f"expected {GEONAMES_COLUMNS} columns, got {len(fields)}")
    alternates = tuple(a for a in fields[3].split(",") if a) if fields[3] else ()
    try:
        geoname_id = int(fields[0])
        latitude = float(fields[4]) if fields[4] else 0.0
        longitude = float(fields[5]) if fields[5] else 0.0
        population = int(fields[14]) if fields[14] else 0
    except ValueError as exc:
        raise DumpFormatError(line_no, f"bad numeric field: {exc}") from exc
    return GazetteerEntry(
        geoname_id=geoname_id,
        canonical_name=fields[1],
        alternate_names=alternates,
        feature_class=fields[6],
        feature_code=fields[7],
        country_code=fields[8],
        admin1_code=fields[10],
        population=max(population, 0),
        latitude=latitude,
        longitude=longitude,
    )


def build_index(dump_stream: Iterable[str],
                feature_filter: Callable[[str, str], bool] = default_feature_filter,
                ) -> GazetteerIndex:
    """Build the name index from a GeoNames tab-separated dump stream.

    Construction is order-independent: candidate lists are sorted by
    geoname_id at the end.
    """
    index = GazetteerIndex()
    for line_no, line in enumerate(dump_stream, start=1):
        line = line.rstrip("\n")
        if not line:
            continue
        fields = line.split("\t")
        entry = parse_dump_row(fields, line_no)
        keep = feature_filter(entry.feature_class, entry.feature_code)
        context = is_context_feature(entry.feature_class, entry.feature_code)
        index.add(entry, keep=keep, context=context)
    index.finalize()
    return index


def resolve(name: str, region: RegionSpec, index: GazetteerIndex) -> ResolutionResult:
    """Region-scoped unambiguous resolution of a mention string.

    Exactly one in-region candidate resolves; several are ambiguous; none
    is NotFound when the name is globally unknown, OutsideRegion otherwise.
    """
    if not normalize_name(name):
        return ResolutionResult(Outcome.NOT_FOUND)
    candidates = index.lookup(name)
    in_region = [e for e in candidates if region.contains(e)]
    distinct = {e.geoname_id for e in in_region}
    if not in_region:
        if not candidates:
            return ResolutionResult(Outcome.NOT_FOUND)
        return ResolutionResult(Outcome.OUTSIDE_REGION, candidate_count=len(candidates))
    if len(distinct) > 1:
        return ResolutionResult(Outcome.AMBIGUOUS, candidate_count=len(distinct))
    return ResolutionResult(Outcome.RESOLVED, entry=in_region[0], candidate_count=1)


def resolve_best(name: str, index: GazetteerIndex) -> Optional[GazetteerEntry]:
    """Highest-population candidate across both strata; population ties go
    to the smaller geoname_id. None when the name is unknown."""
    candidates = index.lookup_any(name)
    if not candidates:
        return None
    return min(candidates, key=lambda e: (-e.population, e.geoname_id))


def population_of(name: str, index: GazetteerIndex) -> Optional[int]:
    entry = resolve_best(name, index)
    return entry.population if entry is not None else None


class StateAliasTable:
    """State/territory name <-> abbreviation table from a two-column file."""

    def __init__(self, pairs: Iterable[tuple[str, str]]):
        self._full_by_alias: dict[str, str] = {}
        for name, abbr in pairs:
            n, a = normalize_name(name), normalize_name(abbr)
            self._full_by_alias[n] = name
            self._full_by_alias[a] = name

    def __contains__(self, surface: str) -> bool:
        return normalize_name(surface) in self._full_by_alias

    def full_name(self, surface: str) -> Optional[str]:
        return self._full_by_alias.get(normalize_name(surface))

    def aliases(self) -> frozenset[str]:
        return frozenset(self._full_by_alias)

    @classmethod
    def from_file(cls, path) -> "StateAliasTable":
        pairs = []
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                name, abbr = line.split("\t")
                pairs.append((name, abbr))
        return cls(pairs)
