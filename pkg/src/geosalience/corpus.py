"""Interchange data model: annotated posts, validation, dependency trees.

The interchange format is UTF-8, one JSON object per line. Field names are
fixed: post_id, author_id, group_id, event_id, timestamp, text,
tokens[{index, form, head, deprel, ner}], has_url, has_media, engagement,
author_profile_location, author_metadata. In strict mode unknown fields are
rejected; in lenient mode they are ignored.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Iterable, Iterator, Mapping, Optional

SECONDS_PER_DAY = 86400

# Universal-Dependencies-style relation labels (v2 inventory). Subtyped
# labels ("nmod:poss") are accepted; the base label must be in this set.
DEPREL_LABELS = frozenset({
    "acl", "advcl", "advmod", "amod", "appos", "aux", "case", "cc", "ccomp",
    "clf", "compound", "conj", "cop", "csubj", "dep", "det", "discourse",
    "dislocated", "expl", "fixed", "flat", "goeswith", "iobj", "list",
    "mark", "nmod", "nsubj", "nummod", "obj", "obl", "orphan", "parataxis",
    "punct", "reparandum", "root", "vocative", "xcomp",
})

NER_TYPES = ("LOCATION", "OTHER")
NER_TAGS = frozenset(
    {"O"} | {f"{p}-{t}" for p in ("B", "I") for t in NER_TYPES}
)

REQUIRED_FIELDS = (
    "post_id", "author_id", "event_id", "timestamp", "text", "tokens",
    "has_url", "has_media",
)
OPTIONAL_FIELDS = (
    "group_id", "engagement", "author_profile_location", "author_metadata",
)
TOKEN_FIELDS = ("index", "form", "head", "deprel", "ner")


class SchemaError(ValueError):
    """A record that violates the interchange schema.

    `kind` is one of: bad_json, missing_field, unknown_field, bad_value,
    bad_tree, bad_bio, bad_timestamp, duplicate_id.
    """

    def __init__(self, kind: str, message: str, *, field_name: str = "",
                 record_id: str = "", line_no: Optional[int] = None):
        super().__init__(message)
        self.kind = kind
        self.field_name = field_name
        self.record_id = record_id
        self.line_no = line_no

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "message": str(self),
            "field": self.field_name,
            "record_id": self.record_id,
            "line_no": self.line_no,
        }


@dataclass(frozen=True)
class Token:
    index: int          # 1-based position
    form: str
    head: int           # 0 = syntactic root
    deprel: str
    ner: str            # BIO tag over {LOCATION, OTHER, O}


@dataclass(frozen=True)
class AnnotatedPost:
    post_id: str
    author_id: str
    event_id: str
    timestamp: float    # UTC seconds
    text: str
    tokens: tuple[Token, ...]
    has_url: bool
    has_media: bool
    group_id: Optional[str] = None
    engagement: Optional[float] = None
    author_profile_location: Optional[str] = None
    author_metadata: Optional[dict] = None

    @property
    def day(self) -> int:
        """UTC calendar day as integer days since the epoch."""
        return utc_day(self.timestamp)


def utc_day(timestamp: float) -> int:
    return int(timestamp // SECONDS_PER_DAY)


def day_to_iso(day: int) -> str:
    return datetime.fromtimestamp(day * SECONDS_PER_DAY, tz=timezone.utc).strftime("%Y-%m-%d")


def iso_to_seconds(date: str) -> float:
    dt = datetime.strptime(date, "%Y-%m-%d").replace(tzinfo=timezone.utc)
    return dt.timestamp()


def _require(obj: Mapping[str, Any], name: str, record_id: str,
             line_no: Optional[int]) -> Any:
    if name not in obj or obj[name] is None:
        raise SchemaError("missing_field", f"missing required field {name!r}",
                          field_name=name, record_id=record_id, line_no=line_no)
    return obj[name]


def _check_str(value: Any, name: str, record_id: str, line_no: Optional[int],
               allow_empty: bool = False) -> str:
    if not isinstance(value, str) or (not allow_empty and not value):
        raise SchemaError("bad_value", f"field {name!r} must be a non-empty string",
                          field_name=name, record_id=record_id, line_no=line_no)
    return value


def _check_bool(value: Any, name: str, record_id: str,
                line_no: Optional[int]) -> bool:
    if not isinstance(value, bool):
        raise SchemaError("bad_value", f"field {name!r} must be a boolean",
                          field_name=name, record_id=record_id, line_no=line_no)
    return value


def _validate_tree(tokens: tuple[Token, ...], record_id: str,
                   line_no: Optional[int]) -> None:
    n = len(tokens)
    roots = [t.index for t in tokens if t.head == 0]
    if len(roots) != 1:
        raise SchemaError("bad_tree", f"expected exactly one root token, found {len(roots)}",
                          field_name="tokens", record_id=record_id, line_no=line_no)
    for t in tokens:
        if not 0 <= t.head <= n:
            raise SchemaError("bad_tree", f"token {t.index} head {t.head} out of range [0,{n}]",
                              field_name="tokens", record_id=record_id, line_no=line_no)
        if t.head == t.index:
            raise SchemaError("bad_tree", f"token {t.index} is its own head",
                              field_name="tokens", record_id=record_id, line_no=line_no)
    # Acyclicity: follow head pointers from every token; a cycle never
    # reaches 0 and revisits a node.
    heads = {t.index: t.head for t in tokens}
    for start in heads:
        seen = set()
        node = start
        while node != 0:
            if node in seen:
                raise SchemaError("bad_tree", f"head cycle involving token {node}",
                                  field_name="tokens", record_id=record_id, line_no=line_no)
            seen.add(node)
            node = heads[node]


def _validate_bio(tokens: tuple[Token, ...], record_id: str,
                  line_no: Optional[int]) -> None:
    prev = "O"
    for t in tokens:
        tag = t.ner
        if tag.startswith("I-"):
            etype = tag[2:]
            if prev != f"B-{etype}" and prev != f"I-{etype}":
                raise SchemaError("bad_bio", f"token {t.index}: {tag!r} cannot follow {prev!r}",
                                  field_name="ner", record_id=record_id, line_no=line_no)
        prev = tag


def parse_post_record(line: str, *, strict: bool = True,
                      line_no: Optional[int] = None,
                      event_windows: Optional[Mapping[str, tuple[float, float]]] = None,
                      ) -> AnnotatedPost:
    """Parse and fully validate one interchange record.

    Raises SchemaError naming the offending field. `event_windows`, when
    given, maps event_id to an inclusive (start, end) window in UTC seconds
    and timestamps outside it are rejected.
    """
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise SchemaError("bad_json", f"not valid JSON: {exc}", line_no=line_no) from exc
    if not isinstance(obj, dict):
        raise SchemaError("bad_json", "record is not a JSON object", line_no=line_no)

    record_id = obj.get("post_id", "") if isinstance(obj.get("post_id"), str) else ""
    if strict:
        known = set(REQUIRED_FIELDS) | set(OPTIONAL_FIELDS)
        for key in obj:
            if key not in known:
                raise SchemaError("unknown_field", f"unknown field {key!r}",
                                  field_name=key, record_id=record_id, line_no=line_no)

    post_id = _check_str(_require(obj, "post_id", record_id, line_no), "post_id", record_id, line_no)
    author_id = _check_str(_require(obj, "author_id", record_id, line_no), "author_id", post_id, line_no)
    event_id = _check_str(_require(obj, "event_id", record_id, line_no), "event_id", post_id, line_no)
    text = _require(obj, "text", record_id, line_no)
    if not isinstance(text, str):
        raise SchemaError("bad_value", "field 'text' must be a string",
                          field_name="text", record_id=post_id, line_no=line_no)

    timestamp = _require(obj, "timestamp", record_id, line_no)
    if isinstance(timestamp, bool) or not isinstance(timestamp, (int, float)):
        raise SchemaError("bad_timestamp", "timestamp must be numeric UTC seconds",
                          field_name="timestamp", record_id=post_id, line_no=line_no)
    if timestamp != timestamp or timestamp in (float("inf"), float("-inf")):
        raise SchemaError("bad_timestamp", "timestamp must be finite",
                          field_name="timestamp", record_id=post_id, line_no=line_no)
    if event_windows is not None and event_id in event_windows:
        lo, hi = event_windows[event_id]
        if not lo <= timestamp <= hi:
            raise SchemaError("bad_timestamp",
                              f"timestamp {timestamp} outside event window [{lo}, {hi}]",
                              field_name="timestamp", record_id=post_id, line_no=line_no)

    has_url = _check_bool(_require(obj, "has_url", record_id, line_no), "has_url", post_id, line_no)
    has_media = _check_bool(_require(obj, "has_media", record_id, line_no), "has_media", post_id, line_no)

    raw_tokens = _require(obj, "tokens", record_id, line_no)
    if not isinstance(raw_tokens, list) or not raw_tokens:
        raise SchemaError("bad_value", "field 'tokens' must be a non-empty list",
                          field_name="tokens", record_id=post_id, line_no=line_no)
    tokens = []
    for pos, raw in enumerate(raw_tokens, start=1):
        if not isinstance(raw, dict):
            raise SchemaError("bad_value", f"token {pos} is not an object",
                              field_name="tokens", record_id=post_id, line_no=line_no)
        if strict:
            for key in raw:
                if key not in TOKEN_FIELDS:
                    raise SchemaError("unknown_field", f"unknown token field {key!r}",
                                      field_name=f"tokens[{pos}].{key}",
                                      record_id=post_id, line_no=line_no)
        for name in TOKEN_FIELDS:
            if name not in raw:
                raise SchemaError("missing_field", f"token {pos} missing field {name!r}",
                                  field_name=f"tokens[{pos}].{name}",
                                  record_id=post_id, line_no=line_no)
        index, head = raw["index"], raw["head"]
        if not isinstance(index, int) or isinstance(index, bool) or index != pos:
            raise SchemaError("bad_value", f"token {pos} index must equal its position, got {index!r}",
                              field_name="index", record_id=post_id, line_no=line_no)
        if not isinstance(head, int) or isinstance(head, bool):
            raise SchemaError("bad_tree", f"token {pos} head must be an integer",
                              field_name="head", record_id=post_id, line_no=line_no)
        form = _check_str(raw["form"], "form", post_id, line_no)
        deprel = _check_str(raw["deprel"], "deprel", post_id, line_no)
        if strict and deprel.split(":", 1)[0] not in DEPREL_LABELS:
            raise SchemaError("bad_value", f"token {pos} deprel {deprel!r} not in documented label set",
                              field_name="deprel", record_id=post_id, line_no=line_no)
        ner = raw["ner"]
        if ner not in NER_TAGS:
            raise SchemaError("bad_bio", f"token {pos} ner tag {ner!r} not in tag set",
                              field_name="ner", record_id=post_id, line_no=line_no)
        tokens.append(Token(index=index, form=form, head=head, deprel=deprel, ner=ner))
    tokens = tuple(tokens)
    _validate_tree(tokens, post_id, line_no)
    _validate_bio(tokens, post_id, line_no)

    group_id = obj.get("group_id")
    if group_id is not None:
        group_id = _check_str(group_id, "group_id", post_id, line_no)
    engagement = obj.get("engagement")
    if engagement is not None:
        if isinstance(engagement, bool) or not isinstance(engagement, (int, float)) or engagement < 0:
            raise SchemaError("bad_value", "field 'engagement' must be a non-negative number",
                              field_name="engagement", record_id=post_id, line_no=line_no)
        engagement = float(engagement)
    profile = obj.get("author_profile_location")
    if profile is not None and not isinstance(profile, str):
        raise SchemaError("bad_value", "field 'author_profile_location' must be a string",
                          field_name="author_profile_location", record_id=post_id, line_no=line_no)
    metadata = obj.get("author_metadata")
    if metadata is not None and not isinstance(metadata, dict):
        raise SchemaError("bad_value", "field 'author_metadata' must be an object",
                          field_name="author_metadata", record_id=post_id, line_no=line_no)

    return AnnotatedPost(
        post_id=post_id, author_id=author_id, event_id=event_id,
        timestamp=float(timestamp), text=text, tokens=tokens,
        has_url=has_url, has_media=has_media, group_id=group_id,
        engagement=engagement, author_profile_location=profile,
        author_metadata=metadata,
    )


def serialize_post(post: AnnotatedPost) -> str:
    """Serialize to one interchange line. Optional null fields are omitted;
    keys are sorted, so output is byte-deterministic."""
    payload: dict[str, Any] = {
        "post_id": post.post_id,
        "author_id": post.author_id,
        "event_id": post.event_id,
        "timestamp": int(post.timestamp) if float(post.timestamp).is_integer() else post.timestamp,
        "text": post.text,
        "tokens": [
            {"index": t.index, "form": t.form, "head": t.head,
             "deprel": t.deprel, "ner": t.ner}
            for t in post.tokens
        ],
        "has_url": post.has_url,
        "has_media": post.has_media,
    }
    if post.group_id is not None:
        payload["group_id"] = post.group_id
    if post.engagement is not None:
        payload["engagement"] = post.engagement
    if post.author_profile_location is not None:
        payload["author_profile_location"] = post.author_profile_location
    if post.author_metadata is not None:
        payload["author_metadata"] = post.author_metadata
    return json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


@dataclass
class CorpusStats:
    """Corpus summary counts. Merging is associative and commutative."""
    post_count: int = 0
    location_token_count: int = 0
    parse_error_count: int = 0
    authors: set = field(default_factory=set)
    event_days: dict = field(default_factory=dict)  # event_id -> (min_day, max_day)

    @property
    def author_count(self) -> int:
        return len(self.authors)

    def add_post(self, post: AnnotatedPost) -> None:
        self.post_count += 1
        self.authors.add(post.author_id)
        self.location_token_count += sum(
            1 for t in post.tokens if t.ner in ("B-LOCATION", "I-LOCATION"))
        day = post.day
        lo, hi = self.event_days.get(post.event_id, (day, day))
        self.event_days[post.event_id] = (min(lo, day), max(hi, day))

    def merge(self, other: "CorpusStats") -> "CorpusStats":
        merged = CorpusStats(
            post_count=self.post_count + other.post_count,
            location_token_count=self.location_token_count + other.location_token_count,
            parse_error_count=self.parse_error_count + other.parse_error_count,
            authors=self.authors | other.authors,
            event_days=dict(self.event_days),
        )
        for event, (lo, hi) in other.event_days.items():
            cur = merged.event_days.get(event)
            merged.event_days[event] = (min(cur[0], lo), max(cur[1], hi)) if cur else (lo, hi)
        return merged

    def to_dict(self) -> dict:
        return {
            "post_count": self.post_count,
            "author_count": self.author_count,
            "location_token_count": self.location_token_count,
            "parse_error_count": self.parse_error_count,
            "event_date_ranges": {
                event: [day_to_iso(lo), day_to_iso(hi)]
                for event, (lo, hi) in sorted(self.event_days.items())
            },
        }


def validate_corpus(lines: Iterable[str], *, strict: bool = True,
                    event_windows: Optional[Mapping[str, tuple[float, float]]] = None,
                    ) -> tuple[CorpusStats, list[SchemaError]]:
    """Validate a stream of interchange lines.

    Errors are collected, not fatal. Stats cover valid records only and are
    independent of record order. Duplicate post_ids are reported as errors
    and the later record is dropped.
    """
    stats = CorpusStats()
    errors: list[SchemaError] = []
    seen_ids: set[str] = set()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            post = parse_post_record(line, strict=strict, line_no=line_no,
                                     event_windows=event_windows)
        except SchemaError as exc:
            stats.parse_error_count += 1
            errors.append(exc)
            continue
        if post.post_id in seen_ids:
            stats.parse_error_count += 1
            errors.append(SchemaError("duplicate_id", f"duplicate post_id {post.post_id!r}",
                                      field_name="post_id", record_id=post.post_id,
                                      line_no=line_no))
            continue
        seen_ids.add(post.post_id)
        stats.add_post(post)
    return stats, errors


def read_posts(lines: Iterable[str], *, strict: bool = True,
               errors: Optional[list[SchemaError]] = None) -> Iterator[AnnotatedPost]:
    """Yield valid posts from a line stream, collecting errors if a list is given."""
    seen_ids: set[str] = set()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            post = parse_post_record(line, strict=strict, line_no=line_no)
        except SchemaError as exc:
            if errors is not None:
                errors.append(exc)
            continue
        if post.post_id in seen_ids:
            if errors is not None:
                errors.append(SchemaError("duplicate_id",
                                          f"duplicate post_id {post.post_id!r}",
                                          field_name="post_id",
                                          record_id=post.post_id, line_no=line_no))
            continue
        seen_ids.add(post.post_id)
        yield post


class DependencyTree:
    """Navigable view over a post's dependency arcs. Pure function of tokens."""

    def __init__(self, tokens: tuple[Token, ...]):
        self.tokens = tokens
        self._children: dict[int, list[int]] = {t.index: [] for t in tokens}
        self.root = 0
        for t in tokens:
            if t.head == 0:
                self.root = t.index
            else:
                self._children[t.head].append(t.index)
        for kids in self._children.values():
            kids.sort()

    def children(self, index: int) -> list[int]:
        return list(self._children[index])

    def head(self, index: int) -> int:
        return self.tokens[index - 1].head

    def deprel(self, index: int) -> str:
        return self.tokens[index - 1].deprel

    def form(self, index: int) -> str:
        return self.tokens[index - 1].form

    def ner(self, index: int) -> str:
        return self.tokens[index - 1].ner

    def subtree_indices(self, index: int) -> list[int]:
        """All token indices in the subtree rooted at `index`, sorted."""
        out = []
        stack = [index]
        while stack:
            node = stack.pop()
            out.append(node)
            stack.extend(self._children[node])
        return sorted(out)

    def subtree_span(self, index: int) -> tuple[int, int]:
        indices = self.subtree_indices(index)
        return indices[0], indices[-1]

    def path_to_root(self, index: int) -> list[int]:
        path = [index]
        node = index
        while self.tokens[node - 1].head != 0:
            node = self.tokens[node - 1].head
            path.append(node)
        return path

    def depth(self, index: int) -> int:
        return len(self.path_to_root(index))


def dependency_tree(post: AnnotatedPost) -> DependencyTree:
    """Tree view of a validated post's tokens."""
    return DependencyTree(post.tokens)
