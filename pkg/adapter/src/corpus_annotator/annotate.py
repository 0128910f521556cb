"""Raw posts -> interchange records through a configured toolchain.

Every record is checked against the interchange's structural rules before
it is written (tree shape, BIO well-formedness, required fields), so the
output always passes the consumer's strict validation. Posts the toolchain
rejects are logged and skipped; the batch keeps going.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .labelmap import label_map_report
from .raw import RawPost, read_raw_posts
from .toolchains import (AnnotationFailure, LocationLexicon, Toolchain,
                         get_toolchain)

logger = logging.getLogger(__name__)

# UD v2 relation inventory: the interchange format's documented label set.
INTERCHANGE_DEPRELS = frozenset({
    "acl", "advcl", "advmod", "amod", "appos", "aux", "case", "cc", "ccomp",
    "clf", "compound", "conj", "cop", "csubj", "dep", "det", "discourse",
    "dislocated", "expl", "fixed", "flat", "goeswith", "iobj", "list",
    "mark", "nmod", "nsubj", "nummod", "obj", "obl", "orphan", "parataxis",
    "punct", "reparandum", "root", "vocative", "xcomp",
})
INTERCHANGE_NER = frozenset(
    {"O", "B-LOCATION", "I-LOCATION", "B-OTHER", "I-OTHER"})


@dataclass(frozen=True)
class ToolchainConfig:
    toolchain: str
    location_lexicon: Path

    @classmethod
    def from_file(cls, path) -> "ToolchainConfig":
        path = Path(path)
        raw = json.loads(path.read_text(encoding="utf-8"))
        lexicon = Path(raw["location_lexicon"])
        if not lexicon.is_absolute():
            lexicon = path.parent / lexicon
        return cls(toolchain=raw["toolchain"], location_lexicon=lexicon)


def check_record(record: dict) -> None:
    """Structural interchange rules; raises AnnotationFailure on violation."""
    for name in ("post_id", "author_id", "event_id", "timestamp", "text",
                 "tokens", "has_url", "has_media"):
        if name not in record or record[name] is None:
            raise AnnotationFailure(f"missing field {name!r}")
    tokens = record["tokens"]
    if not tokens:
        raise AnnotationFailure("no tokens")
    roots = 0
    n = len(tokens)
    for pos, token in enumerate(tokens, start=1):
        if token["index"] != pos:
            raise AnnotationFailure(f"token index {token['index']} at position {pos}")
        if not 0 <= token["head"] <= n or token["head"] == pos:
            raise AnnotationFailure(f"token {pos} head {token['head']} out of range")
        if token["head"] == 0:
            roots += 1
        if token["deprel"].split(":", 1)[0] not in INTERCHANGE_DEPRELS:
            raise AnnotationFailure(f"deprel {token['deprel']!r} outside label set")
        if token["ner"] not in INTERCHANGE_NER:
            raise AnnotationFailure(f"ner tag {token['ner']!r} outside tag set")
    if roots != 1:
        raise AnnotationFailure(f"expected one root, found {roots}")
    heads = {t["index"]: t["head"] for t in tokens}
    for start in heads:
        seen, node = set(), start
        while node != 0:
            if node in seen:
                raise AnnotationFailure(f"head cycle at token {node}")
            seen.add(node)
            node = heads[node]
    prev = "O"
    for token in tokens:
        tag = token["ner"]
        if tag.startswith("I-") and prev not in (f"B-{tag[2:]}", f"I-{tag[2:]}"):
            raise AnnotationFailure(f"ill-formed BIO at token {token['index']}")
        prev = tag


def annotate_post(post: RawPost, toolchain: Toolchain,
                  lexicon: LocationLexicon) -> dict:
    """One raw post to one validated interchange record."""
    if not post.text.strip():
        raise AnnotationFailure("empty text")
    native = toolchain.annotate_text(post.text, lexicon)
    tokens = [
        {"index": t.index, "form": t.form, "head": t.head,
         "deprel": toolchain.label_map.map_deprel(t.deprel),
         "ner": toolchain.label_map.map_entity_tag(t.entity)}
        for t in native
    ]
    record = {
        "post_id": post.post_id,
        "author_id": post.author_id,
        "event_id": post.event_id,
        "timestamp": int(post.timestamp) if float(post.timestamp).is_integer()
        else post.timestamp,
        "text": post.text,
        "tokens": tokens,
        "has_url": len(post.urls) > 0,
        "has_media": post.media,
    }
    if post.group_id is not None:
        record["group_id"] = post.group_id
    if post.engagement is not None:
        record["engagement"] = post.engagement
    if post.author_profile_location is not None:
        record["author_profile_location"] = post.author_profile_location
    if post.author_metadata is not None:
        record["author_metadata"] = post.author_metadata
    check_record(record)
    return record


@dataclass
class BatchResult:
    annotated: int = 0
    skipped: list = field(default_factory=list)  # (post_id, reason)


def annotate(raw_lines: Iterable[str], config: ToolchainConfig,
             output_path, *, report_path=None) -> BatchResult:
    """Annotate a raw dump into interchange records.

    Per-post failures are logged and the post skipped; the toolchain being
    unavailable raises immediately. Writes the label-map report beside the
    output when `report_path` is given.
    """
    toolchain = get_toolchain(config.toolchain)
    if not Path(config.location_lexicon).exists():
        raise FileNotFoundError(f"location lexicon not found: {config.location_lexicon}")
    lexicon = LocationLexicon.from_file(config.location_lexicon)
    result = BatchResult()
    raw_errors: list = []
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    with output_path.open("w", encoding="utf-8") as out:
        for post in read_raw_posts(raw_lines, errors=raw_errors):
            try:
                record = annotate_post(post, toolchain, lexicon)
            except AnnotationFailure as exc:
                logger.warning("skipping post %s: %s", post.post_id, exc)
                result.skipped.append((post.post_id, str(exc)))
                continue
            out.write(json.dumps(record, sort_keys=True, ensure_ascii=False,
                                 separators=(",", ":")) + "\n")
            result.annotated += 1
    for exc in raw_errors:
        logger.warning("unreadable raw record at line %s: %s", exc.line_no, exc)
        result.skipped.append((f"line:{exc.line_no}", str(exc)))
    if report_path is not None:
        label_map_report(toolchain.label_map, report_path)
    return result
