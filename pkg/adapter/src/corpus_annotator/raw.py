"""Raw post dump parsing: the adapter's input side.

One JSON object per line with post metadata and untokenized text. Fields:
post_id, author_id, event_id, timestamp, text (required); group_id,
engagement, urls, media, author_profile_location, author_metadata (optional).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional


class RawPostError(ValueError):
    def __init__(self, message: str, line_no: Optional[int] = None):
        super().__init__(message)
        self.line_no = line_no


@dataclass(frozen=True)
class RawPost:
    post_id: str
    author_id: str
    event_id: str
    timestamp: float
    text: str
    group_id: Optional[str] = None
    engagement: Optional[float] = None
    urls: tuple = ()
    media: bool = False
    author_profile_location: Optional[str] = None
    author_metadata: Optional[dict] = None


def parse_raw_post(line: str, line_no: Optional[int] = None) -> RawPost:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise RawPostError(f"not valid JSON: {exc}", line_no) from exc
    if not isinstance(obj, dict):
        raise RawPostError("record is not a JSON object", line_no)
    for name in ("post_id", "author_id", "event_id", "timestamp", "text"):
        if name not in obj or obj[name] is None:
            raise RawPostError(f"missing required field {name!r}", line_no)
    if not isinstance(obj["text"], str) or not obj["text"].strip():
        raise RawPostError("text must be a non-empty string", line_no)
    if not isinstance(obj["timestamp"], (int, float)) or isinstance(obj["timestamp"], bool):
        raise RawPostError("timestamp must be numeric", line_no)
    urls = obj.get("urls", [])
    if not isinstance(urls, list):
        raise RawPostError("urls must be a list", line_no)
    return RawPost(
        post_id=str(obj["post_id"]),
        author_id=str(obj["author_id"]),
        event_id=str(obj["event_id"]),
        timestamp=float(obj["timestamp"]),
        text=obj["text"],
        group_id=obj.get("group_id"),
        engagement=obj.get("engagement"),
        urls=tuple(urls),
        media=bool(obj.get("media", False)),
        author_profile_location=obj.get("author_profile_location"),
        author_metadata=obj.get("author_metadata"),
    )


def read_raw_posts(lines: Iterable[str],
                   errors: Optional[list] = None) -> Iterator[RawPost]:
    for line_no, line in enumerate(lines, start=1):
        if not line.strip() or line.startswith("#"):
            continue
        try:
            yield parse_raw_post(line, line_no)
        except RawPostError as exc:
            if errors is not None:
                errors.append(exc)
