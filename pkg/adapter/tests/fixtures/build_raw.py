#!/usr/bin/env python3
"""Regenerate raw_posts_100.jsonl, the raw-dump fixture for adapter tests.

Sentences mix bare location mentions with the descriptor constructions the
downstream pattern matcher detects (state suffix, of-phrase apposition,
coordination), across authors with varying profile metadata, URLs, media
flags and engagement.
"""

import json
import random
from pathlib import Path

BASE_TS = 1505995200  # 2017-09-21T12:00:00Z, inside the Maria window
LOCATIONS = ["San Juan", "Guayama", "Vieques", "Ponce", "Lajas", "Vega Alta"]

PLAIN = [
    "{loc} is flooding",
    "{loc} lost power",
    "help arrived in {loc}",
    "send water to {loc} now",
    "{loc} needs help",
]
DESCRIPTOR = [
    "{loc} , Puerto Rico is flooding",
    "{loc} , PR needs help",
    "{loc} , capital of Puerto Rico , is flooding",
    "{loc} and {loc2} , Puerto Rico lack power",
]


def main():
    rng = random.Random(813)
    records = []
    for i in range(100):
        loc = LOCATIONS[i % len(LOCATIONS)]
        loc2 = LOCATIONS[(i + 3) % len(LOCATIONS)]
        if rng.random() < 0.45:
            template = DESCRIPTOR[i % len(DESCRIPTOR)]
        else:
            template = PLAIN[i % len(PLAIN)]
        text = template.format(loc=loc, loc2=loc2)
        author = f"rawauth{i % 14}"
        record = {
            "post_id": f"raw{i:03d}",
            "author_id": author,
            "event_id": "maria",
            "timestamp": BASE_TS + i * 5400,
            "text": text,
            "engagement": round(rng.lognormvariate(1.0, 1.0), 2),
            "urls": ["https://example.org/report"] if rng.random() < 0.35 else [],
            "media": rng.random() < 0.3,
        }
        if i % 14 < 5:
            record["author_profile_location"] = f"{LOCATIONS[i % 6]}, PR"
        elif i % 14 < 8:
            record["author_profile_location"] = "Orlando, Florida"
        if i % 14 in (0, 7):
            record["author_metadata"] = {
                "name": f"Relief Agency {i % 14}",
                "description": "official updates",
                "followers": 4000, "friends": 50,
            }
        elif i % 14 < 10:
            record["author_metadata"] = {
                "name": f"Resident {i % 14}",
                "description": "just me",
                "followers": 120, "friends": 150,
            }
        records.append(record)
    out = Path(__file__).parent / "raw_posts_100.jsonl"
    with out.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True, ensure_ascii=False,
                                separators=(",", ":")) + "\n")
    print(f"wrote {len(records)} raw posts")


if __name__ == "__main__":
    main()
