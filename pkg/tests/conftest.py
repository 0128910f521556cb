import json
from pathlib import Path

import pytest

from geosalience.corpus import AnnotatedPost, Token
from geosalience.gazetteer import StateAliasTable, build_index
from geosalience.pipeline import DATA_DIR, load_regions

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def small_index():
    with open(FIXTURES / "gazetteer_small.tsv", encoding="utf-8") as fh:
        return build_index(fh)


@pytest.fixture(scope="session")
def regions():
    specs, _ = load_regions(FIXTURES / "regions.json")
    return specs


@pytest.fixture(scope="session")
def alias_table():
    return StateAliasTable.from_file(DATA_DIR / "state_abbreviations.txt")


@pytest.fixture(scope="session")
def gold_records():
    lines = (FIXTURES / "descriptor_gold.jsonl").read_text(encoding="utf-8").splitlines()
    return [json.loads(line) for line in lines]


def make_post(token_specs, post_id="p1", author_id="a1", event_id="maria",
              timestamp=1505908800, group_id=None, has_url=False,
              has_media=False, engagement=None, profile=None, metadata=None):
    """token_specs: list of (form, head, deprel, ner) tuples."""
    tokens = tuple(
        Token(index=i, form=form, head=head, deprel=deprel, ner=ner)
        for i, (form, head, deprel, ner) in enumerate(token_specs, start=1))
    return AnnotatedPost(
        post_id=post_id, author_id=author_id, event_id=event_id,
        timestamp=timestamp, text=" ".join(t.form for t in tokens),
        tokens=tokens, has_url=has_url, has_media=has_media, group_id=group_id,
        engagement=engagement, author_profile_location=profile,
        author_metadata=metadata)
