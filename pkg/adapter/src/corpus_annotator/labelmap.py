"""Label mapping between toolchain-native tag sets and the interchange set.

The interchange format expects Universal-Dependencies-style relation labels
and BIO entity tags over {LOCATION, OTHER, O}. Each toolchain carries one
map for relations and one for entity types; unknown relations fall back to
"dep" (the UD unspecified-dependency label, so mapped output always passes
strict validation) and unknown entity types fall back to OTHER. Both
fallbacks are logged.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

logger = logging.getLogger(__name__)

DEPREL_FALLBACK = "dep"
ENTITY_FALLBACK = "OTHER"


@dataclass(frozen=True)
class LabelMap:
    toolchain: str
    deprels: dict
    entities: dict

    def map_deprel(self, label: str) -> str:
        mapped = self.deprels.get(label)
        if mapped is None:
            logger.warning("toolchain %s: unknown deprel %r mapped to %r",
                           self.toolchain, label, DEPREL_FALLBACK)
            return DEPREL_FALLBACK
        return mapped

    def map_entity_tag(self, tag: str) -> str:
        if tag == "O":
            return "O"
        prefix, _, etype = tag.partition("-")
        mapped = self.entities.get(etype)
        if mapped is None:
            logger.warning("toolchain %s: unknown entity type %r mapped to %r",
                           self.toolchain, etype, ENTITY_FALLBACK)
            mapped = ENTITY_FALLBACK
        return f"{prefix}-{mapped}"

    def report_rows(self) -> list[tuple[str, str, str]]:
        rows = [("deprel", source, target)
                for source, target in sorted(self.deprels.items())]
        rows.extend(("ner", source, target)
                    for source, target in sorted(self.entities.items()))
        rows.append(("deprel", "<unknown>", DEPREL_FALLBACK))
        rows.append(("ner", "<unknown>", ENTITY_FALLBACK))
        return rows


_UD_PASSTHROUGH = {label: label for label in (
    "dep", "flat", "aux", "appos", "conj", "cc", "punct", "case", "nmod",
    "nsubj", "obl", "obj", "det", "advmod", "root",
)}

UD_LABEL_MAP = LabelMap(
    toolchain="rule_en_ud",
    deprels=dict(_UD_PASSTHROUGH),
    entities={"LOC": "LOCATION", "GPE": "LOCATION", "PER": "OTHER",
              "ORG": "OTHER", "MISC": "OTHER"},
)

SD_LABEL_MAP = LabelMap(
    toolchain="rule_en_sd",
    deprels={
        "root": "root", "dep": "dep", "nn": "flat", "aux": "aux",
        "appos": "appos", "conj": "conj", "cc": "cc", "punct": "punct",
        "prep": "case", "pobj": "nmod", "nsubj": "nsubj", "dobj": "obj",
        "det": "det", "advmod": "advmod",
    },
    entities={"GPE": "LOCATION", "LOC": "LOCATION", "PERSON": "OTHER",
              "ORGANIZATION": "OTHER"},
)


def label_map_report(label_map: LabelMap, path) -> Path:
    """Write the mapping in force as a three-column table."""
    path = Path(path)
    lines = ["kind\tsource\ttarget"]
    for kind, source, target in label_map.report_rows():
        lines.append(f"{kind}\t{source}\t{target}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
