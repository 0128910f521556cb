"""Annotation toolchains: tokenization, entity tagging, dependency arcs.

Two built-in rule-based chains ship with the adapter. Both use a location
lexicon for entity tagging and a template-grammar arc assigner tuned to
short crisis-report sentences; they differ in their native label
inventories and headedness conventions, standing in for the two external
parser families the adapter is normally configured with:

* ``rule_en_ud``  — UD-style labels (flat/case/nmod/appos/conj), left-headed
  name spans.
* ``rule_en_sd``  — Stanford-style labels (nn/prep/pobj/appos/conj),
  right-headed name spans and preposition-headed of-phrases.

Native labels are mapped onto the interchange label set by the per-chain
label maps in `labelmap`; externally backed toolchains plug in through the
same `Toolchain` interface and a mapping file.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .labelmap import LabelMap, SD_LABEL_MAP, UD_LABEL_MAP


class ToolchainUnavailable(RuntimeError):
    pass


class AnnotationFailure(ValueError):
    pass


@dataclass(frozen=True)
class NativeToken:
    index: int
    form: str
    head: int
    deprel: str       # toolchain-native label, pre-mapping
    entity: str       # toolchain-native BIO tag, pre-mapping


_TOKEN_RE = re.compile(r"\w+(?:'\w+)?|[^\w\s]", re.UNICODE)

VERBS = frozenset("""
    is are was were be been being needs need needed lacks lack lacked
    remains remain remained flooding flooded floods lost lose has have had
    arrived arrive reached reach sent send asks ask waits wait opened open
    closed close recovering recovered hit says said helps help stands stood
    posted lack
""".split())

COPULAS = frozenset({"is", "are", "was", "were", "be", "been"})
PREPOSITIONS = frozenset({"in", "to", "from", "at", "near", "over", "into", "on"})
APPOS_NOUNS = frozenset({"capital", "town", "city", "island", "part", "hub",
                         "municipality", "district", "barrio", "neighborhood",
                         "sector", "area"})
ADVERBS = frozenset({"now", "today", "tonight", "yesterday", "still", "urgently"})
DETERMINERS = frozenset({"the", "a", "an", "this", "that"})


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


class LocationLexicon:
    """Longest-match gazetteer of location names for the rule taggers."""

    def __init__(self, names):
        self._names = {tuple(n.casefold().split()) for n in names if n.strip()}
        self.max_len = max((len(n) for n in self._names), default=1)

    def match_at(self, words: list[str], start: int) -> int:
        """Length of the longest lexicon entry starting at `start`, or 0."""
        limit = min(self.max_len, len(words) - start)
        for width in range(limit, 0, -1):
            if tuple(w.casefold() for w in words[start:start + width]) in self._names:
                return width
        return 0

    @classmethod
    def from_file(cls, path) -> "LocationLexicon":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(line.strip() for line in lines if line.strip() and not line.startswith("#"))


def tag_spans(words: list[str], lexicon: LocationLexicon) -> list[tuple[int, int]]:
    """Non-overlapping location spans, greedy longest-match left to right.
    0-based [start, end) pairs."""
    spans = []
    i = 0
    while i < len(words):
        width = lexicon.match_at(words, i)
        if width:
            spans.append((i, i + width))
            i += width
        else:
            i += 1
    return spans


class RuleParser:
    """Template-grammar arc assignment shared by both built-in chains.

    `left_headed` picks the head token of multi-word names (UD: first word,
    SD: last); `prep_headed` switches of-phrases between UD case marking
    (preposition depends on the noun) and SD prep/pobj chains (noun depends
    on the preposition).
    """

    def __init__(self, left_headed: bool, prep_headed: bool, labels: dict):
        self.left_headed = left_headed
        self.prep_headed = prep_headed
        self.labels = labels

    def parse(self, words: list[str], spans: list[tuple[int, int]],
              entity_type: str) -> list[NativeToken]:
        n = len(words)
        heads: list = [None] * n   # 0-based head positions; None = unattached
        labels = [self.labels["dep"]] * n
        entities = ["O"] * n
        span_of = {}
        span_heads = []
        for start, end in spans:
            head_pos = start if self.left_headed else end - 1
            span_heads.append(head_pos)
            for pos in range(start, end):
                span_of[pos] = (start, end)
                entities[pos] = ("B-" if pos == start else "I-") + entity_type
                if pos != head_pos:
                    heads[pos] = head_pos
                    labels[pos] = self.labels["name"]

        lower = [w.casefold() for w in words]
        verb_positions = [i for i, w in enumerate(lower)
                          if w in VERBS and i not in span_of]
        if verb_positions:
            root = verb_positions[-1]
            for v in verb_positions[:-1]:
                heads[v] = root
                labels[v] = self.labels["aux"] if lower[v] in COPULAS else self.labels["dep"]
        elif span_heads and span_of.get(n - 1):
            root = span_heads[-1]
        else:
            root = n - 1
        heads[root] = -1
        labels[root] = "root"

        subject_linked = False
        for head_pos in span_heads:
            if head_pos == root:
                continue
            start, end = span_of[head_pos]
            prev = start - 1
            prev_skip_comma = prev - 1 if prev >= 0 and words[prev] == "," else prev
            if prev_skip_comma >= 0 and prev_skip_comma in span_of:
                # location directly after a location (optionally across a
                # comma): apposition to the earlier span's head
                other = span_of[prev_skip_comma]
                other_head = other[0] if self.left_headed else other[1] - 1
                heads[head_pos] = other_head
                labels[head_pos] = self.labels["appos"]
            elif prev >= 0 and lower[prev] == "and":
                anchor = self._previous_span_head(span_heads, start)
                if anchor is not None:
                    heads[head_pos] = anchor
                    labels[head_pos] = self.labels["conj"]
                    heads[prev] = head_pos
                    labels[prev] = self.labels["cc"]
                else:
                    heads[head_pos] = root
                    labels[head_pos] = self.labels["obl"]
            elif prev >= 0 and lower[prev] == "of":
                self._attach_of_phrase(heads, labels, prev, head_pos, root)
            elif prev >= 0 and lower[prev] in PREPOSITIONS:
                self._attach_prepositional(heads, labels, prev, head_pos, root)
            elif not subject_linked and head_pos < root:
                heads[head_pos] = root
                labels[head_pos] = self.labels["nsubj"]
                subject_linked = True
            else:
                heads[head_pos] = root
                labels[head_pos] = self.labels["obl"]

        for i in range(n):
            if i == root or heads[i] is not None:
                continue
            w = lower[i]
            if w == ",":
                anchor = self._previous_span_head(span_heads, i)
                heads[i] = anchor if anchor is not None else root
                labels[i] = self.labels["punct"]
            elif w in (".", "!", "?", ":", ";", "(", ")"):
                heads[i] = root
                labels[i] = self.labels["punct"]
            elif w in APPOS_NOUNS:
                anchor = self._previous_span_head(span_heads, i)
                if anchor is not None:
                    heads[i] = anchor
                    labels[i] = self.labels["appos"]
                else:
                    heads[i] = root
            elif w in DETERMINERS and i < n - 1:
                heads[i] = i + 1
                labels[i] = self.labels["det"]
            elif w in ADVERBS:
                heads[i] = root
                labels[i] = self.labels["advmod"]
            elif i == root + 1:
                heads[i] = root
                labels[i] = self.labels["obj"]
            else:
                heads[i] = root

        if heads.count(-1) != 1:
            raise AnnotationFailure("parser produced no unique root")
        self._break_cycles(heads, root)
        return [
            NativeToken(index=i + 1, form=words[i],
                        head=0 if heads[i] == -1 else heads[i] + 1,
                        deprel=labels[i], entity=entities[i])
            for i in range(n)
        ]

    def _break_cycles(self, heads, root) -> None:
        # heuristics may chain forward references into a loop; reattach the
        # smallest offender to the root
        for start in range(len(heads)):
            seen = set()
            node = start
            while node != -1 and heads[node] != -1:
                if node in seen:
                    heads[node] = root
                    break
                seen.add(node)
                node = heads[node]

    def _previous_span_head(self, span_heads, position):
        before = [h for h in span_heads if h < position]
        return before[-1] if before else None

    def _attach_prepositional(self, heads, labels, prep, head_pos, root):
        if self.prep_headed:
            heads[prep] = root
            labels[prep] = self.labels["prep"]
            heads[head_pos] = prep
            labels[head_pos] = self.labels["pobj"]
        else:
            heads[prep] = head_pos
            labels[prep] = self.labels["case"]
            heads[head_pos] = root
            labels[head_pos] = self.labels["obl"]

    def _attach_of_phrase(self, heads, labels, of_pos, head_pos, root):
        governor = of_pos - 1 if of_pos > 0 else root
        if self.prep_headed:
            heads[of_pos] = governor
            labels[of_pos] = self.labels["prep"]
            heads[head_pos] = of_pos
            labels[head_pos] = self.labels["pobj"]
        else:
            heads[of_pos] = head_pos
            labels[of_pos] = self.labels["case"]
            heads[head_pos] = governor
            labels[head_pos] = self.labels["nmod"]


UD_NATIVE_LABELS = {
    "dep": "dep", "name": "flat", "aux": "aux", "appos": "appos",
    "conj": "conj", "cc": "cc", "punct": "punct", "case": "case",
    "nmod": "nmod", "nsubj": "nsubj", "obl": "obl", "obj": "obj",
    "det": "det", "advmod": "advmod", "prep": "case", "pobj": "nmod",
}

SD_NATIVE_LABELS = {
    "dep": "dep", "name": "nn", "aux": "aux", "appos": "appos",
    "conj": "conj", "cc": "cc", "punct": "punct", "case": "prep",
    "nmod": "pobj", "nsubj": "nsubj", "obl": "pobj", "obj": "dobj",
    "det": "det", "advmod": "advmod", "prep": "prep", "pobj": "pobj",
}


@dataclass(frozen=True)
class Toolchain:
    name: str
    parser: RuleParser
    entity_type: str          # native entity label for lexicon hits
    label_map: LabelMap

    def annotate_text(self, text: str, lexicon: LocationLexicon) -> list[NativeToken]:
        words = tokenize(text)
        if not words:
            raise AnnotationFailure("no tokens")
        spans = tag_spans(words, lexicon)
        return self.parser.parse(words, spans, self.entity_type)


_REGISTRY: dict[str, Callable[[], Toolchain]] = {
    "rule_en_ud": lambda: Toolchain(
        name="rule_en_ud",
        parser=RuleParser(left_headed=True, prep_headed=False,
                          labels=UD_NATIVE_LABELS),
        entity_type="LOC",
        label_map=UD_LABEL_MAP),
    "rule_en_sd": lambda: Toolchain(
        name="rule_en_sd",
        parser=RuleParser(left_headed=False, prep_headed=True,
                          labels=SD_NATIVE_LABELS),
        entity_type="GPE",
        label_map=SD_LABEL_MAP),
}


def available_toolchains() -> list[str]:
    return sorted(_REGISTRY)


def get_toolchain(name: str) -> Toolchain:
    factory = _REGISTRY.get(name)
    if factory is None:
        raise ToolchainUnavailable(
            f"toolchain {name!r} is not available; known: {available_toolchains()}")
    return factory()
