"""Descriptor-phrase detection over dependency trees.

Four patterns, evaluated per mention in fixed precedence and emitting at
most one match each:

STATE        surface adjacency: the mention is followed, optionally across
             a comma, by a state/territory name or abbreviation (alias
             table or admin-level gazetteer entry). Exempt from the
             population check; abbreviations carry no population row and
             state-level entries are better known by definition.
MODIFIER     a dependent reached from the mention head through modifier
             relations whose subtree contains a LOCATION resolving to a
             higher-population entry ("San Juan, capital of Puerto Rico").
COMPOUND     the mention is embedded in a governing noun phrase through
             compound relations and that phrase contains a higher-population
             LOCATION ("the Vega Alta neighborhood of San Juan").
CONJUNCTION  the mention sits in a conj chain whose final conjunct carries
             a STATE or MODIFIER descriptor; the descriptor distributes to
             the earlier conjuncts.

Relation labels pass through `PatternConfig.label_map` first, so tag sets
other than the UD-style default can be adapted without touching the rules.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

from .corpus import AnnotatedPost, DependencyTree, dependency_tree
from .gazetteer import GazetteerIndex, StateAliasTable, population_of
from .mentions import LocationMention, span_surface


class PatternKind(enum.Enum):
    STATE = "STATE"
    MODIFIER = "MODIFIER"
    COMPOUND = "COMPOUND"
    CONJUNCTION = "CONJUNCTION"


PRECEDENCE = (PatternKind.STATE, PatternKind.MODIFIER,
              PatternKind.COMPOUND, PatternKind.CONJUNCTION)


@dataclass(frozen=True)
class DescriptorMatch:
    post_id: str
    head_span: tuple[int, int]
    context_span: tuple[int, int]
    kind: PatternKind
    relation_path: tuple[str, ...]
    head_population: Optional[int]
    context_population: Optional[int]
    context_is_state: bool = False  # state-type context: population check exempt


@dataclass(frozen=True)
class PatternConfig:
    modifier_relations: frozenset = frozenset({"amod", "appos", "nmod", "nummod"})
    compound_relations: frozenset = frozenset({"nmod", "compound", "appos"})
    conjunction_relations: frozenset = frozenset({"conj"})
    state_alias_table: StateAliasTable = field(default_factory=lambda: StateAliasTable(()))
    require_population_check: bool = True
    max_arc_distance: int = 4
    max_state_span: int = 3     # longest token join tried for a state name
    label_map: Mapping[str, str] = field(default_factory=dict)
    enabled_kinds: frozenset = frozenset(PRECEDENCE)

    def relation(self, deprel: str) -> str:
        """Map a source label to the rule label set; subtypes are stripped."""
        base = deprel.split(":", 1)[0]
        return self.label_map.get(base, self.label_map.get(deprel, base))


class MismatchError(KeyError):
    """A descriptor match references a mention that was never extracted."""


def _span_head(tree: DependencyTree, span: tuple[int, int]) -> int:
    """The token of a span whose syntactic head lies outside the span."""
    inside = set(range(span[0], span[1] + 1))
    for i in range(span[0], span[1] + 1):
        if tree.head(i) not in inside:
            return i
    return span[0]


def _location_runs(post: AnnotatedPost) -> list[tuple[int, int]]:
    runs = []
    start = None
    for token in post.tokens:
        if token.ner == "B-LOCATION":
            if start is not None:
                runs.append((start, token.index - 1))
            start = token.index
        elif token.ner != "I-LOCATION" and start is not None:
            runs.append((start, token.index - 1))
            start = None
    if start is not None:
        runs.append((start, post.tokens[-1].index))
    return runs


class _PostMatcher:
    """Pattern evaluation for one post; shares the tree across mentions."""

    def __init__(self, post: AnnotatedPost, config: PatternConfig,
                 index: GazetteerIndex):
        self.post = post
        self.config = config
        self.index = index
        self.tree = dependency_tree(post)
        self.runs = _location_runs(post)

    def match_mention(self, span: tuple[int, int],
                      head_population: Optional[int]) -> Optional[DescriptorMatch]:
        for kind in PRECEDENCE:
            if kind not in self.config.enabled_kinds:
                continue
            if kind is PatternKind.STATE:
                found = self._match_state(span)
            elif kind is PatternKind.MODIFIER:
                found = self._match_modifier(span, head_population)
            elif kind is PatternKind.COMPOUND:
                found = self._match_compound(span, head_population)
            else:
                found = self._match_conjunction(span, head_population)
            if found is not None:
                return found
        return None

    # -- STATE ------------------------------------------------------------

    def _state_context_after(self, span: tuple[int, int]
                             ) -> Optional[tuple[tuple[int, int], Optional[int]]]:
        """State name/abbreviation directly after the span, optionally
        across one comma. Returns (context_span, population)."""
        n = len(self.post.tokens)
        j = span[1] + 1
        if j <= n and self.post.tokens[j - 1].form == ",":
            j += 1
        if j > n:
            return None
        longest = min(self.config.max_state_span, n - j + 1)
        for width in range(longest, 0, -1):
            ctx = (j, j + width - 1)
            surface = span_surface(self.post, ctx)
            if surface in self.config.state_alias_table:
                full = self.config.state_alias_table.full_name(surface)
                pops = [e.population for e in self.index.lookup_context(full or surface)]
                return ctx, (max(pops) if pops else None)
            admin = self.index.lookup_context(surface)
            if admin:
                return ctx, max(e.population for e in admin)
        return None

    def _match_state(self, span: tuple[int, int]) -> Optional[DescriptorMatch]:
        found = self._state_context_after(span)
        if found is None:
            return None
        ctx, pop = found
        return DescriptorMatch(
            post_id=self.post.post_id, head_span=span, context_span=ctx,
            kind=PatternKind.STATE, relation_path=(),
            head_population=None, context_population=pop, context_is_state=True)

    # -- MODIFIER / COMPOUND ----------------------------------------------

    def _passes_population(self, context_pop: Optional[int],
                           head_pop: Optional[int]) -> bool:
        if not self.config.require_population_check:
            return True
        if context_pop is None or head_pop is None:
            return False  # unknown populations fail the check
        return context_pop > head_pop

    def _context_runs_in(self, token_set: set, exclude: tuple[int, int]
                         ) -> list[tuple[int, int]]:
        """LOCATION runs fully inside `token_set`, excluding the head span."""
        out = []
        excluded = set(range(exclude[0], exclude[1] + 1))
        for run in self.runs:
            members = set(range(run[0], run[1] + 1))
            if members & excluded:
                continue
            if members <= token_set:
                out.append(run)
        return out

    def _best_context(self, token_set: set, span: tuple[int, int],
                      head_pop: Optional[int]
                      ) -> Optional[tuple[tuple[int, int], Optional[int]]]:
        for run in sorted(self._context_runs_in(token_set, span)):
            surface = span_surface(self.post, run)
            pop = population_of(surface, self.index)
            if self._passes_population(pop, head_pop):
                return run, pop
        return None

    def _match_modifier(self, span: tuple[int, int],
                        head_pop: Optional[int]) -> Optional[DescriptorMatch]:
        head = _span_head(self.tree, span)
        inside = set(range(span[0], span[1] + 1))
        # BFS downward over modifier relations, nearest arcs first.
        frontier: list[tuple[int, tuple[str, ...]]] = [(head, ())]
        seen = {head}
        for _ in range(self.config.max_arc_distance):
            next_frontier = []
            for node, path in frontier:
                for child in self.tree.children(node):
                    rel = self.config.relation(self.tree.deprel(child))
                    if rel not in self.config.modifier_relations or child in seen:
                        continue
                    seen.add(child)
                    next_frontier.append((child, path + (rel,)))
            for node, path in sorted(next_frontier):
                if node in inside:
                    continue
                subtree = set(self.tree.subtree_indices(node))
                found = self._best_context(subtree, span, head_pop)
                if found is not None:
                    ctx, pop = found
                    return DescriptorMatch(
                        post_id=self.post.post_id, head_span=span, context_span=ctx,
                        kind=PatternKind.MODIFIER, relation_path=path,
                        head_population=head_pop, context_population=pop)
            frontier = next_frontier
            if not frontier:
                break
        return None

    def _match_compound(self, span: tuple[int, int],
                        head_pop: Optional[int]) -> Optional[DescriptorMatch]:
        head = _span_head(self.tree, span)
        node = head
        path: tuple[str, ...] = ()
        for _ in range(self.config.max_arc_distance):
            rel = self.config.relation(self.tree.deprel(node))
            governor = self.tree.head(node)
            if governor == 0 or rel not in self.config.compound_relations:
                return None
            path = path + (rel,)
            node = governor
            phrase = set(self.tree.subtree_indices(node))
            found = self._best_context(phrase, span, head_pop)
            if found is not None:
                ctx, pop = found
                return DescriptorMatch(
                    post_id=self.post.post_id, head_span=span, context_span=ctx,
                    kind=PatternKind.COMPOUND, relation_path=path,
                    head_population=head_pop, context_population=pop)
        return None

    # -- CONJUNCTION --------------------------------------------------------

    def _conjuncts(self, head: int) -> list[int]:
        root = head
        while True:
            rel = self.config.relation(self.tree.deprel(root))
            if rel in self.config.conjunction_relations and self.tree.head(root) != 0:
                root = self.tree.head(root)
            else:
                break
        members = [root]
        stack = [root]
        while stack:
            node = stack.pop()
            for child in self.tree.children(node):
                if self.config.relation(self.tree.deprel(child)) in self.config.conjunction_relations:
                    members.append(child)
                    stack.append(child)
        return sorted(members)

    def _run_containing(self, token: int) -> Optional[tuple[int, int]]:
        for run in self.runs:
            if run[0] <= token <= run[1]:
                return run
        return None

    def _match_conjunction(self, span: tuple[int, int],
                           head_pop: Optional[int]) -> Optional[DescriptorMatch]:
        head = _span_head(self.tree, span)
        conjuncts = self._conjuncts(head)
        if len(conjuncts) < 2:
            return None
        final = max(conjuncts)
        if span[0] <= final <= span[1]:
            return None  # the final conjunct takes its own STATE/MODIFIER match
        final_run = self._run_containing(final)
        if final_run is None:
            return None
        final_pop = population_of(span_surface(self.post, final_run), self.index)
        carried = self._match_state(final_run)
        if carried is None:
            carried = self._match_modifier(final_run, final_pop)
        if carried is None:
            return None
        # Distribute, re-checking the population proxy against this mention.
        if not carried.context_is_state and not self._passes_population(
                carried.context_population, head_pop):
            return None
        return DescriptorMatch(
            post_id=self.post.post_id, head_span=span,
            context_span=carried.context_span, kind=PatternKind.CONJUNCTION,
            relation_path=("conj",) + carried.relation_path,
            head_population=None if carried.context_is_state else head_pop,
            context_population=carried.context_population,
            context_is_state=carried.context_is_state)


def match_descriptors(post: AnnotatedPost, mentions: Sequence[LocationMention],
                      config: PatternConfig, index: GazetteerIndex,
                      ) -> list[DescriptorMatch]:
    """Evaluate the patterns for each mention of one post, in span order."""
    if not mentions:
        return []
    matcher = _PostMatcher(post, config, index)
    matches = []
    for mention in mentions:
        if mention.post_id != post.post_id:
            raise MismatchError(f"mention {mention.key} does not belong to post {post.post_id}")
        found = matcher.match_mention(mention.span, mention.entry.population)
        if found is not None:
            matches.append(found)
    return matches


def annotate_mentions(mentions: Sequence[LocationMention],
                      matches: Sequence[DescriptorMatch]) -> list[LocationMention]:
    """Fill has_descriptor/descriptor_kind and flag context-span mentions.

    Idempotent; raises MismatchError when a match references an unknown
    mention key.
    """
    by_key = {m.key: m for m in mentions}
    kind_by_key: dict[tuple, PatternKind] = {}
    context_spans: dict[str, list[tuple[int, int]]] = {}
    for match in matches:
        key = (match.post_id, match.head_span[0], match.head_span[1])
        if key not in by_key:
            raise MismatchError(f"match references unknown mention {key}")
        kind_by_key[key] = match.kind
        context_spans.setdefault(match.post_id, []).append(match.context_span)

    out = []
    for mention in mentions:
        kind = kind_by_key.get(mention.key)
        overlaps = any(
            not (mention.span[1] < lo or mention.span[0] > hi)
            for lo, hi in context_spans.get(mention.post_id, ())
        )
        out.append(replace(mention,
                           has_descriptor=kind is not None,
                           descriptor_kind=kind.value if kind else None,
                           is_context=overlaps))
    return out


class AlignmentError(KeyError):
    """Predicted and gold mention sets do not share the same keys."""


@dataclass
class EvalReport:
    precision: float
    recall: float
    per_kind_confusion: dict
    true_positives: int
    false_positives: int
    false_negatives: int
    degenerate_precision: bool = False

    def to_dict(self) -> dict:
        return {
            "precision": self.precision, "recall": self.recall,
            "true_positives": self.true_positives,
            "false_positives": self.false_positives,
            "false_negatives": self.false_negatives,
            "degenerate_precision": self.degenerate_precision,
            "per_kind_confusion": {f"{g}->{p}": c for (g, p), c in
                                   sorted(self.per_kind_confusion.items())},
        }


def evaluate_against_gold(predicted: Mapping[tuple, Optional[str]],
                          gold: Mapping[tuple, Optional[str]]) -> EvalReport:
    """Precision/recall over descriptor presence plus a kind confusion table.

    Both maps go from mention key to a kind name or None. With zero
    predicted positives precision is reported as 1.0 with the degenerate
    flag set.
    """
    if set(predicted) != set(gold):
        missing = set(gold) ^ set(predicted)
        raise AlignmentError(f"mention keys differ, e.g. {sorted(missing)[:3]}")
    tp = fp = fn = 0
    confusion: dict[tuple[str, str], int] = {}
    for key in gold:
        g, p = gold[key], predicted[key]
        gname, pname = g or "none", p or "none"
        confusion[(gname, pname)] = confusion.get((gname, pname), 0) + 1
        if p is not None and g is not None:
            tp += 1
        elif p is not None:
            fp += 1
        elif g is not None:
            fn += 1
    degenerate = (tp + fp) == 0
    precision = 1.0 if degenerate else tp / (tp + fp)
    recall = 1.0 if (tp + fn) == 0 else tp / (tp + fn)
    return EvalReport(precision=precision, recall=recall,
                      per_kind_confusion=confusion, true_positives=tp,
                      false_positives=fp, false_negatives=fn,
                      degenerate_precision=degenerate)
