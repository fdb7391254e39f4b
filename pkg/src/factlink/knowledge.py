"""Structural ontology, domain knowledge tables, and term lexicons.

A knowledge base aggregates five meta-tables (concept ontology, derivation
edges, foreign keys, similar concepts, tool bindings) plus the lexicon that
binds natural language terms to schema names. It is immutable after load
and shared freely across queries.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    AmbiguousAttribute,
    AmbiguousConcept,
    InconsistentKnowledge,
    UnknownAttribute,
    UnknownConcept,
)

LEXICON_KINDS = ("concept", "attribute", "relation", "action-verb")

# Default mapping for condition predicates: a subject satisfies the predicate
# when it is linked to an object of the target concept (the subject then
# carries that concept's key attribute among its derived facts).
DEFAULT_CONDITION_LEXICON = {"protein coding": "Protein"}


@dataclass(frozen=True)
class OntologyEntry:
    """One concept: its backing table, key attribute, and non-key attributes."""

    concept_name: str
    table_name: str
    key_attribute: str
    attributes: tuple[str, ...]

    @property
    def full_attributes(self) -> tuple[str, ...]:
        return (self.key_attribute,) + self.attributes


@dataclass(frozen=True)
class DerivationEdge:
    concept_a: str
    concept_b: str


@dataclass(frozen=True)
class ForeignKeyLink:
    table_x: str
    table_y: str
    column_x: str
    column_y: str


@dataclass(frozen=True)
class SimilarConcept:
    concept_x: str
    concept_y: str
    relations: tuple[str, ...]


@dataclass(frozen=True)
class ToolBinding:
    """Relation name bound to tool names in preference order."""

    relation: str
    operations: tuple[str, ...]


@dataclass(frozen=True)
class LexiconEntry:
    surface_term: str
    kind: str
    target: str
    scope: str | None = None


@dataclass(frozen=True)
class KnowledgeOptions:
    symmetric_derivations: bool = True


def normalize_term(term: str) -> str:
    """Lowercase, trim, and collapse internal whitespace."""
    return re.sub(r"\s+", " ", term.strip().lower())


def singularize(term: str) -> str:
    """Naive plural stripping: drop a trailing 's' unless it ends in 'ss'."""
    if len(term) > 3 and term.endswith("s") and not term.endswith("ss"):
        return term[:-1]
    return term


def split_camel(name: str) -> list[str]:
    """Split a schema name into words, keeping acronym runs together."""
    parts = re.findall(r"[A-Z]+(?=[A-Z][a-z])|[A-Z][a-z]+|[A-Z]+|[a-z]+|\d+", name)
    return parts or [name]


@dataclass(frozen=True)
class KnowledgeBase:
    ontology: tuple[OntologyEntry, ...] = ()
    derivatives: tuple[DerivationEdge, ...] = ()
    foreign_keys: tuple[ForeignKeyLink, ...] = ()
    similar_concepts: tuple[SimilarConcept, ...] = ()
    tools: tuple[ToolBinding, ...] = ()
    lexicon: tuple[LexiconEntry, ...] = ()
    options: KnowledgeOptions = KnowledgeOptions()
    condition_lexicon: tuple[tuple[str, str], ...] = tuple(
        DEFAULT_CONDITION_LEXICON.items()
    )
    # derived lookup structures, excluded from value equality
    _by_concept: dict = field(default_factory=dict, compare=False, repr=False)
    _by_table: dict = field(default_factory=dict, compare=False, repr=False)
    _lexicon_index: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        self._validate()
        for entry in self.ontology:
            self._by_concept[entry.concept_name] = entry
            self._by_table[entry.table_name] = entry
        self._build_lexicon_index()

    # --- validation -------------------------------------------------------

    def _validate(self) -> None:
        concepts: set[str] = set()
        tables: set[str] = set()
        for entry in self.ontology:
            if entry.concept_name in concepts:
                raise InconsistentKnowledge(
                    f"duplicate concept name {entry.concept_name!r} in ontology"
                )
            if entry.table_name in tables:
                raise InconsistentKnowledge(
                    f"duplicate table name {entry.table_name!r} in ontology"
                )
            if entry.key_attribute in entry.attributes:
                raise InconsistentKnowledge(
                    f"concept {entry.concept_name!r} lists its key "
                    f"{entry.key_attribute!r} among its attributes"
                )
            if len(set(entry.attributes)) != len(entry.attributes):
                raise InconsistentKnowledge(
                    f"concept {entry.concept_name!r} has duplicate attributes"
                )
            concepts.add(entry.concept_name)
            tables.add(entry.table_name)
        table_attrs = {
            e.table_name: set(e.full_attributes) for e in self.ontology
        }
        for edge in self.derivatives:
            for c in (edge.concept_a, edge.concept_b):
                if c not in concepts:
                    raise InconsistentKnowledge(
                        f"derivation edge references unknown concept {c!r}"
                    )
        for link in self.foreign_keys:
            for t in (link.table_x, link.table_y):
                if t not in table_attrs:
                    raise InconsistentKnowledge(
                        f"foreign key references unknown table {t!r}"
                    )
            if link.column_x not in table_attrs[link.table_x]:
                raise InconsistentKnowledge(
                    f"foreign key column {link.column_x!r} is not an attribute "
                    f"of table {link.table_x!r}"
                )
            if link.column_y not in table_attrs[link.table_y]:
                raise InconsistentKnowledge(
                    f"foreign key column {link.column_y!r} is not an attribute "
                    f"of table {link.table_y!r}"
                )
        for sim in self.similar_concepts:
            if not sim.relations:
                raise InconsistentKnowledge(
                    f"similar-concept row {sim.concept_x!r}/{sim.concept_y!r} "
                    "has no relations"
                )
            for c in (sim.concept_x, sim.concept_y):
                if c not in concepts:
                    raise InconsistentKnowledge(
                        f"similar-concept row references unknown concept {c!r}"
                    )
        for binding in self.tools:
            if not binding.operations:
                raise InconsistentKnowledge(
                    f"tool binding {binding.relation!r} has an empty operation list"
                )
        seen: set[tuple[str, str, str | None]] = set()
        for entry in self.lexicon:
            if entry.kind not in LEXICON_KINDS:
                raise InconsistentKnowledge(
                    f"lexicon entry {entry.surface_term!r} has unknown kind "
                    f"{entry.kind!r}"
                )
            key = (normalize_term(entry.surface_term), entry.kind, entry.scope)
            if key in seen:
                raise InconsistentKnowledge(
                    f"duplicate lexicon entry {entry.surface_term!r} "
                    f"({entry.kind}, scope={entry.scope})"
                )
            seen.add(key)

    # --- lexicon ----------------------------------------------------------

    def _add_index_entry(
        self, term: str, kind: str, target: str, scope: str | None, user: bool
    ) -> None:
        bucket = self._lexicon_index.setdefault((kind, normalize_term(term)), [])
        bucket.append((scope, target, user))

    def _build_lexicon_index(self) -> None:
        for entry in self.ontology:
            self._add_index_entry(
                entry.concept_name, "concept", entry.concept_name, None, False
            )
            # last camel-case word of an attribute is registered only when it
            # names a single attribute within the concept
            tails: dict[str, list[str]] = {}
            for attr in entry.full_attributes:
                words = [w.lower() for w in split_camel(attr)]
                self._add_index_entry(attr, "attribute", attr, entry.concept_name, False)
                phrase = " ".join(words)
                if phrase != attr.lower():
                    self._add_index_entry(
                        phrase, "attribute", attr, entry.concept_name, False
                    )
                tails.setdefault(words[-1], []).append(attr)
            for tail, attrs in tails.items():
                if len(attrs) == 1 and tail != attrs[0].lower():
                    self._add_index_entry(
                        tail, "attribute", attrs[0], entry.concept_name, False
                    )
        for sim in self.similar_concepts:
            for relation in sim.relations:
                self._add_index_entry(relation, "relation", relation, None, False)
        for entry in self.lexicon:
            self._add_index_entry(
                entry.surface_term, entry.kind, entry.target, entry.scope, True
            )

    def _lexicon_lookup(self, kind: str, term: str) -> list[tuple[str | None, str]]:
        """All (scope, target) bindings for a term; user entries shadow auto ones."""
        normalized = normalize_term(term)
        candidates = list(self._lexicon_index.get((kind, normalized), []))
        if not candidates:
            candidates = list(
                self._lexicon_index.get((kind, singularize(normalized)), [])
            )
        user = [(s, t) for s, t, u in candidates if u]
        if user:
            return user
        return [(s, t) for s, t, u in candidates if not u]

    # --- accessors --------------------------------------------------------

    def concept(self, name: str) -> OntologyEntry:
        try:
            return self._by_concept[name]
        except KeyError:
            raise UnknownConcept(f"no concept named {name!r}") from None

    def has_concept(self, name: str) -> bool:
        return name in self._by_concept

    def concept_for_table(self, table_name: str) -> OntologyEntry | None:
        return self._by_table.get(table_name)

    def concept_names(self) -> list[str]:
        return [e.concept_name for e in self.ontology]

    def derivation_edges(self) -> list[tuple[str, str]]:
        """Directed derivation edges, closed under inversion when configured."""
        edges: dict[tuple[str, str], None] = {}
        for edge in self.derivatives:
            edges[(edge.concept_a, edge.concept_b)] = None
            if self.options.symmetric_derivations:
                edges[(edge.concept_b, edge.concept_a)] = None
        return list(edges)

    def derived_concepts(self, concept: str) -> list[str]:
        return [b for a, b in self.derivation_edges() if a == concept]

    def der_reachable(self, concept: str) -> list[str]:
        """Concepts reachable from `concept` via derivation edges, BFS order."""
        seen = {concept}
        order: list[str] = []
        frontier = [concept]
        while frontier:
            nxt: list[str] = []
            for c in frontier:
                for d in self.derived_concepts(c):
                    if d not in seen:
                        seen.add(d)
                        order.append(d)
                        nxt.append(d)
            frontier = nxt
        return order

    def tools_for_relation(self, relation: str) -> tuple[str, ...]:
        for binding in self.tools:
            if binding.relation == relation:
                return binding.operations
        return ()

    def condition_target(self, predicate: str) -> str | None:
        normalized = normalize_term(predicate)
        for surface, target in self.condition_lexicon:
            if normalize_term(surface) == normalized:
                return target
        return None

    # --- term resolution ----------------------------------------------------

    def resolve_concept(self, term: str) -> str:
        """Resolve a surface term to a concept name via the lexicon."""
        hits = self._lexicon_lookup("concept", term)
        targets = sorted({t for _, t in hits})
        if not targets:
            raise UnknownConcept(f"term {term!r} does not resolve to a concept")
        if len(targets) > 1:
            raise AmbiguousConcept(
                f"term {term!r} resolves to multiple concepts: {targets}"
            )
        return targets[0]

    def resolve_relation(self, term: str) -> str | None:
        hits = self._lexicon_lookup("relation", term)
        targets = sorted({t for _, t in hits})
        return targets[0] if len(targets) == 1 else None

    def resolve_attribute(self, term: str, concept: str | None = None) -> tuple[str, str]:
        """Resolve a surface term to (concept, attribute).

        Prefers the given concept's own attributes and falls back to concepts
        reachable via derivation edges, so a property stored on a derivative
        still resolves for the source concept.
        """
        hits = self._lexicon_lookup("attribute", term)
        if not hits:
            raise UnknownAttribute(f"term {term!r} does not resolve to an attribute")

        def matches_for(concept_name: str) -> list[str]:
            entry = self._by_concept.get(concept_name)
            if entry is None:
                return []
            found: dict[str, None] = {}
            for scope, target in hits:
                if scope == concept_name:
                    found[target] = None
                elif scope is None and target in entry.full_attributes:
                    found[target] = None
            return list(found)

        if concept is not None:
            search = [concept] + self.der_reachable(concept)
            for candidate in search:
                found = matches_for(candidate)
                if len(found) == 1:
                    return candidate, found[0]
                if len(found) > 1:
                    raise AmbiguousAttribute(
                        f"term {term!r} matches several attributes of "
                        f"{candidate!r}: {sorted(found)}"
                    )
            raise UnknownAttribute(
                f"term {term!r} resolves to no attribute of {concept!r} "
                "or its derivatives"
            )

        matched: list[tuple[str, str]] = []
        for entry in self.ontology:
            for attr in matches_for(entry.concept_name):
                matched.append((entry.concept_name, attr))
        if not matched:
            raise UnknownAttribute(f"term {term!r} matches no known attribute")
        if len(matched) > 1:
            raise AmbiguousAttribute(
                f"term {term!r} is ambiguous without a concept: {matched}"
            )
        return matched[0]

    # --- augmentation -------------------------------------------------------

    def with_table_columns(self, tables: dict[str, list[str]]) -> KnowledgeBase:
        """Admit ingested columns absent from the declared attribute sets.

        Returns a new knowledge base whose ontology entries include every
        column of the corresponding ingested table. Unknown columns are
        appended after declared ones, preserving declaration order.
        """
        new_entries: list[OntologyEntry] = []
        for entry in self.ontology:
            columns = tables.get(entry.table_name)
            if columns is None:
                new_entries.append(entry)
                continue
            extra = [
                c
                for c in columns
                if c != entry.key_attribute and c not in entry.attributes
            ]
            new_entries.append(
                OntologyEntry(
                    concept_name=entry.concept_name,
                    table_name=entry.table_name,
                    key_attribute=entry.key_attribute,
                    attributes=entry.attributes + tuple(extra),
                )
            )
        return KnowledgeBase(
            ontology=tuple(new_entries),
            derivatives=self.derivatives,
            foreign_keys=self.foreign_keys,
            similar_concepts=self.similar_concepts,
            tools=self.tools,
            lexicon=self.lexicon,
            options=self.options,
            condition_lexicon=self.condition_lexicon,
        )


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise InconsistentKnowledge(message)


def load_knowledge(source: dict | str | Path) -> KnowledgeBase:
    """Load a knowledge base from a JSON document (dict, path, or JSON text).

    Raises InconsistentKnowledge naming the first violated invariant.
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        if path.exists():
            doc = json.loads(path.read_text(encoding="utf-8"))
        else:
            doc = json.loads(str(source))
    else:
        doc = source
    _require(isinstance(doc, dict), "knowledge document must be a JSON object")

    ontology = tuple(
        OntologyEntry(
            concept_name=item["concept_name"],
            table_name=item["table_name"],
            key_attribute=item["key_attribute"],
            attributes=tuple(item.get("attributes", ())),
        )
        for item in doc.get("ontology", ())
    )
    derivatives = tuple(
        DerivationEdge(concept_a=item["concept_a"], concept_b=item["concept_b"])
        for item in doc.get("derivatives", ())
    )
    foreign_keys = tuple(
        ForeignKeyLink(
            table_x=item["table_x"],
            table_y=item["table_y"],
            column_x=item["column_x"],
            column_y=item["column_y"],
        )
        for item in doc.get("foreign_keys", ())
    )
    similar_concepts = tuple(
        SimilarConcept(
            concept_x=item["concept_x"],
            concept_y=item["concept_y"],
            relations=tuple(item["relations"]),
        )
        for item in doc.get("similar_concepts", ())
    )
    tools = tuple(
        ToolBinding(relation=item["relation"], operations=tuple(item["operations"]))
        for item in doc.get("tools", ())
    )
    lexicon = tuple(
        LexiconEntry(
            surface_term=item["surface_term"],
            kind=item["kind"],
            target=item["target"],
            scope=item.get("scope"),
        )
        for item in doc.get("lexicon", ())
    )
    options_doc = doc.get("options", {})
    options = KnowledgeOptions(
        symmetric_derivations=bool(options_doc.get("symmetric_derivations", True))
    )
    condition = doc.get("condition_lexicon")
    if condition is None:
        condition_pairs = tuple(DEFAULT_CONDITION_LEXICON.items())
    else:
        condition_pairs = tuple((k, v) for k, v in condition.items())
    return KnowledgeBase(
        ontology=ontology,
        derivatives=derivatives,
        foreign_keys=foreign_keys,
        similar_concepts=similar_concepts,
        tools=tools,
        lexicon=lexicon,
        options=options,
        condition_lexicon=condition_pairs,
    )
