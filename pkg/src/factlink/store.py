"""Canonical fact store: flat tables broken into concept/key/attribute/value rows.

Each base-table row becomes one fact per column; the key column yields a
self-identifying fact. The store is built single-threaded at load time and
is immutable afterwards except for virtual seeds, which must be asserted
before a query's evaluation begins.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .errors import DuplicateKey, EmptyKeyValue, MissingKeyColumn
from .knowledge import OntologyEntry
from .tables import RelationalTable

EXPORT_HEADER = ("Concept", "PrimaryKey", "AttributeName", "AttributeValue")


@dataclass(frozen=True)
class CanonicalFact:
    concept: str
    primary_key: str
    attribute: str
    value: str
    virtual: bool = False

    def key(self) -> tuple[str, str, str, str]:
        return (self.concept, self.primary_key, self.attribute, self.value)


class CanonicalStore:
    """In-memory store of canonical facts with hash indexes for joins."""

    def __init__(self) -> None:
        self._facts: dict[tuple[str, str, str, str], CanonicalFact] = {}
        self._by_object: dict[tuple[str, str], list[CanonicalFact]] = {}
        self._by_concept_attr: dict[tuple[str, str], list[CanonicalFact]] = {}
        self._keys_by_concept: dict[str, dict[str, None]] = {}

    def __len__(self) -> int:
        return len(self._facts)

    @property
    def facts(self) -> list[CanonicalFact]:
        return list(self._facts.values())

    def _insert(self, fact: CanonicalFact) -> bool:
        if fact.key() in self._facts:
            return False
        self._facts[fact.key()] = fact
        self._by_object.setdefault((fact.concept, fact.primary_key), []).append(fact)
        self._by_concept_attr.setdefault((fact.concept, fact.attribute), []).append(fact)
        self._keys_by_concept.setdefault(fact.concept, {})[fact.primary_key] = None
        return True

    # --- ingestion ----------------------------------------------------------

    def canonicalize(
        self, table: RelationalTable, entry: OntologyEntry
    ) -> list[CanonicalFact]:
        """Break a table into canonical facts and add them to the store.

        Empty cells yield no fact. Returns the facts added, in row-major
        column order.
        """
        table.validate()
        if entry.key_attribute not in table.columns:
            raise MissingKeyColumn(
                f"key attribute {entry.key_attribute!r} of concept "
                f"{entry.concept_name!r} is not a column of table {table.name!r}"
            )
        key_index = table.column_index(entry.key_attribute)
        existing = set(self._keys_by_concept.get(entry.concept_name, ()))
        seen: set[str] = set()
        for i, row in enumerate(table.rows):
            key = row[key_index]
            if not key:
                raise EmptyKeyValue(f"table {table.name!r} row {i} has an empty key")
            if key in seen or key in existing:
                raise DuplicateKey(
                    f"table {table.name!r} has duplicate key value {key!r}"
                )
            seen.add(key)
        added: list[CanonicalFact] = []
        for row in table.rows:
            key = row[key_index]
            for column, value in zip(table.columns, row):
                if value == "":
                    continue
                fact = CanonicalFact(
                    concept=entry.concept_name,
                    primary_key=key,
                    attribute=column,
                    value=value,
                )
                if self._insert(fact):
                    added.append(fact)
        return added

    def seed_virtual(
        self, concept: str, key_value: str, entry: OntologyEntry
    ) -> CanonicalFact:
        """Assert a virtual self-identifying fact for a key absent from base tables.

        Idempotent: seeding a key that already has its self-identifying fact
        leaves the store unchanged.
        """
        if entry.concept_name != concept:
            raise ValueError(
                f"ontology entry {entry.concept_name!r} does not describe {concept!r}"
            )
        existing = self.lookup(
            concept=concept, primary_key=key_value, attribute=entry.key_attribute
        )
        if existing:
            return existing[0]
        fact = CanonicalFact(
            concept=concept,
            primary_key=key_value,
            attribute=entry.key_attribute,
            value=key_value,
            virtual=True,
        )
        self._insert(fact)
        return fact

    # --- lookup -------------------------------------------------------------

    def lookup(
        self,
        concept: str | None = None,
        primary_key: str | None = None,
        attribute: str | None = None,
        value: str | None = None,
    ) -> list[CanonicalFact]:
        """All facts matching every bound argument; None matches anything."""
        if concept is not None and primary_key is not None:
            pool = self._by_object.get((concept, primary_key), [])
        elif concept is not None and attribute is not None:
            pool = self._by_concept_attr.get((concept, attribute), [])
        else:
            pool = self._facts.values()
        return [
            f
            for f in pool
            if (concept is None or f.concept == concept)
            and (primary_key is None or f.primary_key == primary_key)
            and (attribute is None or f.attribute == attribute)
            and (value is None or f.value == value)
        ]

    def object_facts(self, concept: str, primary_key: str) -> list[CanonicalFact]:
        return list(self._by_object.get((concept, primary_key), []))

    def keys_for(self, concept: str) -> list[str]:
        return list(self._keys_by_concept.get(concept, ()))

    def has_value(self, concept: str, attribute: str, value: str) -> bool:
        return any(
            f.value == value for f in self._by_concept_attr.get((concept, attribute), [])
        )

    def values_matching(
        self, concept: str, attribute: str, text: str
    ) -> list[str]:
        """Stored values equal to `text` or extending it, case-insensitively."""
        needle = text.lower()
        out: dict[str, None] = {}
        for fact in self._by_concept_attr.get((concept, attribute), []):
            candidate = fact.value.lower()
            if candidate == needle or candidate.startswith(needle):
                out[fact.value] = None
        return list(out)

    # --- reconstruction and export -------------------------------------------

    def reconstruct(
        self, entry: OntologyEntry, columns: list[str] | None = None
    ) -> RelationalTable:
        """Pivot a concept's non-virtual facts back into its base table shape."""
        if columns is None:
            columns = list(entry.full_attributes)
        rows: list[tuple[str, ...]] = []
        for key in self.keys_for(entry.concept_name):
            facts = [
                f for f in self.object_facts(entry.concept_name, key) if not f.virtual
            ]
            if not facts:
                continue
            by_attr = {f.attribute: f.value for f in facts}
            rows.append(tuple(by_attr.get(c, "") for c in columns))
        return RelationalTable(name=entry.table_name, columns=columns, rows=rows)

    def export_csv(self, path: str | Path) -> None:
        """Write all facts (including virtual ones) as a 4-column delimited file."""
        with Path(path).open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(EXPORT_HEADER)
            for fact in self._facts.values():
                writer.writerow(
                    [fact.concept, fact.primary_key, fact.attribute, fact.value]
                )
