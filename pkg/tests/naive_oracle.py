"""Reference evaluators used as oracles, plus a random instance generator.

The naive evaluator recomputes every rule over the full fact sets each round
until nothing changes; no deltas, no indexes, no stored provenance. It shares
only the tool gateway with the engine under test, never its join machinery.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

from factlink.errors import ToolUnavailable
from factlink.gateway import ToolGateway, ToolSpec
from factlink.knowledge import (
    DerivationEdge,
    ForeignKeyLink,
    KnowledgeBase,
    OntologyEntry,
    KnowledgeOptions,
    SimilarConcept,
    ToolBinding,
)
from factlink.store import CanonicalStore
from factlink.tables import RelationalTable

Fact = tuple[str, str, str, str]


def naive_saturate(
    facts: list[Fact],
    kb: KnowledgeBase,
    gateway: ToolGateway,
    strategy: str,
) -> set[Fact]:
    """Naive bottom-up evaluation of the direct/link/inherit/tool rules."""
    concept_of_table = {e.table_name: e.concept_name for e in kb.ontology}
    entry_of = {e.concept_name: e for e in kb.ontology}

    def hops(concept: str) -> list[tuple[str, str, str]]:
        entry = entry_of[concept]
        out = []
        for link in kb.foreign_keys:
            if link.table_x == entry.table_name:
                target = concept_of_table.get(link.table_y)
                if (
                    target
                    and link.column_x in entry.full_attributes
                    and link.column_y in entry_of[target].full_attributes
                ):
                    out.append((link.column_x, target, link.column_y))
            if link.table_y == entry.table_name:
                target = concept_of_table.get(link.table_x)
                if (
                    target
                    and link.column_y in entry.full_attributes
                    and link.column_x in entry_of[target].full_attributes
                ):
                    out.append((link.column_y, target, link.column_x))
        return out

    def verdict(ops: tuple[str, ...], pk_c: str, pk_r: str) -> bool:
        for op in ops:
            try:
                return gateway.apply_op(op, pk_c, pk_r)
            except ToolUnavailable:
                continue
        return False

    res: set[Fact] = set(facts)
    if strategy == "direct":
        return res

    rel: set[Fact] = set()
    changed = True
    while changed:
        changed = False
        new_rel: set[Fact] = set()
        for con, der in kb.derivation_edges():
            for local_col, target, target_col in hops(con):
                if target != der:
                    continue
                for c1, p1, a1, v1 in facts:
                    if (c1, a1) != (con, local_col):
                        continue
                    for c2, p2, a2, v2 in facts:
                        if (c2, a2) != (target, target_col) or v2 != v1:
                            continue
                        if (target, p2) != (con, p1):
                            new_rel.add((con, target, p1, p2))
        for con, derc, pkc, pkdc in list(rel):
            for local_col, target, target_col in hops(derc):
                for c1, p1, a1, v1 in facts:
                    if (c1, p1, a1) != (derc, pkdc, local_col):
                        continue
                    for c2, p2, a2, v2 in facts:
                        if (c2, a2) != (target, target_col) or v2 != v1:
                            continue
                        if (target, p2) != (con, pkc):
                            new_rel.add((con, target, pkc, p2))
        if new_rel - rel:
            rel |= new_rel
            changed = True

    changed = True
    while changed:
        changed = False
        new_res: set[Fact] = set()
        for con, der, pkc, pkd in rel:
            for c, p, a, v in res:
                if (c, p) == (der, pkd):
                    new_res.add((con, pkc, a, v))
        if strategy == "interpretive":
            objects = {(c, p) for c, p, _, _ in res}
            for sim in kb.similar_concepts:
                for relation in sim.relations:
                    ops = kb.tools_for_relation(relation)
                    if not ops:
                        continue
                    for oc, opk in objects:
                        if oc != sim.concept_x:
                            continue
                        for pc, ppk in objects:
                            if pc != sim.concept_y:
                                continue
                            if not verdict(ops, opk, ppk):
                                continue
                            key_attr = entry_of[sim.concept_y].key_attribute
                            for c, p, a, v in res:
                                if (c, p) == (sim.concept_y, ppk) and a != key_attr:
                                    new_res.add((sim.concept_x, opk, a, v))
        if new_res - res:
            res |= new_res
            changed = True
    return res


# --- random instances ---------------------------------------------------------


@dataclass
class RandomInstance:
    kb: KnowledgeBase
    store: CanonicalStore
    gateway: ToolGateway
    facts: list[Fact]


def make_random_instance(seed: int, fixture_dir: Path) -> RandomInstance:
    """A small random database, knowledge base, and fixture gateway."""
    rng = random.Random(seed)
    n_concepts = rng.randint(1, 5)
    entries = []
    for i in range(n_concepts):
        n_attrs = rng.randint(0, 3)
        entries.append(
            OntologyEntry(
                concept_name=f"C{i}",
                table_name=f"T{i}",
                key_attribute=f"K{i}",
                attributes=tuple(f"A{i}_{j}" for j in range(n_attrs)),
            )
        )

    keys: dict[str, list[str]] = {}
    counter = 0
    for entry in entries:
        n_rows = rng.randint(0, 4)
        keys[entry.concept_name] = [f"k{counter + r}" for r in range(n_rows)]
        counter += n_rows
    all_keys = [k for ks in keys.values() for k in ks]
    pool = [f"v{i}" for i in range(6)] + all_keys

    tables: dict[str, RelationalTable] = {}
    budget = 50
    for entry in entries:
        rows = []
        for key in keys[entry.concept_name]:
            if budget - len(entry.full_attributes) < 0:
                break
            cells = [key]
            for _ in entry.attributes:
                cells.append("" if rng.random() < 0.15 else rng.choice(pool))
            rows.append(tuple(cells))
            budget -= len(entry.full_attributes)
        tables[entry.table_name] = RelationalTable(
            name=entry.table_name,
            columns=[entry.key_attribute, *entry.attributes],
            rows=rows,
        )

    derivatives = []
    for _ in range(rng.randint(0, 2)):
        a = rng.choice(entries).concept_name
        b = rng.choice(entries).concept_name
        derivatives.append(DerivationEdge(concept_a=a, concept_b=b))

    foreign_keys = []
    for _ in range(rng.randint(0, 3)):
        ex = rng.choice(entries)
        ey = rng.choice(entries)
        foreign_keys.append(
            ForeignKeyLink(
                table_x=ex.table_name,
                table_y=ey.table_name,
                column_x=rng.choice(ex.full_attributes),
                column_y=rng.choice(ey.full_attributes),
            )
        )

    relations = ["R1", "R2"]
    similar = []
    for _ in range(rng.randint(0, 2)):
        cx = rng.choice(entries).concept_name
        cy = rng.choice(entries).concept_name
        chosen = tuple(r for r in relations if rng.random() < 0.7) or ("R1",)
        similar.append(SimilarConcept(concept_x=cx, concept_y=cy, relations=chosen))

    tools = [
        ToolBinding(relation="R1", operations=("ToolA", "ToolB")),
        ToolBinding(relation="R2", operations=("ToolC",)),
    ]

    kb = KnowledgeBase(
        ontology=tuple(entries),
        derivatives=tuple(dict.fromkeys(derivatives)),
        foreign_keys=tuple(foreign_keys),
        similar_concepts=tuple(similar),
        tools=tuple(tools),
        options=KnowledgeOptions(symmetric_derivations=rng.random() < 0.7),
    )

    gateway = ToolGateway()
    for tool_name in ("ToolA", "ToolB", "ToolC"):
        if rng.random() < 0.25:
            continue  # unregistered tools exercise the unavailable ladder
        n_pairs = rng.randint(0, 5)
        pairs = []
        for _ in range(n_pairs):
            if not all_keys:
                break
            pairs.append((rng.choice(all_keys), rng.choice(all_keys)))
        path = fixture_dir / f"{tool_name}_{seed}.csv"
        lines = ["IdA,IdB"] + [f"{a},{b}" for a, b in pairs]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        gateway.register(
            ToolSpec(
                name=tool_name,
                verifies=("R1", "R2"),
                adapter="fixture",
                location=str(path),
                extract_fields=("IdB",),
                submit_schema=("IdA",),
                symmetric=rng.random() < 0.5,
            )
        )

    store = CanonicalStore()
    for entry in entries:
        store.canonicalize(tables[entry.table_name], entry)
    facts = [(f.concept, f.primary_key, f.attribute, f.value) for f in store.facts]
    return RandomInstance(kb=kb, store=store, gateway=gateway, facts=facts)
