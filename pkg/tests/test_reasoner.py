"""Deductive engine: rule layers, goal solving, provenance."""

from __future__ import annotations

from pathlib import Path

import pytest

from factlink.errors import GoalSyntaxError, UnknownAttributeInGoal, UnknownConceptInGoal
from factlink.knowledge import KnowledgeBase, OntologyEntry
from factlink.reasoner import (
    DeductionEngine,
    GoalAtom,
    Var,
    parse_goals,
    trace_dict,
)
from factlink.store import CanonicalStore

from naive_oracle import make_random_instance, naive_saturate


@pytest.fixture()
def engine(system):
    return DeductionEngine(system.store, system.kb, system.gateway)


def test_eval_direct_mirrors_store(engine, store):
    facts = engine.eval_direct()
    assert len(facts) == len(store)
    assert all(f.provenance.kind == "direct" for f in facts)
    assert ("Gene", "1246500", "GeneName", "repA1") in {f.key() for f in facts}


def test_eval_direct_empty_store(kb, gateway):
    engine = DeductionEngine(CanonicalStore(), kb, gateway)
    assert engine.eval_direct() == []


def test_eval_rel_bundled(engine):
    rels = {r.key(): r for r in engine.eval_rel()}
    assert ("Gene", "Protein", "1246500", "O85067") in rels
    assert ("Gene", "Protein", "30050", "Q60584") in rels  # FBXW2 join, by hand
    assert ("Protein", "Gene", "Q60584", "30050") in rels  # inverted derivation
    hop = rels[("Gene", "Protein", "1246500", "O85067")].path
    assert hop == (("Entrez", "UniProtProteinID", "UniProt", "ProteinID"),)


def test_eval_rel_without_derivatives(system):
    kb = KnowledgeBase(
        ontology=system.kb.ontology,
        foreign_keys=system.kb.foreign_keys,
    )
    engine = DeductionEngine(system.store, kb, system.gateway)
    assert engine.eval_rel() == []


def test_eval_indirect_one_step(engine):
    rels = engine.eval_rel()
    direct = engine.eval_direct()
    derived = {f.key() for f in engine.eval_indirect(direct, rels)}
    assert ("Gene", "1246500", "Function", "Plasmid maintenance") in derived
    assert ("Gene", "30050", "Function", "Substrate recognition") in derived
    assert engine.eval_indirect(direct, []) == []


def test_eval_interpretive_one_step(engine):
    base = engine.eval_direct()
    copies = {f.key() for f in engine.eval_interpretive(base)}
    assert ("Gene", "30050", "DNASequence", "CTCTTTCTTTCT ...") in copies
    assert ("Gene", "26190", "DNASequence", "CTCTTTCTTTCG ...") in copies
    # the partner's self-identifying key fact is never copied
    assert ("Gene", "30050", "GeneID", "26190") not in copies


def test_eval_interpretive_empty_similar_concepts(system):
    kb = KnowledgeBase(
        ontology=system.kb.ontology,
        derivatives=system.kb.derivatives,
        foreign_keys=system.kb.foreign_keys,
        tools=system.kb.tools,
    )
    engine = DeductionEngine(system.store, kb, system.gateway)
    assert engine.eval_interpretive(engine.eval_direct()) == []


def test_saturation_reaches_fig2f_chain(system):
    store, kb = system.store, system.kb
    store.seed_virtual("Protein", "Q9UKT8", kb.concept("Protein"))
    engine = DeductionEngine(store, kb, system.gateway)
    sat = engine.saturate("interpretive")
    assert ("Gene", "26190", "Function", "Substrate recognition") in sat.res
    assert ("Protein", "Q9UKT8", "Function", "Substrate recognition") in sat.res


def test_solve_direct_uniprot_id(engine):
    result = engine.solve(
        "res('Gene',Pk,'GeneName','repA1'), res('Gene',Pk,'UniProtProteinID',Val)",
        "direct",
    )
    assert result.bindings_table() == [("1246500", "O85067")]


def test_solve_direct_function_fails(engine):
    result = engine.solve(
        "res('Gene',Pk,'GeneName','repA1'), res('Gene',Pk,'Function',Val)", "direct"
    )
    assert result.bindings_table() == []


def test_solve_indirect_function_succeeds(engine):
    result = engine.solve(
        "res('Gene',Pk,'GeneName','repA1'), res('Gene',Pk,'Function',Val)", "indirect"
    )
    assert result.bindings_table() == [("1246500", "Plasmid maintenance")]


def test_solve_strategy_monotonicity(engine):
    goals = "res('Protein',Pk,'ProteinName',Name), res('Protein',Pk,'DNASequence',Val)"
    direct = set(engine.solve(goals, "direct").bindings_table())
    indirect = set(engine.solve(goals, "indirect").bindings_table())
    interpretive = set(engine.solve(goals, "interpretive").bindings_table())
    assert direct <= indirect <= interpretive


def test_solve_validates_goal_constants(engine):
    with pytest.raises(UnknownConceptInGoal):
        engine.solve("res('Ghost',Pk,'GeneName',V)")
    with pytest.raises(UnknownAttributeInGoal):
        engine.solve("res('Gene',Pk,'Flavor',V)")


def test_parse_goals_syntax():
    atoms = parse_goals("res('Gene', Pk, 'GeneName', 'repA1'), res('Gene', Pk, 'Function', Val)")
    assert atoms[0] == GoalAtom("Gene", Var("Pk"), "GeneName", "repA1")
    assert atoms[1].value == Var("Val")
    anon = parse_goals("res('Gene', _, 'GeneName', _)")[0]
    assert isinstance(anon.primary_key, Var) and isinstance(anon.value, Var)
    assert anon.primary_key != anon.value  # anonymous variables stay distinct
    for bad in ("", "res('Gene', Pk)", "nonsense(1,2,3,4)", "res('Gene',Pk,'A','B'"):
        with pytest.raises(GoalSyntaxError):
            parse_goals(bad)


def test_rule7_guard_requires_existing_facts(system):
    # an object absent from the store gains nothing, even with a willing tool
    engine = DeductionEngine(system.store, system.kb, system.gateway)
    sat = engine.saturate("interpretive")
    ghost_facts = [k for k in sat.res if k[1] == "ghost"]
    assert ghost_facts == []


def test_no_interpretive_without_gateway_pairs(system, tmp_path):
    # register a pairless tool under the same names: nothing is derived
    from factlink.gateway import ToolGateway, ToolSpec

    empty = tmp_path / "empty.csv"
    empty.write_text("IdA,IdB\n", encoding="utf-8")
    gateway = ToolGateway()
    for name in ("BLAST", "ORSCAN", "GENCODE"):
        gateway.register(
            ToolSpec(name=name, adapter="fixture", location=str(empty), symmetric=True)
        )
    engine = DeductionEngine(system.store, system.kb, gateway)
    sat = engine.saturate("interpretive")
    assert all(f.provenance.kind != "interpretive" for f in sat.res.values())


def test_tool_ladder_skips_unavailable(system, tmp_path):
    # first tool NOT registered: the warning is recorded, the next tool answers
    import json

    from factlink.gateway import ToolGateway, ToolSpec
    from factlink.knowledge import load_knowledge
    from factlink.session import bundled_knowledge_file

    doc = json.loads(bundled_knowledge_file().read_text(encoding="utf-8"))
    doc["tools"] = [{"relation": "Ortholog", "operations": ["MISSING", "BLAST"]}]
    kb = load_knowledge(doc).with_table_columns(
        {n: t.columns for n, t in system.tables.items()}
    )
    engine = DeductionEngine(system.store, kb, system.gateway)
    sat = engine.saturate("interpretive")
    assert ("Gene", "30050", "DNASequence", "CTCTTTCTTTCT ...") in sat.res
    assert any("MISSING" in w for w in sat.warnings)


def test_provenance_trace_replay(system):
    """Replaying a trace bottom-up re-derives exactly the annotated fact."""
    store, kb = system.store, system.kb
    engine = DeductionEngine(store, kb, system.gateway)
    sat = engine.saturate("interpretive")

    def replay(fact) -> bool:
        p = fact.provenance
        if p.kind == "direct":
            return bool(
                store.lookup(fact.concept, fact.primary_key, fact.attribute, fact.value)
            )
        if p.kind == "derived":
            rel = p.rel
            if (rel.concept, rel.primary_key) != (fact.concept, fact.primary_key):
                return False
            if (p.partner.concept, p.partner.primary_key) != (
                rel.derived_concept,
                rel.derived_key,
            ):
                return False
            if (p.partner.attribute, p.partner.value) != (fact.attribute, fact.value):
                return False
            # walk the hops: every step must join on equal stored values
            frontier = {(rel.concept, rel.primary_key)}
            for from_table, from_col, to_table, to_col in rel.path:
                from_concept = kb.concept_for_table(from_table).concept_name
                to_concept = kb.concept_for_table(to_table).concept_name
                step = set()
                for concept, pk in frontier:
                    if concept != from_concept:
                        continue
                    for f in store.lookup(concept, pk, from_col):
                        for m in store.lookup(to_concept, None, to_col, f.value):
                            step.add((to_concept, m.primary_key))
                frontier = step
            if (rel.derived_concept, rel.derived_key) not in frontier:
                return False
            return replay(p.partner)
        if p.kind == "interpretive":
            if (p.partner.attribute, p.partner.value) != (fact.attribute, fact.value):
                return False
            verified = system.gateway.apply_op(
                p.tool, fact.primary_key, p.partner.primary_key
            )
            return verified and replay(p.partner)
        return False

    assert len(sat.res) > len(store)
    assert all(replay(fact) for fact in sat.res.values())


def test_semi_naive_equals_naive_small(tmp_path):
    for seed in range(20):
        inst = make_random_instance(seed, tmp_path)
        engine = DeductionEngine(inst.store, inst.kb, inst.gateway)
        for strategy in ("direct", "indirect", "interpretive"):
            mine = set(engine.saturate(strategy).res.keys())
            oracle = naive_saturate(inst.facts, inst.kb, inst.gateway, strategy)
            assert mine == oracle, f"seed={seed} strategy={strategy}"


def test_termination_on_cyclic_links():
    # two concepts referencing each other; the fixpoint must stabilize
    ontology = (
        OntologyEntry("A", "TA", "KA", ("RefB",)),
        OntologyEntry("B", "TB", "KB", ("RefA",)),
    )
    from factlink.knowledge import DerivationEdge, ForeignKeyLink

    kb = KnowledgeBase(
        ontology=ontology,
        derivatives=(DerivationEdge("A", "B"),),
        foreign_keys=(
            ForeignKeyLink("TA", "TB", "RefB", "KB"),
            ForeignKeyLink("TB", "TA", "RefA", "KA"),
        ),
    )
    from factlink.tables import RelationalTable

    store = CanonicalStore()
    store.canonicalize(
        RelationalTable("TA", ["KA", "RefB"], [("a1", "b1"), ("a2", "b2")]),
        kb.concept("A"),
    )
    store.canonicalize(
        RelationalTable("TB", ["KB", "RefA"], [("b1", "a2"), ("b2", "a1")]),
        kb.concept("B"),
    )
    engine = DeductionEngine(store, kb)
    sat = engine.saturate("indirect")
    # a1 -> b1 -> a2 -> b2 are all mutually linked, minus self-loops
    rel_keys = set(sat.rel)
    assert ("A", "B", "a1", "b1") in rel_keys
    assert ("A", "A", "a1", "a2") in rel_keys
    assert ("A", "A", "a1", "a1") not in rel_keys
    assert ("A", "B", "a1", "b2") in rel_keys


def test_trace_dict_shape(engine):
    sat = engine.saturate("interpretive")
    fact = sat.res[("Gene", "30050", "DNASequence", "CTCTTTCTTTCT ...")]
    trace = trace_dict(fact)
    assert trace["kind"] == "interpretive"
    assert trace["relation"] == "Ortholog"
    assert trace["tool"] == "BLAST"
    assert trace["via"]["fact"]["primary_key"] == "26190"
