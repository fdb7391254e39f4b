"""Bottom-up deductive engine over the canonical store and knowledge base.

The engine derives answer facts in three layers:

* direct: every stored canonical fact is an answer fact;
* indirect: an object inherits the properties of objects it is linked to,
  where links follow derivation edges through foreign-key value joins and
  their transitive extensions;
* interpretive: an object inherits the properties of a partner object when
  a declared similar-concept relation between them is confirmed by an
  external tool.

Link facts (`rel`) depend only on stored facts, so they are saturated first;
answer facts (`res`) are then computed as a joint fixpoint of the indirect
and interpretive rules, which are mutually recursive. The fixpoint is
semi-naive: each round joins only against facts new in the previous round.
Every derived fact records the first derivation that produced it.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field

from .errors import (
    GoalSyntaxError,
    ToolUnavailable,
    UnknownAttributeInGoal,
    UnknownConceptInGoal,
)
from .gateway import ToolGateway
from .knowledge import KnowledgeBase
from .store import CanonicalFact, CanonicalStore

DIRECT = "direct"
INDIRECT = "indirect"
INTERPRETIVE = "interpretive"
STRATEGIES = (DIRECT, INDIRECT, INTERPRETIVE)

_STRATEGY_ALIASES = {
    "direct": DIRECT,
    "direct-only": DIRECT,
    "indirect": INDIRECT,
    "+indirect": INDIRECT,
    "interpretive": INTERPRETIVE,
    "+interpretive": INTERPRETIVE,
    "enhanced": INTERPRETIVE,
}


def normalize_strategy(name: str) -> str:
    try:
        return _STRATEGY_ALIASES[name.strip().lower()]
    except KeyError:
        raise GoalSyntaxError(
            f"unknown strategy {name!r}; expected one of {STRATEGIES}"
        ) from None


@dataclass(frozen=True)
class RelFact:
    """A link between an object and an object of another concept."""

    concept: str
    derived_concept: str
    primary_key: str
    derived_key: str
    # (from_table, from_column, to_table, to_column) hops
    path: tuple[tuple[str, str, str, str], ...] = field(compare=False)

    def key(self) -> tuple[str, str, str, str]:
        return (self.concept, self.derived_concept, self.primary_key, self.derived_key)


@dataclass(frozen=True)
class Provenance:
    """How an answer fact was derived; partner traces nest recursively."""

    kind: str  # direct | derived | interpretive
    virtual: bool = False
    rel: RelFact | None = None
    relation: str | None = None
    tool: str | None = None
    partner: "ResFact | None" = None


@dataclass(frozen=True)
class ResFact:
    """Answer fact: object has attribute with value, with provenance."""

    concept: str
    primary_key: str
    attribute: str
    value: str
    provenance: Provenance = field(compare=False)

    def key(self) -> tuple[str, str, str, str]:
        return (self.concept, self.primary_key, self.attribute, self.value)


def trace_dict(fact: ResFact) -> dict:
    """Serialize a fact's derivation chain as nested JSON-ready dicts."""
    p = fact.provenance
    out: dict = {
        "fact": {
            "concept": fact.concept,
            "primary_key": fact.primary_key,
            "attribute": fact.attribute,
            "value": fact.value,
        },
        "kind": p.kind,
    }
    if p.kind == "direct":
        out["virtual"] = p.virtual
    elif p.kind == "derived":
        assert p.rel is not None and p.partner is not None
        out["rel"] = {
            "concept": p.rel.concept,
            "derived_concept": p.rel.derived_concept,
            "primary_key": p.rel.primary_key,
            "derived_key": p.rel.derived_key,
            "path": [list(hop) for hop in p.rel.path],
        }
        out["via"] = trace_dict(p.partner)
    elif p.kind == "interpretive":
        assert p.partner is not None
        out["relation"] = p.relation
        out["tool"] = p.tool
        out["partner_concept"] = p.partner.concept
        out["partner_key"] = p.partner.primary_key
        out["via"] = trace_dict(p.partner)
    return out


def trace_id(trace: dict) -> str:
    """Stable content hash of a serialized derivation trace."""
    blob = json.dumps(trace, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


# --- goal language -----------------------------------------------------------


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class GoalAtom:
    """One res(...) pattern; strings are constants, Var objects are variables."""

    concept: Var | str
    primary_key: Var | str
    attribute: Var | str
    value: Var | str

    def terms(self) -> tuple[Var | str, ...]:
        return (self.concept, self.primary_key, self.attribute, self.value)


_ATOM_RE = re.compile(r"\s*res\s*\(", re.IGNORECASE)


def parse_goals(text: str) -> list[GoalAtom]:
    """Parse `res(a, b, c, d)` atoms joined by commas.

    Quoted arguments are constants; bare lowercase-initial tokens are also
    constants; capitalized or underscore-led bare tokens are variables, with
    `_` meaning a fresh anonymous variable.
    """
    pos = 0
    atoms: list[GoalAtom] = []
    anon = 0
    text = text.strip()
    if not text:
        raise GoalSyntaxError("empty goal text")
    while pos < len(text):
        match = _ATOM_RE.match(text, pos)
        if not match:
            raise GoalSyntaxError(f"expected res(...) at: {text[pos:pos + 30]!r}")
        pos = match.end()
        args: list[Var | str] = []
        while True:
            while pos < len(text) and text[pos] in " \t":
                pos += 1
            if pos >= len(text):
                raise GoalSyntaxError("unterminated res(...) atom")
            if text[pos] in "'\"":
                quote = text[pos]
                end = text.find(quote, pos + 1)
                if end < 0:
                    raise GoalSyntaxError("unterminated quoted constant")
                args.append(text[pos + 1:end])
                pos = end + 1
            else:
                token_match = re.match(r"[^,()\s]+", text[pos:])
                if not token_match:
                    raise GoalSyntaxError(f"expected an argument at: {text[pos:pos + 20]!r}")
                token = token_match.group(0)
                pos += len(token)
                if token == "_":
                    anon += 1
                    args.append(Var(f"_G{anon}"))
                elif token[0].isupper() or token[0] == "_":
                    args.append(Var(token))
                else:
                    args.append(token)
            while pos < len(text) and text[pos] in " \t":
                pos += 1
            if pos < len(text) and text[pos] == ",":
                pos += 1
                continue
            if pos < len(text) and text[pos] == ")":
                pos += 1
                break
            raise GoalSyntaxError(f"expected ',' or ')' at: {text[pos:pos + 20]!r}")
        if len(args) != 4:
            raise GoalSyntaxError(f"res takes 4 arguments, got {len(args)}")
        atoms.append(GoalAtom(*args))
        while pos < len(text) and text[pos] in " \t":
            pos += 1
        if pos < len(text):
            if text[pos] != ",":
                raise GoalSyntaxError(f"expected ',' between atoms at: {text[pos:]!r}")
            pos += 1
    if not atoms:
        raise GoalSyntaxError("no goal atoms found")
    return atoms


# --- saturation ---------------------------------------------------------------


@dataclass
class Saturation:
    """Fixpoint of the enabled rules over one frozen store."""

    strategy: str
    res: dict[tuple[str, str, str, str], ResFact]
    rel: dict[tuple[str, str, str, str], RelFact]
    warnings: list[str]
    _by_concept_attr: dict[tuple[str, str], list[ResFact]] = field(default_factory=dict)
    _by_object: dict[tuple[str, str], list[ResFact]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for fact in self.res.values():
            self._index(fact)

    def _index(self, fact: ResFact) -> None:
        self._by_concept_attr.setdefault((fact.concept, fact.attribute), []).append(fact)
        self._by_object.setdefault((fact.concept, fact.primary_key), []).append(fact)

    def objects(self) -> list[tuple[str, str]]:
        """All (concept, key) pairs carrying at least one answer fact."""
        return list(self._by_object)

    def match(
        self,
        concept: str | None,
        primary_key: str | None,
        attribute: str | None,
        value: str | None,
    ) -> list[ResFact]:
        if concept is not None and attribute is not None:
            pool = self._by_concept_attr.get((concept, attribute), [])
        elif concept is not None and primary_key is not None:
            pool = self._by_object.get((concept, primary_key), [])
        else:
            pool = list(self.res.values())
        return [
            f
            for f in pool
            if (concept is None or f.concept == concept)
            and (primary_key is None or f.primary_key == primary_key)
            and (attribute is None or f.attribute == attribute)
            and (value is None or f.value == value)
        ]


class DeductionEngine:
    """Rule evaluation over one store/knowledge-base/gateway triple."""

    def __init__(
        self,
        store: CanonicalStore,
        kb: KnowledgeBase,
        gateway: ToolGateway | None = None,
    ) -> None:
        self.store = store
        self.kb = kb
        self.gateway = gateway if gateway is not None else ToolGateway()

    # --- direct facts ----------------------------------------------------------

    def eval_direct(self) -> list[ResFact]:
        """One direct answer fact per canonical fact."""
        return [
            ResFact(
                concept=f.concept,
                primary_key=f.primary_key,
                attribute=f.attribute,
                value=f.value,
                provenance=Provenance(kind="direct", virtual=f.virtual),
            )
            for f in self.store.facts
        ]

    # --- link facts -------------------------------------------------------------

    def _hops_from(self, concept: str) -> list[tuple[str, str, str, str, str]]:
        """Foreign-key hops leaving a concept's table, in either orientation.

        Yields (local_column, target_concept, target_column, from_table,
        to_table) tuples.
        """
        entry = self.kb.concept(concept)
        hops: list[tuple[str, str, str, str, str]] = []
        for link in self.kb.foreign_keys:
            if link.table_x == entry.table_name:
                target = self.kb.concept_for_table(link.table_y)
                if target is not None and link.column_x in entry.full_attributes:
                    if link.column_y in target.full_attributes:
                        hops.append(
                            (link.column_x, target.concept_name, link.column_y,
                             link.table_x, link.table_y)
                        )
            if link.table_y == entry.table_name:
                target = self.kb.concept_for_table(link.table_x)
                if target is not None and link.column_y in entry.full_attributes:
                    if link.column_x in target.full_attributes:
                        hops.append(
                            (link.column_y, target.concept_name, link.column_x,
                             link.table_y, link.table_x)
                        )
        return hops

    def _join_hop(
        self, concept: str, primary_key: str, hop: tuple[str, str, str, str, str]
    ) -> list[tuple[str, str]]:
        """Objects of the hop's target concept sharing the join value."""
        local_col, target_concept, target_col, _, _ = hop
        out: list[tuple[str, str]] = []
        for fact in self.store.lookup(
            concept=concept, primary_key=primary_key, attribute=local_col
        ):
            for match in self.store.lookup(
                concept=target_concept, attribute=target_col, value=fact.value
            ):
                out.append((target_concept, match.primary_key))
        return out

    def eval_rel(self) -> list[RelFact]:
        """Least fixpoint of the link rules.

        Base case: a derivation edge plus one foreign-key hop joining equal
        stored values. Transitive case: extend an existing link by one more
        hop from the current endpoint. A hop that would arrive back at the
        origin object is rejected, which cuts cycles without making the
        result depend on discovery order.
        """
        rels: dict[tuple[str, str, str, str], RelFact] = {}
        delta: list[RelFact] = []
        for con, der in self.kb.derivation_edges():
            for hop in self._hops_from(con):
                if hop[1] != der:
                    continue
                for pk in self.store.keys_for(con):
                    for target_concept, pkd in self._join_hop(con, pk, hop):
                        if (target_concept, pkd) == (con, pk):
                            continue
                        fact = RelFact(
                            concept=con,
                            derived_concept=target_concept,
                            primary_key=pk,
                            derived_key=pkd,
                            path=((hop[3], hop[0], hop[4], hop[2]),),
                        )
                        if fact.key() not in rels:
                            rels[fact.key()] = fact
                            delta.append(fact)
        while delta:
            new_delta: list[RelFact] = []
            for rel in delta:
                for hop in self._hops_from(rel.derived_concept):
                    for target_concept, pkd in self._join_hop(
                        rel.derived_concept, rel.derived_key, hop
                    ):
                        if (target_concept, pkd) == (rel.concept, rel.primary_key):
                            continue
                        fact = RelFact(
                            concept=rel.concept,
                            derived_concept=target_concept,
                            primary_key=rel.primary_key,
                            derived_key=pkd,
                            path=rel.path + ((hop[3], hop[0], hop[4], hop[2]),),
                        )
                        if fact.key() not in rels:
                            rels[fact.key()] = fact
                            new_delta.append(fact)
            delta = new_delta
        return list(rels.values())

    # --- single rule applications (used compositionally and in tests) ------------

    def eval_indirect(
        self, res_so_far: list[ResFact], rel_facts: list[RelFact]
    ) -> list[ResFact]:
        """One full application of the property-inheritance rule."""
        by_object: dict[tuple[str, str], list[RelFact]] = {}
        for rel in rel_facts:
            by_object.setdefault((rel.derived_concept, rel.derived_key), []).append(rel)
        out: list[ResFact] = []
        for fact in res_so_far:
            for rel in by_object.get((fact.concept, fact.primary_key), []):
                out.append(
                    ResFact(
                        concept=rel.concept,
                        primary_key=rel.primary_key,
                        attribute=fact.attribute,
                        value=fact.value,
                        provenance=Provenance(kind="derived", rel=rel, partner=fact),
                    )
                )
        return out

    def eval_interpretive(self, res_so_far: list[ResFact]) -> list[ResFact]:
        """One full application of the tool-verified copying rule."""
        warnings: list[str] = []
        verdicts: dict[tuple[str, str, str], tuple[bool | None, str | None]] = {}
        objects: dict[tuple[str, str], None] = {}
        by_object: dict[tuple[str, str], list[ResFact]] = {}
        for fact in res_so_far:
            objects.setdefault((fact.concept, fact.primary_key), None)
            by_object.setdefault((fact.concept, fact.primary_key), []).append(fact)
        out: list[ResFact] = []
        for sim in self.kb.similar_concepts:
            sources = [o for o in objects if o[0] == sim.concept_x]
            partners = [o for o in objects if o[0] == sim.concept_y]
            for relation in sim.relations:
                ops = self.kb.tools_for_relation(relation)
                if not ops:
                    continue
                for _, pk_c in sources:
                    for _, pk_r in partners:
                        holds, tool = self._verdict(
                            verdicts, warnings, relation, ops, pk_c, pk_r
                        )
                        if not holds:
                            continue
                        out.extend(
                            self._copies(
                                sim.concept_x,
                                pk_c,
                                relation,
                                tool or ops[0],
                                by_object[(sim.concept_y, pk_r)],
                            )
                        )
        return out

    def _verdict(
        self,
        verdicts: dict[tuple[str, str, str], tuple[bool | None, str | None]],
        warnings: list[str],
        relation: str,
        ops: tuple[str, ...],
        pk_c: str,
        pk_r: str,
    ) -> tuple[bool, str | None]:
        """Tool-ladder verdict for one (relation, pair).

        Tools are probed in preference order; the first one that answers
        (true or false) settles the pair. Unavailable tools are recorded as
        warnings and skipped; if none answers the pair contributes nothing.
        """
        key = (relation, pk_c, pk_r)
        if key in verdicts:
            answer, tool = verdicts[key]
            return bool(answer), tool
        answer = None
        tool: str | None = None
        for op in ops:
            try:
                answer = self.gateway.apply_op(op, pk_c, pk_r)
                tool = op
                break
            except ToolUnavailable as exc:
                message = f"tool {op!r} unavailable for {relation}: {exc}"
                if message not in warnings:
                    warnings.append(message)
        verdicts[key] = (answer, tool)
        return bool(answer), tool

    def _copies(
        self,
        concept: str,
        primary_key: str,
        relation: str,
        tool: str,
        partner_facts: list[ResFact],
    ) -> list[ResFact]:
        """Copy a partner's facts onto an object, skipping the partner's own key."""
        out: list[ResFact] = []
        for fact in partner_facts:
            partner_key_attr = self.kb.concept(fact.concept).key_attribute
            if fact.attribute == partner_key_attr:
                continue
            out.append(
                ResFact(
                    concept=concept,
                    primary_key=primary_key,
                    attribute=fact.attribute,
                    value=fact.value,
                    provenance=Provenance(
                        kind="interpretive",
                        relation=relation,
                        tool=tool,
                        partner=fact,
                    ),
                )
            )
        return out

    # --- saturation ---------------------------------------------------------------

    def saturate(self, strategy: str = INTERPRETIVE) -> Saturation:
        """Run the fixpoint for the rules enabled by the strategy."""
        strategy = normalize_strategy(strategy)
        warnings: list[str] = []
        res: dict[tuple[str, str, str, str], ResFact] = {}
        delta: list[ResFact] = []
        for fact in self.eval_direct():
            if fact.key() not in res:
                res[fact.key()] = fact
                delta.append(fact)

        rels: dict[tuple[str, str, str, str], RelFact] = {}
        rel_by_target: dict[tuple[str, str], list[RelFact]] = {}
        if strategy in (INDIRECT, INTERPRETIVE):
            for rel in self.eval_rel():
                rels[rel.key()] = rel
                rel_by_target.setdefault(
                    (rel.derived_concept, rel.derived_key), []
                ).append(rel)

        interpretive = strategy == INTERPRETIVE
        objects: dict[tuple[str, str], None] = {}
        by_object: dict[tuple[str, str], list[ResFact]] = {}
        verdicts: dict[tuple[str, str, str], tuple[bool | None, str | None]] = {}

        while delta:
            new_facts: list[ResFact] = []

            if strategy in (INDIRECT, INTERPRETIVE):
                for fact in delta:
                    for rel in rel_by_target.get(
                        (fact.concept, fact.primary_key), []
                    ):
                        new_facts.append(
                            ResFact(
                                concept=rel.concept,
                                primary_key=rel.primary_key,
                                attribute=fact.attribute,
                                value=fact.value,
                                provenance=Provenance(
                                    kind="derived", rel=rel, partner=fact
                                ),
                            )
                        )

            if interpretive:
                new_objects: list[tuple[str, str]] = []
                for fact in delta:
                    obj = (fact.concept, fact.primary_key)
                    if obj not in objects:
                        objects[obj] = None
                        new_objects.append(obj)
                    by_object.setdefault(obj, []).append(fact)

                for sim in self.kb.similar_concepts:
                    for relation in sim.relations:
                        ops = self.kb.tools_for_relation(relation)
                        if not ops:
                            continue
                        # existing sources see the partner facts new this round
                        for fact in delta:
                            if fact.concept != sim.concept_y:
                                continue
                            key_attr = self.kb.concept(fact.concept).key_attribute
                            if fact.attribute == key_attr:
                                continue
                            for obj in objects:
                                if obj[0] != sim.concept_x:
                                    continue
                                holds, tool = self._verdict(
                                    verdicts, warnings, relation, ops,
                                    obj[1], fact.primary_key,
                                )
                                if not holds:
                                    continue
                                new_facts.append(
                                    ResFact(
                                        concept=sim.concept_x,
                                        primary_key=obj[1],
                                        attribute=fact.attribute,
                                        value=fact.value,
                                        provenance=Provenance(
                                            kind="interpretive",
                                            relation=relation,
                                            tool=tool,
                                            partner=fact,
                                        ),
                                    )
                                )
                        # brand-new sources see all partner facts seen so far
                        for obj in new_objects:
                            if obj[0] != sim.concept_x:
                                continue
                            for partner in list(objects):
                                if partner[0] != sim.concept_y:
                                    continue
                                holds, tool = self._verdict(
                                    verdicts, warnings, relation, ops,
                                    obj[1], partner[1],
                                )
                                if not holds:
                                    continue
                                new_facts.extend(
                                    self._copies(
                                        sim.concept_x,
                                        obj[1],
                                        relation,
                                        tool or ops[0],
                                        by_object.get(partner, []),
                                    )
                                )

            delta = []
            for fact in new_facts:
                if fact.key() not in res:
                    res[fact.key()] = fact
                    delta.append(fact)

        return Saturation(strategy=strategy, res=res, rel=rels, warnings=warnings)

    # --- conjunctive goal solving ---------------------------------------------------

    def _validate_goals(self, goals: list[GoalAtom]) -> None:
        known_attrs = {
            a for e in self.kb.ontology for a in e.full_attributes
        }
        for atom in goals:
            if isinstance(atom.concept, str) and not self.kb.has_concept(atom.concept):
                raise UnknownConceptInGoal(
                    f"goal references unknown concept {atom.concept!r}"
                )
            if isinstance(atom.attribute, str) and atom.attribute not in known_attrs:
                raise UnknownAttributeInGoal(
                    f"goal references unknown attribute {atom.attribute!r}"
                )

    def solve(
        self,
        goals: list[GoalAtom] | str,
        strategy: str = INTERPRETIVE,
    ) -> "SolveResult":
        """Join the goal atoms over shared variables against the saturated facts.

        Bindings are deduplicated and sorted lexicographically, making the
        result deterministic for a given store and knowledge base.
        """
        if isinstance(goals, str):
            goals = parse_goals(goals)
        self._validate_goals(goals)
        saturation = self.saturate(strategy)
        return solve_against(saturation, goals)


@dataclass
class SolveRow:
    bindings: dict[str, str]
    facts: tuple[ResFact, ...]


@dataclass
class SolveResult:
    variables: list[str]
    rows: list[SolveRow]
    warnings: list[str]

    def bindings_table(self) -> list[tuple[str, ...]]:
        return [tuple(row.bindings[v] for v in self.variables) for row in self.rows]


def solve_against(saturation: Saturation, goals: list[GoalAtom]) -> SolveResult:
    """Join goal atoms against an existing saturation."""
    variables: list[str] = []
    for atom in goals:
        for term in atom.terms():
            if isinstance(term, Var) and term.name not in variables:
                variables.append(term.name)

    partial: list[tuple[dict[str, str], tuple[ResFact, ...]]] = [({}, ())]
    for atom in goals:
        grown: list[tuple[dict[str, str], tuple[ResFact, ...]]] = []
        for bindings, facts in partial:
            def ground(term: Var | str) -> str | None:
                if isinstance(term, Var):
                    return bindings.get(term.name)
                return term

            for fact in saturation.match(
                ground(atom.concept),
                ground(atom.primary_key),
                ground(atom.attribute),
                ground(atom.value),
            ):
                new_bindings = dict(bindings)
                consistent = True
                for term, actual in zip(atom.terms(), fact.key()):
                    if isinstance(term, Var):
                        bound = new_bindings.get(term.name)
                        if bound is None:
                            new_bindings[term.name] = actual
                        elif bound != actual:
                            consistent = False
                            break
                if consistent:
                    grown.append((new_bindings, facts + (fact,)))
        partial = grown
        if not partial:
            break

    seen: dict[tuple[str, ...], SolveRow] = {}
    for bindings, facts in partial:
        key = tuple(bindings[v] for v in variables)
        if key not in seen:
            seen[key] = SolveRow(bindings=bindings, facts=facts)
    ordered = [seen[k] for k in sorted(seen)]
    return SolveResult(
        variables=variables, rows=ordered, warnings=list(saturation.warnings)
    )
