"""Query planning: intent to goal plan, strategy escalation, SQL rendering.

A conceptual plan names the goal atoms that bind the object set (selector),
the goals that fetch requested attributes, optional condition goals, virtual
seeds for constants absent from base tables, and the ladder of evaluation
strategies to walk. Execution in baseline mode answers with stored facts and
foreign-key joins only, matching what a conventional SQL query over the base
tables returns; enhanced mode applies seeds and climbs the full ladder,
flagging every row whose derivation is not purely direct.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (
    EmptyPlan,
    NotDirectlyRenderable,
    SelectorUnresolved,
    UnknownAttribute,
    UnknownConcept,
)
from .frontend import (
    QueryIntent,
    Selector,
    classify,
    extract_slots,
    parse,
)
from .gateway import ToolGateway
from .knowledge import KnowledgeBase
from .reasoner import (
    DIRECT,
    INDIRECT,
    INTERPRETIVE,
    DeductionEngine,
    GoalAtom,
    ResFact,
    Var,
    solve_against,
    trace_dict,
    trace_id,
)
from .store import CanonicalStore

BASELINE = "baseline"
ENHANCED = "enhanced"

PK = Var("Pk")


@dataclass(frozen=True)
class RequestGoal:
    """One requested attribute: the goal atom plus its home concept."""

    atom: GoalAtom
    column: str
    home_concept: str


@dataclass
class ConceptualPlan:
    variant: str
    target_concept: str
    selector_goals: list[GoalAtom]
    request_goals: list[RequestGoal]
    condition_goals: list[GoalAtom] = field(default_factory=list)
    relation_requests: list[str] = field(default_factory=list)
    seeds: list[tuple[str, str]] = field(default_factory=list)
    strategy_ladder: tuple[str, ...] = (DIRECT, INDIRECT, INTERPRETIVE)
    warnings: list[str] = field(default_factory=list)


@dataclass
class ResultRow:
    values: tuple[str, ...]
    derived: bool
    provenance_id: str
    trace: dict


@dataclass
class ResultTable:
    columns: list[str]
    rows: list[ResultRow]
    warnings: list[str] = field(default_factory=list)

    def value_rows(self) -> list[tuple[str, ...]]:
        return [row.values for row in self.rows]

    def to_payload(self) -> dict:
        return {
            "columns": self.columns,
            "rows": [
                {
                    "values": list(row.values),
                    "derived": row.derived,
                    "provenance_id": row.provenance_id,
                }
                for row in self.rows
            ],
            "warnings": list(self.warnings),
        }

    def to_text(self) -> str:
        """Aligned plain-text rendering with a derived marker column."""
        headers = self.columns + ["derived"]
        body = [
            [*row.values, "yes" if row.derived else "no"] for row in self.rows
        ]
        widths = [
            max(len(str(headers[i])), *(len(str(r[i])) for r in body), 1)
            if body
            else len(str(headers[i]))
            for i in range(len(headers))
        ]
        lines = [
            "  ".join(str(h).ljust(widths[i]) for i, h in enumerate(headers)),
            "  ".join("-" * widths[i] for i in range(len(headers))),
        ]
        for r in body:
            lines.append("  ".join(str(c).ljust(widths[i]) for i, c in enumerate(r)))
        if not body:
            lines.append("(no rows)")
        return "\n".join(lines)


# --- plan construction -------------------------------------------------------


def map_intent(
    intent: QueryIntent,
    kb: KnowledgeBase,
    store: CanonicalStore | None = None,
    selector: Selector | None = None,
) -> ConceptualPlan:
    """Build the goal plan for an intent.

    `selector` overrides the intent's first selector candidate, which is how
    alternate-mapping retries swap in the next candidate.
    """
    concept = intent.target_concept
    entry = kb.concept(concept)
    active = selector if selector is not None else intent.selector
    warnings = list(intent.warnings)

    selector_goals: list[GoalAtom] = []
    seeds: list[tuple[str, str]] = []
    if active is not None:
        for value in active.values:
            selector_goals.append(GoalAtom(concept, PK, active.attribute, value))
        if active.attribute == entry.key_attribute:
            seeds = [(concept, v) for v in active.seed_values]
    else:
        # no constants: range over every object via its self-identifying fact
        selector_goals.append(GoalAtom(concept, PK, entry.key_attribute, Var("K0")))

    request_goals: list[RequestGoal] = []
    relation_requests: list[str] = []
    for i, term in enumerate(intent.requested):
        try:
            home, attribute = kb.resolve_attribute(term, concept)
            request_goals.append(
                RequestGoal(
                    atom=GoalAtom(concept, PK, attribute, Var(f"V{i}")),
                    column=attribute,
                    home_concept=home,
                )
            )
            continue
        except UnknownAttribute:
            pass
        relation = kb.resolve_relation(term)
        if relation is not None:
            relation_requests.append(relation)
            continue
        try:
            other = kb.resolve_concept(term)
        except UnknownConcept:
            raise UnknownAttribute(
                f"requested term {term!r} names no attribute, relation, or concept"
            ) from None
        # a requested concept means: fetch that concept's identity for the object
        other_key = kb.concept(other).key_attribute
        request_goals.append(
            RequestGoal(
                atom=GoalAtom(concept, PK, other_key, Var(f"V{i}")),
                column=other_key,
                home_concept=other,
            )
        )

    if relation_requests:
        # relation actions return partner objects; attribute requests step aside
        if request_goals:
            warnings.append(
                "attribute requests are bypassed by the relation request"
            )
        request_goals = []

    condition_goals: list[GoalAtom] = []
    if intent.condition is not None:
        _, predicate = intent.condition
        target = kb.condition_target(predicate)
        if target is not None and kb.has_concept(target):
            # linked objects carry the target concept's key among their facts
            condition_goals.append(
                GoalAtom(concept, PK, kb.concept(target).key_attribute, Var("C0"))
            )
        else:
            warnings.append(
                f"condition predicate {predicate!r} has no interpretation; ignored"
            )

    if not request_goals and not relation_requests:
        # identity listing: return the key and any name-like attributes
        request_goals.append(
            RequestGoal(
                atom=GoalAtom(concept, PK, entry.key_attribute, Var("V0")),
                column=entry.key_attribute,
                home_concept=concept,
            )
        )
        for j, attr in enumerate(a for a in entry.attributes if "name" in a.lower()):
            request_goals.append(
                RequestGoal(
                    atom=GoalAtom(concept, PK, attr, Var(f"V{j + 1}")),
                    column=attr,
                    home_concept=concept,
                )
            )

    if not request_goals and not relation_requests:
        raise EmptyPlan(f"no goals could be formed for intent {intent.variant!r}")

    return ConceptualPlan(
        variant=intent.variant,
        target_concept=concept,
        selector_goals=selector_goals,
        request_goals=request_goals,
        condition_goals=condition_goals,
        relation_requests=relation_requests,
        seeds=seeds,
        warnings=warnings,
    )


# --- plan execution -----------------------------------------------------------


def _row_trace(selector_fact: ResFact | None, request_facts: list[tuple[str, ResFact]]) -> dict:
    trace: dict = {}
    if selector_fact is not None:
        trace["selector"] = trace_dict(selector_fact)
    trace["requests"] = {column: trace_dict(fact) for column, fact in request_facts}
    return trace


def execute(
    plan: ConceptualPlan,
    store: CanonicalStore,
    kb: KnowledgeBase,
    gateway: ToolGateway,
    mode: str = ENHANCED,
) -> ResultTable:
    """Run a plan in baseline or enhanced mode.

    Baseline answers from stored facts and foreign-key joins without seeding
    (the conventional SQL answer); enhanced seeds virtual objects and walks
    direct, then indirect, then interpretive evaluation, accumulating the
    union of bindings. Rows are keyed by their requested values, first
    derivation wins, and a row is flagged derived when any fact backing it
    has non-direct provenance.
    """
    if mode not in (BASELINE, ENHANCED):
        raise ValueError(f"unknown mode {mode!r}")
    enhanced = mode == ENHANCED
    if enhanced:
        for concept, value in plan.seeds:
            store.seed_virtual(concept, value, kb.concept(concept))
    ladder = list(plan.strategy_ladder) if enhanced else [INDIRECT]

    engine = DeductionEngine(store, kb, gateway)
    columns = [g.column for g in plan.request_goals]
    rows: dict[tuple[str, ...], ResultRow] = {}
    warnings: list[str] = list(plan.warnings)

    for strategy in ladder:
        saturation = engine.saturate(strategy)
        for message in saturation.warnings:
            if message not in warnings:
                warnings.append(message)
        if plan.request_goals:
            for selector_goal in plan.selector_goals:
                goals = [selector_goal] + plan.condition_goals + [
                    g.atom for g in plan.request_goals
                ]
                result = solve_against(saturation, goals)
                for solved in result.rows:
                    values = tuple(
                        solved.bindings[g.atom.value.name]  # type: ignore[union-attr]
                        for g in plan.request_goals
                    )
                    if values in rows:
                        continue
                    selector_fact = solved.facts[0]
                    offset = 1 + len(plan.condition_goals)
                    request_facts = list(
                        zip(columns, solved.facts[offset:offset + len(columns)])
                    )
                    derived = any(
                        f.provenance.kind != "direct" for f in solved.facts
                    )
                    trace = _row_trace(selector_fact, request_facts)
                    rows[values] = ResultRow(
                        values=values,
                        derived=derived,
                        provenance_id=trace_id(trace),
                        trace=trace,
                    )
        if plan.relation_requests and strategy == INTERPRETIVE:
            _execute_relation_requests(plan, engine, saturation, rows, warnings)

    if plan.relation_requests:
        key_attr = kb.concept(plan.target_concept).key_attribute
        columns = [key_attr, "Relation", "RelatedKey"]

    return ResultTable(columns=columns, rows=list(rows.values()), warnings=warnings)


def _execute_relation_requests(plan, engine, saturation, rows, warnings) -> None:
    """Partner discovery for relation-valued requests ("find homologs").

    Emits (object key, relation, partner key) rows for every tool-confirmed
    pair between selector-bound objects and candidate partners.
    """
    kb = engine.kb
    bound: list[str] = []
    for selector_goal in plan.selector_goals:
        result = solve_against(saturation, [selector_goal] + plan.condition_goals)
        for solved in result.rows:
            pk = solved.bindings.get("Pk")
            if pk is not None and pk not in bound:
                bound.append(pk)
    verdicts: dict = {}
    for relation in plan.relation_requests:
        ops = kb.tools_for_relation(relation)
        if not ops:
            warnings.append(f"no tool can verify relation {relation!r}")
            continue
        for sim in kb.similar_concepts:
            if sim.concept_x != plan.target_concept or relation not in sim.relations:
                continue
            partner_keys = [
                o[1] for o in saturation.objects() if o[0] == sim.concept_y
            ]
            for pk in bound:
                for pk_r in partner_keys:
                    if (sim.concept_y, pk_r) == (plan.target_concept, pk):
                        continue
                    holds, tool = engine._verdict(
                        verdicts, warnings, relation, ops, pk, pk_r
                    )
                    if not holds:
                        continue
                    values = (pk, relation, pk_r)
                    if values in rows:
                        continue
                    trace = {
                        "relation": relation,
                        "tool": tool,
                        "object": {"concept": plan.target_concept, "key": pk},
                        "partner": {"concept": sim.concept_y, "key": pk_r},
                    }
                    rows[values] = ResultRow(
                        values=values,
                        derived=True,
                        provenance_id=trace_id(trace),
                        trace=trace,
                    )


# --- SQL rendering --------------------------------------------------------------


def _sql_quote(value: str) -> str:
    return "'" + value.replace("'", "''") + "'"


def _alias_for(table: str, taken: dict[str, str]) -> str:
    base = table[0].lower() if table else "t"
    alias = base
    suffix = 1
    while alias in taken.values():
        suffix += 1
        alias = f"{base}{suffix}"
    return alias


def render_sql(plan: ConceptualPlan, kb: KnowledgeBase) -> str:
    """Render the plan's foreign-key-reachable portion as a select statement.

    The statement is explanatory: it shows the select-project-join query over
    the original tables that answers the plan's direct fragment. Requested
    attributes reachable only through tool-verified relations are noted in a
    trailing comment. Raises NotDirectlyRenderable when nothing at all can be
    rendered.
    """
    target_entry = kb.concept(plan.target_concept)
    base_table = target_entry.table_name

    # adjacency over foreign keys, either orientation
    adjacent: dict[str, list[tuple[str, str, str]]] = {}
    for link in kb.foreign_keys:
        adjacent.setdefault(link.table_x, []).append(
            (link.table_y, link.column_x, link.column_y)
        )
        adjacent.setdefault(link.table_y, []).append(
            (link.table_x, link.column_y, link.column_x)
        )

    def path_to(table: str) -> list[tuple[str, str, str, str]] | None:
        """BFS join path from the base table: (from, from_col, to, to_col)."""
        if table == base_table:
            return []
        seen = {base_table}
        queue: list[tuple[str, list[tuple[str, str, str, str]]]] = [(base_table, [])]
        while queue:
            current, path = queue.pop(0)
            for other, col_here, col_there in adjacent.get(current, []):
                if other in seen:
                    continue
                extended = path + [(current, col_here, other, col_there)]
                if other == table:
                    return extended
                seen.add(other)
                queue.append((other, extended))
        return None

    aliases: dict[str, str] = {base_table: _alias_for(base_table, {})}
    join_conditions: list[str] = []
    select_parts: list[str] = []
    unrenderable: list[str] = []

    def ensure_table(table: str) -> str | None:
        if table in aliases:
            return aliases[table]
        path = path_to(table)
        if path is None:
            return None
        for from_t, from_c, to_t, to_c in path:
            if to_t not in aliases:
                aliases[to_t] = _alias_for(to_t, aliases)
                join_conditions.append(
                    f"{aliases[from_t]}.{from_c} = {aliases[to_t]}.{to_c}"
                )
        return aliases[table]

    for goal in plan.request_goals:
        home = kb.concept(goal.home_concept)
        if goal.column not in home.full_attributes:
            unrenderable.append(goal.column)
            continue
        alias = ensure_table(home.table_name)
        if alias is None:
            unrenderable.append(goal.column)
            continue
        select_parts.append(f"{alias}.{goal.column}")

    for relation in plan.relation_requests:
        unrenderable.append(f"relation {relation}")

    if not select_parts:
        raise NotDirectlyRenderable(
            "no requested attribute is reachable through base tables and foreign keys"
        )

    filters: list[str] = []
    selector_values: dict[str, list[str]] = {}
    for atom in plan.selector_goals:
        if isinstance(atom.attribute, str) and isinstance(atom.value, str):
            selector_values.setdefault(atom.attribute, []).append(atom.value)
    for attribute, values in selector_values.items():
        home_table = None
        for entry in kb.ontology:
            if attribute in entry.full_attributes:
                alias = ensure_table(entry.table_name)
                if alias is not None:
                    home_table = alias
                    break
        if home_table is None:
            continue
        unique_values = list(dict.fromkeys(values))
        if len(unique_values) == 1:
            filters.append(f"{home_table}.{attribute} = {_sql_quote(unique_values[0])}")
        else:
            joined = ", ".join(_sql_quote(v) for v in unique_values)
            filters.append(f"{home_table}.{attribute} IN ({joined})")

    from_clause = ", ".join(f"{t} AS {a}" for t, a in aliases.items())
    where_parts = join_conditions + filters
    sql = f"SELECT {', '.join(select_parts)} FROM {from_clause}"
    if where_parts:
        sql += " WHERE " + " AND ".join(where_parts)
    if unrenderable:
        sql += (
            "\n-- knowledge-derived remainder (not expressible over base tables): "
            + ", ".join(unrenderable)
        )
    return sql


# --- end-to-end pipeline ----------------------------------------------------------


@dataclass
class PipelineResult:
    sentence: str
    intent: QueryIntent | None
    plan: ConceptualPlan | None
    table: ResultTable
    sql: str | None = None


def run_pipeline(
    sentence: str,
    store: CanonicalStore,
    kb: KnowledgeBase,
    gateway: ToolGateway,
    mode: str = ENHANCED,
    want_sql: bool = False,
) -> PipelineResult:
    """Parse, classify, extract, plan, and execute one sentence.

    On an unresolved selector or an empty answer, alternate selector-attribute
    mappings are retried in precedence order; the first non-empty result wins,
    otherwise the first (empty) result is returned.
    """
    tree = parse(sentence)
    template = classify(tree)
    try:
        intent = extract_slots(template, kb, store)
    except SelectorUnresolved as exc:
        table = ResultTable(columns=[], rows=[], warnings=[str(exc)])
        return PipelineResult(sentence=sentence, intent=None, plan=None, table=table)

    candidates: list[Selector | None] = list(intent.selector_candidates) or [None]
    first_result: PipelineResult | None = None
    for candidate in candidates:
        plan = map_intent(intent, kb, store, selector=candidate)
        table = execute(plan, store, kb, gateway, mode=mode)
        sql = None
        if want_sql:
            try:
                sql = render_sql(plan, kb)
            except NotDirectlyRenderable as exc:
                sql = f"-- {exc}"
        outcome = PipelineResult(
            sentence=sentence, intent=intent, plan=plan, table=table, sql=sql
        )
        if table.rows:
            return outcome
        if first_result is None:
            first_result = outcome
    assert first_result is not None
    return first_result
