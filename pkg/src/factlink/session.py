"""Session assembly: load data and knowledge, run queries, keep history."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .errors import FactLinkError
from .gateway import ToolGateway, ToolSpec
from .knowledge import KnowledgeBase, load_knowledge
from .planner import ENHANCED, PipelineResult, ResultTable, run_pipeline
from .reasoner import DeductionEngine, normalize_strategy, trace_dict, trace_id
from .store import CanonicalStore
from .tables import RelationalTable, read_table


def bundled_data_dir() -> Path:
    """Directory of the miniature gene/protein dataset shipped with the package."""
    return Path(__file__).parent / "data"


def bundled_knowledge_file() -> Path:
    return bundled_data_dir() / "knowledge.json"


@dataclass
class LoadedSystem:
    store: CanonicalStore
    kb: KnowledgeBase
    gateway: ToolGateway
    tables: dict[str, RelationalTable]
    data_dir: Path
    knowledge_path: Path


def load_system(
    data_dir: str | Path | None = None,
    knowledge_file: str | Path | None = None,
    allow_remote: bool = False,
) -> LoadedSystem:
    """Read the knowledge document and every ontology-backed table.

    Columns found in tables but absent from the declared attribute sets are
    admitted into the ontology. Tool registry entries resolve fixture paths
    relative to the knowledge file.
    """
    data_dir = Path(data_dir) if data_dir is not None else bundled_data_dir()
    knowledge_path = (
        Path(knowledge_file) if knowledge_file is not None else bundled_knowledge_file()
    )
    kb = load_knowledge(knowledge_path)

    tables: dict[str, RelationalTable] = {}
    for entry in kb.ontology:
        table_path = data_dir / f"{entry.table_name}.csv"
        if not table_path.exists():
            raise FactLinkError(
                f"table file {table_path} for concept {entry.concept_name!r} not found"
            )
        tables[entry.table_name] = read_table(table_path, name=entry.table_name)

    kb = kb.with_table_columns({n: t.columns for n, t in tables.items()})

    store = CanonicalStore()
    for entry in kb.ontology:
        store.canonicalize(tables[entry.table_name], entry)

    gateway = ToolGateway(allow_remote=allow_remote)
    doc = json.loads(knowledge_path.read_text(encoding="utf-8"))
    for item in doc.get("tools_registry", ()):
        spec = ToolSpec(
            name=item["name"],
            verifies=tuple(item.get("verifies", ())),
            adapter=item.get("adapter", "fixture"),
            location=item.get("location"),
            extract_fields=tuple(item.get("extract_fields", ())),
            matcher=item.get("matcher"),
            wrapper=item.get("wrapper"),
            filler=item.get("filler"),
            transformer=item.get("transformer"),
            submit_schema=tuple(item.get("submit_schema", ())),
            form_condition=item.get("form_condition"),
            symmetric=bool(item.get("symmetric", False)),
        )
        gateway.register(spec, base_dir=knowledge_path.parent)

    return LoadedSystem(
        store=store,
        kb=kb,
        gateway=gateway,
        tables=tables,
        data_dir=data_dir,
        knowledge_path=knowledge_path,
    )


@dataclass
class QueryRecord:
    text: str
    result_id: str


@dataclass
class Session:
    """One interactive session: a loaded system plus query history and traces."""

    system: LoadedSystem | None = None
    mode: str = ENHANCED
    history: list[QueryRecord] = field(default_factory=list)
    results: dict[str, ResultTable] = field(default_factory=dict)
    traces: dict[str, dict] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)
    _counter: int = 0

    @property
    def loaded(self) -> bool:
        return self.system is not None

    def load(
        self,
        data_dir: str | Path | None = None,
        knowledge_file: str | Path | None = None,
    ) -> LoadedSystem:
        """(Re)load data and knowledge; exclusive with in-flight queries."""
        with self._lock:
            self.system = load_system(data_dir, knowledge_file)
            return self.system

    def _require_system(self) -> LoadedSystem:
        with self._lock:
            system = self.system
        if system is None:
            raise FactLinkError("no data loaded; call load first")
        return system

    def _register(self, text: str, table: ResultTable) -> str:
        self._counter += 1
        result_id = f"r{self._counter}"
        self.results[result_id] = table
        self.history.append(QueryRecord(text=text, result_id=result_id))
        for row in table.rows:
            self.traces.setdefault(row.provenance_id, row.trace)
        return result_id

    def ask(self, sentence: str, mode: str | None = None, want_sql: bool = False) -> tuple[str, PipelineResult]:
        system = self._require_system()
        outcome = run_pipeline(
            sentence,
            system.store,
            system.kb,
            system.gateway,
            mode=mode or self.mode,
            want_sql=want_sql,
        )
        result_id = self._register(sentence, outcome.table)
        return result_id, outcome

    def ask_goal(self, goal_text: str, strategy: str = "interpretive") -> tuple[str, ResultTable]:
        """Evaluate a raw conjunctive goal and present bindings as a table."""
        system = self._require_system()
        engine = DeductionEngine(system.store, system.kb, system.gateway)
        result = engine.solve(goal_text, normalize_strategy(strategy))
        from .planner import ResultRow  # local import to avoid a cycle

        rows = []
        for solved in result.rows:
            values = tuple(solved.bindings[v] for v in result.variables)
            trace = {
                "goals": [trace_dict(fact) for fact in solved.facts],
            }
            rows.append(
                ResultRow(
                    values=values,
                    derived=any(f.provenance.kind != "direct" for f in solved.facts),
                    provenance_id=trace_id(trace),
                    trace=trace,
                )
            )
        table = ResultTable(
            columns=list(result.variables), rows=rows, warnings=result.warnings
        )
        result_id = self._register(goal_text, table)
        return result_id, table

    def explain(self, provenance_id: str) -> dict | None:
        return self.traces.get(provenance_id)

    def schema_payload(self) -> dict:
        system = self._require_system()
        kb = system.kb
        return {
            "ontology": [
                {
                    "concept_name": e.concept_name,
                    "table_name": e.table_name,
                    "key_attribute": e.key_attribute,
                    "attributes": list(e.attributes),
                }
                for e in kb.ontology
            ],
            "derivatives": [
                {"concept_a": d.concept_a, "concept_b": d.concept_b}
                for d in kb.derivatives
            ],
            "foreign_keys": [
                {
                    "table_x": f.table_x,
                    "table_y": f.table_y,
                    "column_x": f.column_x,
                    "column_y": f.column_y,
                }
                for f in kb.foreign_keys
            ],
            "similar_concepts": [
                {
                    "concept_x": s.concept_x,
                    "concept_y": s.concept_y,
                    "relations": list(s.relations),
                }
                for s in kb.similar_concepts
            ],
            "tools": [
                {"relation": t.relation, "operations": list(t.operations)}
                for t in kb.tools
            ],
            "options": {"symmetric_derivations": kb.options.symmetric_derivations},
            "registered_tools": system.gateway.registered(),
            "fact_count": len(system.store),
        }
