"""Knowledge-rich natural language querying over flat structured data.

Tables are canonicalized into concept/key/attribute/value facts, natural
language questions are classified against a small set of sentence templates,
and a bottom-up rule engine answers them, deriving links through foreign
keys and tool-verified relations beyond what a plain SQL query returns.
"""

from .errors import FactLinkError
from .frontend import (
    ParseTree,
    QueryIntent,
    QueryTemplate,
    classify,
    extract_slots,
    parse,
)
from .gateway import PairFixture, ToolGateway, ToolSpec
from .knowledge import (
    DerivationEdge,
    ForeignKeyLink,
    KnowledgeBase,
    LexiconEntry,
    OntologyEntry,
    SimilarConcept,
    ToolBinding,
    load_knowledge,
)
from .planner import (
    BASELINE,
    ENHANCED,
    ConceptualPlan,
    ResultTable,
    execute,
    map_intent,
    render_sql,
    run_pipeline,
)
from .reasoner import (
    DIRECT,
    INDIRECT,
    INTERPRETIVE,
    DeductionEngine,
    GoalAtom,
    RelFact,
    ResFact,
    Var,
    parse_goals,
)
from .session import Session, bundled_data_dir, bundled_knowledge_file, load_system
from .store import CanonicalFact, CanonicalStore
from .tables import RelationalTable, read_table

__version__ = "0.1.0"

__all__ = [
    "BASELINE",
    "CanonicalFact",
    "CanonicalStore",
    "ConceptualPlan",
    "DIRECT",
    "DeductionEngine",
    "DerivationEdge",
    "ENHANCED",
    "FactLinkError",
    "ForeignKeyLink",
    "GoalAtom",
    "INDIRECT",
    "INTERPRETIVE",
    "KnowledgeBase",
    "LexiconEntry",
    "OntologyEntry",
    "PairFixture",
    "ParseTree",
    "QueryIntent",
    "QueryTemplate",
    "RelFact",
    "RelationalTable",
    "ResFact",
    "ResultTable",
    "Session",
    "SimilarConcept",
    "ToolBinding",
    "ToolGateway",
    "ToolSpec",
    "Var",
    "bundled_data_dir",
    "bundled_knowledge_file",
    "classify",
    "execute",
    "extract_slots",
    "load_knowledge",
    "load_system",
    "map_intent",
    "parse",
    "parse_goals",
    "read_table",
    "render_sql",
    "run_pipeline",
]
