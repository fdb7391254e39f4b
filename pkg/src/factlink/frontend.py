"""Natural language frontend: parsing, template classification, slot extraction.

Sentences are turned into parse trees either by echoing an externally
supplied bracketed tree (parenthesized label/token notation, one sentence
per line) or by a built-in heuristic chunker. The chunker is deliberately
narrow: it recognizes closed marker sets for the three sentence shapes
(iterative, conditional, imperative) and the "attribute of element" noun
phrase structure; anything richer must arrive as a bracketed tree.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import (
    AmbiguousConcept,
    NoTemplateMatch,
    SelectorUnresolved,
    UnknownAttribute,
    UnknownConcept,
    UnparsableSentence,
)
from .knowledge import KnowledgeBase, normalize_term, singularize
from .store import CanonicalStore

# Closed sets the chunker understands.
ACTION_VERBS = ("find", "list", "show", "get", "retrieve", "what", "which")
ITERATIVE_HEADS = ("all", "each", "every")
DETERMINERS = {"the", "a", "an", "all", "its", "their", "this", "these", "those"}
COORDINATORS = {"and", "or", ","}
COPULAS = {"is", "are", "was", "were", "has", "have"}
PRONOUNS = {"it", "its", "they", "their", "them"}

IMPERATIVE = "Imperative"
ITERATIVE = "Iterative"
CONDITIONAL = "Conditional"


@dataclass(frozen=True)
class ParseTree:
    """Phrase-structure node; a node has children or leaf text, never both."""

    label: str
    children: tuple[ParseTree, ...] = ()
    leaf_text: str | None = None

    def __post_init__(self) -> None:
        if (self.leaf_text is None) == (len(self.children) == 0):
            raise ValueError(f"node {self.label!r} must have children xor leaf text")

    def leaves(self) -> list[str]:
        if self.leaf_text is not None:
            return [self.leaf_text]
        out: list[str] = []
        for child in self.children:
            out.extend(child.leaves())
        return out

    def text(self) -> str:
        return " ".join(self.leaves())

    def to_bracketed(self) -> str:
        if self.leaf_text is not None:
            return f"({self.label} {self.leaf_text})"
        inner = " ".join(child.to_bracketed() for child in self.children)
        return f"({self.label} {inner})"

    def find(self, *labels: str) -> ParseTree | None:
        """First descendant (preorder) with one of the given labels."""
        for child in self.children:
            if child.label in labels:
                return child
            found = child.find(*labels)
            if found is not None:
                return found
        return None


@dataclass(frozen=True)
class QueryTemplate:
    """Classified sentence shape; only the active variant's fields are set."""

    variant: str
    range_np: ParseTree | None = None
    action_vp: ParseTree | None = None
    cond_np: ParseTree | None = None
    cond_vp: ParseTree | None = None
    verb: str | None = None
    object_np: ParseTree | None = None


@dataclass(frozen=True)
class Selector:
    """Attribute plus the disjunction of values it must take."""

    attribute: str
    values: tuple[str, ...]
    seed_values: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "attribute": self.attribute,
            "values": list(self.values),
            "seed_values": list(self.seed_values),
        }


@dataclass(frozen=True)
class QueryIntent:
    variant: str
    target_concept: str
    selector: Selector | None
    selector_candidates: tuple[Selector, ...]
    requested: tuple[str, ...]
    action: str
    condition: tuple[Selector | None, str] | None = None
    qualifier: str | None = None
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "target_concept": self.target_concept,
            "selector": self.selector.to_dict() if self.selector else None,
            "selector_candidates": [c.to_dict() for c in self.selector_candidates],
            "requested": list(self.requested),
            "action": self.action,
            "condition": (
                {
                    "subject": self.condition[0].to_dict() if self.condition[0] else None,
                    "predicate": self.condition[1],
                }
                if self.condition
                else None
            ),
            "qualifier": self.qualifier,
            "warnings": list(self.warnings),
        }


# --- tokenization and bracketed trees --------------------------------------


def tokenize(sentence: str) -> list[str]:
    """Whitespace tokens with surrounding punctuation stripped, case kept."""
    out: list[str] = []
    for raw in sentence.split():
        token = raw.strip("()[]{}\"'`.,;:!?")
        if token:
            out.append(token)
    return out


def parse_bracketed(text: str) -> ParseTree:
    """Parse one parenthesized label/token tree, e.g. (S (VP (VB Find) ...))."""
    tokens = re.findall(r"\(|\)|[^\s()]+", text.strip().splitlines()[0])
    pos = 0

    def parse_node() -> ParseTree:
        nonlocal pos
        if pos >= len(tokens) or tokens[pos] != "(":
            raise UnparsableSentence("expected '(' in bracketed tree")
        pos += 1
        if pos >= len(tokens) or tokens[pos] in "()":
            raise UnparsableSentence("expected a node label after '('")
        label = tokens[pos]
        pos += 1
        children: list[ParseTree] = []
        leaf: str | None = None
        while pos < len(tokens) and tokens[pos] != ")":
            if tokens[pos] == "(":
                children.append(parse_node())
            else:
                leaf = tokens[pos] if leaf is None else f"{leaf} {tokens[pos]}"
                pos += 1
        if pos >= len(tokens):
            raise UnparsableSentence("unbalanced parentheses in bracketed tree")
        pos += 1  # consume ')'
        if children and leaf is not None:
            # mixed node: wrap stray tokens as leaves to keep the invariant
            children.append(ParseTree(label="TOK", leaf_text=leaf))
            return ParseTree(label=label, children=tuple(children))
        if leaf is not None:
            return ParseTree(label=label, leaf_text=leaf)
        if not children:
            raise UnparsableSentence(f"empty node {label!r} in bracketed tree")
        return ParseTree(label=label, children=tuple(children))

    tree = parse_node()
    if pos != len(tokens):
        raise UnparsableSentence("trailing content after bracketed tree")
    return tree


# --- heuristic chunker ------------------------------------------------------


def _np(tokens: list[str], label: str = "NP") -> ParseTree:
    children = []
    for token in tokens:
        tag = "DT" if token.lower() in DETERMINERS else (
            "IN" if token.lower() == "of" else (
                "CC" if token.lower() in COORDINATORS else "NN"))
        children.append(ParseTree(label=tag, leaf_text=token))
    return ParseTree(label=label, children=tuple(children))


def _vp(tokens: list[str]) -> ParseTree:
    verb = ParseTree(label="VB", leaf_text=tokens[0])
    if len(tokens) == 1:
        return ParseTree(label="VP", children=(verb,))
    return ParseTree(label="VP", children=(verb, _np(tokens[1:])))


def _chunk(tokens: list[str]) -> ParseTree:
    lowered = [t.lower() for t in tokens]

    if lowered and lowered[0] == "if" and "then" in lowered:
        split = lowered.index("then")
        cond_tokens = tokens[1:split]
        action_tokens = tokens[split + 1:]
        if not cond_tokens or not action_tokens:
            raise UnparsableSentence("conditional sentence is missing a clause")
        # split the condition at its first copula into subject and predicate
        verb_at = next(
            (i for i, t in enumerate(cond_tokens) if t.lower() in COPULAS), None
        )
        if verb_at is None or verb_at == 0:
            raise UnparsableSentence("conditional clause has no subject-verb split")
        sbar = ParseTree(
            label="SBAR",
            children=(
                ParseTree(label="IN", leaf_text=tokens[0]),
                ParseTree(
                    label="S",
                    children=(_np(cond_tokens[:verb_at]), _vp(cond_tokens[verb_at:])),
                ),
            ),
        )
        return ParseTree(label="S", children=(sbar, _vp(action_tokens)))

    if (
        len(lowered) > 2
        and lowered[0] == "for"
        and lowered[1] in ITERATIVE_HEADS
    ):
        rest = tokens[1:]
        rest_lower = lowered[1:]
        verb_at = next(
            (i for i, t in enumerate(rest_lower) if i > 0 and t in ACTION_VERBS), None
        )
        if verb_at is None:
            raise UnparsableSentence("iterative sentence has no action verb")
        pp = ParseTree(
            label="PP", children=(ParseTree(label="IN", leaf_text=tokens[0]),)
        )
        return ParseTree(
            label="S", children=(pp, _np(rest[:verb_at]), _vp(rest[verb_at:]))
        )

    if lowered and lowered[0] in ACTION_VERBS:
        rest = tokens[1:]
        # drop the copula after an interrogative lead ("what are the ...")
        if lowered[0] in ("what", "which") and rest and rest[0].lower() in COPULAS:
            rest = rest[1:]
        if not rest:
            raise UnparsableSentence("imperative sentence has no object")
        return ParseTree(label="S", children=(_vp([tokens[0]] + rest),))

    raise UnparsableSentence(
        "sentence matches no template marker (for-all / if-then / leading verb)"
    )


def parse(sentence: str) -> ParseTree:
    """Parse a sentence or echo an externally supplied bracketed tree."""
    if not sentence or not sentence.strip():
        raise UnparsableSentence("empty sentence")
    stripped = sentence.strip()
    if stripped.startswith("("):
        return parse_bracketed(stripped)
    tokens = tokenize(stripped)
    if not tokens:
        raise UnparsableSentence("sentence has no tokens")
    return _chunk(tokens)


# --- classification -----------------------------------------------------------


def _unwrap(tree: ParseTree) -> ParseTree:
    while tree.children and len(tree.children) == 1 and tree.label in ("ROOT", "TOP", "S1"):
        tree = tree.children[0]
    return tree


def classify(tree: ParseTree) -> QueryTemplate:
    """Match a parse tree against the three sentence templates.

    Precedence: conditional (if/then markers), then iterative (leading
    for-all prepositional phrase), then imperative (leading verb).
    """
    root = _unwrap(tree)
    leaves_lower = [t.lower() for t in root.leaves()]

    if "if" in leaves_lower[:1] or root.children and root.children[0].label in ("SBAR", "S'"):
        sbar = root.children[0] if root.children else None
        if sbar is not None and sbar.label in ("SBAR", "S'") and sbar.leaves()[0].lower() == "if":
            inner = sbar.find("S")
            cond_np = inner.find("NP") if inner else sbar.find("NP")
            cond_vp = inner.find("VP") if inner else sbar.find("VP")
            action_vp = next(
                (c for c in root.children[1:] if c.label == "VP"), None
            )
            if cond_np and cond_vp and action_vp:
                return QueryTemplate(
                    variant=CONDITIONAL,
                    cond_np=cond_np,
                    cond_vp=cond_vp,
                    action_vp=action_vp,
                )

    if root.children and root.children[0].label == "PP":
        pp = root.children[0]
        first = pp.leaves()[0].lower() if pp.leaves() else ""
        if first in ("for",):
            range_np = next((c for c in root.children[1:] if c.label == "NP"), None)
            if range_np is None:
                range_np = pp.find("NP")
            action_vp = next((c for c in root.children[1:] if c.label == "VP"), None)
            if range_np and action_vp:
                return QueryTemplate(
                    variant=ITERATIVE, range_np=range_np, action_vp=action_vp
                )

    vp = root if root.label == "VP" else root.find("VP")
    if vp is not None:
        verb_node = next((c for c in vp.children if c.label.startswith("VB")), None)
        if verb_node is None:
            verb_node = vp.find("VB", "VBP", "VBZ", "WP", "WDT")
        if verb_node is not None and verb_node.leaf_text is not None:
            object_np = next((c for c in vp.children if c.label == "NP"), None)
            if object_np is None:
                object_np = vp.find("NP")
            if object_np is not None:
                return QueryTemplate(
                    variant=IMPERATIVE,
                    verb=verb_node.leaf_text,
                    object_np=object_np,
                )

    raise NoTemplateMatch(f"tree {tree.to_bracketed()!r} fits no sentence template")


# --- slot extraction -----------------------------------------------------------


@dataclass
class _ElementReading:
    concept: str
    constants: list[str]
    qualifier: str | None = None
    warnings: list[str] = field(default_factory=list)


def _strip_determiners(tokens: list[str]) -> list[str]:
    return [t for t in tokens if t.lower() not in DETERMINERS]


def _split_constants(tokens: list[str]) -> list[str]:
    """Group post-head tokens into constants, splitting at coordinators."""
    groups: list[list[str]] = [[]]
    for token in tokens:
        if token.lower() in COORDINATORS:
            if groups[-1]:
                groups.append([])
        else:
            groups[-1].append(token)
    return [" ".join(g) for g in groups if g]


def _resolve_concept_token(kb: KnowledgeBase, token: str) -> str | None:
    try:
        return kb.resolve_concept(token)
    except (UnknownConcept, AmbiguousConcept):
        return None


def _is_schema_modifier(kb: KnowledgeBase, token: str, concept: str) -> bool:
    """True when a pre-head token restates the concept or its backing table."""
    entry = kb.concept(concept)
    normalized = singularize(normalize_term(token))
    return normalized in (
        entry.concept_name.lower(),
        singularize(entry.table_name.lower()),
        entry.table_name.lower(),
    )


def _infer_concept_from_store(
    kb: KnowledgeBase, store: CanonicalStore | None, constant: str
) -> str | None:
    """Guess the concept of a bare constant by scanning stored values, keys first."""
    if store is None:
        return None
    for entry in kb.ontology:
        if store.has_value(entry.concept_name, entry.key_attribute, constant):
            return entry.concept_name
    for entry in kb.ontology:
        for attr in entry.attributes:
            if store.values_matching(entry.concept_name, attr, constant):
                return entry.concept_name
    return None


def _read_element(
    kb: KnowledgeBase, store: CanonicalStore | None, tokens: list[str]
) -> _ElementReading:
    """Decompose an element phrase into concept, constants, and qualifier."""
    tokens = list(tokens)
    qualifier = None
    lowered = [t.lower() for t in tokens]
    if "of" in lowered:
        cut = lowered.index("of")
        qualifier = " ".join(tokens[cut + 1:]) or None
        tokens = tokens[:cut]
    tokens = _strip_determiners(tokens)
    if not tokens:
        raise UnknownConcept("element phrase is empty")

    head_index = None
    for i, token in enumerate(tokens):
        if _resolve_concept_token(kb, token) is not None:
            head_index = i
            break

    if head_index is None:
        # no concept word: infer the concept from the constant itself
        constant = " ".join(tokens)
        concept = _infer_concept_from_store(kb, store, constant)
        if concept is None:
            raise UnknownConcept(
                f"element {constant!r} names no known concept and matches no stored value"
            )
        return _ElementReading(concept=concept, constants=[constant], qualifier=qualifier)

    concept = _resolve_concept_token(kb, tokens[head_index])
    assert concept is not None
    warnings: list[str] = []
    post = tokens[head_index + 1:]
    pre = tokens[:head_index]
    if head_index > 0:
        unmatched = [t for t in pre if not _is_schema_modifier(kb, t, concept)]
        if post:
            # interior concept word within a proper name: keep the phrase whole
            if unmatched:
                whole = " ".join(tokens)
                return _ElementReading(
                    concept=concept, constants=[whole], qualifier=qualifier
                )
        elif unmatched:
            warnings.append(
                f"ignored modifier {' '.join(unmatched)!r} before {tokens[head_index]!r}"
            )
    constants = _split_constants(post)
    return _ElementReading(
        concept=concept, constants=constants, qualifier=qualifier, warnings=warnings
    )


def _attribute_surface(kb: KnowledgeBase, phrase: str) -> bool:
    """Whether a phrase resolves to an attribute of any concept."""
    try:
        kb.resolve_attribute(phrase)
        return True
    except UnknownAttribute:
        return False
    except Exception:
        return True  # ambiguous still counts as an attribute surface


def _selector_candidates(
    kb: KnowledgeBase,
    store: CanonicalStore | None,
    concept: str,
    constants: list[str],
) -> list[Selector]:
    """Ordered ways to bind constants to an attribute of the concept.

    Candidate order: the key attribute by exact value, then attributes whose
    name contains "Name", then the remaining attributes, keeping declaration
    order; a candidate qualifies when any constant equals a stored value or
    is a case-insensitive prefix of one. A key-shaped constant falls back to
    the key attribute with a virtual seed.
    """
    entry = kb.concept(concept)
    name_attrs = [a for a in entry.attributes if "name" in a.lower()]
    rest = [a for a in entry.attributes if a not in name_attrs]
    ordered = [entry.key_attribute] + name_attrs + rest

    candidates: list[Selector] = []
    for attribute in ordered:
        exact_only = attribute == entry.key_attribute
        values: list[str] = []
        seeds: list[str] = []
        hit = False
        for constant in constants:
            if store is not None and store.has_value(concept, attribute, constant):
                values.append(constant)
                hit = True
                continue
            matched = (
                [] if store is None or exact_only
                else store.values_matching(concept, attribute, constant)
            )
            if matched:
                values.extend(matched)
                hit = True
            elif exact_only and _looks_like_key(constant):
                values.append(constant)
                seeds.append(constant)
            else:
                values.append(constant)
        if hit:
            candidates.append(
                Selector(
                    attribute=attribute,
                    values=tuple(dict.fromkeys(values)),
                    seed_values=tuple(dict.fromkeys(seeds)),
                )
            )
    if not candidates:
        seedable = [c for c in constants if _looks_like_key(c)]
        if seedable:
            candidates.append(
                Selector(
                    attribute=entry.key_attribute,
                    values=tuple(constants),
                    seed_values=tuple(seedable),
                )
            )
    return candidates


def _looks_like_key(value: str) -> bool:
    """Identifier-shaped constants: compact, no spaces, digits or capitals inside."""
    if " " in value or not value or len(value) > 32:
        return False
    return any(ch.isdigit() for ch in value) or value.isupper()


def _split_object_np(
    kb: KnowledgeBase, tokens: list[str]
) -> tuple[list[str], list[str], str | None]:
    """Split object NP tokens into (requested attribute terms, element, qualifier).

    Handles both the "attribute of element" shape and the attribute-suffix
    shape without "of" (e.g. a trailing "sequences").
    """
    lowered = [t.lower() for t in tokens]
    if "of" in lowered:
        cut = lowered.index("of")
        left = _strip_determiners(tokens[:cut])
        right = tokens[cut + 1:]
        if left and _resolve_concept_token(kb, left[-1]) is not None:
            # "genes of cyanobacteria": the left side is the element itself
            return [], left, " ".join(right) or None
        return [" ".join(left)] if left else [], right, None
    stripped = _strip_determiners(tokens)
    for width in (3, 2, 1):
        if len(stripped) > width:
            suffix = " ".join(stripped[-width:])
            if _attribute_surface(kb, suffix):
                return [suffix], stripped[:-width], None
    return [], tokens, None


def extract_slots(
    template: QueryTemplate,
    kb: KnowledgeBase,
    store: CanonicalStore | None = None,
) -> QueryIntent:
    """Extract structured slots from a classified sentence template.

    The canonical store, when given, disambiguates which attribute a constant
    selects on; without it only key-shaped fallbacks are available.
    """
    if template.variant == IMPERATIVE:
        assert template.object_np is not None and template.verb is not None
        requested, element_tokens, qualifier = _split_object_np(
            kb, template.object_np.leaves()
        )
        reading = _read_element(kb, store, element_tokens)
        qualifier = qualifier or reading.qualifier
        return _finish_intent(
            kb,
            store,
            variant=IMPERATIVE,
            concept=reading.concept,
            constants=reading.constants,
            requested=requested,
            action=template.verb.lower(),
            qualifier=qualifier,
            warnings=reading.warnings,
        )

    if template.variant == ITERATIVE:
        assert template.range_np is not None and template.action_vp is not None
        reading = _read_element(kb, store, template.range_np.leaves())
        vp_leaves = template.action_vp.leaves()
        action = vp_leaves[0].lower() if vp_leaves else "find"
        requested = [" ".join(_strip_determiners(vp_leaves[1:]))] if len(vp_leaves) > 1 else []
        requested = [r for r in requested if r]
        return _finish_intent(
            kb,
            store,
            variant=ITERATIVE,
            concept=reading.concept,
            constants=reading.constants,
            requested=requested,
            action=action,
            qualifier=reading.qualifier,
            warnings=reading.warnings,
        )

    if template.variant == CONDITIONAL:
        assert template.cond_np is not None and template.cond_vp is not None
        assert template.action_vp is not None
        subject = _read_element(kb, store, template.cond_np.leaves())
        cond_leaves = template.cond_vp.leaves()
        predicate_tokens = [t for t in cond_leaves if t.lower() not in COPULAS]
        predicate = " ".join(predicate_tokens)
        vp_leaves = template.action_vp.leaves()
        action = vp_leaves[0].lower() if vp_leaves else "find"
        object_tokens = _strip_determiners(vp_leaves[1:])
        # "its X" refers back to the condition subject: request X of the subject
        object_tokens = [t for t in object_tokens if t.lower() not in PRONOUNS]
        requested = [" ".join(object_tokens)] if object_tokens else []
        subject_candidates = _selector_candidates(
            kb, store, subject.concept, subject.constants
        )
        subject_selector = subject_candidates[0] if subject_candidates else None
        intent = _finish_intent(
            kb,
            store,
            variant=CONDITIONAL,
            concept=subject.concept,
            constants=subject.constants,
            requested=requested,
            action=action,
            qualifier=subject.qualifier,
            warnings=subject.warnings,
        )
        return QueryIntent(
            variant=intent.variant,
            target_concept=intent.target_concept,
            selector=intent.selector,
            selector_candidates=intent.selector_candidates,
            requested=intent.requested,
            action=intent.action,
            condition=(subject_selector, predicate),
            qualifier=intent.qualifier,
            warnings=intent.warnings,
        )

    raise NoTemplateMatch(f"unknown template variant {template.variant!r}")


def _finish_intent(
    kb: KnowledgeBase,
    store: CanonicalStore | None,
    variant: str,
    concept: str,
    constants: list[str],
    requested: list[str],
    action: str,
    qualifier: str | None,
    warnings: list[str],
) -> QueryIntent:
    warnings = list(warnings)
    if qualifier:
        try:
            kb.resolve_attribute(qualifier, concept)
        except Exception:
            warnings.append(
                f"qualifier {qualifier!r} matches no attribute of {concept!r}; ignored"
            )
    candidates: tuple[Selector, ...] = ()
    selector: Selector | None = None
    if constants:
        found = _selector_candidates(kb, store, concept, constants)
        if not found:
            raise SelectorUnresolved(
                f"constants {constants!r} match no attribute of {concept!r}"
            )
        candidates = tuple(found)
        selector = found[0]
    return QueryIntent(
        variant=variant,
        target_concept=concept,
        selector=selector,
        selector_candidates=candidates,
        requested=tuple(requested),
        action=action,
        qualifier=qualifier,
        warnings=tuple(warnings),
    )
