"""Exception hierarchy shared across the package.

Error class names are part of the external contract: the CLI reports them
on stderr and the HTTP API echoes them in error payloads.
"""


class FactLinkError(Exception):
    """Base class for all errors raised by this package."""

    @property
    def name(self) -> str:
        return type(self).__name__


# --- table ingestion / canonical store ---

class CanonicalizationError(FactLinkError):
    pass


class MissingKeyColumn(CanonicalizationError):
    pass


class DuplicateKey(CanonicalizationError):
    pass


class ArityMismatch(CanonicalizationError):
    pass


class EmptyKeyValue(CanonicalizationError):
    pass


# --- knowledge configuration ---

class InconsistentKnowledge(FactLinkError):
    pass


class UnknownConcept(FactLinkError):
    pass


class AmbiguousConcept(FactLinkError):
    pass


class UnknownAttribute(FactLinkError):
    pass


class AmbiguousAttribute(FactLinkError):
    pass


# --- natural language frontend ---

class UnparsableSentence(FactLinkError):
    pass


class NoTemplateMatch(FactLinkError):
    pass


class SelectorUnresolved(FactLinkError):
    pass


# --- reasoner / goal language ---

class GoalSyntaxError(FactLinkError):
    pass


class UnknownConceptInGoal(FactLinkError):
    pass


class UnknownAttributeInGoal(FactLinkError):
    pass


# --- planner ---

class EmptyPlan(FactLinkError):
    pass


class NotDirectlyRenderable(FactLinkError):
    pass


# --- tool gateway ---

class ToolUnavailable(FactLinkError):
    pass


class InvalidSpec(FactLinkError):
    pass


class SchemaMismatch(FactLinkError):
    pass
