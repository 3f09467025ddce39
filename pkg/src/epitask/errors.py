"""Exception hierarchy shared by every epitask module."""

from __future__ import annotations


class EpitaskError(Exception):
    """Base class for all library errors."""


class MalformedDocument(EpitaskError):
    """Input text is not syntactically valid JSON."""


class MissingField(EpitaskError):
    pass


class TypeMismatch(EpitaskError):
    pass


class SchemaViolation(EpitaskError):
    pass


class UnknownEntity(EpitaskError):
    pass


class GoalSyntaxError(EpitaskError):
    """Unbalanced or garbled goal s-expression."""


class UnknownPredicate(GoalSyntaxError):
    pass


class UnsupportedConnective(GoalSyntaxError):
    """`or`, `not`, quantifiers and friends are outside the goal grammar."""


class ArityError(GoalSyntaxError):
    pass


class InitOnlyPredicateInGoal(GoalSyntaxError):
    pass


class NonGroundFact(EpitaskError):
    pass


class UnlocatableFact(EpitaskError):
    pass


class ValidationFailed(EpitaskError):
    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(f"{v.check}: {v.message}" for v in self.violations[:5])
        super().__init__(f"{len(self.violations)} validation violation(s): {lines}")


class DepthGateFailed(EpitaskError):
    pass


class MalformedProblem(EpitaskError):
    pass


class UnknownAction(EpitaskError):
    pass


class NotYourTurn(EpitaskError):
    pass


class MalformedAction(EpitaskError):
    pass


class MalformedAnswer(EpitaskError):
    pass


class EmptyPool(EpitaskError):
    pass


class EmptyCell(EpitaskError):
    pass
