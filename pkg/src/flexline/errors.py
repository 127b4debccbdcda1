"""Exception types shared across the package."""

from __future__ import annotations

from typing import List, Optional


class FlexlineError(Exception):
    """Base class for all package errors."""


class ParseError(FlexlineError):
    """A file or payload could not be parsed.

    Carries a line/column position when one is known (JSON syntax errors);
    schema-level problems leave them as None.
    """

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        if line is not None and column is not None:
            message = f"{message} (line {line}, column {column})"
        elif line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)


class ConsistencyError(FlexlineError):
    """Graph content violates a structural rule (dangling reference, bad predicate)."""


class UnknownEntity(FlexlineError):
    """An entity was referenced that does not exist in the graph."""


class NoCapability(FlexlineError):
    """An agent was asked about an operation it cannot perform."""


class MissingTimeModel(FlexlineError):
    """A capable (agent, operation) pair has no time model."""


class InvalidConfiguration(FlexlineError):
    """A line configuration failed validation.

    `violations` lists the individual problems.
    """

    def __init__(self, violations: List[str]):
        self.violations = list(violations)
        super().__init__("invalid configuration: " + "; ".join(self.violations))


class AmbiguousOwnership(FlexlineError):
    """No agent holds a majority fraction of an operation."""


class Infeasible(FlexlineError):
    """The optimization problem has no feasible assignment."""


class TooLarge(FlexlineError):
    """The instance exceeds a guard limit for exhaustive enumeration."""


class NumericalFailure(FlexlineError):
    """The LP solver lost numerical control."""


class HitNodeLimit(FlexlineError):
    """Branch and bound exhausted its node budget before proving optimality."""


class InsufficientSamples(FlexlineError):
    """Not enough observations to carry out the requested estimate or test."""


class UnknownPair(FlexlineError):
    """A sample arrived for an (agent, operation) pair the monitor does not track."""


class NonPositiveDuration(FlexlineError):
    """A sample carried a duration that is zero or negative."""


class NoFeasibleCandidate(FlexlineError):
    """Every candidate was excluded by the selection policy.

    `violations` maps candidate labels to the reasons they were rejected.
    """

    def __init__(self, violations):
        self.violations = dict(violations)
        detail = "; ".join(f"{k}: {', '.join(v)}" for k, v in self.violations.items())
        super().__init__("no feasible candidate: " + detail)
