"""Shared error types, resource caps, and run statistics."""

from __future__ import annotations

import time
from dataclasses import dataclass, field


class HkError(Exception):
    """Base class for all library errors."""


class CapExceeded(HkError):
    """A configured resource cap (nodes, classes, number size) was hit."""


class DecisionTimeout(HkError):
    """The wall-clock deadline for a decision run expired."""


class MalformedStructure(HkError, ValueError):
    """A structure violates basic well-formedness (dangling edge, missing tuple node)."""


class FormulaSyntaxError(HkError, ValueError):
    """Parse error, with 1-based line/column of the offending token."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


@dataclass
class Caps:
    """Resource limits for enumeration and bound arithmetic.

    max_nodes caps the node count of any single enumerated structure;
    max_classes caps the number of structures yielded by one scan;
    max_bits caps the bit size of materialized bound values.
    """

    max_nodes: int = 64
    max_classes: int = 10_000_000
    max_bits: int = 1 << 20


@dataclass
class Stats:
    """Counters accumulated during a decision run.

    `structures` is the logical number of structures enumerated, i.e. the
    count a cache-free run would perform; it is identical whether or not
    memoization is enabled.  `cache_hits` counts memo lookups that avoided
    recursion.
    """

    structures: int = 0
    cache_hits: int = 0
    started: float = field(default_factory=time.perf_counter)
    deadline: float | None = None

    def check_deadline(self) -> None:
        if self.deadline is not None and time.perf_counter() > self.deadline:
            raise DecisionTimeout("decision timed out")

    @property
    def elapsed(self) -> float:
        return time.perf_counter() - self.started


DEFAULT_CAPS = Caps()
