"""Programs over the n-gram store: parsing, execution, reward.

A program is a list of statements `f v_1 ... v_L` ending in Return.  The
result set of statement t is bound to variable V_t; later statements may
use bound variables as arguments.  Execution is deterministic and total:
an empty intermediate result simply propagates to an empty answer set.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterable, Sequence

from . import vocab as V
from .errors import MalformedProgramError
from .store import KnowledgeStore, apply_function, fn_is_max

# Statement count cap; question programs observed to need at most three
# chained lookups, and the programmer's decode length is derived from it.
MAX_STATEMENTS = 3


@dataclass(frozen=True)
class Statement:
    function: int
    args: tuple[int, ...]  # word symbol ids, or V1..V8 ids for variable refs


@dataclass(frozen=True)
class Program:
    statements: tuple[Statement, ...]
    terminated: bool = True


@dataclass(frozen=True)
class ExecutionState:
    bindings: tuple[dict[int, int], ...]  # bindings[t-1] = result of statement t


def parse_program(tokens: Sequence[int], n: int = 3) -> Program:
    """Group a flat token sequence into statements.

    Each function tag starts a statement that consumes the following
    tokens as arguments until the next tag or Return.  Raises
    MalformedProgramError on empty input, missing/early Return, arity
    outside 1..n-1, forward variable references, or stray tokens.
    """
    tokens = list(tokens)
    if not tokens:
        raise MalformedProgramError("empty program")
    statements: list[Statement] = []
    fn: int | None = None
    args: list[int] = []

    def close():
        if fn is None:
            return
        if not 1 <= len(args) <= n - 1:
            raise MalformedProgramError(
                f"statement has {len(args)} arguments, allowed 1..{n - 1}")
        for a in args:
            k = V.variable_index(a)
            if k is not None and k > len(statements):
                raise MalformedProgramError(f"V{k} referenced before binding")
        statements.append(Statement(fn, tuple(args)))

    for pos, tok in enumerate(tokens):
        if tok in V.FUNCTION_TAGS:
            close()
            fn, args = tok, []
        elif tok == V.RETURN:
            if pos != len(tokens) - 1:
                raise MalformedProgramError("tokens after Return")
            close()
            if not statements:
                raise MalformedProgramError("Return with no statements")
            return Program(tuple(statements), terminated=True)
        elif V.variable_index(tok) is not None or tok >= V.N_RESERVED:
            if fn is None:
                raise MalformedProgramError("argument before any function tag")
            args.append(tok)
        else:
            raise MalformedProgramError(f"token {tok} not allowed in programs")
    raise MalformedProgramError("program not terminated by Return")


def program_tokens(program: Program) -> list[int]:
    """Flat token form, ending in Return (inverse of parse_program)."""
    out: list[int] = []
    for s in program.statements:
        out.append(s.function)
        out.extend(s.args)
    out.append(V.RETURN)
    return out


def serialize_program(program: Program, vocabulary: V.Vocabulary) -> str:
    parts = []
    for s in program.statements:
        words = " ".join(vocabulary.lookup(a) for a in s.args)
        parts.append(f"{vocabulary.lookup(s.function)} {words}")
    parts.append("Return")
    return "; ".join(parts)


def execute(program: Program, store: KnowledgeStore) -> tuple[set[int], ExecutionState]:
    """Run all statements; answers are the final statement's symbols.

    A variable argument expands over its bound symbols: the statement is
    evaluated once per element of the cartesian product of its variable
    bindings and the results are unioned keeping max timestamp per
    symbol.  For the Max function variants the latest-timestamp filter
    applies after that union.
    """
    bindings: list[dict[int, int]] = []
    for stmt in program.statements:
        choices: list[list[int]] = []
        for a in stmt.args:
            k = V.variable_index(a)
            if k is None:
                choices.append([a])
            else:
                choices.append(sorted(bindings[k - 1]))
        merged: dict[int, int] = {}
        for combo in product(*choices):
            for sym, ts in apply_function(stmt.function, combo, store).items():
                if sym not in merged or ts > merged[sym]:
                    merged[sym] = ts
        if merged and fn_is_max(stmt.function):
            top = max(merged.values())
            merged = {s: t for s, t in merged.items() if t == top}
        bindings.append(merged)
    answers = set(bindings[-1]) if bindings else set()
    return answers, ExecutionState(tuple(bindings))


def reward_of(answers: set[int], expected: int) -> int:
    """1 iff the program produced exactly the expected singleton."""
    return 1 if answers == {expected} else 0


def grounded_args(stmt: Statement, state_bindings: Sequence[dict[int, int]]) -> list[tuple[int, ...]]:
    """All literal argument tuples a statement denotes under given bindings."""
    choices: list[list[int]] = []
    for a in stmt.args:
        k = V.variable_index(a)
        if k is None:
            choices.append([a])
        else:
            choices.append(sorted(state_bindings[k - 1]))
    return [tuple(c) for c in product(*choices)]
