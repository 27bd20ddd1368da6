"""Allowed-token oracles for constrained decoding.

Three maskers implement the Masker protocol (immutable states):

  FixedLengthWordMasker  - knowledge encoder: exactly n word symbols, then EOS.
  GrammarMasker          - programmer, grammar only: well-formed programs
                           (function tag, 1..n-1 args, closed by Return).
  AssistedMasker         - programmer with code assist: additionally keeps
                           every statement matchable in a store, tracking
                           variable bindings by incremental execution, so
                           decoded programs never fail.

Both program maskers force closure within the statement budget, so every
finished hypothesis parses.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import vocab as V
from .program import MAX_STATEMENTS
from .store import (KnowledgeStore, apply_function, fn_direction, fn_is_max,
                    valid_next_tokens)


class FixedLengthWordMasker:
    def __init__(self, word_ids, n: int):
        self._words = tuple(word_ids)
        self._n = n

    def init(self):
        return 0

    def allowed(self, emitted: int):
        return self._words if emitted < self._n else (V.EOS,)

    def advance(self, emitted: int, token: int):
        return emitted + 1


@dataclass(frozen=True)
class _GrammarState:
    completed: int          # closed statements so far
    open_args: int | None   # args in the open statement, None if none open
    returned: bool = False


class GrammarMasker:
    """Program well-formedness only; any word may appear as an argument."""

    def __init__(self, word_ids, n: int, max_statements: int = MAX_STATEMENTS):
        self._words = tuple(word_ids)
        self._n = n
        self._max = max_statements

    def init(self):
        return _GrammarState(0, None)

    def _variables(self, completed: int):
        return tuple(V.variable_id(k) for k in range(1, completed + 1))

    def allowed(self, state: _GrammarState):
        if state.returned:
            return (V.EOS,)
        if state.open_args is None:
            return V.FUNCTION_TAGS
        out: list[int] = []
        if state.open_args >= 1:
            if state.completed + 2 <= self._max:
                out.extend(V.FUNCTION_TAGS)
            out.append(V.RETURN)
        if state.open_args < self._n - 1:
            out.extend(self._variables(state.completed))
            out.extend(self._words)
        return tuple(out)

    def advance(self, state: _GrammarState, token: int):
        if token in V.FUNCTION_TAGS:
            done = state.completed + (state.open_args is not None)
            return _GrammarState(done, 0)
        if token == V.RETURN:
            return _GrammarState(state.completed + 1, None, returned=True)
        return _GrammarState(state.completed, state.open_args + 1)


@dataclass(frozen=True)
class _AssistState:
    bindings: tuple[tuple[tuple[int, int], ...], ...]  # per closed statement
    fn: int | None
    grounded: frozenset[tuple[int, ...]]  # live literal argument prefixes
    args: int
    returned: bool = False


class AssistedMasker:
    """Grammar plus store masking: arguments must extend at least one live
    grounded prefix, so closing a statement guarantees a nonempty result."""

    def __init__(self, store: KnowledgeStore, max_statements: int = MAX_STATEMENTS):
        self._store = store
        self._max = max_statements

    def init(self):
        return _AssistState((), None, frozenset(), 0)

    def _close(self, state: _AssistState) -> tuple[tuple[int, int], ...]:
        """Execute the open statement over its grounded argument tuples."""
        merged: dict[int, int] = {}
        for args in state.grounded:
            for sym, ts in apply_function(state.fn, args, self._store).items():
                if sym not in merged or ts > merged[sym]:
                    merged[sym] = ts
        if merged and fn_is_max(state.fn):
            top = max(merged.values())
            merged = {s: t for s, t in merged.items() if t == top}
        return tuple(sorted(merged.items()))

    def allowed(self, state: _AssistState):
        if state.returned:
            return (V.EOS,)
        store_live = len(self._store) > 0
        if state.fn is None:
            return V.FUNCTION_TAGS if store_live else ()
        out: list[int] = []
        if state.args >= 1:
            if len(state.bindings) + 2 <= self._max and store_live:
                out.extend(V.FUNCTION_TAGS)
            out.append(V.RETURN)
        if state.args < self._store.n - 1:
            direction = fn_direction(state.fn)
            extendable: set[int] = set()
            for prefix in state.grounded:
                extendable |= valid_next_tokens(self._store, direction, prefix)
            out.extend(sorted(extendable))
            for k in range(1, len(state.bindings) + 1):
                symbols = {s for s, _ in state.bindings[k - 1]}
                if symbols & extendable:
                    out.append(V.variable_id(k))
        return tuple(out)

    def advance(self, state: _AssistState, token: int):
        if token in V.FUNCTION_TAGS:
            bindings = state.bindings
            if state.fn is not None:
                bindings = bindings + (self._close(state),)
            return _AssistState(bindings, token, frozenset([()]), 0)
        if token == V.RETURN:
            return _AssistState(state.bindings + (self._close(state),),
                                None, frozenset(), 0, returned=True)
        direction = fn_direction(state.fn)
        k = V.variable_index(token)
        if k is None:
            symbols = {token}
        else:
            symbols = {s for s, _ in state.bindings[k - 1]}
        grounded = frozenset(
            prefix + (s,) for prefix in state.grounded for s in symbols
            if s in valid_next_tokens(self._store, direction, prefix))
        return _AssistState(state.bindings, state.fn, grounded, state.args + 1)
