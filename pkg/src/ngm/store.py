"""Symbolic knowledge storage: timed fixed-length n-grams under hash indexes.

A store holds n-grams of exactly N symbols, each carrying the index of the
text piece it was produced from as its timestamp.  Queries run against two
hash indexes, one keyed on n-gram prefixes and one keyed on suffixes read
from the end backwards, so lookup cost never depends on how many n-grams
the store holds.

The four query functions:

    Pref(v)    -> symbols following prefix v, with their timestamps
    PrefMax(v) -> the Pref results carrying the latest timestamp
    Suff(v)    -> symbols preceding suffix v (v given innermost-first)
    SuffMax(v) -> the Suff results carrying the latest timestamp

Results are symbol -> timestamp maps, deduplicated keeping the maximum
timestamp per symbol.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from . import vocab as V
from .errors import ArityError, LengthMismatchError


@dataclass(frozen=True)
class TimedNgram:
    symbols: tuple[int, ...]
    timestamp: int


PREFIX = "prefix"
SUFFIX = "suffix"

# Which index each query function reads, and whether it keeps only the
# latest-timestamp results.
_FN_DIRECTION = {V.PREF: PREFIX, V.PREFMAX: PREFIX, V.SUFF: SUFFIX, V.SUFFMAX: SUFFIX}
_FN_IS_MAX = {V.PREF: False, V.PREFMAX: True, V.SUFF: False, V.SUFFMAX: True}

FUNCTION_TAGS = V.FUNCTION_TAGS


def fn_direction(fn: int) -> str:
    try:
        return _FN_DIRECTION[fn]
    except KeyError:
        raise ValueError(f"unknown query function {fn}") from None


def fn_is_max(fn: int) -> bool:
    return _FN_IS_MAX[fn]


class KnowledgeStore:
    """Immutable store built by `build_store`.

    Internally n-grams live in flat numpy arrays; the indexes map key
    tuples to (a) posting arrays of n-gram row ids sorted by timestamp
    ascending and (b) next-symbol maps {symbol -> max timestamp} which
    answer Pref/Suff in time bounded by the symbol alphabet, not the
    store size.
    """

    def __init__(self, n: int, symbols: np.ndarray, timestamps: np.ndarray,
                 pre_post, pre_next, suf_post, suf_next):
        self.n = n
        self._symbols = symbols
        self._timestamps = timestamps
        self._pre_post = pre_post
        self._pre_next = pre_next
        self._suf_post = suf_post
        self._suf_next = suf_next

    def __len__(self) -> int:
        return int(self._symbols.shape[0])

    def ngram_at(self, i: int) -> TimedNgram:
        return TimedNgram(tuple(int(s) for s in self._symbols[i]),
                          int(self._timestamps[i]))

    def __iter__(self) -> Iterator[TimedNgram]:
        for i in range(len(self)):
            yield self.ngram_at(i)

    def posting(self, direction: str, key: tuple[int, ...]) -> np.ndarray:
        """Row ids of n-grams matching `key`, sorted by timestamp ascending."""
        index = self._pre_post if direction == PREFIX else self._suf_post
        hit = index.get(key)
        if hit is None:
            return np.empty(0, dtype=np.int64)
        return hit

    def next_symbols(self, direction: str, partial: tuple[int, ...]) -> dict[int, int]:
        """Map of symbols extending `partial`, each with its max timestamp."""
        index = self._pre_next if direction == PREFIX else self._suf_next
        return index.get(partial, _EMPTY)

    def content_key(self) -> bytes:
        """Hashable fingerprint of the store contents (for deduplication)."""
        return self._symbols.tobytes() + self._timestamps.tobytes()

    def index_bytes(self) -> int:
        """Approximate resident size of the rows plus both indexes."""
        total = self._symbols.nbytes + self._timestamps.nbytes
        for postings in (self._pre_post, self._suf_post):
            for arr in postings.values():
                total += arr.nbytes
        for nexts in (self._pre_next, self._suf_next):
            for successors in nexts.values():
                total += 16 * len(successors)
        return total


_EMPTY: dict[int, int] = {}


def build_store(ngrams: Iterable[TimedNgram | tuple], n: int | None = None) -> KnowledgeStore:
    """Index a collection of timed n-grams.

    Accepts TimedNgram objects or bare (symbols, timestamp) pairs.  All
    n-grams must share one length; a mismatch raises LengthMismatchError.
    Duplicate (symbols, timestamp) entries are stored once.
    """
    rows: list[tuple[int, ...]] = []
    stamps: list[int] = []
    seen: set[tuple] = set()
    for item in ngrams:
        if isinstance(item, TimedNgram):
            syms, ts = item.symbols, item.timestamp
        else:
            syms, ts = item
        syms = tuple(int(s) for s in syms)
        if n is None:
            n = len(syms)
        elif len(syms) != n:
            raise LengthMismatchError(
                f"n-gram of length {len(syms)} offered to a store of length {n}")
        key = (syms, ts)
        if key in seen:
            continue
        seen.add(key)
        rows.append(syms)
        stamps.append(int(ts))
    if n is None:
        raise LengthMismatchError("cannot infer n-gram length from an empty input; pass n")
    if n < 2:
        raise LengthMismatchError(f"store needs n >= 2, got {n}")

    m = len(rows)
    symbols = np.asarray(rows, dtype=np.int64).reshape(m, n)
    timestamps = np.asarray(stamps, dtype=np.int64)

    # Index in timestamp order so posting lists come out sorted.
    order = np.argsort(timestamps, kind="stable")

    pre_post: dict[tuple, list[int]] = {}
    suf_post: dict[tuple, list[int]] = {}
    pre_next: dict[tuple, dict[int, int]] = {(): {}}
    suf_next: dict[tuple, dict[int, int]] = {(): {}}
    for i in order:
        i = int(i)
        syms = rows[i]
        rev = syms[::-1]
        ts = stamps[i]
        for k in range(1, n + 1):
            pre_post.setdefault(syms[:k], []).append(i)
            suf_post.setdefault(rev[:k], []).append(i)
        for k in range(n):
            pre_next.setdefault(syms[:k], {})[syms[k]] = ts
            suf_next.setdefault(rev[:k], {})[rev[k]] = ts

    pre_post_np = {k: np.asarray(ids, dtype=np.int64) for k, ids in pre_post.items()}
    suf_post_np = {k: np.asarray(ids, dtype=np.int64) for k, ids in suf_post.items()}
    return KnowledgeStore(n, symbols, timestamps, pre_post_np, pre_next, suf_post_np, suf_next)


def apply_function(fn: int, args: tuple[int, ...], store: KnowledgeStore) -> dict[int, int]:
    """Run one query function; returns {symbol: max timestamp}.

    Argument count must be 1..N-1 (ArityError otherwise).  Max variants
    keep only the pairs attaining the latest timestamp among the matches.
    """
    arity = len(args)
    if not 1 <= arity <= store.n - 1:
        raise ArityError(f"arity {arity} outside 1..{store.n - 1}")
    result = store.next_symbols(fn_direction(fn), tuple(args))
    if not result:
        return {}
    if fn_is_max(fn):
        top = max(result.values())
        return {s: t for s, t in result.items() if t == top}
    return dict(result)


def valid_next_tokens(store: KnowledgeStore, direction: str,
                      partial: tuple[int, ...]) -> set[int]:
    """Symbols that extend `partial` to a longer indexed key.

    `partial` may have length 0..N-1; suffix partials are given in the
    same innermost-first order the suffix functions use.
    """
    if not 0 <= len(partial) <= store.n - 1:
        raise ArityError(f"partial of length {len(partial)} outside 0..{store.n - 1}")
    return set(store.next_symbols(direction, tuple(partial)))


def propose_tweaks(fn: int, args: tuple[int, ...], store: KnowledgeStore) -> list[TimedNgram]:
    """Rewrites of stored n-grams that would let a failing statement match.

    Returns [] when the statement already succeeds, or when not even its
    first argument matches.  Otherwise, with p = args[:m] the longest
    matched key, every n-gram matching p is rewritten to start (for prefix
    functions; mirrored for suffix functions) with args[:m+1], keeping its
    remaining symbols and its source timestamp.
    """
    if apply_function(fn, args, store):
        return []
    if not apply_function(fn, (args[0],), store):
        return []
    direction = fn_direction(fn)
    m = 0
    for k in range(len(args) - 1, 0, -1):
        if store.posting(direction, tuple(args[:k])).size:
            m = k
            break
    if m == 0:
        return []
    out: list[TimedNgram] = []
    seen: set[tuple] = set()
    for row in store.posting(direction, tuple(args[:m])):
        g = store.ngram_at(int(row))
        syms = g.symbols if direction == PREFIX else g.symbols[::-1]
        tweaked = args[:m + 1] + syms[m + 1:]
        if direction == SUFFIX:
            tweaked = tweaked[::-1]
        key = (tweaked, g.timestamp)
        if key in seen:
            continue
        seen.add(key)
        out.append(TimedNgram(tweaked, g.timestamp))
    return out


def dump_store(store: KnowledgeStore, vocabulary: V.Vocabulary) -> list[str]:
    """One line per n-gram: timestamp, TAB, space-joined surfaces."""
    return [f"{g.timestamp}\t{vocabulary.detokenize(g.symbols)}" for g in store]


def load_store(lines: Iterable[str], vocabulary: V.Vocabulary,
               n: int | None = None) -> KnowledgeStore:
    ngrams = []
    for line in lines:
        line = line.rstrip("\n")
        if not line:
            continue
        ts_text, words = line.split("\t")
        syms = tuple(vocabulary.intern(w) for w in words.split(" "))
        ngrams.append(TimedNgram(syms, int(ts_text)))
    return build_store(ngrams, n=n)
