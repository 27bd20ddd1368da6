"""Symbol vocabulary with a fixed reserved block.

Every token handled anywhere in the system is an integer symbol id.  Ids
0..16 form a reserved block, in this exact order: four sequence-control
symbols (padding, decoder start, end of sequence, unknown word), the
program terminator, the four store query functions, and eight program
variables.  Word symbols follow, assigned in first-come interning order,
so the first interned word always receives id 17.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple

from .errors import FormatError, FrozenVocabularyError

PAD = 0
GO = 1
EOS = 2
UNK = 3
RETURN = 4
PREF = 5
SUFF = 6
PREFMAX = 7
SUFFMAX = 8
V1 = 9
V2 = 10
V3 = 11
V4 = 12
V5 = 13
V6 = 14
V7 = 15
V8 = 16

FUNCTION_TAGS = (PREF, SUFF, PREFMAX, SUFFMAX)
VARIABLES = tuple(range(V1, V8 + 1))
N_RESERVED = 17

RESERVED_SURFACES = (
    "<pad>", "<go>", "<eos>", "<unk>",
    "Return", "Pref", "Suff", "PrefMax", "SuffMax",
    "V1", "V2", "V3", "V4", "V5", "V6", "V7", "V8",
)

# Terminal punctuation stripped by tokenize.
_PUNCT = ".?!"


class Symbol(NamedTuple):
    id: int
    surface: str


def variable_index(symbol_id: int) -> int | None:
    """1-based variable number for a V_k symbol id, None for anything else."""
    if not V1 <= symbol_id <= V8:
        return None
    return symbol_id - V1 + 1


def variable_id(k: int) -> int:
    """Symbol id of V_k (k is 1-based)."""
    if not 1 <= k <= 8:
        raise ValueError(f"no variable V{k}")
    return V1 + k - 1


class Vocabulary:
    """Bidirectional word <-> id map seeded with the reserved block."""

    def __init__(self) -> None:
        self._surfaces: list[str] = list(RESERVED_SURFACES)
        self._ids: dict[str, int] = {s: i for i, s in enumerate(RESERVED_SURFACES)}
        self._frozen = False

    def __len__(self) -> int:
        return len(self._surfaces)

    @property
    def frozen(self) -> bool:
        return self._frozen

    def freeze(self) -> None:
        self._frozen = True

    def intern(self, word: str) -> int:
        """Return the id for `word`, assigning the next free id if new.

        Interning a new word into a frozen vocabulary raises
        FrozenVocabularyError; re-interning an existing word is always
        allowed and returns the same id.
        """
        sid = self._ids.get(word)
        if sid is not None:
            return sid
        if self._frozen:
            raise FrozenVocabularyError(f"cannot intern {word!r}: vocabulary is frozen")
        sid = len(self._surfaces)
        self._surfaces.append(word)
        self._ids[word] = sid
        return sid

    def lookup(self, symbol_id: int) -> str:
        return self._surfaces[symbol_id]

    def get(self, word: str) -> int | None:
        return self._ids.get(word)

    def symbol(self, word: str) -> Symbol:
        return Symbol(self.intern(word), word)

    def is_word(self, symbol_id: int) -> bool:
        return symbol_id >= N_RESERVED

    def word_ids(self) -> range:
        """Ids of all interned words (reserved block excluded)."""
        return range(N_RESERVED, len(self._surfaces))

    def tokenize(self, line: str, allow_unk: bool = False) -> list[int]:
        """Lowercase, strip terminal punctuation, split on whitespace, intern.

        With allow_unk=True unknown words map to the UNK symbol instead of
        raising on a frozen vocabulary (used when answering over a frozen
        checkpointed vocabulary).
        """
        ids = []
        for raw in line.lower().split():
            word = raw.rstrip(_PUNCT)
            if not word:
                continue
            if allow_unk:
                sid = self._ids.get(word)
                ids.append(UNK if sid is None else sid)
            else:
                ids.append(self.intern(word))
        return ids

    def detokenize(self, ids: Iterable[int]) -> str:
        return " ".join(self._surfaces[i] for i in ids)

    def to_lines(self) -> list[str]:
        """Serialize as id<TAB>surface lines sorted by id."""
        return [f"{i}\t{s}" for i, s in enumerate(self._surfaces)]

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "Vocabulary":
        pairs = []
        for line_no, line in enumerate(lines, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                sid_text, surface = line.split("\t")
                sid = int(sid_text)
            except ValueError:
                raise FormatError("expected 'id<TAB>surface'", line_no) from None
            pairs.append((sid, surface))
        pairs.sort()
        vocab = cls()
        for sid, surface in pairs:
            if sid < N_RESERVED:
                if not 0 <= sid or RESERVED_SURFACES[sid] != surface:
                    raise FormatError(f"reserved id {sid} has surface {surface!r}")
                continue
            got = vocab.intern(surface)
            if got != sid:
                raise FormatError(f"non-contiguous vocabulary ids: {sid} vs {got}")
        vocab.freeze()
        return vocab

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("\n".join(self.to_lines()) + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path) as fh:
            return cls.from_lines(fh)
