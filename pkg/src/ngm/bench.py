"""Answer-latency benchmark: indexed store vs linear scan over raw text.

Stores are encoded and indexed offline; only the per-question work is
timed.  The rule-based encoder/programmer pair below answers task-1
"where is X" probes exactly, so latency can be measured at corpus sizes
where training a model first would dominate the runtime.  The baseline
re-reads every raw sentence per question, standing in for models whose
answering cost grows with the story.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import vocab as V
from .babi import LIFELONG_TASKS, TaskSpec, generate_lifelong
from .errors import ConfigError, UnsupportedTaskError
from .program import execute, parse_program
from .store import KnowledgeStore, build_store
from .vocab import Vocabulary


@dataclass(frozen=True)
class BenchRow:
    length: int
    build_seconds: float
    index_bytes: int
    ngm_p50_ms: float
    ngm_p95_ms: float
    scan_p50_ms: float
    scan_p95_ms: float


@dataclass(frozen=True)
class BenchReport:
    rows: tuple[BenchRow, ...]

    def __post_init__(self):
        lengths = [row.length for row in self.rows]
        if lengths != sorted(lengths):
            raise ConfigError("bench rows must be sorted by length")

    def to_tsv(self) -> str:
        lines = ["length\tbuild_s\tindex_bytes\tngm_p50_ms\tngm_p95_ms"
                 "\tscan_p50_ms\tscan_p95_ms"]
        for r in self.rows:
            lines.append("%d\t%.3f\t%d\t%.6f\t%.6f\t%.6f\t%.6f"
                         % (r.length, r.build_seconds, r.index_bytes,
                            r.ngm_p50_ms, r.ngm_p95_ms,
                            r.scan_p50_ms, r.scan_p95_ms))
        return "\n".join(lines) + "\n"


def sentence_tuple(words: tuple[str, ...]) -> tuple[str, str, str]:
    """Rule encoding for movement sentences: actor, verb, final word."""
    return words[0], words[1], words[-1]


def lifelong_corpus(task: int, length: int, probes: int, seed: int):
    """Sentence word-tuples plus (entity, answer) probe pairs."""
    if task not in LIFELONG_TASKS:
        raise UnsupportedTaskError(f"task {task} has no life-long variant")
    spec = TaskSpec(task, 1, story_length=length, seed=seed)
    sentences: list[tuple[str, ...]] = []
    questions: list[tuple[str, str]] = []
    for line in generate_lifelong(spec, final_probes=probes):
        if "\t" in line:
            head, answer, _ = line.split("\t")
            words = head.split(" ", 1)[1].rstrip("?").split()
            questions.append((words[-1], answer))
        else:
            words = line.split(" ", 1)[1].rstrip(".").split()
            sentences.append(tuple(words))
    return sentences, questions


def build_indexed_store(sentences, vocabulary: Vocabulary):
    """Timed offline encoding: intern, tuple-encode, index."""
    t0 = time.perf_counter()
    rows = [(tuple(vocabulary.intern(w) for w in sentence_tuple(s)), i + 1)
            for i, s in enumerate(sentences)]
    store = build_store(rows, n=3)
    return store, time.perf_counter() - t0


def rule_program_answer(store: KnowledgeStore, entity: int) -> set[int]:
    """Two-hop latest-location query: the verb hop then the object hop."""
    tokens = (V.PREFMAX, entity, V.PREFMAX, entity, V.V1, V.RETURN)
    answers, _ = execute(parse_program(tokens), store)
    return answers


def linear_scan_answer(sentences, entity: str) -> str | None:
    """Reference O(corpus) pass: re-read every sentence per question."""
    hit = None
    for words in sentences:
        if words[0] == entity:
            hit = words
    return hit[-1] if hit is not None else None


def _time_ms(fn, args_list, warmup: int = 5) -> tuple[float, float]:
    for args in args_list[:warmup]:
        fn(*args)
    samples = []
    for args in args_list:
        t0 = time.perf_counter()
        fn(*args)
        samples.append((time.perf_counter() - t0) * 1e3)
    return (float(np.percentile(samples, 50)),
            float(np.percentile(samples, 95)))


def run_bench(lengths, probes: int = 100, task: int = 1, seed: int = 0,
              answerer=None, progress=None) -> BenchReport:
    """Measure per-question latency at each corpus length.

    `answerer(store, vocabulary, entity_word) -> set[word_id]` replaces
    the rule programmer when supplied (e.g. a trained model).  Probe
    outputs are checked against the generator's gold answers; the rule
    path must be exact.
    """
    if probes < 1:
        raise ConfigError("bench needs at least one probe question")
    rows = []
    for length in sorted(lengths):
        try:
            sentences, questions = lifelong_corpus(task, length, probes, seed)
            vocabulary = Vocabulary()
            store, build_s = build_indexed_store(sentences, vocabulary)
        except MemoryError:
            # rows are sorted ascending, so anything larger would also fail
            if progress is not None:
                progress(f"length {length}: out of memory, stopping")
            break
        if answerer is None:
            def ngm_probe(entity_word, vocab=vocabulary, st=store):
                return rule_program_answer(st, vocab.intern(entity_word))
        else:
            def ngm_probe(entity_word, vocab=vocabulary, st=store):
                return answerer(st, vocab, entity_word)
        probe_args = [(q,) for q, _ in questions]
        mistakes = 0
        for entity, gold in questions:
            got = ngm_probe(entity)
            if got != {vocabulary.intern(gold)}:
                mistakes += 1
            if linear_scan_answer(sentences, entity) != gold:
                mistakes += 1
        if answerer is None and mistakes:
            raise ConfigError(f"rule probe mismatched {mistakes} gold answers "
                              f"at length {length}")
        ngm_p50, ngm_p95 = _time_ms(ngm_probe, probe_args)
        scan_p50, scan_p95 = _time_ms(
            lambda e: linear_scan_answer(sentences, e), probe_args)
        rows.append(BenchRow(length, build_s, store.index_bytes(),
                             ngm_p50, ngm_p95, scan_p50, scan_p95))
        if progress is not None:
            progress(rows[-1])
    return BenchReport(tuple(rows))
