"""Decode maskers: emitted sequences parse, and assisted programs never fail."""

import numpy as np
import pytest

from ngm import vocab as V
from ngm.masks import AssistedMasker, FixedLengthWordMasker, GrammarMasker
from ngm.program import execute, parse_program
from ngm.seq2seq import ModelDims, beam_decode, init_model
from ngm.store import TimedNgram, build_store
from ngm.vocab import Vocabulary


@pytest.fixture
def world():
    v = Vocabulary()
    rows = [
        (1, "mary went kitchen"),
        (2, "john went bedroom"),
        (3, "mary went garden"),
        (4, "emily is sheep"),
        (5, "sheep afraid cats"),
    ]
    store = build_store([TimedNgram(tuple(v.tokenize(t)), ts) for ts, t in rows])
    v.tokenize("where is to the")  # question-side words
    return v, store


def model_for(v, seed=0):
    dims = ModelDims(vocab_size=len(v), max_source_len=14, max_target_len=10,
                     embed_dim=3, hidden_dim=3)
    return init_model(dims, seed=seed)


def test_fixed_length_masker_emits_exactly_n_words(world):
    v, _ = world
    m = model_for(v)
    masker = FixedLengthWordMasker(v.word_ids(), 3)
    for hyp in beam_decode(m, v.tokenize("mary went to kitchen"), [], 4, masker,
                           max_len=4):
        assert len(hyp.tokens) == 3
        assert all(v.is_word(t) for t in hyp.tokens)


def test_grammar_masker_always_yields_parseable_programs(world):
    v, _ = world
    masker = GrammarMasker(v.word_ids(), 3)
    question = v.tokenize("where is mary")
    for seed in range(5):
        m = model_for(v, seed=seed)
        hyps = beam_decode(m, question, [], 8, masker, max_len=10)
        assert hyps
        for hyp in hyps:
            program = parse_program(hyp.tokens)
            assert 1 <= len(program.statements) <= 3


def test_grammar_masker_token_by_token():
    v = Vocabulary()
    w = [v.intern(x) for x in "abc"]
    g = GrammarMasker(v.word_ids(), 3, max_statements=2)
    s = g.init()
    assert set(g.allowed(s)) == set(V.FUNCTION_TAGS)
    s = g.advance(s, V.PREF)
    assert V.RETURN not in g.allowed(s)  # zero args so far
    assert not any(V.variable_index(t) for t in g.allowed(s))
    s = g.advance(s, w[0])
    assert V.RETURN in g.allowed(s)
    s = g.advance(s, w[1])  # arity now 2 = n-1: words no longer allowed
    assert set(g.allowed(s)) == set(V.FUNCTION_TAGS) | {V.RETURN}
    s = g.advance(s, V.SUFF)
    assert V.variable_id(1) in g.allowed(s)
    assert V.variable_id(2) not in g.allowed(s)
    s = g.advance(s, V.variable_id(1))
    # Statement budget reached: opening a third is not offered.
    assert set(g.allowed(s)) == {V.RETURN, V.variable_id(1)} | set(w)
    s = g.advance(s, V.RETURN)
    assert g.allowed(s) == (V.EOS,)


def test_assisted_masker_programs_always_execute_nonempty(world):
    v, store = world
    masker = AssistedMasker(store)
    question = v.tokenize("where is mary")
    for seed in range(6):
        m = model_for(v, seed=seed)
        hyps = beam_decode(m, question, [], 10, masker, max_len=10)
        assert hyps
        for hyp in hyps:
            program = parse_program(hyp.tokens)
            answers, state = execute(program, store)
            assert answers, f"assisted program failed: {hyp.tokens}"
            assert all(state.bindings)


def test_assisted_masker_offers_only_matchable_arguments(world):
    v, store = world
    a = AssistedMasker(store)
    s = a.advance(a.init(), V.PREF)
    first = set(a.allowed(s))
    assert first == {v.get(w) for w in ("mary", "john", "emily", "sheep")}
    s = a.advance(s, v.get("mary"))
    assert set(a.allowed(s)) == {v.get("went"), V.RETURN} | set(V.FUNCTION_TAGS)
    s = a.advance(s, v.get("went"))
    # Arity exhausted: only closures remain.
    assert set(a.allowed(s)) == {V.RETURN} | set(V.FUNCTION_TAGS)


def test_assisted_masker_tracks_variable_bindings(world):
    v, store = world
    a = AssistedMasker(store)
    s = a.init()
    for tok in [V.PREF, v.get("emily"), v.get("is"), V.PREF]:
        s = a.advance(s, tok)
    # V1 = {sheep}; sheep starts a stored n-gram so V1 is offered.
    assert V.variable_id(1) in a.allowed(s)
    s = a.advance(s, V.variable_id(1))
    assert v.get("afraid") in a.allowed(s)
    s = a.advance(s, v.get("afraid"))
    s = a.advance(s, V.RETURN)
    assert a.allowed(s) == (V.EOS,)
    assert dict(s.bindings[1]) == {v.get("cats"): 5}


def test_assisted_masker_on_empty_store(world):
    v, _ = world
    empty = build_store([], n=3)
    m = model_for(v)
    assert beam_decode(m, v.tokenize("where is mary"), [], 5,
                       AssistedMasker(empty), max_len=10) == []


def test_suffix_statements_masked_by_reverse_index(world):
    v, store = world
    a = AssistedMasker(store)
    s = a.advance(a.init(), V.SUFF)
    assert set(a.allowed(s)) == {v.get(w) for w in
                                 ("kitchen", "bedroom", "garden", "sheep", "cats")}
