"""Training: stabilized auto-encoding, expected-reward QA with experience
replay, structure-tweak integration, and the three-stage schedule.

Update rules, with g a knowledge tuple, t/c a text piece and its context,
q/a a question-answer pair, p a program, and R the 0/1 answer reward:

  decoder     weight (beta(g) + P(g|t,c)) on grad log P(t|g,c), where
              beta(g) = 1 iff g uses only words of t; candidates are the
              encoder beam plus a sample of Z^N(t), the tuples built from
              t's own words.
  encoder     weight P(g|t,c) * log P(t|g,c)   (reconstruction reward)
              + total weighted QA reward of sampled stores that chose g
              + total weighted QA reward of tweaked stores containing g
              on grad log P(g|t,c).
  programmer  weight (alpha * I[p is the replayed program] * R
              + P(p|q) * (R - baseline)) * w(store)
              on grad log P(p|q).

The replayed program per question is the one with the highest recorded
w(store) * R so far.  Probabilities in weights are renormalized over the
candidate sets by default; `normalize_weights=False` restores the raw
rules, and `use_baseline=False` / `ae_baseline=False` drop the variance
baselines.  With `debug_terms=True` every update also reports its
per-term gradient decomposition, which sums to the applied gradient.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import vocab as V
from .babi import Example
from .errors import (ConfigError, EmptyBeamError, EmptyDatasetError,
                     MalformedProgramError)
from .masks import AssistedMasker, FixedLengthWordMasker, GrammarMasker
from .optim import OptimizerState, init_optimizer, optimizer_step
from .program import (MAX_STATEMENTS, Program, execute, grounded_args,
                      parse_program, reward_of, serialize_program)
from .seq2seq import (ModelDims, Seq2SeqModel, beam_decode, beam_decode_many,
                      compute_gradients, init_model, score_batch)
from .store import KnowledgeStore, TimedNgram, build_store, propose_tweaks
from .vocab import Vocabulary


@dataclass(frozen=True)
class TrainConfig:
    n: int = 3
    enc_beam: int = 2
    store_samples: int = 5
    prog_beam: int = 30
    stage_epochs: tuple[int, int, int] = (1000, 1000, 1000)
    alpha: float = 0.1
    lr: float = 1e-2
    clip_norm: float = 5.0
    embed_dim: int = 8
    hidden_dim: int = 8
    seed: int = 0
    zn_samples: int = 8
    zn_cap: int = 512
    normalize_weights: bool = True
    use_baseline: bool = True
    ae_baseline: bool = True
    use_ae: bool = True
    use_tweaks: bool = True
    max_tweaks_per_piece: int = 4
    max_tweak_stores: int = 8
    val_fraction: float = 0.1
    early_stop: float = 0.0  # >0: end a QA stage once val_acc holds this level
    patience: int = 3
    reset_moments_between_stages: bool = False
    debug_terms: bool = False

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError("n must be at least 2")
        if min(self.enc_beam, self.store_samples, self.prog_beam) < 1:
            raise ConfigError("beam and sample sizes must be at least 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha must lie in [0, 1]")
        if len(self.stage_epochs) != 3 or min(self.stage_epochs) < 0:
            raise ConfigError("stage_epochs must be three counts >= 0")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ConfigError("val_fraction must lie in [0, 1)")


@dataclass
class Models:
    vocabulary: Vocabulary
    encoder: Seq2SeqModel
    decoder: Seq2SeqModel
    programmer: Seq2SeqModel


@dataclass
class Optimizers:
    encoder: OptimizerState
    decoder: OptimizerState
    programmer: OptimizerState


@dataclass
class ReplayBuffers:
    # question id -> (program tokens, recorded weighted reward)
    programs: dict[int, tuple[tuple[int, ...], float]] = field(default_factory=dict)
    # (story id, piece index) -> tweaked tuples, insertion-ordered
    tweaks: dict[tuple[int, int], list[tuple[int, ...]]] = field(default_factory=dict)

    def record_program(self, qid: int, tokens: tuple[int, ...],
                       weighted_reward: float) -> bool:
        held = self.programs.get(qid)
        if held is None or weighted_reward > held[1]:
            self.programs[qid] = (tokens, weighted_reward)
            return True
        return False

    def add_tweak(self, key: tuple[int, int], symbols: tuple[int, ...],
                  cap: int) -> bool:
        slot = self.tweaks.setdefault(key, [])
        if symbols in slot:
            return False
        slot.append(symbols)
        if len(slot) > cap:
            slot.pop(0)
        return True


def data_lengths(examples) -> tuple[int, int]:
    piece = max((len(t) for e in examples for t, _ in e.pieces), default=1)
    question = max((len(e.question) for e in examples), default=1)
    return piece, question


def build_models(vocabulary: Vocabulary, config: TrainConfig,
                 max_piece_len: int, max_question_len: int) -> Models:
    size = len(vocabulary)
    common = dict(embed_dim=config.embed_dim, hidden_dim=config.hidden_dim)
    enc = ModelDims(size, max_source_len=2 * max_piece_len,
                    max_target_len=config.n, **common)
    dec = ModelDims(size, max_source_len=max_piece_len + config.n,
                    max_target_len=max_piece_len, **common)
    prog = ModelDims(size, max_source_len=max_question_len,
                     max_target_len=MAX_STATEMENTS * config.n + 1, **common)
    return Models(vocabulary,
                  init_model(enc, config.seed * 8 + 0),
                  init_model(dec, config.seed * 8 + 1),
                  init_model(prog, config.seed * 8 + 2))


def init_optimizers(models: Models, config: TrainConfig) -> Optimizers:
    return Optimizers(
        init_optimizer(models.encoder, config.lr, config.clip_norm),
        init_optimizer(models.decoder, config.lr, config.clip_norm),
        init_optimizer(models.programmer, config.lr, config.clip_norm))


def encode_story(models: Models, example: Example, config: TrainConfig,
                 width: int | None = None):
    """Per-piece beams of candidate knowledge tuples (n words each)."""
    words = models.vocabulary.word_ids()
    items = [(piece, ctx, FixedLengthWordMasker(words, config.n))
             for piece, ctx in example.pieces]
    beams = beam_decode_many(models.encoder, items, width or config.enc_beam)
    for i, beam in enumerate(beams):
        if not beam:
            raise EmptyBeamError(f"no tuple hypotheses for piece {i}")
    return beams


def enumerate_zn(piece, n: int, cap: int = 512, rng=None) -> list[tuple[int, ...]]:
    """All n-grams over the piece's distinct words; sampled past `cap`."""
    words = sorted(set(piece))
    if not words:
        return []
    total = len(words) ** n
    if total <= cap:
        return list(itertools.product(words, repeat=n))
    if rng is None:
        raise ConfigError(f"|Z^N| = {total} exceeds cap {cap} and no rng given")
    seen: dict[tuple[int, ...], None] = {}
    for flat in rng.integers(total, size=cap):
        digits = []
        for _ in range(n):
            flat, r = divmod(int(flat), len(words))
            digits.append(words[r])
        seen[tuple(digits)] = None
    return list(seen)


def sample_stores(beams, config: TrainConfig, rng):
    """Distinct stores sampled piecewise from the beams.

    Per piece the tuple is drawn from the beam's renormalized
    probabilities; a store's logProb is the raw sum of its chosen-tuple
    scores (the factorized story-to-store score).  Returns (store,
    logProb, per-piece choice) triples.
    """
    probs = []
    for beam in beams:
        if not beam:
            raise EmptyBeamError("cannot sample from an empty beam")
        p = np.exp([h.log_prob - beam[0].log_prob for h in beam])
        probs.append(p / p.sum())
    out, seen = [], set()
    for _ in range(config.store_samples):
        choice = tuple(int(rng.choice(len(p), p=p)) for p in probs)
        if choice in seen:
            continue
        seen.add(choice)
        logp = float(sum(beams[i][k].log_prob for i, k in enumerate(choice)))
        ngrams = [TimedNgram(tuple(beams[i][k].tokens), i + 1)
                  for i, k in enumerate(choice)]
        out.append((build_store(ngrams, n=config.n), logp, choice))
    return out


def _normalized(raw: np.ndarray, normalize: bool) -> np.ndarray:
    raw = np.asarray(raw, dtype=float)
    if not normalize or len(raw) == 0:
        return raw
    total = raw.sum()
    if total <= 0.0:
        return np.full(len(raw), 1.0 / len(raw))
    return raw / total


def _reweighted(rows, weights):
    return [(s, c, t, w) for (s, c, t, _), w in zip(rows, weights)]


@dataclass
class AeStats:
    reconstruction_ll: float
    terms: dict | None = None


def ae_update(models: Models, optimizers: Optimizers, example: Example,
              config: TrainConfig, rng, beams=None) -> AeStats:
    """Stabilized auto-encoding step: one Adam step each for the decoder
    (weights beta + P) and the encoder (REINFORCE, reconstruction reward)."""
    if beams is None:
        beams = encode_story(models, example, config)
    spans, cands_all, total = [], [], 0
    for (piece, _), beam in zip(example.pieces, beams):
        cands: list[tuple[int, ...]] = []
        for h in beam:
            if tuple(h.tokens) not in cands:
                cands.append(tuple(h.tokens))
        zn = enumerate_zn(piece, config.n, config.zn_cap, rng)
        if len(zn) > config.zn_samples:
            pick = rng.choice(len(zn), size=config.zn_samples, replace=False)
            zn = [zn[j] for j in sorted(pick)]
        for z in zn:
            if z not in cands:
                cands.append(z)
        spans.append((total, total + len(cands)))
        total += len(cands)
        cands_all.append(cands)
    if total == 0:
        return AeStats(0.0, {} if config.debug_terms else None)

    score_rows = [(piece, ctx, list(g) + [V.EOS], 0.0)
                  for (piece, ctx), cands in zip(example.pieces, cands_all)
                  for g in cands]
    enc_logps, _ = score_batch(models.encoder, score_rows)

    dec_rows, betas, pgs = [], [], []
    for (piece, ctx), (lo, hi), cands in zip(example.pieces, spans, cands_all):
        source_words = set(piece)
        pg = _normalized(np.exp(enc_logps[lo:hi]), config.normalize_weights)
        for g, p in zip(cands, pg):
            beta = 1.0 if set(g) <= source_words else 0.0
            dec_rows.append((list(g), ctx, list(piece) + [V.EOS], beta + p))
            betas.append(beta)
            pgs.append(float(p))
    dec_grads, dec_logps = compute_gradients(models.decoder, dec_rows)

    enc_grad_rows, top_ll = [], []
    for (lo, hi) in spans:
        r = dec_logps[lo:hi]
        base = r.mean() if config.ae_baseline else 0.0
        for j in range(lo, hi):
            enc_grad_rows.append((score_rows[j][0], score_rows[j][1],
                                  score_rows[j][2], pgs[j] * (r[j - lo] - base)))
        top_ll.append(r[0])  # first candidate is the top beam tuple
    enc_grads, _ = compute_gradients(models.encoder, enc_grad_rows)

    terms = None
    if config.debug_terms:
        fixed, _ = compute_gradients(models.decoder, _reweighted(dec_rows, betas))
        weighted, _ = compute_gradients(models.decoder, _reweighted(dec_rows, pgs))
        terms = {"decoder": {"fixed_set": fixed, "model_weighted": weighted,
                             "total": dec_grads},
                 "encoder": {"reconstruction": enc_grads, "total": enc_grads}}

    optimizer_step(optimizers.decoder, models.decoder, dec_grads)
    optimizer_step(optimizers.encoder, models.encoder, enc_grads)
    return AeStats(float(np.mean(top_ll)), terms)


@dataclass
class QaStats:
    expected_reward: float
    best_reward: int
    buffer_updated: bool
    terms: dict | None = None


def _decode_programs(models, question, stores, width):
    items = [(question, (), AssistedMasker(store)) for store in stores]
    return beam_decode_many(models.programmer, items, width)


def _candidate_programs(models, question, store_beams, buffered):
    """Per store: {program tokens: raw log prob}.  The replayed program is
    scored teacher-forced (masking shapes the search, not the score)."""
    buffered_logp = None
    if buffered is not None:
        logps, _ = score_batch(models.programmer,
                               [(question, (), list(buffered) + [V.EOS], 0.0)])
        buffered_logp = float(logps[0])
    out = []
    for beam in store_beams:
        per: dict[tuple[int, ...], float] = {}
        for h in beam:
            per.setdefault(tuple(h.tokens), h.log_prob)
        if buffered is not None and buffered not in per:
            per[buffered] = buffered_logp
        out.append(per)
    return out


def _execute_all(cands, stores, parsed, n, answer):
    """Rewards per store: {program tokens: 0/1}."""
    rewards = []
    for per, store in zip(cands, stores):
        r: dict[tuple[int, ...], int] = {}
        for tokens in per:
            if tokens not in parsed:
                try:
                    parsed[tokens] = parse_program(tokens, n)
                except MalformedProgramError:
                    parsed[tokens] = None
            program = parsed[tokens]
            if program is None:
                r[tokens] = 0
            else:
                answers, _ = execute(program, store)
                r[tokens] = reward_of(answers, answer)
        rewards.append(r)
    return rewards


def _tweak_stores(models, buffers, example, config, beams):
    """Tweaked stores: the greedy store with one piece's tuple replaced by
    a buffered tweak.  Returns (piece index, tuple, store, weight) rows;
    weights renormalize the tweak against its piece's beam."""
    picks = []
    for i in range(len(example.pieces)):
        for g in buffers.tweaks.get((example.story_id, i), []):
            picks.append((i, g))
            if len(picks) == config.max_tweak_stores:
                break
        if len(picks) == config.max_tweak_stores:
            break
    if not picks:
        return []
    score_rows = [(example.pieces[i][0], example.pieces[i][1],
                   list(g) + [V.EOS], 0.0) for i, g in picks]
    logps, _ = score_batch(models.encoder, score_rows)
    greedy = [beams[i][0] for i in range(len(beams))]
    out = []
    for (i, g), lp in zip(picks, logps):
        ngrams = [TimedNgram(g if j == i else tuple(greedy[j].tokens), j + 1)
                  for j in range(len(greedy))]
        store = build_store(ngrams, n=config.n)
        if config.normalize_weights:
            weight = 1.0
            for j, beam in enumerate(beams):
                denom = sum(np.exp(h.log_prob) for h in beam)
                if j == i:
                    num = np.exp(lp)
                    weight *= num / (num + denom)
                else:
                    weight *= np.exp(greedy[j].log_prob) / denom
        else:
            weight = np.exp(lp + sum(h.log_prob for j, h in enumerate(greedy)
                                     if j != i))
        out.append((i, g, store, float(weight)))
    return out


def qa_update(models: Models, optimizers: Optimizers, buffers: ReplayBuffers,
              example: Example, config: TrainConfig, rng, beams=None,
              stores=None, train_encoder: bool = True) -> QaStats:
    """Expected-reward step over sampled stores: one Adam step for the
    programmer and (unless stores are injected) one for the encoder."""
    question = list(example.question)
    if stores is None:
        if beams is None:
            beams = encode_story(models, example, config)
        sampled = sample_stores(beams, config, rng)
    else:
        sampled = [(s, 0.0, None) for s in stores]
        train_encoder = False
    wg = _normalized(np.exp([lp for _, lp, _ in sampled]),
                     config.normalize_weights)

    store_beams = _decode_programs(models, question,
                                   [s for s, _, _ in sampled], config.prog_beam)
    held = buffers.programs.get(example.story_id)
    buffered = held[0] if held else None
    cands = _candidate_programs(models, question, store_beams, buffered)
    parsed: dict[tuple[int, ...], Program | None] = {}
    rewards = _execute_all(cands, [s for s, _, _ in sampled], parsed,
                           config.n, example.answer)

    all_r = [r for per in rewards for r in per.values()]
    base = float(np.mean(all_r)) if (config.use_baseline and all_r) else 0.0

    # programmer weights, aggregated per distinct program
    replay_w: dict[tuple[int, ...], float] = {}
    score_w: dict[tuple[int, ...], float] = {}
    expected = 0.0
    store_value = []  # per store: sum_p w_p * (R - base)
    for k, (per, r_k) in enumerate(zip(cands, rewards)):
        tokens_list = list(per)
        wp = _normalized(np.exp([per[t] for t in tokens_list]),
                         config.normalize_weights)
        value = 0.0
        for tokens, w in zip(tokens_list, wp):
            r = r_k[tokens]
            expected += float(wg[k]) * float(w) * r
            value += float(w) * (r - base)
            score_w[tokens] = score_w.get(tokens, 0.0) \
                + float(w) * float(wg[k]) * (r - base)
            if tokens == buffered:
                replay_w[tokens] = replay_w.get(tokens, 0.0) \
                    + config.alpha * float(wg[k]) * r
        store_value.append(value)

    prog_rows, prog_replay, prog_score = [], [], []
    for tokens in score_w:
        prog_rows.append((question, (), list(tokens) + [V.EOS],
                          score_w[tokens] + replay_w.get(tokens, 0.0)))
        prog_score.append(score_w[tokens])
        prog_replay.append(replay_w.get(tokens, 0.0))
    prog_grads, _ = compute_gradients(models.programmer, prog_rows)

    # encoder: sampled-store reward credit plus tweaked-store credit
    enc_grads = None
    enc_rows, enc_sampled_w, enc_tweak_w = [], [], []
    if train_encoder:
        for i, (piece, ctx) in enumerate(example.pieces):
            credit: dict[int, float] = {}
            for k, (_, _, choice) in enumerate(sampled):
                credit[choice[i]] = credit.get(choice[i], 0.0) \
                    + float(wg[k]) * store_value[k]
            for hyp_index, w in credit.items():
                g = beams[i][hyp_index].tokens
                enc_rows.append((piece, ctx, list(g) + [V.EOS], w))
                enc_sampled_w.append(w)
                enc_tweak_w.append(0.0)
        for i, g, store, weight in _tweak_stores(models, buffers, example,
                                                 config, beams):
            tb = _decode_programs(models, question, [store], config.prog_beam)
            tc = _candidate_programs(models, question, tb, buffered)
            tr = _execute_all(tc, [store], parsed, config.n, example.answer)
            tokens_list = list(tc[0])
            wp = _normalized(np.exp([tc[0][t] for t in tokens_list]),
                             config.normalize_weights)
            value = sum(float(w) * (tr[0][t] - base)
                        for t, w in zip(tokens_list, wp))
            piece, ctx = example.pieces[i]
            enc_rows.append((piece, ctx, list(g) + [V.EOS], weight * value))
            enc_sampled_w.append(0.0)
            enc_tweak_w.append(weight * value)
        enc_grads, _ = compute_gradients(models.encoder, enc_rows)

    terms = None
    if config.debug_terms:
        replay_g, _ = compute_gradients(models.programmer,
                                        _reweighted(prog_rows, prog_replay))
        score_g, _ = compute_gradients(models.programmer,
                                       _reweighted(prog_rows, prog_score))
        terms = {"programmer": {"replay": replay_g, "reinforce": score_g,
                                "total": prog_grads}}
        if train_encoder:
            sg, _ = compute_gradients(models.encoder,
                                      _reweighted(enc_rows, enc_sampled_w))
            tg, _ = compute_gradients(models.encoder,
                                      _reweighted(enc_rows, enc_tweak_w))
            terms["encoder"] = {"sampled_stores": sg, "tweaked_stores": tg,
                                "total": enc_grads}

    # replay buffer: keep the argmax of the recorded weighted reward
    updated = False
    for k, r_k in enumerate(rewards):
        for tokens, r in r_k.items():
            if r and buffers.record_program(example.story_id, tokens,
                                            float(wg[k]) * r):
                updated = True

    optimizer_step(optimizers.programmer, models.programmer, prog_grads)
    if enc_grads is not None:
        optimizer_step(optimizers.encoder, models.encoder, enc_grads)
    best = max(all_r) if all_r else 0
    return QaStats(expected, best, updated, terms)


def tweak_update(models: Models, buffers: ReplayBuffers, example: Example,
                 config: TrainConfig, beams=None) -> int:
    """Uninformed (grammar-only) program search against the greedy store;
    failing statements propose tweaked tuples into the encoder's buffer.
    Consumes no randomness.  Returns the number of tuples added."""
    if beams is None:
        beams = encode_story(models, example, config)
    greedy = build_store([TimedNgram(tuple(beam[0].tokens), i + 1)
                          for i, beam in enumerate(beams)], n=config.n)
    masker = GrammarMasker(models.vocabulary.word_ids(), config.n)
    hyps = beam_decode(models.programmer, list(example.question), (),
                       config.prog_beam, masker)
    added = 0
    for hyp in hyps:
        program = parse_program(hyp.tokens, config.n)
        _, state = execute(program, greedy)
        for si, stmt in enumerate(program.statements):
            if state.bindings[si]:
                continue
            for args in grounded_args(stmt, state.bindings):
                for tweaked in propose_tweaks(stmt.function, args, greedy):
                    key = (example.story_id, tweaked.timestamp - 1)
                    if buffers.add_tweak(key, tuple(tweaked.symbols),
                                         config.max_tweaks_per_piece):
                        added += 1
    return added


def predict_answer_sets(models: Models, examples,
                        config: TrainConfig) -> list[set[int]]:
    """Greedy encode + greedy store-assisted program, one set per example."""
    if not examples:
        raise EmptyDatasetError("cannot evaluate zero examples")
    words = models.vocabulary.word_ids()
    enc_items = [(piece, ctx, FixedLengthWordMasker(words, config.n))
                 for ex in examples for piece, ctx in ex.pieces]
    enc_beams = beam_decode_many(models.encoder, enc_items, 1)
    stores, pos = [], 0
    for ex in examples:
        k = len(ex.pieces)
        ngrams = [TimedNgram(tuple(beam[0].tokens), i + 1)
                  for i, beam in enumerate(enc_beams[pos:pos + k]) if beam]
        stores.append(build_store(ngrams, n=config.n))
        pos += k
    prog_items = [(list(ex.question), (), AssistedMasker(store))
                  for ex, store in zip(examples, stores)]
    prog_beams = beam_decode_many(models.programmer, prog_items, 1)
    answer_sets: list[set[int]] = []
    for store, beam in zip(stores, prog_beams):
        answers: set[int] = set()
        if beam:
            try:
                answers, _ = execute(parse_program(beam[0].tokens, config.n),
                                     store)
            except MalformedProgramError:
                answers = set()
        answer_sets.append(answers)
    return answer_sets


def evaluate_accuracy(models: Models, examples, config: TrainConfig) -> float:
    """Strict answer match rate under greedy prediction."""
    answer_sets = predict_answer_sets(models, examples, config)
    correct = sum(reward_of(answers, ex.answer)
                  for ex, answers in zip(examples, answer_sets))
    return correct / len(examples)


def answer_question(models: Models, store: KnowledgeStore, question,
                    config: TrainConfig) -> tuple[set[int], str]:
    """Greedy store-assisted decode against a prebuilt store.  Returns the
    answer symbols and the program text (or a diagnostic)."""
    hyps = beam_decode(models.programmer, list(question), (), 1,
                       AssistedMasker(store))
    if not hyps:
        return set(), "no program found"
    try:
        program = parse_program(hyps[0].tokens, config.n)
    except MalformedProgramError as err:
        return set(), f"malformed program: {err}"
    answers, _ = execute(program, store)
    return answers, serialize_program(program, models.vocabulary)


@dataclass
class TrainResult:
    models: Models
    metrics: list[str]
    buffers: ReplayBuffers
    val_accuracy: float


def train_staged(examples, vocabulary: Vocabulary, config: TrainConfig,
                 models: Models | None = None,
                 start: tuple[int, int] | None = None,
                 on_epoch=None) -> TrainResult:
    """Three stages: auto-encoding only, plus QA reward, plus tweaking.

    One metrics line per epoch: "stage<TAB>epoch<TAB>ae_ll<TAB>
    mean_reward<TAB>val_acc".  Fully deterministic under a fixed config.

    Each epoch draws from its own generator seeded by the cumulative
    epoch index, so resuming after the last completed (stage, epoch) in
    `start` replays the exact remaining schedule.  `on_epoch(stage,
    epoch, models, line)` runs after every completed epoch.
    """
    if not examples:
        raise EmptyDatasetError("no training examples")
    split_rng = np.random.default_rng([config.seed, 101])
    order = split_rng.permutation(len(examples))
    n_val = int(len(examples) * config.val_fraction)
    val = [examples[i] for i in order[:n_val]]
    train = [examples[i] for i in order[n_val:]]
    if not train:
        raise ConfigError("validation split leaves no training examples")
    if models is None:
        models = build_models(vocabulary, config, *data_lengths(examples))
    optimizers = init_optimizers(models, config)
    buffers = ReplayBuffers()
    metrics: list[str] = []
    val_acc = 0.0
    global_epoch = 0
    for stage in (1, 2, 3):
        if config.reset_moments_between_stages and stage > 1:
            optimizers = init_optimizers(models, config)
        streak = 0
        for epoch in range(1, config.stage_epochs[stage - 1] + 1):
            global_epoch += 1
            if start is not None and (stage, epoch) <= start:
                continue
            rng = np.random.default_rng([config.seed, 103, global_epoch])
            perm = rng.permutation(len(train))
            ae_lls, rewards = [], []
            for pi in perm:
                ex = train[pi]
                if config.use_ae:
                    ae = ae_update(models, optimizers, ex, config, rng)
                    ae_lls.append(ae.reconstruction_ll)
                if stage >= 2:
                    beams = encode_story(models, ex, config)
                    if stage == 3 and config.use_tweaks:
                        tweak_update(models, buffers, ex, config, beams)
                    qa = qa_update(models, optimizers, buffers, ex, config,
                                   rng, beams=beams)
                    rewards.append(qa.expected_reward)
            val_acc = evaluate_accuracy(models, val, config) if val else 0.0
            line = ("%d\t%d\t%.6f\t%.6f\t%.6f"
                    % (stage, epoch,
                       float(np.mean(ae_lls)) if ae_lls else 0.0,
                       float(np.mean(rewards)) if rewards else 0.0,
                       val_acc))
            metrics.append(line)
            if on_epoch is not None:
                on_epoch(stage, epoch, models, line)
            if config.early_stop > 0.0 and stage >= 2:
                streak = streak + 1 if val_acc >= config.early_stop else 0
                if streak >= config.patience:
                    break
    return TrainResult(models, metrics, buffers, val_acc)
