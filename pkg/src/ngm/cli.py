"""Command-line entry point.

Verbs: generate, train, eval, answer, bench, inspect.  Every verb takes
--config FILE plus per-key flags (flags win over the file); reports go
to standard output as TSV unless out= names a file.  Exit code 0 on
success, 1 with a one-line diagnostic on any domain error.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import vocab as V
from .babi import TaskSpec, generate_task, parse_babi, to_examples, write_babi
from .bench import run_bench
from .checkpoint import model_from_text, model_to_text
from .config import (KEYS, RunConfig, format_run_config, load_config_file,
                     make_run_config)
from .errors import ConfigError, EmptyBeamError, NgmError
from .masks import FixedLengthWordMasker
from .program import reward_of
from .seq2seq import beam_decode_many, score_batch
from .store import build_store
from .training import (Models, TrainConfig, answer_question,
                       predict_answer_sets, train_staged)
from .vocab import Vocabulary

CKPT_FILES = ("encoder.ckpt", "decoder.ckpt", "programmer.ckpt")


def _echo(config: RunConfig) -> None:
    for line in format_run_config(config).splitlines():
        print(f"# {line}", file=sys.stderr)


def _emit(config: RunConfig, text: str) -> None:
    if config.out:
        with open(config.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _require(config: RunConfig, *keys: str) -> None:
    for key in keys:
        if not getattr(config, key):
            raise ConfigError(f"this command requires {key}=")


def _load_models(directory: str) -> tuple[Vocabulary, Models]:
    vocabulary = Vocabulary.load(os.path.join(directory, "vocab.txt"))
    parts = []
    for name in CKPT_FILES:
        with open(os.path.join(directory, name), encoding="utf-8") as fh:
            parts.append(model_from_text(fh.read()))
    return vocabulary, Models(vocabulary, *parts)


def _save_models(directory: str, models: Models) -> None:
    for name, model in zip(CKPT_FILES,
                           (models.encoder, models.decoder,
                            models.programmer)):
        path = os.path.join(directory, name)
        with open(path + ".tmp", "w", encoding="utf-8") as fh:
            fh.write(model_to_text(model))
        os.replace(path + ".tmp", path)


def _read_story_sentences(path: str) -> list[str]:
    """Sentence text from either numbered bAbI lines or plain lines."""
    sentences = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or "\t" in line:
                continue
            head, _, rest = line.partition(" ")
            sentences.append(rest if head.isdigit() else line)
    return sentences


def _encode_sentences(models: Models, sentences, config: TrainConfig,
                      width: int | None = None):
    """Greedy-or-beam encode raw sentences into per-sentence hypotheses."""
    vocabulary = models.vocabulary
    pieces = []
    previous: tuple[int, ...] = ()
    for sentence in sentences:
        tokens = tuple(vocabulary.tokenize(sentence, allow_unk=True))
        pieces.append((tokens, previous))
        previous = tokens
    masker = FixedLengthWordMasker(vocabulary.word_ids(), config.n)
    items = [(list(p), list(c), masker) for p, c in pieces]
    beams = beam_decode_many(models.encoder, items,
                             width or config.enc_beam)
    for i, beam in enumerate(beams):
        if not beam:
            raise EmptyBeamError(f"sentence {i + 1} produced no tuples")
    return pieces, beams


def _greedy_store(models: Models, sentences, config: TrainConfig):
    _, beams = _encode_sentences(models, sentences, config, width=1)
    return build_store([(tuple(beam[0].tokens), i + 1)
                        for i, beam in enumerate(beams)], n=config.n)


def run_generate(config: RunConfig) -> int:
    spec = TaskSpec(config.task, config.examples, config.story_length,
                    config.seed)
    _emit(config, write_babi(generate_task(spec)))
    return 0


def run_train(config: RunConfig) -> int:
    _require(config, "data", "out")
    with open(config.data, encoding="utf-8") as fh:
        stories = parse_babi(fh.read())
    os.makedirs(config.out, exist_ok=True)
    with open(os.path.join(config.out, "config.txt"), "w",
              encoding="utf-8") as fh:
        fh.write(format_run_config(config))
    train_config = config.train_config()
    metrics_path = os.path.join(config.out, "metrics.tsv")
    vocab_path = os.path.join(config.out, "vocab.txt")
    models = None
    start = None
    if config.resume:
        vocabulary, models = _load_models(config.out)
        with open(metrics_path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        if lines:
            stage, epoch = lines[-1].split("\t")[:2]
            start = (int(stage), int(epoch))
        examples = to_examples(stories, vocabulary)
        log = open(metrics_path, "a", encoding="utf-8")
    else:
        vocabulary = Vocabulary()
        examples = to_examples(stories, vocabulary)
        vocabulary.freeze()
        vocabulary.save(vocab_path)
        log = open(metrics_path, "w", encoding="utf-8")
    with log:
        def on_epoch(stage, epoch, epoch_models, line):
            log.write(line + "\n")
            log.flush()
            _save_models(config.out, epoch_models)
        result = train_staged(examples, vocabulary, train_config,
                              models=models, start=start, on_epoch=on_epoch)
    _save_models(config.out, result.models)
    print("final_val_acc\t%.6f" % result.val_accuracy)
    return 0


def run_eval(config: RunConfig) -> int:
    _require(config, "data", "checkpoint")
    vocabulary, models = _load_models(config.checkpoint)
    with open(config.data, encoding="utf-8") as fh:
        stories = parse_babi(fh.read())
    examples = to_examples(stories, vocabulary, allow_unk=True)
    train_config = config.train_config()
    answer_sets = predict_answer_sets(models, examples, train_config)
    strict = hits = 0
    f1_total = 0.0
    for ex, answers in zip(examples, answer_sets):
        strict += reward_of(answers, ex.answer)
        hits += 1 if ex.answer in answers else 0
        if answers:
            precision = (ex.answer in answers) / len(answers)
            recall = 1.0 if ex.answer in answers else 0.0
            if precision + recall > 0:
                f1_total += 2 * precision * recall / (precision + recall)
    n = len(examples)
    _emit(config, "task\tn\taccuracy\tstrict_acc\tset_f1\n"
          "%d\t%d\t%.6f\t%.6f\t%.6f\n"
          % (config.task, n, hits / n, strict / n, f1_total / n))
    return 0


def run_answer(config: RunConfig) -> int:
    _require(config, "checkpoint", "story", "question")
    vocabulary, models = _load_models(config.checkpoint)
    train_config = config.train_config()
    sentences = _read_story_sentences(config.story)
    store = _greedy_store(models, sentences, train_config)
    question = tuple(vocabulary.tokenize(config.question, allow_unk=True))
    if V.UNK in question:
        unknown = [w for w in config.question.lower().split()
                   if vocabulary.tokenize(w, allow_unk=True) == [V.UNK]]
        answers: set[int] = set()
        program_text = "question words outside vocabulary: " \
            + " ".join(unknown)
    else:
        answers, program_text = answer_question(models, store, question,
                                                train_config)
    words = sorted(vocabulary.lookup(a) for a in answers)
    _emit(config, "program\t%s\nanswers\t%s\n"
          % (program_text, " ".join(words) if words else "-"))
    return 0


def run_bench_cmd(config: RunConfig) -> int:
    answerer = None
    if config.checkpoint:
        vocabulary, models = _load_models(config.checkpoint)
        train_config = config.train_config()

        def answerer(store, probe_vocab, entity_word):
            question = tuple(vocabulary.tokenize(
                f"where is {entity_word}?", allow_unk=True))
            answers, _ = answer_question(models, store, question,
                                         train_config)
            return {probe_vocab.intern(vocabulary.lookup(a))
                    for a in answers}

    report = run_bench(config.lengths, probes=config.probes,
                       task=config.task, seed=config.seed,
                       answerer=answerer)
    _emit(config, report.to_tsv())
    return 0


def run_inspect(config: RunConfig) -> int:
    _require(config, "checkpoint", "story")
    vocabulary, models = _load_models(config.checkpoint)
    train_config = config.train_config()
    sentences = _read_story_sentences(config.story)
    pieces, beams = _encode_sentences(models, sentences, train_config)
    lines = ["sentence\trank\t" + "\t".join(f"g{i + 1}"
                                            for i in range(train_config.n))
             + "\tencoder_logp\treconstruction_ll"]
    for idx, ((piece, context), beam) in enumerate(zip(pieces, beams), 1):
        rows = [(list(h.tokens), list(context), list(piece) + [V.EOS], 0.0)
                for h in beam]
        recon, _ = score_batch(models.decoder, rows)
        for rank, (hyp, ll) in enumerate(zip(beam, recon), 1):
            words = "\t".join(vocabulary.lookup(t) for t in hyp.tokens)
            lines.append("%d\t%d\t%s\t%.6f\t%.6f"
                         % (idx, rank, words, hyp.log_prob, float(ll)))
    _emit(config, "\n".join(lines) + "\n")
    return 0


COMMANDS = {
    "generate": run_generate,
    "train": run_train,
    "eval": run_eval,
    "answer": run_answer,
    "bench": run_bench_cmd,
    "inspect": run_inspect,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ngm", description="n-gram machine: store, programs, training")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub = subparsers.add_parser(name)
        sub.add_argument("--config", default=None, metavar="FILE")
        for key in KEYS:
            sub.add_argument(f"--{key}", default=None, metavar="VALUE")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        file_pairs = (load_config_file(args.config) if args.config else {})
        flag_pairs = {key: getattr(args, key) for key in KEYS
                      if getattr(args, key) is not None}
        config = make_run_config(file_pairs, flag_pairs)
        _echo(config)
        return COMMANDS[args.command](config)
    except (NgmError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
