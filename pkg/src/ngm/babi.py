"""Synthetic story-QA generators (tasks 1, 2, 11, 15, 16) and text I/O.

Stories come out in the standard numbered-line format:

    1 Mary went to the kitchen.
    2 Where is Mary?<TAB>kitchen<TAB>1

Every answer is a word of an earlier sentence, and every question is
answerable by a rule tracker over the sentences alone.  Tasks 1/2/11 run
on a streaming simulator whose state is O(actors + objects), so the same
code generates fixed-length stories and arbitrarily long single-story
streams with interleaved probe questions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .errors import EmptyDatasetError, FormatError, UnsupportedTaskError
from .vocab import Vocabulary

ACTORS = ("daniel", "john", "mary", "sandra")
PRONOUN = {"daniel": "he", "john": "he", "mary": "she", "sandra": "she"}
LOCATIONS = ("bathroom", "bedroom", "garden", "hallway", "kitchen", "office")
MOVE_VERBS = ("went to", "moved to", "journeyed to", "travelled to")
BACK_VERB = "went back to"
OBJECTS = ("apple", "football", "milk")
GET_VERBS = ("got", "grabbed", "picked up", "took")
DROP_VERBS = ("dropped", "discarded", "left")

# (plural, singular); "sheep" is its own plural on purpose.
ANIMAL_TYPES = (("cats", "cat"), ("mice", "mouse"),
                ("sheep", "sheep"), ("wolves", "wolf"))
ANIMAL_NAMES = ("emily", "gertrude", "jessica", "winona")

SPECIES = ("frog", "lion", "rhino", "swan")
SPECIES_NAMES = ("bernhard", "brian", "greg", "julius", "lily")
COLORS = ("gray", "green", "white", "yellow")

SUPPORTED_TASKS = (1, 2, 11, 15, 16)
LIFELONG_TASKS = (1, 2, 11)


@dataclass(frozen=True)
class TaskSpec:
    task_id: int
    num_examples: int
    story_length: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.task_id not in SUPPORTED_TASKS:
            raise UnsupportedTaskError(f"task {self.task_id} not in {SUPPORTED_TASKS}")
        if self.task_id in LIFELONG_TASKS and self.story_length < 2:
            raise UnsupportedTaskError("story_length must be >= 2")


@dataclass(frozen=True)
class Story:
    sentences: tuple[str, ...]
    question: str
    answer: str
    support: tuple[int, ...]  # 1-based sentence numbers


@dataclass(frozen=True)
class Example:
    story_id: int
    pieces: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]  # (tokens, context)
    question: tuple[int, ...]
    answer: int


def _pick(rng, items):
    return items[int(rng.integers(len(items)))]


class _MoveSim:
    """Tasks 1 and 11: actors moving among locations."""

    def __init__(self, coref: bool):
        self.coref = coref
        self.loc: dict[str, str] = {}
        self.last_line: dict[str, int] = {}
        self.n = 0
        self._pending: str | None = None  # actor owed a follow-up sentence

    def step(self, rng) -> str:
        self.n += 1
        if self._pending is not None:
            actor = self._pending
            self._pending = None
            verb = _pick(rng, MOVE_VERBS + (BACK_VERB,))
            loc = _pick(rng, LOCATIONS)
            self.loc[actor] = loc
            self.last_line[actor] = self.n
            return f"After that {PRONOUN[actor]} {verb} the {loc}."
        actor = _pick(rng, ACTORS)
        verbs = MOVE_VERBS + (BACK_VERB,) if actor in self.loc else MOVE_VERBS
        verb = _pick(rng, verbs)
        loc = _pick(rng, LOCATIONS)
        self.loc[actor] = loc
        self.last_line[actor] = self.n
        if self.coref:
            self._pending = actor
        return f"{actor.capitalize()} {verb} the {loc}."

    def question(self, rng) -> tuple[str, str, tuple[int, ...]]:
        actor = _pick(rng, sorted(self.loc))
        return (f"Where is {actor.capitalize()}?", self.loc[actor],
                (self.last_line[actor],))


class _ObjectSim(_MoveSim):
    """Task 2: adds objects that actors carry and drop."""

    def __init__(self, rates=(0.6, 0.25, 0.15)):
        super().__init__(coref=False)
        self.rates = rates
        self.holder: dict[str, str] = {}
        self.site: dict[str, str] = {}
        self.event_line: dict[str, int] = {}
        self.site_line: dict[str, int] = {}
        self._steps_left = 0

    def _determinate(self) -> list[str]:
        objs = [o for o, a in self.holder.items() if a in self.loc]
        objs += list(self.site)
        return sorted(objs)

    def step(self, rng) -> str:
        self.n += 1
        free = sorted(set(OBJECTS) - set(self.holder))
        held = sorted(self.holder)
        can_get = bool(self.loc) and bool(free)
        can_drop = bool(held)
        # Keep the story answerable: with few steps left and nothing to
        # ask about, force a move (if needed) and then a pickup.
        forced = None
        if not self._determinate():
            if not self.loc:
                forced = "move"
            elif self._steps_left <= 1 and can_get:
                forced = "get"
        weights = np.array([self.rates[0],
                            self.rates[1] if can_get else 0.0,
                            self.rates[2] if can_drop else 0.0])
        event = forced or ("move", "get", "drop")[
            int(rng.choice(3, p=weights / weights.sum()))]
        self._steps_left -= 1
        if event == "move":
            self.n -= 1
            return super().step(rng)
        if event == "get":
            actor = _pick(rng, sorted(self.loc))
            obj = _pick(rng, free)
            self.holder[obj] = actor
            self.site.pop(obj, None)
            self.event_line[obj] = self.n
            return f"{actor.capitalize()} {_pick(rng, GET_VERBS)} the {obj}."
        obj = _pick(rng, held)
        actor = self.holder.pop(obj)
        self.site[obj] = self.loc[actor]
        self.site_line[obj] = self.last_line[actor]
        self.event_line[obj] = self.n
        return f"{actor.capitalize()} {_pick(rng, DROP_VERBS)} the {obj}."

    def question(self, rng) -> tuple[str, str, tuple[int, ...]]:
        obj = _pick(rng, self._determinate())
        if obj in self.holder:
            actor = self.holder[obj]
            answer = self.loc[actor]
            support = (self.event_line[obj], self.last_line[actor])
        else:
            answer = self.site[obj]
            support = (self.event_line[obj], self.site_line[obj])
        return f"Where is the {obj}?", answer, tuple(sorted(set(support)))


def _simulator(task_id: int):
    if task_id == 1:
        return _MoveSim(coref=False)
    if task_id == 11:
        return _MoveSim(coref=True)
    return _ObjectSim()


def _movement_story(task_id: int, story_length: int, rng) -> Story:
    sim = _simulator(task_id)
    if isinstance(sim, _ObjectSim):
        sim._steps_left = story_length
    sentences = tuple(sim.step(rng) for _ in range(story_length))
    question, answer, support = sim.question(rng)
    return Story(sentences, question, answer, support)


def _deduction_story(rng) -> Story:
    feared = {}
    for i, (plural, _) in enumerate(ANIMAL_TYPES):
        others = [p for j, (p, _) in enumerate(ANIMAL_TYPES) if j != i]
        feared[plural] = _pick(rng, others)
    name_type = {name: _pick(rng, ANIMAL_TYPES) for name in ANIMAL_NAMES}
    lines = [(f"{pl.capitalize()} are afraid of {feared[pl]}.", ("afraid", pl))
             for pl, _ in ANIMAL_TYPES]
    lines += [(f"{n.capitalize()} is a {sg}.", ("is", n))
              for n, (_, sg) in name_type.items()]
    order = [int(i) for i in rng.permutation(len(lines))]
    sentences = tuple(lines[i][0] for i in order)
    tags = {lines[i][1]: pos + 1 for pos, i in enumerate(order)}
    name = _pick(rng, ANIMAL_NAMES)
    plural = name_type[name][0]
    support = tuple(sorted((tags[("is", name)], tags[("afraid", plural)])))
    return Story(sentences, f"What is {name.capitalize()} afraid of?",
                 feared[plural], support)


def _induction_story(rng) -> Story:
    names = [SPECIES_NAMES[int(i)] for i in rng.permutation(len(SPECIES_NAMES))]
    kinds = [SPECIES[int(i)] for i in rng.permutation(len(SPECIES))][:3]
    colors = [COLORS[int(i)] for i in rng.permutation(len(COLORS))][:3]
    queried, sibling, pair_a, pair_b, lone = names
    kind_of = {queried: kinds[0], sibling: kinds[0],
               pair_a: kinds[1], pair_b: kinds[1], lone: kinds[2]}
    color_of_kind = dict(zip(kinds, colors))
    lines = [(f"{n.capitalize()} is a {kind_of[n]}.", ("a", n)) for n in names]
    lines += [(f"{n.capitalize()} is {color_of_kind[kind_of[n]]}.", ("color", n))
              for n in names if n != queried]
    order = [int(i) for i in rng.permutation(len(lines))]
    sentences = tuple(lines[i][0] for i in order)
    tags = {lines[i][1]: pos + 1 for pos, i in enumerate(order)}
    support = tuple(sorted((tags[("a", queried)], tags[("a", sibling)],
                            tags[("color", sibling)])))
    return Story(sentences, f"What color is {queried.capitalize()}?",
                 color_of_kind[kinds[0]], support)


def _story_rng(spec: TaskSpec, index: int):
    return np.random.default_rng([spec.seed, spec.task_id, index])


def generate_task(spec: TaskSpec) -> list[Story]:
    out = []
    for i in range(spec.num_examples):
        rng = _story_rng(spec, i)
        if spec.task_id in LIFELONG_TASKS:
            out.append(_movement_story(spec.task_id, spec.story_length, rng))
        elif spec.task_id == 15:
            out.append(_deduction_story(rng))
        else:
            out.append(_induction_story(rng))
    return out


def generate_lifelong(spec: TaskSpec, probe_interval: int = 0,
                      final_probes: int = 1) -> Iterator[str]:
    """One unbroken story as a line stream with interleaved probe questions.

    Yields formatted lines; a probe question follows every
    `probe_interval` sentences (0 disables interior probes) and
    `final_probes` close the stream.  State stays O(actors + objects).
    """
    if spec.task_id not in LIFELONG_TASKS:
        raise UnsupportedTaskError(f"task {spec.task_id} has no life-long variant")
    rng = _story_rng(spec, 0)
    sim = _simulator(spec.task_id)
    if isinstance(sim, _ObjectSim):
        sim._steps_left = spec.story_length
    line_no = 0
    for i in range(spec.story_length):
        line_no += 1
        yield f"{line_no} {sim.step(rng)}"
        if probe_interval and (i + 1) % probe_interval == 0 and i + 1 < spec.story_length:
            question, answer, support = sim.question(rng)
            line_no += 1
            yield f"{line_no} {question}\t{answer}\t{' '.join(map(str, support))}"
    for _ in range(final_probes):
        question, answer, support = sim.question(rng)
        line_no += 1
        yield f"{line_no} {question}\t{answer}\t{' '.join(map(str, support))}"


def write_babi(stories: Iterable[Story]) -> str:
    lines = []
    for story in stories:
        for i, sentence in enumerate(story.sentences, start=1):
            lines.append(f"{i} {sentence}")
        support = " ".join(str(s) for s in story.support)
        lines.append(f"{len(story.sentences) + 1} {story.question}"
                     f"\t{story.answer}\t{support}")
    return "\n".join(lines) + "\n"


def parse_babi(text: str) -> list[Story]:
    """Inverse of write_babi; also accepts interleaved-question files
    (each question closes one story over the sentences seen so far)."""
    stories: list[Story] = []
    sentences: list[str] = []
    expected = 1
    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        head, _, rest = raw.partition(" ")
        try:
            number = int(head)
        except ValueError:
            raise FormatError("line must start with a number", line_no) from None
        if number == 1:
            sentences = []
            expected = 1
        if number != expected:
            raise FormatError(f"expected line number {expected}, got {number}",
                              line_no)
        expected += 1
        if "\t" in rest:
            parts = rest.split("\t")
            if len(parts) != 3:
                raise FormatError("question needs 'question\\tanswer\\tsupport'",
                                  line_no)
            question, answer, support_text = parts
            support = tuple(int(s) for s in support_text.split()) \
                if support_text else ()
            stories.append(Story(tuple(sentences), question, answer, support))
        else:
            sentences.append(rest)
    return stories


def to_examples(stories: Iterable[Story], vocabulary: Vocabulary,
                allow_unk: bool = False) -> list[Example]:
    examples = []
    for story_id, story in enumerate(stories):
        pieces = []
        previous: tuple[int, ...] = ()
        for sentence in story.sentences:
            tokens = tuple(vocabulary.tokenize(sentence, allow_unk=allow_unk))
            pieces.append((tokens, previous))
            previous = tokens
        question = tuple(vocabulary.tokenize(story.question, allow_unk=allow_unk))
        answer_ids = vocabulary.tokenize(story.answer, allow_unk=allow_unk)
        if len(answer_ids) != 1:
            raise FormatError(f"answer {story.answer!r} is not a single word")
        examples.append(Example(story_id, tuple(pieces), question, answer_ids[0]))
    if not examples:
        raise EmptyDatasetError("no stories to convert")
    return examples
