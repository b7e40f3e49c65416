"""VSM 2013 question bank and option presentation.

Each locale ships as ``data/questionnaire_<tag>.json``::

    {"instrument": "VSM 2013", "locale": "en",
     "questions": [{"id": 1, "kind": "content", "text": "...",
                    "options": [{"id": 1, "text": "..."}, ...]}, ...]}

Option IDs 1..5 double as raw scores. Shuffling only reorders how options
are displayed; the ID attached to each option text never changes.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .errors import MissingLocaleData, SchemaError

N_QUESTIONS = 24
OPTION_IDS = (1, 2, 3, 4, 5)
HEALTH_QUESTIONS = frozenset({15, 18})

_MASK64 = (1 << 64) - 1


class Locale(enum.Enum):
    ENGLISH = "en"
    CHINESE = "zh"

    @classmethod
    def parse(cls, value: "str | Locale") -> "Locale":
        if isinstance(value, Locale):
            return value
        v = str(value).strip().lower()
        for loc in cls:
            if v in (loc.value, loc.name.lower()):
                return loc
        raise MissingLocaleData(f"unsupported locale {value!r}")


class QuestionKind(enum.Enum):
    CONTENT = "content"
    HEALTH = "health"


@dataclass(frozen=True)
class Option:
    id: int
    text: dict

    def text_in(self, locale: Locale) -> str:
        try:
            return self.text[locale]
        except KeyError:
            raise MissingLocaleData(f"option {self.id} has no {locale.value} text") from None


@dataclass(frozen=True)
class Question:
    id: int
    text: dict
    options: tuple
    kind: QuestionKind

    def text_in(self, locale: Locale) -> str:
        try:
            return self.text[locale]
        except KeyError:
            raise MissingLocaleData(f"question {self.id} has no {locale.value} text") from None

    def option(self, option_id: int) -> Option:
        return self.options[option_id - 1]

    @property
    def is_health(self) -> bool:
        return self.kind is QuestionKind.HEALTH


@dataclass(frozen=True)
class OptionPresentation:
    question_id: int
    order: tuple


def _asset_bytes(name: str) -> bytes:
    try:
        return resources.files("vsm_probe").joinpath("data", name).read_bytes()
    except FileNotFoundError:
        raise MissingLocaleData(f"bundled asset {name} is missing") from None


def questionnaire_digest(locale: Locale) -> str:
    """sha256 of the raw questionnaire asset, for run manifests."""
    locale = Locale.parse(locale)
    return hashlib.sha256(_asset_bytes(f"questionnaire_{locale.value}.json")).hexdigest()


def parse_questionnaire(doc: dict, locale: Locale) -> list:
    """Validate a decoded questionnaire document and build Question objects."""
    try:
        raw_questions = doc["questions"]
    except (KeyError, TypeError):
        raise SchemaError("questionnaire document has no 'questions' list") from None
    if not isinstance(raw_questions, list) or len(raw_questions) != N_QUESTIONS:
        raise SchemaError(f"expected {N_QUESTIONS} questions")

    questions = []
    for raw in raw_questions:
        try:
            qid = raw["id"]
            kind = QuestionKind(raw["kind"])
            text = raw["text"]
            raw_options = raw["options"]
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed question entry: {exc}") from None
        if not isinstance(qid, int) or not 1 <= qid <= N_QUESTIONS:
            raise SchemaError(f"question id {qid!r} outside 1..{N_QUESTIONS}")
        if (kind is QuestionKind.HEALTH) != (qid in HEALTH_QUESTIONS):
            raise SchemaError(f"question {qid} has wrong kind {kind.value}")
        if not isinstance(text, str) or not text.strip():
            raise SchemaError(f"question {qid} has empty text")
        if not isinstance(raw_options, list) or len(raw_options) != len(OPTION_IDS):
            raise SchemaError(f"question {qid} must have exactly 5 options")
        try:
            option_ids = [o["id"] for o in raw_options]
            option_texts = [o["text"] for o in raw_options]
        except (KeyError, TypeError):
            raise SchemaError(f"question {qid} has a malformed option") from None
        if sorted(option_ids) != list(OPTION_IDS):
            raise SchemaError(f"question {qid} option ids must be exactly 1..5")
        if not all(isinstance(t, str) and t.strip() for t in option_texts):
            raise SchemaError(f"question {qid} has an empty option text")
        options = tuple(
            Option(id=oid, text={locale: t})
            for oid, t in sorted(zip(option_ids, option_texts))
        )
        questions.append(Question(id=qid, text={locale: text}, options=options, kind=kind))

    questions.sort(key=lambda q: q.id)
    if [q.id for q in questions] != list(range(1, N_QUESTIONS + 1)):
        raise SchemaError("question ids must be unique and cover 1..24")
    return questions


@lru_cache(maxsize=None)
def _load(locale: Locale) -> tuple:
    raw = _asset_bytes(f"questionnaire_{locale.value}.json")
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaError(f"questionnaire asset for {locale.value} is not valid JSON: {exc}") from None
    return tuple(parse_questionnaire(doc, locale))


def load_questionnaire(locale: "Locale | str") -> list:
    """Return the 24 VSM 2013 questions with text in ``locale``, ordered by id."""
    return list(_load(Locale.parse(locale)))


def _splitmix64(state: int) -> tuple:
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def shuffle_permutation(question_id: int, seed: int, n: int = 5) -> list:
    """Deterministic permutation of 1..n for a (question, seed) pair.

    The generator is SplitMix64. Its initial state is the mix of the seed
    (two's-complement, 64 bits) XORed with the question id, so neighbouring
    seeds and question ids do not collide. A Fisher-Yates pass from the top
    index down draws ``j = next() % (i + 1)``.
    """
    _, mixed_seed = _splitmix64(seed & _MASK64)
    state = mixed_seed ^ (question_id & _MASK64)
    items = list(range(1, n + 1))
    for i in range(n - 1, 0, -1):
        state, value = _splitmix64(state)
        j = value % (i + 1)
        items[i], items[j] = items[j], items[i]
    return items


def present_options(question: Question, shuffle: bool, shuffle_seed: int) -> OptionPresentation:
    if not shuffle:
        return OptionPresentation(question_id=question.id, order=OPTION_IDS)
    order = tuple(shuffle_permutation(question.id, shuffle_seed, len(question.options)))
    return OptionPresentation(question_id=question.id, order=order)
