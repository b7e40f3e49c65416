"""Simulated identities, experiment configuration and prompt assembly."""

from __future__ import annotations

import enum
import hashlib
import itertools
import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

from .errors import MissingLocaleData, SchemaError
from .gateway import EndpointConfig, SamplingParams
from .questionnaire import Locale, OptionPresentation, Question, questionnaire_digest


class Nation(enum.Enum):
    USA = "U.S.A"
    CHINA = "China"
    FRANCE = "France"
    GERMANY = "Germany"
    BRAZIL = "Brazil"
    INDIA = "India"
    SINGAPORE = "Singapore"
    JAPAN = "Japan"
    SOUTH_AFRICA = "South Africa"

    @classmethod
    def parse(cls, value: "str | Nation") -> "Nation":
        if isinstance(value, Nation):
            return value
        key = str(value).strip().rstrip(".").lower()
        for nation in cls:
            if key in (nation.value.rstrip(".").lower(), nation.name.lower()):
                return nation
        raise ValueError(f"unknown nation {value!r}")


class Gender(enum.Enum):
    MALE = "male"
    FEMALE = "female"


AGES = (25, 35, 45)
NATIONS = tuple(Nation)


@dataclass(frozen=True, order=False)
class Identity:
    nation: Nation
    gender: Gender
    age: int

    def __post_init__(self):
        if self.age not in AGES:
            raise ValueError(f"age must be one of {AGES}, got {self.age}")

    @property
    def key(self) -> str:
        return f"{self.nation.value}|{self.gender.value}|{self.age}"

    def to_dict(self) -> dict:
        return {"nation": self.nation.value, "gender": self.gender.value, "age": self.age}

    @classmethod
    def from_dict(cls, d: dict) -> "Identity":
        return cls(Nation.parse(d["nation"]), Gender(d["gender"]), int(d["age"]))


def identity_grid() -> list:
    """All 54 identities, nation-major, then gender, then age."""
    return [Identity(n, g, a) for n, g, a in itertools.product(Nation, Gender, AGES)]


@dataclass(frozen=True)
class ExperimentConfig:
    model_name: str
    prompt_locale: Locale
    shuffle: bool = False
    response_language: Locale | None = None
    seeds: tuple = tuple(range(10))
    endpoint: EndpointConfig | None = None
    sampling: SamplingParams = field(default_factory=SamplingParams)
    label: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "prompt_locale", Locale.parse(self.prompt_locale))
        if self.response_language is None:
            object.__setattr__(self, "response_language", self.prompt_locale)
        else:
            object.__setattr__(self, "response_language", Locale.parse(self.response_language))
        seeds = tuple(int(s) for s in self.seeds)
        if not seeds:
            raise ValueError("at least one seed is required")
        if len(set(seeds)) != len(seeds):
            raise ValueError("seeds must be distinct")
        object.__setattr__(self, "seeds", seeds)

    @property
    def set_label(self) -> str:
        if self.label:
            return self.label
        tag = self.prompt_locale.value
        if self.response_language is not self.prompt_locale:
            tag += f">{self.response_language.value}"
        return f"{self.model_name}:{tag}{'+shuffle' if self.shuffle else ''}"

    def to_dict(self) -> dict:
        """Serializable view for manifests. Secrets are never included."""
        return {
            "model_name": self.model_name,
            "prompt_locale": self.prompt_locale.value,
            "response_language": self.response_language.value,
            "shuffle": self.shuffle,
            "seeds": list(self.seeds),
            "sampling": self.sampling.to_dict(),
            "label": self.label,
        }


@dataclass(frozen=True)
class PromptText:
    text: str
    question_id: int
    identity: Identity
    seed: int
    order: tuple

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()


_TEMPLATE_KEYS = ("prompt", "identity", "option_line", "genders", "nations", "format_instruction")


def _template_bytes(locale: Locale) -> bytes:
    try:
        return resources.files("vsm_probe").joinpath("data", f"template_{locale.value}.json").read_bytes()
    except FileNotFoundError:
        raise MissingLocaleData(f"no prompt template for {locale.value}") from None


@lru_cache(maxsize=None)
def load_template(locale: Locale) -> dict:
    doc = json.loads(_template_bytes(locale).decode("utf-8"))
    missing = [k for k in _TEMPLATE_KEYS if k not in doc]
    if missing:
        raise SchemaError(f"template_{locale.value}.json lacks {missing}")
    if set(doc["nations"]) != {n.value for n in Nation}:
        raise SchemaError(f"template_{locale.value}.json must name exactly the nine nations")
    if set(doc["genders"]) != {g.value for g in Gender}:
        raise SchemaError(f"template_{locale.value}.json must name both genders")
    return doc


def template_digest(prompt_locale: Locale, response_language: Locale | None = None) -> str:
    """Digest over every asset a prompt depends on; pinned in run manifests."""
    response_language = response_language or prompt_locale
    h = hashlib.sha256()
    for loc in sorted({prompt_locale, response_language}, key=lambda l: l.value):
        h.update(_template_bytes(loc))
    h.update(questionnaire_digest(prompt_locale).encode())
    return h.hexdigest()


_PLACEHOLDER = re.compile(r"\{([a-z_]+)\}")


def _fill(template: str, **values) -> str:
    # single pass over named placeholders only; templates carry literal JSON braces
    return _PLACEHOLDER.sub(lambda m: str(values[m.group(1)]) if m.group(1) in values else m.group(0), template)


def build_prompt(
    question: Question,
    presentation: OptionPresentation,
    identity: Identity,
    prompt_locale: Locale,
    response_language: Locale | None = None,
    seed: int = 0,
) -> PromptText:
    prompt_locale = Locale.parse(prompt_locale)
    response_language = Locale.parse(response_language or prompt_locale)
    tpl = load_template(prompt_locale)
    fmt_tpl = load_template(response_language)

    identity_text = _fill(
        tpl["identity"],
        age=identity.age,
        gender=tpl["genders"][identity.gender.value],
        nation=tpl["nations"][identity.nation.value],
    )
    options = "\n".join(
        _fill(tpl["option_line"], id=oid, text=question.option(oid).text_in(prompt_locale))
        for oid in presentation.order
    )
    text = _fill(
        tpl["prompt"],
        format_instruction=fmt_tpl["format_instruction"],
        identity=identity_text,
        question=question.text_in(prompt_locale),
        options=options,
    )
    return PromptText(
        text=text,
        question_id=question.id,
        identity=identity,
        seed=seed,
        order=tuple(presentation.order),
    )
