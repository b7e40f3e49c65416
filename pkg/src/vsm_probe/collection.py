"""Run experiment sets, parse answers, aggregate seeds, persist records.

A set directory holds three files:

``manifest.json``
    configuration, asset digests, backend, status and timestamps.
``records.jsonl``
    one line per (identity, question, seed) triple, append-only.
``vectors.csv``
    the 54 seed-averaged 24-d response vectors.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import json
import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import CacheMiss, EmptyInput, IncompleteSet, IntegrityError, TransportError
from .gateway import ChatRequest, cache_key
from .protocol import ExperimentConfig, Identity, build_prompt, identity_grid, template_digest
from .questionnaire import HEALTH_QUESTIONS, N_QUESTIONS, Locale, load_questionnaire, present_options

log = logging.getLogger(__name__)

NEUTRAL_OPTION = 3
OPTION_KEYS = ("option", "option_id", "choice", "answer")
RATIONALE_KEYS = ("reason", "rationale", "explanation")

MANIFEST = "manifest.json"
RECORDS = "records.jsonl"
VECTORS = "vectors.csv"


class Fallback(enum.Enum):
    NONE = "none"
    UNRECOGNIZABLE = "unrecognizable"
    HEALTH_QUESTION = "health_question"


@dataclass(frozen=True)
class ParsedAnswer:
    question_id: int
    option_id: int | None  # None means unrecognized
    rationale: str
    fallback_applied: Fallback

    @property
    def recognized(self) -> bool:
        return self.option_id is not None

    @property
    def effective_score(self) -> int:
        if self.fallback_applied is Fallback.NONE:
            return self.option_id
        return NEUTRAL_OPTION


_INT_STRING = re.compile(r"^\s*([0-9]+)\s*$")


def _first_json_object(text: str) -> dict | None:
    decoder = json.JSONDecoder()
    pos = text.find("{")
    while pos != -1:
        try:
            obj, _ = decoder.raw_decode(text, pos)
        except json.JSONDecodeError:
            obj = None
        if isinstance(obj, dict):
            return obj
        pos = text.find("{", pos + 1)
    return None


def _coerce_option(value) -> int | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, int):
        n = value
    elif isinstance(value, str) and _INT_STRING.match(value):
        n = int(value)
    else:
        return None
    return n if 1 <= n <= 5 else None


def parse_response(raw_text: str, question_id: int) -> ParsedAnswer:
    """Pull an option ID out of a model reply.

    The first JSON object in the text wins, whatever prose or code fences
    surround it. The option is read from the first present key among
    ``option``, ``option_id``, ``choice``, ``answer`` (case-insensitive) and
    must be an integer 1..5 or a string holding one. Anything else is
    unrecognized. Health questions are parsed but always flagged so they
    score as the neutral option.
    """
    obj = _first_json_object(raw_text or "")
    option_id = None
    rationale = ""
    if obj is not None:
        lowered = {str(k).lower(): v for k, v in reversed(list(obj.items()))}
        for key in OPTION_KEYS:
            if key in lowered:
                option_id = _coerce_option(lowered[key])
                break
        for key in RATIONALE_KEYS:
            if isinstance(lowered.get(key), str):
                rationale = lowered[key]
                break

    if question_id in HEALTH_QUESTIONS:
        fallback = Fallback.HEALTH_QUESTION
    elif option_id is None:
        fallback = Fallback.UNRECOGNIZABLE
    else:
        fallback = Fallback.NONE
    return ParsedAnswer(question_id, option_id, rationale, fallback)


@dataclass(frozen=True)
class ResponseVector:
    identity: Identity | None
    scores: tuple
    seed_count: int

    def as_array(self) -> np.ndarray:
        return np.asarray(self.scores, dtype=float)


def aggregate_identity(per_seed_scores, identity: Identity | None = None) -> ResponseVector:
    """Entrywise mean of per-seed 24-d effective score vectors."""
    rows = [list(r) for r in per_seed_scores]
    if not rows:
        raise EmptyInput("no per-seed vectors to aggregate")
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != N_QUESTIONS:
        raise ValueError(f"each per-seed vector must have {N_QUESTIONS} entries")
    if np.any((arr < 1) | (arr > 5)):
        raise ValueError("effective scores must lie in 1..5")
    means = arr.mean(axis=0)
    return ResponseVector(identity=identity, scores=tuple(float(x) for x in means), seed_count=len(rows))


@dataclass
class ExperimentSet:
    config: ExperimentConfig
    vectors: list
    recognizability_rate: float
    manifest: dict = field(default_factory=dict)
    records_sha256: str = ""

    @property
    def label(self) -> str:
        return self.config.set_label

    def vector_for(self, identity: Identity) -> ResponseVector:
        for v in self.vectors:
            if v.identity == identity:
                return v
        raise KeyError(identity)


# --------------------------------------------------------------------------
# persistence helpers


def _triple_key(identity: Identity, question_id: int, seed: int) -> tuple:
    return (identity.key, int(question_id), int(seed))


def _record_key(rec: dict) -> tuple:
    return (f"{rec['nation']}|{rec['gender']}|{rec['age']}", int(rec["question_id"]), int(rec["seed"]))


def _dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def _read_records(path: Path) -> dict:
    """Load records, dropping a torn trailing line left by a crash."""
    records = {}
    if not path.exists():
        return records
    data = path.read_bytes()
    good_end = 0
    offset = 0
    for line in data.splitlines(keepends=True):
        offset += len(line)
        if not line.strip():
            good_end = offset
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError:
            if offset == len(data) and not line.endswith(b"\n"):
                log.warning("discarding torn final record in %s", path)
                break
            raise IntegrityError(f"corrupt record in {path} at byte {offset - len(line)}") from None
        key = _record_key(rec)
        if key in records:
            raise IntegrityError(f"triple {key} recorded twice in {path}")
        records[key] = rec
        good_end = offset
    if good_end != len(data):
        with open(path, "r+b") as fh:
            fh.truncate(good_end)
    return records


def _append_records(path: Path, records: list) -> None:
    if not records:
        return
    with open(path, "a", encoding="utf-8") as fh:
        for rec in records:
            fh.write(_dumps(rec) + "\n")
        fh.flush()
        os.fsync(fh.fileno())


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _canonical_order(config: ExperimentConfig) -> list:
    return [
        (identity, seed, qid)
        for identity in identity_grid()
        for seed in config.seeds
        for qid in range(1, N_QUESTIONS + 1)
    ]


def records_digest(records: dict, config: ExperimentConfig) -> str:
    h = hashlib.sha256()
    for identity, seed, qid in _canonical_order(config):
        rec = records[_triple_key(identity, qid, seed)]
        h.update(_dumps(rec).encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


def vectors_csv(vectors: list) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["nation", "gender", "age"] + [f"q{i}" for i in range(1, N_QUESTIONS + 1)])
    for v in vectors:
        ident = v.identity
        writer.writerow([ident.nation.value, ident.gender.value, ident.age] + [repr(s) for s in v.scores])
    return buf.getvalue()


def _assemble(config: ExperimentConfig, records: dict) -> tuple:
    missing = [
        t for t in _canonical_order(config) if _triple_key(t[0], t[2], t[1]) not in records
    ]
    if missing:
        raise IncompleteSet(f"{len(missing)} of {len(records) + len(missing)} triples have no record")
    vectors = []
    recognized = 0
    counted = 0
    for identity in identity_grid():
        per_seed = []
        for seed in config.seeds:
            row = []
            for qid in range(1, N_QUESTIONS + 1):
                rec = records[_triple_key(identity, qid, seed)]
                row.append(int(rec["effective_score"]))
                if qid not in HEALTH_QUESTIONS:
                    counted += 1
                    recognized += rec["option_id"] is not None
            per_seed.append(row)
        vectors.append(aggregate_identity(per_seed, identity))
    rate = recognized / counted if counted else 0.0
    return vectors, rate


def _record(identity, qid, seed, prompt, key, raw_text, transport_error=False) -> dict:
    parsed = parse_response(raw_text, qid)
    return {
        "nation": identity.nation.value,
        "gender": identity.gender.value,
        "age": identity.age,
        "question_id": qid,
        "seed": seed,
        "order": list(prompt.order),
        "prompt_sha256": prompt.sha256,
        "cache_key": key,
        "raw_text": raw_text,
        "option_id": parsed.option_id,
        "rationale": parsed.rationale,
        "fallback": parsed.fallback_applied.value,
        "effective_score": parsed.effective_score,
        "transport_error": transport_error,
    }


# --------------------------------------------------------------------------
# running


def run_experiment(
    config: ExperimentConfig,
    backend,
    out_dir,
    *,
    tolerate_transport: bool = False,
    max_in_flight: int | None = None,
) -> ExperimentSet:
    """Administer the questionnaire for every (identity, question, seed).

    Triples already present in ``records.jsonl`` are skipped, so an
    interrupted run resumes where it stopped. Records are flushed one
    identity at a time, in canonical order.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / MANIFEST
    records_path = out / RECORDS

    questions = load_questionnaire(config.prompt_locale)
    digest = template_digest(config.prompt_locale, config.response_language)
    config_doc = config.to_dict()

    if manifest_path.exists():
        previous = json.loads(manifest_path.read_text(encoding="utf-8"))
        if previous.get("config") != config_doc:
            raise IntegrityError(f"{out} holds a set with a different configuration")
        if previous.get("template_sha256") != digest:
            raise IntegrityError(f"{out} was produced with different prompt/questionnaire assets")
        started = previous.get("started_at", _now())
    else:
        started = _now()

    records = _read_records(records_path)
    allowed = {_triple_key(i, q, s) for i, s, q in _canonical_order(config)}
    stray = set(records) - allowed
    if stray:
        raise IntegrityError(f"{len(stray)} persisted records do not belong to this configuration")

    manifest = {
        "config": config_doc,
        "template_sha256": digest,
        "backend": getattr(backend, "name", type(backend).__name__),
        "status": "running",
        "started_at": started,
    }
    _write_atomic(manifest_path, json.dumps(manifest, indent=2, ensure_ascii=False) + "\n")

    if max_in_flight is None:
        max_in_flight = config.endpoint.max_in_flight if config.endpoint else 1
    pool = ThreadPoolExecutor(max_workers=max_in_flight) if max_in_flight > 1 else None

    def ask(job):
        identity, seed, question = job
        presentation = present_options(question, config.shuffle, seed)
        prompt = build_prompt(question, presentation, identity, config.prompt_locale,
                              config.response_language, seed=seed)
        key = _triple_key(identity, question.id, seed)
        if key in records:
            if records[key]["prompt_sha256"] != prompt.sha256:
                raise IntegrityError(f"persisted prompt for {key} differs from the current template")
            return None
        request = ChatRequest(config.model_name, prompt, seed, config.sampling)
        try:
            response = backend.complete(request)
        except TransportError as exc:
            if not tolerate_transport:
                return exc
            log.warning("transport failure for %s recorded as unrecognizable: %s", key, exc)
            return _record(identity, question.id, seed, prompt, cache_key(request), "", True)
        except CacheMiss as exc:
            return exc
        return _record(identity, question.id, seed, prompt, cache_key(request), response.raw_text)

    try:
        for identity in identity_grid():
            jobs = [(identity, seed, q) for seed in config.seeds for q in questions]
            if all(_triple_key(identity, q.id, s) in records for _, s, q in jobs):
                for _, s, q in jobs:
                    ask((identity, s, q))  # verifies prompt digests
                continue
            results = list(pool.map(ask, jobs)) if pool else [ask(j) for j in jobs]
            fresh = [r for r in results if isinstance(r, dict)]
            _append_records(records_path, fresh)
            for rec in fresh:
                records[_record_key(rec)] = rec
            failures = [r for r in results if isinstance(r, Exception)]
            if failures:
                manifest.update(status="interrupted", interrupted_at=_now())
                _write_atomic(manifest_path, json.dumps(manifest, indent=2, ensure_ascii=False) + "\n")
                raise failures[0]
    finally:
        if pool:
            pool.shutdown(wait=True)

    vectors, rate = _assemble(config, records)
    digest_records = records_digest(records, config)
    (out / VECTORS).write_text(vectors_csv(vectors), encoding="utf-8")
    manifest.update(
        status="complete",
        finished_at=_now(),
        record_count=len(records),
        records_sha256=digest_records,
        recognizability_rate=rate,
    )
    manifest.pop("interrupted_at", None)
    _write_atomic(manifest_path, json.dumps(manifest, indent=2, ensure_ascii=False) + "\n")
    return ExperimentSet(config, vectors, rate, manifest, digest_records)


def config_from_manifest(doc: dict) -> ExperimentConfig:
    from .gateway import SamplingParams

    cfg = doc["config"]
    return ExperimentConfig(
        model_name=cfg["model_name"],
        prompt_locale=Locale.parse(cfg["prompt_locale"]),
        shuffle=bool(cfg["shuffle"]),
        response_language=Locale.parse(cfg["response_language"]),
        seeds=tuple(cfg["seeds"]),
        sampling=SamplingParams(**cfg["sampling"]),
        label=cfg.get("label"),
    )


def load_experiment_set(set_dir) -> ExperimentSet:
    """Rebuild a completed set from its manifest and records."""
    root = Path(set_dir)
    try:
        manifest = json.loads((root / MANIFEST).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise IncompleteSet(f"{root} has no {MANIFEST}") from None
    config = config_from_manifest(manifest)
    records = _read_records(root / RECORDS)
    allowed = {_triple_key(i, q, s) for i, s, q in _canonical_order(config)}
    if set(records) - allowed:
        raise IntegrityError(f"{root} holds records outside its configuration")
    vectors, rate = _assemble(config, records)
    digest = records_digest(records, config)
    if manifest.get("records_sha256") not in (None, digest):
        raise IntegrityError(f"{root}/{RECORDS} does not match its manifest digest")
    return ExperimentSet(config, vectors, rate, manifest, digest)
