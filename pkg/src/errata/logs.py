"""Prediction-log data model and JSONL ingestion.

A log is an immutable, order-preserving sequence of per-sample classifier
outcomes: the label set a model produced, the ground-truth label set, the
boolean side-conditions observed for the sample, and a distribution tag.
Every probability this package reports is an exact ratio of record counts
over such a log, so this module also defines the event-query primitive
those counts are taken over.

JSONL schema (one object per line, strict — unknown fields are rejected):

    sample_id     string, required
    model_id      string, required
    predicted     array of strings, required; treated as a set
    ground_truth  array of strings, required; treated as a set
    conditions    array of strings, required; treated as a set
    distribution  string, optional; absent means the "default" distribution

Duplicate entries inside an array and duplicate (sample_id, model_id)
pairs across lines are both rejected. ``serialize_log`` emits a canonical
form (sorted set fields, default tag omitted) so that serialization is
deterministic and ``load_log(serialize_log(log)) == log``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator

DEFAULT_DISTRIBUTION = "default"

PREDICTED = "predicted"
GROUND_TRUTH = "ground_truth"
CONDITIONS = "conditions"
DISTRIBUTION = "distribution"

_SET_FIELDS = (PREDICTED, GROUND_TRUTH, CONDITIONS)
_REQUIRED_FIELDS = ("sample_id", "model_id") + _SET_FIELDS
_SCHEMA_FIELDS = _REQUIRED_FIELDS + (DISTRIBUTION,)


class LogFormatError(ValueError):
    """A log line or record violates the schema."""


@dataclass(frozen=True, slots=True)
class PredictionRecord:
    """One sample's outcome for one model."""

    sample_id: str
    model_id: str
    predicted: frozenset[str]
    ground_truth: frozenset[str]
    conditions: frozenset[str]
    distribution: str = DEFAULT_DISTRIBUTION

    def __post_init__(self):
        for name in _SET_FIELDS:
            value = getattr(self, name)
            if not isinstance(value, frozenset):
                object.__setattr__(self, name, frozenset(value))

    @property
    def key(self) -> tuple[str, str]:
        return (self.sample_id, self.model_id)


@dataclass(frozen=True)
class PredictionLog:
    """Immutable collection of prediction records.

    Universes are recomputed from the records at construction, and a
    duplicate (sample_id, model_id) pair is rejected, so a constructed log
    is always internally consistent. All operations are pure: slicing and
    rule application produce new logs.
    """

    records: tuple[PredictionRecord, ...] = ()
    label_universe: frozenset[str] = field(init=False, compare=False)
    condition_universe: frozenset[str] = field(init=False, compare=False)
    distribution_universe: frozenset[str] = field(init=False, compare=False)

    def __post_init__(self):
        if not isinstance(self.records, tuple):
            object.__setattr__(self, "records", tuple(self.records))
        labels: set[str] = set()
        conditions: set[str] = set()
        distributions: set[str] = set()
        seen: set[tuple[str, str]] = set()
        for rec in self.records:
            key = (rec.sample_id, rec.model_id)
            if key in seen:
                raise LogFormatError(f"duplicate (sample_id, model_id) pair {key!r}")
            seen.add(key)
            labels.update(rec.predicted)
            labels.update(rec.ground_truth)
            conditions.update(rec.conditions)
            distributions.add(rec.distribution)
        object.__setattr__(self, "label_universe", frozenset(labels))
        object.__setattr__(self, "condition_universe", frozenset(conditions))
        object.__setattr__(self, "distribution_universe", frozenset(distributions))

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[PredictionRecord]:
        return iter(self.records)

    def slice(self, model_id: str, distribution: str | None = None) -> "PredictionLog":
        """Sub-log for one model, optionally narrowed to one distribution tag.

        An empty result is legal. Slicing on "default" selects records
        that carried no explicit tag.
        """
        keep = tuple(
            r
            for r in self.records
            if r.model_id == model_id
            and (distribution is None or r.distribution == distribution)
        )
        return PredictionLog(keep)

    def count(self, query: "EventQuery") -> int:
        """Number of records satisfying the query."""
        return sum(1 for r in self.records if query.matches(r))

    def by_key(self) -> dict[tuple[str, str], PredictionRecord]:
        return {r.key: r for r in self.records}


# ---------------------------------------------------------------------------
# Event queries
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class Atom:
    """One literal: membership in a set field, or a distribution tag test."""

    field: str
    value: str
    negated: bool = False

    def __post_init__(self):
        if self.field not in (PREDICTED, GROUND_TRUTH, CONDITIONS, DISTRIBUTION):
            raise ValueError(f"unknown atom field {self.field!r}")

    def matches(self, record: PredictionRecord) -> bool:
        if self.field == DISTRIBUTION:
            hit = record.distribution == self.value
        elif self.field == PREDICTED:
            hit = self.value in record.predicted
        elif self.field == GROUND_TRUTH:
            hit = self.value in record.ground_truth
        else:
            hit = self.value in record.conditions
        return hit is not self.negated

    def negate(self) -> "Atom":
        return replace(self, negated=not self.negated)


def predicted_has(label: str) -> Atom:
    return Atom(PREDICTED, label)


def predicted_lacks(label: str) -> Atom:
    return Atom(PREDICTED, label, negated=True)


def truth_has(label: str) -> Atom:
    return Atom(GROUND_TRUTH, label)


def truth_lacks(label: str) -> Atom:
    return Atom(GROUND_TRUTH, label, negated=True)


def condition_holds(condition_id: str) -> Atom:
    return Atom(CONDITIONS, condition_id)


def condition_absent(condition_id: str) -> Atom:
    return Atom(CONDITIONS, condition_id, negated=True)


def distribution_is(tag: str) -> Atom:
    return Atom(DISTRIBUTION, tag)


@dataclass(frozen=True)
class EventQuery:
    """Disjunction of conjunctions of atoms.

    The default query — a single empty conjunction — matches every record.
    A query with no clauses matches none (the empty disjunction), which is
    what negating a match-all query yields.
    """

    clauses: tuple[frozenset[Atom], ...] = (frozenset(),)

    @classmethod
    def conjunction(cls, *atoms: Atom) -> "EventQuery":
        return cls((frozenset(atoms),))

    @classmethod
    def match_all(cls) -> "EventQuery":
        return cls()

    def matches(self, record: PredictionRecord) -> bool:
        return any(
            all(atom.matches(record) for atom in clause) for clause in self.clauses
        )

    def and_(self, other: "EventQuery") -> "EventQuery":
        return EventQuery(
            tuple(c1 | c2 for c1 in self.clauses for c2 in other.clauses)
        )

    def or_(self, other: "EventQuery") -> "EventQuery":
        return EventQuery(self.clauses + other.clauses)

    def negated(self) -> "EventQuery":
        """Atom-wise De Morgan negation of a single-conjunction query."""
        if len(self.clauses) != 1:
            raise ValueError("negation is defined for single-conjunction queries only")
        (clause,) = self.clauses
        return EventQuery(tuple(frozenset((atom.negate(),)) for atom in clause))


# ---------------------------------------------------------------------------
# JSONL ingestion / serialization
# ---------------------------------------------------------------------------

def _parse_set_field(value, name: str, lineno: int) -> frozenset[str]:
    if not isinstance(value, list):
        raise LogFormatError(f"line {lineno}: field {name!r} must be an array of strings")
    items: set[str] = set()
    for item in value:
        if not isinstance(item, str) or not item:
            raise LogFormatError(
                f"line {lineno}: field {name!r} entries must be nonempty strings"
            )
        if item in items:
            raise LogFormatError(
                f"line {lineno}: duplicate entry {item!r} in field {name!r}"
            )
        items.add(item)
    return frozenset(items)


def _parse_record(obj: dict, lineno: int) -> PredictionRecord:
    unknown = sorted(set(obj) - set(_SCHEMA_FIELDS))
    if unknown:
        raise LogFormatError(f"line {lineno}: unknown field(s) {unknown}")
    missing = [name for name in _REQUIRED_FIELDS if name not in obj]
    if missing:
        raise LogFormatError(f"line {lineno}: missing field(s) {missing}")
    for name in ("sample_id", "model_id"):
        if not isinstance(obj[name], str) or not obj[name]:
            raise LogFormatError(f"line {lineno}: field {name!r} must be a nonempty string")
    distribution = obj.get(DISTRIBUTION, DEFAULT_DISTRIBUTION)
    if not isinstance(distribution, str) or not distribution:
        raise LogFormatError(f"line {lineno}: field 'distribution' must be a nonempty string")
    return PredictionRecord(
        sample_id=obj["sample_id"],
        model_id=obj["model_id"],
        predicted=_parse_set_field(obj[PREDICTED], PREDICTED, lineno),
        ground_truth=_parse_set_field(obj[GROUND_TRUTH], GROUND_TRUTH, lineno),
        conditions=_parse_set_field(obj[CONDITIONS], CONDITIONS, lineno),
        distribution=distribution,
    )


def load_log(source: str | Iterable[str]) -> PredictionLog:
    """Parse line-delimited JSON into a validated log.

    Rejection errors carry the 1-based line number of the offending line.
    Blank lines are skipped; an empty source yields an empty log.
    """
    lines = source.splitlines() if isinstance(source, str) else source
    records: list[PredictionRecord] = []
    seen: dict[tuple[str, str], int] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LogFormatError(f"line {lineno}: malformed JSON ({exc.msg})") from exc
        if not isinstance(obj, dict):
            raise LogFormatError(f"line {lineno}: expected a JSON object")
        record = _parse_record(obj, lineno)
        if record.key in seen:
            raise LogFormatError(
                f"line {lineno}: duplicate (sample_id, model_id) {record.key!r}"
                f" first seen on line {seen[record.key]}"
            )
        seen[record.key] = lineno
        records.append(record)
    return PredictionLog(tuple(records))


def load_log_file(path) -> PredictionLog:
    with open(path, "r", encoding="utf-8") as handle:
        return load_log(handle)


def serialize_log(log: PredictionLog) -> str:
    """Canonical JSONL for a log; record order is preserved."""
    lines = []
    for rec in log.records:
        obj = {
            "sample_id": rec.sample_id,
            "model_id": rec.model_id,
            "predicted": sorted(rec.predicted),
            "ground_truth": sorted(rec.ground_truth),
            "conditions": sorted(rec.conditions),
        }
        if rec.distribution != DEFAULT_DISTRIBUTION:
            obj["distribution"] = rec.distribution
        lines.append(json.dumps(obj, separators=(",", ":")))
    return "\n".join(lines) + ("\n" if lines else "")
