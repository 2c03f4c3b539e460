"""Exact conditional-probability estimation over prediction logs.

All estimates are plain empirical frequencies: count(event ∧ given) over
count(given), kept as integer count pairs. A zero conditioning count makes
the estimate UNDEFINED — a value, not an error — and undefinedness
propagates through derived quantities.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .logs import (
    EventQuery,
    PredictionLog,
    PredictionRecord,
    condition_absent,
    condition_holds,
)
from .rational import format_rational


class Verdict(str, Enum):
    """Three-valued answer for checks whose inputs may be undefined."""

    YES = "YES"
    NO = "NO"
    UNDEFINED = "UNDEFINED"


@dataclass(frozen=True, slots=True)
class Probability:
    """Empirical conditional probability as an exact count ratio.

    ``denominator == 0`` encodes UNDEFINED (the conditioning event never
    occurs); the ``value`` property then returns None.
    """

    numerator: int
    denominator: int

    def __post_init__(self):
        if self.numerator < 0 or self.denominator < 0:
            raise ValueError("event counts must be nonnegative")
        if self.numerator > self.denominator:
            raise ValueError("numerator count exceeds denominator count")

    @property
    def defined(self) -> bool:
        return self.denominator > 0

    @property
    def value(self) -> Fraction | None:
        if self.denominator == 0:
            return None
        return Fraction(self.numerator, self.denominator)

    def to_dict(self) -> dict:
        return {
            "numerator": self.numerator,
            "denominator": self.denominator,
            "value": format_rational(self.value),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Probability":
        return cls(obj["numerator"], obj["denominator"])


@dataclass(frozen=True, slots=True)
class ConditionBody:
    """Disjunctive set of condition ids.

    The body holds for a record when at least one of its ids is among the
    record's observed conditions; ids the log never observed simply never
    hold (zero support).
    """

    condition_ids: frozenset[str]

    def __post_init__(self):
        if not isinstance(self.condition_ids, frozenset):
            object.__setattr__(self, "condition_ids", frozenset(self.condition_ids))
        if not self.condition_ids:
            raise ValueError("a condition body must name at least one condition")
        if not all(isinstance(c, str) and c for c in self.condition_ids):
            raise ValueError("condition ids must be nonempty strings")

    @classmethod
    def of(cls, *ids: str) -> "ConditionBody":
        return cls(frozenset(ids))

    def sorted_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.condition_ids))

    def holds_for(self, record: PredictionRecord) -> bool:
        return not self.condition_ids.isdisjoint(record.conditions)

    def query(self) -> EventQuery:
        """Event "some body condition holds": a disjunction of condition atoms."""
        q = EventQuery.conjunction(condition_holds(self.sorted_ids()[0]))
        for cid in self.sorted_ids()[1:]:
            q = q.or_(EventQuery.conjunction(condition_holds(cid)))
        return q

    def negated_query(self) -> EventQuery:
        """Event "no body condition holds": a conjunction of absences."""
        return EventQuery.conjunction(*(condition_absent(c) for c in self.condition_ids))


@dataclass(frozen=True, slots=True)
class MetricBundle:
    """Headline statistics for one (model, class, body) triple.

    rule_precision / rule_recall are the post-erasure figures: what
    precision and recall become if every prediction of the class made
    while the body holds is withdrawn. k_factor is support / (1 − support)
    and is UNDEFINED at support = 1; residual is 1 − precision.
    """

    precision: Probability
    recall: Probability
    rule_precision: Probability
    rule_recall: Probability
    support: Probability
    confidence: Probability
    k_factor: Fraction | None
    residual: Fraction | None

    def to_dict(self) -> dict:
        return {
            "precision": self.precision.to_dict(),
            "recall": self.recall.to_dict(),
            "rule_precision": self.rule_precision.to_dict(),
            "rule_recall": self.rule_recall.to_dict(),
            "support": self.support.to_dict(),
            "confidence": self.confidence.to_dict(),
            "k_factor": format_rational(self.k_factor),
            "residual": format_rational(self.residual),
        }


@dataclass(frozen=True, slots=True)
class ClassBodyCounts:
    """Raw event counts for one class/body over an already-sliced log."""

    total: int
    gt: int            # class in ground truth
    pred: int          # class predicted
    pred_gt: int       # class predicted and in ground truth
    pred_body: int     # class predicted and some body condition holds
    pred_body_gt: int  # ... and in ground truth


def class_body_counts(
    log: PredictionLog,
    alpha: str,
    body: ConditionBody | frozenset[str] | None,
) -> ClassBodyCounts:
    """Single-pass counts; ``body`` may be empty/None for the vacuous body."""
    ids = body.condition_ids if isinstance(body, ConditionBody) else frozenset(body or ())
    gt = pred = pred_gt = pred_body = pred_body_gt = 0
    for rec in log.records:
        in_gt = alpha in rec.ground_truth
        if in_gt:
            gt += 1
        if alpha in rec.predicted:
            pred += 1
            if in_gt:
                pred_gt += 1
            if ids and not ids.isdisjoint(rec.conditions):
                pred_body += 1
                if in_gt:
                    pred_body_gt += 1
    return ClassBodyCounts(len(log.records), gt, pred, pred_gt, pred_body, pred_body_gt)


def bundle_from_counts(c: ClassBodyCounts) -> MetricBundle:
    precision = Probability(c.pred_gt, c.pred)
    recall = Probability(c.pred_gt, c.gt)
    support = Probability(c.pred_body, c.pred)
    confidence = Probability(c.pred_body - c.pred_body_gt, c.pred_body)
    rule_precision = Probability(c.pred_gt - c.pred_body_gt, c.pred - c.pred_body)
    rule_recall = Probability(c.pred_gt - c.pred_body_gt, c.gt)
    s = support.value
    k_factor = None if s is None or s == 1 else s / (1 - s)
    p = precision.value
    residual = None if p is None else 1 - p
    return MetricBundle(
        precision=precision,
        recall=recall,
        rule_precision=rule_precision,
        rule_recall=rule_recall,
        support=support,
        confidence=confidence,
        k_factor=k_factor,
        residual=residual,
    )


def cond_prob(log: PredictionLog, event: EventQuery, given: EventQuery) -> Probability:
    """count(event ∧ given) / count(given); UNDEFINED when count(given) = 0."""
    denominator = log.count(given)
    numerator = log.count(given.and_(event))
    return Probability(numerator, denominator)


def metric_bundle(
    log: PredictionLog, model_id: str, alpha: str, body: ConditionBody
) -> MetricBundle:
    """All eight statistics for one class and body on the model's sub-log."""
    return bundle_from_counts(class_body_counts(log.slice(model_id), alpha, body))


def f1_value(precision: Probability, recall: Probability) -> Fraction | None:
    """Harmonic mean 2PR/(P+R); UNDEFINED when either side is, or P+R = 0."""
    p, r = precision.value, recall.value
    if p is None or r is None or p + r == 0:
        return None
    return 2 * p * r / (p + r)


def error_detecting_from_counts(c: ClassBodyCounts) -> Verdict:
    if c.pred == 0 or c.pred_body == 0:
        return Verdict.UNDEFINED
    # Non-strict by definition: equality still counts as error detecting.
    conditioned = Fraction(c.pred_body_gt, c.pred_body)
    base = Fraction(c.pred_gt, c.pred)
    return Verdict.YES if conditioned <= base else Verdict.NO


def is_error_detecting(
    log: PredictionLog,
    model_id: str,
    alpha: str,
    body: ConditionBody,
    distribution: str | None = None,
) -> Verdict:
    """Does the body's truth fail to raise conditional precision for alpha?

    YES iff P(alpha ∈ gt | alpha predicted, body) ≤ P(alpha ∈ gt | alpha
    predicted) on the (model, distribution) slice; UNDEFINED when either
    side has a zero conditioning count.
    """
    sub = log.slice(model_id, distribution)
    return error_detecting_from_counts(class_body_counts(sub, alpha, body))


@dataclass(frozen=True, slots=True)
class InvarianceRow:
    distribution: str
    verdict: Verdict
    confidence: Probability
    confidence_gap: Fraction | None

    def to_dict(self) -> dict:
        return {
            "distribution": self.distribution,
            "verdict": self.verdict.value,
            "confidence": self.confidence.to_dict(),
            "confidence_gap": format_rational(self.confidence_gap),
        }


@dataclass(frozen=True)
class InvarianceProfile:
    """Per-distribution error-detecting verdicts for one condition body.

    ``invariant`` is True iff every *defined* verdict is YES. The gap
    column is |per-distribution confidence − pooled confidence|, i.e. how
    far each distribution sits from the unsliced estimate.
    """

    rows: tuple[InvarianceRow, ...]
    pooled_confidence: Probability
    invariant: bool

    def row_for(self, distribution: str) -> InvarianceRow:
        for row in self.rows:
            if row.distribution == distribution:
                return row
        raise KeyError(distribution)

    def to_dict(self) -> dict:
        return {
            "rows": [row.to_dict() for row in self.rows],
            "pooled_confidence": self.pooled_confidence.to_dict(),
            "invariant": self.invariant,
        }


def invariance_profile(
    log: PredictionLog, model_id: str, alpha: str, body: ConditionBody
) -> InvarianceProfile:
    pooled_counts = class_body_counts(log.slice(model_id), alpha, body)
    pooled_conf = Probability(
        pooled_counts.pred_body - pooled_counts.pred_body_gt, pooled_counts.pred_body
    )
    rows = []
    for tag in sorted(log.distribution_universe):
        c = class_body_counts(log.slice(model_id, tag), alpha, body)
        conf = Probability(c.pred_body - c.pred_body_gt, c.pred_body)
        gap = None
        if conf.value is not None and pooled_conf.value is not None:
            gap = abs(conf.value - pooled_conf.value)
        rows.append(InvarianceRow(tag, error_detecting_from_counts(c), conf, gap))
    invariant = all(row.verdict is not Verdict.NO for row in rows)
    return InvarianceProfile(tuple(rows), pooled_conf, invariant)
