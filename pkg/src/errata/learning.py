"""Greedy rule learning with exact-rational scoring.

Detection rules are grown one condition at a time: each step adds the
candidate that maximizes the objective of the enlarged body among the
candidates that keep the class's recall reduction within the epsilon
budget, and stops when no feasible candidate strictly improves. Ties
always break toward the lexicographically smallest condition id (then
trigger class), so learning is deterministic regardless of candidate
iteration order. An exhaustive subset oracle is provided for small
candidate sets to audit greedy quality.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from itertools import combinations

from .estimators import (
    ConditionBody,
    MetricBundle,
    Probability,
    metric_bundle,
)
from .logs import PredictionLog
from .rational import format_rational
from .rules import CorrectionRule, DetectionRule


class Objective(str, Enum):
    PRECISION_GAIN = "PRECISION_GAIN"
    SUPPORT_TIMES_CONFIDENCE = "SUPPORT_TIMES_CONFIDENCE"
    F1 = "F1"


# NONE reasons
UNDEFINED_BASE = "UNDEFINED_BASE"
INFEASIBLE = "INFEASIBLE"
NO_IMPROVEMENT = "NO_IMPROVEMENT"
NO_ADMISSIBLE_PAIR = "NO_ADMISSIBLE_PAIR"


@dataclass(frozen=True)
class LearnConfig:
    """Learner settings; epsilon bounds the allowed recall reduction."""

    objective: Objective = Objective.PRECISION_GAIN
    epsilon: Fraction = Fraction(1, 20)
    max_body_size: int | None = None

    def __post_init__(self):
        if not isinstance(self.objective, Objective):
            object.__setattr__(self, "objective", Objective(self.objective))
        if not isinstance(self.epsilon, Fraction):
            object.__setattr__(self, "epsilon", Fraction(self.epsilon))
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.max_body_size is not None and self.max_body_size < 1:
            raise ValueError("max_body_size must be positive")


@dataclass(frozen=True, slots=True)
class LearnStep:
    added: str | tuple[str, str]
    objective_before: Fraction | None
    objective_after: Fraction | None
    recall_reduction: Fraction | None

    def to_dict(self) -> dict:
        added = (
            {"condition": self.added[0], "trigger_class": self.added[1]}
            if isinstance(self.added, tuple)
            else self.added
        )
        return {
            "added": added,
            "objective_before": format_rational(self.objective_before),
            "objective_after": format_rational(self.objective_after),
            "recall_reduction": format_rational(self.recall_reduction),
        }


@dataclass(frozen=True, slots=True)
class GuardCheck:
    """Per-candidate precision-improvement guard, singleton body.

    Erasing on the condition raises precision iff its confidence exceeds
    the model's residual; ``improves_precision`` is None when either side
    is undefined.
    """

    condition_id: str
    confidence: Probability
    residual: Fraction | None
    improves_precision: bool | None

    def to_dict(self) -> dict:
        return {
            "condition_id": self.condition_id,
            "confidence": self.confidence.to_dict(),
            "residual": format_rational(self.residual),
            "improves_precision": self.improves_precision,
        }


@dataclass(frozen=True, slots=True)
class PairGuard:
    """Admissibility of one correction pair against the base precision."""

    condition_id: str
    trigger_class: str
    pair_precision: Probability
    base_precision: Probability
    admissible: bool

    def to_dict(self) -> dict:
        return {
            "condition_id": self.condition_id,
            "trigger_class": self.trigger_class,
            "pair_precision": self.pair_precision.to_dict(),
            "base_precision": self.base_precision.to_dict(),
            "admissible": self.admissible,
        }


@dataclass(frozen=True)
class LearnReport:
    objective: Objective
    epsilon: Fraction
    outcome: str                        # "RULE" or "NONE"
    reason: str | None
    baseline_objective: Fraction | None
    steps: tuple[LearnStep, ...] = ()
    guards: tuple[GuardCheck, ...] = ()
    pair_guards: tuple[PairGuard, ...] = ()
    final_metrics: MetricBundle | None = None
    base_precision: Probability | None = None
    final_precision: Probability | None = None

    def to_dict(self) -> dict:
        out = {
            "objective": self.objective.value,
            "epsilon": format_rational(self.epsilon),
            "outcome": self.outcome,
            "reason": self.reason,
            "baseline_objective": format_rational(self.baseline_objective),
            "steps": [s.to_dict() for s in self.steps],
            "guards": [g.to_dict() for g in self.guards],
            "pair_guards": [g.to_dict() for g in self.pair_guards],
            "final_metrics": None if self.final_metrics is None else self.final_metrics.to_dict(),
            "base_precision": None if self.base_precision is None else self.base_precision.to_dict(),
            "final_precision": None if self.final_precision is None else self.final_precision.to_dict(),
        }
        if self.objective is Objective.F1:
            out["objective_note"] = (
                "F1 objective scores the post-rule F1 of the target class; it is a "
                "stand-in, not a ratio-maximization formulation"
            )
        return out


# ---------------------------------------------------------------------------
# Detection learning
# ---------------------------------------------------------------------------

def _objective_value(
    objective: Objective,
    n_pred: int,
    n_pred_gt: int,
    n_gt: int,
    pred_body: int,
    pred_body_gt: int,
) -> Fraction | None:
    """Objective of a body from its counts; None when undefined.

    SUPPORT_TIMES_CONFIDENCE collapses to (body-covered errors)/predictions,
    which makes the zero-support case an exact 0 rather than undefined.
    """
    if objective is Objective.SUPPORT_TIMES_CONFIDENCE:
        return Fraction(pred_body - pred_body_gt, n_pred)
    if pred_body == n_pred:
        return None  # every prediction erased: post-rule precision undefined
    post_precision = Fraction(n_pred_gt - pred_body_gt, n_pred - pred_body)
    if objective is Objective.PRECISION_GAIN:
        return post_precision - Fraction(n_pred_gt, n_pred)
    if n_gt == 0:
        return None
    post_recall = Fraction(n_pred_gt - pred_body_gt, n_gt)
    if post_precision + post_recall == 0:
        return None
    return 2 * post_precision * post_recall / (post_precision + post_recall)


class _DetectionScorer:
    """Incremental counts for growing one detection body on a model slice."""

    def __init__(self, log: PredictionLog, alpha: str):
        self.conds: list[frozenset[str]] = []
        self.correct: list[bool] = []
        n_gt = 0
        for rec in log.records:
            in_gt = alpha in rec.ground_truth
            if in_gt:
                n_gt += 1
            if alpha in rec.predicted:
                self.conds.append(rec.conditions)
                self.correct.append(in_gt)
        self.n_gt = n_gt
        self.n_pred = len(self.conds)
        self.n_pred_gt = sum(self.correct)
        self.holds = [False] * self.n_pred
        self.pred_body = 0
        self.pred_body_gt = 0

    def extension_counts(self, condition_id: str) -> tuple[int, int]:
        """(pred_body, pred_body_gt) for current body plus one condition."""
        pb, pbg = self.pred_body, self.pred_body_gt
        for i, conds in enumerate(self.conds):
            if not self.holds[i] and condition_id in conds:
                pb += 1
                if self.correct[i]:
                    pbg += 1
        return pb, pbg

    def commit(self, condition_id: str) -> None:
        for i, conds in enumerate(self.conds):
            if not self.holds[i] and condition_id in conds:
                self.holds[i] = True
                self.pred_body += 1
                if self.correct[i]:
                    self.pred_body_gt += 1


def learn_detection(
    log: PredictionLog,
    model_id: str,
    alpha: str,
    candidates,
    cfg: LearnConfig | None = None,
) -> tuple[DetectionRule | None, LearnReport]:
    """Grow a detection body greedily under the recall-reduction budget.

    Returns (None, report) when alpha is never predicted on the slice
    (UNDEFINED_BASE), when no candidate fits the budget (INFEASIBLE), or
    when nothing strictly improves the objective (NO_IMPROVEMENT). A class
    absent from the ground truth has no recall to lose, so its budget is
    vacuously satisfied.
    """
    cfg = cfg or LearnConfig()
    candidate_ids = sorted(set(candidates))
    scorer = _DetectionScorer(log.slice(model_id), alpha)

    if scorer.n_pred == 0:
        report = LearnReport(
            objective=cfg.objective,
            epsilon=cfg.epsilon,
            outcome="NONE",
            reason=UNDEFINED_BASE,
            baseline_objective=None,
        )
        return None, report

    base_precision = Fraction(scorer.n_pred_gt, scorer.n_pred)
    residual = 1 - base_precision
    guards = []
    for cid in candidate_ids:
        pb, pbg = scorer.extension_counts(cid)
        confidence = Probability(pb - pbg, pb)
        improves = None if confidence.value is None else confidence.value > residual
        guards.append(GuardCheck(cid, confidence, residual, improves))

    baseline = _objective_value(
        cfg.objective, scorer.n_pred, scorer.n_pred_gt, scorer.n_gt, 0, 0
    )

    body: list[str] = []
    current = baseline
    steps: list[LearnStep] = []
    first_step_had_feasible = False
    while cfg.max_body_size is None or len(body) < cfg.max_body_size:
        best: tuple[Fraction, str, int, int, Fraction | None] | None = None
        for cid in candidate_ids:
            if cid in body:
                continue
            pb, pbg = scorer.extension_counts(cid)
            reduction = Fraction(pbg, scorer.n_gt) if scorer.n_gt else None
            if reduction is not None and reduction > cfg.epsilon:
                continue
            if not body:
                first_step_had_feasible = True
            value = _objective_value(
                cfg.objective, scorer.n_pred, scorer.n_pred_gt, scorer.n_gt, pb, pbg
            )
            if value is None:
                continue
            if current is not None and value <= current:
                continue
            if best is None or value > best[0]:
                best = (value, cid, pb, pbg, reduction)
        if best is None:
            break
        value, cid, _, _, reduction = best
        steps.append(LearnStep(cid, current, value, reduction))
        scorer.commit(cid)
        body.append(cid)
        current = value

    if not body:
        reason = NO_IMPROVEMENT if first_step_had_feasible or not candidate_ids else INFEASIBLE
        report = LearnReport(
            objective=cfg.objective,
            epsilon=cfg.epsilon,
            outcome="NONE",
            reason=reason,
            baseline_objective=baseline,
            guards=tuple(guards),
        )
        return None, report

    rule = DetectionRule(model_id, alpha, ConditionBody(frozenset(body)))
    report = LearnReport(
        objective=cfg.objective,
        epsilon=cfg.epsilon,
        outcome="RULE",
        reason=None,
        baseline_objective=baseline,
        steps=tuple(steps),
        guards=tuple(guards),
        final_metrics=metric_bundle(log, model_id, alpha, rule.body),
    )
    return rule, report


# ---------------------------------------------------------------------------
# Correction learning
# ---------------------------------------------------------------------------

def learn_correction(
    log: PredictionLog,
    model_id: str,
    beta: str,
    candidate_pairs,
    cfg: LearnConfig | None = None,
) -> tuple[CorrectionRule | None, LearnReport]:
    """Grow a correction pair set under the relabeling precision guard.

    A pair (condition, trigger) is admissible only when the precision of
    beta over the pair's firing event strictly exceeds beta's base
    precision (with an undefined base, any pair of positive precision).
    Each step adds the admissible pair maximizing the combined-body
    precision; learning stops when nothing improves it. Pair statistics
    are measured on the given (pre-detection) log, matching the trigger
    semantics of rule application.
    """
    cfg = cfg or LearnConfig()
    pairs = sorted(set(candidate_pairs))
    sub = log.slice(model_id)
    records = [(rec.predicted, rec.conditions, beta in rec.ground_truth) for rec in sub.records]

    n_bpred = sum(1 for predicted, _, _ in records if beta in predicted)
    n_bpred_gt = sum(1 for predicted, _, in_gt in records if beta in predicted and in_gt)
    base = Probability(n_bpred_gt, n_bpred)

    fires: dict[tuple[str, str], list[bool]] = {}
    pair_guards = []
    admissible: list[tuple[str, str]] = []
    for cond, trig in pairs:
        hit = [trig in predicted and cond in conditions for predicted, conditions, _ in records]
        fires[(cond, trig)] = hit
        covered = sum(hit)
        covered_gt = sum(1 for h, (_, _, in_gt) in zip(hit, records) if h and in_gt)
        pair_prec = Probability(covered_gt, covered)
        if base.value is not None:
            ok = pair_prec.value is not None and pair_prec.value > base.value
        else:
            ok = pair_prec.value is not None and pair_prec.value > 0
        pair_guards.append(PairGuard(cond, trig, pair_prec, base, ok))
        if ok:
            admissible.append((cond, trig))

    chosen: list[tuple[str, str]] = []
    holds = [False] * len(records)
    covered = covered_gt = 0
    current: Fraction | None = None
    steps: list[LearnStep] = []
    while cfg.max_body_size is None or len(chosen) < cfg.max_body_size:
        best = None
        for pair in admissible:
            if pair in chosen:
                continue
            cov, cov_gt = covered, covered_gt
            for i, h in enumerate(fires[pair]):
                if h and not holds[i]:
                    cov += 1
                    if records[i][2]:
                        cov_gt += 1
            if cov == 0:
                continue
            value = Fraction(cov_gt, cov)
            if current is not None and value <= current:
                continue
            if best is None or value > best[0]:
                best = (value, pair)
        if best is None:
            break
        value, pair = best
        steps.append(LearnStep(pair, current, value, None))
        for i, h in enumerate(fires[pair]):
            if h and not holds[i]:
                holds[i] = True
                covered += 1
                if records[i][2]:
                    covered_gt += 1
        chosen.append(pair)
        current = value

    if not chosen:
        report = LearnReport(
            objective=cfg.objective,
            epsilon=cfg.epsilon,
            outcome="NONE",
            reason=NO_ADMISSIBLE_PAIR,
            baseline_objective=base.value,
            pair_guards=tuple(pair_guards),
            base_precision=base,
        )
        return None, report

    rule = CorrectionRule(model_id, beta, frozenset(chosen))
    report = LearnReport(
        objective=cfg.objective,
        epsilon=cfg.epsilon,
        outcome="RULE",
        reason=None,
        baseline_objective=base.value,
        steps=tuple(steps),
        pair_guards=tuple(pair_guards),
        base_precision=base,
        final_precision=Probability(covered_gt, covered),
    )
    return rule, report


# ---------------------------------------------------------------------------
# Exhaustive oracle
# ---------------------------------------------------------------------------

def exhaustive_oracle(
    log: PredictionLog,
    model_id: str,
    alpha: str,
    candidates,
    cfg: LearnConfig | None = None,
) -> tuple[frozenset[str] | None, Fraction | None]:
    """Best feasible body by brute force over every nonempty subset.

    Returns (None, None) when no feasible subset strictly beats the
    empty-body objective. Ties break toward the smaller body, then the
    lexicographically smaller id tuple; subsets are visited in that order,
    so the first maximum wins. Candidate sets above 20 ids are rejected.
    """
    cfg = cfg or LearnConfig()
    ids = sorted(set(candidates))
    if len(ids) > 20:
        raise ValueError(f"candidate set too large for enumeration ({len(ids)} > 20)")

    sub = log.slice(model_id)
    alpha_recs = [
        (alpha in rec.ground_truth, rec.conditions)
        for rec in sub.records
        if alpha in rec.predicted
    ]
    n_pred = len(alpha_recs)
    n_pred_gt = sum(1 for in_gt, _ in alpha_recs if in_gt)
    n_gt = sum(1 for rec in sub.records if alpha in rec.ground_truth)
    if n_pred == 0:
        return None, None

    baseline = _objective_value(cfg.objective, n_pred, n_pred_gt, n_gt, 0, 0)
    best_body: frozenset[str] | None = None
    best_value: Fraction | None = None
    for size in range(1, len(ids) + 1):
        if cfg.max_body_size is not None and size > cfg.max_body_size:
            break
        for subset in combinations(ids, size):
            body = frozenset(subset)
            pb = pbg = 0
            for in_gt, conditions in alpha_recs:
                if not body.isdisjoint(conditions):
                    pb += 1
                    if in_gt:
                        pbg += 1
            if n_gt and Fraction(pbg, n_gt) > cfg.epsilon:
                continue
            value = _objective_value(cfg.objective, n_pred, n_pred_gt, n_gt, pb, pbg)
            if value is None:
                continue
            if baseline is not None and value <= baseline:
                continue
            if best_value is None or value > best_value:
                best_body, best_value = body, value
    return best_body, best_value
