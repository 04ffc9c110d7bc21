"""Rule-quality evaluation: coverage, support, confidence, Zhang's metric.

Counting is done on per-item transaction bitmasks (Python ints), so a report
over hundreds of thousands of rules stays cheap and every statistic is exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

from .errors import TabarmError
from .miners import Rule
from .tabular import TransactionDB

REPORT_FIELDS = (
    "rule_count",
    "avg_coverage",
    "avg_support",
    "avg_confidence",
    "total_data_coverage",
    "avg_zhang",
    "exec_seconds",
)


@dataclass(frozen=True)
class RuleMetricsReport:
    """Aggregate rule-set quality plus the producing pipeline's wall time."""

    rule_count: int
    avg_coverage: float
    avg_support: float
    avg_confidence: float
    total_data_coverage: float
    avg_zhang: float
    exec_seconds: float
    empty: bool = False
    undefined_rules: int = 0

    def __post_init__(self) -> None:
        for name in ("avg_coverage", "avg_support", "avg_confidence", "total_data_coverage"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value} outside [0, 1]")
        if not -1.0 <= self.avg_zhang <= 1.0:
            raise ValueError(f"avg_zhang={self.avg_zhang} outside [-1, 1]")
        if self.rule_count < 0:
            raise ValueError("rule_count must be >= 0")

    def to_dict(self) -> dict:
        body = {name: getattr(self, name) for name in REPORT_FIELDS}
        body["empty"] = self.empty
        body["undefined_rules"] = self.undefined_rules
        return body

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))


class _BitmaskIndex:
    """Per-item transaction bitmasks for a TransactionDB."""

    def __init__(self, db: TransactionDB):
        self.n = db.n_transactions
        self.full = (1 << self.n) - 1
        self.item_mask: dict = {}
        masks = [0] * len(db.items)
        for tid, txn in enumerate(db.transactions):
            bit = 1 << tid
            for item_id in txn:
                masks[item_id] |= bit
        for item, mask in zip(db.items, masks):
            self.item_mask[item] = mask

    def antecedent_mask(self, rule: Rule) -> int:
        mask = self.full
        for item in rule.antecedent:
            mask &= self.item_mask.get(item, 0)
            if not mask:
                return 0
        return mask


def _zhang_from_masks(index: _BitmaskIndex, cover: int, y_mask: int) -> float:
    conf = (cover & y_mask).bit_count() / cover.bit_count()
    absent = index.full & ~cover
    n_absent = absent.bit_count()
    conf_absent = (absent & y_mask).bit_count() / n_absent if n_absent else 0.0
    if conf == 0.0 and conf_absent == 0.0:
        return 0.0
    return (conf - conf_absent) / max(conf, conf_absent)


def zhang(rule: Rule, db: TransactionDB) -> float:
    """Association strength in [-1, 1]: confidence given X against given not-X.

    conf(not-X -> Y) is 0 when every transaction contains X, and the metric
    is 0 when both confidences vanish; support(X) = 0 is an error.
    """
    if db.n_transactions == 0:
        raise TabarmError("Zhang's metric needs a non-empty transaction set")
    index = _BitmaskIndex(db)
    cover = index.antecedent_mask(rule)
    if not cover:
        raise TabarmError(f"rule antecedent {rule.antecedent} never occurs (support 0)")
    return _zhang_from_masks(index, cover, index.item_mask.get(rule.consequent, 0))


def score_rules(rules: list[Rule], db: TransactionDB) -> list[Rule]:
    """Fill support/confidence/zhang on each rule from the transaction counts.

    Rules whose antecedent never occurs keep None statistics.
    """
    index = _BitmaskIndex(db)
    n = index.n
    scored = []
    cover_cache: dict[tuple, int] = {}
    for rule in rules:
        cover = cover_cache.setdefault(rule.antecedent, index.antecedent_mask(rule))
        if not cover:
            scored.append(replace(rule, support=None, confidence=None, zhang=None))
            continue
        y_mask = index.item_mask.get(rule.consequent, 0)
        both = (cover & y_mask).bit_count()
        scored.append(
            replace(
                rule,
                support=both / n,
                confidence=both / cover.bit_count(),
                zhang=_zhang_from_masks(index, cover, y_mask),
            )
        )
    return scored


def evaluate_rules(rules: list[Rule], db: TransactionDB, exec_seconds: float) -> RuleMetricsReport:
    """Aggregate report over a duplicate-free rule list.

    Coverage and support are normalized by the transaction count; rules with
    an antecedent of support 0 are excluded from the averages and tallied in
    undefined_rules. An empty (or fully undefined) rule list reports zeros
    with the `empty` flag set.
    """
    if db.n_transactions == 0:
        raise TabarmError("cannot evaluate rules against an empty transaction set")
    keys = [(r.antecedent, r.consequent) for r in rules]
    if len(set(keys)) != len(keys):
        raise TabarmError("rule list contains duplicates")
    index = _BitmaskIndex(db)
    n = index.n
    cover_cache: dict[tuple, int] = {}
    union = 0
    coverage_sum = 0.0
    support_sum = 0.0
    confidence_sum = 0.0
    zhang_sum = 0.0
    scorable = 0
    undefined = 0
    for rule in rules:
        cover = cover_cache.setdefault(rule.antecedent, index.antecedent_mask(rule))
        union |= cover
        if not cover:
            undefined += 1
            continue
        y_mask = index.item_mask.get(rule.consequent, 0)
        n_cover = cover.bit_count()
        both = (cover & y_mask).bit_count()
        coverage_sum += n_cover / n
        support_sum += both / n
        confidence_sum += both / n_cover
        zhang_sum += _zhang_from_masks(index, cover, y_mask)
        scorable += 1
    if scorable == 0:
        return RuleMetricsReport(
            rule_count=len(rules),
            avg_coverage=0.0,
            avg_support=0.0,
            avg_confidence=0.0,
            total_data_coverage=union.bit_count() / n,
            avg_zhang=0.0,
            exec_seconds=exec_seconds,
            empty=True,
            undefined_rules=undefined,
        )
    return RuleMetricsReport(
        rule_count=len(rules),
        avg_coverage=coverage_sum / scorable,
        avg_support=support_sum / scorable,
        avg_confidence=confidence_sum / scorable,
        total_data_coverage=union.bit_count() / n,
        avg_zhang=zhang_sum / scorable,
        exec_seconds=exec_seconds,
        empty=False,
        undefined_rules=undefined,
    )
