"""JSON Lines serialization of rules.

Wire format, one object per line:
{"antecedent":[{"column":...,"value":...},...],"consequent":{"column":...,"value":...},
 "support":...,"confidence":...}
with an extra "source":"aerial" field on autoencoder-extracted rules.
"""

from __future__ import annotations

import json
from typing import IO, Iterable

from .miners import Rule
from .tabular import Item


def rule_to_dict(rule: Rule, source: str | None = None) -> dict:
    body = {
        "antecedent": [{"column": i.column, "value": i.value} for i in rule.antecedent],
        "consequent": {"column": rule.consequent.column, "value": rule.consequent.value},
        "support": rule.support,
        "confidence": rule.confidence,
    }
    if source is not None:
        body["source"] = source
    return body


def rule_from_dict(body: dict) -> Rule:
    return Rule(
        antecedent=tuple(Item(e["column"], e["value"]) for e in body["antecedent"]),
        consequent=Item(body["consequent"]["column"], body["consequent"]["value"]),
        support=body.get("support"),
        confidence=body.get("confidence"),
    )


def write_rules_jsonl(rules: Iterable[Rule], fh: IO[str], source: str | None = None) -> None:
    for rule in rules:
        fh.write(json.dumps(rule_to_dict(rule, source), separators=(",", ":")))
        fh.write("\n")


def save_rules_jsonl(rules: Iterable[Rule], path: str, source: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        write_rules_jsonl(rules, fh, source)


def load_rules_jsonl(path: str) -> list[Rule]:
    rules = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rules.append(rule_from_dict(json.loads(line)))
    return rules
