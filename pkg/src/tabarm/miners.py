"""Algorithmic mining baselines: brute-force oracle, FP-Growth, ECLAT, rule assembly.

All three miners return identical results by contract: every non-empty itemset
with support >= min_support, in canonical (size, then item-id) order, with
exact supports. Threshold comparisons are done with integer counts through
exact rational arithmetic so a float min_support can never misclassify an
itemset that sits on the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

from .errors import TabarmError
from .tabular import Item, TransactionDB

BRUTE_FORCE_ITEM_CAP = 20


@dataclass(frozen=True)
class Itemset:
    """Sorted item-id tuple with its exact occurrence count and support."""

    items: tuple[int, ...]
    support: float
    count: int

    def __post_init__(self) -> None:
        if not self.items:
            raise ValueError("itemset must be non-empty")
        if tuple(sorted(set(self.items))) != self.items:
            raise ValueError("items must be sorted and duplicate-free")


@dataclass(frozen=True)
class Rule:
    """Association rule X -> y with a single-item consequent.

    support and confidence are set by the producer (miners fill them exactly;
    autoencoder extraction leaves them None until the metrics pass).
    """

    antecedent: tuple[Item, ...]
    consequent: Item
    support: float | None = None
    confidence: float | None = None
    zhang: float | None = None

    def __post_init__(self) -> None:
        if not self.antecedent:
            raise ValueError("rule needs at least one antecedent item")
        columns = [item.column for item in self.antecedent]
        if len(columns) != len(set(columns)):
            raise ValueError("antecedent holds two items of one column")
        if self.consequent.column in columns:
            raise ValueError("consequent column appears in the antecedent")


def min_count_for(min_support: float, n_transactions: int) -> int:
    """Smallest count c with c/n >= min_support, computed exactly."""
    if not 0.0 < min_support <= 1.0:
        raise ValueError(f"min_support must be in (0, 1], got {min_support}")
    return max(1, math.ceil(Fraction(min_support) * n_transactions))


def _canonical(found: list[tuple[tuple[int, ...], int]], n: int) -> list[Itemset]:
    found.sort(key=lambda entry: (len(entry[0]), entry[0]))
    return [Itemset(items=items, support=count / n, count=count) for items, count in found]


def brute_force_frequent(
    db: TransactionDB, min_support: float, max_size: int | None = None
) -> list[Itemset]:
    """Exhaustive oracle: enumerate every itemset and count it directly.

    Refuses universes above BRUTE_FORCE_ITEM_CAP items (exponential
    enumeration). Counting uses per-item transaction bitmasks, but there is
    no pruning of any kind: every candidate subset is materialized and
    counted, independent of the FP-tree / tidset code paths.
    """
    m = len(db.items)
    if m > BRUTE_FORCE_ITEM_CAP:
        raise TabarmError(
            f"brute-force oracle capped at {BRUTE_FORCE_ITEM_CAP} items, got {m}"
        )
    n = db.n_transactions
    if n == 0:
        return []
    needed = min_count_for(min_support, n)
    masks = [0] * m
    for tid, txn in enumerate(db.transactions):
        bit = 1 << tid
        for item in txn:
            masks[item] |= bit
    top = m if max_size is None else min(max_size, m)
    found: list[tuple[tuple[int, ...], int]] = []
    for size in range(1, top + 1):
        for combo in combinations(range(m), size):
            acc = masks[combo[0]]
            for item in combo[1:]:
                acc &= masks[item]
            count = acc.bit_count()
            if count >= needed:
                found.append((combo, count))
    return _canonical(found, n)


class _FPNode:
    __slots__ = ("item", "count", "parent", "children")

    def __init__(self, item: int | None, parent: "_FPNode | None"):
        self.item = item
        self.count = 0
        self.parent = parent
        self.children: dict[int, _FPNode] = {}


def _build_fp_tree(
    weighted: list[tuple[list[int], int]], min_count: int
) -> tuple[dict[int, list[_FPNode]], dict[int, int]]:
    counts: dict[int, int] = {}
    for items, weight in weighted:
        for item in items:
            counts[item] = counts.get(item, 0) + weight
    counts = {item: c for item, c in counts.items() if c >= min_count}
    # Descending support, ties by item id: the standard compactness ordering.
    rank = {
        item: pos
        for pos, item in enumerate(sorted(counts, key=lambda i: (-counts[i], i)))
    }
    root = _FPNode(None, None)
    header: dict[int, list[_FPNode]] = {item: [] for item in counts}
    for items, weight in weighted:
        path = sorted((i for i in items if i in rank), key=rank.__getitem__)
        node = root
        for item in path:
            child = node.children.get(item)
            if child is None:
                child = _FPNode(item, node)
                node.children[item] = child
                header[item].append(child)
            child.count += weight
            node = child
    return header, counts


def _fp_mine(
    header: dict[int, list[_FPNode]],
    counts: dict[int, int],
    suffix: tuple[int, ...],
    min_count: int,
    max_size: int | None,
    out: list[tuple[tuple[int, ...], int]],
) -> None:
    for item in sorted(header):
        itemset = tuple(sorted(suffix + (item,)))
        out.append((itemset, counts[item]))
        if max_size is not None and len(itemset) >= max_size:
            continue
        base: list[tuple[list[int], int]] = []
        for node in header[item]:
            path: list[int] = []
            parent = node.parent
            while parent is not None and parent.item is not None:
                path.append(parent.item)
                parent = parent.parent
            if path:
                base.append((path, node.count))
        if base:
            sub_header, sub_counts = _build_fp_tree(base, min_count)
            if sub_header:
                _fp_mine(sub_header, sub_counts, itemset, min_count, max_size, out)


def fpgrowth_frequent(
    db: TransactionDB, min_support: float, max_size: int | None = None
) -> list[Itemset]:
    """FP-tree mining with conditional-pattern-base recursion."""
    n = db.n_transactions
    needed = min_count_for(min_support, n if n else 1)
    if n == 0:
        return []
    weighted = [(list(txn), 1) for txn in db.transactions]
    header, counts = _build_fp_tree(weighted, needed)
    found: list[tuple[tuple[int, ...], int]] = []
    _fp_mine(header, counts, (), needed, max_size, found)
    return _canonical(found, n)


def eclat_frequent(
    db: TransactionDB, min_support: float, max_size: int | None = None
) -> list[Itemset]:
    """Vertical mining: depth-first tidset intersection over prefix classes."""
    n = db.n_transactions
    needed = min_count_for(min_support, n if n else 1)
    if n == 0:
        return []
    tidsets: dict[int, set[int]] = {}
    for tid, txn in enumerate(db.transactions):
        for item in txn:
            tidsets.setdefault(item, set()).add(tid)
    candidates = [
        (item, tids) for item, tids in sorted(tidsets.items()) if len(tids) >= needed
    ]
    found: list[tuple[tuple[int, ...], int]] = []

    def descend(prefix: tuple[int, ...], tail: list[tuple[int, set[int]]]) -> None:
        for pos, (item, tids) in enumerate(tail):
            itemset = prefix + (item,)
            found.append((itemset, len(tids)))
            if max_size is not None and len(itemset) >= max_size:
                continue
            extensions = []
            for other, other_tids in tail[pos + 1 :]:
                shared = tids & other_tids
                if len(shared) >= needed:
                    extensions.append((other, shared))
            if extensions:
                descend(itemset, extensions)

    descend((), candidates)
    return _canonical(found, n)


def generate_rules(
    frequent: list[Itemset],
    db: TransactionDB,
    min_conf: float,
    max_antecedents: int,
) -> list[Rule]:
    """Assemble single-consequent rules from a support-closed itemset list.

    Every frequent itemset Z with 2 <= |Z| <= max_antecedents + 1 yields one
    candidate per member y: Z \\ {y} -> y, kept when its exact confidence
    count(Z)/count(Z \\ {y}) reaches min_conf.
    """
    if max_antecedents < 1:
        raise ValueError("max_antecedents must be >= 1")
    if not 0.0 <= min_conf <= 1.0:
        raise ValueError(f"min_conf must be in [0, 1], got {min_conf}")
    counts = {fs.items: fs.count for fs in frequent}
    for fs in frequent:
        if len(fs.items) < 2:
            continue
        for drop in range(len(fs.items)):
            subset = fs.items[:drop] + fs.items[drop + 1 :]
            if subset not in counts:
                named = tuple(db.items[i] for i in fs.items)
                raise TabarmError(
                    f"frequent list is not support-closed: {named} is listed "
                    f"but its subset {tuple(db.items[i] for i in subset)} is not"
                )
    n = db.n_transactions
    # count/base >= p/q cross-multiplied: exact without per-candidate Fractions
    conf_floor = Fraction(min_conf)
    p, q = conf_floor.numerator, conf_floor.denominator
    rules: list[tuple[tuple[int, ...], int, float, float]] = []
    for fs in frequent:
        size = len(fs.items)
        if not 2 <= size <= max_antecedents + 1:
            continue
        for drop in range(size):
            consequent = fs.items[drop]
            antecedent = fs.items[:drop] + fs.items[drop + 1 :]
            base = counts[antecedent]
            if fs.count * q >= p * base:
                rules.append((antecedent, consequent, fs.count / n, fs.count / base))
    rules.sort(key=lambda r: (r[0], r[1]))
    return [
        Rule(
            antecedent=tuple(db.items[i] for i in antecedent),
            consequent=db.items[consequent],
            support=support,
            confidence=confidence,
        )
        for antecedent, consequent, support, confidence in rules
    ]
