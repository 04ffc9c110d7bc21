import numpy as np
import pytest

from tabarm.tabular import Item, TransactionDB


def db_from_sets(item_names, transactions):
    """TransactionDB over single-category columns named by letters.

    transactions: iterable of iterables of item names, e.g. ["abc", "ab"].
    """
    items = tuple(Item(name, "1") for name in item_names)
    index = {name: i for i, name in enumerate(item_names)}
    return TransactionDB(
        items=items,
        transactions=tuple(frozenset(index[n] for n in txn) for txn in transactions),
    )


@pytest.fixture
def db4():
    """t1={a,b,c}, t2={a,b}, t3={a,c}, t4={b,c}."""
    return db_from_sets("abc", ["abc", "ab", "ac", "bc"])


def random_db(rng: np.random.Generator, max_items: int = 12, max_txns: int = 64):
    """Random market-basket style TransactionDB for oracle-equivalence tests."""
    n_items = int(rng.integers(1, max_items + 1))
    n_txns = int(rng.integers(1, max_txns + 1))
    names = [f"i{k}" for k in range(n_items)]
    p = rng.uniform(0.1, 0.7)
    txns = []
    for _ in range(n_txns):
        present = rng.random(n_items) < p
        txns.append([names[k] for k in range(n_items) if present[k]])
    return db_from_sets(names, txns)
