"""Shared generators for randomized tests."""

import numpy as np
import pytest

from semrank.logs import ResultRecord, SearchSession

_VOCAB = [f"w{i}" for i in range(40)]


def random_session(rng: np.random.Generator, sid: str, force_click: bool = False) -> SearchSession:
    """One session with 1-10 results, ~35% click rate, occasional duplicate titles."""
    n = int(rng.integers(1, 11))
    query = tuple(_VOCAB[i] for i in rng.integers(0, len(_VOCAB), size=int(rng.integers(1, 4))))
    titles = []
    for _ in range(n):
        if titles and rng.random() < 0.08:
            titles.append(titles[int(rng.integers(len(titles)))])
        else:
            k = int(rng.integers(1, 5))
            titles.append(tuple(_VOCAB[i] for i in rng.integers(0, len(_VOCAB), size=k)))
    clicked = rng.random(n) < 0.35
    if force_click and not clicked.any():
        clicked[int(rng.integers(n))] = True
    results = tuple(
        ResultRecord(title=titles[i], rank=i + 1, clicked=bool(clicked[i])) for i in range(n)
    )
    return SearchSession(session_id=sid, query=query, results=results)


@pytest.fixture
def make_sessions():
    """Factory: make_sessions(count, seed, force_click=False) -> list[SearchSession]."""

    def _make(count: int, seed: int = 0, force_click: bool = False):
        rng = np.random.default_rng(seed)
        return [random_session(rng, f"s{i:05d}", force_click) for i in range(count)]

    return _make
