import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from conewish.poset import Poset, decomposition_example, n_poset

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.filter_too_much, HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def posets(draw, max_size=7, density=0.35):
    """Random posets given by a random DAG on 1..n (edges i -> j, i < j)."""
    n = draw(st.integers(1, max_size))
    labels = [str(k + 1) for k in range(n)]
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if draw(st.floats(0, 1)) < density:
                edges.append((labels[i], labels[j]))
    perm = draw(st.permutations(labels))
    relabel = dict(zip(labels, perm))
    return Poset.from_cover_edges(perm, [(relabel[a], relabel[b]) for a, b in edges])


def f_posets(max_size=7):
    return posets(max_size=max_size).filter(lambda p: p.satisfies_condition_F())


def random_f_posets(count, seed=0, max_size=7, density=0.35):
    """A deterministic list of distinct (F)-posets, for non-hypothesis loops."""
    rng = np.random.default_rng(seed)
    out, seen = [], set()
    while len(out) < count:
        n = int(rng.integers(2, max_size + 1))
        labels = [str(k + 1) for k in range(n)]
        edges = [(labels[i], labels[j]) for i in range(n) for j in range(i + 1, n)
                 if rng.random() < density]
        p = Poset.from_cover_edges(labels, edges)
        if p.satisfies_condition_F() and p not in seen:
            seen.add(p)
            out.append(p)
    return out


def named_posets():
    return {
        "singleton": Poset.chain(1),
        "chain3": Poset.chain(3),
        "chain5": Poset.chain(5),
        "antichain3": Poset.antichain(3),
        "n_poset": n_poset(),
        "decomposition": decomposition_example(),
        "star4": Poset.star(4),
        "star6": Poset.star(6),
        "tree": Poset.from_cover_edges("abcdef", [("a", "b"), ("a", "c"), ("c", "d"), ("c", "e"),
                                                  ("f", "e")]),
    }


@pytest.fixture
def npos():
    return n_poset()


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def random_cone_array(p, rng, size=None):
    """X = T T* for a random lower T with positive diagonal."""
    shape = (len(p), len(p)) if size is None else (size, len(p), len(p))
    t = rng.standard_normal(shape) * p.lower_mask
    d = rng.uniform(0.5, 2.0, size=shape[:-1])
    idx = np.arange(len(p))
    t[..., idx, idx] = d
    return (t @ np.swapaxes(t, -1, -2)) * p.mask, t


# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
