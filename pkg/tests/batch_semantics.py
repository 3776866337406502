"""Batched direct evaluation of temporal formulas on every word of a given
length, used as the translator oracle at acceptance scale.

This walks the satisfaction relation column by column over a matrix of
words, exactly like the per-word evaluator, and shares no code with the
progression-based DFA construction it checks.
"""

from itertools import product

import numpy as np

from opaque_planner.ltlf import (
    Always,
    And,
    Eventually,
    FalseF,
    Formula,
    Next,
    Not,
    Or,
    Prop,
    TrueF,
    Until,
    eval_empty,
)


def all_letters(props: tuple[str, ...]) -> list[frozenset]:
    return [
        frozenset(p for p, on in zip(props, bits) if on)
        for bits in product((False, True), repeat=len(props))
    ]


def words_matrix(n_letters: int, length: int) -> np.ndarray:
    """Every word of the given length as rows of letter indices."""
    if length == 0:
        return np.zeros((1, 0), dtype=np.int8)
    grids = np.meshgrid(*([np.arange(n_letters)] * length), indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=1)


def batch_evaluate(f: Formula, letters: list[frozenset], words: np.ndarray) -> np.ndarray:
    """Truth of ``f`` at position 0 for every row of ``words``."""
    n_words, n = words.shape
    if n == 0:
        return np.full(n_words, eval_empty(f))
    memo: dict[Formula, np.ndarray] = {}

    def table(g: Formula) -> np.ndarray:
        got = memo.get(g)
        if got is not None:
            return got
        if isinstance(g, TrueF):
            t = np.ones((n_words, n), dtype=bool)
        elif isinstance(g, FalseF):
            t = np.zeros((n_words, n), dtype=bool)
        elif isinstance(g, Prop):
            holds = np.array([g.name in letter for letter in letters])
            t = holds[words]
        elif isinstance(g, Not):
            t = ~table(g.arg)
        elif isinstance(g, And):
            t = np.ones((n_words, n), dtype=bool)
            for part in g.args:
                t &= table(part)
        elif isinstance(g, Or):
            t = np.zeros((n_words, n), dtype=bool)
            for part in g.args:
                t |= table(part)
        elif isinstance(g, Next):
            sub = table(g.arg)
            t = np.zeros((n_words, n), dtype=bool)
            t[:, :-1] = sub[:, 1:]
        elif isinstance(g, Until):
            left, right = table(g.left), table(g.right)
            t = np.zeros((n_words, n), dtype=bool)
            t[:, n - 1] = right[:, n - 1]
            for i in range(n - 2, -1, -1):
                t[:, i] = right[:, i] | (left[:, i] & t[:, i + 1])
        elif isinstance(g, Eventually):
            sub = table(g.arg)
            t = np.zeros((n_words, n), dtype=bool)
            t[:, n - 1] = sub[:, n - 1]
            for i in range(n - 2, -1, -1):
                t[:, i] = sub[:, i] | t[:, i + 1]
        elif isinstance(g, Always):
            sub = table(g.arg)
            t = np.zeros((n_words, n), dtype=bool)
            t[:, n - 1] = sub[:, n - 1]
            for i in range(n - 2, -1, -1):
                t[:, i] = sub[:, i] & t[:, i + 1]
        else:
            raise TypeError(f"not a formula: {g!r}")
        memo[g] = t
        return t

    return table(f)[:, 0].copy()


def batch_dfa_accepts(dfa, letters: list[frozenset], words: np.ndarray) -> np.ndarray:
    """DFA acceptance for every row, via a dense transition table."""
    n_words, n = words.shape
    table = np.empty((dfa.n_states, len(letters)), dtype=np.int32)
    for q in range(dfa.n_states):
        for j, letter in enumerate(letters):
            table[q, j] = dfa.transitions[(q, letter)]
    state = np.full(n_words, dfa.initial, dtype=np.int32)
    for i in range(n):
        state = table[state, words[:, i]]
    accepting = np.zeros(dfa.n_states, dtype=bool)
    for q in dfa.accepting:
        accepting[q] = True
    return accepting[state]
