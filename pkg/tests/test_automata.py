from itertools import product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opaque_planner.automata import (
    AlphabetMismatchError,
    Dfa,
    IncompleteDfaError,
    Nfa,
    complete,
    determinize,
    dfa_from_dict,
    dfa_to_dict,
    dfa_to_nfa,
    intersect,
    minimize,
    nfa_from_dict,
    nfa_to_dict,
)

AB = ("a", "b")


def words_up_to(letters, max_len):
    for n in range(max_len + 1):
        yield from product(letters, repeat=n)


def simple_dfa():
    # accepts "a" followed by anything; incomplete on purpose
    return Dfa(
        alphabet=AB,
        transitions={(0, "a"): 1, (1, "a"): 1, (1, "b"): 1},
        initial=0,
        accepting=frozenset({1}),
        state_names=("start", "seen"),
    )


class TestComplete:
    def test_adds_rejecting_sink(self):
        dfa = simple_dfa()
        done = complete(dfa)
        assert done.n_states == 3
        assert done.is_complete()
        for word in words_up_to(AB, 5):
            assert done.accepts(word) == dfa.accepts(word)

    def test_complete_is_identity_when_total(self):
        done = complete(simple_dfa())
        assert complete(done) is done

    def test_sink_is_rejecting(self):
        done = complete(simple_dfa(), sink_label="dead")
        sink = done.state_names.index("dead")
        assert sink not in done.accepting
        assert all(done.step(sink, l) == sink for l in done.alphabet)


def nfas(n_states=4, letters=AB):
    idx = st.integers(0, n_states - 1)
    return st.builds(
        lambda trans, inits, acc: Nfa(
            alphabet=letters,
            transitions={
                (q, l): frozenset(ts) for (q, l), ts in trans.items() if ts
            },
            initials=frozenset(inits or [0]),
            accepting=frozenset(acc),
            state_names=tuple(f"n{i}" for i in range(n_states)),
        ),
        st.dictionaries(
            st.tuples(idx, st.sampled_from(letters)), st.sets(idx, max_size=3),
            max_size=10,
        ),
        st.sets(idx, max_size=2),
        st.sets(idx, max_size=3),
    )


class TestDeterminize:
    def test_deterministic_input_keeps_language(self):
        dfa = complete(simple_dfa())
        det = determinize(dfa_to_nfa(dfa))
        for word in words_up_to(AB, 6):
            assert det.accepts(word) == dfa.accepts(word)

    def test_result_complete(self):
        nfa = Nfa(
            alphabet=AB,
            transitions={(0, "a"): frozenset({0, 1})},
            initials=frozenset({0}),
            accepting=frozenset({1}),
            state_names=("x", "y"),
        )
        det = determinize(nfa)
        assert det.is_complete()

    def test_unreachable_accepting_dropped(self):
        nfa = Nfa(
            alphabet=AB,
            transitions={(0, "a"): frozenset({0})},
            initials=frozenset({0}),
            accepting=frozenset({2}),
            state_names=("x", "y", "z"),
        )
        det = determinize(nfa)
        assert not det.accepting

    @settings(max_examples=80, deadline=None)
    @given(nfas())
    def test_language_preserved(self, nfa):
        det = determinize(nfa)
        for word in words_up_to(AB, 5):
            assert det.accepts(word) == nfa.accepts(word)


class TestMinimize:
    def test_requires_complete(self):
        with pytest.raises(IncompleteDfaError):
            minimize(simple_dfa())

    def test_merges_bisimilar_accepting_pair(self):
        dfa = Dfa(
            alphabet=AB,
            transitions={
                (0, "a"): 1, (0, "b"): 2,
                (1, "a"): 1, (1, "b"): 1,
                (2, "a"): 2, (2, "b"): 2,
            },
            initial=0,
            accepting=frozenset({1, 2}),
            state_names=("q0", "acc1", "acc2"),
        )
        small = minimize(dfa)
        assert small.n_states == 2

    def test_minimal_fixed_point(self):
        dfa = complete(simple_dfa())
        once = minimize(dfa)
        twice = minimize(once)
        # start, accepting loop, dead sink
        assert once.n_states == twice.n_states == 3

    @settings(max_examples=80, deadline=None)
    @given(nfas())
    def test_language_preserved(self, nfa):
        det = determinize(nfa)
        small = minimize(det)
        assert small.n_states <= det.n_states
        for word in words_up_to(AB, 5):
            assert small.accepts(word) == det.accepts(word)


class TestIntersect:
    def universal(self):
        return Nfa(
            alphabet=AB,
            transitions={(0, l): frozenset({0}) for l in AB},
            initials=frozenset({0}),
            accepting=frozenset({0}),
            state_names=("u",),
        )

    def empty_language(self):
        return Nfa(
            alphabet=AB,
            transitions={},
            initials=frozenset({0}),
            accepting=frozenset(),
            state_names=("e",),
        )

    def test_with_universal(self):
        nfa = dfa_to_nfa(complete(simple_dfa()))
        both = intersect(nfa, self.universal())
        for word in words_up_to(AB, 5):
            assert both.accepts(word) == nfa.accepts(word)

    def test_with_empty(self):
        nfa = dfa_to_nfa(complete(simple_dfa()))
        both = intersect(nfa, self.empty_language())
        assert not any(both.accepts(w) for w in words_up_to(AB, 5))

    def test_alphabet_mismatch(self):
        other = Nfa(
            alphabet=("a", "c"),
            transitions={},
            initials=frozenset({0}),
            accepting=frozenset(),
            state_names=("x",),
        )
        with pytest.raises(AlphabetMismatchError):
            intersect(self.universal(), other)

    @settings(max_examples=60, deadline=None)
    @given(nfas(), nfas())
    def test_language_is_intersection(self, a, b):
        both = intersect(a, b)
        for word in words_up_to(AB, 4):
            assert both.accepts(word) == (a.accepts(word) and b.accepts(word))


class TestJson:
    def test_dfa_round_trip(self):
        dfa = complete(simple_dfa())
        doc = dfa_to_dict(dfa, "plain")
        back = dfa_from_dict(doc)
        for word in words_up_to(AB, 5):
            assert back.accepts(word) == dfa.accepts(word)

    def test_nfa_round_trip(self):
        nfa = Nfa(
            alphabet=AB,
            transitions={(0, "a"): frozenset({0, 1})},
            initials=frozenset({0}),
            accepting=frozenset({1}),
            state_names=("x", "y"),
        )
        back = nfa_from_dict(nfa_to_dict(nfa, "plain"))
        for word in words_up_to(AB, 5):
            assert back.accepts(word) == nfa.accepts(word)

    def test_observation_letters_survive(self, opaque_dfa):
        back = dfa_from_dict(dfa_to_dict(opaque_dfa, "observations"))
        assert back.alphabet == opaque_dfa.alphabet
        assert back.accepting == opaque_dfa.accepting
        assert back.transitions == opaque_dfa.transitions
