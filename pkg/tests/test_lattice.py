import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from dagseg.corpus import Sentence, build_train_vocab
from dagseg.lattice import build_automaton, build_lattice, dump_lattice, lattice_stats
from oracles import make_vocab, naive_lattice, random_case


class TestAutomaton:
    def test_matches_against_naive_scan(self):
        vocab = make_vocab(["a", "b", "ab"])
        ends, _ = build_automaton(vocab).scan("ab")
        assert ends[1] == ((1, vocab.get("a")),)
        assert ends[2] == ((1, vocab.get("b")), (2, vocab.get("ab")))

    def test_singletons_only(self):
        vocab = make_vocab(["a"])
        ends, _ = build_automaton(vocab).scan("aaa")
        assert all(e == ((1, vocab.get("a")),) for e in ends[1:])

    def test_specials_not_matched(self):
        vocab = make_vocab(["a"])
        ends, _ = build_automaton(vocab).scan("<OOV>")
        assert all(not e for e in ends)

    def test_fail_links_across_overlaps(self):
        vocab = make_vocab(["he", "she", "his", "hers"])
        ends, _ = build_automaton(vocab).scan("ushers")
        found = {(i, vocab.word(idx)) for i, e in enumerate(ends) for _, idx in e}
        assert found == {(4, "she"), (4, "he"), (6, "hers")}


class TestBuildLattice:
    def test_cab(self):
        vocab = make_vocab(["a", "b", "c", "ab"])
        lat = build_lattice("cab", build_automaton(vocab), vocab)
        assert [sorted(l for l, _ in e) for e in lat.fwd[1:]] == [[1], [1], [1, 2]]
        assert [sorted(l for l, _ in e) for e in lat.bwd[1 : lat.n + 1]] == [[1], [1, 2], [1]]
        assert lattice_stats(lat) == {1: 3, 2: 1}

    def test_unseen_character(self):
        vocab = make_vocab(["a"])
        lat = build_lattice("Q", build_automaton(vocab), vocab)
        assert lat.fwd[1] == [(1, vocab.oov_id)]
        assert lat.bwd[1] == [(1, vocab.oov_id)]

    def test_in_vocab_chars_do_not_make_a_word(self):
        vocab = make_vocab(["a", "b"])
        lat = build_lattice("ab", build_automaton(vocab), vocab)
        assert lattice_stats(lat) == {1: 2}

    def test_node_with_three_incoming_words(self):
        # nodes 1..14 with node 1 = <BOS>: here position k is node k+1, and
        # node 5's edges from nodes 1, 3, 4 are words x_{1:4}, x_{3:4}, x_4
        chars = tuple("ABCDEF")
        vocab = make_vocab(["A", "B", "C", "D", "E", "F", "ABCD", "CD"])
        lat = build_lattice(chars, build_automaton(vocab), vocab)
        edges = lat.fwd[4]
        assert [(l, 4 - l, vocab.word(idx)) for l, idx in edges] == [
            (1, 3, "D"),
            (2, 2, "CD"),
            (4, 0, "ABCD"),
        ]

    def test_max_word_len_cap(self):
        vocab = make_vocab(["a", "b", "ab", "aba", "abab"])
        full = build_lattice("abab", build_automaton(vocab), vocab)
        capped = build_lattice("abab", build_automaton(vocab), vocab, max_len=2)
        assert max(lattice_stats(full)) == 4
        assert max(lattice_stats(capped)) == 2
        assert naive_lattice("abab", vocab, 2) == (capped.fwd, capped.bwd)

    def test_random_against_naive(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            vocab, chars = random_case(rng)
            lat = build_lattice(chars, build_automaton(vocab), vocab)
            assert (lat.fwd, lat.bwd) == naive_lattice(chars, vocab)

    def test_invariants(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            vocab, chars = random_case(rng)
            lat = build_lattice(chars, build_automaton(vocab), vocab)
            n = lat.n
            for i in range(1, n + 1):
                assert lat.fwd[i] and lat.fwd[i][0][0] == 1
                assert lat.bwd[i] and lat.bwd[i][0][0] == 1
                assert lat.fwd[i] == sorted(set(lat.fwd[i]))
                assert lat.bwd[i] == sorted(set(lat.bwd[i]))
                assert all(i - l >= 0 for l, _ in lat.fwd[i])
                assert all(i + l <= n + 1 for l, _ in lat.bwd[i])
            stats = lattice_stats(lat)
            assert stats[1] == n
            assert max(stats) <= max(1, build_automaton(vocab).max_len)

    def test_backward_edges_are_words_starting_at_i(self):
        rng = np.random.default_rng(11)
        vocab, chars = random_case(rng, max_words=50, max_n=20)
        lat = build_lattice(chars, build_automaton(vocab), vocab)
        for i in range(1, lat.n + 1):
            for l, idx in lat.bwd[i]:
                word = "".join(chars[i - 1 : i - 1 + l])
                assert idx == vocab.get(word) or (l == 1 and idx == vocab.oov_id)

    def test_transitions_linear(self):
        vocab = make_vocab(["a", "aa", "aaa", "aab", "ab", "b", "ba", "bab"])
        automaton = build_automaton(vocab)
        rng = np.random.default_rng(0)
        for n in (10, 100, 1000, 5000):
            chars = tuple(rng.choice(["a", "b", "c"], size=n))
            lat = build_lattice(chars, automaton, vocab)
            assert lat.transitions <= 2 * n


def test_dump():
    vocab = build_train_vocab([Sentence.from_words(["ab", "c"])])
    lat = build_lattice("cab", build_automaton(vocab), vocab)
    assert dump_lattice(lat, vocab) == "1 1 c\n2 1 a\n3 1 b\n3 2 ab\n"
    assert dump_lattice(lat, vocab, "bwd") == "1 1 c\n2 1 a\n2 2 ab\n3 1 b\n"


words_st = st.lists(st.text(alphabet="abc", min_size=1, max_size=5), max_size=30)


@given(words=words_st, sentence=st.text(alphabet="abcd", min_size=1, max_size=30),
       cap=st.one_of(st.none(), st.integers(1, 5)))
@settings(max_examples=200, deadline=None)
def test_lattice_property(words, sentence, cap):
    vocab = make_vocab(sorted(set(words)))
    lat = build_lattice(tuple(sentence), build_automaton(vocab), vocab, cap)
    assert (lat.fwd, lat.bwd) == naive_lattice(tuple(sentence), vocab, cap)
    assert lat.transitions <= 2 * len(sentence)
