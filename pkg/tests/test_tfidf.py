import math
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chainvit import tfidf
from chainvit.container import ContainerError
from oracles import naive_tfidf


def test_fit_hand_values():
    m = tfidf.fit([["PUSH1", "ADD"], ["PUSH1"]])
    assert m.vocabulary == ("ADD", "PUSH1")
    assert m.idf[1] == pytest.approx(math.log(2 / 3))
    assert m.idf[1] == pytest.approx(-0.4055, abs=1e-4)
    assert m.idf[0] == 0.0
    assert m.corpus_size == 2


def test_single_document():
    m = tfidf.fit([["ADD"]])
    assert m.vocabulary == ("ADD",)
    assert m.idf[0] == pytest.approx(-0.6931, abs=1e-4)


def test_term_in_one_of_n_docs():
    corpus = [["X"]] + [["Y"]] * 9
    m = tfidf.fit(corpus)
    assert m.idf[m.vocabulary.index("X")] == pytest.approx(math.log(10 / 2))


def test_transform_hand_value():
    m = tfidf.fit([["PUSH1", "ADD"], ["PUSH1"]])
    v = m.transform(["PUSH1", "PUSH1", "ADD"])
    np.testing.assert_allclose(v, [0.0, 2 * math.log(2 / 3)])
    assert v[1] == pytest.approx(-0.8109, abs=1e-4)


def test_transform_empty_and_unknown():
    m = tfidf.fit([["PUSH1", "ADD"], ["PUSH1"]])
    assert np.array_equal(m.transform([]), np.zeros(2))
    assert np.array_equal(m.transform(["SELFDESTRUCT", "NOPE"]), np.zeros(2))


def test_empty_corpus_rejected():
    with pytest.raises(tfidf.TfidfFitError):
        tfidf.fit([])


def test_negative_idf_preserved():
    m = tfidf.fit([["A"], ["A"], ["A"]])
    assert m.idf[0] < 0


docs = st.lists(st.sampled_from([f"T{i}" for i in range(20)]), max_size=15)


@given(st.lists(docs, min_size=1, max_size=10), docs, st.integers(1, 5))
def test_linear_in_counts(corpus, seq, k):
    if not any(corpus):
        return
    m = tfidf.fit(corpus)
    np.testing.assert_allclose(m.transform(seq * k), k * m.transform(seq), atol=1e-12)


def test_random_corpora_match_naive_oracle():
    rng = random.Random(9)
    terms = [f"OP{i}" for i in range(20)]
    for _ in range(50):
        corpus = [rng.choices(terms, k=rng.randrange(1, 12)) for _ in range(rng.randrange(1, 11))]
        doc = rng.choices(terms, k=rng.randrange(0, 15))
        m = tfidf.fit(corpus)
        vocab, expected = naive_tfidf(corpus, doc)
        assert list(m.vocabulary) == vocab
        np.testing.assert_allclose(m.transform(doc), expected, rtol=0, atol=1e-9)


def test_save_load_bit_exact(tmp_path):
    m = tfidf.fit([["PUSH1", "ADD"], ["PUSH1", "SSTORE"], ["CALL"]])
    p = tmp_path / "t.bin"
    m.save(p)
    loaded = tfidf.TfidfModel.load(p)
    assert loaded.vocabulary == m.vocabulary
    assert loaded.idf.tobytes() == m.idf.tobytes()
    assert loaded.corpus_size == 3 and loaded.log_base == "e"
    assert p.read_bytes().startswith(b"CHAINVIT tfidf v1\n")


def test_load_rejects_version_and_corruption(tmp_path):
    m = tfidf.fit([["PUSH1"]])
    p = tmp_path / "t.bin"
    m.save(p)
    raw = p.read_bytes()
    (tmp_path / "v.bin").write_bytes(raw.replace(b"tfidf v1", b"tfidf v9", 1))
    with pytest.raises(ContainerError, match="unsupported"):
        tfidf.TfidfModel.load(tmp_path / "v.bin")
    (tmp_path / "c.bin").write_bytes(raw[:-3] + b"\x00\x00\x01")
    with pytest.raises(ContainerError, match="checksum"):
        tfidf.TfidfModel.load(tmp_path / "c.bin")
    (tmp_path / "x.bin").write_bytes(b"garbage")
    with pytest.raises(ContainerError):
        tfidf.TfidfModel.load(tmp_path / "x.bin")
