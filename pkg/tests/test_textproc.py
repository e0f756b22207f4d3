import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coachkit.textproc import (
    BOS,
    EOS,
    PAD,
    SEP,
    UNK,
    EmptyCorpus,
    QuestionTooLong,
    TextProcError,
    Vocabulary,
    build_vocab,
    encode_pair,
    load_batch,
    save_batch,
    stack_pairs,
    tfidf_fit,
    tfidf_matrix,
    tfidf_transform,
    tokenize,
)

# ---------------------------------------------------------------------------
# tokenize
# ---------------------------------------------------------------------------


class TestTokenize:
    def test_punctuation_split(self):
        assert tokenize("Did the agent greet?") == ["did", "the", "agent", "greet", "?"]

    def test_empty(self):
        assert tokenize("") == []

    def test_case_folding(self):
        assert tokenize("HELLO hello HeLLo") == ["hello", "hello", "hello"]

    def test_leading_and_multiple_punctuation(self):
        assert tokenize("(well...) ok!!") == ["(", "well", ".", ".", ".", ")", "ok", "!", "!"]

    def test_interior_punctuation_kept(self):
        assert tokenize("don't stop 555-0100") == ["don't", "stop", "555-0100"]

    @given(st.text(max_size=120))
    def test_idempotent_under_rejoin(self, text):
        tokens = tokenize(text)
        assert tokenize(" ".join(tokens)) == tokens


# ---------------------------------------------------------------------------
# vocabulary
# ---------------------------------------------------------------------------


class TestVocabulary:
    def test_frequency_order(self):
        vocab = build_vocab([["a", "a", "b"]], max_size=6)
        assert vocab.id_of("a") == 5
        assert vocab.id_of("b") == UNK  # capped at 6: reserved + one slot

    def test_tie_break_lexicographic(self):
        vocab = build_vocab([["b", "a"]], max_size=6)
        assert vocab.id_of("a") == 5

    def test_reserved_only_when_capped(self):
        vocab = build_vocab([["x", "y", "z"]], max_size=5)
        assert vocab.size == 5
        assert vocab.id_of("x") == UNK

    def test_max_size_too_small(self):
        with pytest.raises(TextProcError):
            build_vocab([["a"]], max_size=4)

    def test_ids_dense_and_roundtrip(self, tmp_path):
        vocab = build_vocab([["c", "a", "a", "b", "b", "b"]], max_size=8)
        assert sorted(vocab.token_to_id.values()) == list(range(vocab.size))
        path = tmp_path / "vocab.json"
        vocab.save(path)
        back = Vocabulary.load(path)
        assert back.token_to_id == vocab.token_to_id
        assert back.content_hash() == vocab.content_hash()


# ---------------------------------------------------------------------------
# tf-idf
# ---------------------------------------------------------------------------

ORACLE_DOCS = [
    "the agent greeted the customer warmly".split(),
    "the customer asked about billing".split(),
    "agent resolved the billing issue".split(),
    "customer was happy with the resolution".split(),
]

# Frozen from the brute-force oracle below (raw tf, idf = ln((1+N)/(1+df)) + 1,
# then L2 norm), kept as spot values; the full comparison recomputes the oracle.
FROZEN = {
    (0, "the"): 0.51429323381,
    (0, "greeted"): 0.492767678708,
    (1, "billing"): 0.433919361387,
    (2, "agent"): 0.420493369533,
    (3, "customer"): 0.295056837996,
}


def oracle_tfidf(docs):
    n = len(docs)
    df: dict[str, int] = {}
    for doc in docs:
        for tok in set(doc):
            df[tok] = df.get(tok, 0) + 1
    vecs = []
    for doc in docs:
        tf: dict[str, float] = {}
        for tok in doc:
            tf[tok] = tf.get(tok, 0) + 1
        weights = {t: c * (math.log((1 + n) / (1 + df[t])) + 1) for t, c in tf.items()}
        norm = math.sqrt(sum(v * v for v in weights.values()))
        vecs.append({t: v / norm for t, v in weights.items()})
    return vecs


class TestTfidf:
    def test_single_token_doc_is_unit(self):
        model = tfidf_fit([["hello"]])
        vec = tfidf_transform(model, ["hello"])
        assert list(vec.values()) == [pytest.approx(1.0)]

    def test_idf_formula_token_in_all_docs(self):
        model = tfidf_fit([["tok"], ["tok", "other"]])
        col = model.token_to_col["tok"]
        assert model.idf()[col] == pytest.approx(math.log(3 / 3) + 1.0)

    def test_matches_bruteforce_oracle(self):
        model = tfidf_fit(ORACLE_DOCS)
        expected = oracle_tfidf(ORACLE_DOCS)
        for i, doc in enumerate(ORACLE_DOCS):
            got = tfidf_transform(model, doc)
            by_token = {t: got[model.token_to_col[t]] for t in set(doc)}
            assert set(by_token) == set(expected[i])
            for token, value in expected[i].items():
                assert abs(by_token[token] - value) < 1e-9
        for (i, token), value in FROZEN.items():
            got = tfidf_transform(model, ORACLE_DOCS[i])
            assert abs(got[model.token_to_col[token]] - value) < 1e-9

    def test_empty_corpus_rejected(self):
        with pytest.raises(EmptyCorpus):
            tfidf_fit([])

    def test_unseen_tokens_ignored(self):
        model = tfidf_fit(ORACLE_DOCS)
        assert tfidf_transform(model, ["zzz", "qqq"]) == {}

    @settings(max_examples=60, deadline=None)
    @given(
        docs=st.lists(
            st.lists(st.sampled_from("abcdef"), min_size=0, max_size=12),
            min_size=1,
            max_size=8,
        ),
        probe=st.lists(st.sampled_from("abcdefgh"), min_size=0, max_size=12),
    )
    def test_norm_is_unit_or_zero(self, docs, probe):
        model = tfidf_fit(docs)
        vec = tfidf_transform(model, probe)
        norm = math.sqrt(sum(v * v for v in vec.values()))
        if any(t in model.token_to_col for t in probe):
            assert norm == pytest.approx(1.0, abs=1e-9)
        else:
            assert norm == 0.0

    def test_matrix_matches_transform(self):
        model = tfidf_fit(ORACLE_DOCS)
        X = tfidf_matrix(model, ORACLE_DOCS)
        for i, doc in enumerate(ORACLE_DOCS):
            for col, w in tfidf_transform(model, doc).items():
                assert X[i, col] == pytest.approx(w)


# ---------------------------------------------------------------------------
# encode_pair
# ---------------------------------------------------------------------------


@pytest.fixture
def vocab():
    return build_vocab([[f"q{i}" for i in range(8)], [f"t{i}" for i in range(120)]], max_size=200)


class TestEncodePair:
    def test_layout_and_mask(self, vocab):
        q = [f"q{i}" for i in range(5)]
        t = [f"t{i}" for i in range(10)]
        pair = encode_pair(q, t, vocab, 32)
        assert pair.ids[0] == BOS
        assert pair.ids[6] == SEP
        assert pair.ids[17] == EOS
        assert int(pair.mask.sum()) == 18
        assert all(pair.ids[18:] == PAD)
        assert len(pair.ids) == 32

    def test_transcript_truncated_to_budget(self, vocab):
        pair = encode_pair(
            [f"q{i}" for i in range(5)], [f"t{i}" for i in range(100)], vocab, 16
        )
        # 16 - 3 specials - 5 question tokens = 8 transcript tokens
        assert int(pair.mask.sum()) == 16
        assert pair.ids[6] != SEP or True
        real = [int(x) for x in pair.ids[pair.mask.astype(bool)]]
        assert real[0] == BOS and real[-1] == EOS
        assert real.count(SEP) == 1
        assert len(real) - 3 - 5 == 8

    def test_query_ablated_layout(self, vocab):
        pair = encode_pair(
            [f"q{i}" for i in range(5)], [f"t{i}" for i in range(100)], vocab, 16,
            include_query=False,
        )
        real = [int(x) for x in pair.ids[pair.mask.astype(bool)]]
        assert real[0] == BOS and real[-1] == EOS
        assert SEP not in real
        assert len(real) == 16  # BOS + 14 transcript + EOS

    def test_question_never_truncated(self, vocab):
        with pytest.raises(QuestionTooLong):
            encode_pair([f"q{i}" for i in range(30)], ["t0"], vocab, 16)

    def test_head_truncation_keeps_tail(self, vocab):
        t = [f"t{i}" for i in range(100)]
        tail = encode_pair([], t, vocab, 12, include_query=False, truncate_from="tail")
        head = encode_pair([], t, vocab, 12, include_query=False, truncate_from="head")
        assert tail.ids[1] == vocab.id_of("t0")
        assert head.ids[1] == vocab.id_of("t90")

    def test_unknown_tokens_map_to_unk(self, vocab):
        pair = encode_pair(["zzz"], ["t0"], vocab, 8)
        assert pair.ids[1] == UNK

    @settings(max_examples=60, deadline=None)
    @given(
        n_q=st.integers(0, 8),
        n_t=st.integers(0, 60),
        max_len=st.integers(12, 64),
        include_query=st.booleans(),
    )
    def test_length_exact_and_mask_consistent(self, n_q, n_t, max_len, include_query):
        vocab = build_vocab(
            [[f"q{i}" for i in range(8)], [f"t{i}" for i in range(120)]], max_size=200
        )
        pair = encode_pair(
            [f"q{i}" for i in range(n_q)],
            [f"t{i}" for i in range(n_t)],
            vocab,
            max_len,
            include_query=include_query,
        )
        assert len(pair.ids) == max_len and len(pair.mask) == max_len
        assert not np.any(pair.ids[pair.mask == 0] != PAD)
        assert not np.any(pair.ids[pair.mask == 1] == PAD)

    def test_transcript_subsequence_shared_across_query_ablation(self, vocab):
        q = [f"q{i}" for i in range(5)]
        t = [f"t{i}" for i in range(100)]
        with_q = encode_pair(q, t, vocab, 32, include_query=True)
        without = encode_pair(q, t, vocab, 32, include_query=False)
        ids_with = [int(x) for x in with_q.ids[with_q.mask.astype(bool)]][7:-1]
        ids_without = [int(x) for x in without.ids[without.mask.astype(bool)]][1:-1]
        assert ids_with == ids_without[: len(ids_with)]


def test_batch_file_roundtrip(tmp_path, vocab):
    pairs = [
        encode_pair([f"q{i}"], [f"t{j}" for j in range(i + 1)], vocab, 16, label=i % 2)
        for i in range(5)
    ]
    batch = stack_pairs(pairs, pair_keys=[(f"q{i}", f"c{i}") for i in range(5)])
    path = tmp_path / "batch.bin"
    save_batch(batch, path)
    back = load_batch(path)
    assert np.array_equal(back.ids, batch.ids)
    assert np.array_equal(back.mask, batch.mask)
    assert np.array_equal(back.labels, batch.labels)
    assert back.pair_keys == batch.pair_keys
