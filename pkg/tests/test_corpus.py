from __future__ import annotations

import pytest

from tokenmark import corpus
from tokenmark.vocab import TokenizeError


class TestDemoVocab:
    def test_prefix_free(self, demo_vocab):
        assert corpus.check_prefix_free(demo_vocab.texts) == []
        assert demo_vocab.is_prefix_free()

    def test_template_tokenizes_and_round_trips(self, demo_vocab):
        ids = demo_vocab.tokenize(corpus.DEMO_TEMPLATE)
        assert demo_vocab.detokenize(ids) == corpus.DEMO_TEMPLATE

    def test_all_bank_pieces_tokenize(self, demo_vocab):
        for phrase in (
            corpus.RESERVE_IDENTIFIERS
            + corpus.RESERVE_COMMENTS
            + corpus.RESERVE_DOCSTRINGS
            + corpus.RESERVE_STRINGS
        ):
            demo_vocab.tokenize(phrase)

    def test_inserted_statements_tokenize(self, demo_vocab):
        demo_vocab.tokenize("omega = 3\n")
        demo_vocab.tokenize("    pass\n")
        demo_vocab.tokenize("# todo tighten bounds\n")
        demo_vocab.tokenize("zeta = zeta\n")

    def test_benign_mask_excludes_structure(self, demo_vocab):
        mask = corpus.benign_token_mask(demo_vocab)
        assert mask.any()
        for text in ("\n", "    ", "def ", "(", " = ", "#", '"""', "'"):
            assert not mask[demo_vocab.id_of(text)], text
        assert mask[demo_vocab.id_of("fetch")]


class TestRandomVocab:
    def test_fixed_width_and_prefix_free(self):
        vocab = corpus.build_random_vocab(9, 64)
        assert all(len(t) == 4 for t in vocab.texts)
        assert vocab.is_prefix_free()

    def test_contains_newline_token(self):
        vocab = corpus.build_random_vocab(3, 32)
        assert any("\n" in t for t in vocab.texts)

    def test_deterministic(self):
        a = corpus.build_random_vocab(5, 48)
        b = corpus.build_random_vocab(5, 48)
        assert a.texts == b.texts

    def test_seed_changes_table(self):
        a = corpus.build_random_vocab(5, 48)
        b = corpus.build_random_vocab(6, 48)
        assert a.texts != b.texts

    def test_minimum_size_enforced(self):
        with pytest.raises(ValueError):
            corpus.build_random_vocab(1, 8)

    def test_check_prefix_free_reports_pairs(self):
        assert corpus.check_prefix_free(["ab", "abc", "x"]) == [("ab", "abc")]
