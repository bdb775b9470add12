import numpy as np
import pytest

from emrseg.config import SifConfig
from emrseg.errors import ConfigurationError
from emrseg.lib.power_iteration import dominant_direction
from emrseg.services.embeddings import EmbeddingMatrix, Vocabulary
from emrseg.services.sif_encoder import (
    AVE,
    SIF,
    SifEncoder,
    common_direction,
    encode_note,
    remove_common_component,
    sif_weight,
    weighted_sentence_vector,
)


@pytest.fixture
def toy():
    """Three words with p = 0.5, 0.3, 0.2 and 2-d vectors."""
    vocab = Vocabulary(['the', 'fever', 'cough'], [5, 3, 2])
    vectors = np.array([[1.0, 0.0], [0.0, 2.0], [3.0, 1.0]])
    return vocab, EmbeddingMatrix(vectors=vectors, vocab_hash=vocab.vocab_hash())


def noisy_common(rng, rows, dim):
    """Rows that share one strong direction plus small noise."""
    common = rng.normal(size=dim)
    scales = rng.uniform(1.0, 3.0, size=rows) * rng.choice([-1.0, 1.0], size=rows)
    return np.outer(scales, common) + 0.05 * rng.normal(size=(rows, dim))


class TestWeights:

    @pytest.mark.parametrize('p, alpha, expected', [
        (0.001, 0.001, 0.5),
        (0.0, 0.001, 1.0),
        (0.009, 0.001, 0.1),
    ])
    def test_sif_weight(self, p, alpha, expected):
        assert sif_weight(p, alpha) == pytest.approx(expected)

    def test_weighted_mean(self, toy):
        vocab, emb = toy
        cfg = SifConfig(alpha=0.1)
        vector, flag = weighted_sentence_vector(['the', 'cough'], vocab, emb, cfg)
        expected = (0.1 / 0.6 * emb.vectors[0] + 0.1 / 0.3 * emb.vectors[2]) / 2
        np.testing.assert_allclose(vector, expected)
        assert flag is False

    def test_out_of_vocabulary_tokens_are_skipped(self, toy):
        vocab, emb = toy
        cfg = SifConfig(alpha=0.1)
        with_oov, _ = weighted_sentence_vector(['fever', 'zzz', 'qqq'], vocab, emb, cfg)
        without, _ = weighted_sentence_vector(['fever'], vocab, emb, cfg)
        np.testing.assert_array_equal(with_oov, without)

    def test_all_out_of_vocabulary(self, toy):
        vocab, emb = toy
        vector, flag = weighted_sentence_vector(['zzz'], vocab, emb)
        np.testing.assert_array_equal(vector, np.zeros(2))
        assert flag is True


class TestCommonComponent:

    def test_single_sentence_becomes_zero(self):
        np.testing.assert_allclose(remove_common_component([[3.0, -4.0, 1.0]]), np.zeros((1, 3)), atol=1e-12)

    def test_collinear_rows_become_zero(self):
        np.testing.assert_allclose(remove_common_component([[2.0, 0.0], [1.0, 0.0]]), np.zeros((2, 2)), atol=1e-12)

    def test_orthogonal_rows(self):
        result = remove_common_component([[2.0, 0.0], [0.0, 1.0]])
        np.testing.assert_allclose(result, [[0.0, 0.0], [0.0, 1.0]], atol=1e-12)

    def test_all_zero_note_is_unchanged(self):
        zeros = np.zeros((3, 4))
        np.testing.assert_array_equal(remove_common_component(zeros), zeros)
        assert common_direction(zeros) is None

    @pytest.mark.parametrize('seed', range(50))
    def test_direction_matches_svd(self, seed):
        rng = np.random.default_rng(seed)
        rows, dim = rng.integers(2, 12), rng.integers(2, 12)
        vectors = noisy_common(rng, rows, dim)
        expected = np.linalg.svd(vectors.T, full_matrices=False)[0][:, 0]
        direction = common_direction(vectors)
        assert abs(float(direction @ expected)) >= 1.0 - 1e-6

    @pytest.mark.parametrize('seed', range(10))
    def test_result_is_orthogonal_to_direction(self, seed):
        rng = np.random.default_rng(100 + seed)
        vectors = noisy_common(rng, 6, 5)
        direction = common_direction(vectors)
        np.testing.assert_allclose(remove_common_component(vectors) @ direction, np.zeros(6), atol=1e-9)

    @pytest.mark.parametrize('seed', range(20))
    def test_removal_never_grows_a_sentence_vector(self, seed):
        rng = np.random.default_rng(300 + seed)
        rows, dim = rng.integers(1, 10), rng.integers(1, 10)
        vectors = rng.normal(size=(rows, dim)) * rng.uniform(0.1, 10.0)
        before = np.linalg.norm(vectors, axis=1)
        after = np.linalg.norm(remove_common_component(vectors), axis=1)
        assert np.all(after <= before + 1e-12)

    def test_scale_equivariance(self):
        vectors = noisy_common(np.random.default_rng(3), 5, 4)
        np.testing.assert_allclose(
            remove_common_component(2.5 * vectors), 2.5 * remove_common_component(vectors), atol=1e-9
        )


class TestDominantDirection:

    def test_wide_and_tall_inputs_agree(self):
        vectors = noisy_common(np.random.default_rng(8), 3, 10)
        wide, _ = dominant_direction(vectors)
        tall, _ = dominant_direction(np.vstack([vectors, np.zeros((10, 10))]))
        assert abs(float(wide @ tall)) == pytest.approx(1.0)

    def test_unit_length_and_step_cap(self):
        vectors = np.random.default_rng(4).normal(size=(6, 6))
        direction, steps = dominant_direction(vectors, max_steps=3)
        assert np.linalg.norm(direction) == pytest.approx(1.0)
        assert steps <= 3

    @pytest.mark.parametrize('vectors, expected', [
        ([[3.0, 0.0], [0.0, 2.5], [0.0, 2.5]], [0.0, 1.0]),
        ([[3.0, 0.0, 0.0, 0.0], [0.0, 2.5, 0.0, 0.0], [0.0, 2.5, 0.0, 0.0]], [0.0, 1.0, 0.0, 0.0]),
        ([[0.0, 0.0, 4.0], [1.0, 3.0, 0.0], [1.0, 3.0, 0.0], [1.0, 3.0, 0.0]], [0.1, 0.3, 0.0]),
    ])
    def test_largest_row_orthogonal_to_dominant_direction(self, vectors, expected):
        direction, _ = dominant_direction(vectors)
        expected = np.asarray(expected) / np.linalg.norm(expected)
        svd = np.linalg.svd(np.asarray(vectors).T, full_matrices=False)[0][:, 0]
        assert abs(float(direction @ expected)) >= 1.0 - 1e-9
        assert abs(float(direction @ svd)) >= 1.0 - 1e-9

    def test_axis_aligned_common_component_is_removed(self):
        result = remove_common_component([[3.0, 0.0], [0.0, 2.5], [0.0, 2.5]])
        np.testing.assert_allclose(result, [[3.0, 0.0], [0.0, 0.0], [0.0, 0.0]], atol=1e-12)

    def test_rejects_a_vector(self):
        with pytest.raises(ValueError):
            dominant_direction(np.zeros(3))


class TestSifEncoder:

    def test_average_mode(self, toy):
        vocab, emb = toy
        encoded = encode_note([['fever', 'fever'], ['the', 'cough']], vocab, emb, mode=AVE)
        np.testing.assert_allclose(encoded.vectors, [[0.0, 2.0], [2.0, 0.5]])
        assert encoded.direction is None

    def test_sif_mode_removes_component(self, toy):
        vocab, emb = toy
        encoded = encode_note([['fever'], ['the', 'cough'], ['cough']], vocab, emb, mode=SIF)
        assert encoded.direction is not None
        np.testing.assert_allclose(encoded.vectors @ encoded.direction, np.zeros(3), atol=1e-9)

    def test_oov_flags(self, toy):
        vocab, emb = toy
        encoded = encode_note([['the'], ['zzz'], ['fever']], vocab, emb, mode=AVE)
        assert encoded.oov == [False, True, False]
        np.testing.assert_array_equal(encoded.vectors[1], np.zeros(2))

    def test_labeled_note_input(self, labeled_notes, vocab_and_embeddings):
        vocab, emb = vocab_and_embeddings
        note = labeled_notes[0]
        encoded = SifEncoder(vocab, emb).encode(note)
        assert encoded.vectors.shape == (len(note.sentences), emb.dim)
        assert not any(encoded.oov)

    def test_empty_note(self, toy):
        vocab, emb = toy
        assert len(encode_note([], vocab, emb)) == 0

    def test_unknown_mode(self, toy):
        vocab, emb = toy
        with pytest.raises(ConfigurationError):
            SifEncoder(vocab, emb, mode='max')

    def test_settings(self, toy):
        vocab, emb = toy
        settings = SifEncoder(vocab, emb, SifConfig(alpha=0.01), mode=AVE).settings()
        assert settings['mode'] == AVE
        assert settings['alpha'] == 0.01

    def test_threads_keep_order_and_values(self, labeled_notes, vocab_and_embeddings):
        vocab, emb = vocab_and_embeddings
        encoder = SifEncoder(vocab, emb)
        sequential = encoder.encode_many(labeled_notes, threads=1)
        pooled = encoder.encode_many(labeled_notes, threads=2)
        assert len(pooled) == len(labeled_notes)
        for a, b in zip(sequential, pooled):
            np.testing.assert_array_equal(a.vectors, b.vectors)
