import numpy as np
import pytest

from neunets.data.embeddings import EmbeddingFormatError, load_embeddings
from neunets.data.text import Vocabulary


@pytest.fixture
def vocab():
    return Vocabulary(["cat", "dog", "emu"])


def test_rows_follow_token_ids(tmp_path, vocab):
    path = tmp_path / "vectors.txt"
    path.write_text("dog 0.5 1.5 -2\nzebra 9 9 9\ncat 1 2 3\n")
    matrix = load_embeddings(path, vocab)
    assert matrix.shape == (4, 3)
    np.testing.assert_array_equal(matrix[0], [1, 2, 3])
    np.testing.assert_array_equal(matrix[1], [0.5, 1.5, -2])
    assert np.abs(matrix[2]).max() <= 0.05


def test_missing_rows_are_seeded(tmp_path, vocab):
    path = tmp_path / "vectors.txt"
    path.write_text("cat 1 2\n")
    np.testing.assert_array_equal(load_embeddings(path, vocab, seed=4)[2], load_embeddings(path, vocab, seed=4)[2])
    assert not np.array_equal(load_embeddings(path, vocab, seed=4)[2], load_embeddings(path, vocab, seed=5)[2])


def test_mixed_dimensions(tmp_path, vocab):
    path = tmp_path / "vectors.txt"
    path.write_text("cat 1 2 3\ndog 1 2\n")
    with pytest.raises(EmbeddingFormatError):
        load_embeddings(path, vocab)


def test_empty_file(tmp_path, vocab):
    path = tmp_path / "vectors.txt"
    path.write_text("")
    with pytest.raises(EmbeddingFormatError):
        load_embeddings(path, vocab)
