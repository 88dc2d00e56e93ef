from neunets.data.augment import augment
from neunets.data.budget import Budget, BudgetTier, classify_budget
from neunets.data.datasets import (
    Dataset,
    DatasetError,
    ImageDataset,
    RawImages,
    RawText,
    Split,
    Standardization,
    TextDataset,
    split_holdout,
)
from neunets.data.embeddings import EmbeddingFormatError, load_embeddings
from neunets.data.formats import load_raw, read_image_dataset, read_text_csv, write_image_dataset, write_text_csv
from neunets.data.images import prepare_images, preprocess_images, resize_images, resolution_for
from neunets.data.text import STOP_WORDS, Vocabulary, build_vocabulary, preprocess_text, tokenize, vectorize_text
