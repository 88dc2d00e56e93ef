import numpy as np
import pytest

from neunets.data.budget import HOUR, TIER_HOURS, BudgetTier
from neunets.data.datasets import ImageDataset, RawImages, RawText, TextDataset
from neunets.data.formats import write_image_dataset, write_text_csv
from neunets.engine.config import SynthesisRequest, ValidationError, load_dataset, select_algorithm, validate_request
from neunets.engine.settings import load_settings
from neunets.search.tapas.lde import LifelongDatabase
from neunets.search.tapas.predictor__test import synthetic_records


def write_images(path, n=40, side=8, classes=("dark", "light"), seed=0):
    """Images whose class shows in their brightness"""
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % len(classes)
    images = rng.integers(0, 100, size=(n, side, side, 1)) + 100 * labels[:, None, None, None]
    write_image_dataset(path, RawImages(images.clip(0, 255).astype(np.uint8), labels, list(classes)))
    return path


def write_texts(path, n=40):
    texts = ["great fine lovely movie", "awful boring terrible movie"] * (n // 2)
    write_text_csv(path, RawText(texts, np.array([0, 1] * (n // 2)), ["pos", "neg"]))
    return path


@pytest.fixture
def settings(tmp_path):
    return load_settings(tmp_path / "state", environ={})


class TestValidateRequest:
    def test_sixty_thousand_images_are_medium_tier(self, tmp_path, settings):
        path = write_images(tmp_path / "big", n=60000, side=1)
        config = validate_request(SynthesisRequest(dataset=str(path)), settings)
        assert config.tier is BudgetTier.MEDIUM
        assert config.cap_seconds == TIER_HOURS[BudgetTier.MEDIUM] * HOUR
        assert config.n_examples == 60000
        assert config.algorithm == "hyperband"
        assert config.selection_reason.startswith("auto:")

    def test_small_image_dataset_evolves(self, tmp_path, settings):
        config = validate_request(SynthesisRequest(dataset=str(write_images(tmp_path / "set"))), settings)
        assert config.tier is BudgetTier.LOW
        assert config.algorithm == "ncevolve"
        assert config.domain == "image"
        assert config.n_classes == 2

    def test_divisor_scales_the_cap(self, tmp_path, settings):
        request = SynthesisRequest(dataset=str(write_images(tmp_path / "set")), budget_divisor=60)
        config = validate_request(request, settings)
        assert config.cap_seconds == TIER_HOURS[BudgetTier.LOW] * HOUR / 60

    def test_explicit_budget_tier(self, tmp_path, settings):
        request = SynthesisRequest(dataset=str(write_images(tmp_path / "set")), budget="high", algorithm="hyperband")
        config = validate_request(request, settings)
        assert config.tier is BudgetTier.HIGH
        assert config.selection_reason == "requested"

    def test_missing_dataset(self, tmp_path, settings):
        with pytest.raises(ValidationError):
            validate_request(SynthesisRequest(dataset=str(tmp_path / "nowhere")), settings)

    def test_tapas_without_experience(self, tmp_path, settings):
        request = SynthesisRequest(dataset=str(write_images(tmp_path / "set")), algorithm="tapas")
        with pytest.raises(ValidationError, match="Insufficient experience"):
            validate_request(request, settings)

    def test_experience_selects_tapas(self, tmp_path, settings):
        lde = LifelongDatabase(settings.lde_path)
        for record in synthetic_records(n=2):
            lde.append(record)
        config = validate_request(SynthesisRequest(dataset=str(write_texts(tmp_path / "reviews.csv"))), settings)
        assert config.domain == "text"
        assert config.algorithm == "tapas"

    def test_unknown_algorithm(self, tmp_path, settings):
        request = SynthesisRequest(dataset=str(write_images(tmp_path / "set")), algorithm="genetic")
        with pytest.raises(ValidationError, match="Unknown algorithm"):
            validate_request(request, settings)

    def test_unknown_budget(self, tmp_path, settings):
        request = SynthesisRequest(dataset=str(write_images(tmp_path / "set")), budget="huge")
        with pytest.raises(ValidationError, match="Unknown budget"):
            validate_request(request, settings)

    def test_single_class(self, tmp_path, settings):
        path = write_images(tmp_path / "set", classes=("only",))
        with pytest.raises(ValidationError, match="at least 2"):
            validate_request(SynthesisRequest(dataset=str(path)), settings)

    def test_domain_mismatch(self, tmp_path, settings):
        request = SynthesisRequest(dataset=str(write_images(tmp_path / "set")), domain="text")
        with pytest.raises(ValidationError):
            validate_request(request, settings)

    @pytest.mark.parametrize("field", ["max_cycles", "epochs", "max_workers"])
    def test_counts_must_be_positive(self, tmp_path, settings, field):
        request = SynthesisRequest(dataset=str(write_images(tmp_path / "set")), **{field: 0})
        with pytest.raises(ValidationError):
            validate_request(request, settings)

    def test_missing_embeddings(self, tmp_path, settings):
        request = SynthesisRequest(dataset=str(write_texts(tmp_path / "reviews.csv")), embeddings=str(tmp_path / "vectors.txt"))
        with pytest.raises(ValidationError, match="embedding"):
            validate_request(request, settings)


@pytest.mark.parametrize(
    "domain, tier, experiences, expected",
    [
        ("image", BudgetTier.LOW, 0, "ncevolve"),
        ("image", BudgetTier.LOW, 10, "ncevolve"),
        ("image", BudgetTier.MEDIUM, 10, "tapas"),
        ("text", BudgetTier.LOW, 3, "tapas"),
        ("text", BudgetTier.LOW, 0, "hyperband"),
        ("image", BudgetTier.HIGH, 0, "hyperband"),
    ],
)
def test_selection_policy(domain, tier, experiences, expected):
    algorithm, reason = select_algorithm(domain, tier, experiences)
    assert algorithm == expected
    assert reason.startswith("auto:")


class TestLoadDataset:
    def test_images_at_the_requested_resolution(self, tmp_path, settings):
        request = SynthesisRequest(dataset=str(write_images(tmp_path / "set", side=6)), resolution=8)
        data = load_dataset(validate_request(request, settings))
        assert isinstance(data, ImageDataset)
        assert data.train.x.shape[1:] == (8, 8, 1)
        assert len(data.train) + len(data.holdout) == 40

    def test_same_config_same_splits(self, tmp_path, settings):
        config = validate_request(SynthesisRequest(dataset=str(write_images(tmp_path / "set")), resolution=8), settings)
        first, second = load_dataset(config), load_dataset(config)
        np.testing.assert_array_equal(first.holdout.y, second.holdout.y)
        np.testing.assert_array_equal(first.holdout.x, second.holdout.x)

    def test_text(self, tmp_path, settings):
        request = SynthesisRequest(dataset=str(write_texts(tmp_path / "reviews.csv")), max_length=5, algorithm="hyperband")
        data = load_dataset(validate_request(request, settings))
        assert isinstance(data, TextDataset)
        assert data.train.x.shape[1:] == (5,)
        assert data.embeddings is None
