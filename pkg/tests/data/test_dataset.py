import json

import numpy as np
import pytest
from src.data import generate_dataset, read_dataset, write_dataset
from src.errors import DatasetError


@pytest.fixture
def written(tmp_path):
    dataset = generate_dataset(seed=5, size=16, train=9, val=3, test=2)
    write_dataset(dataset, tmp_path)
    return dataset, tmp_path

# 1. Roundtrip

def test_roundtrip(written):
    dataset, root = written
    loaded = read_dataset(root)
    assert loaded.counts() == dataset.counts()
    assert (loaded.seed, loaded.image_size) == (5, 16)
    for original, restored in zip(dataset.train, loaded.train):
        assert restored.id == original.id
        assert restored.category == original.category
        assert np.allclose(restored.gt_contour, original.gt_contour, rtol=0, atol=1e-9)
        assert np.array_equal(restored.gt_mask, original.gt_mask)
        assert np.abs(restored.image - original.image).max() <= 1.0 / 510.0 + 1e-12

def test_record_count_matches_split(written):
    dataset, root = written
    for name, count in dataset.counts().items():
        lines = (root / f"{name}.jsonl").read_text().splitlines()
        assert len(lines) == count

def test_record_fields(written):
    _, root = written
    record = json.loads((root / "train.jsonl").read_text().splitlines()[0])
    assert {"id", "category", "image_file", "contour"} <= set(record)
    assert (root / record["image_file"]).is_file()


# 2. Errors

def test_missing_image_named(written):
    _, root = written
    record = json.loads((root / "val.jsonl").read_text().splitlines()[1])
    (root / record["image_file"]).unlink()
    with pytest.raises(DatasetError) as excinfo:
        read_dataset(root)
    assert record["image_file"] in str(excinfo.value)

def test_malformed_line_number(written):
    _, root = written
    lines = (root / "test.jsonl").read_text().splitlines()
    lines[1] = "{not json"
    (root / "test.jsonl").write_text("\n".join(lines) + "\n")
    with pytest.raises(DatasetError) as excinfo:
        read_dataset(root)
    assert "line 2" in str(excinfo.value)

def test_missing_keys(written):
    _, root = written
    (root / "test.jsonl").write_text(json.dumps({"id": "x", "category": "triangle"}) + "\n")
    with pytest.raises(DatasetError) as excinfo:
        read_dataset(root)
    assert "line 1" in str(excinfo.value)

def test_missing_metadata(tmp_path):
    with pytest.raises(DatasetError):
        read_dataset(tmp_path)
