import numpy as np
import orjson
import pytest
from structlog.testing import capture_logs

from skylight_compass.exceptions import DatasetError, InvalidInputError
from skylight_compass.polarimg import feature_batch
from skylight_compass.repositories import DatasetRepository, load_dataset, read_pgm, write_pgm


@pytest.mark.parametrize("maxval", [255, 4095, 65535])
def test_pgm_round_trip(tmp_path, rng, maxval):
    pixels = rng.integers(0, maxval + 1, (6, 10)).astype(np.uint16)
    path = tmp_path / "image.pgm"

    write_pgm(path, pixels)
    restored = read_pgm(path)

    assert restored.dtype == np.uint16
    np.testing.assert_array_equal(restored, pixels)


def test_pgm_sixteen_bit_is_big_endian(tmp_path):
    path = tmp_path / "image.pgm"

    write_pgm(path, np.array([[1, 256]], dtype=np.uint16))
    data = path.read_bytes()

    assert data.startswith(b"P5")
    assert b"65535" in data
    assert data.endswith(b"\x00\x01\x01\x00")


def test_pgm_reads_eight_bit_with_comments(tmp_path):
    path = tmp_path / "image.pgm"
    path.write_bytes(b"P5\n# written by hand\n2 1\n255\n\x07\x08")

    pixels = read_pgm(path)

    assert pixels.dtype == np.uint16
    np.testing.assert_array_equal(pixels, [[7, 8]])


@pytest.mark.parametrize(
    "pixels", [np.full((2, 2), 70000), np.full((2, 2), -1), np.zeros((2, 2, 2))]
)
def test_pgm_rejects_unwritable_values(tmp_path, pixels):
    with pytest.raises(InvalidInputError):
        write_pgm(tmp_path / "image.pgm", pixels)


@pytest.mark.parametrize("data", [b"", b"P5\n2", b"not an image at all"])
def test_pgm_rejects_malformed(tmp_path, data):
    path = tmp_path / "image.pgm"
    path.write_bytes(data)

    with pytest.raises(DatasetError):
        read_pgm(path)


def test_pgm_missing_file(tmp_path):
    with pytest.raises(DatasetError):
        read_pgm(tmp_path / "nope.pgm")


def test_repository_lists_manifest_order(dataset_dir):
    repo = DatasetRepository(root=dataset_dir)

    names = repo.list()

    assert names == [f"sample_{i:06d}" for i in range(12)]


def test_repository_sidecar_is_sorted_json(dataset_dir):
    text = (dataset_dir / "sample_000000.json").read_bytes()
    data = orjson.loads(text)

    assert list(data) == sorted(data)
    assert data["index"] == 0
    assert data["bit_depth"] == 12


def test_load_dataset(dataset_dir):
    dataset = load_dataset(dataset_dir)

    assert len(dataset) == 12
    assert dataset.indices == list(range(12))
    assert np.all(np.mod(dataset.headings, 10.0) == 0.0)
    assert np.all((dataset.sun_altitudes >= 5.0) & (dataset.sun_altitudes <= 60.0))
    assert feature_batch(dataset.mosaics, 2).shape == (12, 3, 4, 4)


def test_load_dataset_missing_dir(tmp_path):
    with pytest.raises(DatasetError):
        load_dataset(tmp_path / "nope")


def test_missing_manifest(tmp_path):
    with pytest.raises(DatasetError, match="manifest"):
        DatasetRepository(root=tmp_path).list()


def test_missing_sidecar_logs(tmp_path):
    repo = DatasetRepository(root=tmp_path)
    repo.write_manifest(["sample_000000"])

    with capture_logs() as caplog, pytest.raises(DatasetError):
        repo.load()

    assert caplog[0]["event"] == "Sidecar not found"
    assert caplog[0]["basename"] == "sample_000000"
    assert caplog[0]["log_level"] == "warning"


def test_invalid_sidecar(tmp_path):
    repo = DatasetRepository(root=tmp_path)
    repo.write_manifest(["sample_000000"])
    repo.sidecar_file("sample_000000").write_bytes(b'{"index": -1}')

    with pytest.raises(DatasetError, match="invalid sidecar"):
        repo.get("sample_000000")


def test_values_must_fit_bit_depth(tmp_path, dataset_dir):
    repo = DatasetRepository(root=tmp_path)
    source = DatasetRepository(root=dataset_dir)
    meta, mosaic = source.get("sample_000000")
    repo.insert(meta, mosaic)
    write_pgm(repo.image_file(meta.basename), np.full(mosaic.pixels.shape, 65535))

    with pytest.raises(DatasetError, match="bit_depth"):
        repo.get(meta.basename)


def test_remove(tmp_path, dataset_dir):
    repo = DatasetRepository(root=tmp_path)
    meta, mosaic = DatasetRepository(root=dataset_dir).get("sample_000001")
    repo.insert(meta, mosaic)
    repo.write_manifest([meta.basename])

    repo.remove([meta.basename], manifest=True)

    assert list(tmp_path.iterdir()) == []
