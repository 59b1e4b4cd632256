from collections.abc import Iterator
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np
import numpy.typing as npt
import orjson
import pydantic

from . import get_logger
from .exceptions import DatasetError, InvalidInputError
from .models import MosaicImage, SampleMeta

logger = get_logger(__name__)

MANIFEST = "manifest.txt"


def write_pgm(path: Path, pixels: npt.NDArray) -> None:
    """16-bit binary PGM: big-endian samples, maxval 65535. The bit depth of the data itself
    is recorded in the sidecar."""
    pixels = np.asarray(pixels)
    if pixels.ndim != 2 or (pixels.size and (pixels.min() < 0 or pixels.max() > 2**16 - 1)):
        msg = f"PGM needs a 2-D array of values in [0, 65535], got shape {pixels.shape}"
        raise InvalidInputError(msg)

    try:
        written = cv2.imwrite(str(path), pixels.astype(np.uint16))
    except cv2.error as e:
        msg = f"could not write {path}: {e}"
        raise DatasetError(msg) from e
    if not written:
        msg = f"could not write {path}"
        raise DatasetError(msg)


def read_pgm(path: Path) -> npt.NDArray[np.uint16]:
    pixels = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if pixels is None or pixels.ndim != 2:
        msg = f"{path} is not a greyscale PGM"
        raise DatasetError(msg)
    return pixels.astype(np.uint16)


def mosaic_from(pixels, bit_depth: int, pattern, source: Path) -> MosaicImage:
    try:
        return MosaicImage(pixels=pixels, bit_depth=bit_depth, pattern=pattern)
    except InvalidInputError as e:
        msg = f"{source} holds values beyond bit_depth {bit_depth}"
        raise DatasetError(msg) from e


@dataclass
class Dataset:
    """Samples loaded from disk, ordered as in the manifest."""

    metas: list[SampleMeta] = field(default_factory=list)
    mosaics: list[MosaicImage] = field(default_factory=list, repr=False)

    def __len__(self) -> int:
        return len(self.metas)

    @property
    def headings(self) -> npt.NDArray[np.float64]:
        return np.array([meta.heading_deg for meta in self.metas], dtype=np.float64)

    @property
    def sun_altitudes(self) -> npt.NDArray[np.float64]:
        return np.array([meta.sun_altitude_deg for meta in self.metas], dtype=np.float64)

    @property
    def indices(self) -> list[int]:
        return [meta.index for meta in self.metas]


@dataclass
class DatasetRepository:
    """A dataset directory: one PGM mosaic plus JSON sidecar per sample and a manifest
    listing the sample basenames in order."""

    root: Path

    @property
    def manifest_file(self) -> Path:
        return self.root / MANIFEST

    def image_file(self, basename: str) -> Path:
        return self.root / f"{basename}.pgm"

    def sidecar_file(self, basename: str) -> Path:
        return self.root / f"{basename}.json"

    def insert(self, meta: SampleMeta, mosaic: MosaicImage) -> None:
        image, sidecar = self.image_file(meta.basename), self.sidecar_file(meta.basename)

        write_pgm(image, mosaic.pixels)
        sidecar.write_bytes(
            orjson.dumps(
                meta.model_dump(mode="json"),
                option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS,
            )
        )

    def write_manifest(self, basenames: list[str]) -> None:
        self.manifest_file.write_text("".join(f"{name}\n" for name in basenames))

    def remove(self, basenames: list[str], manifest: bool = False) -> None:
        paths = [self.image_file(b) for b in basenames]
        paths += [self.sidecar_file(b) for b in basenames]
        if manifest:
            paths.append(self.manifest_file)
        for path in paths:
            path.unlink(missing_ok=True)

    def list(self) -> list[str]:
        if not self.manifest_file.exists():
            msg = f"no dataset manifest at {self.manifest_file}"
            raise DatasetError(msg)

        return [
            line.strip()
            for line in self.manifest_file.read_text().splitlines()
            if line.strip()
        ]

    def get_meta(self, basename: str) -> SampleMeta:
        sidecar = self.sidecar_file(basename)
        if not sidecar.exists():
            logger.warning("Sidecar not found", basename=basename, root=str(self.root))
            msg = f"missing sidecar {sidecar}"
            raise DatasetError(msg)

        try:
            return SampleMeta.model_validate(orjson.loads(sidecar.read_bytes()))
        except (orjson.JSONDecodeError, pydantic.ValidationError) as e:
            msg = f"invalid sidecar {sidecar}: {e}"
            raise DatasetError(msg) from e

    def get(self, basename: str) -> tuple[SampleMeta, MosaicImage]:
        meta = self.get_meta(basename)
        image = self.image_file(basename)
        if not image.exists():
            logger.warning("Image not found", basename=basename, root=str(self.root))
            msg = f"missing image {image}"
            raise DatasetError(msg)

        return meta, mosaic_from(read_pgm(image), meta.bit_depth, meta.pattern, image)

    def __iter__(self) -> Iterator[tuple[SampleMeta, MosaicImage]]:
        for basename in self.list():
            yield self.get(basename)

    def load(self) -> Dataset:
        dataset = Dataset()
        for meta, mosaic in self:
            dataset.metas.append(meta)
            dataset.mosaics.append(mosaic)

        logger.info("Loaded dataset", root=str(self.root), count=len(dataset))
        return dataset


def load_dataset(root: Path) -> Dataset:
    root = Path(root)
    if not root.is_dir():
        msg = f"dataset directory {root} does not exist"
        raise DatasetError(msg)
    return DatasetRepository(root=root).load()
