from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from ..exceptions import InvalidInputError
from .sky import DEFAULT_PATTERN, Pattern, validate_pattern


def frozen_array(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def analyzer_grid(pattern: Pattern, height: int, width: int) -> npt.NDArray[np.int_]:
    return np.tile(np.asarray(pattern, dtype=np.int_), (height // 2, width // 2))


@dataclass(frozen=True)
class MosaicImage:
    """Raw sensor frame: integer counts in [0, 2**bit_depth - 1] behind a 2x2 polarizer
    pattern tiled over the whole frame."""

    pixels: npt.NDArray[np.uint16]
    bit_depth: int = 12
    pattern: Pattern = field(default=DEFAULT_PATTERN)

    def __post_init__(self):
        object.__setattr__(self, "pattern", validate_pattern(self.pattern))
        if self.pixels.ndim != 2:
            msg = f"mosaic must be a 2-D array, got shape {self.pixels.shape}"
            raise InvalidInputError(msg)
        if self.pixels.size and (
            self.pixels.min() < 0 or self.pixels.max() > self.maxval
        ):
            msg = f"mosaic values must lie in [0, {self.maxval}]"
            raise InvalidInputError(msg)
        frozen_array(self.pixels)

    @property
    def maxval(self) -> int:
        return 2**self.bit_depth - 1

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def analyzer_angles(self) -> npt.NDArray[np.int_]:
        """Per-pixel analyzer angle in degrees, the pattern tiled over the frame."""
        return analyzer_grid(self.pattern, self.height, self.width)
