"""Box quantization of continuous state vectors into table indices."""

from __future__ import annotations

import itertools
import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class Quantizer:
    # one ascending threshold list per state variable
    thresholds: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        for th in self.thresholds:
            if any(b <= a for a, b in zip(th, th[1:])):
                raise ValueError(f"thresholds must be strictly ascending: {th}")

    @property
    def bins(self) -> tuple[int, ...]:
        return tuple(len(th) + 1 for th in self.thresholds)

    @property
    def n_regions(self) -> int:
        return math.prod(self.bins)

    def bin_indices(self, values: Sequence[float]) -> tuple[int, ...]:
        # a value equal to a threshold falls into the upper bin
        return tuple(bisect_right(th, v) for th, v in zip(self.thresholds, values))

    def encode(self, indices: Sequence[int]) -> int:
        sid = 0
        for idx, nb in zip(indices, self.bins):
            sid = sid * nb + idx
        return sid

    def quantize(self, values: Sequence[float]) -> int:
        if len(values) != len(self.thresholds):
            raise ValueError(f"expected {len(self.thresholds)} values, got {len(values)}")
        return self.encode(self.bin_indices(values))

    def all_ids(self) -> list[int]:
        return [self.encode(ix) for ix in itertools.product(*(range(n) for n in self.bins))]


def quantize(state: Sequence[float], quantizer: Quantizer) -> int:
    return quantizer.quantize(state)


CAR_QUANTIZER = Quantizer((
    (-0.5, 0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0),
    (0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0),
    tuple(k * math.pi / 20 for k in range(19, 32)),
))

CARTPOLE_QUANTIZER = Quantizer((
    (-0.8, 0.8),
    (-0.5, 0.5),
    (-0.105, -0.0175, 0.0, 0.0175, 0.105),
    (-0.8727, 0.8727),
))
