# ######################################################################################################################
#  SquareLab Copyright (c) 2026 by the SquareLab authors                                                               #
#  is licensed under Creative Commons Attribution-NonCommercial-ShareAlike 4.0 International.                          #
#  To view a copy of this license, visit https://creativecommons.org/licenses/by-nc-sa/4.0/                            #
#                                                                                                                      #
#  Unless required by applicable law or agreed to in writing, software                                                 #
#  distributed under the License is distributed on an "AS IS" BASIS,                                                   #
#  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.                                            #
#  See the License for the specific language governing permissions and                                                 #
#  limitations under the License.                                                                                      #
# ######################################################################################################################
"""
Dyadic intervals of [0,1), Haar coefficients of indicator sets, the dyadic square function and the Haar shift.

Sign convention: ``h_I = |I|^{-1/2} (1_{I+} - 1_{I-})`` where ``I-`` is the left child. The shift acts on sibling
pairs as ``T h_{I+} = h_{I-}`` and ``T h_{I-} = -h_{I+}``; ``h_[0,1)`` and the mean have no sibling and are sent to 0.

Exact results use Fraction / ExactScalar. The ``haar_*`` array kernels work on integer cell counts: with
``delta[2^j + k] = #(V in I+) - #(V in I-)`` for ``I = (j, k)`` and ``delta[0] = #V``, every Haar coefficient is
``2^{j/2} delta / 2^N``, so square functions and shifted functions have integer numerators over powers of two.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, Iterator, List, Optional, Tuple

import numpy as np
from loguru import logger

from squarelab import utils
from squarelab.config import MAX_RESOLUTION_1D
from squarelab.martingale_core import StepFunction
from squarelab.numeric_core import ExactScalar, pow_sqrt2


# ----------------------------------------------------------------------------------
# Intervals and sets
# ----------------------------------------------------------------------------------
@dataclass(frozen=True, order=True)
class DyadicInterval:
    level: int
    index: int

    def __post_init__(self):
        if self.level < 0 or not 0 <= self.index < (1 << self.level):
            raise ValueError(f"Invalid dyadic interval {self.level}:{self.index}")

    @classmethod
    def parse(cls, text: str) -> DyadicInterval:
        """Parses ``"j:k"``."""
        try:
            j, k = text.strip().split(":")
            return cls(int(j), int(k))
        except ValueError as e:
            raise ValueError(f"Invalid interval spec '{text}': {e}")

    @property
    def length(self) -> Fraction:
        return Fraction(1, 1 << self.level)

    @property
    def minus(self) -> DyadicInterval:
        return DyadicInterval(self.level + 1, 2 * self.index)

    @property
    def plus(self) -> DyadicInterval:
        return DyadicInterval(self.level + 1, 2 * self.index + 1)

    @property
    def parent(self) -> Optional[DyadicInterval]:
        if self.level == 0:
            return None
        return DyadicInterval(self.level - 1, self.index // 2)

    @property
    def sibling(self) -> Optional[DyadicInterval]:
        if self.level == 0:
            return None
        return DyadicInterval(self.level, self.index ^ 1)

    @property
    def is_minus(self) -> bool:
        return self.level > 0 and self.index % 2 == 0

    @property
    def basis_index(self) -> int:
        """Position ``2^j + k`` in the array layout of the ``haar_*`` kernels."""
        return (1 << self.level) + self.index

    def cell_range(self, resolution: int) -> Tuple[int, int]:
        if self.level > resolution:
            raise ValueError("below resolution")
        width = 1 << (resolution - self.level)
        return self.index * width, (self.index + 1) * width

    def contains(self, other: DyadicInterval) -> bool:
        if other.level < self.level:
            return False
        return other.index >> (other.level - self.level) == self.index

    def to_spec(self) -> str:
        return f"{self.level}:{self.index}"

    def __str__(self) -> str:
        return f"[{self.index}/{1 << self.level},{self.index + 1}/{1 << self.level})"


def all_intervals(resolution: int) -> List[DyadicInterval]:
    """Every interval of level < resolution, ordered by level then index."""
    return [DyadicInterval(j, k) for j in range(resolution) for k in range(1 << j)]


def _check_resolution(resolution: int) -> None:
    if not 0 <= resolution <= MAX_RESOLUTION_1D:
        raise ValueError(f"Resolution N={resolution} outside 0..{MAX_RESOLUTION_1D}")


@dataclass(frozen=True)
class DyadicSet:
    """A union of cells ``[i 2^-N, (i+1) 2^-N)``; bit i of ``mask`` marks cell i."""

    resolution: int
    mask: int

    def __post_init__(self):
        _check_resolution(self.resolution)
        if self.mask < 0 or self.mask >> self.cell_count:
            raise ValueError(f"Mask {hex(self.mask)} does not fit {self.cell_count} cells")

    @classmethod
    def from_spec(cls, spec: str) -> DyadicSet:
        """Parses ``"N=4;mask=0xA5C3"`` or ``"N=4;cells=0,2,5"``."""
        fields = utils.parse_spec_fields(spec)
        if "N" not in fields:
            raise ValueError(f"Set spec '{spec}' has no resolution N")
        resolution = int(fields["N"])
        if "mask" in fields:
            return cls(resolution, utils.parse_mask(fields["mask"]))
        if "cells" in fields:
            return cls.from_cells(resolution, utils.parse_index_list(fields["cells"]))
        raise ValueError(f"Set spec '{spec}' must give 'mask=' or 'cells='")

    @classmethod
    def from_cells(cls, resolution: int, cells: Iterable[int]) -> DyadicSet:
        cells = list(cells)
        if any(c >= (1 << resolution) for c in cells):
            raise ValueError(f"Cell index out of range for N={resolution}: {cells}")
        return cls(resolution, utils.indices_to_mask(cells))

    @classmethod
    def from_array(cls, resolution: int, cells: np.ndarray) -> DyadicSet:
        packed = np.packbits(np.asarray(cells, dtype=np.uint8), bitorder="little")
        return cls(resolution, int.from_bytes(packed.tobytes(), "little"))

    @classmethod
    def interval(cls, resolution: int, I: DyadicInterval) -> DyadicSet:
        start, stop = I.cell_range(resolution)
        return cls(resolution, ((1 << (stop - start)) - 1) << start)

    @classmethod
    def full(cls, resolution: int) -> DyadicSet:
        return cls(resolution, (1 << (1 << resolution)) - 1)

    @property
    def cell_count(self) -> int:
        return 1 << self.resolution

    @property
    def count(self) -> int:
        return self.mask.bit_count()

    @property
    def measure(self) -> Fraction:
        return Fraction(self.count, self.cell_count)

    def is_empty(self) -> bool:
        return self.mask == 0

    def contains_cell(self, cell: int) -> bool:
        return bool(self.mask >> cell & 1)

    def cells(self) -> List[int]:
        return utils.mask_to_indices(self.mask)

    def count_in(self, I: DyadicInterval) -> int:
        start, stop = I.cell_range(self.resolution)
        return ((self.mask >> start) & ((1 << (stop - start)) - 1)).bit_count()

    def to_array(self) -> np.ndarray:
        """0/1 uint8 array of length 2^N."""
        size = max(1, (self.cell_count + 7) // 8)
        raw = np.frombuffer(self.mask.to_bytes(size, "little"), dtype=np.uint8)
        return np.unpackbits(raw, bitorder="little")[: self.cell_count]

    def complement(self) -> DyadicSet:
        return DyadicSet(self.resolution, ((1 << self.cell_count) - 1) ^ self.mask)

    def to_spec(self) -> str:
        return f"N={self.resolution};mask={utils.mask_to_hex(self.mask)}"


# ----------------------------------------------------------------------------------
# Coefficients
# ----------------------------------------------------------------------------------
def haar_coefficient(V: DyadicSet, I: DyadicInterval) -> ExactScalar:
    """
    ``<1_V, h_I> = 2^{j/2} (|I+ n V| - |I- n V|)``.

    :raises ValueError: "below resolution" when ``level(I) >= N``.
    """
    if I.level >= V.resolution:
        raise ValueError("below resolution")
    delta = V.count_in(I.plus) - V.count_in(I.minus)
    return pow_sqrt2(I.level) * Fraction(delta, V.cell_count)


@dataclass(frozen=True)
class CoefficientMap:
    """Haar coefficients over a finite system of intervals plus the mean. Keys are the system."""

    resolution: int
    mean: Fraction
    coeffs: Dict[DyadicInterval, ExactScalar] = field(default_factory=dict)

    def __getitem__(self, I: DyadicInterval) -> ExactScalar:
        return self.coeffs.get(I, ExactScalar.zero())

    def __iter__(self) -> Iterator[DyadicInterval]:
        return iter(self.coeffs)

    def items(self):
        return self.coeffs.items()

    def energy(self) -> ExactScalar:
        """``mean^2 + sum coeff^2``; equals |V| when the map covers every level below N."""
        total = ExactScalar.coerce(self.mean * self.mean)
        for value in self.coeffs.values():
            total = total + value * value
        return total

    def is_zero(self) -> bool:
        return self.mean == 0 and all(v.is_zero() for v in self.coeffs.values())


def coefficient_map(V: DyadicSet, system: Optional[Iterable[DyadicInterval]] = None) -> CoefficientMap:
    """Coefficients of ``1_V`` over ``system`` (default: every interval of level < N)."""
    if system is None:
        system = all_intervals(V.resolution)
    return CoefficientMap(
        resolution=V.resolution,
        mean=V.measure,
        coeffs={I: haar_coefficient(V, I) for I in system},
    )


def dyadic_square_function(V: DyadicSet, include_mean: bool = True) -> StepFunction:
    """
    Cellwise ``sum_I <1_V, h_I>^2 h_I^2`` (plus ``mean^2`` when ``include_mean``); every value is rational.
    """
    numerators = square_numerators(haar_analysis(V.to_array()), include_mean=include_mean)
    scale = 1 << (2 * V.resolution)
    weight = Fraction(1, V.cell_count)
    return StepFunction(
        weights=(weight,) * V.cell_count,
        values=tuple(Fraction(int(n), scale) for n in numerators),
    )


def square_energy(V: DyadicSet, include_mean: bool = True) -> Fraction:
    """``int_V S(1_V)^2`` exactly."""
    if V.is_empty():
        raise ValueError("empty set")
    numerators = square_numerators(haar_analysis(V.to_array()), include_mean=include_mean)
    inside = int(np.sum(numerators[V.to_array().astype(bool)], dtype=object))
    return Fraction(inside, 1 << (3 * V.resolution))


def haar_shift_apply(c: CoefficientMap) -> CoefficientMap:
    """
    Haar shift on a coefficient map: every interval of level 1 or more is paired with its sibling, a sibling missing from
    the map reading as a zero coefficient, and ``out(P-) = c(P+)``, ``out(P+) = -c(P-)``. ``h_[0,1)`` and the mean go
    to 0. The output system is the input system closed under siblings.
    """
    system = set(c.coeffs)
    system.update(I.sibling for I in c.coeffs if I.sibling is not None)
    out: Dict[DyadicInterval, ExactScalar] = {}
    for I in sorted(system):
        sibling = I.sibling
        if sibling is None:
            out[I] = ExactScalar.zero()
        elif I.is_minus:
            out[I] = c[sibling]
        else:
            out[I] = -c[sibling]
    return CoefficientMap(resolution=c.resolution, mean=Fraction(0), coeffs=out)


def synthesize(c: CoefficientMap) -> StepFunction:
    """Cell values of ``mean + sum_I c(I) h_I`` at the map's resolution."""
    N = c.resolution
    values: List[ExactScalar] = [ExactScalar.coerce(c.mean)] * (1 << N)
    for I, value in c.items():
        if value.is_zero():
            continue
        height = value * pow_sqrt2(I.level)
        lo, mid = I.minus.cell_range(N)
        _, hi = I.plus.cell_range(N)
        for cell in range(lo, mid):
            values[cell] = values[cell] - height
        for cell in range(mid, hi):
            values[cell] = values[cell] + height
    weight = Fraction(1, 1 << N)
    return StepFunction(weights=(weight,) * (1 << N), values=tuple(values))


# ----------------------------------------------------------------------------------
# Shift energies
# ----------------------------------------------------------------------------------
@dataclass(frozen=True)
class ShiftEnergy:
    inside: ExactScalar
    total: ExactScalar
    pairing: ExactScalar
    minus_norm: ExactScalar  # ||T1_V - 1_V||^2
    plus_norm: ExactScalar   # ||T1_V + 1_V||^2
    measure: Fraction

    @property
    def ratio(self) -> ExactScalar:
        return self.inside / self.measure


def shift_energy(V: DyadicSet) -> ShiftEnergy:
    """
    ``int_V (T1_V)^2``, ``int (T1_V)^2`` and ``<T1_V, 1_V>`` over the expansion of ``1_V`` at levels < N.

    :raises ValueError: "empty set" for an empty V.
    """
    if V.is_empty():
        raise ValueError("empty set")
    N = V.resolution
    cells = V.to_array().astype(np.int64)
    # g = 2^N * T1_V
    g = haar_synthesis(haar_shift_indices(haar_analysis(cells)))
    inside_mask = cells.astype(bool)
    scale = cells << N

    cube = 1 << (3 * N)

    def exact(total: int, denominator: int) -> ExactScalar:
        return ExactScalar(Fraction(total, denominator))

    return ShiftEnergy(
        inside=exact(int(np.sum(g[inside_mask] ** 2, dtype=object)), cube),
        total=exact(int(np.sum(g ** 2, dtype=object)), cube),
        pairing=exact(int(np.sum(g[inside_mask], dtype=object)), 1 << (2 * N)),
        minus_norm=exact(int(np.sum((g - scale) ** 2, dtype=object)), cube),
        plus_norm=exact(int(np.sum((g + scale) ** 2, dtype=object)), cube),
        measure=V.measure,
    )


def paired_basis(resolution: int) -> List[DyadicInterval]:
    """Intervals of levels 1..N-1, all of which have their sibling in the system; dimension 2^N - 2."""
    return [I for I in all_intervals(resolution) if I.level >= 1]


def shift_matrix(resolution: int) -> np.ndarray:
    """
    Matrix of T on the paired basis (column = input basis vector). In (P-, P+) order each sibling block is
    ``[[0, 1], [-1, 0]]``, so ``M^T = -M`` and ``M^2 = -I``.
    """
    if resolution < 1:
        raise ValueError(f"shift_matrix needs N >= 1, got {resolution}")
    basis = paired_basis(resolution)
    position = {I: i for i, I in enumerate(basis)}
    M = np.zeros((len(basis), len(basis)), dtype=np.int64)
    for I in basis:
        if I.is_minus:
            # T h_{P-} = -h_{P+}
            M[position[I.sibling], position[I]] = -1
        else:
            # T h_{P+} = h_{P-}
            M[position[I.sibling], position[I]] = 1
    return M


def dilate(V: DyadicSet) -> DyadicSet:
    """
    Maps a set inside [0,1/2) at resolution N to its image under ``x -> 2x`` at resolution N-1.
    The shift ratio ``int_V (T1_V)^2 / |V|`` is unchanged by this map.
    """
    if V.resolution < 1:
        raise ValueError("dilate needs N >= 1")
    half = 1 << (V.resolution - 1)
    if V.mask >> half:
        raise ValueError(f"{V.to_spec()} is not contained in [0,1/2)")
    logger.debug("Dilating {} to resolution {}", V.to_spec(), V.resolution - 1)
    return DyadicSet(V.resolution - 1, V.mask)


# ----------------------------------------------------------------------------------
# Integer array kernels (batched along the last axis)
# ----------------------------------------------------------------------------------
def masks_to_cells(masks: np.ndarray, resolution: int) -> np.ndarray:
    """Expand integer masks (at most 63 cells) into 0/1 rows of length 2^N."""
    if (1 << resolution) > 63:
        raise ValueError(f"Batched masks support at most 63 cells, got N={resolution}")
    bits = np.arange(1 << resolution, dtype=np.int64)
    return (np.asarray(masks, dtype=np.int64)[..., None] >> bits) & 1


def haar_analysis(cells: np.ndarray) -> np.ndarray:
    """
    Integer Haar analysis: ``out[..., 0] = #V`` and ``out[..., 2^j + k] = #(V in I+) - #(V in I-)``.
    """
    cells = np.asarray(cells, dtype=np.int64)
    size = cells.shape[-1]
    N = size.bit_length() - 1
    if 1 << N != size:
        raise ValueError(f"Cell axis must have length 2^N, got {size}")
    out = np.zeros_like(cells)
    sums = cells
    for j in range(N - 1, -1, -1):
        pairs = sums.reshape(*sums.shape[:-1], 1 << j, 2)
        out[..., 1 << j: 2 << j] = pairs[..., 1] - pairs[..., 0]
        sums = pairs.sum(axis=-1)
    out[..., 0] = sums[..., 0]
    return out


def haar_shift_indices(delta: np.ndarray) -> np.ndarray:
    """The Haar shift in the kernel layout; the mean slot and level 0 become 0."""
    delta = np.asarray(delta)
    size = delta.shape[-1]
    out = np.zeros_like(delta)
    j = 1
    while (1 << j) < size:
        block = delta[..., 1 << j: 2 << j].reshape(*delta.shape[:-1], 1 << (j - 1), 2)
        shifted = np.stack([block[..., 1], -block[..., 0]], axis=-1)
        out[..., 1 << j: 2 << j] = shifted.reshape(*delta.shape[:-1], 1 << j)
        j += 1
    return out


def haar_synthesis(delta: np.ndarray) -> np.ndarray:
    """Inverse of ``haar_analysis`` scaled by 2^N: returns ``2^N f`` on the cells."""
    delta = np.asarray(delta, dtype=np.int64)
    size = delta.shape[-1]
    values = delta[..., :1].copy()
    j = 0
    while (1 << j) < size:
        d = delta[..., 1 << j: 2 << j] << j
        values = np.stack([values - d, values + d], axis=-1).reshape(*delta.shape[:-1], 2 << j)
        j += 1
    return values


def spread_levels(weights: np.ndarray, include_mean: bool = True) -> np.ndarray:
    """
    Cell values ``weights[0] + sum_j 4^j weights[2^j + k] 1_(j,k)``: each slot spread over its interval with the
    factor ``|I|^-2`` of ``h_I^2`` scaled to integers.
    """
    weights = np.asarray(weights)
    size = weights.shape[-1]
    values = weights[..., :1].copy() if include_mean else np.zeros_like(weights[..., :1])
    j = 0
    while (1 << j) < size:
        values = values + weights[..., 1 << j: 2 << j] * (1 << (2 * j))
        values = np.repeat(values, 2, axis=-1)
        j += 1
    return values


def square_numerators(delta: np.ndarray, include_mean: bool = True) -> np.ndarray:
    """``4^N S(1_V)^2`` on the cells: ``#V^2 + sum_j 4^j delta_j^2`` spread over each interval's cells."""
    delta = np.asarray(delta, dtype=np.int64)
    return spread_levels(delta ** 2, include_mean=include_mean)
