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
Two-parameter dyadic objects on [0,1)^2: grid sets, rectangle Haar coefficients, the biparameter square function and
the tensor shift ``T (x) T``.

Everything runs through the separable integer transform: the one-dimensional ``haar_line`` kernels applied along
rows, then along columns. Slot 0 of an axis is the mean, slot ``2^j + k`` the Haar function of ``(j, k)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Optional, Tuple

import numpy as np
from loguru import logger

from squarelab import utils
from squarelab.config import MAX_DENSE_ORACLE_RESOLUTION, MAX_RESOLUTION_1D
from squarelab.haar_line import (
    DyadicInterval,
    DyadicSet,
    haar_analysis,
    haar_shift_indices,
    haar_synthesis,
    shift_matrix,
    spread_levels,
)
from squarelab.martingale_core import StepFunction
from squarelab.numeric_core import ExactScalar, pow_sqrt2

Rectangle = Tuple[DyadicInterval, DyadicInterval]
# None stands for the constant function on that axis
TensorSlot = Tuple[Optional[DyadicInterval], Optional[DyadicInterval]]


@dataclass(frozen=True)
class DyadicSet2D:
    """Union of grid cells; bit ``i1 * 2^N + i2`` of ``mask`` marks cell ``[i1/2^N, ..) x [i2/2^N, ..)``."""

    resolution: int
    mask: int

    def __post_init__(self):
        if not 0 <= self.resolution <= MAX_RESOLUTION_1D // 2:
            raise ValueError(f"Resolution N={self.resolution} outside 0..{MAX_RESOLUTION_1D // 2}")
        if self.mask < 0 or self.mask >> self.cell_count:
            raise ValueError(f"Mask {hex(self.mask)} does not fit {self.cell_count} cells")

    @classmethod
    def from_spec(cls, spec: str) -> DyadicSet2D:
        """Parses ``"N=3;mask2d=0x..."`` (row-major) or ``"N=3;cells=0:1,2:2"``."""
        fields = utils.parse_spec_fields(spec)
        if "N" not in fields:
            raise ValueError(f"Set spec '{spec}' has no resolution N")
        resolution = int(fields["N"])
        if "mask2d" in fields:
            return cls(resolution, utils.parse_mask(fields["mask2d"]))
        if "cells" in fields:
            side = 1 << resolution
            mask = 0
            for token in fields["cells"].split(","):
                if not token.strip():
                    continue
                i1, i2 = (int(x) for x in token.split(":"))
                if not (0 <= i1 < side and 0 <= i2 < side):
                    raise ValueError(f"Cell {token} out of range for N={resolution}")
                mask |= 1 << (i1 * side + i2)
            return cls(resolution, mask)
        raise ValueError(f"Set spec '{spec}' must give 'mask2d=' or 'cells='")

    @classmethod
    def from_array(cls, grid: np.ndarray) -> DyadicSet2D:
        grid = np.asarray(grid, dtype=np.uint8)
        resolution = grid.shape[0].bit_length() - 1
        packed = np.packbits(grid.reshape(-1), bitorder="little")
        return cls(resolution, int.from_bytes(packed.tobytes(), "little"))

    @classmethod
    def product(cls, V1: DyadicSet, V2: DyadicSet) -> DyadicSet2D:
        if V1.resolution != V2.resolution:
            raise ValueError("Product factors must share a resolution")
        return cls.from_array(np.outer(V1.to_array(), V2.to_array()))

    @classmethod
    def rectangle(cls, resolution: int, I1: DyadicInterval, I2: DyadicInterval) -> DyadicSet2D:
        return cls.product(DyadicSet.interval(resolution, I1), DyadicSet.interval(resolution, I2))

    @property
    def side(self) -> int:
        return 1 << self.resolution

    @property
    def cell_count(self) -> int:
        return 1 << (2 * self.resolution)

    @property
    def count(self) -> int:
        return self.mask.bit_count()

    @property
    def measure(self) -> Fraction:
        return Fraction(self.count, self.cell_count)

    def is_empty(self) -> bool:
        return self.mask == 0

    def to_array(self) -> np.ndarray:
        """0/1 grid of shape (2^N, 2^N), first axis x1."""
        size = max(1, (self.cell_count + 7) // 8)
        raw = np.frombuffer(self.mask.to_bytes(size, "little"), dtype=np.uint8)
        bits = np.unpackbits(raw, bitorder="little")[: self.cell_count]
        return bits.reshape(self.side, self.side)

    def to_spec(self) -> str:
        return f"N={self.resolution};mask2d={utils.mask_to_hex(self.mask)}"


# ----------------------------------------------------------------------------------
# Separable kernels
# ----------------------------------------------------------------------------------
def _along_both_axes(kernel, grid: np.ndarray) -> np.ndarray:
    """Apply a last-axis kernel to the x2 axis, then to the x1 axis."""
    rows = kernel(grid)
    return np.swapaxes(kernel(np.swapaxes(rows, -1, -2)), -1, -2)


def rect_analysis(grid: np.ndarray) -> np.ndarray:
    """``D[b1, b2]``: integer tensor coefficients, ``<1_U, w_b1 (x) w_b2> = s1 s2 D / 4^N``."""
    return _along_both_axes(haar_analysis, np.asarray(grid, dtype=np.int64))


def _slot_interval(slot: int) -> Optional[DyadicInterval]:
    if slot == 0:
        return None
    level = slot.bit_length() - 1
    return DyadicInterval(level, slot - (1 << level))


def _slot_scale(slot: int) -> ExactScalar:
    return ExactScalar.one() if slot == 0 else pow_sqrt2(slot.bit_length() - 1)


# ----------------------------------------------------------------------------------
# Coefficients
# ----------------------------------------------------------------------------------
def rect_coefficient(U: DyadicSet2D, R: Rectangle) -> ExactScalar:
    """
    ``<1_U, h_R1 (x) h_R2>`` by summing U's cells over the four quadrants of ``R1 x R2``.

    :raises ValueError: "below resolution" when a side has level >= N.
    """
    I1, I2 = R
    if I1.level >= U.resolution or I2.level >= U.resolution:
        raise ValueError("below resolution")
    grid = U.to_array().astype(np.int64)
    N = U.resolution

    def quadrant(J1: DyadicInterval, J2: DyadicInterval) -> int:
        lo1, hi1 = J1.cell_range(N)
        lo2, hi2 = J2.cell_range(N)
        return int(grid[lo1:hi1, lo2:hi2].sum())

    signed = (
            quadrant(I1.plus, I2.plus) - quadrant(I1.plus, I2.minus)
            - quadrant(I1.minus, I2.plus) + quadrant(I1.minus, I2.minus)
    )
    return pow_sqrt2(I1.level + I2.level) * Fraction(signed, U.cell_count)


@dataclass(frozen=True)
class RectCoefficientMap:
    """Coefficients over the complete truncated tensor system, mean slots included."""

    resolution: int
    coeffs: Dict[TensorSlot, ExactScalar] = field(default_factory=dict)

    def __getitem__(self, slot: TensorSlot) -> ExactScalar:
        return self.coeffs.get(slot, ExactScalar.zero())

    def energy(self) -> ExactScalar:
        total = ExactScalar.zero()
        for value in self.coeffs.values():
            total = total + value * value
        return total


def rect_coefficient_map(U: DyadicSet2D) -> RectCoefficientMap:
    D = rect_analysis(U.to_array())
    side = U.side
    denominator = Fraction(1, U.cell_count)
    coeffs: Dict[TensorSlot, ExactScalar] = {}
    for b1 in range(side):
        for b2 in range(side):
            coeffs[(_slot_interval(b1), _slot_interval(b2))] = (
                    _slot_scale(b1) * _slot_scale(b2) * (int(D[b1, b2]) * denominator)
            )
    return RectCoefficientMap(U.resolution, coeffs)


def square_numerators_grid(grid: np.ndarray, include_mean: bool = True) -> np.ndarray:
    """``16^N S(1_U)^2`` for (batches of) 0/1 grids; without ``include_mean`` only Haar x Haar rectangles count."""
    D = rect_analysis(grid)

    def spread(values: np.ndarray) -> np.ndarray:
        return spread_levels(values, include_mean=include_mean)

    return _along_both_axes(spread, D ** 2)


def square_numerators_2d(U: DyadicSet2D, include_mean: bool = True) -> np.ndarray:
    return square_numerators_grid(U.to_array(), include_mean)


def biparameter_square_function(U: DyadicSet2D, include_mean: bool = True) -> StepFunction:
    """
    Cellwise ``sum_R <1_U, h_R>^2 / |R| 1_R`` in row-major cell order. ``include_mean`` completes the sum with the
    mean (x) Haar and mean (x) mean terms, which makes ``int S^2 = |U|``.
    """
    numerators = square_numerators_2d(U, include_mean).reshape(-1)
    scale = 1 << (4 * U.resolution)
    weight = Fraction(1, U.cell_count)
    return StepFunction(
        weights=(weight,) * U.cell_count,
        values=tuple(Fraction(int(n), scale) for n in numerators),
    )


def square_energy_2d(U: DyadicSet2D, include_mean: bool = True) -> Fraction:
    """``int_U S(1_U)^2`` exactly."""
    if U.is_empty():
        raise ValueError("empty set")
    numerators = square_numerators_2d(U, include_mean)
    inside = int(np.sum(numerators[U.to_array().astype(bool)], dtype=object))
    return Fraction(inside, 1 << (6 * U.resolution))


# ----------------------------------------------------------------------------------
# Tensor shift
# ----------------------------------------------------------------------------------
@dataclass(frozen=True)
class TensorShiftEnergy:
    inside: ExactScalar
    total: ExactScalar
    pairing: ExactScalar
    measure: Fraction

    @property
    def ratio(self) -> ExactScalar:
        return self.inside / self.measure


def tensor_shift_values(grid: np.ndarray) -> np.ndarray:
    """``4^N T_[2] 1_U`` on the grid (integers)."""
    D = rect_analysis(grid)
    shifted = _along_both_axes(haar_shift_indices, D)
    return _along_both_axes(haar_synthesis, shifted)


def tensor_shift_energy(U: DyadicSet2D) -> TensorShiftEnergy:
    """
    ``int_U (T_[2] 1_U)^2``, ``int (T_[2] 1_U)^2`` and ``<T_[2] 1_U, 1_U>``, with the mean and the unpaired top
    Haar function annihilated on each axis.

    :raises ValueError: "empty set" for an empty U.
    """
    if U.is_empty():
        raise ValueError("empty set")
    N = U.resolution
    grid = U.to_array()
    G = tensor_shift_values(grid).astype(object)
    inside_mask = grid.astype(bool)
    # G / 4^N sampled on cells of area 4^-N
    square_den = 1 << (6 * N)
    return TensorShiftEnergy(
        inside=ExactScalar(Fraction(int(np.sum(G[inside_mask] ** 2)), square_den)),
        total=ExactScalar(Fraction(int(np.sum(G ** 2)), square_den)),
        pairing=ExactScalar(Fraction(int(np.sum(G[inside_mask])), 1 << (4 * N))),
        measure=U.measure,
    )


# ----------------------------------------------------------------------------------
# Dense oracles
# ----------------------------------------------------------------------------------
def shift_operator_1d(resolution: int) -> np.ndarray:
    """Integer matrix ``A`` with ``2^N T 1_V = A @ 1_V`` on cell vectors."""
    identity = np.eye(1 << resolution, dtype=np.int64)
    return haar_synthesis(haar_shift_indices(haar_analysis(identity))).T


def dense_shift_operator(resolution: int) -> np.ndarray:
    """
    ``kron(A, A)``: the 4^N x 4^N integer matrix of ``4^N T_[2]`` on row-major cell vectors.
    Only for N <= 3.
    """
    if resolution > MAX_DENSE_ORACLE_RESOLUTION:
        raise ValueError(f"Dense oracle supports N <= {MAX_DENSE_ORACLE_RESOLUTION}, got {resolution}")
    A = shift_operator_1d(resolution)
    logger.debug("Building dense tensor shift oracle at N={}", resolution)
    return np.kron(A, A)


def dense_tensor_shift_energy(U: DyadicSet2D) -> TensorShiftEnergy:
    if U.is_empty():
        raise ValueError("empty set")
    N = U.resolution
    vector = U.to_array().reshape(-1).astype(np.int64)
    G = (dense_shift_operator(N) @ vector).astype(object)
    inside_mask = vector.astype(bool)
    square_den = 1 << (6 * N)
    return TensorShiftEnergy(
        inside=ExactScalar(Fraction(int(np.sum(G[inside_mask] ** 2)), square_den)),
        total=ExactScalar(Fraction(int(np.sum(G ** 2)), square_den)),
        pairing=ExactScalar(Fraction(int(np.sum(G[inside_mask])), 1 << (4 * N))),
        measure=U.measure,
    )


def tensor_shift_matrix(resolution: int) -> np.ndarray:
    """``T_[2]`` on the paired (x) paired span: ``kron(M, M)``, symmetric with square equal to the identity."""
    M = shift_matrix(resolution)
    return np.kron(M, M)
