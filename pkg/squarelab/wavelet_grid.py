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
Floating-point wavelet square functions on a periodic grid of G = 2^g samples over [0,1).

Samples are read as coefficients against the level g scaling functions (``c = s / sqrt(G)``), so after a full
cascade the coefficient array has the same layout as the exact Haar kernels: slot 0 is the scaling coefficient and
slot ``2^j + k`` the wavelet of interval ``(j, k)``. The highpass filter is ``g[n] = (-1)^(n+1) h[L-1-n]``, which
makes the Haar wavelet ``1_{I+} - 1_{I-}`` as in the exact modules.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from squarelab.config import (
    FILTER_TAPS,
    MONTE_CARLO_BLOCK,
    ORTHONORMALITY_TOLERANCE,
    PRNG_NAME,
    VANISHING_MOMENTS,
)
from squarelab.haar_line import DyadicSet


# ----------------------------------------------------------------------------------
# Filters and signals
# ----------------------------------------------------------------------------------
@dataclass(frozen=True)
class WaveletFilter:
    name: str
    taps: Tuple[float, ...]
    vanishing_moments: int

    @property
    def lowpass(self) -> np.ndarray:
        return np.asarray(self.taps, dtype=np.float64)

    @property
    def highpass(self) -> np.ndarray:
        h = self.lowpass
        L = len(h)
        return np.array([(-1) ** (n + 1) * h[L - 1 - n] for n in range(L)], dtype=np.float64)

    def validate(self, grid_exponent: int = 8, seed: int = 0) -> float:
        """
        Max abs reconstruction error of analysis followed by synthesis on a random signal.

        :raises ValueError: if the error exceeds the orthonormality tolerance.
        """
        rng = np.random.Generator(np.random.Philox(key=seed))
        signal = GridSignal(rng.standard_normal(1 << grid_exponent))
        coefficients = dwt_forward(signal, self, grid_exponent)
        error = float(np.max(np.abs(dwt_inverse(coefficients, self, grid_exponent).values - signal.values)))
        if error > ORTHONORMALITY_TOLERANCE:
            raise ValueError(f"Filter '{self.name}' fails perfect reconstruction: max error {error:.3e}")
        return error


@lru_cache(maxsize=None)
def get_filter(name: str) -> WaveletFilter:
    """Filter from the tap table, validated once per process."""
    key = name.lower()
    if key not in FILTER_TAPS:
        raise ValueError(f"Unknown filter '{name}', expected one of {sorted(FILTER_TAPS)}")
    wavelet = WaveletFilter(key, tuple(FILTER_TAPS[key]), VANISHING_MOMENTS[key])
    error = wavelet.validate()
    logger.debug("Filter {} validated, reconstruction error {:.2e}", key, error)
    return wavelet


@dataclass(frozen=True)
class GridSignal:
    """Samples on ``[i/G, (i+1)/G)``; batched signals keep the grid on the last axis."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        size = values.shape[-1]
        if size < 1 or size & (size - 1):
            raise ValueError(f"Grid length must be a power of two, got {size}")
        if not np.all(np.isfinite(values)):
            raise ValueError("Grid signal contains NaN or Inf")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_set(cls, V: DyadicSet, grid_exponent: int) -> GridSignal:
        if V.resolution > grid_exponent:
            raise ValueError(f"Set resolution {V.resolution} exceeds grid exponent {grid_exponent}")
        cells = V.to_array().astype(np.float64)
        return cls(np.repeat(cells, 1 << (grid_exponent - V.resolution)))

    @property
    def size(self) -> int:
        return self.values.shape[-1]

    @property
    def grid_exponent(self) -> int:
        return self.size.bit_length() - 1

    def integral(self) -> np.ndarray | float:
        return self.values.mean(axis=-1)


# ----------------------------------------------------------------------------------
# Periodic filter bank
# ----------------------------------------------------------------------------------
def _positions(n: int, L: int) -> np.ndarray:
    return (2 * np.arange(n // 2)[:, None] + np.arange(L)[None, :]) % n


def _analysis_step(x: np.ndarray, h: np.ndarray, g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    windows = x[..., _positions(x.shape[-1], len(h))]
    return windows @ h, windows @ g


def _synthesis_step(approx: np.ndarray, detail: np.ndarray, h: np.ndarray, g: np.ndarray) -> np.ndarray:
    n = 2 * approx.shape[-1]
    x = np.zeros(approx.shape[:-1] + (n,), dtype=np.float64)
    base = 2 * np.arange(n // 2)
    for m in range(len(h)):
        # positions are distinct for a fixed tap
        x[..., (base + m) % n] += h[m] * approx + g[m] * detail
    return x


def _check_levels(size: int, levels: int) -> int:
    g = size.bit_length() - 1
    if not 0 <= levels <= g:
        raise ValueError(f"levels={levels} too deep for a grid of 2^{g} samples")
    return g


def dwt_forward(s: GridSignal, f: WaveletFilter, levels: int) -> np.ndarray:
    """
    Periodic cascade: returns ``[approx, detail(coarsest), ..., detail(finest)]`` along the last axis.
    """
    g = _check_levels(s.size, levels)
    h, hp = f.lowpass, f.highpass
    approx = s.values / np.sqrt(s.size)
    details: List[np.ndarray] = []
    for _ in range(levels):
        approx, detail = _analysis_step(approx, h, hp)
        details.append(detail)
    logger.trace("Forward transform of 2^{} samples, {} levels", g, levels)
    return np.concatenate([approx, *reversed(details)], axis=-1)


def dwt_inverse(coefficients: np.ndarray, f: WaveletFilter, levels: int) -> GridSignal:
    coefficients = np.asarray(coefficients, dtype=np.float64)
    size = coefficients.shape[-1]
    _check_levels(size, levels)
    h, hp = f.lowpass, f.highpass
    start = size >> levels
    approx = coefficients[..., :start]
    while start < size:
        detail = coefficients[..., start: 2 * start]
        approx = _synthesis_step(approx, detail, h, hp)
        start *= 2
    return GridSignal(approx * np.sqrt(size))


# ----------------------------------------------------------------------------------
# Square function
# ----------------------------------------------------------------------------------
def _level_slices(size: int, levels: int) -> List[Tuple[slice, int]]:
    """(slice of the coefficient array, stride in samples) for the scaling block and each detail level."""
    g = size.bit_length() - 1
    start = size >> levels
    blocks = [(slice(0, start), 1 << levels)]
    j = g - levels
    while start < size:
        blocks.append((slice(start, 2 * start), 1 << (g - j)))
        start *= 2
        j += 1
    return blocks


def smooth_square_function(
        V: DyadicSet,
        f: WaveletFilter,
        grid_exponent: int,
        levels: Optional[int] = None,
        include_mean: bool = False,
) -> GridSignal:
    """
    Samples of ``sum_I <1_V, w_I>^2 w_I(x)^2``.

    Within a level every ``w_I`` is a circular shift of the first one, so each level is one circular convolution of
    the squared coefficients (spaced by the level's stride) with the squared profile of that first wavelet.
    """
    levels = grid_exponent if levels is None else levels
    signal = GridSignal.from_set(V, grid_exponent)
    size = signal.size
    coefficients = dwt_forward(signal, f, levels)

    total = np.zeros(size)
    for index, (block, stride) in enumerate(_level_slices(size, levels)):
        if index == 0 and not include_mean:
            continue
        unit = np.zeros(size)
        unit[block.start] = 1.0
        profile = dwt_inverse(unit, f, levels).values ** 2
        spikes = np.zeros(size)
        spikes[::stride] = coefficients[block] ** 2
        total += np.fft.irfft(np.fft.rfft(spikes) * np.fft.rfft(profile), n=size)
    return GridSignal(np.maximum(total, 0.0))


def square_ratio(V: DyadicSet, f: WaveletFilter, grid_exponent: int, include_mean: bool = False) -> float:
    """``int_V S^2 / |V|`` on the grid."""
    if V.is_empty():
        raise ValueError("empty set")
    square = smooth_square_function(V, f, grid_exponent, include_mean=include_mean)
    inside = GridSignal.from_set(V, grid_exponent).values.astype(bool)
    return float(square.values[inside].sum() / square.size / float(V.measure))


# ----------------------------------------------------------------------------------
# Monte Carlo estimation of chi(p)
# ----------------------------------------------------------------------------------
@dataclass(frozen=True)
class MonteCarloEstimate:
    estimate: float
    stderr: float
    trials: int
    seed: int
    grid: int
    p: float
    prng: str = PRNG_NAME


def _block_generator(seed: int, block: int) -> np.random.Generator:
    """Block b reads the Philox stream keyed by the seed, jumped b times."""
    bit_generator = np.random.Philox(key=seed)
    if block:
        bit_generator = bit_generator.jumped(block)
    return np.random.Generator(bit_generator)


def _block_cubes(job: Tuple[np.ndarray, np.ndarray, WaveletFilter, int, float, int, int, int]) -> np.ndarray:
    coefficients, system, f, levels, p, seed, block, count = job
    rng = _block_generator(seed, block)
    draws = rng.random((count, system.size)) < p
    randomized = np.zeros((count, coefficients.size))
    randomized[:, system] = draws * coefficients[system]
    phi = dwt_inverse(randomized, f, levels).values
    return np.mean(phi ** 3, axis=-1)


def chi_monte_carlo(
        V: DyadicSet,
        f: WaveletFilter,
        p: float,
        trials: int,
        seed: int,
        grid_exponent: Optional[int] = None,
        max_level: Optional[int] = None,
        workers: int = 1,
) -> MonteCarloEstimate:
    """
    Mean and standard error of ``int phi^3`` for ``phi = sum X_I <1_V, w_I> w_I`` over the wavelets of levels
    below ``max_level`` (default: every level of the grid).

    Trials are drawn in fixed blocks from per-block streams, so the estimate does not depend on ``workers``.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if trials < 100:
        raise ValueError(f"chi_monte_carlo needs at least 100 trials, got {trials}")
    grid_exponent = V.resolution if grid_exponent is None else grid_exponent
    max_level = grid_exponent if max_level is None else max_level
    if not 0 <= max_level <= grid_exponent:
        raise ValueError(f"max_level={max_level} outside 0..{grid_exponent}")

    signal = GridSignal.from_set(V, grid_exponent)
    coefficients = dwt_forward(signal, f, grid_exponent)
    system = np.arange(1, 1 << max_level)

    blocks = []
    remaining = trials
    block = 0
    while remaining > 0:
        count = min(MONTE_CARLO_BLOCK, remaining)
        blocks.append((coefficients, system, f, grid_exponent, p, seed, block, count))
        remaining -= count
        block += 1

    if workers > 1 and len(blocks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cubes = np.concatenate(list(pool.map(_block_cubes, blocks)))
    else:
        cubes = np.concatenate([_block_cubes(job) for job in blocks])

    estimate = float(np.mean(cubes))
    stderr = float(np.std(cubes, ddof=1) / np.sqrt(trials))
    logger.debug("chi_monte_carlo p={} trials={} seed={}: {} +- {}", p, trials, seed, estimate, stderr)
    return MonteCarloEstimate(estimate, stderr, trials, seed, grid_exponent, p)


@dataclass(frozen=True)
class CubicFit:
    W: Tuple[float, float, float]
    stderr: Tuple[float, float, float]
    points: Tuple[float, ...]


def fit_moment_cubic(estimates: Sequence[MonteCarloEstimate]) -> CubicFit:
    """
    Solves ``W1 p + W2 p^2 + W3 p^3 = estimate`` through three estimates and propagates their standard errors.
    """
    if len(estimates) != 3:
        raise ValueError(f"A cubic fit needs exactly three estimates, got {len(estimates)}")
    ps = np.array([e.p for e in estimates])
    if len(set(ps.tolist())) != 3 or np.any(ps == 0):
        raise ValueError(f"Fit points must be distinct and nonzero, got {ps.tolist()}")
    A = np.stack([ps, ps ** 2, ps ** 3], axis=1)
    y = np.array([e.estimate for e in estimates])
    inverse = np.linalg.inv(A)
    W = inverse @ y
    covariance = inverse @ np.diag([e.stderr ** 2 for e in estimates]) @ inverse.T
    return CubicFit(
        W=tuple(float(x) for x in W),
        stderr=tuple(float(x) for x in np.sqrt(np.diag(covariance))),
        points=tuple(float(x) for x in ps),
    )


@dataclass(frozen=True)
class EtaScan:
    min_ratio: float
    argmin: str
    evaluated: int
    filter: str
    grid: int


def smooth_eta_scan(
        f: WaveletFilter,
        resolution: int,
        grid_exponent: int,
        samples: int,
        seed: int,
        include_mean: bool = False,
) -> EtaScan:
    """
    Empirical lower bound of ``int_V S^2 / |V|`` over random sets plus the adversarial families of single cells
    and dyadic intervals at the given resolution.
    """
    rng = np.random.Generator(np.random.Philox(key=seed))
    cells = 1 << resolution
    candidates: List[DyadicSet] = [DyadicSet.from_cells(resolution, [c]) for c in range(cells)]
    for level in range(resolution):
        width = cells >> level
        candidates.extend(DyadicSet.from_cells(resolution, range(k * width, (k + 1) * width)) for k in range(1 << level))
    for _ in range(samples):
        bits = rng.random(cells) < 0.5
        if bits.any():
            candidates.append(DyadicSet.from_array(resolution, bits))

    best = None
    best_spec = ""
    for V in candidates:
        ratio = square_ratio(V, f, grid_exponent, include_mean)
        if best is None or ratio < best:
            best, best_spec = ratio, V.to_spec()
    logger.info("Scanned {} sets with {}: min ratio {:.6f} at {}", len(candidates), f.name, best, best_spec)
    return EtaScan(best, best_spec, len(candidates), f.name, grid_exponent)
