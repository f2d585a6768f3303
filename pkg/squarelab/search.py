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
Extremal set search for the four ratio objectives.

Every objective is ``numerator / (#cells(V) * scale(N))`` with an integer numerator computed by the integer Haar
kernels, so exact comparison is Fraction comparison. The best set is re-certified through the exact per-module
functions before a report is returned.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Literal, Optional, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field

from squarelab.config import (
    DEFAULT_ANNEAL_ITERS,
    DEFAULT_T_END,
    DEFAULT_T_START,
    MAX_ANNEAL_RESOLUTION_2D,
    MAX_EXHAUSTIVE_CELLS,
    MAX_RESOLUTION_1D,
    OBJECTIVE_NAMES,
    PRNG_NAME,
)
from squarelab.haar_line import (
    DyadicSet,
    dilate,
    haar_analysis,
    haar_shift_indices,
    haar_synthesis,
    shift_energy,
    square_energy,
    square_numerators,
)
from squarelab.martingale_core import LeafSet, equal_split_tree, local_energy, subtree
from squarelab.numeric_core import exact_str
from squarelab.tensor_plane import (
    DyadicSet2D,
    square_energy_2d,
    square_numerators_grid,
    tensor_shift_energy,
    tensor_shift_values,
)

Direction = Literal["minimize", "maximize"]


# ----------------------------------------------------------------------------------
# Objectives
# ----------------------------------------------------------------------------------
def _masked_sum(values: np.ndarray, cells: np.ndarray) -> np.ndarray:
    """Row sums of ``values`` over member cells, exact for any size."""
    products = values * cells
    if products.shape[-1] > 4096:
        return np.sum(products.astype(object), axis=-1)
    return products.sum(axis=-1)


def _mart_eta_numerators(cells: np.ndarray, resolution: int) -> np.ndarray:
    return _masked_sum(square_numerators(haar_analysis(cells)), cells)


def _shift_ratio_numerators(cells: np.ndarray, resolution: int) -> np.ndarray:
    g = haar_synthesis(haar_shift_indices(haar_analysis(cells)))
    return _masked_sum(g * g, cells)


def _as_grid(cells: np.ndarray, resolution: int) -> np.ndarray:
    side = 1 << resolution
    return cells.reshape(*cells.shape[:-1], side, side)


def _tensor_square_numerators(cells: np.ndarray, resolution: int) -> np.ndarray:
    numerators = square_numerators_grid(_as_grid(cells, resolution)).reshape(cells.shape)
    return _masked_sum(numerators, cells)


def _tensor_shift_numerators(cells: np.ndarray, resolution: int) -> np.ndarray:
    G = tensor_shift_values(_as_grid(cells, resolution)).reshape(cells.shape)
    return _masked_sum(G * G, cells)


def _mart_eta_exact(mask: int, resolution: int) -> Fraction:
    V = DyadicSet(resolution, mask)
    return square_energy(V) / V.measure


def _shift_ratio_exact(mask: int, resolution: int) -> Fraction:
    return shift_energy(DyadicSet(resolution, mask)).ratio.to_fraction()


def _tensor_square_exact(mask: int, resolution: int) -> Fraction:
    U = DyadicSet2D(resolution, mask)
    return square_energy_2d(U) / U.measure


def _tensor_shift_exact(mask: int, resolution: int) -> Fraction:
    return tensor_shift_energy(DyadicSet2D(resolution, mask)).ratio.to_fraction()


@dataclass(frozen=True)
class Objective:
    """
    A ratio over nonempty dyadic sets. ``numerators`` works on batches of 0/1 cell rows; the ratio of a row is
    ``numerator / (#cells * 4^(dimension * N))``. ``exact`` recomputes the ratio through the set types.
    """

    name: str
    direction: Direction
    dimension: int
    numerators: Callable[[np.ndarray, int], np.ndarray]
    exact: Callable[[int, int], Fraction]
    positive: bool

    def cell_count(self, resolution: int) -> int:
        return 1 << (self.dimension * resolution)

    def scale(self, resolution: int) -> int:
        return 1 << (2 * self.dimension * resolution)

    def ratios(self, cells: np.ndarray, resolution: int) -> List[Fraction]:
        numerators = self.numerators(cells, resolution)
        counts = cells.sum(axis=-1)
        scale = self.scale(resolution)
        return [Fraction(int(n), int(c) * scale) for n, c in zip(np.atleast_1d(numerators), np.atleast_1d(counts))]

    def better(self, candidate: Fraction, incumbent: Optional[Fraction]) -> bool:
        if incumbent is None:
            return True
        return candidate < incumbent if self.direction == "minimize" else candidate > incumbent

    def spec(self, mask: int, resolution: int) -> str:
        if self.dimension == 1:
            return DyadicSet(resolution, mask).to_spec()
        return DyadicSet2D(resolution, mask).to_spec()


OBJECTIVES: Dict[str, Objective] = {
    "mart-eta": Objective("mart-eta", "minimize", 1, _mart_eta_numerators, _mart_eta_exact, True),
    "shift-ratio": Objective("shift-ratio", "maximize", 1, _shift_ratio_numerators, _shift_ratio_exact, False),
    "tensor-square-eta": Objective(
        "tensor-square-eta", "minimize", 2, _tensor_square_numerators, _tensor_square_exact, True
    ),
    "tensor-shift-ratio": Objective(
        "tensor-shift-ratio", "maximize", 2, _tensor_shift_numerators, _tensor_shift_exact, False
    ),
}


def get_objective(name: str) -> Objective:
    if name not in OBJECTIVES:
        raise ValueError(f"Unknown objective '{name}', expected one of {list(OBJECTIVE_NAMES)}")
    return OBJECTIVES[name]


# ----------------------------------------------------------------------------------
# Dilation covariance
# ----------------------------------------------------------------------------------
@dataclass(frozen=True)
class DilationCheck:
    """mart-eta ratios of a set inside [0,1/2): restricted to the half, of its dilation, and in the full model."""

    restricted: Fraction
    dilated: Fraction
    full: Fraction

    @property
    def covariant(self) -> bool:
        return self.restricted == self.dilated


def mart_eta_dilation(V: DyadicSet) -> DilationCheck:
    """
    Compares the mart-eta ratio of ``V`` computed in the conditional filtration on [0,1/2) with the ratio of its
    dilation at resolution N-1. The two agree exactly; the ratio of ``V`` in the full model on [0,1) differs in
    general because the levels above [0,1/2) still contribute.

    :param V: A nonempty set contained in [0,1/2).
    :return: The three ratios.
    :raises ValueError: if ``V`` is empty or leaves [0,1/2).
    """
    if V.is_empty():
        raise ValueError("empty set")
    dilated = dilate(V)
    half = subtree(equal_split_tree(V.resolution), [0])
    restricted = local_energy(half, LeafSet.from_leaf_ids(half, V.cells())).ratio.to_fraction()
    return DilationCheck(
        restricted=restricted,
        dilated=_mart_eta_exact(dilated.mask, dilated.resolution),
        full=_mart_eta_exact(V.mask, V.resolution),
    )


# ----------------------------------------------------------------------------------
# Reports
# ----------------------------------------------------------------------------------
class TraceEntry(BaseModel):
    step: int = Field(description="Mask value (exhaustive) or iteration (anneal) of the improvement")
    mask: str
    ratio: str


class SearchReport(BaseModel):
    objective: str
    direction: Direction
    resolution: int
    mode: Literal["exhaustive", "anneal"]
    best_mask: str = Field(description="Hex mask of the best set, cell i is bit i (row-major in 2D)")
    best_spec: str
    best_ratio: str = Field(description="Exact best ratio as n/d")
    best_ratio_float: float
    visited: int
    seed: Optional[int] = None
    prng: Optional[str] = None
    iters: Optional[int] = None
    t_start: Optional[float] = None
    t_end: Optional[float] = None
    trace: List[TraceEntry] = Field(default_factory=list)
    full_set_ratio: str
    best_is_full: bool
    best_is_singleton: bool
    complement_ratio: Optional[str] = Field(
        default=None,
        description="mart-eta only: ratio of the complement of the best set, when nonempty",
    )

    def best_fraction(self) -> Fraction:
        return Fraction(self.best_ratio)

    def certify(self) -> SearchReport:
        """
        Re-evaluates the best set through the exact set functions.

        :raises RuntimeError: if the stored ratio disagrees.
        """
        objective = get_objective(self.objective)
        value = objective.exact(int(self.best_mask, 16), self.resolution)
        if value != self.best_fraction():
            raise RuntimeError(
                f"Report for {self.objective} claims {self.best_ratio} but the set evaluates to {value}"
            )
        return self

    def best_measure(self) -> Fraction:
        cells = get_objective(self.objective).cell_count(self.resolution)
        return Fraction(int(self.best_mask, 16).bit_count(), cells)

    def results(self) -> Dict[str, Fraction | int]:
        return {
            "best_ratio": self.best_fraction(),
            "measure": self.best_measure(),
            "full_set_ratio": Fraction(self.full_set_ratio),
            "visited": self.visited,
        }


class CounterexampleFound(RuntimeError):
    """A positivity objective reached zero; carries the offending report."""

    def __init__(self, report: SearchReport):
        super().__init__(f"{report.objective} reached {report.best_ratio} at {report.best_spec}")
        self.report = report


def _finish(
        objective: Objective,
        resolution: int,
        mode: str,
        best_mask: int,
        best_ratio: Fraction,
        visited: int,
        trace: List[TraceEntry],
        **extra,
) -> SearchReport:
    cell_count = objective.cell_count(resolution)
    full_mask = (1 << cell_count) - 1
    complement_ratio = None
    if objective.name == "mart-eta" and best_mask != full_mask:
        complement_ratio = exact_str(objective.exact(full_mask ^ best_mask, resolution))

    report = SearchReport(
        objective=objective.name,
        direction=objective.direction,
        resolution=resolution,
        mode=mode,
        best_mask=hex(best_mask),
        best_spec=objective.spec(best_mask, resolution),
        best_ratio=exact_str(best_ratio),
        best_ratio_float=float(best_ratio),
        visited=visited,
        trace=trace,
        full_set_ratio=exact_str(objective.exact(full_mask, resolution)),
        best_is_full=best_mask == full_mask,
        best_is_singleton=best_mask.bit_count() == 1,
        complement_ratio=complement_ratio,
        **extra,
    ).certify()

    if objective.positive and best_ratio <= 0:
        logger.error("Counterexample for {}: ratio {} at {}", objective.name, best_ratio, report.best_spec)
        raise CounterexampleFound(report)
    return report


# ----------------------------------------------------------------------------------
# Exhaustive search
# ----------------------------------------------------------------------------------
def _mask_rows(masks: np.ndarray, cell_count: int) -> np.ndarray:
    bits = np.arange(cell_count, dtype=np.int64)
    return (masks[:, None] >> bits) & 1


def _scan_chunk(job: Tuple[str, int, int, int]) -> Tuple[int, List[Tuple[int, Fraction]]]:
    """Local improvements, in mask order, for masks in ``[start, stop)``."""
    name, resolution, start, stop = job
    objective = OBJECTIVES[name]
    masks = np.arange(start, stop, dtype=np.int64)
    ratios = objective.ratios(_mask_rows(masks, objective.cell_count(resolution)), resolution)
    improvements: List[Tuple[int, Fraction]] = []
    best = None
    for mask, ratio in zip(masks.tolist(), ratios):
        if objective.better(ratio, best):
            best = ratio
            improvements.append((mask, ratio))
    return stop - start, improvements


def exhaustive_search(objective: Objective, resolution: int, workers: int = 1) -> SearchReport:
    """
    Evaluates every nonempty set. Ties keep the lowest mask; chunk results merge in mask order, so the report is
    the same for any worker count.

    :raises ValueError: "too many cells" above 16 cells.
    """
    cell_count = objective.cell_count(resolution)
    if cell_count > MAX_EXHAUSTIVE_CELLS:
        raise ValueError(f"too many cells: {cell_count} (limit {MAX_EXHAUSTIVE_CELLS})")
    total = (1 << cell_count) - 1
    chunk = 4096
    jobs = [(objective.name, resolution, start, min(start + chunk, total + 1)) for start in range(1, total + 1, chunk)]

    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_scan_chunk, jobs))
    else:
        results = [_scan_chunk(job) for job in jobs]

    best_mask, best_ratio = 0, None
    trace: List[TraceEntry] = []
    visited = 0
    for count, improvements in results:
        visited += count
        for mask, ratio in improvements:
            if objective.better(ratio, best_ratio):
                best_mask, best_ratio = mask, ratio
                trace.append(TraceEntry(step=mask, mask=hex(mask), ratio=exact_str(ratio)))

    logger.info("Exhaustive {} at N={}: best {} at {}", objective.name, resolution, best_ratio, hex(best_mask))
    return _finish(objective, resolution, "exhaustive", best_mask, best_ratio, visited, trace)


# ----------------------------------------------------------------------------------
# Simulated annealing
# ----------------------------------------------------------------------------------
def anneal_search(
        objective: Objective,
        resolution: int,
        iters: int = DEFAULT_ANNEAL_ITERS,
        t_start: float = DEFAULT_T_START,
        t_end: float = DEFAULT_T_END,
        seed: int = 0,
) -> SearchReport:
    """
    Single-cell-flip annealing with geometric cooling from ``t_start`` to ``t_end``. The Metropolis step uses
    float ratios; the best set is tracked and reported exactly.
    """
    limit = MAX_RESOLUTION_1D if objective.dimension == 1 else MAX_ANNEAL_RESOLUTION_2D
    if not 0 <= resolution <= limit:
        raise ValueError(f"Resolution N={resolution} outside 0..{limit} for {objective.name}")
    if iters < 1 or t_start <= 0 or t_end <= 0:
        raise ValueError(f"Invalid schedule: iters={iters}, t_start={t_start}, t_end={t_end}")

    rng = np.random.Generator(np.random.Philox(key=seed))
    cell_count = objective.cell_count(resolution)
    cells = (rng.random(cell_count) < 0.5).astype(np.int64)
    if not cells.any():
        cells[int(rng.integers(cell_count))] = 1

    def evaluate(row: np.ndarray) -> Fraction:
        return objective.ratios(row[None, :], resolution)[0]

    sign = 1.0 if objective.direction == "minimize" else -1.0
    current = evaluate(cells)
    best_cells, best_ratio = cells.copy(), current
    trace = [TraceEntry(step=0, mask=hex(_row_mask(cells)), ratio=exact_str(current))]
    visited = 1
    cooling = (t_end / t_start) ** (1.0 / max(1, iters - 1))

    temperature = t_start
    for step in range(1, iters + 1):
        cell = int(rng.integers(cell_count))
        u = rng.random()
        cells[cell] ^= 1
        if not cells.any():
            cells[cell] ^= 1
            temperature *= cooling
            continue
        candidate = evaluate(cells)
        visited += 1
        delta = sign * (float(candidate) - float(current))
        if delta <= 0 or u < math.exp(-delta / temperature):
            current = candidate
            if objective.better(candidate, best_ratio):
                best_cells, best_ratio = cells.copy(), candidate
                trace.append(TraceEntry(step=step, mask=hex(_row_mask(cells)), ratio=exact_str(candidate)))
        else:
            cells[cell] ^= 1
        temperature *= cooling

    best_mask = _row_mask(best_cells)
    logger.info("Anneal {} at N={} seed={}: best {} after {} evaluations",
                objective.name, resolution, seed, best_ratio, visited)
    return _finish(
        objective, resolution, "anneal", best_mask, best_ratio, visited, trace,
        seed=seed, prng=PRNG_NAME, iters=iters, t_start=t_start, t_end=t_end,
    )


def _row_mask(cells: np.ndarray) -> int:
    packed = np.packbits(cells.astype(np.uint8), bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")
