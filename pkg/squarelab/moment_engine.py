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
The moment polynomial ``chi(p) = E int phi^3`` of a randomized expansion ``phi = sum_k X_k t_k`` of an indicator,
where the ``X_k`` are independent Bernoulli(p) variables.

Two independent paths compute it: closed-form coefficients (``M1 p + M2 p^2`` for martingale differences,
``W1 p + W2 p^2 + W3 p^3`` for a Haar system) and a brute-force enumeration of all ``2^K`` Bernoulli
configurations. Both are exact; they must agree coefficient by coefficient.

Worked enumeration, two equal leaves with V = leaf 1 and the root included: ``d_0 = 1/2`` everywhere,
``d_1 = (1/2, -1/2)``. The configurations {}, {0}, {1}, {0,1} give ``int phi^3 = 0, 1/8, 0, 1/2`` with weights
``(1-p)^2, p(1-p), p(1-p), p^2``, so ``chi(p) = p(1-p)/8 + p^2/2 = p/8 + 3p^2/8``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from squarelab.config import MAX_ENUMERATION_INDICES
from squarelab.haar_line import DyadicInterval, DyadicSet, all_intervals, haar_coefficient
from squarelab.martingale_core import FiltrationTree, LeafSet, StepFunction, differences, local_energy, square_function
from squarelab.numeric_core import (
    ExactScalar,
    Number,
    PolyP,
    exact_entry,
    exact_str,
    poly_eval,
    poly_from_long,
    pow_sqrt2,
    scalar_sum,
)

ModeName = Literal["martingale", "wavelet"]


# ----------------------------------------------------------------------------------
# Index sets and expansions
# ----------------------------------------------------------------------------------
@dataclass(frozen=True)
class BernoulliIndex:
    """Labels of the independent Bernoulli variables: one per level (martingale) or per interval (wavelet)."""

    mode: ModeName
    labels: Tuple[str, ...]

    def __post_init__(self):
        if self.mode not in ("martingale", "wavelet"):
            raise ValueError(f"Unknown Bernoulli index mode '{self.mode}'")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"Bernoulli index labels must be distinct: {self.labels}")

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class HaarSystem:
    """A finite family of distinct Haar intervals, all above resolution N."""

    resolution: int
    intervals: Tuple[DyadicInterval, ...]

    def __post_init__(self):
        if len(set(self.intervals)) != len(self.intervals):
            raise ValueError("Haar system intervals must be distinct")
        for I in self.intervals:
            if I.level >= self.resolution:
                raise ValueError("below resolution")

    @classmethod
    def parse(cls, text: str, resolution: int) -> HaarSystem:
        """Parses ``"0:0,1:0"``; the literal ``"all"`` is every interval of level < N."""
        if text.strip().lower() == "all":
            return cls.complete(resolution)
        intervals = tuple(DyadicInterval.parse(token) for token in text.split(",") if token.strip())
        return cls(resolution, intervals)

    @classmethod
    def complete(cls, resolution: int) -> HaarSystem:
        return cls(resolution, tuple(all_intervals(resolution)))

    def is_complete(self) -> bool:
        return set(self.intervals) == set(all_intervals(self.resolution))

    def __len__(self) -> int:
        return len(self.intervals)


@dataclass(frozen=True)
class Expansion:
    """
    Terms ``t_k`` (values per atom) of an expansion of ``1_V`` on a weighted partition, one per Bernoulli index.
    """

    weights: Tuple[Fraction, ...]
    terms: Tuple[Tuple[Number, ...], ...]
    indicator: Tuple[Fraction, ...]
    index: BernoulliIndex

    def __post_init__(self):
        if len(self.terms) != len(self.index):
            raise ValueError(f"{len(self.terms)} terms for {len(self.index)} Bernoulli indices")

    def term_sum(self) -> Tuple[ExactScalar, ...]:
        return tuple(scalar_sum(term[i] for term in self.terms) for i in range(len(self.weights)))

    def is_complete(self) -> bool:
        return all(s == v for s, v in zip(self.term_sum(), self.indicator))


def martingale_expansion(tree: FiltrationTree, V: LeafSet, include_root: bool = True) -> Expansion:
    ds = differences(tree, V, include_root)
    return Expansion(
        weights=tree.leaf_masses,
        terms=tuple(d.values for d in ds),
        indicator=V.indicator().values,
        index=BernoulliIndex("martingale", tuple(f"d{d.level}" for d in ds)),
    )


def haar_expansion(system: HaarSystem, V: DyadicSet, include_mean: bool = False) -> Expansion:
    """
    Terms ``<1_V, h_I> h_I`` on the cells of V's resolution; ``include_mean`` adds the constant term as one more
    Bernoulli index so that a complete system sums to ``1_V``.
    """
    if V.resolution != system.resolution:
        raise ValueError(f"Set resolution {V.resolution} does not match system resolution {system.resolution}")
    N = V.resolution
    cells = 1 << N
    terms: List[Tuple[Number, ...]] = []
    labels: List[str] = []
    if include_mean:
        terms.append((V.measure,) * cells)
        labels.append("mean")
    for I in system.intervals:
        height = haar_coefficient(V, I) * pow_sqrt2(I.level)
        values: List[Number] = [Fraction(0)] * cells
        lo, mid = I.minus.cell_range(N)
        _, hi = I.plus.cell_range(N)
        for c in range(lo, mid):
            values[c] = -height
        for c in range(mid, hi):
            values[c] = height
        terms.append(tuple(values))
        labels.append(I.to_spec())
    return Expansion(
        weights=(Fraction(1, cells),) * cells,
        terms=tuple(terms),
        indicator=tuple(Fraction(int(V.contains_cell(c))) for c in range(cells)),
        index=BernoulliIndex("wavelet", tuple(labels)),
    )


# ----------------------------------------------------------------------------------
# Closed-form coefficients
# ----------------------------------------------------------------------------------
@dataclass(frozen=True)
class MomentCoefficients:
    mode: ModeName
    M1: Optional[ExactScalar] = None
    M2: Optional[ExactScalar] = None
    W1: Optional[ExactScalar] = None
    W2: Optional[ExactScalar] = None
    W3: Optional[ExactScalar] = None

    def polynomial(self) -> PolyP:
        if self.mode == "martingale":
            return PolyP([0, self.M1, self.M2, 0])
        return PolyP([0, self.W1, self.W2, self.W3])

    def chi_at_one(self) -> ExactScalar:
        return poly_eval(self.polynomial(), 1)

    def to_dict(self) -> Dict[str, dict]:
        names = ("M1", "M2") if self.mode == "martingale" else ("W1", "W2", "W3")
        return {name: exact_entry(getattr(self, name)) for name in names}


def _expect(weights: Sequence[Fraction], values: Sequence[Number]) -> ExactScalar:
    return scalar_sum(w * v for w, v in zip(weights, values))


def martingale_moment_coefficients(tree: FiltrationTree, V: LeafSet, include_root: bool = True) -> MomentCoefficients:
    """``M1 = sum_n E d_n^3`` and ``M2 = 3 sum_{m<n} E d_m d_n^2``, summed over leaves and index pairs directly."""
    ds = differences(tree, V, include_root)
    w = tree.leaf_masses
    M1 = scalar_sum(_expect(w, [v * v * v for v in d.values]) for d in ds)
    M2 = ExactScalar.zero()
    for n in range(len(ds)):
        for m in range(n):
            M2 = M2 + _expect(w, [a * b * b for a, b in zip(ds[m].values, ds[n].values)])
    return MomentCoefficients(mode="martingale", M1=M1, M2=3 * M2)


def chi_exact_martingale(tree: FiltrationTree, V: LeafSet, include_root: bool = True) -> PolyP:
    return martingale_moment_coefficients(tree, V, include_root).polynomial()


def haar_value(I: DyadicInterval, level: int, cell: int) -> ExactScalar:
    """``h_I`` on the dyadic cell ``(level, cell)``; needs ``level > level(I)``."""
    if level <= I.level:
        raise ValueError(f"h_{I.to_spec()} is not constant on cells of level {level}")
    if cell >> (level - I.level) != I.index:
        return ExactScalar.zero()
    child = (cell >> (level - I.level - 1)) & 1
    height = pow_sqrt2(I.level)
    return height if child else -height


def product_integral(intervals: Sequence[DyadicInterval]) -> ExactScalar:
    """
    ``int prod h_I`` over the given intervals (repeats allowed).

    Each ``h_I`` is constant on the children of I, so the integrand is summed over the two cells of level
    ``max(j) + 1`` inside the finest interval; any interval not containing it is disjoint from it.
    """
    finest = max(intervals, key=lambda I: I.level)
    level = finest.level + 1
    total = ExactScalar.zero()
    for cell in (2 * finest.index, 2 * finest.index + 1):
        value = ExactScalar.one()
        for I in intervals:
            value = value * haar_value(I, level, cell)
            if value.is_zero():
                break
        total = total + value
    return total * Fraction(1, 1 << level)


def wavelet_moment_coefficients(system: HaarSystem, V: DyadicSet) -> MomentCoefficients:
    """
    ``W1 = sum a_I^3 int h_I^3``, ``W2 = 3 sum_{I1 != I3} a_{I1}^2 a_{I3} int h_{I1}^2 h_{I3}`` and
    ``W3`` over ordered triples of distinct intervals, computed as 6 times the sum over unordered triples.
    """
    if V.resolution != system.resolution:
        raise ValueError(f"Set resolution {V.resolution} does not match system resolution {system.resolution}")
    intervals = system.intervals
    a = {I: haar_coefficient(V, I) for I in intervals}

    W1 = scalar_sum(a[I] ** 3 * product_integral((I, I, I)) for I in intervals)
    W2 = ExactScalar.zero()
    for I1 in intervals:
        for I3 in intervals:
            if I1 != I3 and not a[I1].is_zero() and not a[I3].is_zero():
                W2 = W2 + a[I1] * a[I1] * a[I3] * product_integral((I1, I1, I3))
    W3 = ExactScalar.zero()
    for I1, I2, I3 in combinations(intervals, 3):
        if a[I1].is_zero() or a[I2].is_zero() or a[I3].is_zero():
            continue
        W3 = W3 + a[I1] * a[I2] * a[I3] * product_integral((I1, I2, I3))
    return MomentCoefficients(mode="wavelet", W1=W1, W2=3 * W2, W3=6 * W3)


def projection_cube(system: HaarSystem, V: DyadicSet) -> ExactScalar:
    """``int (Pi 1_V)^3`` where ``Pi`` projects onto the span of the system."""
    expansion = haar_expansion(system, V)
    return _expect(expansion.weights, [s ** 3 for s in expansion.term_sum()])


# ----------------------------------------------------------------------------------
# Enumeration oracle
# ----------------------------------------------------------------------------------
@dataclass(frozen=True)
class _IntegerExpansion:
    rational: np.ndarray    # K x m numerators of the rational parts
    radical: np.ndarray     # K x m numerators of the sqrt(2) parts
    weights: np.ndarray     # m integer weights
    denominator: int        # common denominator of all term values
    weight_denominator: int
    dtype: object


def _integerize(expansion: Expansion) -> _IntegerExpansion:
    scalars = [[ExactScalar.coerce(v) for v in term] for term in expansion.terms]
    denominator = 1
    for row in scalars:
        for s in row:
            denominator = math.lcm(denominator, s.a.denominator, s.b.denominator)
    weight_denominator = 1
    for w in expansion.weights:
        weight_denominator = math.lcm(weight_denominator, w.denominator)

    rational = [[int(s.a * denominator) for s in row] for row in scalars]
    radical = [[int(s.b * denominator) for s in row] for row in scalars]
    weights = [int(w * weight_denominator) for w in expansion.weights]

    # phi^3 against the weights must stay inside int64, otherwise fall back to Python ints
    bound = 0
    for i in range(len(weights)):
        column = sum(abs(row[i]) for row in rational) + 2 * sum(abs(row[i]) for row in radical)
        bound = max(bound, column)
    has_radical = any(any(row) for row in radical)
    dtype = np.int64 if not has_radical and 8 * bound ** 3 * max(1, sum(weights)) < 2 ** 62 else object

    shape = (len(rational), len(weights))
    return _IntegerExpansion(
        rational=np.array(rational, dtype=dtype).reshape(shape),
        radical=np.array(radical, dtype=object).reshape(shape),
        weights=np.array(weights, dtype=dtype),
        denominator=denominator,
        weight_denominator=weight_denominator,
        dtype=dtype,
    )


def _subset_table(rows: np.ndarray) -> np.ndarray:
    """Row ``s`` of the result is the sum of ``rows[k]`` over the bits k of s."""
    table = np.zeros((1, rows.shape[1]), dtype=rows.dtype)
    for row in rows:
        table = np.concatenate([table, table + row], axis=0)
    return table


def _enumerate_block(job: Tuple[_IntegerExpansion, int, int, int]) -> Tuple[List[int], List[int]]:
    """
    Totals of ``sum_atoms w phi_S^3`` grouped by ``|S|`` for every configuration whose high bits lie in
    ``[high_start, high_stop)``. Returns the rational and sqrt(2) parts separately.
    """
    data, low_bits, high_start, high_stop = job
    K = data.rational.shape[0]
    low_rational = _subset_table(data.rational[:low_bits])
    has_radical = any(int(x) != 0 for x in data.radical.flat)
    low_radical = _subset_table(data.radical[:low_bits]) if has_radical else None
    low_popcount = np.array([bin(s).count("1") for s in range(1 << low_bits)], dtype=np.int64)
    high_rows = data.rational[low_bits:]
    high_radical_rows = data.radical[low_bits:]

    totals_a = [0] * (K + 1)
    totals_b = [0] * (K + 1)
    for high in range(high_start, high_stop):
        bits = [k for k in range(K - low_bits) if high >> k & 1]
        offset = high_rows[bits].sum(axis=0) if bits else 0
        phi_a = low_rational + offset
        if has_radical:
            radical_offset = high_radical_rows[bits].sum(axis=0) if bits else 0
            phi_b = low_radical + radical_offset
            phi_a = phi_a.astype(object)
            cube_a = phi_a ** 3 + 6 * phi_a * phi_b ** 2
            cube_b = 3 * phi_a ** 2 * phi_b + 2 * phi_b ** 3
            values_b = cube_b.dot(data.weights.astype(object))
        else:
            cube_a = phi_a ** 3
            values_b = None
        values_a = cube_a.dot(data.weights)

        shift = len(bits)
        for s in range(low_bits + 1):
            selected = low_popcount == s
            totals_a[s + shift] += int(np.sum(values_a[selected], dtype=object))
            if values_b is not None:
                totals_b[s + shift] += int(np.sum(values_b[selected], dtype=object))
    return totals_a, totals_b


def chi_enumeration(expansion: Expansion, workers: int = 1) -> PolyP:
    """
    ``sum_S p^|S| (1-p)^(K-|S|) int phi_S^3`` over all ``2^K`` configurations, expanded in p and reduced to
    degree 3.

    :raises ValueError: "enumeration too large" when ``K > 20``.
    """
    K = len(expansion.terms)
    if K > MAX_ENUMERATION_INDICES:
        raise ValueError(f"enumeration too large: {K} Bernoulli indices (limit {MAX_ENUMERATION_INDICES})")
    if K == 0:
        return PolyP.zero()

    data = _integerize(expansion)
    atoms = len(expansion.weights)
    low_bits = min(K, max(4, 22 - max(1, atoms).bit_length()))
    high_count = 1 << (K - low_bits)

    workers = max(1, min(workers, high_count))
    bounds = [high_count * i // workers for i in range(workers + 1)]
    jobs = [(data, low_bits, bounds[i], bounds[i + 1]) for i in range(workers)]
    logger.debug("Enumerating 2^{} configurations over {} atoms in {} block(s)", K, atoms, len(jobs))

    if workers == 1:
        partials = [_enumerate_block(jobs[0])]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(_enumerate_block, jobs))

    totals_a = [sum(part[0][s] for part in partials) for s in range(K + 1)]
    totals_b = [sum(part[1][s] for part in partials) for s in range(K + 1)]
    scale = Fraction(1, data.weight_denominator * data.denominator ** 3)

    # sum_s c_s p^s (1-p)^(K-s), expanded binomially
    long_coeffs: List[ExactScalar] = [ExactScalar.zero()] * (K + 1)
    for s in range(K + 1):
        c_s = ExactScalar(totals_a[s] * scale, totals_b[s] * scale)
        if c_s.is_zero():
            continue
        for t in range(K - s + 1):
            long_coeffs[s + t] = long_coeffs[s + t] + c_s * (math.comb(K - s, t) * (-1) ** t)
    return poly_from_long(long_coeffs)


# ----------------------------------------------------------------------------------
# Pointwise variance identity and Bernoulli moments
# ----------------------------------------------------------------------------------
def _check_probability(p: Fraction) -> Fraction:
    p = Fraction(p)
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    return p


def variance_identity_check(
        expansion: Expansion,
        p: Fraction,
        method: Literal["moments", "enumeration"] = "moments",
) -> StepFunction:
    """
    Pointwise defect ``E_X (phi - p 1_V)^2 - p(1-p) S^2`` with ``S^2 = sum_k t_k^2``; zero for a complete expansion.

    ``moments`` evaluates ``E_X`` from the first two Bernoulli moments, ``enumeration`` averages over all
    configurations.

    :raises ValueError: "expansion does not sum to indicator" for an incomplete expansion.
    """
    p = _check_probability(p)
    if not expansion.is_complete():
        raise ValueError("expansion does not sum to indicator")
    K = len(expansion.terms)
    if method == "enumeration" and K > MAX_ENUMERATION_INDICES:
        raise ValueError(f"enumeration too large: {K} Bernoulli indices (limit {MAX_ENUMERATION_INDICES})")

    defects: List[ExactScalar] = []
    for i, v in enumerate(expansion.indicator):
        t = [ExactScalar.coerce(term[i]) for term in expansion.terms]
        s2 = scalar_sum(x * x for x in t)
        if method == "moments":
            total = scalar_sum(t)
            second = p * s2 + p * p * (total * total - s2)
            first = p * total
            value = second - 2 * p * v * first + p * p * v * v
        else:
            value = ExactScalar.zero()
            for config in range(1 << K):
                size = config.bit_count()
                phi = scalar_sum(t[k] for k in range(K) if config >> k & 1)
                weight = p ** size * (1 - p) ** (K - size)
                value = value + weight * (phi - p * v) ** 2
        defects.append(value - p * (1 - p) * s2)
    return StepFunction(expansion.weights, tuple(defects))


def balanced_moment_direct(p: Fraction, k: int) -> Fraction:
    """``E (X - p)^k`` for X Bernoulli(p), by the two-point expectation."""
    p = _check_probability(p)
    return (1 - p) ** k * p + (-p) ** k * (1 - p)


def bernoulli_third_moment(p: Fraction) -> ExactScalar:
    """``p(1-p)(1-2p)``, cross-checked against the two-point expectation."""
    p = _check_probability(p)
    closed = p * (1 - p) * (1 - 2 * p)
    if closed != balanced_moment_direct(p, 3):
        raise RuntimeError(f"Third moment mismatch at p={p}")
    return ExactScalar.coerce(closed)


# ----------------------------------------------------------------------------------
# Certificates
# ----------------------------------------------------------------------------------
def _null_space(matrix: List[List[Fraction]]) -> Tuple[int, List[List[Fraction]]]:
    """Exact rank of ``matrix`` and a basis of its right null space."""
    rows = [list(r) for r in matrix]
    n_cols = len(rows[0]) if rows else 0
    pivots: List[int] = []
    r = 0
    for c in range(n_cols):
        pivot = next((i for i in range(r, len(rows)) if rows[i][c] != 0), None)
        if pivot is None:
            continue
        rows[r], rows[pivot] = rows[pivot], rows[r]
        lead = rows[r][c]
        rows[r] = [x / lead for x in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c] != 0:
                factor = rows[i][c]
                rows[i] = [x - factor * y for x, y in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
    basis = []
    for free in (c for c in range(n_cols) if c not in pivots):
        vector = [Fraction(0)] * n_cols
        vector[free] = Fraction(1)
        for i, c in enumerate(pivots):
            vector[c] = -rows[i][free]
        basis.append(vector)
    return len(pivots), basis


# rows: r1, r2, r3; columns: pv, M1, M2
RESIDUAL_SYSTEM = [
    [Fraction(1), Fraction(2), Fraction(0)],
    [Fraction(0), Fraction(3), Fraction(1)],
    [Fraction(1, 8), Fraction(-1, 2), Fraction(-1, 4)],
]


@dataclass
class ProofCertificate:
    pv: Fraction
    M1: ExactScalar
    M2: ExactScalar
    eta_ratio: ExactScalar
    r1: ExactScalar
    r2: ExactScalar
    r3: ExactScalar
    rank: int
    dependency: Optional[Tuple[Fraction, Fraction, Fraction]]
    dependency_holds: bool
    recovery: Optional[Tuple[Fraction, Fraction, Fraction]]
    recovery_holds: Optional[bool]
    residual_poly: PolyP
    completeness_holds: bool
    third_power_energy: float
    remark: Dict[str, Dict[str, object]] = field(default_factory=dict)

    @property
    def max_abs_residual(self) -> float:
        return max(abs(float(self.r1)), abs(float(self.r2)), abs(float(self.r3)))

    def to_dict(self) -> dict:
        return {
            "pv": exact_entry(self.pv),
            "M1": exact_entry(self.M1),
            "M2": exact_entry(self.M2),
            "eta_ratio": exact_entry(self.eta_ratio),
            "r1": exact_entry(self.r1),
            "r2": exact_entry(self.r2),
            "r3": exact_entry(self.r3),
            "rank": self.rank,
            "dependency": [exact_str(x) for x in self.dependency] if self.dependency else None,
            "dependency_holds": self.dependency_holds,
            "recovery": [exact_str(x) for x in self.recovery] if self.recovery else None,
            "recovery_holds": self.recovery_holds,
            "residual_poly": self.residual_poly.to_strings(),
            "completeness_holds": self.completeness_holds,
            "third_power_energy": self.third_power_energy,
            "max_abs_residual": self.max_abs_residual,
            "remark": self.remark,
        }


def _third_power_energy(tree: FiltrationTree, V: LeafSet) -> float:
    s2 = square_function(tree, V)
    return sum(
        float(mass) * float(value) ** 1.5
        for mass, inside, value in zip(tree.leaf_masses, V.members, s2.values)
        if inside
    )


def _remark_entry(tree: FiltrationTree, V: LeafSet, include_root: bool) -> Dict[str, object]:
    coefficients = martingale_moment_coefficients(tree, V, include_root)
    three_energy = 3 * local_energy(tree, V, include_root).energy
    return {
        "M1": exact_str(coefficients.M1),
        "M2": exact_str(coefficients.M2),
        "three_energy": exact_str(three_energy),
        "M1_zero": coefficients.M1.is_zero(),
        "M2_equals_three_energy": coefficients.M2 == three_energy,
    }


def proof_certificate(tree: FiltrationTree, V: LeafSet) -> ProofCertificate:
    """
    Residuals of the three approximate equations closing the martingale argument, together with the exact
    linear algebra behind them.

    The residual system has rank 2 (``r3 = r1/8 - r2/4`` identically), so ``P(V)`` cannot be recovered from
    the residuals alone; the certificate reports the dependency and only fills ``recovery`` for a full-rank system.
    """
    pv = V.probability()
    if pv == 0:
        raise ValueError("empty set")
    coefficients = martingale_moment_coefficients(tree, V, include_root=True)
    M1, M2 = coefficients.M1, coefficients.M2
    energy = local_energy(tree, V, include_root=True)

    r1 = pv + 2 * M1
    r2 = M2 + 3 * M1
    r3 = pv * Fraction(1, 8) - M1 * Fraction(1, 2) - M2 * Fraction(1, 4)
    residuals = (r1, r2, r3)

    transpose = [list(col) for col in zip(*RESIDUAL_SYSTEM)]
    rank, left_null = _null_space(transpose)
    dependency = None
    dependency_holds = True
    if left_null:
        # normalize so the r3 coefficient is -1 when possible
        vector = left_null[0]
        if vector[2] != 0:
            vector = [x / -vector[2] for x in vector]
        dependency = tuple(vector)
        dependency_holds = scalar_sum(c * r for c, r in zip(dependency, residuals)).is_zero()

    recovery = None
    recovery_holds = None
    if rank == 3:
        # pv = y . (r1, r2, r3) where A^T y = e_pv: the null vector of [A^T | -e_pv] with last entry 1
        augmented = [row + [Fraction(-int(i == 0))] for i, row in enumerate(transpose)]
        _, solution = _null_space(augmented)
        y = [x / solution[0][3] for x in solution[0][:3]]
        recovery = tuple(y)
        recovery_holds = scalar_sum(c * r for c, r in zip(y, residuals)) == pv

    chi = coefficients.polynomial()
    model = PolyP([0, M1, -3 * M1, pv + 2 * M1])
    certificate = ProofCertificate(
        pv=pv,
        M1=M1,
        M2=M2,
        eta_ratio=energy.ratio,
        r1=ExactScalar.coerce(r1),
        r2=ExactScalar.coerce(r2),
        r3=ExactScalar.coerce(r3),
        rank=rank,
        dependency=dependency,
        dependency_holds=dependency_holds,
        recovery=recovery,
        recovery_holds=recovery_holds,
        residual_poly=chi - model,
        completeness_holds=(M1 + M2) == pv,
        third_power_energy=_third_power_energy(tree, V),
        remark={
            "include_root": _remark_entry(tree, V, True),
            "exclude_root": _remark_entry(tree, V, False),
        },
    )
    logger.debug("Certificate for P(V)={}: rank {}, residuals {}", pv, rank, [str(r) for r in residuals])
    return certificate


@dataclass
class WaveletCertificate:
    coefficients: MomentCoefficients
    measure: Fraction
    projection_cube: ExactScalar
    residual_poly: PolyP

    def to_dict(self) -> dict:
        return {
            **self.coefficients.to_dict(),
            "measure": exact_entry(self.measure),
            "projection_cube": exact_entry(self.projection_cube),
            "residual_poly": self.residual_poly.to_strings(),
        }


def wavelet_certificate(system: HaarSystem, V: DyadicSet) -> WaveletCertificate:
    """``chi(p) - [p|V| + p(1-p)(1-2p) W1]``, the defect of the approximate identity of the wavelet argument."""
    coefficients = wavelet_moment_coefficients(system, V)
    measure = V.measure
    W1 = coefficients.W1
    # p|V| + W1 (p - 3p^2 + 2p^3)
    model = PolyP([0, measure + W1, -3 * W1, 2 * W1])
    return WaveletCertificate(
        coefficients=coefficients,
        measure=measure,
        projection_cube=projection_cube(system, V),
        residual_poly=coefficients.polynomial() - model,
    )


@dataclass(frozen=True)
class DPrimeDiagnostics:
    members: Tuple[DyadicInterval, ...]
    dprime_mass: float
    in_mass: float
    out_mass: float


def dprime_diagnostics(system: HaarSystem, V: DyadicSet, eta: Fraction) -> DPrimeDiagnostics:
    """
    Splits the system at the threshold ``|a_I| >= eta^(1/3) |I|^(1/2)``, decided as ``(a_I^2)^3 >= eta^2 |I|^3``.
    """
    eta = Fraction(eta)
    if eta <= 0:
        raise ValueError(f"eta must be positive, got {eta}")
    members: List[DyadicInterval] = []
    dprime_mass = Fraction(0)
    in_mass = 0.0
    out_mass = 0.0
    for I in system.intervals:
        a = haar_coefficient(V, I)
        square = (a * a).to_fraction()
        # int |a_I|^3 |h_I|^3 = |a_I|^3 2^(j/2)
        cube_integral = abs(float(a)) ** 3 * 2.0 ** (I.level / 2)
        if square ** 3 >= eta ** 2 * I.length ** 3:
            members.append(I)
            dprime_mass += square
            in_mass += cube_integral
        else:
            out_mass += cube_integral
    return DPrimeDiagnostics(tuple(members), float(dprime_mass), in_mass, out_mass)
