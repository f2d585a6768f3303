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
Named invariant suites run by ``squarelab verify``.

Each suite draws its cases from a Philox stream keyed by the seed, checks exact identities with zero tolerance
(floating-point ones with the grid tolerances) and returns a :class:`SuiteResult`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List

import numpy as np
from loguru import logger

from squarelab.config import MONTE_CARLO_BLOCK
from squarelab.haar_line import (
    DyadicSet,
    all_intervals,
    coefficient_map,
    dyadic_square_function,
    haar_coefficient,
    shift_energy,
    shift_matrix,
    square_energy,
)
from squarelab.martingale_core import (
    LeafSet,
    conditional_expectation,
    differences,
    equal_split_tree,
    local_energy,
    random_tree,
    shuffle_siblings,
    square_function,
)
from squarelab.moment_engine import (
    HaarSystem,
    chi_enumeration,
    chi_exact_martingale,
    haar_expansion,
    martingale_expansion,
    projection_cube,
    proof_certificate,
    variance_identity_check,
    wavelet_moment_coefficients,
)
from squarelab.numeric_core import ExactScalar, poly_eval
from squarelab.search import exhaustive_search, get_objective, mart_eta_dilation
from squarelab.tensor_plane import (
    DyadicSet2D,
    dense_tensor_shift_energy,
    rect_coefficient_map,
    square_energy_2d,
    tensor_shift_energy,
    tensor_shift_matrix,
)
from squarelab.tree_loader import tree_from_dict
from squarelab.wavelet_grid import (
    GridSignal,
    chi_monte_carlo,
    dwt_forward,
    get_filter,
    smooth_square_function,
)

PROBABILITIES = (Fraction(1, 4), Fraction(1, 2), Fraction(3, 4))

TWO_LEAF_TREE = {
    "mass": "1/1",
    "children": [{"mass": "1/2", "leaf_id": 0}, {"mass": "1/2", "leaf_id": 1}],
}


@dataclass
class SuiteResult:
    name: str
    checks: int = 0
    failures: List[str] = field(default_factory=list)
    details: Dict[str, object] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.failures

    def check(self, condition: bool, message: str) -> None:
        self.checks += 1
        if not condition:
            self.failures.append(message)
            logger.warning("[{}] {}", self.name, message)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": self.checks,
            "failures": self.failures[:20],
            "failure_count": len(self.failures),
            **self.details,
        }


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed))


def _random_leaf_set(rng: np.random.Generator, tree) -> LeafSet:
    return LeafSet(tree, tuple(bool(x) for x in rng.random(tree.leaf_count) < 0.5))


def _random_set(rng: np.random.Generator, resolution: int, nonempty: bool = True) -> DyadicSet:
    cells = rng.random(1 << resolution) < 0.5
    if nonempty and not cells.any():
        cells[int(rng.integers(cells.size))] = True
    return DyadicSet.from_array(resolution, cells)


def _random_set_2d(rng: np.random.Generator, resolution: int) -> DyadicSet2D:
    side = 1 << resolution
    grid = rng.random((side, side)) < 0.5
    if not grid.any():
        grid[0, 0] = True
    return DyadicSet2D.from_array(grid)


def _random_system(rng: np.random.Generator, resolution: int, max_size: int) -> HaarSystem:
    pool = all_intervals(resolution)
    size = int(rng.integers(1, min(max_size, len(pool)) + 1))
    picked = sorted(rng.choice(len(pool), size=size, replace=False).tolist())
    return HaarSystem(resolution, tuple(pool[i] for i in picked))


def _same_values(a, b) -> bool:
    return len(a) == len(b) and all(ExactScalar.coerce(x) == ExactScalar.coerce(y) for x, y in zip(a, b))


# ----------------------------------------------------------------------------------
# Suites
# ----------------------------------------------------------------------------------
def martingale_suite(depth: int, trials: int, seed: int) -> SuiteResult:
    """Closed-form chi(p) against brute-force enumeration on random filtrations, root included and excluded."""
    result = SuiteResult("martingale")
    rng = _rng(seed)
    matches = 0
    for trial in range(trials):
        tree = random_tree(rng, depth)
        V = _random_leaf_set(rng, tree)
        ok = True
        for include_root in (True, False):
            exact = chi_exact_martingale(tree, V, include_root)
            oracle = chi_enumeration(martingale_expansion(tree, V, include_root))
            ok = ok and exact == oracle
        matches += ok
        result.check(ok, f"trial {trial}: closed form and enumeration differ for {V.to_spec()}")
    result.details.update(trials=trials, oracle_match=matches == trials)
    return result


def filtration_suite(depth: int, trials: int, seed: int) -> SuiteResult:
    """
    Martingale differences on random filtrations: Plancherel, orthogonality, the martingale property, and the local
    energy ratio under sibling shuffles. On equal split trees every ``E d_n^3`` vanishes.
    """
    result = SuiteResult("filtration")
    rng = _rng(seed)
    for trial in range(trials):
        tree = random_tree(rng, depth)
        V = _random_leaf_set(rng, tree)
        ds = differences(tree, V, include_root=True)
        energy = sum((d.square().integral() for d in ds), Fraction(0))
        result.check(energy == V.probability(), f"trial {trial}: sum E d_n^2 != P(V)")
        result.check(
            all((ds[m] * ds[n]).integral() == 0 for m in range(len(ds)) for n in range(m + 1, len(ds))),
            f"trial {trial}: differences are not orthogonal",
        )
        result.check(
            all(conditional_expectation(tree, ds[n], n - 1).is_zero() for n in range(1, len(ds))),
            f"trial {trial}: E(d_n | F_n-1) != 0",
        )
        if V.probability() > 0:
            shuffled, origin = shuffle_siblings(tree, rng)
            moved = LeafSet(shuffled, tuple(V.members[i] for i in origin))
            result.check(
                local_energy(tree, V).ratio == local_energy(shuffled, moved).ratio,
                f"trial {trial}: sibling shuffle changes the local energy ratio",
            )

    for N in range(1, depth + 1):
        tree = equal_split_tree(N)
        for _ in range(max(1, trials // 10)):
            V = _random_leaf_set(rng, tree)
            result.check(
                all((d.square() * d).integral() == 0 for d in differences(tree, V, include_root=False)),
                f"N={N}: a third moment is nonzero for {V.to_spec()}",
            )
    result.details.update(trials=trials)
    return result


def wavelet_suite(depth: int, trials: int, seed: int) -> SuiteResult:
    """``W1 p + W2 p^2 + W3 p^3`` against enumeration for random Haar systems of at most 14 intervals."""
    result = SuiteResult("wavelet")
    rng = _rng(seed)
    resolution = 4
    for trial in range(trials):
        system = _random_system(rng, resolution, 14)
        V = _random_set(rng, resolution, nonempty=False)
        coefficients = wavelet_moment_coefficients(system, V)
        oracle = chi_enumeration(haar_expansion(system, V))
        result.check(coefficients.polynomial() == oracle, f"trial {trial}: cubic differs from enumeration")
        result.check(coefficients.W1.is_zero(), f"trial {trial}: W1 = {coefficients.W1} for a Haar system")
    result.details.update(trials=trials, resolution=resolution)
    return result


def completeness_suite(depth: int, trials: int, seed: int) -> SuiteResult:
    """``chi(1) = P(V)`` with the root included and ``W1 + W2 + W3 = int (Pi 1_V)^3``."""
    result = SuiteResult("completeness")
    rng = _rng(seed)
    for trial in range(trials):
        tree = random_tree(rng, depth)
        V = _random_leaf_set(rng, tree)
        chi = chi_exact_martingale(tree, V, include_root=True)
        result.check(poly_eval(chi, 1) == V.probability(), f"trial {trial}: chi(1) != P(V)")

        system = _random_system(rng, 4, 14)
        W = _random_set(rng, 4, nonempty=False)
        coefficients = wavelet_moment_coefficients(system, W)
        result.check(
            coefficients.chi_at_one() == projection_cube(system, W),
            f"trial {trial}: W1 + W2 + W3 != int (Pi 1_V)^3",
        )
    result.details.update(trials=trials)
    return result


def variance_suite(depth: int, trials: int, seed: int) -> SuiteResult:
    """Pointwise ``E (phi - p 1_V)^2 = p(1-p) S^2`` for complete martingale and Haar expansions."""
    result = SuiteResult("variance")
    rng = _rng(seed)
    for trial in range(trials):
        tree = random_tree(rng, depth)
        expansions = [martingale_expansion(tree, _random_leaf_set(rng, tree), include_root=True)]
        resolution = int(rng.integers(1, 5))
        expansions.append(haar_expansion(HaarSystem.complete(resolution), _random_set(rng, resolution), True))
        for expansion in expansions:
            for p in PROBABILITIES:
                defect = variance_identity_check(expansion, p)
                result.check(defect.is_zero(), f"trial {trial}: nonzero defect at p={p} ({expansion.index.mode})")

    # the enumeration path on one small case
    tree = random_tree(rng, min(depth, 3))
    expansion = martingale_expansion(tree, _random_leaf_set(rng, tree))
    result.check(variance_identity_check(expansion, Fraction(1, 3), "enumeration").is_zero(),
                 "enumerated variance defect is nonzero")
    result.details.update(trials=trials, probabilities=[str(p) for p in PROBABILITIES])
    return result


def shift_suite(depth: int, trials: int, seed: int) -> SuiteResult:
    """Antisymmetry and ``M^2 = -Id``, ``<T1_V, 1_V> = 0`` and ``(T1_I) 1_I = 0`` for dyadic I."""
    result = SuiteResult("shift")
    rng = _rng(seed)
    for N in range(1, 9):
        M = shift_matrix(N)
        identity = np.eye(M.shape[0], dtype=np.int64)
        result.check(np.array_equal(M.T, -M), f"N={N}: M^T != -M")
        result.check(np.array_equal(M @ M, -identity), f"N={N}: M^2 != -Id")
        for _ in range(trials):
            V = _random_set(rng, N)
            result.check(shift_energy(V).pairing.is_zero(), f"<T1_V, 1_V> != 0 for {V.to_spec()}")

    intervals = 0
    for N in range(1, 7):
        for I in all_intervals(N + 1):
            V = DyadicSet.interval(N + 1, I)
            intervals += 1
            result.check(shift_energy(V).inside.is_zero(), f"(T1_I) 1_I != 0 for I={I} at N={N + 1}")
    result.details.update(random_sets=8 * trials, intervals=intervals)
    return result


def plancherel_suite(depth: int, trials: int, seed: int) -> SuiteResult:
    """Coefficient energy equals measure in 1D and 2D; martingale and Haar square functions agree on dyadic trees."""
    result = SuiteResult("plancherel")
    rng = _rng(seed)
    samples = max(1, trials // 50)
    for N in range(1, 13):
        for _ in range(samples):
            V = _random_set(rng, N, nonempty=False)
            result.check(coefficient_map(V).energy() == V.measure, f"1D Plancherel fails for {V.to_spec()}")
    for N in range(1, 6):
        for _ in range(samples):
            U = _random_set_2d(rng, N)
            result.check(rect_coefficient_map(U).energy() == U.measure, f"2D Plancherel fails for {U.to_spec()}")
    for N in range(1, 7):
        tree = equal_split_tree(N)
        for _ in range(samples):
            V = _random_set(rng, N, nonempty=False)
            leaves = LeafSet.from_leaf_ids(tree, V.cells())
            result.check(
                _same_values(square_function(tree, leaves).values, dyadic_square_function(V).values),
                f"martingale and Haar square functions differ for {V.to_spec()}",
            )
    result.details.update(samples_per_resolution=samples)
    return result


def tensor_suite(depth: int, trials: int, seed: int) -> SuiteResult:
    """``T_[2]`` symmetric and involutive, fast path against the dense oracle, separability on product sets."""
    result = SuiteResult("tensor")
    rng = _rng(seed)
    for N in range(1, 4):
        T = tensor_shift_matrix(N)
        result.check(np.array_equal(T, T.T), f"N={N}: T_[2] is not symmetric")
        result.check(np.array_equal(T @ T, np.eye(T.shape[0], dtype=np.int64)), f"N={N}: T_[2]^2 != Id")
        for _ in range(max(1, trials // 20)):
            U = _random_set_2d(rng, N)
            fast, dense = tensor_shift_energy(U), dense_tensor_shift_energy(U)
            result.check(
                (fast.inside, fast.total, fast.pairing) == (dense.inside, dense.total, dense.pairing),
                f"fast and dense tensor shift differ for {U.to_spec()}",
            )
    for _ in range(max(1, trials // 20)):
        N = int(rng.integers(1, 5))
        V1, V2 = _random_set(rng, N), _random_set(rng, N)
        U = DyadicSet2D.product(V1, V2)
        one, two, both = shift_energy(V1), shift_energy(V2), tensor_shift_energy(U)
        result.check(both.inside == one.inside * two.inside, f"inside energy does not factor for {U.to_spec()}")
        result.check(both.total == one.total * two.total, f"total energy does not factor for {U.to_spec()}")
        result.check(
            square_energy_2d(U) == square_energy(V1) * square_energy(V2),
            f"square energy does not factor for {U.to_spec()}",
        )
    return result


def grid_suite(depth: int, trials: int, seed: int) -> SuiteResult:
    """Filter validation, the Haar filter against the exact module, and Monte Carlo chi(p) against exact values."""
    result = SuiteResult("grid")
    rng = _rng(seed)
    errors = {}
    for name in ("haar", "db4", "db6"):
        try:
            errors[name] = get_filter(name).validate(seed=seed)
        except ValueError as e:
            result.check(False, str(e))
    haar = get_filter("haar")

    N = 5
    V = _random_set(rng, N)
    coefficients = dwt_forward(GridSignal.from_set(V, N), haar, N)
    exact = np.array([float(V.measure)] + [float(haar_coefficient(V, I)) for I in all_intervals(N)])
    result.check(float(np.max(np.abs(coefficients - exact))) <= 1e-12, "Haar filter coefficients differ")
    smooth = smooth_square_function(V, haar, N).values
    dyadic = np.array([float(x) for x in dyadic_square_function(V, include_mean=False).values])
    result.check(float(np.max(np.abs(smooth - dyadic))) <= 1e-10, "Haar square function differs from exact")

    mc_trials = max(10 * MONTE_CARLO_BLOCK, trials)
    system = HaarSystem(3, tuple(all_intervals(3)))
    W = _random_set(rng, 3)
    chi = wavelet_moment_coefficients(system, W).polynomial()
    deviations = {}
    for p in (0.25, 0.5, 0.75):
        estimate = chi_monte_carlo(W, haar, p, mc_trials, seed)
        target = float(poly_eval(chi, Fraction(p)))
        deviations[str(p)] = (estimate.estimate - target) / estimate.stderr if estimate.stderr else 0.0
        result.check(
            abs(estimate.estimate - target) <= 4 * estimate.stderr + 1e-12,
            f"Monte Carlo chi({p}) = {estimate.estimate} +- {estimate.stderr}, exact {target}",
        )
    result.details.update(reconstruction_error=errors, monte_carlo_trials=mc_trials, z_scores=deviations)
    return result


def eta_suite(depth: int, trials: int, seed: int) -> SuiteResult:
    """
    Exhaustive mart-eta optima: 1/2 at N=1, the 3/8 witness at N=2, positive and non-increasing up to N=4. Sets
    inside [0,1/2) up to N=4 keep their restricted ratio under dilation.
    """
    result = SuiteResult("eta")
    objective = get_objective("mart-eta")
    optima = []
    for N in range(1, 5):
        report = exhaustive_search(objective, N)
        optima.append(report.best_fraction())
    result.check(optima[0] == Fraction(1, 2), f"N=1 optimum is {optima[0]}, expected 1/2")
    witness = DyadicSet.from_cells(2, [0])
    result.check(square_energy(witness) / witness.measure == Fraction(3, 8), "witness [0,1/4) does not give 3/8")
    result.check(optima[1] <= Fraction(3, 8), f"N=2 optimum {optima[1]} exceeds 3/8")
    result.check(all(x > 0 for x in optima), "a mart-eta optimum is not positive")
    result.check(
        all(b <= a for a, b in zip(optima, optima[1:])),
        f"optima are not non-increasing: {[str(x) for x in optima]}",
    )

    dilations = 0
    for N in range(2, 5):
        for mask in range(1, 1 << (1 << (N - 1))):
            check = mart_eta_dilation(DyadicSet(N, mask))
            dilations += 1
            result.check(check.covariant, f"N={N}, mask={mask:#x}: restricted ratio {check.restricted} "
                                          f"!= dilated ratio {check.dilated}")
    result.details.update(optima=[str(x) for x in optima], dilations=dilations)
    return result


def certificate_suite(depth: int, trials: int, seed: int) -> SuiteResult:
    """The two-leaf example, then rank, dependency and completeness of proof certificates on random trees."""
    result = SuiteResult("certificate")
    tree = tree_from_dict(TWO_LEAF_TREE)
    certificate = proof_certificate(tree, LeafSet.from_leaf_ids(tree, [0]))
    result.check(
        (certificate.r1, certificate.r2, certificate.r3) == (Fraction(3, 4), Fraction(3, 4), Fraction(-3, 32)),
        "two-leaf residuals differ from (3/4, 3/4, -3/32)",
    )
    rng = _rng(seed)
    for trial in range(trials):
        tree = random_tree(rng, depth)
        V = _random_leaf_set(rng, tree)
        if V.probability() == 0:
            continue
        certificate = proof_certificate(tree, V)
        result.check(certificate.rank == 2, f"trial {trial}: residual system rank {certificate.rank}")
        result.check(certificate.dependency_holds, f"trial {trial}: residual dependency fails")
        result.check(certificate.completeness_holds, f"trial {trial}: M1 + M2 != P(V)")
    result.details.update(trials=trials)
    return result


SUITES: Dict[str, Callable[[int, int, int], SuiteResult]] = {
    "martingale": martingale_suite,
    "filtration": filtration_suite,
    "wavelet": wavelet_suite,
    "completeness": completeness_suite,
    "variance": variance_suite,
    "shift": shift_suite,
    "plancherel": plancherel_suite,
    "tensor": tensor_suite,
    "grid": grid_suite,
    "eta": eta_suite,
    "certificate": certificate_suite,
}

SUITE_NAMES = (*SUITES, "all")


def run_suites(name: str, depth: int = 4, trials: int = 200, seed: int = 0) -> List[SuiteResult]:
    """
    Runs one suite, or every suite for ``"all"``.

    :raises ValueError: for an unknown suite name.
    """
    if name == "all":
        names = list(SUITES)
    elif name in SUITES:
        names = [name]
    else:
        raise ValueError(f"Unknown suite '{name}', expected one of {list(SUITE_NAMES)}")
    results = []
    for suite in names:
        logger.info("Running suite {} (depth={}, trials={}, seed={})", suite, depth, trials, seed)
        results.append(SUITES[suite](depth, trials, seed))
    return results
