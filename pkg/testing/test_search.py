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
from fractions import Fraction

import numpy as np
import pytest

from squarelab.haar_line import DyadicSet, shift_energy
from squarelab.search import (
    CounterexampleFound,
    SearchReport,
    anneal_search,
    exhaustive_search,
    get_objective,
    mart_eta_dilation,
)


# ##################################################################################################################################
# ------------------------------------------- Test Cases for Objectives ------------------------------------------------------------
# ##################################################################################################################################
def test_objective_table():
    assert get_objective("mart-eta").direction == "minimize"
    assert get_objective("shift-ratio").direction == "maximize"
    assert get_objective("tensor-square-eta").cell_count(2) == 16
    with pytest.raises(ValueError):
        get_objective("eta")


def test_batched_ratios_match_exact_functions():
    objective = get_objective("shift-ratio")
    rows = [[1, 0, 1, 1], [0, 1, 0, 0], [1, 1, 0, 0]]
    ratios = objective.ratios(np.array(rows), 2)
    for row, ratio in zip(rows, ratios):
        mask = sum(bit << i for i, bit in enumerate(row))
        assert ratio == shift_energy(DyadicSet(2, mask)).ratio.to_fraction()
    assert ratios[2] == 0, "The shift annihilates a dyadic interval"


# ##################################################################################################################################
# ------------------------------------------- Test Cases for Exhaustive Search -----------------------------------------------------
# ##################################################################################################################################
def test_mart_eta_single_level():
    report = exhaustive_search(get_objective("mart-eta"), 1)
    assert report.best_fraction() == Fraction(1, 2)
    assert report.best_mask == "0x1", "Ties keep the lowest mask"
    assert report.visited == 3
    assert report.full_set_ratio == "1/1"
    assert report.best_is_singleton and not report.best_is_full
    assert report.complement_ratio == "1/2"


def test_mart_eta_two_levels_reaches_three_eighths():
    report = exhaustive_search(get_objective("mart-eta"), 2)
    assert report.best_fraction() <= Fraction(3, 8)
    assert report.results()["measure"] == report.best_measure()


def test_mart_eta_is_non_increasing_in_resolution():
    objective = get_objective("mart-eta")
    best = [exhaustive_search(objective, N).best_fraction() for N in range(1, 5)]
    assert all(later <= earlier for earlier, later in zip(best, best[1:])), best
    assert all(value > 0 for value in best)


def test_parallel_scan_gives_the_same_report():
    objective = get_objective("mart-eta")
    assert exhaustive_search(objective, 4, workers=2) == exhaustive_search(objective, 4, workers=1)


def test_tensor_square_eta_single_level():
    report = exhaustive_search(get_objective("tensor-square-eta"), 1)
    assert 0 < report.best_fraction() <= Fraction(1, 4)
    assert report.visited == 15
    assert report.best_spec.startswith("N=1;mask2d=")


def test_tensor_shift_ratio_without_paired_levels():
    report = exhaustive_search(get_objective("tensor-shift-ratio"), 1)
    assert report.best_fraction() == 0


def test_exhaustive_limit():
    with pytest.raises(ValueError, match="too many cells"):
        exhaustive_search(get_objective("mart-eta"), 5)
    with pytest.raises(ValueError, match="too many cells"):
        exhaustive_search(get_objective("tensor-shift-ratio"), 3)


# ##################################################################################################################################
# ------------------------------------------- Test Cases for Dilation Covariance ---------------------------------------------------
# ##################################################################################################################################
@pytest.mark.parametrize("N", [2, 3, 4])
def test_restricted_mart_eta_equals_dilated(N):
    differing = 0
    for mask in range(1, 1 << (1 << (N - 1))):
        check = mart_eta_dilation(DyadicSet(N, mask))
        assert check.covariant, f"restricted {check.restricted} != dilated {check.dilated} for mask {mask:#x}"
        differing += check.full != check.dilated
    assert differing > 0, "The full-model ratio keeps the levels above [0,1/2)"


def test_quarter_interval_dilation():
    check = mart_eta_dilation(DyadicSet.from_cells(2, [0]))
    assert check.restricted == check.dilated == Fraction(1, 2)
    assert check.full == Fraction(3, 8)


def test_dilation_needs_left_half():
    with pytest.raises(ValueError, match="not contained"):
        mart_eta_dilation(DyadicSet.from_cells(2, [2]))
    with pytest.raises(ValueError, match="empty set"):
        mart_eta_dilation(DyadicSet(2, 0))


# ##################################################################################################################################
# ------------------------------------------- Test Cases for Simulated Annealing ---------------------------------------------------
# ##################################################################################################################################
def test_anneal_never_beats_exhaustive():
    exact = exhaustive_search(get_objective("mart-eta"), 3).best_fraction()
    for seed in range(3):
        report = anneal_search(get_objective("mart-eta"), 3, iters=400, seed=seed)
        assert report.best_fraction() >= exact
        assert report.prng == "numpy.Philox" and report.seed == seed


def test_anneal_is_deterministic():
    objective = get_objective("shift-ratio")
    first = anneal_search(objective, 5, iters=300, seed=17)
    assert first == anneal_search(objective, 5, iters=300, seed=17)
    assert [entry.step for entry in first.trace] == sorted(entry.step for entry in first.trace)


def test_anneal_schedule_validation():
    objective = get_objective("mart-eta")
    with pytest.raises(ValueError):
        anneal_search(objective, 3, iters=0)
    with pytest.raises(ValueError):
        anneal_search(objective, 3, t_start=0.0)
    with pytest.raises(ValueError):
        anneal_search(get_objective("tensor-square-eta"), 9)


# ##################################################################################################################################
# ------------------------------------------- Test Cases for Certification ---------------------------------------------------------
# ##################################################################################################################################
def test_certify_rejects_tampered_report():
    report = exhaustive_search(get_objective("mart-eta"), 2)
    tampered = report.model_copy(update={"best_ratio": "1/3"})
    with pytest.raises(RuntimeError):
        tampered.certify()
    assert report.certify() is report


def test_counterexample_carries_report():
    report = SearchReport.model_validate(exhaustive_search(get_objective("mart-eta"), 1).model_dump())
    error = CounterexampleFound(report)
    assert error.report is report
    assert "mart-eta" in str(error)
