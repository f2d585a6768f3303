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

from squarelab.haar_line import DyadicInterval, DyadicSet, all_intervals
from squarelab.martingale_core import LeafSet, equal_split_tree, random_tree
from squarelab.moment_engine import (
    HaarSystem,
    balanced_moment_direct,
    bernoulli_third_moment,
    chi_enumeration,
    chi_exact_martingale,
    dprime_diagnostics,
    haar_expansion,
    martingale_expansion,
    martingale_moment_coefficients,
    projection_cube,
    proof_certificate,
    variance_identity_check,
    wavelet_certificate,
    wavelet_moment_coefficients,
)
from squarelab.numeric_core import PolyP, poly_eval
from squarelab.tree_loader import tree_from_dict

TWO_LEAF = {"mass": "1/1", "children": [{"mass": "1/2", "leaf_id": 0}, {"mass": "1/2", "leaf_id": 1}]}


def _rng(seed):
    return np.random.Generator(np.random.Philox(key=seed))


def _random_members(rng, tree):
    return LeafSet(tree, tuple(bool(x) for x in rng.random(tree.leaf_count) < 0.5))


def _random_system(rng, resolution, max_size):
    pool = all_intervals(resolution)
    size = int(rng.integers(1, min(max_size, len(pool)) + 1))
    picked = sorted(rng.choice(len(pool), size=size, replace=False).tolist())
    return HaarSystem(resolution, tuple(pool[i] for i in picked))


# ##################################################################################################################################
# ------------------------------------------- Test Cases for Martingale Moment Polynomial ------------------------------------------
# ##################################################################################################################################
def test_two_leaf_chi():
    tree = tree_from_dict(TWO_LEAF)
    V = LeafSet.from_leaf_ids(tree, [1])
    expected = PolyP([0, Fraction(1, 8), Fraction(3, 8)])
    assert chi_exact_martingale(tree, V) == expected
    assert chi_enumeration(martingale_expansion(tree, V)) == expected


def test_full_set_chi_is_p():
    tree = random_tree(_rng(1), 4)
    V = LeafSet.everything(tree)
    assert chi_exact_martingale(tree, V) == PolyP([0, 1])


def test_empty_set_chi_is_zero():
    tree = equal_split_tree(3)
    V = LeafSet.from_leaf_ids(tree, [])
    assert chi_enumeration(martingale_expansion(tree, V)).is_zero()


def test_symmetric_tree_without_root_has_no_linear_term():
    tree = equal_split_tree(4)
    rng = _rng(2)
    for _ in range(20):
        coefficients = martingale_moment_coefficients(tree, _random_members(rng, tree), include_root=False)
        assert coefficients.M1 == 0, "Conditionally symmetric differences have vanishing third moments"


def test_closed_form_matches_enumeration_on_random_trees():
    rng = _rng(7)
    for trial in range(200):
        tree = random_tree(rng, int(rng.integers(1, 6)))
        V = _random_members(rng, tree)
        for include_root in (True, False):
            exact = chi_exact_martingale(tree, V, include_root)
            oracle = chi_enumeration(martingale_expansion(tree, V, include_root))
            assert exact == oracle, f"trial {trial}: {exact} != {oracle} (include_root={include_root})"


def test_completeness_with_root():
    rng = _rng(8)
    for _ in range(50):
        tree = random_tree(rng, 4)
        V = _random_members(rng, tree)
        coefficients = martingale_moment_coefficients(tree, V)
        assert coefficients.M1 + coefficients.M2 == V.probability()
        assert coefficients.chi_at_one() == V.probability()


def test_enumeration_in_parallel():
    rng = _rng(9)
    tree = random_tree(rng, 5)
    expansion = martingale_expansion(tree, _random_members(rng, tree))
    assert chi_enumeration(expansion, workers=2) == chi_enumeration(expansion, workers=1)


# ##################################################################################################################################
# ------------------------------------------- Test Cases for Wavelet Moment Polynomial ---------------------------------------------
# ##################################################################################################################################
def test_two_interval_haar_system():
    system = HaarSystem.parse("0:0,1:0", 2)
    V = DyadicSet.from_cells(2, [0])
    coefficients = wavelet_moment_coefficients(system, V)
    assert coefficients.W1 == 0
    assert coefficients.W2 == Fraction(3, 32)
    assert coefficients.W3 == 0
    assert chi_enumeration(haar_expansion(system, V)) == PolyP([0, 0, Fraction(3, 32)])


def test_cubic_matches_enumeration_on_random_systems():
    rng = _rng(13)
    for trial in range(100):
        system = _random_system(rng, 4, 14)
        V = DyadicSet.from_array(4, rng.random(16) < 0.5)
        coefficients = wavelet_moment_coefficients(system, V)
        assert coefficients.W1 == 0, "int h_I^3 = 0 for every Haar function"
        assert coefficients.polynomial() == chi_enumeration(haar_expansion(system, V)), f"trial {trial}"
        assert coefficients.chi_at_one() == projection_cube(system, V)


def test_complete_system_with_mean_sums_to_measure():
    V = DyadicSet(3, 0b01101100)
    expansion = haar_expansion(HaarSystem.complete(3), V, include_mean=True)
    assert expansion.is_complete()
    assert poly_eval(chi_enumeration(expansion), 1) == V.measure


def test_system_validation():
    with pytest.raises(ValueError, match="below resolution"):
        HaarSystem.parse("2:0", 2)
    with pytest.raises(ValueError):
        HaarSystem(3, (DyadicInterval(1, 0), DyadicInterval(1, 0)))
    assert HaarSystem.parse("all", 3).is_complete()


def test_enumeration_limit():
    expansion = haar_expansion(HaarSystem.complete(5), DyadicSet(5, 0b1011))
    with pytest.raises(ValueError, match="enumeration too large"):
        chi_enumeration(expansion)


def test_wavelet_certificate_residual():
    system = HaarSystem.complete(3)
    V = DyadicSet(3, 0b00010110)
    certificate = wavelet_certificate(system, V)
    chi = certificate.coefficients.polynomial()
    assert certificate.residual_poly == chi - PolyP([0, V.measure]), "With W1 = 0 the model is p|V|"
    assert certificate.projection_cube == certificate.coefficients.chi_at_one()


# ##################################################################################################################################
# ------------------------------------------- Test Cases for Variance Identity and Bernoulli Moments -------------------------------
# ##################################################################################################################################
@pytest.mark.parametrize("p", [Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)])
def test_variance_identity(p):
    rng = _rng(21)
    for _ in range(25):
        tree = random_tree(rng, 4)
        expansion = martingale_expansion(tree, _random_members(rng, tree))
        assert variance_identity_check(expansion, p).is_zero()
    V = DyadicSet(3, 0b11010010)
    assert variance_identity_check(haar_expansion(HaarSystem.complete(3), V, include_mean=True), p).is_zero()


def test_variance_identity_by_enumeration():
    tree = random_tree(_rng(22), 3)
    expansion = martingale_expansion(tree, LeafSet(tree, (True,) + (False,) * (tree.leaf_count - 1)))
    assert variance_identity_check(expansion, Fraction(2, 5), method="enumeration").is_zero()


def test_incomplete_expansion_rejected():
    tree = tree_from_dict(TWO_LEAF)
    expansion = martingale_expansion(tree, LeafSet.from_leaf_ids(tree, [0]), include_root=False)
    with pytest.raises(ValueError, match="expansion does not sum to indicator"):
        variance_identity_check(expansion, Fraction(1, 2))


def test_bernoulli_moments():
    assert bernoulli_third_moment(Fraction(1, 2)) == 0, "The balanced Bernoulli has no third moment at p = 1/2"
    assert bernoulli_third_moment(Fraction(1, 4)) == Fraction(3, 32)
    assert balanced_moment_direct(Fraction(1, 3), 2) == Fraction(2, 9)
    with pytest.raises(ValueError):
        bernoulli_third_moment(Fraction(3, 2))


# ##################################################################################################################################
# ------------------------------------------- Test Cases for Proof Certificates ----------------------------------------------------
# ##################################################################################################################################
def test_two_leaf_certificate():
    tree = tree_from_dict(TWO_LEAF)
    certificate = proof_certificate(tree, LeafSet.from_leaf_ids(tree, [0]))
    assert certificate.pv == Fraction(1, 2)
    assert (certificate.r1, certificate.r2, certificate.r3) == (Fraction(3, 4), Fraction(3, 4), Fraction(-3, 32))
    assert certificate.rank == 2
    assert certificate.dependency == (Fraction(1, 8), Fraction(-1, 4), Fraction(-1))
    assert certificate.dependency_holds
    assert certificate.recovery is None and certificate.recovery_holds is None
    assert certificate.completeness_holds
    assert certificate.eta_ratio == Fraction(1, 2)
    assert certificate.residual_poly == PolyP([0, 0, Fraction(3, 4), Fraction(-3, 4)])


def test_two_leaf_remark_conventions():
    tree = tree_from_dict(TWO_LEAF)
    remark = proof_certificate(tree, LeafSet.from_leaf_ids(tree, [0])).remark
    assert remark["include_root"]["M2"] == "3/8" and remark["include_root"]["three_energy"] == "3/4"
    assert remark["exclude_root"]["M2"] == "0/1" and remark["exclude_root"]["three_energy"] == "3/8"
    assert not remark["include_root"]["M2_equals_three_energy"]
    assert not remark["exclude_root"]["M2_equals_three_energy"]


def test_certificates_on_random_trees():
    rng = _rng(31)
    for _ in range(40):
        tree = random_tree(rng, 4)
        V = _random_members(rng, tree)
        if V.probability() == 0:
            continue
        certificate = proof_certificate(tree, V)
        assert certificate.rank == 2
        assert certificate.dependency_holds
        assert certificate.completeness_holds
        assert certificate.r1 == certificate.r2, "With M1 + M2 = P(V) the first two residuals coincide"
        assert certificate.to_dict()["rank"] == 2


# ##################################################################################################################################
# ------------------------------------------- Test Cases for Large Coefficient Diagnostics -----------------------------------------
# ##################################################################################################################################
def test_dprime_split():
    system = HaarSystem.parse("0:0,1:0", 2)
    V = DyadicSet.from_cells(2, [0])
    diagnostics = dprime_diagnostics(system, V, Fraction(1, 8))
    assert diagnostics.members == (DyadicInterval(1, 0),)
    assert diagnostics.dprime_mass == pytest.approx(1 / 8)
    assert diagnostics.in_mass == pytest.approx(1 / 16)
    assert diagnostics.out_mass == pytest.approx(1 / 64)
    with pytest.raises(ValueError):
        dprime_diagnostics(system, V, Fraction(0))
