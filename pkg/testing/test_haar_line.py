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
from hypothesis import given, settings
from hypothesis import strategies as st

from squarelab.haar_line import (
    CoefficientMap,
    DyadicInterval,
    DyadicSet,
    all_intervals,
    coefficient_map,
    dilate,
    dyadic_square_function,
    haar_analysis,
    haar_coefficient,
    haar_shift_apply,
    haar_shift_indices,
    haar_synthesis,
    masks_to_cells,
    paired_basis,
    shift_energy,
    shift_matrix,
    square_energy,
    synthesize,
)
from squarelab.numeric_core import ExactScalar, pow_sqrt2


@st.composite
def dyadic_sets(draw, min_resolution=1, max_resolution=8, nonempty=True):
    N = draw(st.integers(min_resolution, max_resolution))
    low = 1 if nonempty else 0
    mask = draw(st.integers(low, (1 << (1 << N)) - 1))
    return DyadicSet(N, mask)


# ##################################################################################################################################
# ------------------------------------------- Test Cases for Dyadic Intervals and Sets ---------------------------------------------
# ##################################################################################################################################
def test_interval_navigation():
    I = DyadicInterval.parse("2:1")
    assert I.minus == DyadicInterval(3, 2) and I.plus == DyadicInterval(3, 3)
    assert I.parent == DyadicInterval(1, 0)
    assert I.sibling == DyadicInterval(2, 0)
    assert not I.is_minus
    assert I.basis_index == 5
    assert I.cell_range(4) == (4, 8)
    assert DyadicInterval(1, 0).contains(I)
    with pytest.raises(ValueError, match="below resolution"):
        DyadicInterval(3, 0).cell_range(2)
    with pytest.raises(ValueError):
        DyadicInterval.parse("2:4")


def test_set_specs():
    V = DyadicSet.from_spec("N=4;mask=0xA5C3")
    assert V.count == 8
    assert V.measure == Fraction(1, 2)
    assert DyadicSet.from_spec("N=3;cells=0,2,5") == DyadicSet(3, 0b100101)
    assert DyadicSet.from_spec(V.to_spec()) == V
    assert V.complement().mask == 0xFFFF ^ 0xA5C3
    with pytest.raises(ValueError):
        DyadicSet.from_spec("N=2;mask=0x1F")
    with pytest.raises(ValueError):
        DyadicSet.from_spec("mask=0x1")


def test_array_conversion():
    V = DyadicSet(3, 0b10010110)
    cells = V.to_array()
    assert cells.tolist() == [0, 1, 1, 0, 1, 0, 0, 1]
    assert DyadicSet.from_array(3, cells) == V
    assert masks_to_cells(np.array([V.mask]), 3)[0].tolist() == cells.tolist()


# ##################################################################################################################################
# ------------------------------------------- Test Cases for Haar Coefficients and Square Functions --------------------------------
# ##################################################################################################################################
def test_quarter_interval_coefficients():
    V = DyadicSet.from_cells(2, [0])
    assert haar_coefficient(V, DyadicInterval(0, 0)) == Fraction(-1, 4)
    assert haar_coefficient(V, DyadicInterval(1, 0)) == ExactScalar(0, Fraction(-1, 4))
    assert haar_coefficient(V, DyadicInterval(1, 1)) == 0
    with pytest.raises(ValueError, match="below resolution"):
        haar_coefficient(V, DyadicInterval(2, 0))


def test_quarter_interval_square_function():
    V = DyadicSet.from_cells(2, [0])
    S2 = dyadic_square_function(V)
    assert S2.values == (Fraction(3, 8), Fraction(3, 8), Fraction(1, 8), Fraction(1, 8))
    assert square_energy(V) == Fraction(3, 32)
    assert square_energy(V) / V.measure == Fraction(3, 8)
    assert dyadic_square_function(V, include_mean=False).values[0] == Fraction(5, 16)
    with pytest.raises(ValueError, match="empty set"):
        square_energy(DyadicSet(2, 0))


@settings(max_examples=100, deadline=None)
@given(dyadic_sets(max_resolution=7, nonempty=False))
def test_plancherel(V):
    assert coefficient_map(V).energy() == V.measure
    assert dyadic_square_function(V).integral() == V.measure, "int S^2 equals |V|"


@settings(max_examples=60, deadline=None)
@given(dyadic_sets(max_resolution=6, nonempty=False))
def test_synthesis_inverts_analysis(V):
    values = synthesize(coefficient_map(V)).values
    assert values == tuple(Fraction(int(x)) for x in V.to_array())
    cells = V.to_array().astype(np.int64)
    assert np.array_equal(haar_synthesis(haar_analysis(cells)), cells << V.resolution)


def test_analysis_matches_exact_coefficients():
    V = DyadicSet(4, 0x3A5C)
    delta = haar_analysis(V.to_array())
    for I in all_intervals(4):
        expected = pow_sqrt2(I.level) * Fraction(int(delta[I.basis_index]), 16)
        assert haar_coefficient(V, I) == expected, f"kernel slot {I.basis_index} disagrees with {I.to_spec()}"


# ##################################################################################################################################
# ------------------------------------------- Test Cases for Haar Shift ------------------------------------------------------------
# ##################################################################################################################################
def test_shift_matrix_blocks():
    M = shift_matrix(2)
    assert [I.to_spec() for I in paired_basis(2)] == ["1:0", "1:1"]
    assert M.tolist() == [[0, 1], [-1, 0]]


@pytest.mark.parametrize("N", range(1, 9))
def test_shift_matrix_identities(N):
    M = shift_matrix(N)
    assert M.shape == ((1 << N) - 2, (1 << N) - 2)
    assert np.array_equal(M.T, -M), "T is antisymmetric"
    assert np.array_equal(M @ M, -np.eye(M.shape[0], dtype=np.int64)), "T^2 = -I on the paired span"


def test_shift_of_quarter_interval():
    energy = shift_energy(DyadicSet.from_cells(2, [0]))
    assert energy.total == Fraction(1, 8)
    assert energy.inside == 0
    assert energy.pairing == 0
    assert energy.minus_norm == energy.plus_norm == Fraction(3, 8)


def test_shift_apply_twice_is_minus_identity():
    V = DyadicSet(4, 0x1234)
    c = coefficient_map(V, paired_basis(4))
    twice = haar_shift_apply(haar_shift_apply(c))
    assert all(twice[I] == -c[I] for I in c)
    assert twice.mean == 0


def test_shift_pairs_missing_sibling_as_zero():
    minus = DyadicInterval(1, 0)
    c = CoefficientMap(resolution=2, mean=Fraction(0), coeffs={minus: ExactScalar(0, Fraction(-1, 4))})
    shifted = haar_shift_apply(c)
    assert shifted[minus.sibling] == ExactScalar(0, Fraction(1, 4)), "h_[0,1/2) must map to +sqrt2/4 h_[1/2,1)"
    assert shifted[minus].is_zero()
    assert set(shifted) == {minus, minus.sibling}
    twice = haar_shift_apply(shifted)
    assert twice[minus] == -c[minus]


def test_kernel_shift_matches_coefficient_shift():
    V = DyadicSet(3, 0b01101001)
    shifted = haar_shift_apply(coefficient_map(V))
    g = haar_synthesis(haar_shift_indices(haar_analysis(V.to_array())))
    values = synthesize(shifted).values
    assert tuple(Fraction(int(x), 8) for x in g) == values


@settings(max_examples=150, deadline=None)
@given(dyadic_sets())
def test_shift_is_orthogonal_to_its_input(V):
    energy = shift_energy(V)
    assert energy.pairing == 0, "<T1_V, 1_V> = 0"
    assert energy.minus_norm == energy.plus_norm


@pytest.mark.parametrize("N", range(1, 7))
def test_shift_vanishes_on_dyadic_intervals(N):
    for I in all_intervals(N + 1):
        assert shift_energy(DyadicSet.interval(N + 1, I)).inside == 0, f"(T1_I)1_I must vanish for {I}"


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 7).flatmap(lambda N: st.tuples(st.just(N), st.integers(1, (1 << (1 << (N - 1))) - 1))))
def test_dilation_keeps_shift_ratio(case):
    N, mask = case
    V = DyadicSet(N, mask)
    W = dilate(V)
    assert W.resolution == N - 1
    assert shift_energy(V).ratio == shift_energy(W).ratio


def test_dilate_rejects_sets_outside_left_half():
    with pytest.raises(ValueError):
        dilate(DyadicSet(2, 0b1000))
