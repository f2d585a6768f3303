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

from squarelab.haar_line import DyadicSet, all_intervals, dyadic_square_function, haar_coefficient, square_energy
from squarelab.moment_engine import HaarSystem, wavelet_moment_coefficients
from squarelab.numeric_core import poly_eval
from squarelab.wavelet_grid import (
    GridSignal,
    MonteCarloEstimate,
    chi_monte_carlo,
    dwt_forward,
    dwt_inverse,
    fit_moment_cubic,
    get_filter,
    smooth_eta_scan,
    smooth_square_function,
    square_ratio,
)

FILTERS = ["haar", "db4", "db6"]


@st.composite
def dyadic_sets(draw, max_resolution=5):
    N = draw(st.integers(1, max_resolution))
    return DyadicSet(N, draw(st.integers(1, (1 << (1 << N)) - 1)))


def _signal(seed, size):
    return GridSignal(np.random.Generator(np.random.Philox(key=seed)).standard_normal(size))


# ##################################################################################################################################
# ------------------------------------------- Test Cases for Filters and Signals ---------------------------------------------------
# ##################################################################################################################################
@pytest.mark.parametrize("name", FILTERS)
def test_filter_table(name):
    f = get_filter(name)
    assert f.lowpass.sum() == pytest.approx(np.sqrt(2.0), abs=1e-12)
    assert f.highpass.sum() == pytest.approx(0.0, abs=1e-12)
    assert float(f.lowpass @ f.highpass) == pytest.approx(0.0, abs=1e-12)
    assert f.validate(grid_exponent=10, seed=3) < 1e-10


def test_unknown_filter():
    with pytest.raises(ValueError):
        get_filter("sym8")


def test_signal_validation():
    with pytest.raises(ValueError):
        GridSignal(np.zeros(12))
    with pytest.raises(ValueError):
        GridSignal(np.array([0.0, np.nan]))
    with pytest.raises(ValueError):
        GridSignal.from_set(DyadicSet(4, 1), 3)
    assert GridSignal.from_set(DyadicSet(1, 0b10), 3).values.tolist() == [0, 0, 0, 0, 1, 1, 1, 1]


# ##################################################################################################################################
# ------------------------------------------- Test Cases for Periodic Filter Bank --------------------------------------------------
# ##################################################################################################################################
@pytest.mark.parametrize("name", FILTERS)
@pytest.mark.parametrize("levels", [1, 4, 9])
def test_perfect_reconstruction(name, levels):
    f = get_filter(name)
    s = _signal(11, 512)
    restored = dwt_inverse(dwt_forward(s, f, levels), f, levels)
    assert np.allclose(restored.values, s.values, atol=1e-10)


@pytest.mark.parametrize("name", FILTERS)
def test_parseval(name):
    f = get_filter(name)
    s = _signal(12, 256)
    coefficients = dwt_forward(s, f, 8)
    assert np.sum(coefficients ** 2) == pytest.approx(np.mean(s.values ** 2), rel=1e-12)


@pytest.mark.parametrize("name", FILTERS)
def test_constant_signal_has_no_details(name):
    coefficients = dwt_forward(GridSignal(np.full(64, 0.75)), get_filter(name), 6)
    assert coefficients[0] == pytest.approx(0.75)
    assert np.allclose(coefficients[1:], 0.0, atol=1e-12)


def test_too_many_levels():
    with pytest.raises(ValueError):
        dwt_forward(_signal(0, 16), get_filter("haar"), 5)


@given(dyadic_sets())
def test_haar_cascade_matches_exact_coefficients(V):
    coefficients = dwt_forward(GridSignal.from_set(V, V.resolution), get_filter("haar"), V.resolution)
    assert coefficients[0] == pytest.approx(float(V.measure), abs=1e-12)
    for I in all_intervals(V.resolution):
        assert coefficients[I.basis_index] == pytest.approx(float(haar_coefficient(V, I)), abs=1e-12)


# ##################################################################################################################################
# ------------------------------------------- Test Cases for Square Function -------------------------------------------------------
# ##################################################################################################################################
@settings(max_examples=30)
@given(dyadic_sets(), st.integers(0, 2))
def test_haar_square_function_matches_exact(V, refinement):
    grid = V.resolution + refinement
    smooth = smooth_square_function(V, get_filter("haar"), grid)
    exact = np.repeat([float(x) for x in dyadic_square_function(V, include_mean=False).values], 1 << refinement)
    assert np.allclose(smooth.values, exact, atol=1e-10)


@settings(max_examples=30)
@given(dyadic_sets())
def test_haar_square_ratio_matches_exact(V):
    f = get_filter("haar")
    expected = square_energy(V, include_mean=False) / V.measure
    assert square_ratio(V, f, V.resolution) == pytest.approx(float(expected), abs=1e-10)
    with_mean = square_energy(V) / V.measure
    assert square_ratio(V, f, V.resolution, include_mean=True) == pytest.approx(float(with_mean), abs=1e-10)


def test_db4_square_ratio_converges_under_refinement():
    V = DyadicSet.from_cells(3, [1, 2, 6])
    f = get_filter("db4")
    coarse, fine = square_ratio(V, f, 12), square_ratio(V, f, 13)
    assert fine == pytest.approx(coarse, rel=5e-3)


def test_square_ratio_of_empty_set():
    with pytest.raises(ValueError, match="empty set"):
        square_ratio(DyadicSet(3, 0), get_filter("haar"), 3)


def test_eta_scan_covers_adversarial_families():
    f = get_filter("haar")
    scan = smooth_eta_scan(f, resolution=3, grid_exponent=3, samples=10, seed=4)
    assert 15 <= scan.evaluated <= 25
    assert 0 < scan.min_ratio <= square_ratio(DyadicSet.from_cells(3, [5]), f, 3)
    assert scan.argmin.startswith("N=3;")


# ##################################################################################################################################
# ------------------------------------------- Test Cases for Monte Carlo Estimation ------------------------------------------------
# ##################################################################################################################################
def test_monte_carlo_without_wavelets():
    estimate = chi_monte_carlo(DyadicSet.from_cells(3, [1, 4]), get_filter("db4"), 0.0, trials=200, seed=1)
    assert estimate.estimate == 0.0 and estimate.stderr == 0.0


@pytest.mark.parametrize("name", FILTERS)
def test_monte_carlo_with_every_wavelet(name):
    V = DyadicSet.from_cells(3, [0, 1, 5])
    m = float(V.measure)
    estimate = chi_monte_carlo(V, get_filter(name), 1.0, trials=100, seed=2)
    # phi = 1_V - |V| exactly
    assert estimate.estimate == pytest.approx(m * (1 - m) * (1 - 2 * m), abs=1e-10)
    assert estimate.stderr == pytest.approx(0.0, abs=1e-10)


@pytest.mark.parametrize("p", [Fraction(1, 4), Fraction(1, 2), Fraction(3, 5)])
def test_monte_carlo_agrees_with_exact_haar_polynomial(p):
    V = DyadicSet.from_cells(3, [0, 2, 3, 7])
    exact = float(poly_eval(wavelet_moment_coefficients(HaarSystem.complete(3), V).polynomial(), p))
    estimate = chi_monte_carlo(V, get_filter("haar"), float(p), trials=20000, seed=5)
    assert abs(estimate.estimate - exact) <= 4 * estimate.stderr + 1e-12


def test_monte_carlo_is_deterministic():
    V = DyadicSet.from_cells(4, [0, 3, 9, 10])
    f = get_filter("db4")
    first = chi_monte_carlo(V, f, 0.4, trials=3000, seed=9, grid_exponent=6)
    again = chi_monte_carlo(V, f, 0.4, trials=3000, seed=9, grid_exponent=6)
    parallel = chi_monte_carlo(V, f, 0.4, trials=3000, seed=9, grid_exponent=6, workers=2)
    assert first == again
    assert first.estimate == parallel.estimate and first.stderr == parallel.stderr
    assert first.prng == "numpy.Philox"
    assert chi_monte_carlo(V, f, 0.4, trials=3000, seed=10, grid_exponent=6).estimate != first.estimate


def test_monte_carlo_arguments():
    V = DyadicSet(2, 0b0110)
    f = get_filter("haar")
    with pytest.raises(ValueError):
        chi_monte_carlo(V, f, 1.5, trials=100, seed=0)
    with pytest.raises(ValueError):
        chi_monte_carlo(V, f, 0.5, trials=99, seed=0)
    with pytest.raises(ValueError):
        chi_monte_carlo(V, f, 0.5, trials=100, seed=0, max_level=3)


# ##################################################################################################################################
# ------------------------------------------- Test Cases for Cubic Fit -------------------------------------------------------------
# ##################################################################################################################################
def test_cubic_fit_recovers_coefficients():
    W = (0.0, 0.125, -0.0625)
    estimates = [
        MonteCarloEstimate(W[0] * p + W[1] * p ** 2 + W[2] * p ** 3, 0.001, 1000, 0, 4, p)
        for p in (0.25, 0.5, 0.75)
    ]
    fit = fit_moment_cubic(estimates)
    assert fit.W == pytest.approx(W, abs=1e-12)
    assert all(s > 0 for s in fit.stderr)
    assert fit.points == (0.25, 0.5, 0.75)


def test_cubic_fit_rejects_degenerate_points():
    estimate = MonteCarloEstimate(0.1, 0.01, 1000, 0, 4, 0.5)
    with pytest.raises(ValueError):
        fit_moment_cubic([estimate, estimate])
    with pytest.raises(ValueError):
        fit_moment_cubic([estimate, estimate, MonteCarloEstimate(0.0, 0.0, 1000, 0, 4, 0.0)])
