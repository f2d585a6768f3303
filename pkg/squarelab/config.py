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

import math

# ----------------------------------------------------------------------------------
# Ledger
# ----------------------------------------------------------------------------------
LEDGER_ENV_VAR = "SQUARELAB_LEDGER"
DEFAULT_LEDGER_PATH = "./runs.jsonl"

# ----------------------------------------------------------------------------------
# Limits (exact paths)
# ----------------------------------------------------------------------------------
MAX_ENUMERATION_INDICES = 20      # 2^20 Bernoulli configurations
MAX_EXHAUSTIVE_CELLS = 16         # 65535 nonempty sets
MAX_RESOLUTION_1D = 24
MAX_ANNEAL_RESOLUTION_2D = 8
MAX_DENSE_ORACLE_RESOLUTION = 3   # 8 x 8 cell grid, 64 x 64 matrix
MAX_POLY_DEGREE = 3

# Monte Carlo trials are drawn in fixed blocks; block b reads Philox counter stream b.
MONTE_CARLO_BLOCK = 1024
PRNG_NAME = "numpy.Philox"

# ----------------------------------------------------------------------------------
# Wavelet filter table (lowpass analysis taps, sum = sqrt(2))
# ----------------------------------------------------------------------------------
_SQRT3 = math.sqrt(3.0)
_DB4_SCALE = 4.0 * math.sqrt(2.0)

FILTER_TAPS = {
    "haar": (1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0)),
    "db4": (
        (1.0 + _SQRT3) / _DB4_SCALE,
        (3.0 + _SQRT3) / _DB4_SCALE,
        (3.0 - _SQRT3) / _DB4_SCALE,
        (1.0 - _SQRT3) / _DB4_SCALE,
    ),
    "db6": (
        0.33267055295008261599851158914,
        0.80689150931109257649449360409,
        0.45987750211849157009515194215,
        -0.13501102001025458869638990670,
        -0.08544127388202666169281916918,
        0.03522629188570953660274066472,
    ),
}

VANISHING_MOMENTS = {
    "haar": 1,
    "db4": 2,
    "db6": 3,
}

ORTHONORMALITY_TOLERANCE = 1e-10

# ----------------------------------------------------------------------------------
# Search objectives
# ----------------------------------------------------------------------------------
OBJECTIVE_NAMES = ("mart-eta", "shift-ratio", "tensor-square-eta", "tensor-shift-ratio")

DEFAULT_ANNEAL_ITERS = 2000
DEFAULT_T_START = 0.05
DEFAULT_T_END = 1e-4
