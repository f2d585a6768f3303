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

from squarelab.martingale_core import (
    FiltrationTree,
    LeafSet,
    StepFunction,
    TreeNode,
    conditional_expectation,
    differences,
    equal_split_tree,
    is_measurable,
    local_energy,
    martingale,
    random_tree,
    shuffle_siblings,
    square_function,
    subtree,
)
from squarelab.moment_engine import chi_exact_martingale
from squarelab.tree_loader import tree_from_dict

TWO_LEAF = {"mass": "1/1", "children": [{"mass": "1/2", "leaf_id": 0}, {"mass": "1/2", "leaf_id": 1}]}


def _rng(seed=0):
    return np.random.Generator(np.random.Philox(key=seed))


# ##################################################################################################################################
# ------------------------------------------- Test Cases for Filtration Trees ------------------------------------------------------
# ##################################################################################################################################
def test_tree_validation():
    with pytest.raises(ValueError, match="Root mass"):
        FiltrationTree(TreeNode(Fraction(1, 2)))
    with pytest.raises(ValueError, match="sum to"):
        FiltrationTree(TreeNode(Fraction(1), (TreeNode(Fraction(1, 2)), TreeNode(Fraction(1, 3)))))
    with pytest.raises(ValueError, match="positive"):
        FiltrationTree(TreeNode(Fraction(1), (TreeNode(Fraction(3, 2)), TreeNode(Fraction(-1, 2)))))


def test_mixed_leaf_ids_rejected():
    root = TreeNode(Fraction(1), (TreeNode(Fraction(1, 2), leaf_id=0), TreeNode(Fraction(1, 2))))
    with pytest.raises(ValueError):
        FiltrationTree(root)


def test_shallow_leaves_are_padded():
    shallow = TreeNode(Fraction(1, 2))
    deep = TreeNode(Fraction(1, 2), (TreeNode(Fraction(1, 4)), TreeNode(Fraction(1, 4))))
    tree = FiltrationTree(TreeNode(Fraction(1), (shallow, deep)))
    assert tree.depth == 2
    assert len(tree.atoms[2]) == 3, "A leaf above the last level stays an atom on every deeper level"
    assert tree.leaf_masses == (Fraction(1, 2), Fraction(1, 4), Fraction(1, 4))


def test_equal_split_tree():
    tree = equal_split_tree(3)
    assert tree.leaf_count == 8
    assert all(m == Fraction(1, 8) for m in tree.leaf_masses)
    assert tree.is_equal_split()


def test_subtree_is_conditional_filtration():
    tree = equal_split_tree(3)
    half = subtree(tree, [1])
    assert half.leaf_count == 4
    assert sum(half.leaf_masses) == 1, "The restricted tree is renormalized"


# ##################################################################################################################################
# ------------------------------------------- Test Cases for Leaf Sets -------------------------------------------------------------
# ##################################################################################################################################
def test_leaf_set_specs():
    tree = equal_split_tree(3)
    V = LeafSet.from_spec(tree, "leaves=0,3,7")
    assert V.probability() == Fraction(3, 8)
    assert LeafSet.from_spec(tree, "mask=0x89").members == V.members, "mask=0x89 is leaves 0, 3 and 7"
    assert V.complement().probability() == Fraction(5, 8)
    assert V.to_spec() == "leaves=0,3,7"
    with pytest.raises(ValueError):
        LeafSet.from_spec(tree, "leaves=8")
    with pytest.raises(ValueError):
        LeafSet.from_spec(tree, "mask=0x100")


# ##################################################################################################################################
# ------------------------------------------- Test Cases for Conditional Expectations and Differences ------------------------------
# ##################################################################################################################################
def test_two_leaf_differences():
    tree = tree_from_dict(TWO_LEAF)
    V = LeafSet.from_leaf_ids(tree, [1])
    d0, d1 = differences(tree, V, include_root=True)
    assert d0.values == (Fraction(1, 2), Fraction(1, 2)), "d_0 is the constant P(V)"
    assert d1.values == (Fraction(-1, 2), Fraction(1, 2))
    assert [d.level for d in differences(tree, V, include_root=False)] == [1]
    assert square_function(tree, V).values == (Fraction(1, 2), Fraction(1, 2))


def test_two_leaf_local_energy():
    tree = tree_from_dict(TWO_LEAF)
    energy = local_energy(tree, LeafSet.from_leaf_ids(tree, [1]))
    assert energy.energy == Fraction(1, 4)
    assert energy.pv == Fraction(1, 2)
    assert energy.ratio == Fraction(1, 2)
    with pytest.raises(ValueError, match="empty set"):
        local_energy(tree, LeafSet.from_leaf_ids(tree, []))


def test_level_out_of_range():
    tree = equal_split_tree(2)
    f = LeafSet.everything(tree).indicator()
    with pytest.raises(ValueError, match="out of range"):
        conditional_expectation(tree, f, 3)


def test_random_martingales():
    rng = _rng(11)
    for _ in range(30):
        tree = random_tree(rng, 4)
        V = LeafSet(tree, tuple(bool(x) for x in rng.random(tree.leaf_count) < 0.5))
        fs = martingale(tree, V.indicator())
        for n, f in enumerate(fs):
            assert is_measurable(tree, f, n), f"f_{n} must be F_{n} measurable"
        ds = differences(tree, V, include_root=True)
        total = ds[0]
        for d in ds[1:]:
            assert d.integral() == 0, "Differences beyond the root have mean zero"
            total = total + d
        assert total.values == V.indicator().values, "Differences sum to the indicator"
        assert fs[-1].values == V.indicator().values, "The last level resolves every leaf"


def test_step_function_arithmetic():
    f = StepFunction((Fraction(1, 4), Fraction(3, 4)), (Fraction(2), Fraction(-1)))
    assert f.integral() == Fraction(-1, 4)
    assert (f * f).values == f.square().values
    assert (f - f).is_zero()
    with pytest.raises(ValueError):
        f + StepFunction((Fraction(1, 2), Fraction(1, 2)), (0, 0))


# ##################################################################################################################################
# ------------------------------------------- Test Cases for Martingale Difference Invariants --------------------------------------
# ##################################################################################################################################
def _random_cases(seed, count=30, depth=4):
    rng = _rng(seed)
    for _ in range(count):
        tree = random_tree(rng, depth)
        yield tree, LeafSet(tree, tuple(bool(x) for x in rng.random(tree.leaf_count) < 0.5))


def test_plancherel_on_random_trees():
    for tree, V in _random_cases(21):
        energy = sum((d.square().integral() for d in differences(tree, V, include_root=True)), Fraction(0))
        assert energy == V.probability(), f"sum E d_n^2 != P(V) for {V.to_spec()}"


def test_differences_are_orthogonal():
    for tree, V in _random_cases(22):
        ds = differences(tree, V, include_root=True)
        for m in range(len(ds)):
            for n in range(m + 1, len(ds)):
                assert (ds[m] * ds[n]).integral() == 0, f"E d_{m} d_{n} != 0 for {V.to_spec()}"


def test_martingale_property():
    for tree, V in _random_cases(23):
        ds = differences(tree, V, include_root=True)
        for n in range(1, len(ds)):
            assert conditional_expectation(tree, ds[n], n - 1).is_zero(), f"E(d_{n} | F_{n - 1}) != 0"


@pytest.mark.parametrize("depth", range(1, 6))
def test_equal_split_third_moments_vanish(depth):
    tree = equal_split_tree(depth)
    rng = _rng(depth)
    for _ in range(20):
        V = LeafSet(tree, tuple(bool(x) for x in rng.random(tree.leaf_count) < 0.5))
        for d in differences(tree, V, include_root=False):
            assert (d.square() * d).integral() == 0, f"E d_{d.level}^3 != 0 for {V.to_spec()}"


# ##################################################################################################################################
# ------------------------------------------- Test Cases for Invariance Under Relabeling -------------------------------------------
# ##################################################################################################################################
def test_sibling_shuffle_keeps_chi():
    rng = _rng(5)
    for _ in range(20):
        tree = random_tree(rng, 3)
        members = tuple(bool(x) for x in rng.random(tree.leaf_count) < 0.5)
        shuffled, origin = shuffle_siblings(tree, rng)
        moved = LeafSet(shuffled, tuple(members[i] for i in origin))
        assert chi_exact_martingale(tree, LeafSet(tree, members)) == chi_exact_martingale(shuffled, moved), \
            "chi(p) depends on the filtration, not on the order of siblings"


def test_sibling_shuffle_keeps_local_energy():
    rng = _rng(6)
    for tree in [equal_split_tree(3), *(random_tree(rng, 3) for _ in range(20))]:
        members = tuple(bool(x) for x in rng.random(tree.leaf_count) < 0.5)
        if not any(members):
            continue
        shuffled, origin = shuffle_siblings(tree, rng)
        before = local_energy(tree, LeafSet(tree, members))
        after = local_energy(shuffled, LeafSet(shuffled, tuple(members[i] for i in origin)))
        assert before.ratio == after.ratio, "The local energy ratio ignores the order of siblings"
        assert before.pv == after.pv
