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
Finite atom based filtrations, martingale differences of indicator sets and the martingale square function.

A filtration is a rooted tree: level n atoms are the nodes at depth n, each node's mass is the probability of its
atom. Leaves shallower than the tree depth are treated as unary chains down to the last level, which only adds
zero differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from squarelab import utils
from squarelab.numeric_core import ExactScalar, Number


# ----------------------------------------------------------------------------------
# Tree structure
# ----------------------------------------------------------------------------------
@dataclass(frozen=True)
class TreeNode:
    mass: Fraction
    children: Tuple["TreeNode", ...] = ()
    leaf_id: Optional[int] = None

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True)
class Atom:
    start: int  # first leaf position covered
    stop: int   # one past the last leaf position
    mass: Fraction


class FiltrationTree:
    """
    Immutable filtration generated by atoms.

    Leaves are stored in depth-first order; ``atoms[n]`` lists the level n atoms as contiguous leaf ranges.
    """

    def __init__(self, root: TreeNode):
        self._validate(root)
        self.root = root

        leaves: List[TreeNode] = []
        spans: List[Tuple[int, int, int, Fraction, bool]] = []  # depth, start, stop, mass, is_leaf

        def walk(node: TreeNode, depth: int) -> None:
            start = len(leaves)
            if node.is_leaf:
                leaves.append(node)
            else:
                for child in node.children:
                    walk(child, depth + 1)
            spans.append((depth, start, len(leaves), node.mass, node.is_leaf))

        walk(root, 0)
        self.depth = max(d for d, _, _, _, is_leaf in spans if is_leaf)
        self.leaves = tuple(leaves)
        self.leaf_masses = tuple(leaf.mass for leaf in leaves)
        self.leaf_ids = self._resolve_leaf_ids(leaves)

        atoms: List[List[Atom]] = [[] for _ in range(self.depth + 1)]
        for depth, start, stop, mass, is_leaf in spans:
            # shallow leaves are padded down to the last level
            last = self.depth if is_leaf else depth
            for level in range(depth, last + 1):
                atoms[level].append(Atom(start, stop, mass))
        self.atoms = tuple(tuple(sorted(level_atoms, key=lambda a: a.start)) for level_atoms in atoms)

    @staticmethod
    def _validate(root: TreeNode) -> None:
        if root.mass != 1:
            raise ValueError(f"Root mass must be 1, got {root.mass}")

        def check(node: TreeNode) -> None:
            if node.mass <= 0:
                raise ValueError(f"Atom masses must be positive, got {node.mass}")
            if node.children:
                total = sum((child.mass for child in node.children), Fraction(0))
                if total != node.mass:
                    raise ValueError(f"Children masses sum to {total}, expected {node.mass}")
                for child in node.children:
                    check(child)

        check(root)

    @staticmethod
    def _resolve_leaf_ids(leaves: Sequence[TreeNode]) -> Tuple[int, ...]:
        given = [leaf.leaf_id for leaf in leaves]
        if all(i is None for i in given):
            return tuple(range(len(leaves)))
        if any(i is None for i in given):
            raise ValueError("Either every leaf carries a leaf_id or none does")
        if sorted(given) != list(range(len(leaves))):
            raise ValueError(f"leaf_id values must be 0..{len(leaves) - 1}, got {sorted(given)}")
        return tuple(given)

    @property
    def leaf_count(self) -> int:
        return len(self.leaves)

    def node_at(self, path: Sequence[int]) -> TreeNode:
        node = self.root
        for step in path:
            node = node.children[step]
        return node

    def is_equal_split(self) -> bool:
        """True when every internal node splits into children of equal mass (conditionally symmetric)."""

        def check(node: TreeNode) -> bool:
            if node.is_leaf:
                return True
            first = node.children[0].mass
            return all(child.mass == first for child in node.children) and all(check(c) for c in node.children)

        return check(self.root)

    def __repr__(self) -> str:
        return f"FiltrationTree(depth={self.depth}, leaves={self.leaf_count})"


# ----------------------------------------------------------------------------------
# Step functions and leaf sets
# ----------------------------------------------------------------------------------
@dataclass(frozen=True)
class StepFunction:
    """Values on the atoms of a finite partition, with the partition's masses as weights."""

    weights: Tuple[Fraction, ...]
    values: Tuple[Number, ...]
    level: Optional[int] = None

    def __post_init__(self):
        if len(self.weights) != len(self.values):
            raise ValueError(f"{len(self.values)} values for {len(self.weights)} atoms")

    def _combine(self, other: StepFunction | Number, op) -> StepFunction:
        if isinstance(other, StepFunction):
            if other.weights != self.weights:
                raise ValueError("Step functions live on different partitions")
            return StepFunction(self.weights, tuple(op(x, y) for x, y in zip(self.values, other.values)))
        return StepFunction(self.weights, tuple(op(x, other) for x in self.values))

    def __add__(self, other):
        return self._combine(other, lambda x, y: x + y)

    def __sub__(self, other):
        return self._combine(other, lambda x, y: x - y)

    def __mul__(self, other):
        return self._combine(other, lambda x, y: x * y)

    def square(self) -> StepFunction:
        return StepFunction(self.weights, tuple(v * v for v in self.values), self.level)

    def integral(self) -> Number:
        total = Fraction(0)
        for w, v in zip(self.weights, self.values):
            total = total + w * v
        return total

    def is_zero(self) -> bool:
        return all(v == 0 for v in self.values)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True, eq=False)
class LeafSet:
    """A set V given as a union of leaves; ``members`` is indexed by depth-first leaf position."""

    tree: FiltrationTree
    members: Tuple[bool, ...]

    def __post_init__(self):
        if len(self.members) != self.tree.leaf_count:
            raise ValueError(f"LeafSet has {len(self.members)} flags for {self.tree.leaf_count} leaves")

    @classmethod
    def from_leaf_ids(cls, tree: FiltrationTree, leaf_ids: Sequence[int]) -> LeafSet:
        wanted = set(leaf_ids)
        unknown = wanted - set(tree.leaf_ids)
        if unknown:
            raise ValueError(f"Unknown leaf_id(s): {sorted(unknown)}")
        return cls(tree, tuple(leaf_id in wanted for leaf_id in tree.leaf_ids))

    @classmethod
    def from_spec(cls, tree: FiltrationTree, spec: str) -> LeafSet:
        """
        Parses ``"leaves=0,3,7"`` or ``"mask=0x89"``; both refer to leaf_id order.
        """
        fields = utils.parse_spec_fields(spec)
        if "leaves" in fields:
            return cls.from_leaf_ids(tree, utils.parse_index_list(fields["leaves"]))
        if "mask" in fields:
            mask = utils.parse_mask(fields["mask"])
            if mask >> tree.leaf_count:
                raise ValueError(f"Mask {hex(mask)} addresses more than {tree.leaf_count} leaves")
            return cls.from_leaf_ids(tree, utils.mask_to_indices(mask))
        raise ValueError(f"LeafSet spec must give 'leaves=' or 'mask=', got '{spec}'")

    @classmethod
    def everything(cls, tree: FiltrationTree) -> LeafSet:
        return cls(tree, (True,) * tree.leaf_count)

    def probability(self) -> Fraction:
        return sum((m for m, inside in zip(self.tree.leaf_masses, self.members) if inside), Fraction(0))

    def indicator(self) -> StepFunction:
        return StepFunction(self.tree.leaf_masses, tuple(Fraction(int(x)) for x in self.members))

    def complement(self) -> LeafSet:
        return LeafSet(self.tree, tuple(not x for x in self.members))

    def to_spec(self) -> str:
        ids = sorted(leaf_id for leaf_id, inside in zip(self.tree.leaf_ids, self.members) if inside)
        return "leaves=" + ",".join(str(i) for i in ids)


# ----------------------------------------------------------------------------------
# Conditional expectations and martingale differences
# ----------------------------------------------------------------------------------
def conditional_expectation(tree: FiltrationTree, f: StepFunction, n: int) -> StepFunction:
    """
    ``E(f | F_n)``: on each level n atom, the mass weighted average of ``f`` over its leaves.

    :raises ValueError: if ``n`` is outside ``0..L``.
    """
    if not 0 <= n <= tree.depth:
        raise ValueError(f"level {n} out of range 0..{tree.depth}")
    values: List[Number] = [Fraction(0)] * tree.leaf_count
    for atom in tree.atoms[n]:
        total = Fraction(0)
        for i in range(atom.start, atom.stop):
            total = total + f.weights[i] * f.values[i]
        average = total / atom.mass
        for i in range(atom.start, atom.stop):
            values[i] = average
    return StepFunction(f.weights, tuple(values), level=n)


def is_measurable(tree: FiltrationTree, f: StepFunction, n: int) -> bool:
    """True when ``f`` is constant on every level n atom."""
    for atom in tree.atoms[n]:
        first = f.values[atom.start]
        if any(f.values[i] != first for i in range(atom.start + 1, atom.stop)):
            return False
    return True


def martingale(tree: FiltrationTree, f: StepFunction) -> List[StepFunction]:
    return [conditional_expectation(tree, f, n) for n in range(tree.depth + 1)]


def differences(tree: FiltrationTree, V: LeafSet, include_root: bool = True) -> List[StepFunction]:
    """
    Martingale differences of ``1_V``.

    With ``include_root`` the sequence starts with ``d_0 = f_0`` (``f_{-1} = 0``) so the differences sum to
    ``1_V``; without it the n = 0 term is dropped.
    """
    fs = martingale(tree, V.indicator())
    ds = [fs[0]] if include_root else []
    for n in range(1, len(fs)):
        d = fs[n] - fs[n - 1]
        ds.append(StepFunction(d.weights, d.values, level=n))
    return ds


def square_function(tree: FiltrationTree, V: LeafSet, include_root: bool = True) -> StepFunction:
    """Leafwise ``S(1_V)^2 = sum_n d_n^2``."""
    ds = differences(tree, V, include_root)
    values = [Fraction(0)] * tree.leaf_count
    for d in ds:
        values = [acc + v * v for acc, v in zip(values, d.values)]
    return StepFunction(tree.leaf_masses, tuple(values))


@dataclass(frozen=True)
class LocalEnergy:
    energy: ExactScalar
    pv: Fraction
    ratio: ExactScalar


def local_energy(tree: FiltrationTree, V: LeafSet, include_root: bool = True) -> LocalEnergy:
    """
    ``E 1_V (S 1_V)^2`` and its ratio to ``P(V)``, the empirical constant for this set.

    :raises ValueError: "empty set" when ``P(V) = 0``.
    """
    pv = V.probability()
    if pv == 0:
        raise ValueError("empty set")
    s2 = square_function(tree, V, include_root)
    energy = Fraction(0)
    for mass, inside, value in zip(tree.leaf_masses, V.members, s2.values):
        if inside:
            energy = energy + mass * value
    energy = ExactScalar.coerce(energy)
    return LocalEnergy(energy=energy, pv=pv, ratio=energy / pv)


# ----------------------------------------------------------------------------------
# Builders
# ----------------------------------------------------------------------------------
def equal_split_tree(depth: int, branching: int = 2) -> FiltrationTree:
    """
    The homogeneous tree in which every atom splits into ``branching`` children of equal mass.
    With branching 2 its leaves in depth-first order are the dyadic cells of [0,1) at resolution ``depth``.
    """
    if depth < 0 or branching < 1:
        raise ValueError(f"Invalid equal split tree: depth={depth}, branching={branching}")
    counter = iter(range(branching ** depth))

    def build(level: int, mass: Fraction) -> TreeNode:
        if level == depth:
            return TreeNode(mass=mass, leaf_id=next(counter))
        child_mass = mass / branching
        return TreeNode(mass=mass, children=tuple(build(level + 1, child_mass) for _ in range(branching)))

    return FiltrationTree(build(0, Fraction(1)))


def random_tree(
        rng: np.random.Generator,
        depth: int,
        max_children: int = 3,
        max_denominator: int = 16,
        stop_probability: float = 0.15,
) -> FiltrationTree:
    """
    Random filtration with rational masses.

    Each internal node splits into 1..max_children parts whose relative weights are positive integers summing to at
    most ``max_denominator``; below the root a node stops early with ``stop_probability``.
    """
    counter = iter(range(max_children ** depth + 1))

    def split(mass: Fraction) -> List[Fraction]:
        k = int(rng.integers(1, max_children + 1))
        total = int(rng.integers(k, max(k, max_denominator) + 1))
        # k positive integer weights summing to total
        cuts = sorted(rng.choice(np.arange(1, total), size=k - 1, replace=False).tolist()) if k > 1 else []
        bounds = [0, *cuts, total]
        return [mass * Fraction(bounds[i + 1] - bounds[i], total) for i in range(k)]

    def build(level: int, mass: Fraction) -> TreeNode:
        if level == depth or (level > 0 and rng.random() < stop_probability):
            return TreeNode(mass=mass, leaf_id=next(counter))
        return TreeNode(mass=mass, children=tuple(build(level + 1, m) for m in split(mass)))

    root = build(0, Fraction(1))
    return renumber_leaves(root)


def renumber_leaves(root: TreeNode) -> FiltrationTree:
    """Rebuild a tree with leaf_ids 0..m-1 in depth-first order."""
    counter = iter(range(1 << 30))

    def rebuild(node: TreeNode) -> TreeNode:
        if node.is_leaf:
            return TreeNode(mass=node.mass, leaf_id=next(counter))
        return TreeNode(mass=node.mass, children=tuple(rebuild(c) for c in node.children))

    return FiltrationTree(rebuild(root))


def subtree(tree: FiltrationTree, path: Sequence[int]) -> FiltrationTree:
    """The conditional filtration on one atom: the node at ``path`` with masses divided by its own mass."""
    node = tree.node_at(path)

    def rescale(n: TreeNode) -> TreeNode:
        return TreeNode(mass=n.mass / node.mass, children=tuple(rescale(c) for c in n.children))

    logger.debug("Restricting {} to atom at path {}", tree, list(path))
    return renumber_leaves(rescale(node))


def shuffle_siblings(tree: FiltrationTree, rng: np.random.Generator) -> Tuple[FiltrationTree, List[int]]:
    """
    Randomly reorder the children of every node.

    :return: the new tree and, for every new leaf position, the old leaf position it came from.
    """
    positions = {id(leaf): i for i, leaf in enumerate(tree.leaves)}
    origin: List[int] = []

    def rebuild(node: TreeNode) -> TreeNode:
        if node.is_leaf:
            origin.append(positions[id(node)])
            return TreeNode(mass=node.mass)
        order = rng.permutation(len(node.children)).tolist()
        return TreeNode(mass=node.mass, children=tuple(rebuild(node.children[i]) for i in order))

    new_root = rebuild(tree.root)
    return renumber_leaves(new_root), origin
