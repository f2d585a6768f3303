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
import json
from pathlib import Path
from typing import Any, Dict, Union

from loguru import logger

from squarelab.martingale_core import FiltrationTree, TreeNode
from squarelab.numeric_core import format_rational, parse_rational


def parse_node(definition: Dict[str, Any], path: str = "root") -> TreeNode:
    """
    Recursively builds a TreeNode from a nested tree definition.

    Each definition is an object ``{"mass": "p/q", "children": [...]}``; leaves omit ``children`` (or give an
    empty list) and may carry ``"leaf_id": int``.

    Args:
        definition (dict): The node definition.
        path (str): Location of the node in the file, used in error messages.

    Returns:
        TreeNode: The node with its whole subtree.
    """
    if not isinstance(definition, dict):
        raise ValueError(f"Tree node at {path} must be an object, got {type(definition).__name__}")
    if "mass" not in definition:
        raise ValueError(f"Tree node at {path} has no 'mass'")

    mass = parse_rational(str(definition["mass"]))
    children = definition.get("children") or []
    if not isinstance(children, list):
        raise ValueError(f"'children' at {path} must be a list")

    leaf_id = definition.get("leaf_id")
    if leaf_id is not None and children:
        raise ValueError(f"Internal node at {path} cannot carry a leaf_id")
    if leaf_id is not None and (isinstance(leaf_id, bool) or not isinstance(leaf_id, int) or leaf_id < 0):
        raise ValueError(f"leaf_id at {path} must be a non-negative integer, got {leaf_id!r}")

    nested = tuple(parse_node(child, f"{path}.children[{i}]") for i, child in enumerate(children))
    return TreeNode(mass=mass, children=nested, leaf_id=leaf_id)


def tree_from_dict(definition: Dict[str, Any]) -> FiltrationTree:
    return FiltrationTree(parse_node(definition))


def tree_to_dict(tree: FiltrationTree) -> Dict[str, Any]:
    """Inverse of ``tree_from_dict``; leaf ids are written as resolved by the tree."""
    positions = {id(leaf): i for i, leaf in enumerate(tree.leaves)}

    def dump(node: TreeNode) -> Dict[str, Any]:
        if node.is_leaf:
            return {"mass": format_rational(node.mass), "leaf_id": tree.leaf_ids[positions[id(node)]]}
        return {"mass": format_rational(node.mass), "children": [dump(c) for c in node.children]}

    return dump(tree.root)


def load_tree(path: Union[str, Path]) -> FiltrationTree:
    path = Path(path)
    if not path.exists():
        raise ValueError(f"Tree file '{path}' does not exist")
    try:
        definition = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ValueError(f"Tree file '{path}' is not valid JSON: {e}")

    tree = tree_from_dict(definition)
    logger.debug("Loaded {} from {}", tree, path)
    return tree


def save_tree(tree: FiltrationTree, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(tree_to_dict(tree), indent=2) + "\n", encoding="utf-8")
