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
from typing import Dict, List


def parse_spec_fields(spec: str) -> Dict[str, str]:
    """
    Splits a set specification string such as ``"N=4;mask=0xA5C3"`` into its fields.

    Fields are separated by ``;`` and each field is a ``key=value`` pair. Keys are lower-cased except ``N``,
    which is kept as written since it names the resolution.

    :param spec: The specification string.
    :return: A dictionary of field name to raw value.
    :raises ValueError: if a field has no ``=``.
    """
    fields = {}
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ValueError(f"Malformed field '{part}' in spec '{spec}': expected key=value")
        key, value = part.split("=", 1)
        key = key.strip()
        fields[key if key == "N" else key.lower()] = value.strip()
    return fields


def parse_mask(text: str) -> int:
    """
    Parses a bit mask written in hex (``0x89``), binary (``0b101``) or decimal.

    Bit i set means cell (or leaf) i is a member.
    """
    text = text.strip().lower()
    mask = int(text, 0)
    if mask < 0:
        raise ValueError(f"Mask must be non-negative, got {text}")
    return mask


def parse_index_list(text: str) -> List[int]:
    """
    Parses a comma separated index list such as ``"0,2,5"``; an empty string is an empty list.
    """
    text = text.strip()
    if not text:
        return []
    indices = [int(token) for token in text.split(",") if token.strip()]
    if any(i < 0 for i in indices):
        raise ValueError(f"Indices must be non-negative: {text}")
    if len(set(indices)) != len(indices):
        raise ValueError(f"Duplicate index in list: {text}")
    return indices


def indices_to_mask(indices: List[int]) -> int:
    mask = 0
    for i in indices:
        mask |= 1 << i
    return mask


def mask_to_indices(mask: int) -> List[int]:
    indices = []
    i = 0
    while mask:
        if mask & 1:
            indices.append(i)
        mask >>= 1
        i += 1
    return indices


def mask_to_hex(mask: int) -> str:
    return hex(mask)


def normalize_option_name(name: str) -> str:
    """
    Normalizes an option name from a config file by stripping leading dashes and replacing
    dashes and spaces with underscores, so ``--t-start`` and ``t_start`` name the same option.
    """
    return name.strip().lstrip("-").replace("-", "_").replace(" ", "_").lower()
