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
Append-only JSON-lines experiment ledger.

Every CLI run appends one :class:`ExperimentRecord`. Exact values are stored as strings; the float rendition next
to them is advisory.
"""

from __future__ import annotations

import csv
import json
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Set, Tuple, Union
from uuid import UUID, uuid4

from dateutil.parser import isoparse
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from squarelab import __version__
from squarelab.config import DEFAULT_LEDGER_PATH, LEDGER_ENV_VAR
from squarelab.numeric_core import exact_str

CSV_COLUMNS = ["id", "timestamp", "subcommand", "objective", "resolution", "seed", "result_name", "exact", "float"]


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


class ResultEntry(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    exact: Optional[str] = Field(
        default=None,
        description="Exact value as 'n/d' or 'n1/d1+n2/d2*r2'; empty for purely numerical results",
    )
    float_value: float = Field(alias="float", description="binary64 rendition, advisory only")


class ExperimentRecord(BaseModel):
    id: UUID = Field(default_factory=uuid4)
    timestamp: str = Field(default_factory=_utc_now, description="UTC ISO-8601 time the run finished")
    subcommand: str
    parameters: Dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = None
    results: Dict[str, ResultEntry] = Field(default_factory=dict)
    version: str = __version__

    @field_validator("timestamp")
    @classmethod
    def _check_timestamp(cls, value: str) -> str:
        try:
            parsed = isoparse(value)
        except ValueError as e:
            raise ValueError(f"Invalid ISO-8601 timestamp '{value}': {e}")
        if parsed.tzinfo is None or parsed.utcoffset().total_seconds() != 0:
            raise ValueError(f"Timestamp '{value}' is not UTC")
        return value

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentRecord:
        """
        Create a record from its serialized dictionary.

        Args:
            data (dict): A dictionary as produced by ``to_dict``.

        Returns:
            ExperimentRecord: The validated record.
        """
        return cls.model_validate(data)

    def to_dict(self) -> dict:
        return self.model_dump(mode="json", by_alias=True)

    def to_json_line(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def payload(self) -> dict:
        """The record without ``id`` and ``timestamp``, the part that must repeat exactly for a repeated run."""
        data = self.to_dict()
        data.pop("id")
        data.pop("timestamp")
        return data


def result_entries(values: Dict[str, Any]) -> Dict[str, ResultEntry]:
    """
    Converts named results to ledger entries. Fractions, ints and exact scalars keep their exact string;
    floats are stored without one. Booleans are stored as 0/1.
    """
    entries = {}
    for name, value in values.items():
        if isinstance(value, bool):
            value = int(value)
        if isinstance(value, float):
            entries[name] = ResultEntry(exact=None, float_value=value)
        else:
            entries[name] = ResultEntry(exact=exact_str(value), float_value=float(value))
    return entries


def make_record(
        subcommand: str,
        parameters: Dict[str, Any],
        results: Dict[str, Any],
        seed: Optional[int] = None,
) -> ExperimentRecord:
    return ExperimentRecord(subcommand=subcommand, parameters=parameters, seed=seed, results=result_entries(results))


# ----------------------------------------------------------------------------------
# Ledger file
# ----------------------------------------------------------------------------------
def resolve_ledger_path(path: Optional[Union[str, Path]] = None) -> Path:
    """An explicit path wins, then ``SQUARELAB_LEDGER``, then ``./runs.jsonl``."""
    if path:
        return Path(path)
    return Path(os.environ.get(LEDGER_ENV_VAR) or DEFAULT_LEDGER_PATH)


def append_record(path: Union[str, Path], record: ExperimentRecord) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8") as f:
        f.write(record.to_json_line() + "\n")
    logger.debug("Appended {} record {} to {}", record.subcommand, record.id, path)


def load_ledger(path: Union[str, Path]) -> Tuple[List[ExperimentRecord], int]:
    """
    Reads every record of a ledger.

    :param path: The ledger file. A missing file reads as an empty ledger.
    :return: The records in file order and the number of skipped lines. Lines that are not UTF-8, not JSON or not a
             valid record are skipped, and so is any record whose id already appeared earlier in the file.
    """
    path = Path(path)
    if not path.exists():
        logger.info("Ledger {} does not exist yet, treating it as empty", path)
        return [], 0

    records: List[ExperimentRecord] = []
    seen: Set[UUID] = set()
    warnings = 0
    with open(path, "rb") as f:
        for number, raw in enumerate(f, start=1):
            try:
                line = raw.decode("utf-8").strip()
                if not line:
                    continue
                record = ExperimentRecord.from_dict(json.loads(line))
            except (UnicodeDecodeError, json.JSONDecodeError, ValidationError) as e:
                warnings += 1
                logger.warning("Skipping corrupt ledger line {} in {}: {}", number, path, str(e).splitlines()[0])
                continue
            if record.id in seen:
                warnings += 1
                logger.warning("Skipping ledger line {} in {}: duplicate record id {}", number, path, record.id)
                continue
            seen.add(record.id)
            records.append(record)
    return records, warnings


# ----------------------------------------------------------------------------------
# Export
# ----------------------------------------------------------------------------------
def csv_rows(records: List[ExperimentRecord]) -> List[Dict[str, Any]]:
    rows = []
    for record in records:
        for name, entry in record.results.items():
            rows.append({
                "id": str(record.id),
                "timestamp": record.timestamp,
                "subcommand": record.subcommand,
                "objective": record.parameters.get("objective", ""),
                "resolution": record.parameters.get("resolution", ""),
                "seed": "" if record.seed is None else record.seed,
                "result_name": name,
                "exact": entry.exact or "",
                "float": repr(entry.float_value),
            })
    return rows


def export_csv(records: List[ExperimentRecord], out) -> int:
    """Writes one row per result entry to the open text stream ``out``; returns the row count."""
    rows = csv_rows(records)
    writer = csv.DictWriter(out, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return len(rows)


def export_json(records: List[ExperimentRecord], out) -> int:
    json.dump([record.to_dict() for record in records], out, sort_keys=True, indent=2)
    out.write("\n")
    return len(records)


def import_json(text: str) -> List[ExperimentRecord]:
    return [ExperimentRecord.from_dict(item) for item in json.loads(text)]
