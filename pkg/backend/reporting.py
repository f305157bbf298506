import json
import logging
import os
from typing import Dict, Iterable, List, Sequence

import pandas as pd
from models import SweepRecord
from pydantic import BaseModel

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = [
    "n",
    "k",
    "trial",
    "seed",
    "dynamics",
    "init",
    "tau_cons",
    "timeout",
    "steps_to_kappa",
    "wall_ms",
]
SWEEP_HEADER = ",".join(SWEEP_COLUMNS)

DRIFT_COLUMNS = ["t", "statistic", "predicted", "empirical", "bound", "violation"]


def records_frame(records: Sequence[SweepRecord]) -> pd.DataFrame:
    """One row per trial with nullable integer columns"""
    frame = pd.DataFrame([r.model_dump() for r in records], columns=SWEEP_COLUMNS)
    for column in ("n", "k", "trial", "tau_cons", "steps_to_kappa"):
        frame[column] = frame[column].astype("Int64")
    frame["seed"] = frame["seed"].astype("UInt64")
    frame["timeout"] = frame["timeout"].astype(bool)
    frame["wall_ms"] = frame["wall_ms"].astype("Float64")
    return frame


def sweep_csv(records: Sequence[SweepRecord]) -> str:
    """CSV text of the records, header line first; blanks stand for missing values"""
    return records_frame(records).to_csv(index=False, lineterminator="\n")


def _ensure_parent(path: str):
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)


def write_sweep_csv(records: Sequence[SweepRecord], path: str) -> str:
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(sweep_csv(records))
    logger.info("wrote %d rows to %s", len(records), path)
    return path


def write_rows_csv(rows: Iterable[Dict], columns: List[str], path: str) -> str:
    _ensure_parent(path)
    pd.DataFrame(list(rows), columns=columns).to_csv(path, index=False, lineterminator="\n")
    logger.info("wrote %s", path)
    return path


def to_jsonable(result) -> object:
    if isinstance(result, BaseModel):
        return result.model_dump(mode="json")
    if isinstance(result, (list, tuple)):
        return [to_jsonable(item) for item in result]
    if isinstance(result, dict):
        return {str(key): to_jsonable(value) for key, value in result.items()}
    return result


def write_json(result, path: str) -> str:
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(to_jsonable(result), handle, indent=2, sort_keys=True)
        handle.write("\n")
    logger.info("wrote %s", path)
    return path
