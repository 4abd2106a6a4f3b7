"""Run records, check verdicts and their on-disk formats."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from ..diagnostics import DiagnosticsRecord
from ..spectral import DensityField, Domain

__all__ = [
    "Verdict",
    "RunRecord",
    "CSV_HEADER",
    "format_value",
    "write_csv",
    "write_field",
    "read_field",
]

CSV_HEADER = ",".join(DiagnosticsRecord.columns())


@dataclass
class Verdict:
    """Outcome of one named check."""

    name: str
    criterion: Optional[int]
    passed: bool
    measured: Optional[float]
    tolerance: Optional[float]
    detail: str = ""
    scenario: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        crit = f"C{self.criterion}" if self.criterion is not None else "--"
        return (
            f"{status}  {crit:>4}  {self.scenario:<20} {self.name:<22} "
            f"measured={_short(self.measured)} tolerance={_short(self.tolerance)}  {self.detail}"
        )


def _short(v) -> str:
    return "n/a" if v is None else f"{v:.4g}"


@dataclass
class RunRecord:
    scenario: str
    config_hash: str
    seed: int
    rng: str
    domain: Dict[str, Any]
    epsilon: float
    records: List[DiagnosticsRecord]
    stored_fields: List[str]
    verdicts: List[Verdict]
    runtime_s: float
    holder_sampling: str = ""
    failure: Optional[str] = None
    failure_time: Optional[float] = None
    config: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.failure is None and all(v.passed for v in self.verdicts)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["records"] = [r.to_dict() for r in self.records]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        d = dict(d)
        d["records"] = [DiagnosticsRecord.from_dict(r) for r in d["records"]]
        d["verdicts"] = [Verdict(**v) for v in d["verdicts"]]
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "RunRecord":
        return cls.from_json(Path(path).read_text())


def format_value(v) -> str:
    """Fixed 17-significant-digit rendering; ``None`` becomes an empty cell."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return format(v, ".17g")


def write_csv(records, path) -> None:
    cols = DiagnosticsRecord.columns()
    lines = [CSV_HEADER]
    for r in records:
        d = r.to_dict()
        lines.append(",".join(format_value(d[c]) for c in cols))
    Path(path).write_text("\n".join(lines) + "\n")


def write_field(u: DensityField, stem) -> None:
    """Little-endian float64 samples in ``stem.bin`` plus metadata in ``stem.json``."""
    stem = Path(stem)
    stem.with_suffix(".bin").write_bytes(np.asarray(u.values, dtype="<f8").tobytes())
    meta = {"time": u.time, "domain": u.domain.to_dict(), "dtype": "<f8", "n_points": u.domain.n_points}
    stem.with_suffix(".json").write_text(json.dumps(meta, indent=1, sort_keys=True))


def read_field(stem) -> DensityField:
    stem = Path(stem)
    meta = json.loads(stem.with_suffix(".json").read_text())
    values = np.frombuffer(stem.with_suffix(".bin").read_bytes(), dtype="<f8").astype(float)
    return DensityField(Domain.from_dict(meta["domain"]), values, float(meta["time"]))
