"""Run records: YAML reports with canonical ordering, scatter CSV export."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .arch import Architecture, get_family
from .budget import BudgetModel, backbone_cost, weighted_block_count


class ReportIOError(OSError):
    pass


class _Dumper(yaml.SafeDumper):
    pass


def _represent_float(dumper, value):
    if math.isnan(value):
        text = ".nan"
    elif math.isinf(value):
        text = ".inf" if value > 0 else "-.inf"
    else:
        text = f"{value:.6f}"
    return dumper.represent_scalar("tag:yaml.org,2002:float", text)


def _represent_list(dumper, value):
    flow = all(not isinstance(v, (dict, list)) for v in value)
    return dumper.represent_sequence("tag:yaml.org,2002:seq", value, flow_style=flow)


_Dumper.add_representer(float, _represent_float)
_Dumper.add_representer(list, _represent_list)


def canonical(obj):
    """Plain YAML-safe tree with floats rounded to 6 places."""
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating, Fraction)):
        x = float(obj)
        return x if not math.isfinite(x) else round(x, 6)
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dump_text(tree) -> str:
    return yaml.dump(canonical(tree), Dumper=_Dumper, sort_keys=True,
                     default_flow_style=False, width=100)


@dataclass
class RunRecord:
    name: str
    family: str
    config: dict
    space: dict
    budget_model: dict
    payload: dict
    seed: int
    version: str = __version__
    timestamps: dict = field(default_factory=dict)

    def __post_init__(self):
        for attr in ("config", "space", "budget_model", "payload", "timestamps"):
            setattr(self, attr, canonical(getattr(self, attr)))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunRecord":
        return cls(**data)

    def payload_text(self) -> str:
        return dump_text(self.payload)


def make_run_record(name: str, report, config: dict, space: dict | None = None,
                    budget_model: BudgetModel | None = None, seed: int = 0) -> RunRecord:
    budget_model = budget_model or BudgetModel()
    now = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return RunRecord(
        name=name,
        family=report.winner.family.name,
        config=config,
        space=space or {},
        budget_model=budget_model.to_dict(),
        payload=report.payload(),
        seed=seed,
        timestamps={"created": now, "wall_time_s": report.wall_time},
    )


def write_text_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_text(text)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            tmp.unlink()
        except OSError:
            pass
        raise ReportIOError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_report(record: RunRecord, path) -> None:
    write_text_atomic(Path(path), dump_text(record.to_dict()))


def read_report(path) -> RunRecord:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ReportIOError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return RunRecord.from_dict(data)


def record_architecture(record: RunRecord) -> Architecture:
    family = get_family(record.family)
    winner = record.payload["winner"]
    stage = family.searchable_part(winner["stage_code"])
    return Architecture(family, stage, tuple(winner["op_code"]))


SCATTER_COLUMNS = ("name", "weighted_blocks", "cost", "score")


def scatter_rows(records: list[RunRecord]) -> list[dict]:
    models = {tuple(sorted(r.budget_model.items())) for r in records}
    if len(models) > 1:
        raise ValueError("records use different budget models")
    rows = []
    for r in records:
        arch = record_architecture(r)
        model = BudgetModel(**r.budget_model)
        rows.append({
            "name": r.name,
            "weighted_blocks": float(weighted_block_count(arch.family, arch.stage_code)),
            "cost": float(backbone_cost(arch, model)),
            # percent, like AP tables
            "score": round(100.0 * r.payload["winner"]["score"], 4),
        })
    return rows


def export_scatter(records: list[RunRecord], path) -> None:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SCATTER_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(scatter_rows(records))
    write_text_atomic(Path(path), buf.getvalue())
