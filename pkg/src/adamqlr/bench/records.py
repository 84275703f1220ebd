"""Per-step metric records and their JSONL/CSV round-trip serialization."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from ..optim import GuardEvent

# Serialized key order; `lambda` is a keyword, so the attribute is `lam`.
FIELDS = (
    "step",
    "epoch",
    "wall_time_s",
    "train_loss",
    "val_loss",
    "test_loss",
    "train_acc",
    "val_acc",
    "test_acc",
    "alpha",
    "lambda",
    "rho",
    "guard_event",
)

_INT_FIELDS = {"step", "epoch"}


@dataclass
class MetricRecord:
    step: int
    epoch: int
    wall_time_s: float
    train_loss: float
    val_loss: Optional[float] = None
    test_loss: Optional[float] = None
    train_acc: Optional[float] = None
    val_acc: Optional[float] = None
    test_acc: Optional[float] = None
    alpha: Optional[float] = None
    lam: Optional[float] = None
    rho: Optional[float] = None
    guard_event: Optional[GuardEvent] = None

    def to_dict(self) -> dict:
        return {
            "step": int(self.step),
            "epoch": int(self.epoch),
            "wall_time_s": float(self.wall_time_s),
            "train_loss": float(self.train_loss),
            "val_loss": _opt_float(self.val_loss),
            "test_loss": _opt_float(self.test_loss),
            "train_acc": _opt_float(self.train_acc),
            "val_acc": _opt_float(self.val_acc),
            "test_acc": _opt_float(self.test_acc),
            "alpha": _opt_float(self.alpha),
            "lambda": _opt_float(self.lam),
            "rho": _opt_float(self.rho),
            "guard_event": None if self.guard_event is None else self.guard_event.name,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricRecord":
        guard = d.get("guard_event")
        return cls(
            step=int(d["step"]),
            epoch=int(d["epoch"]),
            wall_time_s=float(d["wall_time_s"]),
            train_loss=float(d["train_loss"]),
            val_loss=_opt_float(d.get("val_loss")),
            test_loss=_opt_float(d.get("test_loss")),
            train_acc=_opt_float(d.get("train_acc")),
            val_acc=_opt_float(d.get("val_acc")),
            test_acc=_opt_float(d.get("test_acc")),
            alpha=_opt_float(d.get("alpha")),
            lam=_opt_float(d.get("lambda")),
            rho=_opt_float(d.get("rho")),
            guard_event=None if guard is None else GuardEvent[guard],
        )


def _opt_float(x) -> Optional[float]:
    return None if x is None else float(x)


def emit(records: Sequence[MetricRecord], path, format: str = "jsonl") -> None:
    """Write records as JSONL (one object per line) or CSV (header + rows).

    Floats serialize via their shortest round-trip decimal form, so
    `read_records` recovers them exactly.
    """
    if format == "jsonl":
        with open(path, "w") as fh:
            for rec in records:
                fh.write(json.dumps(rec.to_dict()) + "\n")
        return
    if format == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(FIELDS)
            for rec in records:
                d = rec.to_dict()
                writer.writerow(["" if d[k] is None else _cell(d[k]) for k in FIELDS])
        return
    raise ValueError(f"unknown format {format!r}; expected 'jsonl' or 'csv'")


def _cell(x) -> str:
    return repr(x) if isinstance(x, float) else str(x)


def read_records(path) -> list[MetricRecord]:
    """Read back a file produced by `emit`, inferring format from content."""
    with open(path) as fh:
        first = fh.readline()
        fh.seek(0)
        if first.startswith("{") or not first.strip():
            return [MetricRecord.from_dict(json.loads(line)) for line in fh if line.strip()]
        reader = csv.DictReader(fh)
        out = []
        for row in reader:
            d = {k: (None if v == "" else v) for k, v in row.items()}
            out.append(MetricRecord.from_dict(d))
        return out
