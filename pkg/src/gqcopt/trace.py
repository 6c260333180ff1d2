"""Per-iteration run records shared by both algorithms and the CLI."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

CSV_COLUMNS = ("t", "value", "gap", "q_step", "flags")


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


@dataclass
class RunTrace:
    """Iteration records plus run metadata.

    Missing quantities are stored as NaN and written as empty CSV cells.
    """

    metadata: dict = field(default_factory=dict)
    t: list = field(default_factory=list)
    value: list = field(default_factory=list)
    gap: list = field(default_factory=list)
    q_step: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    def append(self, t, *, value=math.nan, gap=math.nan, q_step=math.nan, flags=""):
        if self.t and t <= self.t[-1]:
            raise ValueError("trace times must be strictly increasing")
        self.t.append(int(t))
        self.value.append(float(value))
        self.gap.append(float(gap))
        self.q_step.append(float(q_step))
        self.flags.append(flags)

    def __len__(self):
        return len(self.t)

    def column(self, name) -> np.ndarray:
        return np.asarray(getattr(self, name), dtype=np.float64)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write(",".join(CSV_COLUMNS) + "\n")
        for row in zip(self.t, self.value, self.gap, self.q_step, self.flags):
            buf.write(",".join(_fmt(v) if i < 4 else v for i, v in enumerate(row)) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text
