"""Pearson filter over the 29 sensor channels, anchored on accelerometer_x.

Selection runs per hand side on raw frames; the per-side selections are
then unioned into the feature list the classifier trains on.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from armsense.frames import CHANNEL_NAMES, HandSide, SensorFrame

log = logging.getLogger(__name__)

DEFAULT_ANCHOR = "accelerometer_x"
DEFAULT_THRESHOLD = 0.5


class FeatureSelectError(ValueError):
    pass


class UndefinedCorrelationError(FeatureSelectError):
    """One of the series has zero variance, so r is undefined."""


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation via a single pass over shifted moments.

    Values are shifted by the first element of each series before the
    moment sums, which keeps the one-pass formula numerically stable.
    The result is clamped to [-1, 1] against rounding.
    """
    xs = np.asarray(x, dtype=np.float64)
    ys = np.asarray(y, dtype=np.float64)
    if xs.ndim != 1 or ys.ndim != 1:
        raise FeatureSelectError("series must be one-dimensional")
    n = xs.shape[0]
    if n != ys.shape[0]:
        raise FeatureSelectError(f"series lengths differ: {n} vs {ys.shape[0]}")
    if n < 2:
        raise FeatureSelectError("need at least two samples")
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise FeatureSelectError("series must be finite")

    dx = xs - xs[0]
    dy = ys - ys[0]
    sx = float(dx.sum())
    sy = float(dy.sum())
    sxx = float((dx * dx).sum())
    syy = float((dy * dy).sum())
    sxy = float((dx * dy).sum())

    var_x = sxx - sx * sx / n
    var_y = syy - sy * sy / n
    if var_x <= 0.0 or var_y <= 0.0:
        raise UndefinedCorrelationError("correlation undefined for a zero-variance series")
    r = (sxy - sx * sy / n) / math.sqrt(var_x * var_y)
    return max(-1.0, min(1.0, r))


@dataclass(frozen=True)
class FeatureReport:
    """Audit record of one side's Pearson filter run.

    correlations has an entry for every channel; None marks channels whose
    correlation is undefined (constant series), which are never selected.
    Selected names are in canonical column order and always include the
    anchor.
    """

    side: HandSide
    anchor: str
    threshold: float
    correlations: dict[str, float | None]
    selected: tuple[str, ...]

    @property
    def excluded_constant(self) -> tuple[str, ...]:
        return tuple(name for name in CHANNEL_NAMES if self.correlations.get(name) is None)

    def to_json_dict(self) -> dict:
        return {
            "side": self.side.value,
            "anchor": self.anchor,
            "threshold": self.threshold,
            "correlations": {name: self.correlations[name] for name in CHANNEL_NAMES},
            "selected": list(self.selected),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "FeatureReport":
        return cls(
            side=HandSide.from_label(doc["side"]),
            anchor=doc["anchor"],
            threshold=float(doc["threshold"]),
            correlations={k: (None if v is None else float(v)) for k, v in doc["correlations"].items()},
            selected=tuple(doc["selected"]),
        )


def select_features(
    frames: Iterable[SensorFrame],
    side: HandSide,
    anchor: str = DEFAULT_ANCHOR,
    threshold: float = DEFAULT_THRESHOLD,
) -> FeatureReport:
    """Correlate every channel against the anchor and keep |r| >= threshold.

    Only frames matching `side` are used. Constant channels (for example
    zero-filled unavailable sensors) are excluded with a logged reason; a
    constant anchor is an error because nothing can be selected against it.
    """
    if anchor not in CHANNEL_NAMES:
        raise FeatureSelectError(f"unknown anchor channel {anchor!r}")
    if not 0.0 < threshold <= 1.0:
        raise FeatureSelectError(f"threshold must be in (0, 1], got {threshold}")

    rows = [f.channels() for f in frames if f.side is side]
    if not rows:
        raise FeatureSelectError(f"no frames for side {side.value!r}")
    matrix = np.array(rows, dtype=np.float64)
    anchor_col = matrix[:, CHANNEL_NAMES.index(anchor)]

    correlations: dict[str, float | None] = {}
    selected: list[str] = []
    for idx, name in enumerate(CHANNEL_NAMES):
        if name == anchor:
            # Probe the anchor against itself so a constant anchor errors out.
            pearson(anchor_col, anchor_col)
            correlations[name] = 1.0
            selected.append(name)
            continue
        try:
            r = pearson(anchor_col, matrix[:, idx])
        except UndefinedCorrelationError:
            correlations[name] = None
            log.info("excluding constant channel %s (side=%s)", name, side.value)
            continue
        correlations[name] = r
        if abs(r) >= threshold:
            selected.append(name)

    return FeatureReport(
        side=side,
        anchor=anchor,
        threshold=float(threshold),
        correlations=correlations,
        selected=tuple(selected),
    )


def union_features(left: FeatureReport, right: FeatureReport) -> tuple[str, ...]:
    """Set union of the two selections: left order first, then right-only extras."""
    if left.anchor != right.anchor:
        raise FeatureSelectError(f"anchor mismatch: {left.anchor!r} vs {right.anchor!r}")
    merged = list(left.selected)
    merged.extend(name for name in right.selected if name not in left.selected)
    return tuple(merged)


def selection_to_json(
    reports: dict[HandSide, FeatureReport],
    union: Sequence[str],
) -> str:
    doc = {
        "anchor": next(iter(reports.values())).anchor if reports else DEFAULT_ANCHOR,
        "threshold": next(iter(reports.values())).threshold if reports else DEFAULT_THRESHOLD,
        "sides": {side.value: report.to_json_dict() for side, report in sorted(reports.items(), key=lambda kv: kv[0].value)},
        "union": list(union),
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def selection_from_json(text: str) -> tuple[dict[HandSide, FeatureReport], tuple[str, ...]]:
    doc = json.loads(text)
    reports = {
        HandSide.from_label(side): FeatureReport.from_json_dict(body)
        for side, body in doc.get("sides", {}).items()
    }
    return reports, tuple(doc["union"])


def format_report_table(report: FeatureReport) -> str:
    """Human-readable correlation table for the CLI."""
    lines = [f"side={report.side.value} anchor={report.anchor} threshold={report.threshold}"]
    for name in CHANNEL_NAMES:
        r = report.correlations.get(name)
        if r is None:
            lines.append(f"  {name:26s} (constant, excluded)")
        else:
            mark = "*" if name in report.selected else " "
            lines.append(f"  {name:26s} r={r:+.4f} {mark}")
    lines.append(f"  selected ({len(report.selected)}): {', '.join(report.selected)}")
    return "\n".join(lines)
