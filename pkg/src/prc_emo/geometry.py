"""Emotion labels as points on the valence-arousal unit circle.

Two labels are compared through the cosine of the angle between their unit
vectors: opposed pairs score 0, aligned pairs score the cosine itself, and
(near-)orthogonal pairs fall back to 1/N so a right-angle transition still
carries a little weight in an N-label wheel. A weighted emotional shift
(WES) applies the affine map k * s + b to a similarity value s, so that
transitions between close emotions weigh more than distant ones.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from .corpus import normalize_label
from .errors import DataError

# cos of a right angle rarely lands on exactly 0.0 in floating point
ZERO_DOT_TOL = 1e-9


@dataclass(frozen=True)
class WesParams:
    """Affine weights for a shift: contribution = k * similarity + b."""

    k: float = 1.0
    b: float = 1.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.k) and math.isfinite(self.b)):
            raise DataError("k and b must be finite")
        if self.k < 0 or self.b < 0:
            raise DataError(f"k and b must be >= 0, got k={self.k}, b={self.b}")


class EmotionWheel:
    """Label -> angle (degrees) placement covering one dataset's label set."""

    def __init__(self, angles: Mapping[str, float]):
        normalized: dict[str, float] = {}
        for label, angle in angles.items():
            key = normalize_label(str(label))
            if not key:
                raise DataError("wheel labels must be non-empty")
            if key in normalized:
                raise DataError(f"duplicate wheel label {key!r}")
            angle = float(angle)
            if not math.isfinite(angle):
                raise DataError(f"angle for {key!r} must be finite")
            normalized[key] = angle % 360.0
        if len(normalized) < 2:
            raise DataError("a wheel needs at least 2 labels")
        self.angles: dict[str, float] = normalized

    @property
    def size(self) -> int:
        """Number of labels on the wheel (the N of the 1/N fallback)."""
        return len(self.angles)

    def __contains__(self, label: str) -> bool:
        return normalize_label(label) in self.angles

    def labels(self) -> tuple[str, ...]:
        return tuple(self.angles)

    def subset(self, labels: Iterable[str]) -> "EmotionWheel":
        """Restrict the wheel to a dataset's label set (changes N)."""
        picked: dict[str, float] = {}
        for label in labels:
            key = normalize_label(label)
            if key not in self.angles:
                raise DataError(f"label {key!r} is not on the wheel")
            picked[key] = self.angles[key]
        return EmotionWheel(picked)

    @classmethod
    def from_config(cls, path: str | Path) -> "EmotionWheel":
        """Load ``{"labels": {"<label>": <angle_degrees>, ...}}``."""
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read wheel config {path}: {exc}") from exc
        if not isinstance(data, dict) or not isinstance(data.get("labels"), dict):
            raise DataError(f"wheel config {path} must contain a 'labels' object")
        return cls(data["labels"])


def default_wheel() -> EmotionWheel:
    """The bundled default placement (aliases for common dataset label names)."""
    text = (
        resources.files("prc_emo")
        .joinpath("resources/wheels/default.json")
        .read_text(encoding="utf-8")
    )
    return EmotionWheel(json.loads(text)["labels"])


def label_vector(wheel: EmotionWheel, label: str) -> tuple[float, float]:
    """Unit vector (cos t, sin t) for the label's wheel angle."""
    key = normalize_label(label)
    if key not in wheel.angles:
        raise DataError(f"unknown emotion label {key!r}")
    theta = math.radians(wheel.angles[key])
    return (math.cos(theta), math.sin(theta))


def similarity(wheel: EmotionWheel, i: str, j: str) -> float:
    """Similarity in [0, 1] between two labels on the wheel.

    The cosine of the angle between the two unit vectors (computed from the
    angle difference, so identical labels score exactly 1), piecewise: the
    cosine itself when positive, 0 when negative, and 1/N when the vectors
    are orthogonal (|cos| <= ZERO_DOT_TOL).
    """
    ki, kj = normalize_label(i), normalize_label(j)
    for key in (ki, kj):
        if key not in wheel.angles:
            raise DataError(f"unknown emotion label {key!r}")
    dot = math.cos(math.radians(abs(wheel.angles[ki] - wheel.angles[kj])))
    if abs(dot) <= ZERO_DOT_TOL:
        return 1.0 / wheel.size
    if dot < 0.0:
        return 0.0
    return min(dot, 1.0)


def wes(params: WesParams, s: float) -> float:
    """Weighted emotional shift: k * s + b for a similarity s in [0, 1]."""
    if not 0.0 <= s <= 1.0:
        raise DataError(f"similarity must be in [0, 1], got {s}")
    return params.k * s + params.b
