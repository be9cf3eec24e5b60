"""
Perception outputs: class-labeled 2D boxes and cross-view pixel correspondences.
"""
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

Box = Tuple[float, float, float, float]


class Detection2D(BaseModel):
    """One open-vocabulary detection, box as [x0, y0, x1, y1] pixels."""

    model_config = ConfigDict(frozen=True)

    frame_id: str
    class_label: str
    box: Box
    score: float = Field(ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _ordered_box(self) -> "Detection2D":
        x0, y0, x1, y1 = self.box
        if not (x0 < x1 and y0 < y1):
            raise ValueError(f"degenerate box {self.box}")
        return self

    @property
    def center(self) -> Tuple[float, float]:
        x0, y0, x1, y1 = self.box
        return (x0 + x1) / 2.0, (y0 + y1) / 2.0

    def within(self, width: int, height: int) -> bool:
        x0, y0, x1, y1 = self.box
        return x0 >= 0 and y0 >= 0 and x1 <= width and y1 <= height

    def contains(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Which pixel centers (u + 0.5, v + 0.5) fall inside the box."""
        x0, y0, x1, y1 = self.box
        cu, cv = np.asarray(u) + 0.5, np.asarray(v) + 0.5
        return (cu >= x0) & (cu <= x1) & (cv >= y0) & (cv <= y1)

    def matches_class(self, target_class: str) -> bool:
        return self.class_label.strip().lower() == target_class.strip().lower()

    def to_fixture(self) -> Dict[str, object]:
        """Wire/fixture form {label, box, score}."""
        return {"label": self.class_label, "box": list(self.box), "score": self.score}

    @classmethod
    def from_fixture(cls, frame_id: str, record: Dict[str, object]) -> "Detection2D":
        return cls(
            frame_id=frame_id,
            class_label=str(record["label"]),
            box=tuple(float(x) for x in record["box"]),
            score=float(record["score"]),
        )


@dataclass(frozen=True, eq=False)
class MatchPairs:
    """Pixel correspondences; each row is (source u, source v, target u, target v)."""

    source_frame: str
    target_frame: str
    pairs: np.ndarray

    def __post_init__(self) -> None:
        pairs = np.asarray(self.pairs, dtype=np.float64).reshape(-1, 4)
        pairs.setflags(write=False)
        object.__setattr__(self, "pairs", pairs)

    def __len__(self) -> int:
        return int(self.pairs.shape[0])

    @property
    def source_pixels(self) -> np.ndarray:
        return self.pairs[:, :2]

    @property
    def target_pixels(self) -> np.ndarray:
        return self.pairs[:, 2:]

    @property
    def key(self) -> str:
        return pair_key(self.source_frame, self.target_frame)

    def to_fixture(self) -> List[List[float]]:
        return self.pairs.tolist()


def pair_key(source_frame: str, target_frame: str) -> str:
    """Matches fixture key, "<source>-><target>"."""
    return f"{source_frame}->{target_frame}"
