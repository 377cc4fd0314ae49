"""
Command-line request parsing models.
"""

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field

from app.exceptions import ArgumentError


class GridSpec(BaseModel):
    """An x grid given as `geometric:LO:HI:COUNT` or as a comma-separated list."""

    points: list[int] = Field(..., description="Integer grid points, ascending.")

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        text = text.strip()
        if text.startswith("geometric:"):
            parts = text.split(":")
            if len(parts) != 4:
                raise ArgumentError(f"expected geometric:LO:HI:COUNT, got '{text}'")
            try:
                lo, hi, count = float(parts[1]), float(parts[2]), int(parts[3])
            except ValueError as e:
                raise ArgumentError(f"malformed geometric grid '{text}'") from e
            if not (2 <= lo <= hi) or count < 1:
                raise ArgumentError(f"geometric grid needs 2 <= LO <= HI and COUNT >= 1, got '{text}'")
            raw = [lo] if count == 1 else np.geomspace(lo, hi, count).tolist()
        else:
            try:
                raw = [float(p) for p in text.split(",") if p.strip()]
            except ValueError as e:
                raise ArgumentError(f"malformed x grid '{text}'") from e
        points = sorted({int(round(p)) for p in raw})
        if len(points) < len(raw):
            logger.warning(f"x grid '{text}' collapsed to {len(points)} distinct integer point(s)")
        return cls(points=points)
