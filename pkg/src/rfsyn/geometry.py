"""Axis-aligned rectangle arithmetic used by the layout stages."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle, lower-left (x0, y0) to upper-right (x1, y1), in um."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise ValueError(f"degenerate rect {self}")

    @property
    def w(self) -> float:
        return self.x1 - self.x0

    @property
    def h(self) -> float:
        return self.y1 - self.y0

    @property
    def cx(self) -> float:
        return 0.5 * (self.x0 + self.x1)

    @property
    def cy(self) -> float:
        return 0.5 * (self.y0 + self.y1)

    @property
    def area(self) -> float:
        return self.w * self.h

    def inflate(self, d: float) -> "Rect":
        return Rect(self.x0 - d, self.y0 - d, self.x1 + d, self.y1 + d)

    def shift(self, dx: float, dy: float) -> "Rect":
        return Rect(self.x0 + dx, self.y0 + dy, self.x1 + dx, self.y1 + dy)

    def overlaps(self, other: "Rect", strict: bool = True) -> bool:
        """True when interiors intersect. With strict=False, touching counts too."""
        if strict:
            return (self.x0 < other.x1 and other.x0 < self.x1
                    and self.y0 < other.y1 and other.y0 < self.y1)
        return (self.x0 <= other.x1 and other.x0 <= self.x1
                and self.y0 <= other.y1 and other.y0 <= self.y1)

    def contains(self, other: "Rect") -> bool:
        return (self.x0 <= other.x0 and self.y0 <= other.y0
                and self.x1 >= other.x1 and self.y1 >= other.y1)

    def contains_point(self, x: float, y: float) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def clearance(self, other: "Rect") -> float:
        """Minimum gap between the two rectangles (0 when they touch or overlap)."""
        dx = max(other.x0 - self.x1, self.x0 - other.x1, 0.0)
        dy = max(other.y0 - self.y1, self.y0 - other.y1, 0.0)
        if dx > 0.0 and dy > 0.0:
            return (dx * dx + dy * dy) ** 0.5
        return max(dx, dy)

    def intersection(self, other: "Rect"):
        x0, y0 = max(self.x0, other.x0), max(self.y0, other.y0)
        x1, y1 = min(self.x1, other.x1), min(self.y1, other.y1)
        if x1 < x0 or y1 < y0:
            return None
        return Rect(x0, y0, x1, y1)

    def to_list(self) -> list[float]:
        return [self.x0, self.y0, self.x1, self.y1]


def rotate_rect(rect: Rect, rotation: int, w: float, h: float) -> Rect:
    """Rotate a rect given in a block's local frame (block spans (0,0)-(w,h)).

    rotation is one of {0, 90, 180, 270} degrees counterclockwise; the rotated
    block is re-anchored so its bounding box keeps lower-left at the origin.
    """
    if rotation == 0:
        return rect
    if rotation == 90:
        return Rect(h - rect.y1, rect.x0, h - rect.y0, rect.x1)
    if rotation == 180:
        return Rect(w - rect.x1, h - rect.y1, w - rect.x0, h - rect.y0)
    if rotation == 270:
        return Rect(rect.y0, w - rect.x1, rect.y1, w - rect.x0)
    raise ValueError(f"unsupported rotation {rotation}")


def rotated_dims(rotation: int, w: float, h: float) -> tuple[float, float]:
    return (h, w) if rotation in (90, 270) else (w, h)
