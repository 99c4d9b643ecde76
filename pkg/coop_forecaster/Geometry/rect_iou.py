import math
from dataclasses import dataclass

from coop_forecaster.Scenario.types import ObservedState
from coop_forecaster.Utils.errors import GeometryError

Point = tuple[float, float]
INSIDE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Rect:
    center: Point
    half_extents: Point  # (length / 2, width / 2)
    heading: Point

    def __post_init__(self) -> None:
        if self.half_extents[0] <= 0 or self.half_extents[1] <= 0:
            raise GeometryError(f"rect half extents must be positive, got {self.half_extents}")
        if abs(math.hypot(*self.heading) - 1.0) > 1e-9:
            raise GeometryError(f"rect heading {self.heading} is not a unit vector")

    @classmethod
    def from_state(cls, state: ObservedState) -> 'Rect':
        return cls(state.position, (0.5 * state.length, 0.5 * state.width), state.bbox_heading)

    def corners(self) -> list[Point]:
        """Counter-clockwise corners."""
        (cx, cy), (hl, hw), (c, s) = self.center, self.half_extents, self.heading
        local = ((hl, -hw), (hl, hw), (-hl, hw), (-hl, -hw))
        return [(cx + c * x - s * y, cy + s * x + c * y) for x, y in local]

    @property
    def area(self) -> float:
        return 4.0 * self.half_extents[0] * self.half_extents[1]

    @property
    def circumradius(self) -> float:
        return math.hypot(*self.half_extents)

    def key(self) -> tuple:
        return (*self.center, *self.half_extents, *self.heading)


def shoelace_area(polygon: list[Point]) -> float:
    total = 0.0
    for (x1, y1), (x2, y2) in zip(polygon, polygon[1:] + polygon[:1]):
        total += x1 * y2 - x2 * y1
    return 0.5 * total


def _cross(origin: Point, end: Point, point: Point) -> float:
    return (end[0] - origin[0]) * (point[1] - origin[1]) - (end[1] - origin[1]) * (point[0] - origin[0])


def clip_polygon(subject: list[Point], window: list[Point]) -> list[Point]:
    """Sutherland-Hodgman clipping of `subject` against the convex CCW `window`."""
    output = list(subject)
    for edge_start, edge_end in zip(window, window[1:] + window[:1]):
        if not output:
            break
        candidates, output = output, []
        previous = candidates[-1]
        previous_side = _cross(edge_start, edge_end, previous)
        for current in candidates:
            side = _cross(edge_start, edge_end, current)
            if side >= -INSIDE_TOLERANCE:
                if previous_side < -INSIDE_TOLERANCE:
                    output.append(_crossing(previous, current, previous_side, side))
                output.append(current)
            elif previous_side >= -INSIDE_TOLERANCE:
                output.append(_crossing(previous, current, previous_side, side))
            previous, previous_side = current, side
    return output


def _crossing(a: Point, b: Point, side_a: float, side_b: float) -> Point:
    t = side_a / (side_a - side_b)
    return (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))


def intersection_area(a: Rect, b: Rect) -> float:
    window, subject = (a, b) if a.key() <= b.key() else (b, a)
    clipped = clip_polygon(subject.corners(), window.corners())
    if len(clipped) < 3:
        return 0.0
    return max(0.0, shoelace_area(clipped))


def iou_bev(a: Rect, b: Rect) -> float:
    distance = math.hypot(a.center[0] - b.center[0], a.center[1] - b.center[1])
    if distance > a.circumradius + b.circumradius:
        return 0.0
    overlap = intersection_area(a, b)
    union = a.area + b.area - overlap
    if union <= 0.0:
        return 0.0
    return min(1.0, max(0.0, overlap / union))
