"""
Four-arm intersection with right-hand traffic.

The junction box spans [-b, b]^2 with b equal to the lane width w. Each arm
carries one inbound and one outbound lane, offset by w/2 to the right of the
travel direction. From every inbound lane three manoeuvres cross the box:
straight, a right turn of radius b - w/2 and a left turn of radius b + w/2.
"""

import math
from dataclasses import dataclass

import numpy as np

from coop_forecaster.Scenario.types import LaneSegment

HEADINGS = ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))
MANEUVERS = ("straight", "left", "right")


def _right_normal(heading: np.ndarray) -> np.ndarray:
    return np.array([heading[1], -heading[0]])


def _rotate(vector: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([c * vector[0] - s * vector[1], s * vector[0] + c * vector[1]])


@dataclass(frozen=True)
class LanePiece:
    start: tuple[float, float]
    heading: tuple[float, float]  # Heading at the start of the piece
    length: float
    turn: str
    road_type: str
    center: tuple[float, float] | None = None  # Arc centre, None for straight pieces
    radius: float = 0.0
    direction: int = 0  # +1 counter-clockwise (left), -1 clockwise (right)

    def pose(self, s: float) -> tuple[np.ndarray, np.ndarray]:
        """Position and unit heading after travelling s metres along the piece."""
        start, heading = np.array(self.start), np.array(self.heading)
        if self.center is None:
            return start + s * heading, heading
        angle = self.direction * s / self.radius
        center = np.array(self.center)
        return center + _rotate(start - center, angle), _rotate(heading, angle)

    def end_pose(self) -> tuple[np.ndarray, np.ndarray]:
        return self.pose(self.length)


class Route:
    """Inbound arm, junction manoeuvre and outbound arm chained by arc length."""

    def __init__(self, pieces: list[LanePiece]) -> None:
        self.pieces = pieces
        self.offsets = np.concatenate([[0.0], np.cumsum([piece.length for piece in pieces])])

    @property
    def length(self) -> float:
        return float(self.offsets[-1])

    def pose(self, s: float) -> tuple[np.ndarray, np.ndarray]:
        if s < 0.0:
            position, heading = self.pieces[0].pose(0.0)
            return position + s * heading, heading
        if s >= self.length:
            position, heading = self.pieces[-1].end_pose()
            return position + (s - self.length) * heading, heading
        index = int(np.searchsorted(self.offsets, s, side="right")) - 1
        index = min(index, len(self.pieces) - 1)
        return self.pieces[index].pose(s - self.offsets[index])


class IntersectionMap:
    def __init__(self, arm_length: float = 60.0, lane_width: float = 3.5, sample_step: float = 2.0) -> None:
        self.arm_length = arm_length
        self.lane_width = lane_width
        self.half_size = lane_width
        self.sample_step = sample_step
        self.inbound: list[LanePiece] = []
        self.outbound: list[LanePiece] = []
        self.maneuvers: dict[tuple[int, str], LanePiece] = {}
        self._build()

    def _inbound_entry(self, heading: np.ndarray) -> np.ndarray:
        return -self.half_size * heading + 0.5 * self.lane_width * _right_normal(heading)

    def _outbound_exit(self, heading: np.ndarray) -> np.ndarray:
        return self.half_size * heading + 0.5 * self.lane_width * _right_normal(heading)

    def _build(self) -> None:
        b, w = self.half_size, self.lane_width
        for arm, raw in enumerate(HEADINGS):
            heading = np.array(raw)
            normal = _right_normal(heading)
            entry = self._inbound_entry(heading)
            self.inbound.append(LanePiece(tuple(entry - self.arm_length * heading), raw, self.arm_length,
                                          "straight", "normal"))
            self.outbound.append(LanePiece(tuple(self._outbound_exit(heading)), raw, self.arm_length,
                                           "straight", "normal"))

            self.maneuvers[(arm, "straight")] = LanePiece(tuple(entry), raw, 2.0 * b, "straight", "intersection")
            right_radius = b - 0.5 * w
            self.maneuvers[(arm, "right")] = LanePiece(
                tuple(entry), raw, 0.5 * math.pi * right_radius, "right", "intersection",
                center=tuple(entry + right_radius * normal), radius=right_radius, direction=-1,
            )
            left_radius = b + 0.5 * w
            self.maneuvers[(arm, "left")] = LanePiece(
                tuple(entry), raw, 0.5 * math.pi * left_radius, "left", "intersection",
                center=tuple(entry - left_radius * normal), radius=left_radius, direction=1,
            )

    @staticmethod
    def exit_arm(arm: int, maneuver: str) -> int:
        return {"straight": arm, "left": (arm + 1) % 4, "right": (arm + 3) % 4}[maneuver]

    def route(self, arm: int, maneuver: str) -> Route:
        return Route([self.inbound[arm], self.maneuvers[(arm, maneuver)],
                      self.outbound[self.exit_arm(arm, maneuver)]])

    def pieces(self) -> list[LanePiece]:
        ordered = list(self.inbound)
        for arm in range(4):
            ordered.extend(self.maneuvers[(arm, maneuver)] for maneuver in MANEUVERS)
        ordered.extend(self.outbound)
        return ordered

    def lane_segments(self) -> list[LaneSegment]:
        segments: list[LaneSegment] = []
        for piece in self.pieces():
            count = max(1, math.ceil(piece.length / self.sample_step - 1e-9))
            stations = np.linspace(0.0, piece.length, count + 1)
            points = [piece.pose(float(s))[0] for s in stations]
            for start, end in zip(points[:-1], points[1:]):
                segments.append(LaneSegment((float(start[0]), float(start[1])), (float(end[0]), float(end[1])),
                                            piece.turn, piece.road_type))
        return segments
