"""Per-square classification: lane/parking subtypes and model rotations.

Every square gets the count of drivable 4-neighbors.  Drivable squares are
crossroads (4 neighbors), T-junctions (3) or straight pieces (2 or fewer);
parking squares fall into four types by the count and arrangement of their
drivable neighbors.  Each square also carries the rotation that orients its
canonical model (open edge facing north) toward its actual neighbors.

Rotations are stored canonically: a configuration whose neighbor pattern is
invariant under k quarter-turns keeps its rotation in [0, 4/k).  This makes
classification commute exactly with quarter-turn rotation of the whole plan.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

from .errors import SpecValidationError
from .grid import (
    CellKind,
    CellRef,
    Direction,
    GarageSpec,
    validate,
)

CLASSIFIED_SCHEMA = "classified-grid/1"


class LaneSubtype(str, Enum):
    CROSSROADS = "crossroads"
    T_JUNCTION = "t-junction"
    STRAIGHT = "straight"


class ParkSubtype(str, Enum):
    TYPE1 = "type1"
    TYPE2 = "type2"
    TYPE3 = "type3"
    TYPE4 = "type4"


class RenderVariant(str, Enum):
    """Model choice for straight squares: a through-piece, a corner piece,
    or a dead end (also used for isolated squares)."""

    AXIS = "axis"
    CORNER = "corner"
    DEAD_END = "dead-end"


@dataclass(frozen=True)
class Rotation:
    """Quarter-turns from the canonical orientation; one turn maps an edge
    facing north onto east."""

    quarter_turns: int

    def __post_init__(self):
        if self.quarter_turns not in (0, 1, 2, 3):
            raise ValueError(f"quarter_turns must be in 0..3, got {self.quarter_turns}")

    @property
    def yaw_radians(self) -> float:
        import math

        return self.quarter_turns * math.pi / 2.0


@dataclass(frozen=True)
class ClassifiedCell:
    cell: CellRef
    kind: CellKind
    lane_adjacency: int
    lane_subtype: LaneSubtype | None
    park_subtype: ParkSubtype | None
    render_variant: RenderVariant | None
    rotation: Rotation


@dataclass(frozen=True)
class ClassifiedGrid:
    spec: GarageSpec
    cells: tuple[tuple[ClassifiedCell, ...], ...]

    def cell(self, i: int, j: int) -> ClassifiedCell:
        return self.cells[i][j]


# --- neighbor analysis ---------------------------------------------------------


def lane_directions(spec: GarageSpec, cell: CellRef) -> frozenset[Direction]:
    """Directions whose neighbor is a drivable square (lane, entrance, exit)."""
    if not spec.in_bounds(cell):
        raise IndexError(f"cell ({cell.i},{cell.j}) outside {spec.m}x{spec.n} grid")
    dirs = []
    for d in Direction:
        di, dj = d.delta
        ni, nj = cell.i + di, cell.j + dj
        if 0 <= ni < spec.m and 0 <= nj < spec.n and 1 <= spec.structure[ni][nj] <= 3:
            dirs.append(d)
    return frozenset(dirs)


def count_lane_neighbors(spec: GarageSpec, cell: CellRef) -> int:
    """Number of drivable squares among the 4-neighborhood (off-grid sides
    contribute nothing)."""
    return len(lane_directions(spec, cell))


def symmetry_period(dirs: frozenset[Direction]) -> int:
    """Smallest positive number of quarter-turns leaving the direction set
    unchanged: 1 for empty/full sets, 2 for opposite pairs, else 4."""
    n = len(dirs)
    if n == 0 or n == 4:
        return 1
    if n == 2:
        a, b = dirs
        if (a - b) % 4 == 2:
            return 2
    return 4


def _is_opposite_pair(dirs: frozenset[Direction]) -> bool:
    return len(dirs) == 2 and symmetry_period(dirs) == 2


# --- subtype rules --------------------------------------------------------------


def classify_lane(spec: GarageSpec, cell: CellRef) -> LaneSubtype:
    """Subtype of a drivable square from its drivable-neighbor count."""
    kind = CellKind(spec.code(cell))
    if not kind.drivable:
        raise ValueError(f"cell ({cell.i},{cell.j}) is {kind.name}, not drivable")
    cnt = count_lane_neighbors(spec, cell)
    if cnt == 4:
        return LaneSubtype.CROSSROADS
    if cnt == 3:
        return LaneSubtype.T_JUNCTION
    return LaneSubtype.STRAIGHT


def classify_parking(spec: GarageSpec, cell: CellRef) -> ParkSubtype:
    """Parking type from count and arrangement of drivable neighbors:
    3+ or an opposite pair -> Type1, a perpendicular pair -> Type2,
    one -> Type3, none -> Type4."""
    kind = CellKind(spec.code(cell))
    if kind is not CellKind.PARKING:
        raise ValueError(f"cell ({cell.i},{cell.j}) is {kind.name}, not a parking square")
    dirs = lane_directions(spec, cell)
    cnt = len(dirs)
    if cnt >= 3:
        return ParkSubtype.TYPE1
    if cnt == 2:
        return ParkSubtype.TYPE1 if _is_opposite_pair(dirs) else ParkSubtype.TYPE2
    if cnt == 1:
        return ParkSubtype.TYPE3
    return ParkSubtype.TYPE4


def render_variant_for(
    subtype: LaneSubtype | ParkSubtype, dirs: frozenset[Direction]
) -> RenderVariant | None:
    """Model variant for straight squares; other subtypes have one model."""
    if subtype is not LaneSubtype.STRAIGHT:
        return None
    if len(dirs) == 2:
        return RenderVariant.AXIS if _is_opposite_pair(dirs) else RenderVariant.CORNER
    return RenderVariant.DEAD_END


def _corner_turns(dirs: frozenset[Direction]) -> int:
    # Perpendicular pair {d, d+1}: rotation is the index of the first edge,
    # giving {N,E}->0, {E,S}->1, {S,W}->2, {W,N}->3.
    for d in dirs:
        if d.rotated(1) in dirs:
            return int(d)
    raise ValueError(f"not a perpendicular pair: {dirs}")


def _rotation_turns(dirs: frozenset[Direction]) -> int:
    """Canonical quarter-turns for a drivable-neighbor direction set.

    Reduced modulo the set's symmetry period, so symmetric configurations
    (crossroads, through-pieces, isolated squares) stay canonical and the
    assignment commutes with plan rotation.
    """
    cnt = len(dirs)
    if cnt in (0, 4):
        return 0
    if cnt == 3:
        (missing,) = set(Direction) - dirs
        return (int(missing) + 2) % 4
    if cnt == 2:
        if _is_opposite_pair(dirs):
            return 0 if Direction.NORTH in dirs else 1
        return _corner_turns(dirs)
    (single,) = dirs
    return int(single)


def assign_rotation(
    spec: GarageSpec, cell: CellRef, subtype: LaneSubtype | ParkSubtype
) -> Rotation:
    """Rotation orienting the square's canonical model toward its drivable
    neighbors.  Deterministic; see :func:`_rotation_turns` for the rules."""
    kind = CellKind(spec.code(cell))
    if isinstance(subtype, LaneSubtype) and not kind.drivable:
        raise ValueError(f"lane subtype given for non-drivable cell ({cell.i},{cell.j})")
    if isinstance(subtype, ParkSubtype) and kind is not CellKind.PARKING:
        raise ValueError(f"parking subtype given for non-parking cell ({cell.i},{cell.j})")
    dirs = lane_directions(spec, cell)
    return Rotation(_rotation_turns(dirs) % symmetry_period(dirs))


def open_edges(cell: ClassifiedCell) -> frozenset[Direction]:
    """Directions the cell's rotated model opens toward.

    Canonical open-edge sets (rotation 0): crossroads all four, T-junction
    all but south, straight-axis north/south, corner north+east, dead end
    north only.  Parking models open toward their entry edges the same way.
    """
    t = cell.rotation.quarter_turns
    subtype = cell.lane_subtype or cell.park_subtype
    if subtype in (LaneSubtype.CROSSROADS, ParkSubtype.TYPE1) and cell.lane_adjacency == 4:
        base: frozenset[Direction] = frozenset(Direction)
    elif subtype in (LaneSubtype.T_JUNCTION,) or (
        subtype is ParkSubtype.TYPE1 and cell.lane_adjacency == 3
    ):
        base = frozenset(Direction) - {Direction.SOUTH}
    elif cell.render_variant is RenderVariant.AXIS or (
        subtype is ParkSubtype.TYPE1 and cell.lane_adjacency == 2
    ):
        base = frozenset({Direction.NORTH, Direction.SOUTH})
    elif cell.render_variant is RenderVariant.CORNER or subtype is ParkSubtype.TYPE2:
        base = frozenset({Direction.NORTH, Direction.EAST})
    elif cell.render_variant is RenderVariant.DEAD_END and cell.lane_adjacency == 0:
        base = frozenset()
    elif subtype in (LaneSubtype.STRAIGHT, ParkSubtype.TYPE3):
        base = frozenset({Direction.NORTH})
    else:  # TYPE4, obstacles
        base = frozenset()
    return frozenset(d.rotated(t) for d in base)


# --- whole-grid classification ---------------------------------------------------


def classify_all(spec: GarageSpec) -> ClassifiedGrid:
    """Classify and rotate every square; refuses invalid plans."""
    report = validate(spec)
    if not report.ok:
        raise SpecValidationError(report)

    m, n = spec.m, spec.n
    structure = spec.structure
    kind_of = {k.value: k for k in CellKind}
    rows: list[tuple[ClassifiedCell, ...]] = []
    for i in range(m):
        row: list[ClassifiedCell] = []
        for j in range(n):
            code = structure[i][j]
            dirs = []
            if i > 0 and 1 <= structure[i - 1][j] <= 3:
                dirs.append(Direction.NORTH)
            if j < n - 1 and 1 <= structure[i][j + 1] <= 3:
                dirs.append(Direction.EAST)
            if i < m - 1 and 1 <= structure[i + 1][j] <= 3:
                dirs.append(Direction.SOUTH)
            if j > 0 and 1 <= structure[i][j - 1] <= 3:
                dirs.append(Direction.WEST)
            dirset = frozenset(dirs)
            cnt = len(dirs)
            kind = kind_of[code]

            lane_subtype = None
            park_subtype = None
            variant = None
            if code >= 1:
                if cnt == 4:
                    lane_subtype = LaneSubtype.CROSSROADS
                elif cnt == 3:
                    lane_subtype = LaneSubtype.T_JUNCTION
                else:
                    lane_subtype = LaneSubtype.STRAIGHT
                variant = render_variant_for(lane_subtype, dirset)
            elif kind is CellKind.PARKING:
                if cnt >= 3:
                    park_subtype = ParkSubtype.TYPE1
                elif cnt == 2:
                    park_subtype = (
                        ParkSubtype.TYPE1 if _is_opposite_pair(dirset) else ParkSubtype.TYPE2
                    )
                elif cnt == 1:
                    park_subtype = ParkSubtype.TYPE3
                else:
                    park_subtype = ParkSubtype.TYPE4

            if kind is CellKind.OBSTACLE:
                turns = 0
            else:
                turns = _rotation_turns(dirset) % symmetry_period(dirset)
            row.append(
                ClassifiedCell(
                    cell=CellRef(i, j),
                    kind=kind,
                    lane_adjacency=cnt,
                    lane_subtype=lane_subtype,
                    park_subtype=park_subtype,
                    render_variant=variant,
                    rotation=Rotation(turns),
                )
            )
        rows.append(tuple(row))
    return ClassifiedGrid(spec=spec, cells=tuple(rows))


# --- export ----------------------------------------------------------------------


def classified_grid_document(grid: ClassifiedGrid) -> dict:
    cells = []
    for row in grid.cells:
        out_row = []
        for c in row:
            subtype = c.lane_subtype or c.park_subtype
            out_row.append(
                {
                    "kind": c.kind.name.lower(),
                    "cnt": c.lane_adjacency,
                    "subtype": subtype.value if subtype else None,
                    "render_variant": c.render_variant.value if c.render_variant else None,
                    "quarter_turns": c.rotation.quarter_turns,
                }
            )
        cells.append(out_row)
    return {"schema": CLASSIFIED_SCHEMA, "m": grid.spec.m, "n": grid.spec.n, "cells": cells}


def emit_classified_grid(grid: ClassifiedGrid) -> str:
    return json.dumps(classified_grid_document(grid), indent=2, sort_keys=True) + "\n"
