"""3D scene synthesis: classified grid -> boxes in world space.

World frame: +x east, +y south (row 0 sits at y=0, the north edge), +z up,
meters everywhere.  The slab surface is the top of the floor tiles, so
anything resting "on the floor" sits at FLOOR_THICKNESS.

Synthesis order is fixed and deterministic: floor tiles with their markings
(row-major), obstacle wall slabs, columns, ceiling panels, ramp markers,
lamps.  Vehicles are appended afterwards by populate_vehicles.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum

from .errors import PlanError, SchemaError
from .classify import ClassifiedGrid, RenderVariant
from .grid import CellKind, CellRef

SCENE_SCHEMA = "scene/1"
PLAN_SCHEMA = "occupancy-plan/1"

CEILING_HEIGHT = 3.0
COLUMN_SIZE = 0.5
FLOOR_THICKNESS = 0.05
CEILING_THICKNESS = 0.05
MARKING_THICKNESS = 0.01
LAMP_SIZE = (0.3, 0.3, 0.1)

# length, width, height in meters
VEHICLE_SIZES: dict[str, tuple[float, float, float]] = {
    "small": (4.2, 1.8, 1.5),
    "medium": (4.9, 1.9, 1.8),
    "large": (5.9, 2.1, 2.4),
}

_COMPASS = ("north", "east", "south", "west")


class NodeKind(str, Enum):
    FLOOR_TILE = "floor_tile"
    LANE_MARKING = "lane_marking"
    PARKING_MARKING = "parking_marking"
    COLUMN = "column"
    CEILING_PANEL = "ceiling_panel"
    LAMP = "lamp"
    VEHICLE = "vehicle"
    RAMP_MARKER = "ramp_marker"


#: Kinds that block sight lines.  Markings, ramp markers and lamps never do.
OPAQUE_KINDS = frozenset(
    {NodeKind.FLOOR_TILE, NodeKind.COLUMN, NodeKind.CEILING_PANEL, NodeKind.VEHICLE}
)


class LightLevel(str, Enum):
    """The four lighting presets: lamp coverage over eligible sites and the
    relative intensity of the populated lamps."""

    BRIGHT = "bright"
    CLEAR = "clear"
    MODERATE = "moderate"
    DIM = "dim"

    @property
    def lamp_coverage(self) -> float:
        return _LIGHT_PRESETS[self][0]

    @property
    def lamp_intensity(self) -> float:
        return _LIGHT_PRESETS[self][1]


_LIGHT_PRESETS = {
    LightLevel.BRIGHT: (1.0, 1.0),
    LightLevel.CLEAR: (1.0, 0.6),
    LightLevel.MODERATE: (0.7, 0.6),
    LightLevel.DIM: (0.4, 0.6),
}


@dataclass(frozen=True)
class Box3:
    """Oriented box: center, half extents along its local axes, yaw about +z."""

    center: tuple[float, float, float]
    half_extents: tuple[float, float, float]
    yaw: float = 0.0

    def __post_init__(self):
        hx, hy, hz = self.half_extents
        if hx <= 0.0 or hy <= 0.0 or hz <= 0.0:
            raise ValueError(f"half extents must be positive, got {self.half_extents}")

    @property
    def aabb(self) -> tuple[float, float, float, float, float, float]:
        """World-space bounds (min x, min y, min z, max x, max y, max z)."""
        hx, hy, hz = self.half_extents
        c, s = abs(math.cos(self.yaw)), abs(math.sin(self.yaw))
        ex = hx * c + hy * s
        ey = hx * s + hy * c
        cx, cy, cz = self.center
        return (cx - ex, cy - ey, cz - hz, cx + ex, cy + ey, cz + hz)


@dataclass(frozen=True)
class SceneNode:
    id: str
    kind: NodeKind
    box: Box3
    tags: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class SceneGraph:
    nodes: tuple[SceneNode, ...]
    bounds: Box3
    light_level: LightLevel

    def node(self, node_id: str) -> SceneNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(f"no node {node_id!r} in scene")

    def count(self, kind: NodeKind) -> int:
        return sum(1 for n in self.nodes if n.kind is kind)


@dataclass(frozen=True)
class PlanEntry:
    cell: CellRef
    size: str
    parked: bool = True
    color: str = "white"
    force: bool = False


@dataclass(frozen=True)
class OccupancyPlan:
    entries: tuple[PlanEntry, ...]


@dataclass(frozen=True)
class SynthOptions:
    light: LightLevel = LightLevel.BRIGHT
    ceiling_height: float = CEILING_HEIGHT
    column_size: float = COLUMN_SIZE
    prune_columns: frozenset[tuple[int, int]] = frozenset()
    marking_inset: float = 0.1


@dataclass(frozen=True)
class Rect:
    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0


def _prefix(widths: tuple[float, ...]) -> list[float]:
    out = [0.0]
    for w in widths:
        out.append(out[-1] + w)
    return out


def layout_cells(grid: ClassifiedGrid) -> list[tuple[CellRef, Rect]]:
    """World rectangle of every cell via prefix sums of the width vectors.

    Cell (i, j) spans x in [sum C[:j], sum C[:j+1]] and y in
    [sum R[:i], sum R[:i+1]]; together the rectangles tile the envelope.
    """
    spec = grid.spec
    xs = _prefix(spec.col_widths)
    ys = _prefix(spec.row_widths)
    out = []
    for i in range(spec.m):
        for j in range(spec.n):
            out.append((CellRef(i, j), Rect(xs[j], ys[i], xs[j + 1], ys[i + 1])))
    return out


def _box_from_rect(rect: Rect, z0: float, z1: float, yaw: float = 0.0) -> Box3:
    cx, cy = rect.center
    return Box3(
        center=(cx, cy, (z0 + z1) / 2.0),
        half_extents=(rect.width / 2.0, rect.height / 2.0, (z1 - z0) / 2.0),
        yaw=yaw,
    )


def synthesize(grid: ClassifiedGrid, options: SynthOptions = SynthOptions()) -> SceneGraph:
    """Build the scene graph for a classified grid.

    Floor tiles carry their cell's classification in tags; obstacle cells
    become full-height wall slabs (merged per row run); columns stand on
    every interior grid corner that touches a non-obstacle cell unless
    pruned; ceiling panels cover the envelope per row; lamps populate
    drivable-cell centers per the light preset, row-major.
    """
    spec = grid.spec
    h = options.ceiling_height
    xs = _prefix(spec.col_widths)
    ys = _prefix(spec.row_widths)
    nodes: list[SceneNode] = []

    # floor tiles and markings, row-major
    inset_scale = 1.0 - 2.0 * options.marking_inset
    kind_name = {k: k.name.lower() for k in CellKind}
    half_pi = math.pi / 2.0
    floor_z = FLOOR_THICKNESS / 2.0
    floor_hz = FLOOR_THICKNESS / 2.0
    mark_z = FLOOR_THICKNESS + MARKING_THICKNESS / 2.0
    mark_hz = MARKING_THICKNESS / 2.0
    for i in range(spec.m):
        y0, y1 = ys[i], ys[i + 1]
        cy = (y0 + y1) / 2.0
        for j in range(spec.n):
            c = grid.cells[i][j]
            if c.kind is CellKind.OBSTACLE:
                continue
            x0, x1 = xs[j], xs[j + 1]
            cx = (x0 + x1) / 2.0
            subtype = c.lane_subtype or c.park_subtype
            turns = c.rotation.quarter_turns
            tags = {
                "cell": f"{i},{j}",
                "cell_kind": kind_name[c.kind],
                "subtype": subtype.value,
                "quarter_turns": str(turns),
            }
            if c.render_variant is not None:
                tags["variant"] = c.render_variant.value
            nodes.append(
                SceneNode(
                    f"floor-{i}-{j}", NodeKind.FLOOR_TILE,
                    Box3((cx, cy, floor_z),
                         ((x1 - x0) / 2.0, (y1 - y0) / 2.0, floor_hz)),
                    tags,
                )
            )
            half_w = (x1 - x0) / 2.0 * inset_scale
            half_h = (y1 - y0) / 2.0 * inset_scale
            # swap local extents on odd turns so the marking stays in its cell
            if turns % 2 == 1:
                half_w, half_h = half_h, half_w
            mark_box = Box3(
                center=(cx, cy, mark_z),
                half_extents=(half_w, half_h, mark_hz),
                yaw=turns * half_pi,
            )
            if c.kind.value >= 1:
                nodes.append(SceneNode(f"mark-lane-{i}-{j}", NodeKind.LANE_MARKING,
                                       mark_box, dict(tags)))
            else:
                nodes.append(SceneNode(f"mark-park-{i}-{j}", NodeKind.PARKING_MARKING,
                                       mark_box, dict(tags)))

    # obstacle wall slabs, merged per row run
    for i in range(spec.m):
        j = 0
        while j < spec.n:
            if grid.cells[i][j].kind is CellKind.OBSTACLE:
                j0 = j
                while j < spec.n and grid.cells[i][j].kind is CellKind.OBSTACLE:
                    j += 1
                rect = Rect(xs[j0], ys[i], xs[j], ys[i + 1])
                nodes.append(
                    SceneNode(
                        f"wall-{i}-{j0}", NodeKind.COLUMN,
                        _box_from_rect(rect, 0.0, h),
                        {"structure": "wall", "row": str(i), "cols": f"{j0}-{j - 1}"},
                    )
                )
            else:
                j += 1

    # columns on interior grid corners
    half_col = options.column_size / 2.0
    for ci in range(1, spec.m):
        for cj in range(1, spec.n):
            if (ci, cj) in options.prune_columns:
                continue
            touching = (
                grid.cells[ci - 1][cj - 1], grid.cells[ci - 1][cj],
                grid.cells[ci][cj - 1], grid.cells[ci][cj],
            )
            if all(t.kind is CellKind.OBSTACLE for t in touching):
                continue
            nodes.append(
                SceneNode(
                    f"col-{ci}-{cj}", NodeKind.COLUMN,
                    Box3(center=(xs[cj], ys[ci], h / 2.0),
                         half_extents=(half_col, half_col, h / 2.0)),
                    {"corner": f"{ci},{cj}"},
                )
            )

    # ceiling panels, one per row, covering the envelope
    for i in range(spec.m):
        rect = Rect(xs[0], ys[i], xs[-1], ys[i + 1])
        nodes.append(
            SceneNode(f"ceil-{i}", NodeKind.CEILING_PANEL,
                      _box_from_rect(rect, h - CEILING_THICKNESS, h), {"row": str(i)})
        )

    # ramp markers on entrance/exit squares
    for i in range(spec.m):
        for j in range(spec.n):
            c = grid.cells[i][j]
            if c.kind in (CellKind.ENTRANCE, CellKind.EXIT):
                rect = Rect(xs[j], ys[i], xs[j + 1], ys[i + 1])
                cx, cy = rect.center
                nodes.append(
                    SceneNode(
                        f"ramp-{i}-{j}", NodeKind.RAMP_MARKER,
                        Box3((cx, cy, FLOOR_THICKNESS + MARKING_THICKNESS + 0.005),
                             (rect.width / 4.0, rect.height / 4.0, 0.005)),
                        {"cell": f"{i},{j}", "ramp": c.kind.name.lower()},
                    )
                )

    # lamps last: drivable-cell centers, row-major (same order the floor
    # tiles were emitted, which is how re-lighting recovers the site list)
    sites = []
    for i in range(spec.m):
        cy = (ys[i] + ys[i + 1]) / 2.0
        for j in range(spec.n):
            if grid.cells[i][j].kind.value >= 1:
                sites.append(((xs[j] + xs[j + 1]) / 2.0, cy, f"{i},{j}"))
    nodes.extend(_make_lamps(sites, options.light, h))

    bounds = Box3(
        center=(xs[-1] / 2.0, ys[-1] / 2.0, h / 2.0),
        half_extents=(xs[-1] / 2.0, ys[-1] / 2.0, h / 2.0),
    )
    return SceneGraph(nodes=tuple(nodes), bounds=bounds, light_level=options.light)


def _make_lamps(
    sites: list[tuple[float, float, str]], level: LightLevel, ceiling_h: float
) -> list[SceneNode]:
    count = math.ceil(level.lamp_coverage * len(sites)) if sites else 0
    lamp_z = ceiling_h - CEILING_THICKNESS - LAMP_SIZE[2] / 2.0
    half = (LAMP_SIZE[0] / 2.0, LAMP_SIZE[1] / 2.0, LAMP_SIZE[2] / 2.0)
    intensity = repr(level.lamp_intensity)
    lamps = []
    for k, (cx, cy, cell) in enumerate(sites[:count]):
        lamps.append(
            SceneNode(
                "lamp-" + cell.replace(",", "-"), NodeKind.LAMP,
                Box3((cx, cy, lamp_z), half),
                {"cell": cell, "site_index": str(k), "intensity": intensity},
            )
        )
    return lamps


def _lamp_sites(scene: SceneGraph) -> list[tuple[float, float, str]]:
    sites = []
    for n in scene.nodes:
        if n.kind is NodeKind.FLOOR_TILE and n.tags.get("cell_kind") in (
            "lane", "entrance", "exit",
        ):
            sites.append((n.box.center[0], n.box.center[1], n.tags["cell"]))
    return sites


def apply_light_level(scene: SceneGraph, level: LightLevel) -> SceneGraph:
    """Repopulate lamps per the preset; everything else is untouched.

    Lamp sites are the drivable-cell floor tiles, filled row-major, so the
    populated set under a lower coverage is a prefix of a higher one.
    Applying a level always overrides the previous one.
    """
    sites = _lamp_sites(scene)
    keep = tuple(n for n in scene.nodes if n.kind is not NodeKind.LAMP)
    h = scene.bounds.center[2] + scene.bounds.half_extents[2]
    lamps = _make_lamps(sites, level, h)
    return SceneGraph(nodes=keep + tuple(lamps), bounds=scene.bounds, light_level=level)


def remove_node(scene: SceneGraph, node_id: str) -> SceneGraph:
    """New scene without the named node (used for pruning experiments)."""
    kept = tuple(n for n in scene.nodes if n.id != node_id)
    if len(kept) == len(scene.nodes):
        raise KeyError(f"no node {node_id!r} in scene")
    return replace(scene, nodes=kept)


def _expand_bounds(bounds: Box3, boxes: list[Box3]) -> Box3:
    lo = list(bounds.aabb[:3])
    hi = list(bounds.aabb[3:])
    for b in boxes:
        a = b.aabb
        lo = [min(lo[k], a[k]) for k in range(3)]
        hi = [max(hi[k], a[k + 3]) for k in range(3)]
    return Box3(
        center=tuple((lo[k] + hi[k]) / 2.0 for k in range(3)),
        half_extents=tuple(max((hi[k] - lo[k]) / 2.0, 1e-9) for k in range(3)),
    )


def vehicle_box(
    center_xy: tuple[float, float], size: str, quarter_turns: int
) -> Box3:
    """Box for a vehicle resting on the slab; at rotation 0 it faces north
    (length along y), one quarter-turn faces it east."""
    length, width, height = VEHICLE_SIZES[size]
    return Box3(
        center=(center_xy[0], center_xy[1], FLOOR_THICKNESS + height / 2.0),
        half_extents=(width / 2.0, length / 2.0, height / 2.0),
        yaw=quarter_turns * math.pi / 2.0,
    )


def populate_vehicles(
    scene: SceneGraph, grid: ClassifiedGrid, plan: OccupancyPlan
) -> SceneGraph:
    """Place one vehicle per plan entry, centered in its cell and yawed to
    face the cell's lane.  Entries on non-parking cells or Type4 spaces
    need the force flag.  Returns a new graph; the input is unchanged."""
    from .classify import ParkSubtype

    rects = {cell: rect for cell, rect in layout_cells(grid)}
    seen: set[CellRef] = set()
    vehicles: list[SceneNode] = []
    for entry in plan.entries:
        if entry.cell in seen:
            raise PlanError(f"cell ({entry.cell.i},{entry.cell.j}) referenced twice")
        seen.add(entry.cell)
        if entry.cell not in rects:
            raise PlanError(f"cell ({entry.cell.i},{entry.cell.j}) outside the grid")
        if entry.size not in VEHICLE_SIZES:
            raise PlanError(f"unknown vehicle size {entry.size!r}")
        c = grid.cells[entry.cell.i][entry.cell.j]
        placeable = c.kind is CellKind.PARKING and c.park_subtype is not ParkSubtype.TYPE4
        if not placeable and not entry.force:
            raise PlanError(
                f"cell ({entry.cell.i},{entry.cell.j}) is {c.kind.name.lower()}"
                f"{'/type4' if c.park_subtype is ParkSubtype.TYPE4 else ''};"
                " use force to place here"
            )
        rect = rects[entry.cell]
        turns = c.rotation.quarter_turns
        box = vehicle_box(rect.center, entry.size, turns)
        length, width, _ = VEHICLE_SIZES[entry.size]
        foot_x, foot_y = (width, length) if turns % 2 == 0 else (length, width)
        tags = {
            "cell": f"{entry.cell.i},{entry.cell.j}",
            "vehicle_size": entry.size,
            "parked": "true" if entry.parked else "false",
            "color": entry.color,
            "facing": _COMPASS[turns],
        }
        if foot_x > rect.width + 1e-9 or foot_y > rect.height + 1e-9:
            tags["overhang"] = "true"
        vehicles.append(
            SceneNode(f"veh-{entry.cell.i}-{entry.cell.j}", NodeKind.VEHICLE, box, tags)
        )
    bounds = _expand_bounds(scene.bounds, [v.box for v in vehicles])
    return SceneGraph(
        nodes=scene.nodes + tuple(vehicles), bounds=bounds, light_level=scene.light_level
    )


# --- occupancy plan documents -------------------------------------------------


def parse_occupancy_plan(text: str) -> OccupancyPlan:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid plan JSON: {exc.msg}") from exc
    if not isinstance(doc, dict) or doc.get("schema") != PLAN_SCHEMA:
        raise SchemaError(f"expected schema {PLAN_SCHEMA!r}")
    entries = []
    for k, raw in enumerate(doc.get("entries", [])):
        try:
            i, j = raw["cell"]
            entries.append(
                PlanEntry(
                    cell=CellRef(int(i), int(j)),
                    size=str(raw["size"]),
                    parked=bool(raw.get("parked", True)),
                    color=str(raw.get("color", "white")),
                    force=bool(raw.get("force", False)),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad plan entry {k}: {exc}") from exc
    return OccupancyPlan(tuple(entries))


def emit_occupancy_plan(plan: OccupancyPlan) -> str:
    doc = {
        "schema": PLAN_SCHEMA,
        "entries": [
            {
                "cell": [e.cell.i, e.cell.j],
                "size": e.size,
                "parked": e.parked,
                "color": e.color,
                "force": e.force,
            }
            for e in plan.entries
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# --- scene documents -----------------------------------------------------------


def _box_document(box: Box3) -> dict:
    return {
        "center": list(box.center),
        "half_extents": list(box.half_extents),
        "yaw": box.yaw,
    }


def _box_from_document(doc: dict) -> Box3:
    try:
        return Box3(
            center=tuple(float(v) for v in doc["center"]),
            half_extents=tuple(float(v) for v in doc["half_extents"]),
            yaw=float(doc["yaw"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad box: {exc}") from exc


def scene_document(scene: SceneGraph) -> dict:
    return {
        "schema": SCENE_SCHEMA,
        "light_level": scene.light_level.value,
        "bounds": _box_document(scene.bounds),
        "origin": [0.0, 0.0, 0.0],
        "nodes": [
            {
                "id": n.id,
                "kind": n.kind.value,
                "center": list(n.box.center),
                "half_extents": list(n.box.half_extents),
                "yaw": n.box.yaw,
                "tags": dict(sorted(n.tags.items())),
            }
            for n in scene.nodes
        ],
    }


def export_scene(scene: SceneGraph, format: str = "scene-json") -> str:
    """Serialize a scene.  scene-json round-trips losslessly through
    import_scene; obj is a lossy 12-triangles-per-box mesh for viewers."""
    if format == "scene-json":
        return json.dumps(scene_document(scene), indent=2, sort_keys=True) + "\n"
    if format == "obj":
        return _export_obj(scene)
    raise ValueError(f"unknown export format {format!r}")


def import_scene(text: str) -> SceneGraph:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid scene JSON: {exc.msg}") from exc
    if not isinstance(doc, dict) or doc.get("schema") != SCENE_SCHEMA:
        raise SchemaError(f"expected schema {SCENE_SCHEMA!r}, got {doc.get('schema')!r}")
    try:
        level = LightLevel(doc["light_level"])
    except (KeyError, ValueError) as exc:
        raise SchemaError(f"bad light_level: {exc}") from exc
    nodes = []
    seen: set[str] = set()
    for raw in doc.get("nodes", []):
        node_id = raw.get("id")
        if not isinstance(node_id, str) or not node_id:
            raise SchemaError("node without a string id")
        if node_id in seen:
            raise SchemaError(f"duplicate node id {node_id!r}")
        seen.add(node_id)
        kind_raw = raw.get("kind")
        try:
            kind = NodeKind(kind_raw)
        except ValueError:
            raise SchemaError(f"unknown node kind {kind_raw!r}") from None
        tags_raw = raw.get("tags", {})
        if not isinstance(tags_raw, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in tags_raw.items()
        ):
            raise SchemaError(f"node {node_id!r} tags must map strings to strings")
        nodes.append(SceneNode(node_id, kind, _box_from_document(raw), dict(tags_raw)))
    bounds_raw = doc.get("bounds")
    if not isinstance(bounds_raw, dict):
        raise SchemaError("scene document is missing its bounds box")
    return SceneGraph(
        nodes=tuple(nodes), bounds=_box_from_document(bounds_raw), light_level=level
    )


_BOX_FACES = (
    (0, 1, 2), (0, 2, 3), (4, 6, 5), (4, 7, 6),
    (0, 4, 5), (0, 5, 1), (1, 5, 6), (1, 6, 2),
    (2, 6, 7), (2, 7, 3), (3, 7, 4), (3, 4, 0),
)


def _box_corners(box: Box3) -> list[tuple[float, float, float]]:
    hx, hy, hz = box.half_extents
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    cx, cy, cz = box.center
    corners = []
    for dz in (-hz, hz):
        for dx, dy in ((-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)):
            corners.append((cx + dx * c - dy * s, cy + dx * s + dy * c, cz + dz))
    return corners


def _export_obj(scene: SceneGraph) -> str:
    lines = ["# garagesim box mesh"]
    offset = 0
    for n in scene.nodes:
        lines.append(f"o {n.id}")
        for x, y, z in _box_corners(n.box):
            lines.append(f"v {x:.6f} {y:.6f} {z:.6f}")
        for a, b, c in _BOX_FACES:
            lines.append(f"f {offset + a + 1} {offset + b + 1} {offset + c + 1}")
        offset += 8
    return "\n".join(lines) + "\n"
