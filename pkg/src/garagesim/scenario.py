"""Occlusion scenarios and difficulty scoring.

Three parameterized setups mirror the classic garage hazards: a corner
column hiding a vehicle ahead in the lane, a parked ego peeking past a
nearby column at crossing traffic, and stacked parking rows where one
parked vehicle shadows another.  Each run sweeps visibility at half-meter
spacing and reduces the series to a difficulty score combining mean
occlusion, the longest visibility blackout, and a lighting penalty.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConstructionError, SchemaError
from .scene import (
    Box3,
    CEILING_HEIGHT,
    CEILING_THICKNESS,
    COLUMN_SIZE,
    FLOOR_THICKNESS,
    LightLevel,
    NodeKind,
    SceneGraph,
    SceneNode,
    VEHICLE_SIZES,
    apply_light_level,
    vehicle_box,
)
from .visibility import (
    CameraConfig,
    EgoPose,
    OcclusionSweep,
    SceneIndex,
    VisibilitySample,
    _face_points,
    _sample_from_points,
    _as_poses,
    make_camera,
    path_length,
    pose_at,
    sample_arclengths,
    sweep,
)

SCENARIO_SCHEMA = "scenario/1"
REPORT_SCHEMA = "report/1"

BLACKOUT_THRESHOLD = 0.2
DEFAULT_WEIGHTS = (0.4, 0.4, 0.2)

LIGHT_PENALTY = {
    LightLevel.BRIGHT: 0.0,
    LightLevel.CLEAR: 0.2,
    LightLevel.MODERATE: 0.5,
    LightLevel.DIM: 1.0,
}

#: lateral offset of each parking row from the ego lane, meters
SLOT_OFFSETS = {"close": 4.0, "medium": 8.0, "far": 12.0}


class ScenarioLabel(str, Enum):
    CASE1_CORNER_COLUMN = "case1-corner-column"
    CASE2_PARKED_EGO = "case2-parked-ego"
    CASE3_PARKED_ROWS = "case3-parked-rows"
    LIGHT_ONLY = "light-only"


@dataclass(frozen=True)
class Scenario:
    scene: SceneGraph
    ego_path: tuple[EgoPose, ...]
    target_ids: tuple[str, ...]
    label: ScenarioLabel
    params: dict
    target_path: tuple[EgoPose, ...] | None = None  # set when the target moves
    ignore_ids: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.target_ids:
            raise ConstructionError("scenario needs at least one target")
        if not self.ego_path:
            raise ConstructionError("scenario needs an ego pose or path")


@dataclass(frozen=True)
class DifficultyScore:
    total: float
    occlusion_term: float
    blackout_term: float
    light_term: float
    weights: tuple[float, float, float]

    def to_document(self) -> dict:
        return {
            "total": self.total,
            "occlusion_term": self.occlusion_term,
            "blackout_term": self.blackout_term,
            "light_term": self.light_term,
            "weights": list(self.weights),
        }


@dataclass(frozen=True)
class ScenarioReport:
    label: ScenarioLabel
    params: dict
    light_level: LightLevel
    sweeps: dict[str, OcclusionSweep]
    score: DifficultyScore
    stats: dict[str, dict]


# --- shared construction helpers -------------------------------------------------


def _slab(node_id: str, kind: NodeKind, x0, y0, x1, y1, z0, z1, tags=None) -> SceneNode:
    return SceneNode(
        node_id,
        kind,
        Box3(
            center=((x0 + x1) / 2.0, (y0 + y1) / 2.0, (z0 + z1) / 2.0),
            half_extents=((x1 - x0) / 2.0, (y1 - y0) / 2.0, (z1 - z0) / 2.0),
        ),
        tags or {},
    )


def _scene_from_nodes(nodes: list[SceneNode]) -> SceneGraph:
    lo = [math.inf] * 3
    hi = [-math.inf] * 3
    for n in nodes:
        a = n.box.aabb
        lo = [min(lo[k], a[k]) for k in range(3)]
        hi = [max(hi[k], a[k + 3]) for k in range(3)]
    bounds = Box3(
        center=tuple((lo[k] + hi[k]) / 2.0 for k in range(3)),
        half_extents=tuple(max((hi[k] - lo[k]) / 2.0, 1e-9) for k in range(3)),
    )
    return SceneGraph(nodes=tuple(nodes), bounds=bounds, light_level=LightLevel.BRIGHT)


def _boxes_overlap(a: Box3, b: Box3) -> bool:
    aa, bb = a.aabb, b.aabb
    return all(aa[k] < bb[k + 3] and bb[k] < aa[k + 3] for k in range(3))


def _footprint_corners(box: Box3) -> list[tuple[float, float]]:
    hx, hy, _ = box.half_extents
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    cx, cy, _ = box.center
    return [
        (cx + dx * c - dy * s, cy + dx * s + dy * c)
        for dx, dy in ((-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy))
    ]


# --- case builders ----------------------------------------------------------------


def build_case1(
    column_setback: float = 3.0,
    lane_width: float = 6.0,
    target_distance: float = 18.0,
) -> Scenario:
    """Corner-column scenario: ego drives toward a turn; a column between
    the camera and a vehicle parked past the corner hides it at the start
    and clears as the ego advances.

    The column is centered on the start-pose sight line so the target is
    fully hidden at the first sample; the path ends while the target is
    still inside the field of view.
    """
    if min(column_setback, lane_width, target_distance) <= 0.0:
        raise ConstructionError("case 1 needs positive dimensions")

    ego_y = -lane_width / 6.0
    target_y = lane_width / 3.0
    target = SceneNode(
        "veh-target",
        NodeKind.VEHICLE,
        vehicle_box((target_distance, target_y), "small", 1),
        {"vehicle_size": "small", "parked": "true", "color": "white"},
    )

    # aim the column at the middle of the target's angular band from the start pose
    apex = (0.0, ego_y)
    bearings = [
        math.atan2(cy - apex[1], cx - apex[0]) for cx, cy in _footprint_corners(target.box)
    ]
    mid = (min(bearings) + max(bearings)) / 2.0
    col_y = apex[1] + column_setback * math.tan(mid)
    column = SceneNode(
        "col-corner",
        NodeKind.COLUMN,
        Box3(
            center=(column_setback, col_y, CEILING_HEIGHT / 2.0),
            half_extents=(COLUMN_SIZE / 2.0, COLUMN_SIZE / 2.0, CEILING_HEIGHT / 2.0),
        ),
        {"corner": "case1"},
    )
    if _boxes_overlap(column.box, target.box):
        raise ConstructionError("column placement overlaps the target vehicle")

    path_end = max(column_setback + 2.0, target_distance - 8.0)
    path = ((0.0, ego_y), (path_end, ego_y))
    col_aabb = column.box.aabb
    if col_aabb[1] <= ego_y <= col_aabb[4]:
        raise ConstructionError("column placement blocks the ego path")

    x1 = target_distance + 8.0
    y0, y1 = -lane_width, lane_width
    nodes = [
        _slab("floor", NodeKind.FLOOR_TILE, -2.0, y0, x1, y1, 0.0, FLOOR_THICKNESS),
        _slab("ceiling", NodeKind.CEILING_PANEL, -2.0, y0, x1, y1,
              CEILING_HEIGHT - CEILING_THICKNESS, CEILING_HEIGHT),
        column,
        target,
    ]
    return Scenario(
        scene=_scene_from_nodes(nodes),
        ego_path=_as_poses(path),
        target_ids=("veh-target",),
        label=ScenarioLabel.CASE1_CORNER_COLUMN,
        params={
            "column_setback": column_setback,
            "lane_width": lane_width,
            "target_distance": target_distance,
            "column_id": "col-corner",
        },
    )


def build_case2(column_offset: float = 2.5, lane_distance: float = 8.0) -> Scenario:
    """Parked-ego scenario: the ego sits in a space looking out; a column at
    the space's corner shadows part of the lane ahead, and the target
    drives across.  The sweep moves the target, not the ego."""
    if min(column_offset, lane_distance) <= 0.0:
        raise ConstructionError("case 2 needs positive dimensions")
    if lane_distance <= column_offset:
        raise ConstructionError("the lane must lie beyond the column")

    side_y = -1.0
    ego = EgoPose((0.0, 0.0), 0.0)
    ego_body = SceneNode(
        "veh-ego",
        NodeKind.VEHICLE,
        vehicle_box((-2.1 + VEHICLE_SIZES["small"][0] / 2.0, 0.0), "small", 1),
        {"vehicle_size": "small", "parked": "true", "color": "gray"},
    )
    column = SceneNode(
        "col-side",
        NodeKind.COLUMN,
        Box3(
            center=(column_offset, side_y, CEILING_HEIGHT / 2.0),
            half_extents=(COLUMN_SIZE / 2.0, COLUMN_SIZE / 2.0, CEILING_HEIGHT / 2.0),
        ),
        {"corner": "case2"},
    )
    half_span = 6.0
    target_path = ((lane_distance, -half_span), (lane_distance, half_span))
    target = SceneNode(
        "veh-target",
        NodeKind.VEHICLE,
        vehicle_box((lane_distance, -half_span), "small", 0),
        {"vehicle_size": "small", "parked": "false", "color": "white"},
    )
    if _boxes_overlap(column.box, target.box):
        raise ConstructionError("column placement overlaps the target's lane")

    x1 = lane_distance + 6.0
    nodes = [
        _slab("floor", NodeKind.FLOOR_TILE, -4.0, -half_span - 4.0, x1, half_span + 4.0,
              0.0, FLOOR_THICKNESS),
        _slab("ceiling", NodeKind.CEILING_PANEL, -4.0, -half_span - 4.0, x1,
              half_span + 4.0, CEILING_HEIGHT - CEILING_THICKNESS, CEILING_HEIGHT),
        ego_body,
        column,
        target,
    ]
    return Scenario(
        scene=_scene_from_nodes(nodes),
        ego_path=(ego,),
        target_ids=("veh-target",),
        label=ScenarioLabel.CASE2_PARKED_EGO,
        params={
            "column_offset": column_offset,
            "lane_distance": lane_distance,
            "column_id": "col-side",
        },
        target_path=_as_poses(target_path),
        ignore_ids=frozenset({"veh-ego"}),
    )


def build_case3(
    layout: list[tuple[str, str]],
    ego_lane_path=None,
) -> Scenario:
    """Stacked-row scenario: parking rows at increasing lateral offsets from
    the ego lane, staggered down-lane so that from early in the sweep the
    slots line up along one sight line (a closer vehicle then shadows a
    farther one).  Every placed vehicle is a target."""
    if not layout:
        raise ConstructionError("case 3 needs at least one (slot, size) entry")
    seen_slots = set()
    for slot, size in layout:
        if slot not in SLOT_OFFSETS:
            raise ConstructionError(f"unknown slot {slot!r}; expected close/medium/far")
        if size not in VEHICLE_SIZES:
            raise ConstructionError(f"unknown vehicle size {size!r}")
        if slot in seen_slots:
            raise ConstructionError(f"slot {slot!r} used twice")
        seen_slots.add(slot)

    # slots sit on a ray from the alignment point (2, 0): x = 2 + 2 * y
    anchor_x, slope = 2.0, 2.0
    vehicles = []
    for slot, size in layout:
        y = SLOT_OFFSETS[slot]
        x = anchor_x + slope * y
        vehicles.append(
            SceneNode(
                f"veh-{slot}",
                NodeKind.VEHICLE,
                vehicle_box((x, y), size, 0),
                {"vehicle_size": size, "parked": "true", "color": "white", "slot": slot},
            )
        )

    path = ego_lane_path or ((0.0, 0.0), (20.0, 0.0))
    max_y = max(SLOT_OFFSETS.values()) + 6.0
    max_x = anchor_x + slope * max(SLOT_OFFSETS.values()) + 8.0
    nodes = [
        _slab("floor", NodeKind.FLOOR_TILE, -2.0, -4.0, max_x, max_y, 0.0, FLOOR_THICKNESS),
        _slab("ceiling", NodeKind.CEILING_PANEL, -2.0, -4.0, max_x, max_y,
              CEILING_HEIGHT - CEILING_THICKNESS, CEILING_HEIGHT),
        *vehicles,
    ]
    return Scenario(
        scene=_scene_from_nodes(nodes),
        ego_path=_as_poses(path),
        target_ids=tuple(v.id for v in vehicles),
        label=ScenarioLabel.CASE3_PARKED_ROWS,
        params={"layout": [[slot, size] for slot, size in layout]},
    )


# --- running and scoring -----------------------------------------------------------


def target_sweep(
    scene: SceneGraph,
    ego: EgoPose,
    target_path: tuple[EgoPose, ...],
    cfg: CameraConfig,
    target_id: str,
    step: float = 0.5,
    *,
    samples_per_edge: int = 24,
    ignore_ids: frozenset[str] = frozenset(),
) -> OcclusionSweep:
    """Sweep with swapped roles: the camera stays parked while the target
    advances along its own path (half-meter spacing as usual)."""
    target = scene.node(target_id)
    others = [n for n in scene.nodes if n.id != target_id]
    frustum = make_camera(ego, cfg)
    apex = np.asarray(frustum.apex)
    samples: list[VisibilitySample] = []
    for s in sample_arclengths(path_length(target_path), step):
        pose = pose_at(target_path, s)
        size = target.tags.get("vehicle_size", "small")
        # driving orientation: box yaw puts the length along the heading
        length, width, height = VEHICLE_SIZES[size]
        moved = SceneNode(
            target.id,
            target.kind,
            Box3(
                center=(pose.position[0], pose.position[1], FLOOR_THICKNESS + height / 2.0),
                half_extents=(width / 2.0, length / 2.0, height / 2.0),
                yaw=pose.heading + math.pi / 2.0,
            ),
            dict(target.tags),
        )
        frame = _scene_from_nodes(others + [moved])
        index = SceneIndex(frame)
        points = _face_points(moved, apex, samples_per_edge)
        samples.append(
            _sample_from_points(frame, index, frustum, apex, points, ego, moved, ignore_ids)
        )
    return OcclusionSweep(
        samples=tuple(samples), step=step, path=target_path, swept="target"
    )


def _longest_blackout(fractions: list[float], threshold: float) -> int:
    longest = run = 0
    for f in fractions:
        run = run + 1 if f < threshold else 0
        longest = max(longest, run)
    return longest


def score(
    sweeps: dict[str, OcclusionSweep] | list[OcclusionSweep],
    level: LightLevel,
    weights: tuple[float, float, float] = DEFAULT_WEIGHTS,
    blackout_threshold: float = BLACKOUT_THRESHOLD,
) -> DifficultyScore:
    """Difficulty score over one or more sweeps.

    occlusion term: mean of (1 - visible fraction) pooled over all samples;
    blackout term: worst sweep's longest run below the threshold, as a
    fraction of that sweep's length; light term: fixed penalty per level.
    total = 100 * (w_occ*occ + w_blk*blackout + w_lit*light), weights
    summing to 1.
    """
    sweep_list = list(sweeps.values()) if isinstance(sweeps, dict) else list(sweeps)
    if not sweep_list or any(not sw.samples for sw in sweep_list):
        raise ValueError("score needs at least one non-empty sweep")
    if abs(sum(weights) - 1.0) > 1e-9:
        raise ValueError(f"weights must sum to 1, got {weights}")
    w_occ, w_blk, w_lit = weights

    all_fracs = [s.visible_fraction for sw in sweep_list for s in sw.samples]
    occlusion = sum(1.0 - f for f in all_fracs) / len(all_fracs)
    blackout = max(
        _longest_blackout([s.visible_fraction for s in sw.samples], blackout_threshold)
        / len(sw.samples)
        for sw in sweep_list
    )
    light = LIGHT_PENALTY[level]
    total = 100.0 * (w_occ * occlusion + w_blk * blackout + w_lit * light)
    return DifficultyScore(total, occlusion, blackout, light, tuple(weights))


def _sweep_stats(sw: OcclusionSweep) -> dict:
    fracs = [s.visible_fraction for s in sw.samples]
    first_full = None
    clear_from = None
    for k, f in enumerate(fracs):
        if first_full is None and f >= 1.0 - 1e-9:
            first_full = k * sw.step
    for k in range(len(fracs)):
        if all(f >= 0.9 for f in fracs[k:]):
            clear_from = k * sw.step
            break
    contributions: dict[str, float] = {}
    for s in sw.samples:
        for nid, frac in s.occluders:
            contributions[nid] = max(contributions.get(nid, 0.0), frac)
    return {
        "min_visible_fraction": min(fracs),
        "mean_visible_fraction": sum(fracs) / len(fracs),
        "first_full_visibility_s": first_full,
        "clears_from_s": clear_from,
        "clears_to_high_visibility": clear_from is not None,
        "samples": len(fracs),
        "occluder_contributions": dict(
            sorted(contributions.items(), key=lambda kv: (-kv[1], kv[0]))
        ),
    }


def run_scenario(
    scn: Scenario,
    cfg: CameraConfig = CameraConfig(),
    step: float = 0.5,
    weights: tuple[float, float, float] = DEFAULT_WEIGHTS,
    blackout_threshold: float = BLACKOUT_THRESHOLD,
    samples_per_edge: int = 24,
) -> ScenarioReport:
    """Sweep every target and reduce to stats and a difficulty score."""
    sweeps: dict[str, OcclusionSweep] = {}
    for target_id in scn.target_ids:
        if scn.target_path is not None:
            sweeps[target_id] = target_sweep(
                scn.scene, scn.ego_path[0], scn.target_path, cfg, target_id, step,
                samples_per_edge=samples_per_edge, ignore_ids=scn.ignore_ids,
            )
        else:
            sweeps[target_id] = sweep(
                scn.scene, scn.ego_path, cfg, target_id, step,
                samples_per_edge=samples_per_edge, ignore_ids=scn.ignore_ids,
            )
    sc = score(sweeps, scn.scene.light_level, weights, blackout_threshold)
    stats = {tid: _sweep_stats(sw) for tid, sw in sweeps.items()}
    return ScenarioReport(
        label=scn.label,
        params=dict(scn.params),
        light_level=scn.scene.light_level,
        sweeps=sweeps,
        score=sc,
        stats=stats,
    )


def relight(scn: Scenario, level: LightLevel) -> Scenario:
    """Scenario with its scene's light level replaced."""
    return Scenario(
        scene=apply_light_level(scn.scene, level),
        ego_path=scn.ego_path,
        target_ids=scn.target_ids,
        label=scn.label,
        params=scn.params,
        target_path=scn.target_path,
        ignore_ids=scn.ignore_ids,
    )


# --- documents ----------------------------------------------------------------------


def scenario_document(scn: Scenario) -> dict:
    return {"schema": SCENARIO_SCHEMA, "label": scn.label.value, "params": scn.params}


def report_document(report: ScenarioReport) -> dict:
    from .visibility import sweep_document

    return {
        "schema": REPORT_SCHEMA,
        "scenario": {
            "schema": SCENARIO_SCHEMA,
            "label": report.label.value,
            "params": report.params,
        },
        "light_level": report.light_level.value,
        "score": report.score.to_document(),
        "stats": report.stats,
        "sweeps": {tid: sweep_document(sw) for tid, sw in report.sweeps.items()},
    }


def emit_report(report: ScenarioReport) -> str:
    return json.dumps(report_document(report), indent=2, sort_keys=True) + "\n"


def rescore_report_document(
    doc: dict,
    weights: tuple[float, float, float],
    blackout_threshold: float = BLACKOUT_THRESHOLD,
) -> DifficultyScore:
    """Recompute the difficulty score of an emitted report/1 document."""
    if not isinstance(doc, dict) or doc.get("schema") != REPORT_SCHEMA:
        raise SchemaError(f"expected schema {REPORT_SCHEMA!r}")
    try:
        level = LightLevel(doc["light_level"])
        sweeps = doc["sweeps"]
        fractions = {
            tid: [float(s["visible_fraction"]) for s in sw["samples"]]
            for tid, sw in sweeps.items()
        }
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed report: {exc}") from exc
    if not fractions or any(not f for f in fractions.values()):
        raise SchemaError("report has no sweep samples")
    if abs(sum(weights) - 1.0) > 1e-9:
        raise ValueError(f"weights must sum to 1, got {weights}")
    w_occ, w_blk, w_lit = weights
    all_fracs = [f for fr in fractions.values() for f in fr]
    occlusion = sum(1.0 - f for f in all_fracs) / len(all_fracs)
    blackout = max(
        _longest_blackout(fr, blackout_threshold) / len(fr) for fr in fractions.values()
    )
    light = LIGHT_PENALTY[level]
    total = 100.0 * (w_occ * occlusion + w_blk * blackout + w_lit * light)
    return DifficultyScore(total, occlusion, blackout, light, tuple(weights))
