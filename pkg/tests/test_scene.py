import itertools
import json
import math
import random

import pytest

from garagesim.classify import classify_all
from garagesim.errors import PlanError, SchemaError
from garagesim.grid import CellKind, CellRef, GarageSpec
from garagesim.scene import (
    Box3,
    CEILING_HEIGHT,
    FLOOR_THICKNESS,
    LightLevel,
    NodeKind,
    OccupancyPlan,
    PlanEntry,
    SynthOptions,
    VEHICLE_SIZES,
    apply_light_level,
    emit_occupancy_plan,
    export_scene,
    import_scene,
    layout_cells,
    parse_occupancy_plan,
    populate_vehicles,
    remove_node,
    synthesize,
)
from conftest import random_spec


class TestLayout:
    def test_single_cell(self):
        grid = classify_all(GarageSpec(((1,),), (5.0,), (6.0,)))
        [(cell, rect)] = layout_cells(grid)
        assert cell == CellRef(0, 0)
        assert (rect.x0, rect.y0, rect.x1, rect.y1) == (0.0, 0.0, 6.0, 5.0)

    def test_prefix_sums(self):
        grid = classify_all(GarageSpec(((1, 1), (1, 1)), (5.0, 5.0), (6.0, 6.0)))
        rects = dict(layout_cells(grid))
        r = rects[CellRef(1, 1)]
        assert (r.x0, r.y0, r.x1, r.y1) == (6.0, 5.0, 12.0, 10.0)

    def test_area_sum(self, rng):
        for _ in range(50):
            spec = random_spec(rng)
            grid = classify_all(spec)
            total = sum(r.width * r.height for _, r in layout_cells(grid))
            expected = sum(spec.row_widths) * sum(spec.col_widths)
            assert math.isclose(total, expected, rel_tol=1e-12)

    def test_no_overlaps_small_grids(self, rng):
        for _ in range(10):
            spec = random_spec(rng, max_side=4)
            rects = [r for _, r in layout_cells(classify_all(spec))]
            for a, b in itertools.combinations(rects, 2):
                x_overlap = min(a.x1, b.x1) - max(a.x0, b.x0)
                y_overlap = min(a.y1, b.y1) - max(a.y0, b.y0)
                assert min(x_overlap, y_overlap) <= 1e-12


class TestSynthesize:
    def test_all_lane_3x3_counts(self, all_lane_3x3):
        scene = synthesize(classify_all(all_lane_3x3))
        assert scene.count(NodeKind.FLOOR_TILE) == 9
        assert scene.count(NodeKind.COLUMN) == 4  # (m-1)(n-1) interior corners
        assert scene.count(NodeKind.LAMP) == 9
        assert scene.count(NodeKind.CEILING_PANEL) == 3
        assert scene.count(NodeKind.LANE_MARKING) == 9

    def test_interior_corner_count_by_enumeration(self, rng):
        # brute-force count of corners touching a non-obstacle cell
        for _ in range(15):
            spec = random_spec(rng, max_side=5)
            grid = classify_all(spec)
            scene = synthesize(grid)
            expected = 0
            for ci in range(1, spec.m):
                for cj in range(1, spec.n):
                    cells = [
                        spec.structure[ci - 1][cj - 1], spec.structure[ci - 1][cj],
                        spec.structure[ci][cj - 1], spec.structure[ci][cj],
                    ]
                    if any(c != -1 for c in cells):
                        expected += 1
            got = sum(1 for n in scene.nodes
                      if n.kind is NodeKind.COLUMN and "corner" in n.tags)
            assert got == expected

    def test_lamp_presets(self, all_lane_3x3):
        grid = classify_all(all_lane_3x3)
        for level, count in ((LightLevel.BRIGHT, 9), (LightLevel.CLEAR, 9),
                             (LightLevel.MODERATE, 7), (LightLevel.DIM, 4)):
            scene = synthesize(grid, SynthOptions(light=level))
            assert scene.count(NodeKind.LAMP) == count
            assert scene.light_level is level

    def test_lamp_monotone_containment(self, all_lane_3x3):
        grid = classify_all(all_lane_3x3)
        ids = {}
        for level in (LightLevel.DIM, LightLevel.MODERATE, LightLevel.CLEAR,
                      LightLevel.BRIGHT):
            scene = synthesize(grid, SynthOptions(light=level))
            ids[level] = {n.id for n in scene.nodes if n.kind is NodeKind.LAMP}
        assert ids[LightLevel.DIM] <= ids[LightLevel.MODERATE]
        assert ids[LightLevel.MODERATE] <= ids[LightLevel.CLEAR]
        assert ids[LightLevel.CLEAR] <= ids[LightLevel.BRIGHT]

    def test_prune_columns(self, all_lane_3x3):
        grid = classify_all(all_lane_3x3)
        scene = synthesize(grid, SynthOptions(prune_columns=frozenset({(1, 1)})))
        assert scene.count(NodeKind.COLUMN) == 3
        assert all(n.tags.get("corner") != "1,1" for n in scene.nodes)

    def test_obstacle_row_has_ceiling_but_no_tiles(self):
        spec = GarageSpec(((-1, -1), (1, 1)), (5.0, 5.0), (6.0, 6.0))
        scene = synthesize(classify_all(spec))
        assert scene.count(NodeKind.FLOOR_TILE) == 2
        assert scene.count(NodeKind.CEILING_PANEL) == 2
        walls = [n for n in scene.nodes if n.tags.get("structure") == "wall"]
        assert len(walls) == 1  # the obstacle run merges into one slab
        assert walls[0].box.aabb[5] == CEILING_HEIGHT

    def test_ramp_markers(self):
        spec = GarageSpec(((2, 1, 3),), (5.0,), (6.0, 6.0, 6.0))
        scene = synthesize(classify_all(spec))
        ramps = [n for n in scene.nodes if n.kind is NodeKind.RAMP_MARKER]
        assert [n.tags["ramp"] for n in ramps] == ["entrance", "exit"]
        # entrance/exit cells still get lane markings and lamps
        assert scene.count(NodeKind.LANE_MARKING) == 3
        assert scene.count(NodeKind.LAMP) == 3

    def test_everything_inside_envelope(self, rng):
        for _ in range(15):
            spec = random_spec(rng)
            scene = synthesize(classify_all(spec))
            x1 = sum(spec.col_widths)
            y1 = sum(spec.row_widths)
            for n in scene.nodes:
                a = n.box.aabb
                assert a[0] >= -1e-9 and a[1] >= -1e-9 and a[2] >= -1e-9
                assert a[3] <= x1 + 1e-9 and a[4] <= y1 + 1e-9
                assert a[5] <= CEILING_HEIGHT + 1e-9

    def test_floor_under_ceiling(self, rng):
        spec = random_spec(rng)
        scene = synthesize(classify_all(spec))
        panels = [n.box.aabb for n in scene.nodes if n.kind is NodeKind.CEILING_PANEL]
        assert len({p[5] for p in panels}) == 1  # common height
        for tile in scene.nodes:
            if tile.kind is not NodeKind.FLOOR_TILE:
                continue
            c = tile.box.center
            assert any(p[0] <= c[0] <= p[3] and p[1] <= c[1] <= p[4] for p in panels)

    def test_deterministic(self, rng):
        spec = random_spec(rng)
        grid = classify_all(spec)
        assert synthesize(grid) == synthesize(grid)

    def test_unique_ids(self, rng):
        for _ in range(10):
            scene = synthesize(classify_all(random_spec(rng)))
            ids = [n.id for n in scene.nodes]
            assert len(ids) == len(set(ids))


class TestApplyLightLevel:
    def test_override_idempotent(self, all_lane_3x3):
        grid = classify_all(all_lane_3x3)
        dim = synthesize(grid, SynthOptions(light=LightLevel.DIM))
        rebright = apply_light_level(dim, LightLevel.BRIGHT)
        direct = synthesize(grid, SynthOptions(light=LightLevel.BRIGHT))
        assert rebright == direct

    def test_non_lamp_geometry_untouched(self, all_lane_3x3):
        scene = synthesize(classify_all(all_lane_3x3))
        relit = apply_light_level(scene, LightLevel.DIM)
        keep = [n for n in scene.nodes if n.kind is not NodeKind.LAMP]
        keep2 = [n for n in relit.nodes if n.kind is not NodeKind.LAMP]
        assert keep == keep2

    def test_intensity_tag(self, all_lane_3x3):
        scene = synthesize(classify_all(all_lane_3x3), SynthOptions(light=LightLevel.CLEAR))
        lamps = [n for n in scene.nodes if n.kind is NodeKind.LAMP]
        assert all(n.tags["intensity"] == "0.6" for n in lamps)


class TestVehicles:
    @pytest.fixture
    def parking_grid(self):
        # lane row over a parking row: every space is Type3 facing north
        spec = GarageSpec(((1, 1, 1), (0, 0, 0)), (6.0, 5.0), (3.0, 3.0, 3.0))
        return classify_all(spec)

    def test_single_placement(self, parking_grid):
        scene = synthesize(parking_grid)
        plan = OccupancyPlan((PlanEntry(CellRef(1, 1), "small"),))
        out = populate_vehicles(scene, parking_grid, plan)
        assert len(out.nodes) == len(scene.nodes) + 1
        veh = out.node("veh-1-1")
        assert veh.tags["facing"] == "north"
        assert veh.box.center[0] == 4.5
        assert veh.box.center[2] == FLOOR_THICKNESS + VEHICLE_SIZES["small"][2] / 2
        # input unchanged
        assert all(n.kind is not NodeKind.VEHICLE for n in scene.nodes)

    def test_duplicate_cell_rejected(self, parking_grid):
        scene = synthesize(parking_grid)
        plan = OccupancyPlan(
            (PlanEntry(CellRef(1, 1), "small"), PlanEntry(CellRef(1, 1), "large"))
        )
        with pytest.raises(PlanError, match="twice"):
            populate_vehicles(scene, parking_grid, plan)

    def test_lane_needs_force(self, parking_grid):
        scene = synthesize(parking_grid)
        with pytest.raises(PlanError, match="force"):
            populate_vehicles(
                scene, parking_grid, OccupancyPlan((PlanEntry(CellRef(0, 0), "small"),))
            )
        forced = populate_vehicles(
            scene, parking_grid,
            OccupancyPlan((PlanEntry(CellRef(0, 0), "small", parked=False, force=True),)),
        )
        assert forced.node("veh-0-0").tags["parked"] == "false"

    def test_overhang_warning(self):
        # large vehicle is 5.9 m long; the cell is only 5 m deep
        spec = GarageSpec(((1,), (0,)), (6.0, 5.0), (3.0,))
        grid = classify_all(spec)
        scene = synthesize(grid)
        out = populate_vehicles(
            scene, grid, OccupancyPlan((PlanEntry(CellRef(1, 0), "large"),))
        )
        assert out.node("veh-1-0").tags.get("overhang") == "true"
        small = populate_vehicles(
            scene, grid, OccupancyPlan((PlanEntry(CellRef(1, 0), "small"),))
        )
        assert "overhang" not in small.node("veh-1-0").tags

    def test_plan_documents_round_trip(self):
        plan = OccupancyPlan(
            (
                PlanEntry(CellRef(1, 1), "small"),
                PlanEntry(CellRef(1, 2), "large", parked=False, color="black", force=True),
            )
        )
        assert parse_occupancy_plan(emit_occupancy_plan(plan)) == plan


class TestSceneDocuments:
    def test_round_trip_equality(self, rng):
        for _ in range(10):
            spec = random_spec(rng)
            scene = synthesize(classify_all(spec))
            assert import_scene(export_scene(scene)) == scene

    def test_round_trip_bytes(self, rng):
        spec = random_spec(rng)
        scene = synthesize(classify_all(spec))
        text = export_scene(scene)
        assert export_scene(import_scene(text)) == text

    def test_empty_scene_document(self):
        scene = import_scene(json.dumps({
            "schema": "scene/1", "light_level": "bright",
            "bounds": {"center": [0, 0, 0], "half_extents": [1, 1, 1], "yaw": 0.0},
            "nodes": [],
        }))
        assert scene.nodes == ()
        assert export_scene(scene, "obj").count("\nf ") == 0

    def test_duplicate_id_rejected(self):
        node = {"id": "a", "kind": "column", "center": [0, 0, 1],
                "half_extents": [1, 1, 1], "yaw": 0.0, "tags": {}}
        doc = json.dumps({
            "schema": "scene/1", "light_level": "bright",
            "bounds": {"center": [0, 0, 0], "half_extents": [1, 1, 1], "yaw": 0.0},
            "nodes": [node, node],
        })
        with pytest.raises(SchemaError, match="duplicate"):
            import_scene(doc)

    def test_unknown_kind_named(self):
        doc = json.dumps({
            "schema": "scene/1", "light_level": "bright",
            "bounds": {"center": [0, 0, 0], "half_extents": [1, 1, 1], "yaw": 0.0},
            "nodes": [{"id": "a", "kind": "pillar!", "center": [0, 0, 1],
                       "half_extents": [1, 1, 1], "yaw": 0.0, "tags": {}}],
        })
        with pytest.raises(SchemaError, match="pillar!"):
            import_scene(doc)

    def test_wrong_schema(self):
        with pytest.raises(SchemaError):
            import_scene(json.dumps({"schema": "scene/2"}))

    def test_obj_triangle_count(self, all_lane_3x3):
        scene = synthesize(classify_all(all_lane_3x3))
        obj = export_scene(scene, "obj")
        faces = [l for l in obj.splitlines() if l.startswith("f ")]
        verts = [l for l in obj.splitlines() if l.startswith("v ")]
        assert len(faces) == 12 * len(scene.nodes)
        assert len(verts) == 8 * len(scene.nodes)

    def test_remove_node(self, all_lane_3x3):
        scene = synthesize(classify_all(all_lane_3x3))
        out = remove_node(scene, "col-1-1")
        assert len(out.nodes) == len(scene.nodes) - 1
        with pytest.raises(KeyError):
            remove_node(scene, "no-such-node")


class TestBox3:
    def test_positive_half_extents(self):
        with pytest.raises(ValueError):
            Box3((0, 0, 0), (1.0, 0.0, 1.0))

    def test_aabb_with_yaw(self):
        box = Box3((0.0, 0.0, 1.0), (2.0, 1.0, 1.0), yaw=math.pi / 2)
        a = box.aabb
        assert a[0] == pytest.approx(-1.0) and a[3] == pytest.approx(1.0)
        assert a[1] == pytest.approx(-2.0) and a[4] == pytest.approx(2.0)
