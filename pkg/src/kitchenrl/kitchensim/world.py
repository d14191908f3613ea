"""World state, navigation, the interaction rule table, and visibility."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Optional

import numpy as np

from .categories import FLAGS, SLICED_VARIANT, Category, can_contain

GRID = 9
MAX_STEPS = 500
MAX_VISIBLE = 20
STEP_PENALTY = -0.04
COOK_DELAY = 3

AGENT_ID = -1  # parent sentinel for the held object


class Yaw(IntEnum):
    N = 0
    E = 1
    S = 2
    W = 3


class Pitch(IntEnum):
    LEVEL = 0  # looking at height-1 surfaces
    DOWN = 1   # looking at the floor layer


class Temp(IntEnum):
    COLD = 0
    ROOM = 1
    HOT = 2


class NavAction(IntEnum):
    MOVE_AHEAD = 0
    MOVE_BACK = 1
    MOVE_RIGHT = 2
    MOVE_LEFT = 3
    LOOK_UP = 4
    LOOK_DOWN = 5
    ROTATE_RIGHT = 6
    ROTATE_LEFT = 7


class InteractAction(IntEnum):
    PICKUP = 0
    PUT = 1
    OPEN = 2
    CLOSE = 3
    TURN_ON = 4
    TURN_OFF = 5
    SLICE = 6
    FILL = 7


# (dcol, drow) per yaw; row 0 is the north edge
YAW_DELTA = {Yaw.N: (0, -1), Yaw.E: (1, 0), Yaw.S: (0, 1), Yaw.W: (-1, 0)}


@dataclass(frozen=True)
class ActionSpec:
    kind: str  # "nav" | "interact"
    base: int
    patch_index: Optional[int] = None

    @staticmethod
    def nav(base: NavAction) -> "ActionSpec":
        return ActionSpec("nav", int(base))

    @staticmethod
    def interact(base: InteractAction, patch_index: int) -> "ActionSpec":
        return ActionSpec("interact", int(base), patch_index)


@dataclass
class ObjectState:
    id: int
    category: Category
    cell: tuple[int, int]
    height: int = 1
    is_on: bool = False
    is_open: bool = False
    is_cooked: bool = False
    is_filled: bool = False
    is_sliced: bool = False
    is_picked_up: bool = False
    temperature: Temp = Temp.ROOM
    parent: Optional[int] = None
    cook_timer: int = 0
    cooked_in: Optional[Category] = None
    paired_id: Optional[int] = None  # StoveKnob <-> StoveBurner link

    def clone(self) -> "ObjectState":
        return replace(self)

    def state_tuple(self):
        return (self.category, self.cell, self.height, self.is_on, self.is_open,
                self.is_cooked, self.is_filled, self.is_sliced, self.is_picked_up,
                self.temperature, self.parent, self.cook_timer, self.cooked_in)


@dataclass
class WorldState:
    objects: dict[int, ObjectState]
    agent: tuple[int, int, Yaw, Pitch]  # (col, row, yaw, pitch)
    held: Optional[int] = None
    step_count: int = 0
    rng_seed: int = 0
    task_name: str = ""
    finished: bool = False

    def clone(self) -> "WorldState":
        return WorldState(
            objects={i: o.clone() for i, o in self.objects.items()},
            agent=self.agent, held=self.held, step_count=self.step_count,
            rng_seed=self.rng_seed, task_name=self.task_name,
            finished=self.finished)

    def root_id(self, oid: int) -> int:
        cur = self.objects[oid]
        while cur.parent is not None and cur.parent != AGENT_ID:
            cur = self.objects[cur.parent]
        return cur.id

    def children_of(self, oid: int) -> list[int]:
        return [o.id for o in self.objects.values() if o.parent == oid]

    def subtree_ids(self, oid: int) -> list[int]:
        out = [oid]
        frontier = [oid]
        while frontier:
            nxt = []
            for pid in frontier:
                for o in self.objects.values():
                    if o.parent == pid:
                        out.append(o.id)
                        nxt.append(o.id)
            frontier = nxt
        return out

    def inside_closed(self, oid: int) -> bool:
        cur = self.objects[oid]
        while cur.parent is not None and cur.parent != AGENT_ID:
            parent = self.objects[cur.parent]
            if FLAGS[parent.category].openable and not parent.is_open:
                return True
            cur = parent
        return False


def check_forest(world: WorldState) -> None:
    for oid in world.objects:
        seen = {oid}
        cur = world.objects[oid]
        while cur.parent is not None and cur.parent != AGENT_ID:
            if cur.parent in seen:
                raise RuntimeError(f"containment cycle at object {oid}")
            seen.add(cur.parent)
            cur = world.objects[cur.parent]


def _move_subtree(world: WorldState, oid: int, cell: tuple[int, int],
                  height: int) -> None:
    for sid in world.subtree_ids(oid):
        obj = world.objects[sid]
        obj.cell = cell
        obj.height = height


def cone_cells(agent: tuple[int, int, Yaw, Pitch]) -> list[tuple[int, int, int, int]]:
    """(col, row, depth, lateral) for in-grid cells of the 3x3 viewing cone."""
    col, row, yaw, _ = agent
    out = []
    for depth in range(3):
        for lat in (-1, 0, 1):
            if yaw == Yaw.N:
                c, r = col + lat, row - depth
            elif yaw == Yaw.S:
                c, r = col + lat, row + depth
            elif yaw == Yaw.E:
                c, r = col + depth, row + lat
            else:
                c, r = col - depth, row + lat
            if 0 <= c < GRID and 0 <= r < GRID:
                out.append((c, r, depth, lat))
    return out


def visible_objects(world: WorldState) -> list[int]:
    col, row, yaw, pitch = world.agent
    want_height = 1 if pitch == Pitch.LEVEL else 0
    cone = {(c, r) for c, r, _, _ in cone_cells(world.agent)}
    entries = []
    for obj in world.objects.values():
        held = obj.id == world.held
        if not held:
            if obj.cell not in cone or obj.height != want_height:
                continue
            if world.inside_closed(obj.id):
                continue
        dc = obj.cell[0] - col
        dr = obj.cell[1] - row
        entries.append((dc * dc + dr * dr, 0 if held else 1, obj.id))
    entries.sort()
    return [e[2] for e in entries[:MAX_VISIBLE]]


def interaction_target(world: WorldState, patch_index: int) -> Optional[int]:
    vis = visible_objects(world)
    if patch_index >= len(vis):
        raise ValueError(
            f"patch_index {patch_index} out of range ({len(vis)} visible)")
    return vis[patch_index]


def _in_range(world: WorldState, obj: ObjectState) -> bool:
    col, row, yaw, _ = world.agent
    dc, dr = YAW_DELTA[yaw]
    return obj.cell == (col, row) or obj.cell == (col + dc, row + dr)


def _apply_nav(world: WorldState, base: NavAction) -> None:
    col, row, yaw, pitch = world.agent
    if base in (NavAction.MOVE_AHEAD, NavAction.MOVE_BACK,
                NavAction.MOVE_RIGHT, NavAction.MOVE_LEFT):
        if base == NavAction.MOVE_AHEAD:
            d = YAW_DELTA[yaw]
        elif base == NavAction.MOVE_BACK:
            d = YAW_DELTA[yaw]
            d = (-d[0], -d[1])
        elif base == NavAction.MOVE_RIGHT:
            d = YAW_DELTA[Yaw((yaw + 1) % 4)]
        else:
            d = YAW_DELTA[Yaw((yaw - 1) % 4)]
        nc, nr = col + d[0], row + d[1]
        if 0 <= nc < GRID and 0 <= nr < GRID:
            col, row = nc, nr
    elif base == NavAction.LOOK_UP:
        pitch = Pitch.LEVEL
    elif base == NavAction.LOOK_DOWN:
        pitch = Pitch.DOWN
    elif base == NavAction.ROTATE_RIGHT:
        yaw = Yaw((yaw + 1) % 4)
    else:
        yaw = Yaw((yaw - 1) % 4)
    world.agent = (col, row, yaw, pitch)
    if world.held is not None:
        _move_subtree(world, world.held, (col, row), 1)


def _apply_interact(world: WorldState, base: InteractAction, target_id: int) -> None:
    obj = world.objects[target_id]
    flags = FLAGS[obj.category]
    if not _in_range(world, obj) and target_id != world.held:
        return

    if base == InteractAction.PICKUP:
        if (flags.pickupable and world.held is None
                and not world.inside_closed(target_id)):
            obj.parent = AGENT_ID
            obj.is_picked_up = True
            world.held = target_id
            col, row, _, _ = world.agent
            _move_subtree(world, target_id, (col, row), 1)
    elif base == InteractAction.PUT:
        if world.held is None or not flags.receptacle:
            return
        if FLAGS[obj.category].openable and not obj.is_open:
            return
        held = world.objects[world.held]
        if target_id in world.subtree_ids(held.id):
            return
        if not can_contain(obj.category, held.category):
            return
        held.parent = target_id
        held.is_picked_up = False
        world.held = None
        root = world.objects[world.root_id(target_id)]
        _move_subtree(world, held.id, root.cell, root.height)
    elif base == InteractAction.OPEN:
        if flags.openable and not obj.is_open:
            obj.is_open = True
    elif base == InteractAction.CLOSE:
        if flags.openable and obj.is_open:
            obj.is_open = False
    elif base == InteractAction.TURN_ON:
        if flags.toggleable and not obj.is_on:
            obj.is_on = True
    elif base == InteractAction.TURN_OFF:
        if flags.toggleable and obj.is_on:
            obj.is_on = False
    elif base == InteractAction.SLICE:
        held_knife = (world.held is not None
                      and world.objects[world.held].category == Category.KNIFE)
        if held_knife and flags.sliceable and target_id != world.held:
            obj.category = SLICED_VARIANT[obj.category]
            obj.is_sliced = True
    elif base == InteractAction.FILL:
        if flags.fillable and obj.parent is not None and obj.parent != AGENT_ID:
            if world.objects[obj.parent].category == Category.SINK_BASIN:
                obj.is_filled = True


def _active_cooker(world: WorldState, obj: ObjectState) -> Optional[Category]:
    """Category of the appliance currently cooking obj, if any."""
    if obj.parent is None or obj.parent == AGENT_ID:
        return None
    parent = world.objects[obj.parent]
    if parent.category in (Category.TOASTER, Category.MICROWAVE) and parent.is_on:
        return parent.category
    if parent.category in (Category.POT, Category.PAN):
        if parent.parent is None or parent.parent == AGENT_ID:
            return None
        burner = world.objects[parent.parent]
        if burner.category != Category.STOVE_BURNER or burner.paired_id is None:
            return None
        knob = world.objects[burner.paired_id]
        if knob.is_on:
            return parent.category
    return None


def _tick_cooking(world: WorldState) -> None:
    for obj in world.objects.values():
        if obj.is_cooked or not FLAGS[obj.category].cookable:
            continue
        cooker = _active_cooker(world, obj)
        if cooker is None:
            continue
        obj.cook_timer += 1
        if obj.cook_timer == COOK_DELAY:
            obj.is_cooked = True
            obj.temperature = Temp.HOT
            obj.cooked_in = cooker


def step_world(world: WorldState, action: ActionSpec,
               success_fn) -> tuple[WorldState, float, bool]:
    """Advance one step. Observation rendering is layered on by observe()."""
    if world.finished:
        raise RuntimeError("step() called on a finished episode")
    target_id = None
    if action.kind == "interact":
        target_id = interaction_target(world, action.patch_index)
    nxt = world.clone()
    if action.kind == "nav":
        _apply_nav(nxt, NavAction(action.base))
    else:
        _apply_interact(nxt, InteractAction(action.base), target_id)
    _tick_cooking(nxt)
    nxt.step_count += 1
    success = success_fn(nxt)
    reward = 1.0 + STEP_PENALTY if success else STEP_PENALTY
    done = success or nxt.step_count >= MAX_STEPS
    nxt.finished = done
    return nxt, reward, done


def spawn_agent(seed: int) -> tuple[int, int, Yaw, Pitch]:
    rng = np.random.default_rng(seed)
    idx = int(rng.integers(0, GRID * GRID))
    return (idx % GRID, idx // GRID, Yaw.N, Pitch.LEVEL)
