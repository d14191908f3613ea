"""Task registry: world builders, success predicates, env facade, solvers."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .categories import FLAGS, Category
from .render import ObservationBundle, observe
from .world import (
    AGENT_ID,
    GRID,
    ActionSpec,
    InteractAction,
    NavAction,
    ObjectState,
    Pitch,
    WorldState,
    Yaw,
    interaction_target,
    spawn_agent,
    step_world,
    visible_objects,
)

C = Category


@dataclass(frozen=True)
class TaskSpec:
    name: str
    builder: Callable[[], WorldState]
    success: Callable[[WorldState], bool]
    categories: tuple[Category, ...]


def _furniture() -> list[ObjectState]:
    """Work-zone wall: sink, counter, toaster, counter, stove side by side."""
    mk = ObjectState
    items = [
        mk(0, C.SINK_BASIN, (2, 1)),
        mk(1, C.FAUCET, (0, 1)),
        mk(2, C.TOASTER, (4, 1)),
        mk(3, C.STOVE_BURNER, (6, 1), paired_id=4),
        mk(4, C.STOVE_KNOB, (6, 1), paired_id=3),
        mk(5, C.COUNTER_TOP, (5, 1)),
        mk(6, C.COUNTER_TOP, (3, 1)),
        mk(7, C.DINING_TABLE, (4, 4)),
        mk(8, C.FRIDGE, (0, 4)),
        mk(9, C.MICROWAVE, (8, 4)),
        mk(10, C.COFFEE_MACHINE, (0, 0)),
    ]
    return items


SINK, FAUCET, TOASTER, BURNER, KNOB = 0, 1, 2, 3, 4
COUNTER_A, COUNTER_B, TABLE, FRIDGE, MICROWAVE = 5, 6, 7, 8, 9


def _world(items: list[tuple[Category, int]]) -> WorldState:
    """Build a world from furniture plus (category, parent_id) item placements."""
    objects = {o.id: o for o in _furniture()}
    next_id = 11
    for cat, parent in items:
        host = objects[parent]
        objects[next_id] = ObjectState(
            next_id, cat, host.cell, height=host.height, parent=parent)
        next_id += 1
    return WorldState(objects=objects, agent=(4, 8, Yaw.N, Pitch.LEVEL))


def _has(world: WorldState, cat: Category, pred=None) -> bool:
    for o in world.objects.values():
        if o.category == cat and (pred is None or pred(o)):
            return True
    return False


def _toast_bread_world() -> WorldState:
    # bread starts one cell from the toaster
    return _world([
        (C.BREAD_SLICED, COUNTER_B),
        (C.BREAD_SLICED, COUNTER_B),
        (C.KNIFE, COUNTER_A),
        (C.CUP, COUNTER_A),
        (C.TOMATO, TABLE),
        (C.PLATE, TABLE),
        (C.EGG, COUNTER_A),
        (C.APPLE, FRIDGE),
    ])


def _toast_bread_done(w: WorldState) -> bool:
    return _has(w, C.BREAD_SLICED,
                lambda o: o.is_cooked and o.cooked_in == C.TOASTER)


def _fill_cup_world() -> WorldState:
    # both cups start one cell from the sink
    return _world([
        (C.CUP, COUNTER_B),
        (C.CUP, COUNTER_B),
        (C.KNIFE, COUNTER_A),
        (C.PLATE, COUNTER_A),
        (C.BREAD, COUNTER_A),
        (C.APPLE, TABLE),
        (C.PAN, COUNTER_A),
        (C.EGG, FRIDGE),
    ])


def _fill_cup_done(w: WorldState) -> bool:
    return _has(w, C.CUP, lambda o: o.is_filled)


def _cook_potato_world() -> WorldState:
    # potatoes start one cell from the burner; knob sits on its other side
    return _world([
        (C.POT, BURNER),
        (C.POTATO, COUNTER_A),
        (C.POTATO, COUNTER_A),
        (C.KNIFE, COUNTER_B),
        (C.CUP, COUNTER_B),
        (C.BREAD, TABLE),
        (C.LETTUCE, TABLE),
        (C.PLATE, COUNTER_B),
    ])


def _cook_potato_done(w: WorldState) -> bool:
    for o in w.objects.values():
        if o.category not in (C.POTATO, C.POTATO_SLICED) or not o.is_cooked:
            continue
        if o.parent is None or o.parent == AGENT_ID:
            continue
        pot = w.objects[o.parent]
        if pot.category != C.POT or pot.parent is None or pot.parent == AGENT_ID:
            continue
        burner = w.objects[pot.parent]
        if burner.category != C.STOVE_BURNER or burner.paired_id is None:
            continue
        if w.objects[burner.paired_id].is_on:
            return True
    return False


def _apple_plate_table_world() -> WorldState:
    # apple and plate share the table; only the apple-onto-plate move remains
    return _world([
        (C.APPLE, TABLE),
        (C.PLATE, TABLE),
        (C.KNIFE, COUNTER_B),
        (C.CUP, COUNTER_A),
        (C.TOMATO, TABLE),
        (C.BREAD, COUNTER_B),
        (C.EGG, FRIDGE),
    ])


def _apple_plate_table_done(w: WorldState) -> bool:
    for o in w.objects.values():
        if o.category != C.APPLE or o.parent is None or o.parent == AGENT_ID:
            continue
        plate = w.objects[o.parent]
        if plate.category != C.PLATE or plate.parent is None or plate.parent == AGENT_ID:
            continue
        if w.objects[plate.parent].category == C.DINING_TABLE:
            return True
    return False


def _slice_bread_world() -> WorldState:
    return _world([
        (C.BREAD, COUNTER_A),
        (C.KNIFE, COUNTER_B),
        (C.CUP, COUNTER_B),
        (C.APPLE, TABLE),
        (C.PLATE, COUNTER_A),
        (C.EGG, COUNTER_B),
        (C.TOMATO, TABLE),
    ])


def _slice_bread_done(w: WorldState) -> bool:
    return _has(w, C.BREAD_SLICED)


def _slice_lettuce_tomato_world() -> WorldState:
    return _world([
        (C.LETTUCE, COUNTER_A),
        (C.TOMATO, COUNTER_B),
        (C.KNIFE, TABLE),
        (C.CUP, COUNTER_A),
        (C.PLATE, COUNTER_B),
        (C.BREAD, COUNTER_A),
        (C.EGG, FRIDGE),
    ])


def _slice_lettuce_tomato_done(w: WorldState) -> bool:
    return _has(w, C.TOMATO_SLICED) and _has(w, C.LETTUCE_SLICED)


def _slice_three_world() -> WorldState:
    return _world([
        (C.APPLE, COUNTER_A),
        (C.POTATO, COUNTER_B),
        (C.LETTUCE, TABLE),
        (C.KNIFE, COUNTER_A),
        (C.CUP, COUNTER_B),
        (C.BREAD, TABLE),
        (C.PLATE, COUNTER_A),
    ])


def _slice_three_done(w: WorldState) -> bool:
    return (_has(w, C.APPLE_SLICED) and _has(w, C.POTATO_SLICED)
            and _has(w, C.LETTUCE_SLICED))


def _salad_world() -> WorldState:
    return _world([
        (C.PLATE, TABLE),
        (C.TOMATO_SLICED, COUNTER_A),
        (C.LETTUCE_SLICED, COUNTER_B),
        (C.KNIFE, COUNTER_A),
        (C.CUP, COUNTER_B),
        (C.BREAD, COUNTER_A),
        (C.EGG, FRIDGE),
    ])


def _salad_done(w: WorldState) -> bool:
    def on_plate(o):
        return (o.parent is not None and o.parent != AGENT_ID
                and w.objects[o.parent].category == C.PLATE)
    return (_has(w, C.TOMATO_SLICED, on_plate)
            and _has(w, C.LETTUCE_SLICED, on_plate))


def _spec(name, builder, success) -> TaskSpec:
    cats = tuple(sorted({o.category for o in builder().objects.values()}))
    return TaskSpec(name, builder, success, cats)


TASKS: dict[str, TaskSpec] = {
    t.name: t for t in [
        _spec("toast_bread", _toast_bread_world, _toast_bread_done),
        _spec("fill_cup", _fill_cup_world, _fill_cup_done),
        _spec("cook_potato", _cook_potato_world, _cook_potato_done),
        _spec("apple_plate_table", _apple_plate_table_world,
              _apple_plate_table_done),
        _spec("slice_bread", _slice_bread_world, _slice_bread_done),
        _spec("slice_lettuce_tomato", _slice_lettuce_tomato_world,
              _slice_lettuce_tomato_done),
        _spec("slice_apple_potato_lettuce", _slice_three_world,
              _slice_three_done),
        _spec("salad", _salad_world, _salad_done),
    ]
}


def get_task(name: str) -> TaskSpec:
    task = TASKS.get(name)
    if task is None:
        raise KeyError(
            f"unknown task {name!r}; registered: {sorted(TASKS)}")
    return task


class KitchenEnv:
    """Thin stateful facade over the pure world functions."""

    def __init__(self, task_name: str, seed: int):
        self.task = get_task(task_name)
        self.seed = seed
        self.world: Optional[WorldState] = None

    def reset(self) -> tuple[WorldState, ObservationBundle]:
        world = self.task.builder()
        world.agent = spawn_agent(self.seed)
        world.rng_seed = self.seed
        world.task_name = self.task.name
        self.world = world
        return world, observe(world)

    def step(self, action: ActionSpec
             ) -> tuple[WorldState, ObservationBundle, float, bool]:
        nxt, reward, done = step_world(self.world, action, self.task.success)
        self.world = nxt
        return nxt, observe(nxt), reward, done


# ---------------------------------------------------------------------------
# scripted control (tests, eval sanity, dataset generation)


def _face_cell(agent, cell) -> Optional[Yaw]:
    dc = cell[0] - agent[0]
    dr = cell[1] - agent[1]
    return {(0, -1): Yaw.N, (1, 0): Yaw.E, (0, 1): Yaw.S, (-1, 0): Yaw.W
            }.get((dc, dr))


def _rotations(cur: Yaw, want: Yaw) -> list[ActionSpec]:
    diff = (int(want) - int(cur)) % 4
    if diff == 1:
        return [ActionSpec.nav(NavAction.ROTATE_RIGHT)]
    if diff == 2:
        return [ActionSpec.nav(NavAction.ROTATE_RIGHT)] * 2
    if diff == 3:
        return [ActionSpec.nav(NavAction.ROTATE_LEFT)]
    return []


def _step_toward(agent, cell) -> Optional[ActionSpec]:
    """One nav action moving the agent cell toward `cell` (cols first)."""
    col, row, yaw, _ = agent
    if col != cell[0]:
        want = Yaw.E if cell[0] > col else Yaw.W
    elif row != cell[1]:
        want = Yaw.S if cell[1] > row else Yaw.N
    else:
        return None
    rot = _rotations(yaw, want)
    if rot:
        return rot[0]
    return ActionSpec.nav(NavAction.MOVE_AHEAD)


class ScriptedPolicy:
    """Re-plans one action at a time from the true world state."""

    def __init__(self, plan_fn: Callable[[WorldState], ActionSpec]):
        self.plan_fn = plan_fn

    def __call__(self, world: WorldState) -> ActionSpec:
        return self.plan_fn(world)


def approach_action(world: WorldState, target_id: int) -> Optional[ActionSpec]:
    """Next action to stand adjacent to target, facing it, right pitch.

    Returns None once interaction-ready (target visible and in range).
    """
    obj = world.objects[target_id]
    col, row, yaw, pitch = world.agent
    tc, tr = obj.cell
    if (col, row) != (tc, tr):
        # choose the adjacent standing cell closest to the agent
        cands = [(tc, tr + 1), (tc, tr - 1), (tc + 1, tr), (tc - 1, tr)]
        cands = [c for c in cands if 0 <= c[0] < GRID and 0 <= c[1] < GRID]
        cands.sort(key=lambda c: (abs(c[0] - col) + abs(c[1] - row), c[1], c[0]))
        stand = cands[0]
        if (col, row) != stand:
            return _step_toward(world.agent, stand)
        want = _face_cell(world.agent, obj.cell)
        if want is not None and want != yaw:
            return _rotations(yaw, want)[0]
    want_pitch = Pitch.LEVEL if obj.height == 1 else Pitch.DOWN
    if pitch != want_pitch:
        base = NavAction.LOOK_UP if want_pitch == Pitch.LEVEL else NavAction.LOOK_DOWN
        return ActionSpec.nav(base)
    return None


def interact_with(world: WorldState, base: InteractAction,
                  target_id: int) -> ActionSpec:
    vis = visible_objects(world)
    if target_id not in vis:
        raise RuntimeError(
            f"target {target_id} not visible for {base.name}")
    return ActionSpec.interact(base, vis.index(target_id))


def find_one(world: WorldState, cat: Category) -> int:
    for o in world.objects.values():
        if o.category == cat:
            return o.id
    raise KeyError(f"no object of category {cat.name}")


def solver_policy(task_name: str) -> ScriptedPolicy:
    """Greedy re-planning solver for each registered task."""

    def plan(world: WorldState) -> ActionSpec:
        goals = _solver_goals(task_name, world)
        for kind, base, target in goals:
            if kind == "interact":
                act = approach_action(world, target)
                if act is not None:
                    return act
                return interact_with(world, base, target)
            if kind == "wait":
                return ActionSpec.nav(NavAction.LOOK_UP)
        return ActionSpec.nav(NavAction.LOOK_UP)

    return ScriptedPolicy(plan)


def _solver_goals(task_name: str, w: WorldState
                  ) -> list[tuple[str, Optional[InteractAction], Optional[int]]]:
    """First unmet goal drives the next action; earlier entries are done."""
    I = InteractAction
    held_cat = None if w.held is None else w.objects[w.held].category

    def first(cat, pred=None):
        for o in w.objects.values():
            if o.category == cat and (pred is None or pred(o)):
                return o.id
        return None

    if task_name == "toast_bread":
        bread = first(C.BREAD_SLICED)
        toaster = first(C.TOASTER)
        if held_cat != C.BREAD_SLICED and w.objects[bread].parent != toaster:
            return [("interact", I.PICKUP, bread)]
        if w.objects[bread].parent != toaster:
            return [("interact", I.PUT, toaster)]
        if not w.objects[toaster].is_on:
            return [("interact", I.TURN_ON, toaster)]
        return [("wait", None, None)]

    if task_name == "fill_cup":
        cup = first(C.CUP)
        sink = first(C.SINK_BASIN)
        if w.objects[cup].is_filled:
            return [("wait", None, None)]
        if held_cat != C.CUP and w.objects[cup].parent != sink:
            return [("interact", I.PICKUP, cup)]
        if w.objects[cup].parent != sink:
            return [("interact", I.PUT, sink)]
        return [("interact", I.FILL, cup)]

    if task_name == "cook_potato":
        potato = first(C.POTATO) or first(C.POTATO_SLICED)
        pot = first(C.POT)
        knob = first(C.STOVE_KNOB)
        if held_cat not in (C.POTATO, C.POTATO_SLICED) \
                and w.objects[potato].parent != pot:
            return [("interact", I.PICKUP, potato)]
        if w.objects[potato].parent != pot:
            return [("interact", I.PUT, pot)]
        if not w.objects[knob].is_on:
            return [("interact", I.TURN_ON, knob)]
        return [("wait", None, None)]

    if task_name == "apple_plate_table":
        apple = first(C.APPLE)
        plate = first(C.PLATE)
        table = first(C.DINING_TABLE)
        if w.objects[apple].parent != plate and held_cat != C.APPLE:
            return [("interact", I.PICKUP, apple)]
        if w.objects[apple].parent != plate:
            return [("interact", I.PUT, plate)]
        if w.objects[plate].parent != table and held_cat != C.PLATE:
            return [("interact", I.PICKUP, plate)]
        if w.objects[plate].parent != table:
            return [("interact", I.PUT, table)]
        return [("wait", None, None)]

    if task_name in ("slice_bread", "slice_lettuce_tomato",
                     "slice_apple_potato_lettuce"):
        want = {
            "slice_bread": [C.BREAD],
            "slice_lettuce_tomato": [C.LETTUCE, C.TOMATO],
            "slice_apple_potato_lettuce": [C.APPLE, C.POTATO, C.LETTUCE],
        }[task_name]
        knife = first(C.KNIFE)
        if held_cat != C.KNIFE:
            return [("interact", I.PICKUP, knife)]
        for cat in want:
            target = first(cat)
            if target is not None:
                return [("interact", I.SLICE, target)]
        return [("wait", None, None)]

    if task_name == "salad":
        plate = first(C.PLATE)

        def on_plate(o):
            return o.parent == plate
        for cat in (C.TOMATO_SLICED, C.LETTUCE_SLICED):
            item = first(cat, lambda o: not on_plate(o))
            placed = first(cat, on_plate)
            if placed is None:
                if held_cat != cat:
                    return [("interact", I.PICKUP, item)]
                return [("interact", I.PUT, plate)]
        return [("wait", None, None)]

    raise KeyError(task_name)


def run_scripted(task_name: str, seed: int, max_steps: int = 200
                 ) -> tuple[bool, float, list[ActionSpec]]:
    """Run the solver to completion; returns (success, total_reward, actions)."""
    env = KitchenEnv(task_name, seed)
    env.reset()
    policy = solver_policy(task_name)
    total = 0.0
    actions = []
    for _ in range(max_steps):
        act = policy(env.world)
        _, _, reward, done = env.step(act)
        actions.append(act)
        total += reward
        if done:
            return reward > 0, total, actions
    return False, total, actions
