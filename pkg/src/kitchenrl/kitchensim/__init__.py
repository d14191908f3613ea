from .categories import FLAGS, NUM_CATEGORIES, SLICED_VARIANT, Category, can_contain
from .render import ObservationBundle, observe, render_ego, render_patch
from .tasks import TASKS, KitchenEnv, TaskSpec, get_task, run_scripted, solver_policy
from .world import (
    AGENT_ID,
    GRID,
    MAX_STEPS,
    MAX_VISIBLE,
    ActionSpec,
    InteractAction,
    NavAction,
    ObjectState,
    Pitch,
    Temp,
    WorldState,
    Yaw,
    check_forest,
    spawn_agent,
    step_world,
    visible_objects,
)

__all__ = [
    "FLAGS", "NUM_CATEGORIES", "SLICED_VARIANT", "Category", "can_contain",
    "ObservationBundle", "observe", "render_ego", "render_patch",
    "TASKS", "KitchenEnv", "TaskSpec", "get_task", "run_scripted",
    "solver_policy", "AGENT_ID", "GRID", "MAX_STEPS", "MAX_VISIBLE",
    "ActionSpec", "InteractAction", "NavAction", "ObjectState", "Pitch",
    "Temp", "WorldState", "Yaw", "check_forest", "spawn_agent", "step_world",
    "visible_objects",
]
