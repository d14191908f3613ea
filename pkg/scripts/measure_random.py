"""Success rate of a uniform-random policy per task (layout tuning aid)."""
import sys
import time

import numpy as np

from kitchenrl.kitchensim.tasks import get_task
from kitchenrl.kitchensim.world import (
    ActionSpec,
    InteractAction,
    NavAction,
    spawn_agent,
    step_world,
    visible_objects,
)

TASKS = ["toast_bread", "fill_cup", "cook_potato", "apple_plate_table"]


def run_episode(task, seed, rng):
    spec = get_task(task)
    world = spec.builder()
    world.agent = spawn_agent(seed)
    steps = 0
    while True:
        n = len(visible_objects(world))
        flat = int(rng.integers(0, 8 + 8 * n))
        if flat < 8:
            act = ActionSpec.nav(NavAction(flat))
        else:
            act = ActionSpec.interact(
                InteractAction((flat - 8) % 8), (flat - 8) // 8)
        world, reward, done = step_world(world, act, spec.success)
        steps += 1
        if done:
            return reward > 0, steps


def main():
    episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 400
    tasks = sys.argv[2:] or TASKS
    for task in tasks:
        rng = np.random.default_rng(12345)
        t0 = time.time()
        wins = 0
        win_steps = []
        for ep in range(episodes):
            ok, steps = run_episode(task, ep, rng)
            if ok:
                wins += 1
                win_steps.append(steps)
        rate = wins / episodes
        med = int(np.median(win_steps)) if win_steps else -1
        print(f"{task:22s} rate={rate:.4f} ({wins}/{episodes}) "
              f"median_win_steps={med} {time.time()-t0:.0f}s")


if __name__ == "__main__":
    main()
