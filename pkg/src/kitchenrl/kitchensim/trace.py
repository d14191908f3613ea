"""Episode traces: JSON-lines logging and bit-exact replay."""
from __future__ import annotations

import json
from typing import Iterable

import numpy as np

from .render import ObservationBundle
from .tasks import KitchenEnv
from .world import ActionSpec


def action_to_json(action: ActionSpec) -> dict:
    out = {"kind": action.kind, "base": action.base}
    if action.kind == "interact":
        out["patch_index"] = action.patch_index
    return out


def action_from_json(obj: dict) -> ActionSpec:
    if obj["kind"] == "nav":
        return ActionSpec("nav", obj["base"])
    return ActionSpec("interact", obj["base"], obj["patch_index"])


def trace_record(step: int, action: ActionSpec, reward: float, done: bool,
                 agent_pose, changed_ids: list[int]) -> str:
    rec = {
        "step": step,
        "action": action_to_json(action),
        "reward": round(reward, 10),
        "done": done,
        "agent_pose": [int(agent_pose[0]), int(agent_pose[1]),
                       int(agent_pose[2]), int(agent_pose[3])],
        "changed_object_ids": changed_ids,
    }
    return json.dumps(rec, separators=(",", ":"), sort_keys=True)


def changed_object_ids(before, after) -> list[int]:
    out = []
    for oid, obj in after.objects.items():
        if obj.state_tuple() != before.objects[oid].state_tuple():
            out.append(oid)
    return sorted(out)


def write_trace(path, task_name: str, seed: int,
                actions: Iterable[ActionSpec]) -> None:
    env = KitchenEnv(task_name, seed)
    env.reset()
    with open(path, "w") as fh:
        fh.write(json.dumps({"task": task_name, "seed": seed},
                            separators=(",", ":"), sort_keys=True) + "\n")
        for i, action in enumerate(actions):
            before = env.world
            _, _, reward, done = env.step(action)
            fh.write(trace_record(i, action, reward, done, env.world.agent,
                                  changed_object_ids(before, env.world)) + "\n")
            if done:
                break


def replay_trace(path) -> tuple[list[ObservationBundle], list[str]]:
    """Re-execute a trace; returns the observation stream and re-encoded lines."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    header = json.loads(lines[0])
    env = KitchenEnv(header["task"], header["seed"])
    _, obs = env.reset()
    stream = [obs]
    rebuilt = [lines[0]]
    for ln in lines[1:]:
        rec = json.loads(ln)
        action = action_from_json(rec["action"])
        before = env.world
        _, obs, reward, done = env.step(action)
        stream.append(obs)
        rebuilt.append(trace_record(rec["step"], action, reward, done,
                                    env.world.agent,
                                    changed_object_ids(before, env.world)))
    return stream, rebuilt


def obs_equal(a: ObservationBundle, b: ObservationBundle) -> bool:
    if a.patch_ids != b.patch_ids or len(a.patches) != len(b.patches):
        return False
    if not np.array_equal(a.ego, b.ego) or not np.array_equal(a.loc, b.loc):
        return False
    return all(np.array_equal(p, q) for p, q in zip(a.patches, b.patches))
