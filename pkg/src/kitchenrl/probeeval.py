"""Interaction datasets with ground-truth labels and frozen-encoder probes.

Two dataset flavors: scripted interaction sequences enumerated over every
feasible manifestation (teleport navigation, failures kept), and uniform
random-policy rollouts filtered to interaction steps. Samples are serialized
as JSON lines with base64 float payloads. Linear probes are trained on frozen
encoder outputs and scored with rank-based mean average precision.
"""
from __future__ import annotations

import base64
import json
import warnings

import numpy as np

from .agentnet import flat_to_action, init_params, np_encode_objects
from .config import Config
from .kitchensim.categories import FLAGS, NUM_CATEGORIES, Category, can_contain
from .kitchensim.render import observe
from .kitchensim.tasks import TASKS, KitchenEnv, get_task, solver_policy
from .kitchensim.world import (
    AGENT_ID,
    GRID,
    ActionSpec,
    InteractAction,
    Pitch,
    WorldState,
    Yaw,
    visible_objects,
    step_world,
)
from .objmodel import ORACLE_DIM, oracle_features

PROPERTY_NAMES = ("is_on", "is_open", "is_cooked", "is_filled",
                  "is_sliced", "is_picked_up")
CONTAINMENT_NAMES = ("inside_something", "contains_something")
TARGETS = ("category", "properties", "containment")

_I = InteractAction


def object_labels(world: WorldState, oid: int) -> tuple[int, list[int], list[int]]:
    o = world.objects[oid]
    props = [int(o.is_on), int(o.is_open), int(o.is_cooked),
             int(o.is_filled), int(o.is_sliced), int(o.is_picked_up)]
    inside = o.parent is not None and o.parent != AGENT_ID
    contains = any(c.parent == oid for c in world.objects.values())
    return int(o.category), props, [int(inside), int(contains)]


def _b64(arr: np.ndarray) -> str:
    return base64.b64encode(
        np.ascontiguousarray(arr, dtype="<f4").tobytes()).decode("ascii")


def _unb64(text: str, width: int) -> np.ndarray:
    flat = np.frombuffer(base64.b64decode(text), dtype="<f4")
    return flat.reshape(-1, width).astype(np.float64)


def _state_record(world: WorldState, bundle) -> dict:
    ids = list(bundle.patch_ids)
    cats, props, cont = [], [], []
    for oid in ids:
        c, p, k = object_labels(world, oid)
        cats.append(c)
        props.append(p)
        cont.append(k)
    patches = (np.stack([p.ravel() for p in bundle.patches])
               if ids else np.zeros((0, 256)))
    orc = oracle_features(world, ids)
    return {"ids": ids, "cat": cats, "prop": props, "cont": cont,
            "patch": _b64(patches), "orc": _b64(orc)}


def _tuple_record(world_t, bundle_t, action: ActionSpec,
                  world_p, bundle_p, source: str, task: str) -> dict:
    pidx = -1 if action.patch_index is None else int(action.patch_index)
    return {"source": source, "world": task,
            "action": {"kind": action.kind, "base": int(action.base),
                       "patch_index": pidx},
            "t": _state_record(world_t, bundle_t),
            "p": _state_record(world_p, bundle_p)}


def write_jsonl(path, records: list[dict]) -> None:
    with open(path, "w") as f:
        for rec in records:
            f.write(json.dumps(rec, separators=(",", ":")) + "\n")


def load_jsonl(path) -> list[dict]:
    with open(path) as f:
        return [json.loads(line) for line in f if line.strip()]


# ---------------------------------------------------------------------------
# random-policy dataset


def gen_random(seed: int, n: int = 4000) -> list[dict]:
    """Uniform random rollouts; keeps only interaction steps, exactly n."""
    names = sorted(TASKS)
    out: list[dict] = []
    episode = 0
    while len(out) < n:
        task = names[episode % len(names)]
        rng = np.random.default_rng(np.random.SeedSequence([seed, 13, episode]))
        env = KitchenEnv(task, int(rng.integers(0, 2**31)))
        world, bundle = env.reset()
        done = False
        while not done and len(out) < n:
            k = len(bundle.patch_ids)
            act = flat_to_action(int(rng.integers(0, 8 + 8 * k)))
            prev_world, prev_bundle = world, bundle
            world, bundle, _, done = env.step(act)
            if act.kind == "interact":
                out.append(_tuple_record(prev_world, prev_bundle, act,
                                         world, bundle, "random", task))
        episode += 1
    return out


# ---------------------------------------------------------------------------
# scripted dataset: teleport to target, interact, record


def _teleport_to(world: WorldState, oid: int) -> None:
    obj = world.objects[oid]
    tc_, tr = obj.cell
    stand = None
    for cand in ((tc_, tr + 1), (tc_, tr - 1), (tc_ + 1, tr), (tc_ - 1, tr)):
        if 0 <= cand[0] < GRID and 0 <= cand[1] < GRID:
            stand = cand
            break
    yaw = {(0, -1): Yaw.N, (1, 0): Yaw.E, (0, 1): Yaw.S, (-1, 0): Yaw.W}[
        (tc_ - stand[0], tr - stand[1])]
    pitch = Pitch.LEVEL if obj.height == 1 else Pitch.DOWN
    world.agent = (stand[0], stand[1], yaw, pitch)
    if world.held is not None:
        for sid in world.subtree_ids(world.held):
            world.objects[sid].cell = stand
            world.objects[sid].height = 1


def _run_script(world: WorldState, steps, task: str) -> list[dict]:
    """Execute ("goto", oid) / ("act", base, oid) steps, recording interacts.

    Targets that are not visible after the teleport (sealed inside a closed
    receptacle) are skipped; the rest of the script still runs, so failed
    sequences are recorded alongside successful ones.
    """
    recs = []
    for step in steps:
        if step[0] == "goto":
            _teleport_to(world, step[1])
            continue
        _, base, oid = step
        vis = visible_objects(world)
        if oid not in vis:
            continue
        act = ActionSpec.interact(base, vis.index(oid))
        bundle_t = observe(world)
        nxt, _, _ = step_world(world, act, lambda w: False)
        recs.append(_tuple_record(world, bundle_t, act, nxt, observe(nxt),
                                  "programmatic", task))
        world = nxt
    return recs


def _ids_of(world, pred) -> list[int]:
    return sorted(o.id for o in world.objects.values() if pred(o))


def _burner_pots(world) -> list[tuple[int, int]]:
    """(pot/pan id, knob id) for cookware already sitting on a burner."""
    out = []
    for o in world.objects.values():
        if o.category not in (Category.POT, Category.PAN) or o.parent is None:
            continue
        if o.parent == AGENT_ID:
            continue
        host = world.objects[o.parent]
        if host.category == Category.STOVE_BURNER and host.paired_id is not None:
            out.append((o.id, host.paired_id))
    return sorted(out)


def _manifestations(world: WorldState, full: bool = True) -> list[list[tuple]]:
    """Scripted action sequences for every template instance in this world."""
    flags = lambda i: FLAGS[world.objects[i].category]
    cat = lambda i: world.objects[i].category
    pick = _ids_of(world, lambda o: FLAGS[o.category].pickupable)
    scripts: list[list[tuple]] = []

    for x in pick:
        scripts.append([("goto", x), ("act", _I.PICKUP, x)])
    for x in _ids_of(world, lambda o: FLAGS[o.category].toggleable):
        scripts.append([("goto", x), ("act", _I.TURN_ON, x)])
    for x in _ids_of(world, lambda o: FLAGS[o.category].openable):
        scripts.append([("goto", x), ("act", _I.OPEN, x)])
    for x in pick:
        for r in _ids_of(world, lambda o: FLAGS[o.category].receptacle):
            if r == x or not can_contain(cat(r), cat(x)):
                continue
            head = [("goto", x), ("act", _I.PICKUP, x), ("goto", r)]
            if flags(r).openable:
                # closed put (fails) and open-then-put (succeeds)
                scripts.append(head + [("act", _I.PUT, r)])
                scripts.append(head + [("act", _I.OPEN, r), ("act", _I.PUT, r)])
            else:
                scripts.append(head + [("act", _I.PUT, r)])
    if not full:
        return scripts

    sinks = _ids_of(world, lambda o: o.category == Category.SINK_BASIN)
    for x in _ids_of(world, lambda o: FLAGS[o.category].fillable):
        for s in sinks:
            scripts.append([("goto", x), ("act", _I.PICKUP, x), ("goto", s),
                            ("act", _I.PUT, s), ("act", _I.FILL, x)])
    for x in _ids_of(world, lambda o: FLAGS[o.category].sliceable):
        for y in pick:
            if y == x:
                continue
            scripts.append([("goto", y), ("act", _I.PICKUP, y),
                            ("goto", x), ("act", _I.SLICE, x)])
    cookable = _ids_of(world, lambda o: FLAGS[o.category].cookable)
    for x in cookable:
        for pot, knob in _burner_pots(world):
            if not can_contain(cat(pot), cat(x)):
                continue
            scripts.append([("goto", x), ("act", _I.PICKUP, x), ("goto", pot),
                            ("act", _I.PUT, pot), ("goto", knob)]
                           + [("act", _I.TURN_ON, knob)] * 4)
        for t in _ids_of(world, lambda o: o.category == Category.TOASTER):
            if not can_contain(Category.TOASTER, cat(x)):
                continue
            scripts.append([("goto", x), ("act", _I.PICKUP, x), ("goto", t),
                            ("act", _I.PUT, t)] + [("act", _I.TURN_ON, t)] * 4)
        for m in _ids_of(world, lambda o: o.category == Category.MICROWAVE):
            scripts.append([("goto", x), ("act", _I.PICKUP, x), ("goto", m),
                            ("act", _I.OPEN, m), ("act", _I.PUT, m),
                            ("act", _I.CLOSE, m)] + [("act", _I.TURN_ON, m)] * 4)
    return scripts


def _solved_world(task_name: str) -> WorldState:
    env = KitchenEnv(task_name, 0)
    env.reset()
    policy = solver_policy(task_name)
    for _ in range(200):
        _, _, _, done = env.step(policy(env.world))
        if done:
            break
    w = env.world.clone()
    w.finished = False
    w.step_count = 0
    return w


def gen_programmatic(seed: int) -> list[dict]:
    """Enumerate scripted manifestations over all registered worlds.

    The enumeration is fully deterministic; `seed` is accepted for interface
    symmetry with the random generator. A second pass re-enumerates the
    single-interaction templates on post-solution worlds so that cooked,
    filled, and sliced objects appear in the labels.
    """
    del seed
    out: list[dict] = []
    for name in sorted(TASKS):
        builder = get_task(name).builder
        for script in _manifestations(builder()):
            out.extend(_run_script(builder(), script, name))
    for name in sorted(TASKS):
        base = _solved_world(name)
        for script in _manifestations(base, full=False):
            out.extend(_run_script(base.clone(), script, name + "+solved"))
    return out


# ---------------------------------------------------------------------------
# probe rows and encoders


def collect_rows(samples: list[dict]) -> dict:
    """Flatten t and t+1 object occurrences into parallel label arrays."""
    patches, orcs, cats, props, conts = [], [], [], [], []
    for rec in samples:
        for side in ("t", "p"):
            st = rec[side]
            if not st["ids"]:
                continue
            patches.append(_unb64(st["patch"], 256))
            orcs.append(_unb64(st["orc"], ORACLE_DIM))
            cats.extend(st["cat"])
            props.extend(st["prop"])
            conts.extend(st["cont"])
    return {
        "patch": np.concatenate(patches) if patches else np.zeros((0, 256)),
        "orc": np.concatenate(orcs) if orcs else np.zeros((0, ORACLE_DIM)),
        "cat": np.asarray(cats, dtype=np.intp),
        "prop": np.asarray(props, dtype=np.float64),
        "cont": np.asarray(conts, dtype=np.float64),
    }


def encode_rows(rows: dict, encoder: str, pg=None, seed: int = 0) -> np.ndarray:
    """Frozen features for probing. encoder: checkpoint|oracle_raw|random."""
    if encoder == "oracle_raw":
        return rows["orc"].copy()
    if encoder == "random":
        cfg = Config(aux="none", seed=seed)
        return np_encode_objects(init_params(cfg, 9000 + seed),
                                 rows["patch"], oracle=False)
    if encoder == "checkpoint":
        if "orc_w" in pg:
            return np_encode_objects(pg, rows["orc"], oracle=True)
        if "enc_o1_w" not in pg:
            raise ValueError("checkpoint has no object encoder parameters")
        if pg["enc_o1_w"].shape[0] != rows["patch"].shape[1]:
            raise ValueError(
                f"encoder expects dim {pg['enc_o1_w'].shape[0]}, "
                f"dataset patches have {rows['patch'].shape[1]}")
        return np_encode_objects(pg, rows["patch"], oracle=False)
    raise ValueError(f"unknown encoder {encoder!r}")


def _split_ok(y: np.ndarray, train_idx: np.ndarray, kind: str) -> bool:
    if kind == "category":
        return set(np.unique(y[train_idx])) == set(np.unique(y))
    tr = y[train_idx]
    for j in range(y.shape[1]):
        col = y[:, j]
        if 0 < col.sum() and tr[:, j].sum() == 0:
            return False
        if col.sum() < len(col) and tr[:, j].sum() == len(tr):
            return False
    return True


def average_precision(scores: np.ndarray, labels: np.ndarray) -> float:
    order = np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")
    rel = np.asarray(labels, dtype=np.float64)[order]
    n_pos = rel.sum()
    if n_pos == 0:
        raise ValueError("average precision needs at least one positive")
    precision = np.cumsum(rel) / np.arange(1, rel.size + 1)
    return float((precision * rel).sum() / n_pos)


def map_score(scores: np.ndarray, labels: np.ndarray) -> float:
    """Mean AP over label columns; columns without positives are skipped."""
    aps = [average_precision(scores[:, j], labels[:, j])
           for j in range(labels.shape[1]) if labels[:, j].sum() > 0]
    if not aps:
        raise ValueError("no label column has a positive example")
    return float(np.mean(aps))


def _softmax_rows(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - x.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def train_probe(feats: np.ndarray, rows: dict, target: str, seed: int,
                epochs: int = 2000, lr: float = 0.05) -> float:
    """Linear probe on frozen features; returns test-set mAP."""
    if target == "category":
        y = np.zeros((len(rows["cat"]), NUM_CATEGORIES))
        y[np.arange(len(rows["cat"])), rows["cat"]] = 1.0
    elif target == "properties":
        y = rows["prop"]
    elif target == "containment":
        y = rows["cont"]
    else:
        raise ValueError(f"unknown probe target {target!r}")

    rng = np.random.default_rng(np.random.SeedSequence([seed, 17]))
    n = feats.shape[0]
    cut = int(n * 0.8)
    kind = "category" if target == "category" else "binary"
    ycheck = rows["cat"] if target == "category" else y
    for _ in range(50):
        perm = rng.permutation(n)
        tr, te = perm[:cut], perm[cut:]
        if _split_ok(ycheck, tr, kind):
            break
        warnings.warn(f"degenerate {target} split, resampling")

    mean = feats[tr].mean(axis=0)
    std = feats[tr].std(axis=0) + 1e-8
    x_tr = (feats[tr] - mean) / std
    x_te = (feats[te] - mean) / std
    y_tr = y[tr]

    w = np.zeros((feats.shape[1], y.shape[1]))
    b = np.zeros(y.shape[1])
    inv = 1.0 / len(tr)
    for _ in range(epochs):
        logits = x_tr @ w + b
        p = _softmax_rows(logits) if target == "category" else _sigmoid(logits)
        g = (p - y_tr) * inv
        w -= lr * (x_tr.T @ g)
        b -= lr * g.sum(axis=0)
    return map_score(x_te @ w + b, y[te])


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def probe_report(pg, samples: list[dict], n_seeds: int = 5,
                 encoders: tuple[str, ...] = ("checkpoint", "oracle_raw", "random"),
                 ) -> list[tuple[str, str, int, float]]:
    """(encoder, target, seed, map) rows; encoder params are never mutated."""
    rows = collect_rows(samples)
    out = []
    for enc in encoders:
        for seed in range(n_seeds):
            feats = encode_rows(rows, enc, pg=pg, seed=seed)
            for target in TARGETS:
                out.append((enc, target, seed,
                            train_probe(feats, rows, target, seed)))
    return out
