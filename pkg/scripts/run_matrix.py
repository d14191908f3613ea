#!/usr/bin/env python3
"""Sequential queue for the acceptance training matrix.

Each run executes in a fresh subprocess via the CLI so replay memory is
returned to the OS between runs. Completed runs (params_final.ckpt present)
are skipped, so the queue is resumable. Run from the repo root:

    python3 scripts/run_matrix.py [--dry-run] [--limit N]
"""
from __future__ import annotations

import argparse
import json
import subprocess
import sys
import time
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
RUNS = ROOT / "runs"

# throughput/exploration settings for the acceptance matrix; package
# defaults stay untouched
BASE = {"float32": True, "train_every": 1, "checkpoint_every": 100_000,
        "lr": 1e-4, "anneal_steps": 100_000}

TASKS = ("toast_bread", "fill_cup", "cook_potato", "apple_plate_table")


def build_queue() -> list[tuple[str, dict]]:
    queue: list[tuple[str, dict]] = []

    def add(name: str, **kw):
        cfg = dict(BASE)
        cfg.update(kw)
        cfg["out_dir"] = str(RUNS / name)
        queue.append((name, cfg))

    # discovery-risk pilots first: they gate everything else
    for task in TASKS:
        add(f"{task}_oracle_s0", task=task, aux="oracle", seed=0)
    add("toast_bread_load_s0", task="toast_bread", aux="load", seed=0)
    add("toast_bread_none_s0", task="toast_bread", aux="none", seed=0)

    for task in TASKS:
        for aux in ("oracle", "load", "none"):
            for seed in (0, 1, 2):
                name = f"{task}_{aux}_s{seed}"
                if not any(n == name for n, _ in queue):
                    add(name, task=task, aux=aux, seed=seed)

    add("toast_bread_ocn_s0", task="toast_bread", aux="ocn", seed=0)
    add("toast_bread_cobra_s0", task="toast_bread", aux="cobra", seed=0)
    add("toast_bread_load_polnone_s0", task="toast_bread", aux="load",
        seed=0, attention_policy="none")
    add("toast_bread_load_polavg_s0", task="toast_bread", aux="load",
        seed=0, attention_policy="average")
    add("toast_bread_load_modeloff_s0", task="toast_bread", aux="load",
        seed=0, attention_model="off")
    return queue


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--dry-run", action="store_true")
    ap.add_argument("--limit", type=int, default=0,
                    help="stop after N uncompleted runs")
    args = ap.parse_args()

    queue = build_queue()
    RUNS.mkdir(exist_ok=True)
    log = RUNS / "matrix.log"
    started = 0
    for name, cfg in queue:
        run_dir = RUNS / name
        if (run_dir / "params_final.ckpt").exists():
            print(f"skip {name} (done)")
            continue
        if args.dry_run:
            print(f"would run {name}")
            continue
        run_dir.mkdir(parents=True, exist_ok=True)
        cfg_path = run_dir / "config.json"
        cfg_path.write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
        t0 = time.time()
        with open(log, "a") as lf:
            lf.write(f"{time.strftime('%H:%M:%S')} start {name}\n")
        with open(run_dir / "train.log", "w") as out:
            rc = subprocess.call(
                [sys.executable, "-m", "kitchenrl.cli", "train",
                 "--config", str(cfg_path)],
                stdout=out, stderr=subprocess.STDOUT, cwd=ROOT)
        mins = (time.time() - t0) / 60.0
        with open(log, "a") as lf:
            lf.write(f"{time.strftime('%H:%M:%S')} done  {name} "
                     f"rc={rc} {mins:.1f}m\n")
        if rc != 0:
            print(f"FAILED {name} rc={rc}", file=sys.stderr)
        started += 1
        if args.limit and started >= args.limit:
            break
    return 0


if __name__ == "__main__":
    sys.exit(main())
