"""Short training probes to pick learning-rate/exploration settings."""
import json
import subprocess
import sys
import time
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
RUNS = ROOT / "runs_probe"

BASE = {
    "task": "toast_bread",
    "aux": "oracle",
    "seed": 0,
    "budget": 50_000,
    "anneal_steps": 50_000,
    "train_every": 1,
    "eval_every": 25_000,
    "eval_frames": 2_500,
    "checkpoint_every": 50_000,
    "float32": True,
}

PROBES = {
    "lr18e6": {"lr": 1.8e-5},
    "lr1e4": {"lr": 1e-4},
    "lr3e4": {"lr": 3e-4},
    "lr1e3": {"lr": 1e-3},
}


def main():
    only = sys.argv[1:] or list(PROBES)
    RUNS.mkdir(exist_ok=True)
    log = RUNS / "sweep.log"
    for name in only:
        out = RUNS / name
        if (out / "params_final.ckpt").exists():
            continue
        out.mkdir(parents=True, exist_ok=True)
        cfg = dict(BASE, **PROBES[name], out_dir=str(out))
        cfg_path = out / "config.json"
        cfg_path.write_text(json.dumps(cfg, indent=1))
        t0 = time.time()
        with open(log, "a") as fh:
            fh.write(f"{time.strftime('%H:%M:%S')} start {name}\n")
        with open(out / "train.log", "w") as fh:
            rc = subprocess.call(
                [sys.executable, "-m", "kitchenrl.cli", "train",
                 "--config", str(cfg_path)],
                cwd=ROOT, stdout=fh, stderr=subprocess.STDOUT)
        with open(log, "a") as fh:
            fh.write(f"{time.strftime('%H:%M:%S')} done  {name} rc={rc} "
                     f"{(time.time() - t0) / 60:.1f}m\n")


if __name__ == "__main__":
    main()
