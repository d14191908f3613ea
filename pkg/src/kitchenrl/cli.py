"""Operator surface: train/eval/probe/dataset/report subcommands.

Exit codes: 0 success, 2 invalid configuration or unusable paths,
3 training diverged (non-finite loss).
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from .config import Config, ConfigError, from_dict, to_dict
from .replaytrain import TrainingDivergedError, auc_percent, evaluate_policy, run_training
from .tensorcore.params import load_checkpoint

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3

_OVERRIDES = ("seed", "budget", "task", "aux", "attention_policy", "attention_model")


def _build_config(args) -> Config:
    data: dict = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config: no such file {args.config!r}")
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as e:
                raise ConfigError(f"config: invalid JSON ({e})")
        if not isinstance(data, dict):
            raise ConfigError("config: root must be a JSON object")
    for name in _OVERRIDES:
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    if getattr(args, "out", None) is not None:
        data["out_dir"] = args.out
    cfg = from_dict(data)
    cap = os.environ.get("LOAD_KITCHEN_THREADS")
    if cap:
        try:
            cfg.eval_workers = max(1, min(cfg.eval_workers, int(cap)))
        except ValueError:
            raise ConfigError(
                f"LOAD_KITCHEN_THREADS: expected an integer, got {cap!r}")
    return cfg


def _ensure_outdir(path_str: str) -> Path:
    out = Path(path_str)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as e:
        raise ConfigError(f"out: cannot write to {path_str!r} ({e})")
    return out


def cmd_train(args) -> int:
    cfg = _build_config(args)
    _ensure_outdir(cfg.out_dir)
    summary = run_training(cfg)
    print(f"finished: steps={summary['steps']} episodes={summary['episodes']} "
          f"final_eval={summary['eval_sr']:.3f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    ckpt_path = Path(args.checkpoint)
    if not ckpt_path.exists():
        raise ConfigError(f"checkpoint: no such file {args.checkpoint!r}")
    if args.config is None:
        sibling = ckpt_path.parent / "config.json"
        if not sibling.exists():
            raise ConfigError(
                "checkpoint dir has no config.json; pass --config")
        args.config = str(sibling)
    cfg = _build_config(args)
    pg = load_checkpoint(ckpt_path)
    _check_encoder_dims(pg, cfg)
    rate = evaluate_policy(pg, cfg, eval_ordinal=args.seed or 0)
    print(f"eval: task={cfg.task} success_rate={rate:.4f}")
    if args.out is not None:
        out = _ensure_outdir(args.out)
        (out / "eval.json").write_text(json.dumps(
            {"task": cfg.task, "success_rate": rate}, indent=2) + "\n")
    return EXIT_OK


def _check_encoder_dims(pg, cfg: Config) -> None:
    if "orc_w" in pg:
        if pg["orc_w"].shape[1] != cfg.d_o:
            raise ConfigError(
                f"d_o: checkpoint encoder width {pg['orc_w'].shape[1]} "
                f"!= config d_o {cfg.d_o}")
    elif "enc_o1_w" in pg:
        if pg["enc_o2_w"].shape[1] != cfg.d_o:
            raise ConfigError(
                f"d_o: checkpoint encoder width {pg['enc_o2_w'].shape[1]} "
                f"!= config d_o {cfg.d_o}")
    else:
        raise ConfigError("checkpoint: no object encoder parameters found")


def cmd_probe(args) -> int:
    from . import probeeval

    ckpt_path = Path(args.checkpoint)
    data_path = Path(args.dataset)
    if not ckpt_path.exists():
        raise ConfigError(f"checkpoint: no such file {args.checkpoint!r}")
    if not data_path.exists():
        raise ConfigError(f"dataset: no such file {args.dataset!r}")
    pg = load_checkpoint(ckpt_path)
    samples = probeeval.load_jsonl(data_path)
    out = _ensure_outdir(args.out if args.out is not None else ".")
    base_seed = args.seed or 0
    rows = probeeval.collect_rows(samples)
    report = []
    try:
        for enc in ("checkpoint", "oracle_raw", "random"):
            for k in range(args.probe_seeds):
                seed = base_seed + k
                feats = probeeval.encode_rows(rows, enc, pg=pg, seed=seed)
                for target in probeeval.TARGETS:
                    score = probeeval.train_probe(feats, rows, target, seed)
                    report.append((enc, target, seed, score))
                    print(f"probe: {enc} {target} seed={seed} map={score:.4f}")
    except ValueError as e:
        raise ConfigError(f"probe: {e}")
    with open(out / "probe_report.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["encoder", "target", "seed", "map"])
        for enc, target, seed, score in report:
            w.writerow([enc, target, seed, f"{score:.6f}"])
    return EXIT_OK


def cmd_dataset(args) -> int:
    from . import probeeval

    out = _ensure_outdir(args.out if args.out is not None else ".")
    seed = args.seed or 0
    if args.kind == "random":
        records = probeeval.gen_random(seed)
    else:
        records = probeeval.gen_programmatic(seed)
    path = out / f"{args.kind}.jsonl"
    probeeval.write_jsonl(path, records)
    print(f"dataset: kind={args.kind} tuples={len(records)} path={path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# report: learning curves, %AUC bars, combined CSV


def _method_label(cfg: dict) -> str:
    parts = [cfg["aux"]]
    if cfg.get("attention_policy", "full") != "full":
        parts.append(f"pol-{cfg['attention_policy']}")
    if cfg.get("attention_model", "on") != "on":
        parts.append("model-off")
    return "+".join(parts)


def _read_run(run_dir: Path) -> dict:
    cfg_path = run_dir / "config.json"
    csv_path = run_dir / "metrics.csv"
    if not cfg_path.exists() or not csv_path.exists():
        raise ConfigError(
            f"run: {run_dir} needs config.json and metrics.csv")
    cfg = json.loads(cfg_path.read_text())
    steps, evals = [], []
    with open(csv_path) as fh:
        for row in csv.DictReader(fh):
            steps.append(int(row["step"]))
            evals.append(float(row["eval_sr"]))
    return {"task": cfg["task"], "method": _method_label(cfg),
            "seed": cfg["seed"], "steps": steps, "evals": evals}


def cmd_report(args) -> int:
    from . import svgplot

    runs = [_read_run(Path(d)) for d in args.runs]
    out = _ensure_outdir(args.out if args.out is not None else ".")

    by_task: dict[str, list[dict]] = {}
    for run in runs:
        by_task.setdefault(run["task"], []).append(run)

    with open(out / "combined.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["task", "method", "seed", "step", "eval_sr"])
        for run in runs:
            for s, v in zip(run["steps"], run["evals"]):
                w.writerow([run["task"], run["method"], run["seed"], s, v])

    auc_rows = []
    for task, task_runs in sorted(by_task.items()):
        grid = task_runs[0]["steps"]
        for run in task_runs[1:]:
            if run["steps"] != grid:
                raise ConfigError(
                    f"report: eval grids differ within task {task!r} "
                    f"({run['method']} seed {run['seed']})")
        series = []
        methods: dict[str, list[list[float]]] = {}
        for run in task_runs:
            methods.setdefault(run["method"], []).append(run["evals"])
        for method, curves in sorted(methods.items()):
            arr = np.asarray(curves)
            mean = arr.mean(axis=0)
            err = (arr.std(axis=0, ddof=1) / np.sqrt(arr.shape[0])
                   if arr.shape[0] > 1 else None)
            series.append(svgplot.Series(method, grid, mean.tolist(),
                                         None if err is None else err.tolist()))
        svg = svgplot.line_chart(series, title=f"{task}: eval success",
                                 xlabel="environment steps",
                                 ylabel="success rate", y_range=(0.0, 1.0))
        (out / f"curves_{task}.svg").write_text(svg)

        oracle_like = [m for m in methods if m.startswith("oracle")]
        if oracle_like:
            ref = np.asarray(methods[oracle_like[0]]).mean(axis=0)
            for method, curves in sorted(methods.items()):
                mean = np.asarray(curves).mean(axis=0)
                try:
                    auc_rows.append((f"{task}/{method}",
                                     auc_percent((grid, mean), (grid, ref))))
                except ValueError:
                    pass
    if auc_rows:
        svg = svgplot.bar_chart([r[0] for r in auc_rows],
                                [r[1] for r in auc_rows],
                                title="learning-curve area, % of oracle",
                                ylabel="%AUC")
        (out / "auc_percent.svg").write_text(svg)
        with open(out / "auc_percent.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["run", "auc_percent"])
            for name, value in auc_rows:
                w.writerow([name, f"{value:.3f}"])
    print(f"report: {len(runs)} runs, {len(by_task)} tasks -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kitchenrl",
        description="Object-centric RL on the toy kitchen: training, "
                    "evaluation, linear probes, datasets, reports.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_config=True):
        if with_config:
            p.add_argument("--config", metavar="PATH", help="JSON config file")
        p.add_argument("--seed", type=int, metavar="N")
        p.add_argument("--out", metavar="DIR", help="output directory")

    p = sub.add_parser("train", help="run the training loop")
    add_common(p)
    p.add_argument("--budget", type=int, metavar="N")
    p.add_argument("--task", metavar="NAME")
    p.add_argument("--aux", metavar="MODE")
    p.add_argument("--attention-policy", dest="attention_policy",
                   metavar="MODE", choices=("full", "average", "none"))
    p.add_argument("--attention-model", dest="attention_model",
                   metavar="MODE", choices=("on", "off"))
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("checkpoint")
    add_common(p)
    p.add_argument("--task", metavar="NAME")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("probe", help="linear probes on a frozen checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("dataset")
    add_common(p, with_config=False)
    p.add_argument("--probe-seeds", type=int, default=5, metavar="N")
    p.set_defaults(fn=cmd_probe)

    p = sub.add_parser("dataset", help="generate an interaction dataset")
    p.add_argument("kind", choices=("programmatic", "random"))
    add_common(p, with_config=False)
    p.set_defaults(fn=cmd_dataset)

    p = sub.add_parser("report", help="curves, %AUC bars, combined CSV")
    p.add_argument("runs", nargs="+", metavar="RUN_DIR")
    add_common(p, with_config=False)
    p.set_defaults(fn=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDivergedError as e:
        print(f"error: training diverged: {e}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
