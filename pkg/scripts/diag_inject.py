"""Diagnostic: can the trainer exploit successes once they exist?

Pre-seeds the SIL buffer with scripted-solver episodes, then trains normally.
This isolates exploitation quality from the discovery problem. Not part of
any acceptance run (those never see demonstrations).
"""
import sys
from dataclasses import replace
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from kitchenrl.config import Config
from kitchenrl.kitchensim.tasks import KitchenEnv, run_scripted
from kitchenrl.replaytrain import Trainer, Transition

VARIANTS = {
    "inj_lr1e4": dict(lr=1e-4, sil_prob=0.125),
    "inj_lr3e4": dict(lr=3e-4, sil_prob=0.125),
    "inj_lr1e4_sil30": dict(lr=1e-4, sil_prob=0.3),
    "inj_lr3e4_sil30": dict(lr=3e-4, sil_prob=0.3),
}

BASE = dict(task="toast_bread", aux="oracle", seed=0, budget=50_000,
            anneal_steps=50_000, train_every=1, eval_every=10_000,
            eval_frames=5_000, checkpoint_every=50_000, float32=True)


def seed_sil(trainer: Trainer, task: str, n_episodes: int = 16) -> int:
    added = 0
    seed = 0
    while added < n_episodes and seed < 200:
        seed += 1
        success, _, actions = run_scripted(task, seed, 200)
        if not success:
            continue
        env = KitchenEnv(task, seed)
        world, bundle = env.reset()
        t_ref = trainer.store.add(bundle, trainer._observe_rows(world, bundle))
        episode = []
        for act in actions:
            world, bundle, reward, done = env.step(act)
            p_ref = trainer.store.add(bundle,
                                      trainer._observe_rows(world, bundle))
            episode.append(Transition(t_ref, act, reward, p_ref, done,
                                      9_000_000 + added))
            t_ref = p_ref
        assert episode[-1].reward > 0
        trainer.sil.push_episode(episode)
        added += 1
    return added


def main():
    names = sys.argv[1:] or list(VARIANTS)
    for name in names:
        out = Path("runs_diag") / name
        if (out / "params_final.ckpt").exists():
            print(f"skip {name}", flush=True)
            continue
        cfg = replace(Config(), **BASE, **VARIANTS[name], out_dir=str(out))
        trainer = Trainer(cfg)
        n = seed_sil(trainer, cfg.task)
        print(f"{name}: seeded {n} solver episodes "
              f"({len(trainer.sil)} transitions)", flush=True)
        result = trainer.run()
        print(f"{name}: final eval_sr {result['eval_sr']:.3f}", flush=True)


if __name__ == "__main__":
    main()
