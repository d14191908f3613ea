"""Replay buffers, Double-Q targets, the combined training loop, evaluation.

Observations are interned: patch/feature rows are stored once per distinct
byte pattern and ego frames are stored as uint8 codes over their exact value
alphabet, so 150K-transition buffers stay within memory on a small machine.
"""
from __future__ import annotations

import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import tensorcore as tc
from .agentnet import (ORACLE_DIM, StackedObs, flat_argmax, flat_q,
                       g_attend_context, g_attend_objects, g_context,
                       g_dense2_hidden, g_dense3, g_encode_objects,
                       init_params, np_encode_objects, np_forward_batch,
                       segment_masks, select_action, stack_observations,
                       stacked_layout)
from .config import Config, save_config, validate
from .kitchensim import MAX_STEPS, ActionSpec, KitchenEnv, ObservationBundle
from .objmodel import (CobraBatch, ModelBatchIndex, NegativePool, g_cobra_loss,
                       g_load_loss, g_ocn_loss, match_positive,
                       oracle_features)

CSV_HEADER = "step,episodes,train_sr,eval_sr,loss_dqn,loss_model,epsilon,seconds"

# every ego cell is either empty, floor-coded, or a category intensity
_EGO_VALUES = np.sort(np.array([0.0, 0.05] + [(c + 1) / 27.0
                                              for c in range(26)]))


def encode_ego(ego: np.ndarray) -> np.ndarray:
    return np.searchsorted(_EGO_VALUES, ego.ravel()).astype(np.uint8)


def decode_ego(codes: np.ndarray) -> np.ndarray:
    return _EGO_VALUES[codes]


class TrainingDivergedError(RuntimeError):
    """Raised when a loss goes non-finite; carries the batch episode ids."""

    def __init__(self, message: str, episode_ids=()):
        super().__init__(message)
        self.episode_ids = tuple(episode_ids)


class _RowIntern:
    def __init__(self):
        self._ids: dict[bytes, int] = {}
        self.rows: list[np.ndarray] = []

    def intern(self, row: np.ndarray) -> int:
        key = row.tobytes()
        idx = self._ids.get(key)
        if idx is None:
            idx = len(self.rows)
            self._ids[key] = idx
            self.rows.append(row)
        return idx


@dataclass(frozen=True)
class _ObsRecord:
    patch_ids: tuple[int, ...]
    ego_codes: np.ndarray
    loc: np.ndarray
    orc_ids: Optional[tuple[int, ...]]


class ObsStore:
    """Append-only interned observation storage for the replay buffers."""

    def __init__(self):
        self._patches = _RowIntern()
        self._orc = _RowIntern()
        self._records: list[_ObsRecord] = []

    def add(self, bundle: ObservationBundle,
            orc_rows: Optional[np.ndarray] = None) -> int:
        patch_ids = tuple(self._patches.intern(np.ravel(p))
                          for p in bundle.patches)
        orc_ids = None
        if orc_rows is not None:
            orc_ids = tuple(self._orc.intern(np.array(r)) for r in orc_rows)
        self._records.append(_ObsRecord(
            patch_ids, encode_ego(bundle.ego), bundle.loc, orc_ids))
        return len(self._records) - 1

    def decode(self, ref: int, oracle: bool) -> dict:
        rec = self._records[ref]
        out = {"ego": decode_ego(rec.ego_codes), "loc": rec.loc}
        if oracle:
            rows = [self._orc.rows[i] for i in rec.orc_ids]
            out["orc"] = (np.stack(rows) if rows
                          else np.zeros((0, ORACLE_DIM)))
        else:
            rows = [self._patches.rows[i] for i in rec.patch_ids]
            out["pat"] = np.stack(rows) if rows else np.zeros((0, 256))
        return out

    def __len__(self) -> int:
        return len(self._records)


def obs_to_dict(bundle: ObservationBundle,
                orc_rows: Optional[np.ndarray] = None) -> dict:
    out = {"ego": bundle.ego.ravel(), "loc": bundle.loc}
    if orc_rows is not None:
        out["orc"] = orc_rows
    else:
        out["pat"] = (np.stack([np.ravel(p) for p in bundle.patches])
                      if bundle.patches else np.zeros((0, 256)))
    return out


@dataclass(frozen=True)
class Transition:
    t_ref: int
    action: ActionSpec
    reward: float
    p_ref: int
    done: bool
    episode_id: int


class ReplayBuffer:
    """Fixed-capacity ring of transitions with uniform seeded sampling."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self._data: list[Transition] = []
        self._next = 0

    def push(self, tr: Transition) -> None:
        if len(self._data) < self.capacity:
            self._data.append(tr)
        else:
            self._data[self._next] = tr
            self._next = (self._next + 1) % self.capacity

    def sample_one(self, rng: np.random.Generator) -> Transition:
        return self._data[int(rng.integers(0, len(self._data)))]

    def __len__(self) -> int:
        return len(self._data)


class SilBuffer:
    """Successful-episode buffer; eviction drops whole episodes, oldest first."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self._data: list[Transition] = []
        self._episodes: deque[tuple[int, int]] = deque()  # (episode_id, count)

    def push_episode(self, transitions: list[Transition]) -> None:
        n = len(transitions)
        if n == 0 or n > self.capacity:
            return
        while len(self._data) + n > self.capacity:
            _, count = self._episodes.popleft()
            del self._data[:count]
        self._data.extend(transitions)
        self._episodes.append((transitions[0].episode_id, n))

    def sample_one(self, rng: np.random.Generator) -> Transition:
        return self._data[int(rng.integers(0, len(self._data)))]

    def episode_ids(self) -> list[int]:
        return [eid for eid, _ in self._episodes]

    def __len__(self) -> int:
        return len(self._data)


def sample_mixed(replay: ReplayBuffer, sil: SilBuffer, batch_size: int,
                 sil_prob: float, rng: np.random.Generator
                 ) -> list[Transition]:
    if len(replay) == 0:
        raise ValueError("regular replay buffer is empty")
    batch = []
    for _ in range(batch_size):
        if len(sil) > 0 and rng.random() < sil_prob:
            batch.append(sil.sample_one(rng))
        else:
            batch.append(replay.sample_one(rng))
    return batch


def epsilon_at(step: int, anneal_steps: int, start: float = 1.0,
               end: float = 0.1) -> float:
    frac = min(1.0, max(0.0, step / anneal_steps))
    return start + (end - start) * frac


_trapezoid = getattr(np, "trapezoid", None) or np.trapz


def auc_percent(curve_method, curve_oracle) -> float:
    """Trapezoidal AUC ratio x100; curves are (steps, values) pairs."""
    xm, ym = np.asarray(curve_method[0]), np.asarray(curve_method[1])
    xo, yo = np.asarray(curve_oracle[0]), np.asarray(curve_oracle[1])
    if xm.shape != xo.shape or not np.array_equal(xm, xo):
        raise ValueError("curves must share the same step grid")
    denom = _trapezoid(yo, xo)
    if denom <= 0:
        raise ValueError("oracle AUC is zero")
    return float(_trapezoid(ym, xm) / denom * 100.0)


def td_targets(batch: list[Transition], next_dicts: list[dict], group,
               target, cfg: Config) -> np.ndarray:
    """Double-Q targets: y = r + gamma * Q_old(s', argmax_a Q(s', a))."""
    stacked = stack_observations(next_dicts, _is_oracle(cfg))
    q_online = np_forward_batch(group, stacked, cfg)
    q_old = np_forward_batch(target, stacked, cfg)
    y = np.empty(len(batch))
    for j, tr in enumerate(batch):
        if tr.done:
            y[j] = tr.reward
        else:
            a_star = flat_argmax(*q_online[j])
            y[j] = tr.reward + cfg.gamma * flat_q(*q_old[j], a_star)
    return y


def _is_oracle(cfg: Config) -> bool:
    return cfg.aux in ("oracle", "oracle_category_only")


@dataclass
class PreparedBatch:
    """Numpy-side batch assembly; the graph build consumes this unchanged."""
    stacked_t: StackedObs
    stacked_p: StackedObs
    rows_t: np.ndarray
    seg_t: np.ndarray
    real_t: np.ndarray
    rows_p: np.ndarray
    seg_p: np.ndarray
    real_p: np.ndarray
    int_trans: np.ndarray       # transition indices whose action interacts
    nav_trans: np.ndarray
    int_abs_rows: np.ndarray    # absolute Z_t row of the acted-on object
    base_onehots: np.ndarray    # (B, 8)
    chosen_ext_idx: np.ndarray  # (B,) into [uniques_t | null]
    y_ordered: np.ndarray       # targets in [interact..., nav...] order
    neg_seed: int
    batch_size: int
    episode_ids: tuple[int, ...]
    cobra: Optional[CobraBatch] = None
    pool_rows: Optional[np.ndarray] = None


def prepare_batch(batch: list[Transition], store: ObsStore, group, target,
                  cfg: Config, rng: np.random.Generator) -> PreparedBatch:
    oracle = _is_oracle(cfg)
    obs_t = [store.decode(tr.t_ref, oracle) for tr in batch]
    obs_p = [store.decode(tr.p_ref, oracle) for tr in batch]
    stacked_t = stack_observations(obs_t, oracle)
    stacked_p = stack_observations(obs_p, oracle)
    null_t = stacked_t.unique_inputs.shape[0]
    null_p = stacked_p.unique_inputs.shape[0]
    rows_t, seg_t, real_t = stacked_layout(stacked_t, null_t)
    rows_p, seg_p, real_p = stacked_layout(stacked_p, null_p)

    y = td_targets(batch, obs_p, group, target, cfg)

    counts = np.bincount(seg_t, minlength=len(batch))
    seg_starts = np.concatenate([[0], np.cumsum(counts)[:-1]])

    int_trans, nav_trans, int_abs_rows = [], [], []
    base_onehots = np.zeros((len(batch), 8))
    chosen_ext = np.full(len(batch), null_t, dtype=np.intp)
    for j, tr in enumerate(batch):
        base_onehots[j, tr.action.base] = 1.0
        if tr.action.kind == "interact":
            abs_row = int(seg_starts[j]) + tr.action.patch_index
            int_trans.append(j)
            int_abs_rows.append(abs_row)
            chosen_ext[j] = rows_t[abs_row]
        else:
            nav_trans.append(j)
    int_trans = np.asarray(int_trans, dtype=np.intp)
    nav_trans = np.asarray(nav_trans, dtype=np.intp)
    int_abs_rows = np.asarray(int_abs_rows, dtype=np.intp)
    y_ordered = y[np.concatenate([int_trans, nav_trans])]

    prep = PreparedBatch(
        stacked_t, stacked_p, rows_t, seg_t, real_t, rows_p, seg_p, real_p,
        int_trans, nav_trans, int_abs_rows, base_onehots, chosen_ext,
        y_ordered, int(rng.integers(0, 2 ** 63)), len(batch),
        tuple(sorted({tr.episode_id for tr in batch})))

    if cfg.aux == "cobra":
        prep.cobra = _prepare_cobra(prep, group, cfg, rng)
    elif cfg.aux == "load":
        prep.pool_rows = np_encode_objects(
            group, stacked_p.unique_inputs, oracle)
    return prep


def _prepare_cobra(prep: PreparedBatch, group, cfg: Config,
                   rng: np.random.Generator) -> CobraBatch:
    mu_t = np_encode_objects(group, prep.stacked_t.unique_inputs, False)
    mu_p = np_encode_objects(group, prep.stacked_p.unique_inputs, False)
    real_rows = np.nonzero(prep.real_t)[0]
    pred_rows, targets = [], []
    for row in real_rows:
        j = prep.seg_t[row]
        p_rows = np.nonzero((prep.seg_p == j) & prep.real_p)[0]
        if p_rows.size == 0:
            continue
        cand_unique = prep.rows_p[p_rows]
        local = match_positive(mu_t[prep.rows_t[row]][None, :],
                               mu_p[cand_unique])
        pred_rows.append(prep.rows_t[row])
        targets.append(prep.stacked_p.unique_inputs[cand_unique[local[0]]])
    noise = rng.standard_normal(
        (prep.stacked_t.unique_inputs.shape[0], cfg.d_o))
    return CobraBatch(
        patches_unique=prep.stacked_t.unique_inputs,
        row_to_unique=prep.rows_t[real_rows],
        pred_row_to_unique=np.asarray(pred_rows, dtype=np.intp),
        target_patches=(np.stack(targets) if targets
                        else np.zeros((0, 256))),
        noise=noise)


def loss_from_leaves(leaves: dict, prep: PreparedBatch, cfg: Config,
                     pool: Optional[NegativePool]
                     ) -> tuple[tc.Tensor, tc.Tensor, Optional[tc.Tensor]]:
    """(total, L_dqn, L_aux) graph nodes for one prepared batch."""
    oracle = _is_oracle(cfg)
    dt = leaves["null_obj"].data.dtype
    b = prep.batch_size

    inputs_t = prep.stacked_t.unique_inputs.astype(dt, copy=False)
    cobra_mu_hidden = None
    if cfg.aux == "cobra":
        mu, hidden = g_dense2_hidden(leaves, "enc_o1", "enc_o2",
                                     tc.constant(inputs_t))
        z_unique_t = mu
        cobra_mu_hidden = (mu, hidden)
    else:
        z_unique_t = g_encode_objects(leaves, inputs_t, oracle)
    z_ext_t = tc.concat_rows([z_unique_t, leaves["null_obj"]])
    z_t_all = tc.gather_rows(z_ext_t, prep.rows_t)
    z_kappa = g_context(leaves, prep.stacked_t.egos.astype(dt, copy=False),
                        prep.stacked_t.locs.astype(dt, copy=False))
    row_mask, seg_mask = segment_masks(prep.seg_t, b)
    att_policy = g_attend_objects(leaves, z_t_all, row_mask, cfg.d_k,
                                  cfg.attention_policy)

    q_parts = []
    if prep.int_trans.size:
        xi = tc.concat_cols([
            tc.gather_rows(z_t_all, prep.int_abs_rows),
            tc.gather_rows(att_policy, prep.int_abs_rows),
            tc.gather_rows(z_kappa, prep.int_trans)])
        q_int = g_dense3(leaves, "qint", xi)
        pick = tc.constant(prep.base_onehots[prep.int_trans].astype(dt))
        q_parts.append(tc.rowwise_dot(q_int, pick))
    if prep.nav_trans.size:
        zk_nav = tc.gather_rows(z_kappa, prep.nav_trans)
        att_c = g_attend_context(leaves, zk_nav, z_t_all,
                                 seg_mask[prep.nav_trans], cfg.d_k,
                                 cfg.attention_policy)
        q_nav = g_dense3(leaves, "qnav", tc.concat_cols([zk_nav, att_c]))
        pick = tc.constant(prep.base_onehots[prep.nav_trans].astype(dt))
        q_parts.append(tc.rowwise_dot(q_nav, pick))
    q_hat = q_parts[0] if len(q_parts) == 1 else tc.concat_rows(q_parts)
    err = tc.sub(q_hat, tc.constant(prep.y_ordered[:, None].astype(dt)))
    l_dqn = tc.scale(tc.sum_squares(err), 1.0 / b)

    l_aux = None
    beta = 0.0
    if cfg.aux in ("load", "ocn"):
        inputs_p = prep.stacked_p.unique_inputs.astype(dt, copy=False)
        z_unique_p = g_encode_objects(leaves, inputs_p, oracle)
        z_ext_p = tc.concat_rows([z_unique_p, leaves["null_obj"]])
        z_p_all = tc.gather_rows(z_ext_p, prep.rows_p)
        idx = ModelBatchIndex(prep.seg_t, prep.seg_p, prep.real_t,
                              prep.real_p, prep.base_onehots.astype(dt),
                              prep.chosen_ext_idx)
        if cfg.aux == "load":
            if cfg.attention_model == "on":
                att_model = (att_policy if cfg.attention_policy == "full"
                             else g_attend_objects(leaves, z_t_all, row_mask,
                                                   cfg.d_k, "full"))
            else:
                att_model = g_attend_objects(leaves, z_t_all, row_mask,
                                             cfg.d_k, "none")
            neg_rng = np.random.Generator(np.random.PCG64(prep.neg_seed))
            l_aux = g_load_loss(leaves, cfg, z_ext_t, z_t_all, att_model,
                                z_p_all, idx, pool, neg_rng, b)
            beta = cfg.beta_model
        else:
            l_aux = g_ocn_loss(cfg, z_t_all, z_p_all, idx, b)
            beta = cfg.beta_ocn
    elif cfg.aux == "cobra":
        cb = prep.cobra
        if dt != np.float64:
            cb = CobraBatch(cb.patches_unique.astype(dt), cb.row_to_unique,
                            cb.pred_row_to_unique,
                            cb.target_patches.astype(dt),
                            cb.noise.astype(dt))
        l_aux = g_cobra_loss(leaves, cfg, cb, *cobra_mu_hidden, b)
        beta = cfg.beta_cobra

    total = l_dqn if l_aux is None else tc.add(l_dqn, tc.scale(l_aux, beta))
    return total, l_dqn, l_aux


def convert_group_dtype(group: tc.ParamGroup, dtype) -> tc.ParamGroup:
    out = tc.ParamGroup()
    for name, arr in group.items():
        out.add(name, arr.astype(dtype))
    return out


# ---------------------------------------------------------------------------
# evaluation


def run_eval_episode(pg, cfg: Config, task: str, seed_key: tuple
                     ) -> tuple[int, bool]:
    """One greedy-with-noise episode; returns (frames, success)."""
    ss = np.random.SeedSequence(seed_key)
    env_seed = int(ss.generate_state(1)[0])
    rng = np.random.default_rng(ss.spawn(1)[0])
    env = KitchenEnv(task, env_seed)
    oracle = _is_oracle(cfg)
    world, bundle = env.reset()
    frames = 0
    for _ in range(MAX_STEPS):
        orc = oracle_features(world, bundle.patch_ids,
                              cfg.aux == "oracle_category_only"
                              ) if oracle else None
        stacked = stack_observations([obs_to_dict(bundle, orc)], oracle)
        q_int, q_nav = np_forward_batch(pg, stacked, cfg)[0]
        action = select_action(q_int, q_nav, cfg.eval_epsilon, rng)
        world, bundle, reward, done = env.step(action)
        frames += 1
        if done:
            return frames, reward > 0
    return frames, False


def evaluate_policy(pg, cfg: Config, eval_ordinal: int,
                    frames_budget: Optional[int] = None) -> float:
    """Success rate over whole episodes until the frame budget is consumed."""
    budget = frames_budget if frames_budget is not None else cfg.eval_frames
    workers = max(1, cfg.eval_workers)
    frames = successes = episodes = 0
    k = 0

    def episode(i: int):
        return run_eval_episode(pg, cfg, cfg.task,
                                (cfg.seed, 7919, eval_ordinal, i))

    if workers == 1:
        while frames < budget:
            n, ok = episode(k)
            frames += n
            episodes += 1
            successes += int(ok)
            k += 1
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            while frames < budget:
                results = list(pool.map(episode, range(k, k + workers)))
                for n, ok in results:
                    frames += n
                    episodes += 1
                    successes += int(ok)
                    if frames >= budget:
                        break
                k += workers
    return successes / episodes if episodes else 0.0


# ---------------------------------------------------------------------------
# trainer


class Trainer:
    def __init__(self, cfg: Config):
        validate(cfg)
        self.cfg = cfg
        self.oracle = _is_oracle(cfg)
        self.group = init_params(cfg, cfg.seed)
        if cfg.float32:
            self.group = convert_group_dtype(self.group, np.float32)
        self.group.pack()
        self.target = self.group.snapshot()
        self.rng = np.random.default_rng(
            np.random.SeedSequence([cfg.seed, 11]))
        self.store = ObsStore()
        self.replay = ReplayBuffer(cfg.buffer_size)
        self.sil = SilBuffer(cfg.sil_buffer_size)
        self.pool = NegativePool(cfg.pool_cap) if cfg.aux == "load" else None
        self.env_steps = 0
        self.episodes = 0
        self.recent_success: deque[int] = deque(maxlen=100)

    def _episode_seed(self) -> int:
        ss = np.random.SeedSequence([self.cfg.seed, 1000003, self.episodes])
        return int(ss.generate_state(1)[0])

    def _observe_rows(self, world, bundle):
        if not self.oracle:
            return None
        return oracle_features(world, bundle.patch_ids,
                               self.cfg.aux == "oracle_category_only")

    def select_training_action(self, obs_dict: dict) -> ActionSpec:
        stacked = stack_observations([obs_dict], self.oracle)
        q_int, q_nav = np_forward_batch(self.group, stacked, self.cfg)[0]
        eps = epsilon_at(self.env_steps, self.cfg.anneal_steps)
        return select_action(q_int, q_nav, eps, self.rng)

    def train_step(self, batch: list[Transition]) -> tuple[float, float]:
        cfg = self.cfg
        prep = prepare_batch(batch, self.store, self.group, self.target,
                             cfg, self.rng)
        leaves = self.group.leaves()
        total, l_dqn, l_aux = loss_from_leaves(leaves, prep, cfg, self.pool)
        dqn_val = l_dqn.item()
        aux_val = l_aux.item() if l_aux is not None else 0.0
        if not np.isfinite(total.item()):
            raise TrainingDivergedError(
                f"non-finite loss at env step {self.env_steps}: "
                f"dqn={dqn_val} aux={aux_val}; episodes {prep.episode_ids}",
                prep.episode_ids)
        tc.backward(total)
        grads = self.group.grads_from(leaves)
        grads, _ = tc.clip_global_norm(grads, cfg.clip_norm)
        tc.adam_step(self.group, grads, cfg.lr)
        self.target.soft_update_from(self.group, cfg.target_tau)
        if self.pool is not None and prep.pool_rows is not None:
            self.pool.push(prep.pool_rows)
        return dqn_val, aux_val

    def run(self) -> dict:
        cfg = self.cfg
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_config(cfg, out / "config.json")
        csv_path = out / "metrics.csv"
        t0 = time.perf_counter()
        dqn_sum = aux_sum = 0.0
        loss_count = 0
        eval_ordinal = 0

        def csv_row(step: int, eval_sr: float) -> str:
            train_sr = (sum(self.recent_success) / len(self.recent_success)
                        if self.recent_success else 0.0)
            mean_dqn = dqn_sum / loss_count if loss_count else 0.0
            mean_aux = aux_sum / loss_count if loss_count else 0.0
            secs = (time.perf_counter() - t0 if cfg.record_wall_time else 0.0)
            eps = epsilon_at(step, cfg.anneal_steps)
            return (f"{step},{self.episodes},{train_sr:.4f},{eval_sr:.4f},"
                    f"{mean_dqn:.6g},{mean_aux:.6g},{eps:.4f},{secs:.3f}")

        lines = [CSV_HEADER]
        eval_sr = evaluate_policy(self.group.snapshot(), cfg, eval_ordinal)
        eval_ordinal += 1
        lines.append(csv_row(0, eval_sr))
        csv_path.write_text("\n".join(lines) + "\n")

        env = KitchenEnv(cfg.task, 0)
        env.seed = self._episode_seed()
        world, bundle = env.reset()
        t_ref = self.store.add(bundle, self._observe_rows(world, bundle))
        episode_buf: list[Transition] = []
        last_eval = eval_sr

        while self.env_steps < cfg.budget:
            obs_dict = self.store.decode(t_ref, self.oracle)
            action = self.select_training_action(obs_dict)
            world, bundle, reward, done = env.step(action)
            p_ref = self.store.add(bundle, self._observe_rows(world, bundle))
            tr = Transition(t_ref, action, reward, p_ref, done,
                            self.episodes)
            self.replay.push(tr)
            episode_buf.append(tr)
            self.env_steps += 1

            if done:
                success = reward > 0
                self.recent_success.append(int(success))
                if success:
                    self.sil.push_episode(episode_buf)
                episode_buf = []
                self.episodes += 1
                env.seed = self._episode_seed()
                world, bundle = env.reset()
                t_ref = self.store.add(bundle,
                                       self._observe_rows(world, bundle))
            else:
                t_ref = p_ref

            if (self.env_steps >= cfg.warmup
                    and self.env_steps % cfg.train_every == 0):
                batch = sample_mixed(self.replay, self.sil, cfg.batch_size,
                                     cfg.sil_prob, self.rng)
                dqn_val, aux_val = self.train_step(batch)
                dqn_sum += dqn_val
                aux_sum += aux_val
                loss_count += 1

            if self.env_steps % cfg.eval_every == 0:
                eval_sr = evaluate_policy(self.group.snapshot(), cfg,
                                          eval_ordinal)
                eval_ordinal += 1
                last_eval = eval_sr
                lines.append(csv_row(self.env_steps, eval_sr))
                csv_path.write_text("\n".join(lines) + "\n")
                dqn_sum = aux_sum = 0.0
                loss_count = 0
            if self.env_steps % cfg.checkpoint_every == 0:
                tc.save_checkpoint(
                    out / f"params_{self.env_steps:06d}.ckpt", self.group)

        tc.save_checkpoint(out / "params_final.ckpt", self.group)
        return {"steps": self.env_steps, "episodes": self.episodes,
                "eval_sr": last_eval, "metrics": str(csv_path)}


def run_training(cfg: Config) -> dict:
    return Trainer(cfg).run()
