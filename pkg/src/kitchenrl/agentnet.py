"""Attentive object-DQN: encoders, inter-object attention, Q-heads, acting.

Two forward implementations share the same parameters: a graph version used
for training (tensorcore autodiff) and a plain-numpy version used for acting,
evaluation, and TD-target computation (no gradients needed there).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import tensorcore as tc
from .config import Config
from .kitchensim import ActionSpec

ORACLE_DIM = 91
NEG_MASK = -1e30


def init_params(cfg: Config, seed: int) -> tc.ParamGroup:
    """Fresh parameter group; layout depends only on (cfg dims, aux mode)."""
    rng = np.random.default_rng(seed)
    pg = tc.ParamGroup()

    def dense(name, fan_in, fan_out, out_layer=False):
        scale = math.sqrt(1.0 / fan_in) if out_layer else math.sqrt(2.0 / fan_in)
        pg.add(f"{name}_w", rng.standard_normal((fan_in, fan_out)) * scale)
        pg.add(f"{name}_b", np.zeros((1, fan_out)))

    d_o, d_k, d_a, hid = cfg.d_o, cfg.d_k, cfg.d_a, cfg.hidden
    d_kap = cfg.d_kappa
    oracle = cfg.aux in ("oracle", "oracle_category_only")

    if oracle:
        pg.add("orc_w", rng.standard_normal((ORACLE_DIM, d_o))
               * math.sqrt(1.0 / ORACLE_DIM))
    else:
        dense("enc_o1", 256, hid)
        dense("enc_o2", hid, d_o, out_layer=True)
    dense("enc_e1", 1024, hid)
    dense("enc_e2", hid, cfg.d_ego, out_layer=True)
    dense("enc_l1", 6, 32)
    dense("enc_l2", 32, cfg.d_loc, out_layer=True)
    pg.add("att_wq_o", rng.standard_normal((d_o, d_k)) * math.sqrt(1.0 / d_o))
    pg.add("att_wk", rng.standard_normal((d_o, d_k)) * math.sqrt(1.0 / d_o))
    pg.add("att_wq_c", rng.standard_normal((d_kap, d_k)) * math.sqrt(1.0 / d_kap))
    pg.add("null_obj", rng.standard_normal((1, d_o)) * 0.1)
    dense("qint1", 2 * d_o + d_kap, hid)
    dense("qint2", hid, hid)
    dense("qint3", hid, 8, out_layer=True)
    dense("qnav1", d_kap + d_o, hid)
    dense("qnav2", hid, hid)
    dense("qnav3", hid, 8, out_layer=True)

    if cfg.aux == "load":
        dense("model1", 2 * d_o + d_a, hid)
        dense("model2", hid, d_o, out_layer=True)
        pg.add("act_wo", rng.standard_normal((d_o, d_a)) * math.sqrt(1.0 / d_o))
        pg.add("act_wb", rng.standard_normal((8, d_a)) * math.sqrt(1.0 / 8))
    elif cfg.aux == "cobra":
        dense("logstd", hid, d_o, out_layer=True)
        dense("rec1", d_o, hid)
        dense("rec2", hid, 256, out_layer=True)
        dense("pred1", d_o, hid)
        dense("pred2", hid, d_o, out_layer=True)
    return pg


# ---------------------------------------------------------------------------
# graph forward (training)


def g_dense2(leaves, name1, name2, x: tc.Tensor) -> tc.Tensor:
    h = tc.leaky_relu(tc.linear(x, leaves[f"{name1}_w"], leaves[f"{name1}_b"]))
    return tc.linear(h, leaves[f"{name2}_w"], leaves[f"{name2}_b"])


def g_dense2_hidden(leaves, name1, name2, x: tc.Tensor
                    ) -> tuple[tc.Tensor, tc.Tensor]:
    h = tc.leaky_relu(tc.linear(x, leaves[f"{name1}_w"], leaves[f"{name1}_b"]))
    return tc.linear(h, leaves[f"{name2}_w"], leaves[f"{name2}_b"]), h


def g_dense3(leaves, stem, x: tc.Tensor) -> tc.Tensor:
    h1 = tc.leaky_relu(tc.linear(x, leaves[f"{stem}1_w"], leaves[f"{stem}1_b"]))
    h2 = tc.leaky_relu(tc.linear(h1, leaves[f"{stem}2_w"], leaves[f"{stem}2_b"]))
    return tc.linear(h2, leaves[f"{stem}3_w"], leaves[f"{stem}3_b"])


def g_encode_objects(leaves, patches: np.ndarray, oracle: bool) -> tc.Tensor:
    x = tc.constant(patches)
    if oracle:
        return tc.matmul(x, leaves["orc_w"])
    return g_dense2(leaves, "enc_o1", "enc_o2", x)


def g_context(leaves, egos: np.ndarray, locs: np.ndarray) -> tc.Tensor:
    ze = g_dense2(leaves, "enc_e1", "enc_e2", tc.constant(egos))
    zl = g_dense2(leaves, "enc_l1", "enc_l2", tc.constant(locs))
    return tc.concat_cols([ze, zl])


def segment_masks(seg_of_row: np.ndarray, n_segments: int
                  ) -> tuple[np.ndarray, np.ndarray]:
    """(row-vs-row additive mask, segment-vs-row additive mask)."""
    same = seg_of_row[:, None] == seg_of_row[None, :]
    row_mask = np.where(same, 0.0, NEG_MASK)
    seg_rows = np.arange(n_segments)[:, None] == seg_of_row[None, :]
    seg_mask = np.where(seg_rows, 0.0, NEG_MASK)
    return row_mask, seg_mask


def g_attend_objects(leaves, z_all: tc.Tensor, row_mask: np.ndarray,
                     d_k: int, mode: str) -> tc.Tensor:
    """Block-diagonal object-mode attention output for every row."""
    dt = z_all.data.dtype
    row_mask = row_mask.astype(dt, copy=False)
    if mode == "none":
        return tc.constant(np.zeros_like(z_all.data))
    if mode == "average":
        w = np.where(row_mask == 0.0, dt.type(1.0), dt.type(0.0))
        w /= w.sum(axis=1, keepdims=True)
        return tc.matmul(tc.constant(w), z_all)
    q = tc.matmul(z_all, leaves["att_wq_o"])
    k = tc.matmul(z_all, leaves["att_wk"])
    logits = tc.scale(tc.matmul(q, tc.transpose(k)), 1.0 / math.sqrt(d_k))
    weights = tc.softmax_rows(tc.add(logits, tc.constant(row_mask)))
    return tc.matmul(weights, z_all)


def g_attend_context(leaves, z_kappa: tc.Tensor, z_all: tc.Tensor,
                     seg_mask: np.ndarray, d_k: int, mode: str) -> tc.Tensor:
    dt = z_all.data.dtype
    seg_mask = seg_mask.astype(dt, copy=False)
    if mode == "none":
        rows = z_kappa.data.shape[0]
        return tc.constant(np.zeros((rows, z_all.data.shape[1]), dtype=dt))
    if mode == "average":
        w = np.where(seg_mask == 0.0, dt.type(1.0), dt.type(0.0))
        w /= w.sum(axis=1, keepdims=True)
        return tc.matmul(tc.constant(w), z_all)
    q = tc.matmul(z_kappa, leaves["att_wq_c"])
    k = tc.matmul(z_all, leaves["att_wk"])
    logits = tc.scale(tc.matmul(q, tc.transpose(k)), 1.0 / math.sqrt(d_k))
    weights = tc.softmax_rows(tc.add(logits, tc.constant(seg_mask)))
    return tc.matmul(weights, z_all)


# ---------------------------------------------------------------------------
# numpy forward (acting / evaluation / TD targets)


def _lrelu(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, x, 0.01 * x)


def _np_dense2(pg, name1, name2, x):
    h = _lrelu(x @ pg[f"{name1}_w"] + pg[f"{name1}_b"])
    return h @ pg[f"{name2}_w"] + pg[f"{name2}_b"]


def _np_dense3(pg, stem, x):
    h1 = _lrelu(x @ pg[f"{stem}1_w"] + pg[f"{stem}1_b"])
    h2 = _lrelu(h1 @ pg[f"{stem}2_w"] + pg[f"{stem}2_b"])
    return h2 @ pg[f"{stem}3_w"] + pg[f"{stem}3_b"]


def _np_softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class StackedObs:
    """A batch of observations flattened for the numpy forward pass."""
    unique_inputs: np.ndarray     # (u, 256) patches or (u, 91) oracle rows
    row_to_unique: np.ndarray     # (N,) index into unique_inputs, u = null row
    seg_counts: np.ndarray        # (B,) real-object counts (0 allowed)
    egos: np.ndarray              # (B, 1024)
    locs: np.ndarray              # (B, 6)


def stack_observations(obs_arrays: list[dict], oracle: bool) -> StackedObs:
    """Deduplicate per-object inputs across a list of observation dicts."""
    key_to_idx: dict[bytes, int] = {}
    uniques: list[np.ndarray] = []
    row_to_unique: list[int] = []
    seg_counts = []
    egos = []
    locs = []
    field = "orc" if oracle else "pat"
    for obs in obs_arrays:
        mat = obs[field]
        seg_counts.append(mat.shape[0])
        for i in range(mat.shape[0]):
            row = mat[i]
            key = row.tobytes()
            idx = key_to_idx.get(key)
            if idx is None:
                idx = len(uniques)
                key_to_idx[key] = idx
                uniques.append(row)
            row_to_unique.append(idx)
        egos.append(obs["ego"])
        locs.append(obs["loc"])
    width = ORACLE_DIM if oracle else 256
    uni = np.stack(uniques) if uniques else np.zeros((0, width))
    return StackedObs(uni, np.asarray(row_to_unique, dtype=np.intp),
                      np.asarray(seg_counts, dtype=np.intp),
                      np.stack(egos), np.stack(locs))


def np_encode_objects(pg, inputs: np.ndarray, oracle: bool) -> np.ndarray:
    dt = pg["null_obj"].dtype
    if inputs.shape[0] == 0:
        return np.zeros((0, pg["null_obj"].shape[1]), dtype=dt)
    x = inputs.astype(dt, copy=False)
    if oracle:
        return x @ pg["orc_w"]
    return _np_dense2(pg, "enc_o1", "enc_o2", x)


def stacked_layout(stacked: StackedObs, null_idx: int
                   ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(row->input index, row->segment, row is a real object) with one
    injected null row per empty observation."""
    rows, seg, real = [], [], []
    off = 0
    for j, n in enumerate(stacked.seg_counts):
        n = int(n)
        if n == 0:
            rows.append(null_idx)
            seg.append(j)
            real.append(False)
        else:
            rows.extend(int(i) for i in stacked.row_to_unique[off:off + n])
            seg.extend([j] * n)
            real.extend([True] * n)
            off += n
    return (np.asarray(rows, dtype=np.intp), np.asarray(seg, dtype=np.intp),
            np.asarray(real, dtype=bool))


def np_forward_batch(pg, stacked: StackedObs, cfg: Config
                     ) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per-observation (q_int n x 8, q_nav 8) under the policy ablation mode.

    One block-diagonal masked attention pass covers the whole batch.
    """
    oracle = cfg.aux in ("oracle", "oracle_category_only")
    null_row = pg["null_obj"]
    dt = null_row.dtype
    z_unique = np_encode_objects(pg, stacked.unique_inputs, oracle)
    ze = _np_dense2(pg, "enc_e1", "enc_e2", stacked.egos.astype(dt, copy=False))
    zl = _np_dense2(pg, "enc_l1", "enc_l2", stacked.locs.astype(dt, copy=False))
    z_kappa = np.concatenate([ze, zl], axis=1)

    b = len(stacked.seg_counts)
    rows, seg, real = stacked_layout(stacked, z_unique.shape[0])
    z_ext = np.concatenate([z_unique, null_row.astype(dt, copy=False)])
    z_rows = z_ext[rows]
    same = seg[:, None] == seg[None, :]
    seg_rows = np.arange(b)[:, None] == seg[None, :]

    mode = cfg.attention_policy
    sqrt_dk = math.sqrt(cfg.d_k)
    if mode == "none":
        att = np.zeros_like(z_rows)
        att_c = np.zeros((b, z_rows.shape[1]), dtype=dt)
    elif mode == "average":
        w = same.astype(dt)
        w /= w.sum(axis=1, keepdims=True)
        att = w @ z_rows
        wc = seg_rows.astype(dt)
        wc /= wc.sum(axis=1, keepdims=True)
        att_c = wc @ z_rows
    else:
        keys = z_rows @ pg["att_wk"]
        logits = (z_rows @ pg["att_wq_o"]) @ keys.T / sqrt_dk
        logits[~same] = NEG_MASK
        att = _np_softmax(logits) @ z_rows
        logits_c = (z_kappa @ pg["att_wq_c"]) @ keys.T / sqrt_dk
        logits_c[~seg_rows] = NEG_MASK
        att_c = _np_softmax(logits_c) @ z_rows

    q_nav_all = _np_dense3(pg, "qnav",
                           np.concatenate([z_kappa, att_c], axis=1))
    if real.any():
        rr = np.nonzero(real)[0]
        xi = np.concatenate([z_rows[rr], att[rr], z_kappa[seg[rr]]], axis=1)
        q_int_all = _np_dense3(pg, "qint", xi)
    else:
        q_int_all = np.zeros((0, 8), dtype=dt)
    out = []
    off = 0
    for j, n in enumerate(stacked.seg_counts):
        n = int(n)
        out.append((q_int_all[off:off + n], q_nav_all[j]))
        off += n
    return out


def flat_argmax(q_int: np.ndarray, q_nav: np.ndarray) -> int:
    flat = np.concatenate([q_nav.ravel(), q_int.ravel()])
    return int(np.argmax(flat))


def flat_q(q_int: np.ndarray, q_nav: np.ndarray, idx: int) -> float:
    flat = np.concatenate([q_nav.ravel(), q_int.ravel()])
    return float(flat[idx])


def flat_to_action(idx: int) -> ActionSpec:
    if idx < 8:
        return ActionSpec("nav", idx)
    rest = idx - 8
    return ActionSpec("interact", rest % 8, rest // 8)


def action_to_flat(action: ActionSpec) -> int:
    if action.kind == "nav":
        return action.base
    return 8 + action.patch_index * 8 + action.base


def select_action(q_int: np.ndarray, q_nav: np.ndarray, epsilon: float,
                  rng: np.random.Generator) -> ActionSpec:
    n = q_int.shape[0]
    total = 8 + 8 * n
    if epsilon > 0 and rng.random() < epsilon:
        return flat_to_action(int(rng.integers(0, total)))
    return flat_to_action(flat_argmax(q_int, q_nav))
