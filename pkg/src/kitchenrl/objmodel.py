"""Auxiliary representation objectives and the ground-truth oracle encoding.

The contrastive object-model, the OCN and COBRA baselines, and oracle feature
extraction. Loss builders operate on graph tensors assembled by replaytrain.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import tensorcore as tc
from .agentnet import NEG_MASK, g_dense2
from .config import Config
from .kitchensim import AGENT_ID, NUM_CATEGORIES, WorldState

ORACLE_DIM = 3 * NUM_CATEGORIES + 10 + 3  # 91
_DIST_NORM = 12.0

# offsets into the oracle feature vector
_OFF_CONTAINED = NUM_CATEGORIES
_OFF_CONTAINS = 2 * NUM_CATEGORIES
_OFF_SCALARS = 3 * NUM_CATEGORIES
_OFF_TEMP = _OFF_SCALARS + 10


def oracle_features(world: WorldState, ids, category_only: bool = False
                    ) -> np.ndarray:
    """Per-object 14-feature block (expanded to 91 dims with one-hots)."""
    out = np.zeros((len(ids), ORACLE_DIM), dtype=np.float64)
    acol, arow, _, _ = world.agent
    for r, oid in enumerate(ids):
        obj = world.objects.get(oid)
        if obj is None:
            raise KeyError(f"object id {oid} not in world")
        row = out[r]
        row[int(obj.category)] = 1.0
        dc, dr = obj.cell[0] - acol, obj.cell[1] - arow
        row[_OFF_SCALARS + 0] = math.sqrt(dc * dc + dr * dr) / _DIST_NORM
        row[_OFF_SCALARS + 1] = 1.0  # visible by construction
        if category_only:
            continue
        if obj.parent is not None and obj.parent != AGENT_ID:
            row[_OFF_CONTAINED + int(world.objects[obj.parent].category)] = 1.0
        child = None
        for o in world.objects.values():
            if o.parent == oid and (child is None or o.id < child.id):
                child = o
        if child is not None:
            row[_OFF_CONTAINS + int(child.category)] = 1.0
        row[_OFF_SCALARS + 2] = float(obj.is_on)
        # broken (+3) and dirty (+5) do not exist here; stay 0
        row[_OFF_SCALARS + 4] = float(obj.is_filled)
        row[_OFF_SCALARS + 6] = float(obj.is_cooked)
        row[_OFF_SCALARS + 7] = float(obj.is_sliced)
        row[_OFF_SCALARS + 8] = float(obj.is_open)
        row[_OFF_SCALARS + 9] = float(obj.is_picked_up)
        row[_OFF_TEMP + int(obj.temperature)] = 1.0
    return out


def _guarded_norms(x: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    return np.maximum(np.sqrt((x * x).sum(axis=1, keepdims=True)), eps)


def match_positive(z_t: np.ndarray, z_next: np.ndarray) -> np.ndarray:
    """Cosine argmax of each time-t row against next-step rows; ties -> lowest."""
    if z_next.shape[0] == 0:
        raise ValueError("no next-step candidates")
    a = z_t / _guarded_norms(z_t)
    b = z_next / _guarded_norms(z_next)
    return np.argmax(a @ b.T, axis=1)


def match_nearest_l2(z_t: np.ndarray, z_next: np.ndarray) -> np.ndarray:
    if z_next.shape[0] == 0:
        raise ValueError("no next-step candidates")
    d2 = ((z_t[:, None, :] - z_next[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


class NegativePool:
    """FIFO pool of recent (detached) object encodings, capacity bounded."""

    def __init__(self, cap: int = 85):
        self.cap = cap
        self.rows: list[np.ndarray] = []

    def push(self, matrix: np.ndarray) -> None:
        for row in matrix:
            self.rows.append(np.array(row))
            if len(self.rows) > self.cap:
                self.rows.pop(0)

    def as_array(self, dim: int) -> np.ndarray:
        if not self.rows:
            return np.zeros((0, dim))
        return np.stack(self.rows)

    def __len__(self) -> int:
        return len(self.rows)


def sample_negative_indices(n_candidates: int, exclude: int, k: int,
                            rng: np.random.Generator) -> np.ndarray:
    """k indices into [0, n_candidates) avoiding `exclude`, no replacement."""
    if n_candidates <= 0 or (n_candidates == 1 and exclude == 0):
        raise ValueError("empty negative candidate set")
    avail = n_candidates - (1 if 0 <= exclude < n_candidates else 0)
    if avail >= k:
        picks = rng.choice(n_candidates - 1 if 0 <= exclude < n_candidates
                           else n_candidates, size=k, replace=False)
        if 0 <= exclude < n_candidates:
            picks = np.where(picks >= exclude, picks + 1, picks)
        return picks
    warnings.warn("negative candidates fewer than K; sampling with replacement")
    picks = rng.integers(0, n_candidates, size=k)
    mask = picks == exclude
    while mask.any():
        picks[mask] = rng.integers(0, n_candidates, size=int(mask.sum()))
        mask = picks == exclude
    return picks


def sample_negative_matrix(n_candidates: int, excludes: np.ndarray, k: int,
                           rng: np.random.Generator) -> np.ndarray:
    """Per-row negatives for all anchors at once via the random-keys method;
    equivalent in distribution to per-anchor sample_negative_indices."""
    n_anchors = len(excludes)
    avail = n_candidates - (0 <= excludes).astype(int) * (
        excludes < n_candidates).astype(int)
    if np.all(avail >= k):
        keys = rng.random((n_anchors, n_candidates))
        valid = (0 <= excludes) & (excludes < n_candidates)
        keys[np.nonzero(valid)[0], excludes[valid]] = 2.0
        return np.argpartition(keys, k - 1, axis=1)[:, :k]
    out = np.empty((n_anchors, k), dtype=np.intp)
    for i, ex in enumerate(excludes):
        out[i] = sample_negative_indices(n_candidates, int(ex), k, rng)
    return out


def _onehot(indices: np.ndarray, width: int) -> np.ndarray:
    out = np.zeros((len(indices), width))
    out[np.arange(len(indices)), indices] = 1.0
    return out


@dataclass
class ModelBatchIndex:
    """Index bookkeeping shared by the auxiliary losses.

    Row layouts follow the transition-grouped object rows produced for the
    training graph; `seg_of_row` maps each Z_t row to its transition.
    """
    seg_of_row: np.ndarray        # (N_t,)
    seg_of_row_next: np.ndarray   # (N_p,)
    real_row_mask: np.ndarray     # (N_t,) False on injected null rows
    real_row_mask_next: np.ndarray
    base_onehots: np.ndarray      # (B, 8) chosen base action per transition
    chosen_ext_idx: np.ndarray    # (B,) row into Z_ext for the acted-on object


def action_encode_graph(leaves, z_chosen: tc.Tensor,
                        base_onehots: np.ndarray) -> tc.Tensor:
    binary = (base_onehots == 0.0) | (base_onehots == 1.0)
    if not (np.all(binary) and np.all(base_onehots.sum(axis=1) == 1.0)):
        raise ValueError("action base vectors must be one-hot")
    left = tc.matmul(z_chosen, leaves["act_wo"])
    right = tc.matmul(tc.constant(base_onehots), leaves["act_wb"])
    return tc.mul(left, right)


def g_model_prediction(leaves, z_t_all: tc.Tensor, att_model: tc.Tensor,
                       z_a: tc.Tensor, seg_of_row: np.ndarray) -> tc.Tensor:
    z_a_rows = tc.gather_rows(z_a, seg_of_row)
    inp = tc.concat_cols([z_t_all, att_model, z_a_rows])
    return g_dense2(leaves, "model1", "model2", inp)


def _g_zero_like(anchor: tc.Tensor) -> tc.Tensor:
    return tc.sum_all(tc.mul(anchor, tc.constant(np.zeros_like(anchor.data))))


def g_load_loss(leaves, cfg: Config, z_ext: tc.Tensor, z_t_all: tc.Tensor,
                att_model: tc.Tensor, z_p_all: tc.Tensor,
                idx: ModelBatchIndex, pool: Optional[NegativePool],
                rng: np.random.Generator, batch_size: int) -> tc.Tensor:
    """Contrastive next-encoding classification, averaged over transitions.

    Anchors are the real visible objects at t; an empty next frame supplies
    the null embedding as its positive so disappearance is still predicted.
    """
    real_t = np.nonzero(idx.real_row_mask)[0]
    if real_t.size == 0:
        return _g_zero_like(z_t_all)
    real_p = np.nonzero(idx.real_row_mask_next)[0]
    seg_anchor = idx.seg_of_row[real_t]

    z_chosen = tc.gather_rows(z_ext, idx.chosen_ext_idx)
    z_a = action_encode_graph(leaves, z_chosen, idx.base_onehots)
    anchors = tc.gather_rows(z_t_all, real_t)
    inp = tc.concat_cols([anchors, tc.gather_rows(att_model, real_t),
                          tc.gather_rows(z_a, seg_anchor)])
    d = g_dense2(leaves, "model1", "model2", inp)

    # positive per anchor: cosine match among its transition's next rows
    match = np.zeros(real_t.size, dtype=np.intp)
    for j in range(batch_size):
        a_rows = np.nonzero(seg_anchor == j)[0]
        if a_rows.size == 0:
            continue
        p_rows = np.nonzero((idx.seg_of_row_next == j)
                            & idx.real_row_mask_next)[0]
        if p_rows.size == 0:
            p_rows = np.nonzero(idx.seg_of_row_next == j)[0]  # the null row
        local = match_positive(z_t_all.data[real_t[a_rows]],
                               z_p_all.data[p_rows])
        match[a_rows] = p_rows[local]
    pos = tc.gather_rows(z_p_all, match)
    pos_logit = tc.scale(tc.rowwise_dot(d, pos), 1.0 / cfg.tau_model)

    # negatives drawn from the real in-batch encodings, pool as top-up
    k = cfg.k_negatives
    n_rt, n_rp = real_t.size, real_p.size
    parts = [anchors, tc.gather_rows(z_p_all, real_p)]
    n_cand = n_rt + n_rp
    if pool is not None and n_cand - 1 < k and len(pool) > 0:
        pool_arr = pool.as_array(cfg.d_o).astype(z_t_all.data.dtype)
        parts.append(tc.constant(pool_arr))
        n_cand += pool_arr.shape[0]
    cand = tc.concat_rows(parts)
    rank_p = {int(r): n_rt + i for i, r in enumerate(real_p)}
    excludes = np.array([rank_p.get(int(m), -1) for m in match], dtype=np.intp)
    neg_idx = sample_negative_matrix(n_cand, excludes, k, rng)
    negs = tc.gather_rows(cand, neg_idx.reshape(-1))
    d_rep = tc.gather_rows(d, np.repeat(np.arange(real_t.size), k))
    neg_logits = tc.reshape(
        tc.scale(tc.rowwise_dot(d_rep, negs), 1.0 / cfg.tau_model),
        real_t.size, k)
    logits = tc.concat_cols([pos_logit, neg_logits])
    ls = tc.log_softmax_rows(logits)
    first = _onehot(np.zeros(real_t.size, dtype=np.intp), k + 1)
    picked = tc.rowwise_dot(ls, tc.constant(first.astype(ls.data.dtype)))
    return tc.scale(tc.sum_all(picked), -1.0 / batch_size)


def g_ocn_loss(cfg: Config, z_t_all: tc.Tensor, z_p_all: tc.Tensor,
               idx: ModelBatchIndex, batch_size: int) -> tc.Tensor:
    """N-tuplet softmax over same-transition next-step encodings."""
    next_counts = np.bincount(
        idx.seg_of_row_next[idx.real_row_mask_next], minlength=batch_size)
    keep = idx.real_row_mask & (next_counts[idx.seg_of_row] >= 2)
    keep_rows = np.nonzero(keep)[0]
    if keep_rows.size == 0:
        return _g_zero_like(z_t_all)
    n_p = z_p_all.data.shape[0]
    dt = z_p_all.data.dtype
    same = (idx.seg_of_row[keep_rows, None] == idx.seg_of_row_next[None, :])
    same &= idx.real_row_mask_next[None, :]
    add_mask = np.where(same, 0.0, NEG_MASK).astype(dt)

    match = np.zeros(len(keep_rows), dtype=np.intp)
    for r, row in enumerate(keep_rows):
        cand = np.nonzero(same[r])[0]
        local = match_nearest_l2(z_t_all.data[row:row + 1], z_p_all.data[cand])
        match[r] = cand[local[0]]

    anchors = tc.gather_rows(z_t_all, keep_rows)
    logits = tc.scale(tc.matmul(anchors, tc.transpose(z_p_all)),
                      1.0 / cfg.tau_ocn)
    ls = tc.log_softmax_rows(tc.add(logits, tc.constant(add_mask)))
    picked = tc.rowwise_dot(ls, tc.constant(_onehot(match, n_p).astype(dt)))
    return tc.scale(tc.sum_all(picked), -1.0 / batch_size)


def _g_clamp(x: tc.Tensor, lo: float, hi: float) -> tc.Tensor:
    # min(max(x, lo), hi) via exact rectifiers (slope-0 leaky relus)
    above = tc.add(tc.leaky_relu(tc.sub(x, tc.constant(
        np.full_like(x.data, lo))), 0.0), tc.constant(np.full_like(x.data, lo)))
    return tc.sub(tc.constant(np.full_like(x.data, hi)),
                  tc.leaky_relu(tc.sub(tc.constant(np.full_like(x.data, hi)),
                                       above), 0.0))


@dataclass
class CobraBatch:
    patches_unique: np.ndarray     # (u, 256)
    row_to_unique: np.ndarray      # real t rows -> unique index (recon + KL)
    pred_row_to_unique: np.ndarray  # rows with a real next-step match
    target_patches: np.ndarray     # (len(pred_rows), 256) matched next patches
    noise: np.ndarray              # (u, d_o) reparameterization draws


def g_cobra_loss(leaves, cfg: Config, batch: CobraBatch, mu: tc.Tensor,
                 hidden: tc.Tensor, batch_size: int) -> tc.Tensor:
    """VAE recon + latent next-step prediction + KL; mu/hidden come from the
    shared encoder pass over `batch.patches_unique` (policy reuses mu)."""
    x = tc.constant(batch.patches_unique)
    logstd = _g_clamp(tc.linear(hidden, leaves["logstd_w"], leaves["logstd_b"]),
                      -5.0, 2.0)
    sigma = tc.exp(logstd)
    z = tc.add(mu, tc.mul(sigma, tc.constant(batch.noise)))

    recon = g_dense2(leaves, "rec1", "rec2", z)
    rec_diff = tc.sub(recon, x)
    rec_err = tc.rowwise_dot(rec_diff, rec_diff)

    ones = tc.constant(np.ones_like(mu.data))
    sigma2 = tc.exp(tc.scale(logstd, 2.0))
    kl_terms = tc.sub(tc.sub(tc.add(tc.mul(mu, mu), sigma2), ones),
                      tc.scale(logstd, 2.0))
    kl_rows = tc.scale(tc.rowwise_dot(kl_terms, ones), 0.5)

    total = tc.add(
        tc.sum_all(tc.gather_rows(rec_err, batch.row_to_unique)),
        tc.scale(tc.sum_all(tc.gather_rows(kl_rows, batch.row_to_unique)),
                 cfg.beta_kl))
    if batch.pred_row_to_unique.size:
        pred = g_dense2(leaves, "rec1", "rec2",
                        g_dense2(leaves, "pred1", "pred2", z))
        pred_rows = tc.gather_rows(pred, batch.pred_row_to_unique)
        pred_diff = tc.sub(pred_rows, tc.constant(batch.target_patches))
        total = tc.add(total, tc.sum_all(tc.rowwise_dot(pred_diff, pred_diff)))
    return tc.scale(total, 1.0 / batch_size)


def gaussian_kl(mu: np.ndarray, sigma: np.ndarray) -> float:
    """Closed-form KL(N(mu, sigma^2) || N(0, I)), summed over dims."""
    return float(0.5 * (mu * mu + sigma * sigma - 1.0
                        - 2.0 * np.log(sigma)).sum())
