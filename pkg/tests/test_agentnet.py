"""Attentive object-DQN: encoders, attention contracts, Q-heads, acting."""
import math

import numpy as np
import pytest

import kitchenrl.tensorcore as tc
from kitchenrl.agentnet import (
    ORACLE_DIM,
    action_to_flat,
    flat_argmax,
    flat_q,
    flat_to_action,
    g_attend_context,
    g_attend_objects,
    g_context,
    g_dense3,
    g_encode_objects,
    init_params,
    np_encode_objects,
    np_forward_batch,
    segment_masks,
    select_action,
    stack_observations,
    stacked_layout,
)
from kitchenrl.config import Config


def leaves_with(**arrays):
    pg = tc.ParamGroup()
    for name, arr in arrays.items():
        pg.add(name, np.asarray(arr, dtype=np.float64))
    return pg.leaves()


def random_obs(rng, n, oracle=False):
    width = ORACLE_DIM if oracle else 256
    return {
        "pat" if not oracle else "orc": rng.standard_normal((n, width)),
        "ego": rng.standard_normal(1024),
        "loc": rng.standard_normal(6),
    }


# --- attention ---------------------------------------------------------------


def test_hand_computed_attention_weights():
    z = np.array([[1.0, 0.0], [0.0, 1.0]])
    leaves = leaves_with(att_wq_o=np.eye(2), att_wk=np.eye(2))
    out = g_attend_objects(leaves, tc.constant(z), np.zeros((2, 2)), 2, "full")
    w = math.exp(1 / math.sqrt(2)) / (math.exp(1 / math.sqrt(2)) + 1)
    assert out.data[0] == pytest.approx([w, 1 - w], abs=1e-12)
    assert out.data[1] == pytest.approx([1 - w, w], abs=1e-12)
    assert round(w, 4) == 0.6698


def test_singleton_attention_returns_row_exactly():
    rng = np.random.default_rng(0)
    for _ in range(20):
        z = rng.standard_normal((1, 8))
        leaves = leaves_with(att_wq_o=rng.standard_normal((8, 4)),
                             att_wk=rng.standard_normal((8, 4)))
        out = g_attend_objects(leaves, tc.constant(z), np.zeros((1, 1)), 4,
                               "full")
        assert np.array_equal(out.data, z)


def test_identical_rows_attend_to_themselves():
    rng = np.random.default_rng(1)
    p = rng.standard_normal(8)
    z = np.stack([p, p])
    leaves = leaves_with(att_wq_o=rng.standard_normal((8, 4)),
                         att_wk=rng.standard_normal((8, 4)))
    out = g_attend_objects(leaves, tc.constant(z), np.zeros((2, 2)), 4, "full")
    assert np.allclose(out.data, z, atol=1e-12)


def test_attention_output_preserves_constant_rows():
    # all rows equal v: any weights summing to 1 must return v exactly-ish
    rng = np.random.default_rng(2)
    v = rng.standard_normal(6)
    z = np.tile(v, (5, 1))
    leaves = leaves_with(att_wq_o=rng.standard_normal((6, 3)),
                         att_wk=rng.standard_normal((6, 3)))
    mask, _ = segment_masks(np.zeros(5, dtype=np.intp), 1)
    out = g_attend_objects(leaves, tc.constant(z), mask, 3, "full")
    assert np.allclose(out.data, z, atol=1e-12)


def test_block_mask_keeps_segments_separate():
    rng = np.random.default_rng(3)
    z = rng.standard_normal((4, 6))
    seg = np.array([0, 0, 1, 1], dtype=np.intp)
    mask, _ = segment_masks(seg, 2)
    leaves = leaves_with(att_wq_o=rng.standard_normal((6, 3)),
                         att_wk=rng.standard_normal((6, 3)))
    joint = g_attend_objects(leaves, tc.constant(z), mask, 3, "full")
    m0, _ = segment_masks(np.zeros(2, dtype=np.intp), 1)
    solo0 = g_attend_objects(leaves, tc.constant(z[:2]), m0, 3, "full")
    solo1 = g_attend_objects(leaves, tc.constant(z[2:]), m0, 3, "full")
    assert np.allclose(joint.data[:2], solo0.data, atol=1e-12)
    assert np.allclose(joint.data[2:], solo1.data, atol=1e-12)


def test_average_mode_is_segment_mean():
    rng = np.random.default_rng(4)
    z = rng.standard_normal((3, 5))
    mask, _ = segment_masks(np.zeros(3, dtype=np.intp), 1)
    out = g_attend_objects({}, tc.constant(z), mask, 4, "average")
    assert np.allclose(out.data, np.tile(z.mean(axis=0), (3, 1)), atol=1e-12)


def test_none_mode_is_zeros():
    rng = np.random.default_rng(5)
    z = rng.standard_normal((3, 5))
    mask, _ = segment_masks(np.zeros(3, dtype=np.intp), 1)
    out = g_attend_objects({}, tc.constant(z), mask, 4, "none")
    assert np.array_equal(out.data, np.zeros((3, 5)))


# --- permutation suites (1,000 random cases) ----------------------------------


def _forward_cases(rng, cfg, pg, n_cases):
    """Returns (q_int, q_nav) per case plus the same after permuting objects."""
    results = []
    for start in range(0, n_cases, 100):
        chunk = min(100, n_cases - start)
        obs, perms = [], []
        for _ in range(chunk):
            n = int(rng.integers(1, 7))
            obs.append(random_obs(rng, n))
            perms.append(rng.permutation(n))
        permuted = []
        for o, pi in zip(obs, perms):
            permuted.append(dict(o, pat=o["pat"][pi]))
        base = np_forward_batch(pg, stack_observations(obs, False), cfg)
        perm = np_forward_batch(pg, stack_observations(permuted, False), cfg)
        results.extend(zip(base, perm, perms))
    return results


def test_permutation_equivariance_and_invariance_1000_cases():
    cfg = Config(aux="none")
    pg = init_params(cfg, seed=42)
    rng = np.random.default_rng(7)
    for (qi, qn), (qi_p, qn_p), perm in _forward_cases(rng, cfg, pg, 1000):
        assert np.allclose(qi[perm], qi_p, atol=1e-9), "q_int must permute"
        assert np.allclose(qn, qn_p, atol=1e-9), "q_nav must be invariant"


def test_encode_objects_is_permutation_equivariant():
    cfg = Config(aux="none")
    pg = init_params(cfg, seed=3)
    rng = np.random.default_rng(8)
    x = rng.standard_normal((9, 256))
    perm = rng.permutation(9)
    z = np_encode_objects(pg, x, False)
    assert np.array_equal(np_encode_objects(pg, x[perm], False), z[perm])


def test_duplicate_patches_give_identical_q_rows():
    cfg = Config(aux="none")
    pg = init_params(cfg, seed=5)
    rng = np.random.default_rng(9)
    o = random_obs(rng, 1)
    o["pat"] = np.repeat(o["pat"], 3, axis=0)
    (qi, _), = np_forward_batch(pg, stack_observations([o], False), cfg)
    assert np.allclose(qi[0], qi[1], atol=1e-12)
    assert np.allclose(qi[0], qi[2], atol=1e-12)


# --- Q-heads and the empty observation ---------------------------------------


def test_q_shapes():
    cfg = Config(aux="none")
    pg = init_params(cfg, seed=0)
    rng = np.random.default_rng(10)
    out = np_forward_batch(
        pg, stack_observations([random_obs(rng, 3)], False), cfg)
    qi, qn = out[0]
    assert qi.shape == (3, 8) and qn.shape == (8,)


def test_empty_observation_uses_null_row():
    cfg = Config(aux="none")
    pg = init_params(cfg, seed=0)
    rng = np.random.default_rng(11)
    o = random_obs(rng, 0)
    stacked = stack_observations([o], False)
    rows, seg, real = stacked_layout(stacked, stacked.unique_inputs.shape[0])
    assert list(rows) == [0] and not real[0]
    (qi, qn), = np_forward_batch(pg, stacked, cfg)
    assert qi.shape == (0, 8)
    assert np.all(np.isfinite(qn))
    act = select_action(qi, qn, 0.0, np.random.default_rng(0))
    assert act.kind == "nav"


def test_null_row_influences_nav_attention():
    cfg = Config(aux="none")
    pg = init_params(cfg, seed=0)
    rng = np.random.default_rng(12)
    o = random_obs(rng, 0)
    (_, qn), = np_forward_batch(pg, stack_observations([o], False), cfg)
    pg2 = init_params(cfg, seed=0)
    pg2["null_obj"][:] += 1.0
    (_, qn2), = np_forward_batch(pg2, stack_observations([o], False), cfg)
    assert not np.allclose(qn, qn2)


def test_oracle_mode_parameter_layout():
    pg = init_params(Config(aux="oracle"), seed=0)
    names = {n for n, _ in pg.items()}
    assert "orc_w" in names and "enc_o1_w" not in names
    pg2 = init_params(Config(aux="none"), seed=0)
    names2 = {n for n, _ in pg2.items()}
    assert "orc_w" not in names2 and {"enc_o1_w", "enc_o2_w"} <= names2


def test_stack_observations_dedups_rows():
    rng = np.random.default_rng(13)
    row = rng.standard_normal(256)
    a = {"pat": np.stack([row, row]), "ego": rng.standard_normal(1024),
         "loc": rng.standard_normal(6)}
    b = {"pat": row[None, :], "ego": rng.standard_normal(1024),
         "loc": rng.standard_normal(6)}
    stacked = stack_observations([a, b], False)
    assert stacked.unique_inputs.shape == (1, 256)
    assert list(stacked.row_to_unique) == [0, 0, 0]
    assert list(stacked.seg_counts) == [2, 1]


# --- ablation gradients -------------------------------------------------------


def _nav_loss(cfg, pg, obs, mode):
    leaves = pg.leaves()
    stacked = stack_observations(obs, False)
    null_idx = stacked.unique_inputs.shape[0]
    rows, seg, real = stacked_layout(stacked, null_idx)
    z_unique = g_encode_objects(leaves, stacked.unique_inputs, False)
    z_ext = tc.concat_rows([z_unique, leaves["null_obj"]])
    z_all = tc.gather_rows(z_ext, rows)
    z_kappa = g_context(leaves, stacked.egos, stacked.locs)
    _, seg_mask = segment_masks(seg, len(obs))
    att_c = g_attend_context(leaves, z_kappa, z_all, seg_mask, cfg.d_k, mode)
    q_nav = g_dense3(leaves, "qnav", tc.concat_cols([z_kappa, att_c]))
    return tc.mean_all(q_nav), leaves


def test_attention_none_blocks_object_gradients_exactly():
    cfg = Config(aux="none", attention_policy="none")
    pg = init_params(cfg, seed=21)
    rng = np.random.default_rng(14)
    obs = [random_obs(rng, 4), random_obs(rng, 2)]
    loss, leaves = _nav_loss(cfg, pg, obs, "none")
    tc.backward(loss)
    for name in ("enc_o1_w", "enc_o2_w", "null_obj", "att_wq_c", "att_wk",
                 "att_wq_o"):
        g = leaves[name].grad
        assert g is None or not np.any(g), f"{name} must get no gradient"
    assert np.any(leaves["enc_e1_w"].grad)


def test_attention_average_blocks_attention_param_gradients():
    cfg = Config(aux="none", attention_policy="average")
    pg = init_params(cfg, seed=22)
    rng = np.random.default_rng(15)
    obs = [random_obs(rng, 3)]
    loss, leaves = _nav_loss(cfg, pg, obs, "average")
    tc.backward(loss)
    for name in ("att_wq_c", "att_wk", "att_wq_o"):
        g = leaves[name].grad
        assert g is None or not np.any(g), f"{name} must get no gradient"
    # objects still reach q_nav through the unweighted mean
    assert np.any(leaves["enc_o1_w"].grad)


def test_attention_full_reaches_attention_params():
    cfg = Config(aux="none", attention_policy="full")
    pg = init_params(cfg, seed=23)
    rng = np.random.default_rng(16)
    obs = [random_obs(rng, 3)]
    loss, leaves = _nav_loss(cfg, pg, obs, "full")
    tc.backward(loss)
    assert np.any(leaves["att_wq_c"].grad)
    assert np.any(leaves["att_wk"].grad)
    assert np.any(leaves["enc_o1_w"].grad)


def test_nav_q_independent_of_objects_when_ablated():
    cfg = Config(aux="none", attention_policy="none")
    pg = init_params(cfg, seed=24)
    rng = np.random.default_rng(17)
    o = random_obs(rng, 4)
    (_, qn), = np_forward_batch(pg, stack_observations([o], False), cfg)
    o2 = dict(o, pat=rng.standard_normal((6, 256)))
    (_, qn2), = np_forward_batch(pg, stack_observations([o2], False), cfg)
    assert np.array_equal(qn, qn2)


# --- action selection ---------------------------------------------------------


def test_flat_mapping_roundtrip():
    for idx in range(8 + 8 * 20):
        assert action_to_flat(flat_to_action(idx)) == idx
    assert flat_to_action(0).kind == "nav" and flat_to_action(0).base == 0
    act = flat_to_action(8 + 2 * 8 + 4)
    assert (act.kind, act.base, act.patch_index) == ("interact", 4, 2)


def test_greedy_pick_unique_max():
    qi = np.full((3, 8), -1.0)
    qi[2, 4] = 5.0  # Turn on, patch 2
    qn = np.full(8, -1.0)
    act = select_action(qi, qn, 0.0, np.random.default_rng(0))
    assert (act.kind, act.base, act.patch_index) == ("interact", 4, 2)


def test_tie_breaks_to_first_flat_index():
    qi = np.zeros((2, 8))
    qn = np.zeros(8)
    act = select_action(qi, qn, 0.0, np.random.default_rng(0))
    assert act.kind == "nav" and act.base == 0  # Move ahead


def test_positive_scaling_leaves_argmax_unchanged():
    rng = np.random.default_rng(18)
    for _ in range(200):
        qi = rng.standard_normal((int(rng.integers(1, 6)), 8))
        qn = rng.standard_normal(8)
        c = float(rng.uniform(0.1, 50.0))
        assert flat_argmax(qi, qn) == flat_argmax(c * qi, c * qn)


def test_flat_q_reads_selected_entry():
    rng = np.random.default_rng(19)
    qi = rng.standard_normal((4, 8))
    qn = rng.standard_normal(8)
    assert flat_q(qi, qn, 3) == qn[3]
    assert flat_q(qi, qn, 8 + 1 * 8 + 6) == qi[1, 6]


def test_epsilon_one_is_uniform_over_flat_actions():
    qi = np.zeros((2, 8))
    qn = np.zeros(8)
    rng = np.random.default_rng(20)
    total = 8 + 8 * 2
    counts = np.zeros(total)
    draws = 100_000
    for _ in range(draws):
        counts[action_to_flat(select_action(qi, qn, 1.0, rng))] += 1
    p = 1.0 / total
    sigma = math.sqrt(draws * p * (1 - p))
    assert np.all(np.abs(counts - draws * p) <= 3 * sigma)


def test_epsilon_zero_never_explores():
    rng = np.random.default_rng(21)
    qi = rng.standard_normal((3, 8))
    qn = rng.standard_normal(8)
    best = flat_argmax(qi, qn)
    for _ in range(50):
        assert action_to_flat(select_action(qi, qn, 0.0, rng)) == best
