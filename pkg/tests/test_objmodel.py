"""Auxiliary losses: contrastive model, OCN, COBRA, and the feature oracle."""
import math
import warnings
from dataclasses import replace

import numpy as np
import pytest

import kitchenrl.tensorcore as tc
from kitchenrl.agentnet import g_attend_objects, segment_masks
from kitchenrl.config import Config
from kitchenrl.kitchensim import AGENT_ID, NUM_CATEGORIES, Category
from kitchenrl.kitchensim.tasks import get_task
from kitchenrl.kitchensim.world import Temp
from kitchenrl.objmodel import (
    ORACLE_DIM,
    CobraBatch,
    ModelBatchIndex,
    NegativePool,
    action_encode_graph,
    g_cobra_loss,
    g_load_loss,
    g_model_prediction,
    g_ocn_loss,
    gaussian_kl,
    match_nearest_l2,
    match_positive,
    oracle_features,
    sample_negative_indices,
    sample_negative_matrix,
)

C = Category

# feature vector offsets: [category 26 | contained-in 26 | contains 26 |
#  scalars 10 | temperature 3]
OFF_IN = 26
OFF_HAS = 52
OFF_SC = 78
OFF_TEMP = 88


def leaves_with(**arrays):
    pg = tc.ParamGroup()
    for name, arr in arrays.items():
        pg.add(name, np.asarray(arr, dtype=np.float64))
    return pg.leaves()


def find_cat(world, cat):
    return next(o for o in world.objects.values() if o.category == cat)


# --- oracle features ----------------------------------------------------------


def test_oracle_feature_vector_layout():
    world = get_task("toast_bread").builder()
    bread = find_cat(world, C.BREAD_SLICED)
    feats = oracle_features(world, [bread.id])
    assert feats.shape == (1, ORACLE_DIM) == (1, 91)
    assert NUM_CATEGORIES == 26

    row = feats[0]
    cat_block = row[:26]
    assert cat_block[int(C.BREAD_SLICED)] == 1.0 and cat_block.sum() == 1.0
    # bread starts on a counter
    assert row[OFF_IN + int(C.COUNTER_TOP)] == 1.0
    assert row[OFF_IN:OFF_HAS].sum() == 1.0
    assert row[OFF_HAS:OFF_SC].sum() == 0.0  # contains nothing

    acol, arow, _, _ = world.agent
    dc, dr = bread.cell[0] - acol, bread.cell[1] - arow
    assert row[OFF_SC + 0] == pytest.approx(math.hypot(dc, dr) / 12.0)
    assert row[OFF_SC + 1] == 1.0  # visible
    # broken (+3) and dirty (+5) have no equivalent state and stay zero
    assert row[OFF_SC + 3] == 0.0 and row[OFF_SC + 5] == 0.0
    temp = row[OFF_TEMP:]
    assert temp[int(Temp.ROOM)] == 1.0 and temp.sum() == 1.0


def test_oracle_flags_follow_object_state():
    world = get_task("toast_bread").builder()
    cup = find_cat(world, C.CUP)
    cup.is_on = True
    cup.is_filled = True
    cup.is_cooked = True
    cup.is_sliced = True
    cup.is_open = True
    cup.temperature = Temp.HOT
    row = oracle_features(world, [cup.id])[0]
    for off in (2, 4, 6, 7, 8):
        assert row[OFF_SC + off] == 1.0
    assert row[OFF_SC + 9] == 0.0  # not held
    assert row[OFF_TEMP + int(Temp.HOT)] == 1.0
    assert row[OFF_TEMP:].sum() == 1.0


def test_oracle_held_object_has_no_container():
    world = get_task("toast_bread").builder()
    knife = find_cat(world, C.KNIFE)
    knife.parent = AGENT_ID
    knife.is_picked_up = True
    row = oracle_features(world, [knife.id])[0]
    assert row[OFF_SC + 9] == 1.0
    assert row[OFF_IN:OFF_HAS].sum() == 0.0


def test_oracle_contains_reports_lowest_id_child():
    world = get_task("toast_bread").builder()
    table = find_cat(world, C.DINING_TABLE)
    kids = [o for o in world.objects.values() if o.parent == table.id]
    assert len(kids) >= 2
    first = min(kids, key=lambda o: o.id)
    row = oracle_features(world, [table.id])[0]
    assert row[OFF_HAS + int(first.category)] == 1.0
    assert row[OFF_HAS:OFF_SC].sum() == 1.0


def test_oracle_category_only_drops_state_columns():
    world = get_task("toast_bread").builder()
    bread = find_cat(world, C.BREAD_SLICED)
    full = oracle_features(world, [bread.id])[0]
    slim = oracle_features(world, [bread.id], category_only=True)[0]
    assert np.array_equal(slim[:26], full[:26])
    assert slim[OFF_SC + 0] == full[OFF_SC + 0] and slim[OFF_SC + 1] == 1.0
    assert slim[OFF_IN:OFF_SC].sum() == slim[OFF_SC + 2:].sum() == 0.0


def test_oracle_unknown_id_raises():
    world = get_task("toast_bread").builder()
    with pytest.raises(KeyError):
        oracle_features(world, [99999])


# --- positive matching --------------------------------------------------------


def test_match_positive_picks_identical_row():
    rng = np.random.default_rng(0)
    z_next = rng.standard_normal((6, 8))
    z_t = z_next[[4, 2]]
    assert match_positive(z_t, z_next).tolist() == [4, 2]


def test_match_positive_prefers_alignment_over_sign():
    z = np.array([[1.0, 2.0, -0.5]])
    cands = np.vstack([z[0], -z[0]])
    assert match_positive(z, cands).tolist() == [0]


def test_match_positive_tie_returns_lowest_index():
    u = np.array([1.0, 0.0, 0.0, 0.0])
    # index 1 and index 3 are the same direction (cosine exactly 1)
    cands = np.stack([np.eye(4)[1], u, np.eye(4)[2], 2.0 * u])
    assert match_positive(u[None, :], cands).tolist() == [1]


def test_match_positive_zero_norm_is_guarded():
    out = match_positive(np.zeros((2, 3)), np.zeros((4, 3)))
    assert out.tolist() == [0, 0]


def test_match_empty_candidates_raise():
    z = np.ones((1, 3))
    with pytest.raises(ValueError):
        match_positive(z, np.zeros((0, 3)))
    with pytest.raises(ValueError):
        match_nearest_l2(z, np.zeros((0, 3)))


def test_match_nearest_l2_uses_distance_not_direction():
    # [0.6, 0] is closer in L2 even though both candidates share the direction
    anchor = np.array([[1.0, 0.0]])
    cands = np.array([[2.0, 0.0], [0.6, 0.0]])
    assert match_nearest_l2(anchor, cands).tolist() == [1]
    assert match_positive(anchor, cands).tolist() == [0]  # cosine tie -> lowest


# --- negative pool and sampling -----------------------------------------------


def test_negative_pool_fifo_eviction_and_copy():
    pool = NegativePool(cap=5)
    assert pool.as_array(3).shape == (0, 3)
    first = np.arange(9.0).reshape(3, 3)
    pool.push(first)
    first *= 0.0  # pool must hold copies
    pool.push(np.arange(9.0, 18.0).reshape(3, 3))
    assert len(pool) == 5
    kept = pool.as_array(3)
    assert kept[0].tolist() == [3.0, 4.0, 5.0]
    assert kept[-1].tolist() == [15.0, 16.0, 17.0]


def test_sample_negative_indices_unique_and_excluding():
    for seed in range(50):
        rng = np.random.default_rng(seed)
        picks = sample_negative_indices(30, 7, 20, rng)
        assert len(picks) == 20 == len(set(picks.tolist()))
        assert 7 not in picks
        assert picks.min() >= 0 and picks.max() < 30


def test_sample_negative_indices_scarce_candidates_warn():
    rng = np.random.default_rng(1)
    with pytest.warns(UserWarning):
        picks = sample_negative_indices(5, 1, 10, rng)
    assert len(picks) == 10 and 1 not in picks
    assert picks.min() >= 0 and picks.max() < 5


def test_sample_negative_indices_empty_set_raises():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        sample_negative_indices(0, 0, 3, rng)
    with pytest.raises(ValueError):
        sample_negative_indices(1, 0, 3, rng)


def test_sample_negative_matrix_rowwise_contract():
    rng = np.random.default_rng(2)
    excludes = np.full(4000, 2, dtype=np.intp)
    picks = sample_negative_matrix(8, excludes, 3, rng)
    assert picks.shape == (4000, 3)
    assert not np.any(picks == 2)
    assert np.all((picks >= 0) & (picks < 8))
    sorted_rows = np.sort(picks, axis=1)
    assert np.all(np.diff(sorted_rows, axis=1) > 0)  # no repeats within a row
    # close to uniform over the 7 allowed indices
    counts = np.bincount(picks.ravel(), minlength=8)
    assert abs(counts[counts > 0].min() - 12000 / 7) < 250
    assert abs(counts.max() - 12000 / 7) < 250


def test_sample_negative_matrix_fallback_matches_scalar_path():
    excludes = np.array([0, 3], dtype=np.intp)
    with pytest.warns(UserWarning):
        picks = sample_negative_matrix(4, excludes, 6, np.random.default_rng(3))
    assert picks.shape == (2, 6)
    assert not np.any(picks[0] == 0) and not np.any(picks[1] == 3)


def test_sample_negative_matrix_out_of_range_exclude_means_none():
    rng = np.random.default_rng(4)
    picks = sample_negative_matrix(4, np.full(2000, -1, dtype=np.intp), 2, rng)
    assert set(np.unique(picks).tolist()) == {0, 1, 2, 3}


# --- action encoding ----------------------------------------------------------


def test_action_encode_is_multiplicative():
    wb = np.arange(32.0).reshape(8, 4)
    leaves = leaves_with(act_wo=np.eye(4), act_wb=wb)
    z = np.array([[1.0, 2.0, 3.0, 4.0]])
    base = np.eye(8)[[5]]
    out = action_encode_graph(leaves, tc.constant(z), base)
    assert np.array_equal(out.data, z * wb[5])


def test_action_encode_zero_action_map_annihilates():
    rng = np.random.default_rng(0)
    leaves = leaves_with(act_wo=rng.standard_normal((4, 3)),
                         act_wb=np.zeros((8, 3)))
    out = action_encode_graph(leaves, tc.constant(rng.standard_normal((2, 4))),
                              np.eye(8)[[0, 7]])
    assert np.array_equal(out.data, np.zeros((2, 3)))


def test_action_encode_rejects_non_onehot_bases():
    leaves = leaves_with(act_wo=np.eye(4), act_wb=np.zeros((8, 4)))
    z = tc.constant(np.ones((1, 4)))
    two_hot = np.zeros((1, 8))
    two_hot[0, [1, 2]] = 1.0
    halves = np.zeros((1, 8))
    halves[0, [1, 2]] = 0.5  # sums to one but is not one-hot
    for bad in (two_hot, halves, np.zeros((1, 8))):
        with pytest.raises(ValueError):
            action_encode_graph(leaves, z, bad)


def test_action_encode_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    group = tc.ParamGroup()
    group.add("act_wo", rng.standard_normal((4, 3)))
    group.add("act_wb", rng.standard_normal((8, 3)))
    z = tc.constant(rng.standard_normal((2, 4)))
    base = np.eye(8)[[2, 6]]

    def loss_fn(leaves):
        return tc.sum_squares(action_encode_graph(leaves, z, base))

    assert tc.finite_diff_check(loss_fn, group) < 1e-6


def test_model_prediction_broadcasts_action_by_transition():
    rng = np.random.default_rng(6)
    leaves = leaves_with(
        model1_w=rng.standard_normal((11, 5)), model1_b=rng.standard_normal(5),
        model2_w=rng.standard_normal((5, 4)), model2_b=rng.standard_normal(4),
    )
    row = rng.standard_normal(4)
    z_t = tc.constant(np.tile(row, (4, 1)))
    att = tc.constant(np.zeros((4, 4)))
    z_a = tc.constant(rng.standard_normal((2, 3)))  # two distinct actions
    out = g_model_prediction(leaves, z_t, att, z_a,
                             np.array([0, 0, 1, 1])).data
    assert out.shape == (4, 4)
    assert np.array_equal(out[0], out[1]) and np.array_equal(out[2], out[3])
    assert not np.array_equal(out[0], out[2])


# --- contrastive model loss ---------------------------------------------------


def model_cfg(**kw):
    return replace(Config(), d_o=4, tau_model=1.0, **kw)


def full_leaves(rng, zero_head=False, const_head=None):
    """Model/action leaves for d_o=4, d_a=3; optionally pin the output head."""
    w2 = rng.standard_normal((5, 4))
    b2 = rng.standard_normal(4)
    w1 = rng.standard_normal((11, 5))
    b1 = rng.standard_normal(5)
    if zero_head:
        w2 = np.zeros((5, 4))
        b2 = np.zeros(4)
    if const_head is not None:
        w1 = np.zeros((11, 5))
        b1 = np.zeros(5)
        b2 = np.asarray(const_head, dtype=np.float64)
    return leaves_with(
        model1_w=w1, model1_b=b1, model2_w=w2, model2_b=b2,
        act_wo=rng.standard_normal((4, 3)), act_wb=rng.standard_normal((8, 3)),
    )


def batch_index(seg_t, seg_p, real_t=None, real_p=None, bases=None, chosen=None):
    seg_t = np.asarray(seg_t)
    seg_p = np.asarray(seg_p)
    b = int(seg_t.max()) + 1
    return ModelBatchIndex(
        seg_of_row=seg_t,
        seg_of_row_next=seg_p,
        real_row_mask=np.ones(len(seg_t), bool) if real_t is None
        else np.asarray(real_t),
        real_row_mask_next=np.ones(len(seg_p), bool) if real_p is None
        else np.asarray(real_p),
        base_onehots=np.eye(8)[:b] if bases is None else bases,
        chosen_ext_idx=np.zeros(b, dtype=np.intp) if chosen is None else chosen,
    )


def pool_of(rows):
    pool = NegativePool(cap=200)
    pool.push(np.asarray(rows, dtype=np.float64))
    return pool


def test_load_loss_uniform_logits_is_ln21_per_object():
    """Zeroed output head makes every logit identical: -log softmax = ln(K+1)."""
    rng = np.random.default_rng(7)
    cfg = model_cfg(k_negatives=20)
    leaves = full_leaves(rng, zero_head=True)
    idx = batch_index([0, 0, 1, 1], [0, 0, 1, 1])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        loss = g_load_loss(
            leaves, cfg, tc.constant(rng.standard_normal((2, 4))),
            tc.constant(rng.standard_normal((4, 4))),
            tc.constant(np.zeros((4, 4))),
            tc.constant(rng.standard_normal((4, 4))), idx,
            pool_of(rng.standard_normal((40, 4))),
            np.random.default_rng(8), 2)
    per_object = loss.item() * 2 / 4
    assert per_object == pytest.approx(math.log(21), abs=1e-9)
    assert round(math.log(21), 4) == 3.0445


def test_load_loss_saturated_positive_vanishes():
    rng = np.random.default_rng(9)
    cfg = model_cfg(k_negatives=20)
    leaves = full_leaves(rng, const_head=[51.0, 0.0, 0.0, 0.0])
    pool_rows = rng.standard_normal((40, 4))
    pool_rows[:, 0] = 0.0  # negatives orthogonal to the prediction
    idx = batch_index([0], [0])
    loss = g_load_loss(
        leaves, cfg, tc.constant(rng.standard_normal((1, 4))),
        tc.constant(np.array([[0.0, 1.0, 0.0, 0.0]])),
        tc.constant(np.zeros((1, 4))),
        tc.constant(np.array([[1.0, 0.0, 0.0, 0.0]])), idx,
        pool_of(pool_rows), np.random.default_rng(10), 1)
    assert 0.0 <= loss.item() < 1e-20


def test_load_loss_one_positive_two_zero_negatives():
    """pos logit 1, negatives 0 -> -log(e / (e + 2))."""
    rng = np.random.default_rng(11)
    cfg = model_cfg(k_negatives=2)
    leaves = full_leaves(rng, const_head=[1.0, 0.0, 0.0, 0.0])
    pool_rows = rng.standard_normal((6, 4))
    pool_rows[:, 0] = 0.0
    idx = batch_index([0], [0])
    loss = g_load_loss(
        leaves, cfg, tc.constant(rng.standard_normal((1, 4))),
        tc.constant(np.array([[0.0, 1.0, 0.0, 0.0]])),
        tc.constant(np.zeros((1, 4))),
        tc.constant(np.array([[1.0, 0.0, 0.0, 0.0]])), idx,
        pool_of(pool_rows), np.random.default_rng(12), 1)
    expected = math.log(1.0 + 2.0 / math.e)
    assert loss.item() == pytest.approx(expected, abs=1e-12)
    assert round(expected, 4) == 0.5514


def test_load_loss_logit_shift_invariance():
    rng = np.random.default_rng(13)
    cfg = model_cfg(k_negatives=5)
    head = np.array([1.0, 2.0, -1.0, 0.5])
    leaves = full_leaves(rng, const_head=head)
    delta = 3.7 * head / head.dot(head)  # shifts every logit by 3.7

    anchor = rng.standard_normal((1, 4))
    nxt = rng.standard_normal((1, 4))
    pool_rows = rng.standard_normal((30, 4))
    idx = batch_index([0], [0])

    def run(shift):
        return g_load_loss(
            leaves, cfg, tc.constant(anchor),
            tc.constant(anchor + shift), tc.constant(np.zeros((1, 4))),
            tc.constant(nxt + shift), idx, pool_of(pool_rows + shift),
            np.random.default_rng(14), 1).item()

    assert abs(run(0.0) - run(delta)) < 1e-9


def test_load_loss_empty_next_frame_uses_null_positive():
    """A vanished frame still trains: the injected null row is the label."""
    rng = np.random.default_rng(15)
    cfg = model_cfg(k_negatives=3)
    leaves = full_leaves(rng)
    z_p = tc.Tensor(rng.standard_normal((1, 4)), requires_grad=True)
    idx = batch_index([0], [0], real_p=[False])
    loss = g_load_loss(
        leaves, cfg, tc.constant(rng.standard_normal((1, 4))),
        tc.constant(rng.standard_normal((1, 4))),
        tc.constant(np.zeros((1, 4))), z_p, idx,
        pool_of(rng.standard_normal((10, 4))),
        np.random.default_rng(16), 1)
    assert np.isfinite(loss.item())
    tc.backward(loss)
    assert z_p.grad is not None and np.any(z_p.grad[0] != 0.0)


def test_load_loss_empty_anchor_set_is_zero():
    rng = np.random.default_rng(17)
    cfg = model_cfg(k_negatives=2)
    z_t = tc.Tensor(rng.standard_normal((1, 4)), requires_grad=True)
    idx = batch_index([0], [0], real_t=[False])
    loss = g_load_loss(
        full_leaves(rng), cfg, tc.constant(rng.standard_normal((1, 4))), z_t,
        tc.constant(np.zeros((1, 4))),
        tc.constant(rng.standard_normal((1, 4))), idx, None,
        np.random.default_rng(18), 1)
    assert loss.item() == 0.0


def test_load_loss_pool_is_top_up_only():
    """With enough in-batch candidates the pool must not be consulted."""
    rng = np.random.default_rng(19)
    cfg = model_cfg(k_negatives=20)
    leaves = full_leaves(rng)
    z_ext = tc.constant(rng.standard_normal((1, 4)))
    z_t = tc.constant(rng.standard_normal((11, 4)))
    att = tc.constant(np.zeros((11, 4)))
    z_p = tc.constant(rng.standard_normal((11, 4)))
    idx = batch_index(np.zeros(11, dtype=np.intp), np.zeros(11, dtype=np.intp))
    poisoned = pool_of(np.full((50, 4), 1e6))
    with_pool = g_load_loss(leaves, cfg, z_ext, z_t, att, z_p, idx, poisoned,
                            np.random.default_rng(20), 1).item()
    without = g_load_loss(leaves, cfg, z_ext, z_t, att, z_p, idx, None,
                          np.random.default_rng(20), 1).item()
    assert with_pool == without


def test_load_loss_attention_off_isolates_null_rows():
    """With the model attention ablated, a null row gets no gradient at all;
    with it on, the same row leaks in through the attention context."""
    rng = np.random.default_rng(21)
    cfg = model_cfg(k_negatives=2, d_k=2)
    leaves = full_leaves(rng)
    leaves.update(leaves_with(att_wq_o=rng.standard_normal((4, 2)),
                              att_wk=rng.standard_normal((4, 2))))
    seg = np.array([0, 0])
    idx = batch_index(seg, [0], real_t=[True, False])
    z_p = tc.constant(rng.standard_normal((1, 4)))
    pool = pool_of(rng.standard_normal((10, 4)))
    row_mask, _ = segment_masks(seg, 1)

    def grads(mode):
        z_t = tc.Tensor(rng.standard_normal((2, 4)), requires_grad=True)
        if mode == "off":
            att = tc.constant(np.zeros((2, 4)))
        else:
            att = g_attend_objects(leaves, z_t, row_mask, 2, "full")
        loss = g_load_loss(leaves, cfg, tc.constant(z_t.data[:1]), z_t, att,
                           z_p, idx, pool, np.random.default_rng(22), 1)
        tc.backward(loss)
        return z_t.grad

    off = grads("off")
    assert np.any(off[0] != 0.0)
    assert not np.any(off[1] != 0.0)
    on = grads("on")
    assert np.any(on[1] != 0.0)


def test_load_loss_gradient_confined_to_match_and_drawn_negatives():
    rng = np.random.default_rng(23)
    cfg = model_cfg(k_negatives=1)
    leaves = full_leaves(rng)
    z_t_data = rng.standard_normal((1, 4))
    z_p = tc.Tensor(rng.standard_normal((3, 4)), requires_grad=True)
    idx = batch_index([0], [0, 0, 0])

    loss = g_load_loss(leaves, cfg, tc.constant(z_t_data),
                       tc.constant(z_t_data), tc.constant(np.zeros((1, 4))),
                       z_p, idx, None, np.random.default_rng(24), 1)
    tc.backward(loss)

    match = int(match_positive(z_t_data, z_p.data)[0])
    draws = sample_negative_matrix(4, np.array([1 + match], dtype=np.intp), 1,
                                   np.random.default_rng(24)).ravel()
    touched = {match} | {int(d) - 1 for d in draws if d >= 1}
    for j in range(3):
        if j in touched:
            assert np.any(z_p.grad[j] != 0.0)
        else:
            assert not np.any(z_p.grad[j] != 0.0)


# --- OCN baseline loss ----------------------------------------------------------


def ocn_cfg(tau):
    return replace(Config(), tau_ocn=tau)


def test_ocn_loss_uniform_similarities():
    rng = np.random.default_rng(25)
    z_t = tc.constant(rng.standard_normal((2, 4)))
    z_p = tc.constant(np.tile(rng.standard_normal(4), (3, 1)))
    idx = batch_index([0, 0], [0, 0, 0])
    loss = g_ocn_loss(ocn_cfg(1.0), z_t, z_p, idx, 1)
    assert loss.item() == pytest.approx(2 * math.log(3), abs=1e-9)


def test_ocn_loss_orthogonal_negatives_hand_value():
    z_t = tc.constant(np.eye(4)[:2])
    z_p = tc.constant(np.eye(4))
    idx = batch_index([0, 0], [0, 0, 0, 0])
    loss = g_ocn_loss(ocn_cfg(1.0), z_t, z_p, idx, 1)
    # each anchor: -log(e / (e + 3))
    assert loss.item() == pytest.approx(2 * (math.log(math.e + 3) - 1),
                                        abs=1e-12)


def test_ocn_loss_temperature_scaling_identity():
    """Doubling all encodings quadruples dot products; tau -> 4*tau cancels."""
    rng = np.random.default_rng(26)
    z_t = rng.standard_normal((3, 5))
    z_p = rng.standard_normal((4, 5))
    idx = batch_index([0, 0, 1], [0, 0, 1, 1])
    a = g_ocn_loss(ocn_cfg(0.37), tc.constant(z_t), tc.constant(z_p), idx, 2)
    b = g_ocn_loss(ocn_cfg(4 * 0.37), tc.constant(2 * z_t),
                   tc.constant(2 * z_p), idx, 2)
    assert a.item() == pytest.approx(b.item(), abs=1e-12)


def test_ocn_loss_permutation_invariant_over_negatives():
    rng = np.random.default_rng(27)
    z_t = rng.standard_normal((3, 5))
    z_p = rng.standard_normal((5, 5))
    idx = batch_index([0, 0, 1], [0, 0, 0, 1, 1])
    base = g_ocn_loss(ocn_cfg(0.2), tc.constant(z_t), tc.constant(z_p), idx, 2)
    perm = g_ocn_loss(ocn_cfg(0.2), tc.constant(z_t),
                      tc.constant(z_p[[2, 0, 1, 4, 3]]), idx, 2)
    assert base.item() == pytest.approx(perm.item(), abs=1e-9)


def test_ocn_loss_skips_transitions_without_negatives():
    rng = np.random.default_rng(28)
    z_t = tc.Tensor(rng.standard_normal((2, 4)), requires_grad=True)
    idx = batch_index([0, 0], [0])
    loss = g_ocn_loss(ocn_cfg(1.0), z_t,
                      tc.constant(rng.standard_normal((1, 4))), idx, 1)
    assert loss.item() == 0.0


def test_ocn_match_uses_l2_nearest():
    z_t = tc.constant(np.array([[1.0, 0.0]]))
    z_p = tc.constant(np.array([[2.0, 0.0], [0.6, 0.0]]))
    idx = batch_index([0], [0, 0])
    loss = g_ocn_loss(ocn_cfg(1.0), z_t, z_p, idx, 1)
    # L2 picks the 0.6 row; logits [2.0, 0.6]
    expected = -(0.6 - math.log(math.exp(2.0) + math.exp(0.6)))
    assert loss.item() == pytest.approx(expected, abs=1e-12)


# --- COBRA baseline loss --------------------------------------------------------


def cobra_leaves(rng, logstd_bias=0.0):
    return leaves_with(
        logstd_w=np.zeros((4, 3)), logstd_b=np.full(3, logstd_bias),
        rec1_w=rng.standard_normal((3, 5)), rec1_b=rng.standard_normal(5),
        rec2_w=np.zeros((5, 6)), rec2_b=np.zeros(6),
        pred1_w=rng.standard_normal((3, 5)), pred1_b=rng.standard_normal(5),
        pred2_w=np.zeros((5, 3)), pred2_b=np.zeros(3),
    )


def cobra_batch(rng, targets=None):
    pred_rows = (np.zeros(0, dtype=np.intp) if targets is None
                 else np.arange(len(targets), dtype=np.intp))
    return CobraBatch(
        patches_unique=np.zeros((1, 6)),
        row_to_unique=np.array([0], dtype=np.intp),
        pred_row_to_unique=pred_rows,
        target_patches=np.zeros((0, 6)) if targets is None else targets,
        noise=rng.standard_normal((1, 3)),
    )


def test_gaussian_kl_closed_forms():
    assert gaussian_kl(np.zeros(3), np.ones(3)) == 0.0
    assert gaussian_kl(np.array([1.0, 0.0]), np.array([1.0, 1.0])) == 0.5


def test_gaussian_kl_matches_monte_carlo():
    mu = np.array([0.5, -0.3])
    sigma = np.array([0.8, 1.3])
    closed = gaussian_kl(mu, sigma)
    eps = np.random.default_rng(29).standard_normal((1_000_000, 2))
    z = mu + sigma * eps
    log_ratio = (-0.5 * eps ** 2 - np.log(sigma) + 0.5 * z ** 2).sum(axis=1)
    assert abs(log_ratio.mean() - closed) / closed < 0.02


def test_cobra_loss_reduces_to_weighted_kl():
    """Perfect reconstruction of constant patches leaves only the KL term."""
    rng = np.random.default_rng(30)
    cfg = Config()
    mu = tc.constant(np.array([[1.0, 0.0, 0.0]]))
    hidden = tc.constant(np.zeros((1, 4)))
    loss = g_cobra_loss(cobra_leaves(rng), cfg, cobra_batch(rng), mu, hidden, 1)
    assert loss.item() == pytest.approx(cfg.beta_kl * 0.5, rel=1e-12)

    zero_mu = tc.constant(np.zeros((1, 3)))
    loss0 = g_cobra_loss(cobra_leaves(rng), cfg, cobra_batch(rng), zero_mu,
                         hidden, 1)
    assert loss0.item() == 0.0


def test_cobra_logstd_is_clamped():
    rng = np.random.default_rng(31)
    cfg = Config()
    mu = tc.constant(np.zeros((1, 3)))
    hidden = tc.constant(np.zeros((1, 4)))

    high = g_cobra_loss(cobra_leaves(rng, logstd_bias=10.0), cfg,
                        cobra_batch(rng), mu, hidden, 1)
    per_dim_hi = 0.5 * (math.exp(4.0) - 1.0 - 4.0)  # sigma pinned at e^2
    assert high.item() == pytest.approx(cfg.beta_kl * 3 * per_dim_hi, rel=1e-9)

    low = g_cobra_loss(cobra_leaves(rng, logstd_bias=-20.0), cfg,
                       cobra_batch(rng), mu, hidden, 1)
    per_dim_lo = 0.5 * (math.exp(-10.0) - 1.0 + 10.0)  # sigma pinned at e^-5
    assert low.item() == pytest.approx(cfg.beta_kl * 3 * per_dim_lo, rel=1e-9)


def test_cobra_prediction_term_adds_target_error():
    rng = np.random.default_rng(32)
    cfg = Config()
    mu = tc.constant(np.zeros((1, 3)))
    hidden = tc.constant(np.zeros((1, 4)))
    plain = g_cobra_loss(cobra_leaves(rng), cfg, cobra_batch(rng), mu,
                         hidden, 1)
    with_pred = g_cobra_loss(cobra_leaves(rng), cfg,
                             cobra_batch(rng, targets=np.ones((1, 6))), mu,
                             hidden, 1)
    assert with_pred.item() - plain.item() == pytest.approx(6.0, abs=1e-9)
