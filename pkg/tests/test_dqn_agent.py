"""Scheduler-head tests: schedules, masked TD math, target-net discipline.

The exploration branch returns a random preference ranking rather than an
index, so the tests check distributional properties of the ranking and the
exact equality of the greedy branch with the eval net's Q row.
"""

import numpy as np
import pytest

from uavwpcn.config import desk_config
from uavwpcn.dqn_agent import SILENT_ACTION, DqnModel, epsilon_at, lr_at


def small_model(obs_dim=6, num_actions=4, hidden=8, gamma=0.95, lr=1e-3,
                sync=5, seed=0):
    return DqnModel(obs_dim=obs_dim, num_actions=num_actions, hidden=hidden,
                    gamma=gamma, lr=lr, target_sync_period=sync,
                    rng=np.random.default_rng(seed))


def random_batch(model, n=12, seed=1, silent_every=0):
    rng = np.random.default_rng(seed)
    action = rng.integers(0, model.num_actions, size=n)
    if silent_every:
        action[::silent_every] = SILENT_ACTION
    return {
        "obs": rng.standard_normal((n, model.obs_dim)),
        "action": action,
        "reward": rng.standard_normal(n),
        "next_obs": rng.standard_normal((n, model.obs_dim)),
    }


# -- schedules -------------------------------------------------------------

def test_epsilon_schedule_endpoints_and_hold():
    assert epsilon_at(0, 100, 0.9, 0.02, 0.8) == 0.9
    assert epsilon_at(40, 100, 0.9, 0.02, 0.8) == pytest.approx(0.46)
    assert epsilon_at(80, 100, 0.9, 0.02, 0.8) == 0.02
    assert epsilon_at(99, 100, 0.9, 0.02, 0.8) == 0.02


def test_epsilon_schedule_monotone():
    vals = [epsilon_at(e, 50, 0.9, 0.02, 0.8) for e in range(50)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    assert epsilon_at(0, 50, 0.9, 0.02, 0.0) == 0.02


def test_lr_schedule_geometric():
    assert lr_at(0, 200, 0.01, 1e-6) == 0.01
    assert lr_at(199, 200, 0.01, 1e-6) == pytest.approx(1e-6)
    # exponential decay: the midpoint is the geometric mean of the endpoints
    assert lr_at(1, 3, 0.01, 1e-6) == pytest.approx(np.sqrt(0.01 * 1e-6))
    assert lr_at(0, 1, 0.01, 1e-6) == 0.01


def test_set_lr_takes_effect():
    model = small_model()
    model.set_lr(5e-4)
    assert model.opt.lr == 5e-4


# -- action scoring --------------------------------------------------------

def test_for_world_dimensions():
    cfg = desk_config()
    model = DqnModel.for_world(cfg, np.random.default_rng(0))
    assert model.obs_dim == cfg.num_wns + 3
    assert model.num_actions == cfg.num_wns
    assert tuple(model.eval_net.dims) == (cfg.num_wns + 3,) \
        + (cfg.hidden_width,) * 3 + (cfg.num_wns,)


def test_q_values_width_and_determinism():
    model = small_model()
    obs = np.random.default_rng(2).standard_normal(model.obs_dim)
    q1 = model.q_values(obs)
    q2 = model.q_values(obs)
    assert q1.shape == (model.num_actions,)
    assert np.array_equal(q1, q2)


def test_select_scores_greedy_branch_is_q_row():
    model = small_model()
    obs = np.random.default_rng(3).standard_normal(model.obs_dim)
    scores = model.select_scores(obs, eps=0.0, rng=np.random.default_rng(4))
    assert np.array_equal(scores, model.q_values(obs))


def test_select_scores_explore_branch_is_permutation():
    model = small_model(num_actions=5)
    obs = np.zeros(model.obs_dim)
    rng = np.random.default_rng(5)
    for _ in range(20):
        scores = model.select_scores(obs, eps=1.0, rng=rng)
        assert sorted(scores) == [0.0, 1.0, 2.0, 3.0, 4.0]


def test_explore_top_choice_uniform():
    # With eps=1 every action should head the ranking equally often.
    model = small_model(num_actions=5)
    obs = np.zeros(model.obs_dim)
    rng = np.random.default_rng(6)
    counts = np.zeros(5)
    draws = 500
    for _ in range(draws):
        counts[int(np.argmax(model.select_scores(obs, eps=1.0, rng=rng)))] += 1
    expected = draws / 5
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    assert chi2 < 18.47      # 99.9% quantile, 4 degrees of freedom


# -- TD loss ---------------------------------------------------------------

def test_td_loss_gradient_fd():
    model = small_model()
    batch = random_batch(model)
    _, grads = model.td_loss(batch)
    params = model.eval_net.params()
    flat = [(a, i) for a in params for i in range(a.size)]
    picks = np.random.default_rng(7).choice(len(flat), size=60, replace=False)
    h = 1e-6
    for p in picks:
        arr, i = flat[p]
        orig = arr.flat[i]
        arr.flat[i] = orig + h
        lp, _ = model.td_loss(batch)
        arr.flat[i] = orig - h
        lm, _ = model.td_loss(batch)
        arr.flat[i] = orig
        gi = next(j for j, a2 in enumerate(params) if a2 is arr)
        analytic = grads[gi].flat[i]
        assert analytic == pytest.approx((lp - lm) / (2 * h), rel=1e-5, abs=1e-10)


def test_silent_rows_carry_no_gradient():
    model = small_model()
    batch = random_batch(model, n=12, silent_every=3)
    keep = batch["action"] != SILENT_ACTION
    trimmed = {k: v[keep] for k, v in batch.items()}
    loss_full, grads_full = model.td_loss(batch)
    loss_trim, grads_trim = model.td_loss(trimmed)
    assert loss_full == loss_trim
    for gf, gt in zip(grads_full, grads_trim):
        assert np.array_equal(gf, gt)


def test_all_silent_batch_is_a_no_op_update():
    model = small_model(sync=100)
    batch = random_batch(model, n=6)
    batch["action"][:] = SILENT_ACTION
    before = [p.copy() for p in model.eval_net.params()]
    loss = model.train_step(batch)
    assert loss == 0.0
    assert model.train_steps == 1
    for b, p in zip(before, model.eval_net.params()):
        assert np.array_equal(b, p)


def test_target_net_frozen_between_syncs():
    model = small_model(sync=5)
    batch = random_batch(model)
    init_target = [p.copy() for p in model.target_net.params()]
    for _ in range(4):
        model.train_step(batch)
    for b, p in zip(init_target, model.target_net.params()):
        assert np.array_equal(b, p)
    model.train_step(batch)      # fifth step: copy happens
    for e, t in zip(model.eval_net.params(), model.target_net.params()):
        assert np.array_equal(e, t)
    assert model.target_net.params()[0] is not model.eval_net.params()[0]


def test_regression_to_reward_table_with_zero_gamma():
    # gamma = 0 turns TD learning into plain regression onto r(s, a), which
    # the net should fit almost exactly on a tiny fixed table.
    model = small_model(obs_dim=4, num_actions=3, hidden=16, gamma=0.0,
                        lr=5e-3, sync=50, seed=11)
    rng = np.random.default_rng(12)
    states = rng.standard_normal((4, 4))
    rewards = rng.uniform(0.0, 1.0, size=(4, 3))
    rows_obs = np.repeat(states, 3, axis=0)
    rows_act = np.tile(np.arange(3), 4)
    batch = {
        "obs": rows_obs,
        "action": rows_act,
        "reward": rewards.ravel(),
        "next_obs": np.zeros_like(rows_obs),
    }
    for _ in range(2000):
        model.train_step(batch)
    fitted = np.vstack([model.q_values(s) for s in states])
    assert float(np.max(np.abs(fitted - rewards))) < 1e-2


# -- persistence -----------------------------------------------------------

def test_export_import_round_trip():
    a = small_model(seed=1)
    b = small_model(seed=2)
    arrays, meta = a.export_net()
    b.import_net(arrays, meta)
    obs = np.ones(a.obs_dim)
    assert np.array_equal(a.q_values(obs), b.q_values(obs))
    # importing also refreshes the target copy
    out_a, _ = a.eval_net.forward(obs[None, :])
    out_bt, _ = b.target_net.forward(obs[None, :])
    assert np.array_equal(out_a, out_bt)


def test_import_rejects_mismatched_head():
    a = small_model(num_actions=4)
    b = small_model(obs_dim=8, num_actions=6)
    arrays, meta = b.export_net()
    with pytest.raises(ValueError, match="snapshot"):
        a.import_net(arrays, meta)


def test_state_dict_round_trip_preserves_training():
    a = small_model(seed=5, sync=3)
    batch = random_batch(a, n=8, seed=6)
    a.train_step(batch)
    a.train_step(batch)
    b = small_model(seed=99, sync=3)
    b.load_state_dict(a.state_dict())
    assert b.train_steps == a.train_steps
    la = [a.train_step(batch) for _ in range(3)]
    lb = [b.train_step(batch) for _ in range(3)]
    assert la == lb
