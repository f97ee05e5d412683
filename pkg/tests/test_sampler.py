"""Proposal construction, the chain step, and the lockstep engine contract."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from mimo_mcmc.model import ChannelSpec, random_instance
from mimo_mcmc.sampler import (
    SamplerConfig,
    _categorical_indices,
    _ls_soft_point,
    _spread_start_indices,
    acceptance_probability,
    build_proposal,
    chain_rng,
    compute_preconditioner,
    default_config,
    dmala_step,
    init_state,
    metric,
    metric_gradient,
    proposal_log_prob,
    run_chain,
    run_parallel_chains,
    sample_proposal,
    chain_occupancy,
    one_step_frequencies,
)


@pytest.fixture
def instance():
    return random_instance(ChannelSpec(nt=2, nr=2), 2, 8.0, np.random.default_rng(11))


@pytest.fixture
def instance16(request):
    return random_instance(ChannelSpec(nt=2, nr=2), 4, 12.0, np.random.default_rng(13))


def test_default_config_formulas(instance):
    cfg = default_config(instance)
    s2 = instance.sigma2
    d2 = instance.constellation.d_min**2
    assert cfg.step_size == pytest.approx(s2, abs=0)
    assert cfg.precond_scale == pytest.approx(d2 / s2, abs=1e-15)
    assert cfg.damping == pytest.approx(s2 / (2 * d2), abs=1e-15)
    assert cfg.mode == "preconditioned"

    # tempered defaults follow the effective noise tau * sigma^2
    hot = default_config(instance, temperature=2.0)
    assert hot.step_size == pytest.approx(2 * s2, abs=0)
    assert hot.precond_scale == pytest.approx(d2 / (2 * s2), abs=1e-15)
    assert hot.damping == pytest.approx(s2 / d2, abs=1e-15)
    pinned = default_config(instance, temperature=2.0, step_size=0.5)
    assert pinned.step_size == 0.5


def test_config_validation():
    good = dict(step_size=1.0)
    SamplerConfig(**good)
    for bad in (
        dict(step_size=0.0),
        dict(step_size=1.0, mode="gibbs"),
        dict(step_size=1.0, precond_scale=0.0),
        dict(step_size=1.0, damping=-1.0),
        dict(step_size=1.0, temperature=0.0),
        dict(step_size=1.0, n_iters=0),
        dict(step_size=1.0, n_chains=0),
        dict(step_size=1.0, init="warm"),
    ):
        with pytest.raises(ValueError):
            SamplerConfig(**bad)


def test_metric_scalar_batch_bit_identical(instance16):
    space = instance16.constellation.amplitudes
    rng = np.random.default_rng(0)
    xs = space[rng.integers(0, 4, size=(32, 4))]
    batch_f = metric(instance16, xs)
    batch_g = metric_gradient(instance16, xs)
    for i in range(32):
        assert metric(instance16, xs[i]) == batch_f[i]
        assert_array_equal(metric_gradient(instance16, xs[i]), batch_g[i])


@pytest.mark.parametrize("temperature", [1.0, 2.0])
def test_gradient_matches_finite_differences(instance16, temperature):
    rng = np.random.default_rng(1)
    x = instance16.constellation.amplitudes[rng.integers(0, 4, size=4)].astype(float)
    grad = metric_gradient(instance16, x, temperature)
    eps = 1e-6
    for n in range(4):
        e = np.zeros(4)
        e[n] = eps
        fd = (
            metric(instance16, x + e, temperature) - metric(instance16, x - e, temperature)
        ) / (2 * eps)
        assert grad[n] == pytest.approx(fd, abs=1e-6)


def test_preconditioner_is_damped_inverse(instance):
    m = compute_preconditioner(instance.h, 0.3)
    gram = instance.h.T @ instance.h + 0.3 * np.eye(4)
    assert_allclose(m @ gram, np.eye(4), atol=1e-12)
    assert_array_equal(m, m.T)


def test_build_proposal_rows_normalized(instance16):
    rng = np.random.default_rng(2)
    alphabet = instance16.constellation.amplitudes
    x = alphabet[rng.integers(0, 4, size=(7, 4))]
    drift = rng.normal(size=(7, 4))
    table = build_proposal(x, drift, 0.37, alphabet)
    assert table.probs.shape == (7, 4, 4)
    assert_allclose(table.probs.sum(axis=-1), 1.0, atol=1e-12)
    assert_allclose(np.exp(table.log_probs), table.probs, atol=0)

    # direct softmax of the quadratic score, computed independently
    delta = alphabet - x[..., None]
    scores = 0.5 * drift[..., None] * delta - delta**2 / (2 * 0.37)
    ref = np.exp(scores) / np.exp(scores).sum(axis=-1, keepdims=True)
    assert_allclose(table.probs, ref, atol=1e-12)

    with pytest.raises(ValueError):
        build_proposal(x, drift, 0.0, alphabet)


def test_categorical_indices_frozen():
    probs = np.array([0.25, 0.25, 0.5])
    for u, want in [(0.0, 0), (0.2499, 0), (0.25, 1), (0.49, 1), (0.5, 2), (0.999, 2), (1.0, 2)]:
        assert _categorical_indices(probs, np.asarray(u)) == want


def test_sample_proposal_deterministic(instance16):
    state = init_state(instance16, default_config(instance16, seed=3), chain_rng(3, 0))
    x1, lq1 = sample_proposal(state.table, chain_rng(42, 7))
    x2, lq2 = sample_proposal(state.table, chain_rng(42, 7))
    assert_array_equal(x1, x2)
    assert lq1 == lq2
    assert lq1 == pytest.approx(proposal_log_prob(state.table, x1), abs=1e-12)


def test_acceptance_probability_values():
    assert acceptance_probability(-5.0, -1.0, 0.0, 0.0) == 1.0
    assert acceptance_probability(-1.0, -5.0, 0.0, 0.0) == pytest.approx(np.exp(-4.0), abs=1e-15)
    assert acceptance_probability(-1.0, -1.0, -2.0, -2.0) == 1.0
    # asymmetric proposal correction
    assert acceptance_probability(0.0, 0.0, -1.0, -3.0) == pytest.approx(np.exp(-2.0), abs=1e-15)
    arr = acceptance_probability(np.zeros(3), np.array([-1.0, 0.0, 1.0]), 0.0, 0.0)
    assert_allclose(arr, [np.exp(-1.0), 1.0, 1.0], atol=1e-15)


def test_dmala_step_cache_reuse(instance16):
    cfg = default_config(instance16, seed=5, temperature=1.0)
    precond = compute_preconditioner(instance16.h, cfg.damping)
    rng = chain_rng(5, 0)
    state = init_state(instance16, cfg, rng, precond)
    saw_accept = saw_reject = False
    for _ in range(60):
        prev = state
        state, accepted = dmala_step(state, instance16, cfg, rng, precond)
        if accepted:
            saw_accept = True
            # the forward table of the new state is the reverse table at x'
            drift_ref = (precond @ metric_gradient(instance16, state.x, 1.0)) / cfg.precond_scale
            ref = build_proposal(
                state.x, drift_ref, cfg.step_size * cfg.precond_scale,
                instance16.constellation.amplitudes,
            )
            assert_allclose(state.table.log_probs, ref.log_probs, atol=1e-12)
            assert state.f_x == pytest.approx(metric(instance16, state.x), abs=1e-12)
        else:
            saw_reject = True
            assert state is prev
    assert saw_accept and saw_reject


def test_run_chain_matches_manual_steps(instance16):
    cfg = default_config(instance16, seed=21, n_iters=40, temperature=1.0)
    res = run_chain(instance16, cfg, record="trajectory")

    rng = chain_rng(21, 0)
    precond = compute_preconditioner(instance16.h, cfg.damping)
    state = init_state(instance16, cfg, rng, precond)
    assert_array_equal(res.states[0], state.x)
    for t in range(1, 40):
        state, accepted = dmala_step(state, instance16, cfg, rng, precond)
        assert_array_equal(res.states[t], state.x)
        assert res.accepts[t - 1] == accepted
    assert_array_equal(res.final_x, state.x)
    assert res.final_f == state.f_x
    assert res.n_accepted == state.n_accepted


def test_run_chain_trajectory_consistency(instance16):
    cfg = default_config(instance16, seed=4, n_iters=60)
    res = run_chain(instance16, cfg, record="trajectory")
    assert res.states.shape == (60, 4)
    assert_allclose(res.f_values, metric(instance16, res.states, cfg.temperature), atol=1e-12)
    changed = np.any(res.states[1:] != res.states[:-1], axis=1)
    assert np.all(res.accepts[changed])
    final = run_chain(instance16, cfg, record="final")
    assert_array_equal(final.final_x, res.final_x)
    assert final.final_f == res.final_f
    with pytest.raises(ValueError):
        run_chain(instance16, cfg, record="everything")


def test_parallel_chains_match_single_runs(instance16):
    cfg = default_config(instance16, seed=9, n_iters=30, n_chains=5)
    pool = run_parallel_chains(instance16, cfg)
    assert len(pool) == 5
    assert pool.source_tau == cfg.temperature
    for i in range(5):
        single = run_chain(instance16, cfg, chain_index=i)
        assert_array_equal(pool.samples[i], single.final_x)
        assert pool.f_values[i] == single.final_f


def test_parallel_chains_best_record(instance16):
    cfg = default_config(instance16, seed=10, n_iters=50, n_chains=4, temperature=1.0)
    best = run_parallel_chains(instance16, cfg, record="best")
    for i in range(4):
        traj = run_chain(instance16, cfg, chain_index=i, record="trajectory")
        top = int(np.argmax(traj.f_values))
        assert best.f_values[i] == traj.f_values[top]
        assert_array_equal(best.samples[i], traj.states[top])
    with pytest.raises(ValueError):
        run_parallel_chains(instance16, cfg, record="median")


def test_parallel_chains_tempered_f_untempered(instance16):
    cfg = default_config(instance16, seed=12, n_iters=20, n_chains=3, temperature=2.0)
    pool = run_parallel_chains(instance16, cfg)
    assert pool.source_tau == 2.0
    assert_allclose(pool.f_values, metric(instance16, pool.samples), atol=1e-12)


def test_mmse_init_starts_at_mmse_point(instance16):
    from mimo_mcmc.baselines import mmse_detect

    cfg = default_config(instance16, seed=1, init="mmse", n_iters=1)
    res = run_chain(instance16, cfg, record="trajectory")
    assert_array_equal(res.states[0], mmse_detect(instance16))


def test_spread_grid_construction(instance16):
    idx = _spread_start_indices(instance16, 16)
    assert idx.shape == (16, 4)
    assert idx.dtype == np.int64
    assert np.all((idx >= 0) & (idx < 4))
    assert_array_equal(idx, _spread_start_indices(instance16, 16))

    # single chain degenerates to the snapped regularized LS point
    from mimo_mcmc.baselines import mmse_detect

    only = instance16.constellation.amplitudes[_spread_start_indices(instance16, 1)[0]]
    assert_array_equal(only, mmse_detect(instance16))

    # 16 chains: 4x4 displacement grid along the two weakest singular directions
    soft = _ls_soft_point(instance16)
    vt = np.linalg.svd(instance16.h)[2]
    levels = np.linspace(-3.0, 3.0, 4) * 2.0 * instance16.constellation.d_min
    rows = []
    for a in levels:
        for b in levels:
            point = soft + a * vt[-1] + b * vt[-2]
            rows.append(
                np.abs(instance16.constellation.amplitudes[:, None] - point).argmin(axis=0)
            )
    assert_array_equal(idx, np.stack(rows))
    # the fan must actually diversify the starts
    assert np.unique(idx, axis=0).shape[0] > 1


def test_spread_init_engine_scalar_parity(instance16):
    cfg = default_config(instance16, seed=17, n_iters=25, n_chains=6, init="spread")
    grid = _spread_start_indices(instance16, 6)
    pool = run_parallel_chains(instance16, cfg)
    for i in range(6):
        single = run_chain(instance16, cfg, chain_index=i, record="trajectory")
        assert_array_equal(
            single.states[0], instance16.constellation.amplitudes[grid[i]]
        )
        assert_array_equal(pool.samples[i], single.final_x)
        assert pool.f_values[i] == single.final_f


def test_chain_rng_streams_disjoint():
    a = chain_rng(0, 0).random(4)
    b = chain_rng(0, 1).random(4)
    c = chain_rng(0, 0).random(4)
    assert not np.array_equal(a, b)
    assert_array_equal(a, c)


def test_chain_occupancy_shape_and_mass(instance):
    cfg = default_config(instance, seed=2, n_iters=12)
    counts = chain_occupancy(instance, cfg, 200)
    assert counts.shape == (12, 16)
    assert_array_equal(counts.sum(axis=1), np.full(12, 200))
    # row 0 is the uniform initialization: every chain at its drawn point
    init_counts = np.zeros(16, dtype=int)
    for i in range(200):
        digits = chain_rng(2, i).integers(0, 2, size=4)
        init_counts[int(digits @ np.array([8, 4, 2, 1]))] += 1
    assert_array_equal(counts[0], init_counts)


def test_one_step_frequencies_total(instance):
    cfg = default_config(instance, seed=0)
    x0 = instance.constellation.amplitudes[np.array([0, 1, 0, 1])]
    freq = one_step_frequencies(instance, cfg, x0, 5000, np.random.default_rng(3))
    assert freq.sum() == 5000
    assert freq.shape == (16,)
