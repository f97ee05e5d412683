"""Acceptance suite: every guarantee the package ships, at its stated tolerance.

One test per guarantee, ordered cheap-to-expensive within numeric order. The
last two (soft-output consistency, near-optimal hard decisions) run full-size
experiment configurations and dominate the suite's wall clock.
"""

import json

import numpy as np
import pytest
from scipy import stats

from mimo_mcmc.cli import main
from mimo_mcmc.experiments import (
    ExperimentConfig,
    run_llr_fidelity,
    run_rate_boxplot,
    run_ser_sweep,
    run_tv_curve,
)
from mimo_mcmc.llr import SampleList, llr_list, logsumexp_stream
from mimo_mcmc.model import ChannelSpec, random_instance
from mimo_mcmc.oracle import (
    build_transition_matrix,
    convergence_rate,
    detailed_balance_check,
    enumerate_states,
    exact_llr,
    stationary_distribution,
    tv_decay_curve,
    tv_distance,
    unadjusted_transition_matrix,
)
from mimo_mcmc.sampler import (
    build_proposal,
    compute_preconditioner,
    default_config,
    metric,
    metric_gradient,
    one_step_frequencies,
    _effective_drift,
)

QPSK_2X2 = ChannelSpec(nt=2, nr=2)


def _instances(n, base, spec=QPSK_2X2, q=2, snr=8.0):
    return [
        random_instance(spec, q, snr, np.random.default_rng(np.random.SeedSequence((base, i))))
        for i in range(n)
    ]


def test_01_detailed_balance():
    worst = 0.0
    for inst in _instances(20, 404):
        for mode in ("naive", "preconditioned"):
            tm = build_transition_matrix(inst, default_config(inst, mode=mode))
            worst = max(worst, detailed_balance_check(tm.p, tm.pi))
    assert worst <= 1e-12, f"max balance violation {worst:.3e} > 1e-12"


def test_02_stationarity_and_spectrum():
    for inst in _instances(20, 404):
        for mode in ("naive", "preconditioned"):
            tm = build_transition_matrix(inst, default_config(inst, mode=mode))
            resid = float(np.abs(tm.pi @ tm.p - tm.pi).max())
            assert resid <= 1e-12, f"stationarity residual {resid:.3e}"
            r, eigs = convergence_rate(tm.p, tm.pi)
            assert abs(eigs[0] - 1.0) <= 1e-10
            assert 0.0 < r < 1.0


def test_03_geometric_tv_decay():
    # exact curve: every late-decade step ratio equals the spectral rate
    inst = _instances(1, 515)[0]
    tm = build_transition_matrix(inst, default_config(inst))
    r, _ = convergence_rate(tm.p, tm.pi)
    tv = tv_decay_curve(tm.p, tm.pi, np.full(16, 1.0 / 16.0), 100)
    floor = max(tv[tv > 0].min(), 1e-14)
    band = np.array([t for t in range(99) if tv[t + 1] >= 10 * floor and tv[t] <= 1e3 * floor])
    assert band.size >= 3, "no usable decade above the numerical floor"
    ratios = tv[band + 1] / tv[band]
    assert np.abs(ratios - r).max() <= 1e-2, (
        f"late TV ratios deviate from r={r:.4f} by {np.abs(ratios - r).max():.3e}"
    )

    # live chains track the exact curve within binomial sampling noise
    cfg = ExperimentConfig(
        experiment="tv_curve", q=2, nt=2, nr=2, snr_db_list=[8.0],
        n_chains=100000, seed=31,
    )
    rec = run_tv_curve(cfg)
    assert rec.metrics["max_gap_in_sigmas"] <= 3.0, (
        f"empirical TV off by {rec.metrics['max_gap_in_sigmas']:.2f} sigmas"
    )
    assert abs(rec.metrics["r_slope"] - rec.metrics["r"]) <= 1e-2


def test_04_unadjusted_chain_is_biased():
    biased = 0
    for inst in _instances(100, 606):
        raw = unadjusted_transition_matrix(inst, default_config(inst))
        if tv_distance(stationary_distribution(raw.p), raw.pi) > 0.01:
            biased += 1
    assert biased >= 95, f"only {biased}/100 unadjusted kernels show TV > 0.01"


def test_05_preconditioning_and_stalling_trend():
    cfg = ExperimentConfig(
        experiment="rate_boxplot", q=2, nt=2, nr=2,
        snr_db_list=[4.0, 6.0, 8.0, 10.0], n_realizations=100, seed=71,
    )
    summary = run_rate_boxplot(cfg, threads=4).metrics["summary"]
    assert summary["8.0dB/preconditioned"]["median"] <= summary["8.0dB/naive"]["median"]
    assert summary["10.0dB/preconditioned"]["median"] <= summary["10.0dB/naive"]["median"]
    assert summary["10.0dB/naive"]["median"] > summary["4.0dB/naive"]["median"]


def test_06_sampler_matches_kernel_row():
    inst = _instances(1, 828)[0]
    for mode in ("naive", "preconditioned"):
        cfg = default_config(inst, mode=mode)
        tm = build_transition_matrix(inst, cfg)
        start = 3
        freq = one_step_frequencies(
            inst, cfg, tm.space.states[start], 1_000_000, np.random.default_rng(99)
        )
        expected = 1_000_000 * tm.p[start]
        # pool sub-Cochran cells so the chi-square approximation holds
        keep = expected >= 5.0
        obs = np.append(freq[keep], freq[~keep].sum())
        want = np.append(expected[keep], expected[~keep].sum())
        if want[-1] == 0.0:
            obs, want = obs[:-1], want[:-1]
        _, p_value = stats.chisquare(obs, want)
        assert p_value >= 0.01, f"{mode}: chi-square p={p_value:.4f} rejects at 1%"


def test_07_list_estimator_equals_exhaustive_on_full_lattice():
    worst = 0.0
    for inst in _instances(50, 909):
        space = enumerate_states(inst)
        pool = SampleList(
            samples=space.states.astype(np.float64),
            f_values=metric(inst, space.states),
            source_tau=1.0,
        )
        err = np.abs(llr_list(pool, inst).llrs - exact_llr(inst).llrs).max()
        worst = max(worst, float(err))
    assert worst <= 1e-10, f"full-lattice list estimator off by {worst:.3e}"


def test_08_soft_output_consistency():
    cfg = ExperimentConfig(
        experiment="llr_fidelity", q=2, nt=4, nr=4, snr_db_list=[8.0],
        n_realizations=100, s_grid=(256, 1024, 4096), seed=515,
    )
    summary = run_llr_fidelity(cfg, threads=4).metrics["summary"]
    med = {s: summary[f"{s}/is"]["median_realization_mean_abs_err"] for s in (256, 1024, 4096)}
    assert med[256] > med[1024] > med[4096], f"errors not decreasing: {med}"
    agree = summary["4096/is"]["sign_agreement_confident"]
    assert agree >= 0.99, f"sign agreement {agree:.4f} < 0.99 on confident bits"
    for s in (256, 1024, 4096):
        is_err = summary[f"{s}/is"]["median_realization_mean_abs_err"]
        list_err = summary[f"{s}/list"]["median_realization_mean_abs_err"]
        assert is_err <= list_err, f"S={s}: reweighted {is_err:.4f} > list {list_err:.4f}"


def test_09_hard_decisions_near_exhaustive():
    # operating point calibrated so the exhaustive detector sits near SER 1e-2
    snr = 20.5
    cfg = ExperimentConfig(
        experiment="ser_sweep", q=4, nt=4, nr=4, snr_db_list=[snr],
        n_vectors=100_000, detectors=("dmala", "map"), seed=626,
        sampler={"init": "spread", "n_iters": 100, "n_chains": 16},
    )
    points = run_ser_sweep(cfg, threads=4).metrics["points"]
    map_ser = points[f"{snr}dB/map"]["ser"]
    dmala_ser = points[f"{snr}dB/dmala"]["ser"]
    assert 0.006 <= map_ser <= 0.015, f"operating point drifted: map SER {map_ser:.5f}"
    gap = (dmala_ser - map_ser) / map_ser
    assert gap <= 0.10, (
        f"sampler SER {dmala_ser:.5f} vs exhaustive {map_ser:.5f}: relative gap {gap:.3f} > 0.10"
    )


def test_10_numerical_kernels():
    rng = np.random.default_rng(111)
    for spec, q in ((QPSK_2X2, 2), (ChannelSpec(nt=3, nr=3), 4)):
        inst = random_instance(spec, q, 8.0, rng)
        amps = inst.constellation.amplitudes
        x = amps[rng.integers(0, q, size=inst.n_dims)]
        for tau in (1.0, 2.0):
            grad = metric_gradient(inst, x, tau)
            fd = np.empty_like(grad)
            h = 1e-5
            for i in range(x.size):
                up, dn = x.copy(), x.copy()
                up[i] += h
                dn[i] -= h
                fd[i] = (metric(inst, up, tau) - metric(inst, dn, tau)) / (2 * h)
            rel = np.abs(grad - fd).max() / np.abs(grad).max()
            assert rel <= 1e-6, f"gradient rel err {rel:.3e}"

        # proposal rows are normalized for both drift modes
        states = amps[rng.integers(0, q, size=(64, inst.n_dims))]
        for mode in ("naive", "preconditioned"):
            cfg = default_config(inst, mode=mode)
            pre = compute_preconditioner(inst.h, cfg.damping) if mode == "preconditioned" else None
            drift, step = _effective_drift(metric_gradient(inst, states, 1.0), cfg, pre)
            table = build_proposal(states, drift, step, amps)
            assert np.abs(table.probs.sum(axis=-1) - 1.0).max() <= 1e-12

    vals = rng.uniform(-30, 30, size=1000)
    direct = float(np.log(np.exp(vals).sum()))
    assert abs(logsumexp_stream(vals) - direct) <= 1e-9
    sub = vals[:200]
    direct_sub = float(np.log(np.exp(sub).sum()))
    assert abs(logsumexp_stream(sub, mode="lookup") - direct_sub) <= 2e-3


def test_11_byte_identical_reruns_any_thread_count(tmp_path):
    cfg = {
        "q": 2, "nt": 2, "nr": 2, "snr_db_list": [8.0], "n_vectors": 100,
        "detectors": ["dmala", "mmse", "map", "gibbs"],
        "sampler": {"n_iters": 30, "n_chains": 8}, "seed": 9,
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    outs = []
    for i, threads in enumerate((1, 4, 1)):
        out = tmp_path / f"run{i}"
        code = main(["ser-sweep", "--config", str(cfg_path),
                     "--out", str(out), "--threads", str(threads)])
        assert code == 0
        outs.append(out)
    names = sorted(f.name for f in outs[0].iterdir())
    assert names == sorted(f.name for f in outs[1].iterdir())
    assert "ser.csv" in names and "record.json" in names
    for name in names:
        ref = (outs[0] / name).read_bytes()
        assert ref == (outs[1] / name).read_bytes(), f"{name} differs across thread counts"
        assert ref == (outs[2] / name).read_bytes(), f"{name} differs across reruns"

    lcfg = ExperimentConfig(
        experiment="llr_fidelity", q=2, nt=2, nr=2, s_grid=(8, 16),
        n_realizations=4, seed=3, sampler={"n_iters": 20},
    )
    run_llr_fidelity(lcfg, out=tmp_path / "l1", threads=1)
    run_llr_fidelity(lcfg, out=tmp_path / "l2", threads=3)
    for name in ("record.json", "llr_fidelity.csv", "config.json"):
        assert (tmp_path / "l1" / name).read_bytes() == (tmp_path / "l2" / name).read_bytes()
