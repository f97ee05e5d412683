"""Reference detectors: linear MMSE, Gibbs scan, and the unadjusted proposal chain.

The unadjusted chain drops the accept step from the Langevin sampler, which
biases its stationary law; it exists as a negative control, not a detector.
"""

from __future__ import annotations

import numpy as np

from .llr import SampleList
from .model import DetectionInstance
from .sampler import (
    SamplerConfig,
    _categorical_indices,
    _effective_drift,
    build_proposal,
    chain_rng,
    compute_preconditioner,
    metric,
    metric_gradient,
)

__all__ = [
    "mmse_detect",
    "gibbs_step",
    "run_gibbs_chain",
    "unadjusted_langevin_step",
    "unadjusted_occupancy",
]


def mmse_detect(instance: DetectionInstance) -> np.ndarray:
    """Regularized linear estimate snapped to the lattice.

    With unit-energy complex symbols each real coordinate carries power 1/2
    and each real noise component sigma^2/2, so the regularizer is sigma^2.
    """
    h, y = instance.h, instance.y
    gram = h.T @ h + instance.sigma2 * np.eye(h.shape[1])
    soft = np.linalg.solve(gram, h.T @ y)
    cons = instance.constellation
    return cons.amplitudes[cons.nearest_indices(soft)]


def gibbs_step(
    instance: DetectionInstance,
    x: np.ndarray,
    rng: np.random.Generator,
    temperature: float = 1.0,
) -> np.ndarray:
    """One systematic sweep: each coordinate redrawn from its full conditional.

    The conditional over the alphabet is a softmax of -||y - Hx||^2 /
    (tau sigma^2) as a function of that coordinate alone, updated through the
    residual so each sweep costs O(N M Q).
    """
    h, y, s2 = instance.h, instance.y, instance.sigma2
    alphabet = instance.constellation.amplitudes
    x = np.asarray(x, dtype=np.float64).copy()
    r = y - np.einsum("mn,n->m", h, x)
    rnorm2 = float((r * r).sum())
    col_norm2 = (h * h).sum(axis=0)
    for n in range(x.size):
        delta = alphabet - x[n]
        dot = float(np.einsum("m,m->", h[:, n], r))
        scores = -(rnorm2 - 2.0 * delta * dot + delta * delta * col_norm2[n]) / (
            temperature * s2
        )
        shifted = scores - scores.max()
        probs = np.exp(shifted)
        probs /= probs.sum()
        idx = int(_categorical_indices(probs, np.asarray(rng.random())))
        moved = alphabet[idx] - x[n]
        if moved != 0.0:
            rnorm2 = rnorm2 - 2.0 * moved * dot + moved * moved * col_norm2[n]
            r = r - moved * h[:, n]
            x[n] = alphabet[idx]
    return x


def run_gibbs_chain(
    instance: DetectionInstance,
    n_iters: int,
    rng: np.random.Generator,
    temperature: float = 1.0,
) -> SampleList:
    """Systematic-scan Gibbs from a uniform start; keeps every visited state."""
    alphabet = instance.constellation.amplitudes
    n = instance.n_dims
    x = alphabet[rng.integers(0, alphabet.size, size=n)]
    states = np.empty((n_iters, n))
    states[0] = x
    for t in range(1, n_iters):
        x = gibbs_step(instance, x, rng, temperature)
        states[t] = x
    f = metric(instance, states)
    return SampleList(samples=states, f_values=f, source_tau=temperature)


def unadjusted_langevin_step(
    instance: DetectionInstance,
    x: np.ndarray,
    config: SamplerConfig,
    rng: np.random.Generator,
    precond: np.ndarray | None = None,
) -> np.ndarray:
    """Draw from the Langevin proposal and keep it unconditionally."""
    if config.mode == "preconditioned" and precond is None:
        precond = compute_preconditioner(instance.h, config.damping)
    grad = metric_gradient(instance, x, config.temperature)
    drift, step = _effective_drift(grad, config, precond)
    table = build_proposal(x, drift, step, instance.constellation.amplitudes)
    idx = _categorical_indices(table.probs, rng.random(instance.n_dims))
    return table.alphabet[idx]


def unadjusted_occupancy(instance: DetectionInstance, config: SamplerConfig, n_chains: int) -> np.ndarray:
    """State-occupancy counts of unadjusted chains at every sample index.

    Mirrors the adjusted engine's seeding and binning: chain i hashes
    (config.seed, i), rows are sample indices, bins are big-endian states.
    """
    alphabet = instance.constellation.amplitudes
    n, q = instance.n_dims, alphabet.size
    gens = [chain_rng(config.seed, i) for i in range(n_chains)]
    precond = (
        compute_preconditioner(instance.h, config.damping)
        if config.mode == "preconditioned"
        else None
    )
    idx = np.empty((n_chains, n), dtype=np.int64)
    for i, g in enumerate(gens):
        idx[i] = g.integers(0, q, size=n)
    x = alphabet[idx]
    radix = q ** np.arange(n - 1, -1, -1)
    counts = np.zeros((config.n_iters, q ** n), dtype=np.int64)
    counts[0] = np.bincount(idx @ radix, minlength=q ** n)
    u = np.empty((n_chains, n))
    for t in range(1, config.n_iters):
        for i, g in enumerate(gens):
            u[i] = g.random(n)
        grad = metric_gradient(instance, x, config.temperature)
        drift, step = _effective_drift(grad, config, precond)
        table = build_proposal(x, drift, step, alphabet)
        idx = _categorical_indices(table.probs, u)
        x = alphabet[idx]
        counts[t] = np.bincount(idx @ radix, minlength=q ** n)
    return counts
