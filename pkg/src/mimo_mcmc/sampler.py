"""Metropolis-adjusted discrete Langevin sampling over PAM lattices.

The target is pi(x) proportional to exp(f(x)/tau) on the product alphabet,
where f(x) = -||y - Hx||^2 / sigma^2. Proposals factorize per coordinate: a
second-order expansion of f around the current point scores every candidate
amplitude, a softmax turns the scores into categorical distributions, and a
Metropolis-Hastings correction restores exactness. An optional preconditioner
(H^T H + damping I)^-1 whitens the drift for ill-conditioned channels.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .llr import SampleList
from .model import DetectionInstance

__all__ = [
    "SamplerConfig",
    "ProposalTable",
    "ChainState",
    "ChainResult",
    "default_config",
    "chain_rng",
    "metric",
    "metric_gradient",
    "compute_preconditioner",
    "build_proposal",
    "sample_proposal",
    "proposal_log_prob",
    "acceptance_probability",
    "init_state",
    "dmala_step",
    "run_chain",
    "run_parallel_chains",
    "chain_occupancy",
    "one_step_frequencies",
]

_MODES = ("naive", "preconditioned")
_INITS = ("uniform", "mmse", "spread")


@dataclass(frozen=True)
class SamplerConfig:
    """Knobs for the discrete Langevin chain.

    step_size is the proposal step (quadratic penalty scale) in the naive
    mode. In preconditioned mode the drift is (precond @ grad) / precond_scale
    and the penalty scale becomes step_size * precond_scale, so precond_scale
    trades drift strength against proposal spread. damping is the Tikhonov
    term added to H^T H before inversion. temperature > 1 flattens the target
    for soft-output sampling; 1 targets the posterior itself.

    init picks the start of each chain: "uniform" draws a random lattice
    point per chain, "mmse" starts every chain at the rounded regularized LS
    point, and "spread" fans chain i across a deterministic grid of pushes
    along the channel's two weakest right singular directions around that LS
    point, which is where distinct near-optimal lattice hypotheses separate.
    """

    step_size: float
    mode: str = "preconditioned"
    precond_scale: float = 1.0
    damping: float = 0.0
    temperature: float = 1.0
    n_iters: int = 100
    n_chains: int = 128
    seed: int = 0
    init: str = "uniform"

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}")
        if self.precond_scale <= 0:
            raise ValueError("precond_scale must be positive")
        if self.damping < 0:
            raise ValueError("damping must be nonnegative")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.n_iters < 1 or self.n_chains < 1:
            raise ValueError("n_iters and n_chains must be at least 1")
        if self.init not in _INITS:
            raise ValueError(f"init must be one of {_INITS}")


def default_config(instance: DetectionInstance, **overrides) -> SamplerConfig:
    """Instance-matched defaults derived from the target's effective noise.

    The tempered target exp(f/tau) is the unit-temperature posterior of the
    same observation with noise tau sigma^2, so the defaults follow that
    product: step tau sigma^2, scale d_min^2/(tau sigma^2), damping
    tau sigma^2/(2 d_min^2). The proposal then keeps the same spread around
    the drifted mean at any temperature and only the accept rule softens.
    Explicit overrides always win.
    """
    s2 = float(overrides.get("temperature", 1.0)) * instance.sigma2
    d2 = instance.constellation.d_min ** 2
    base = dict(step_size=s2, precond_scale=d2 / s2, damping=s2 / (2.0 * d2))
    base.update(overrides)
    return SamplerConfig(**base)


def chain_rng(seed: int, chain_index: int) -> np.random.Generator:
    """Independent per-chain stream hashed from (seed, chain_index).

    Chains draw from disjoint streams, so adding or removing chains never
    perturbs the others, and any execution order gives identical output.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, chain_index))))


def metric(instance: DetectionInstance, x: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """f(x)/tau = -||y - Hx||^2 / (tau sigma^2) for one point (N,) or a batch (B, N)."""
    x = np.asarray(x)
    if x.ndim == 1:
        r = instance.y - np.einsum("mn,n->m", instance.h, x)
        return -(r * r).sum() / (temperature * instance.sigma2)
    r = instance.y - np.einsum("mn,bn->bm", instance.h, x)
    return -(r * r).sum(axis=-1) / (temperature * instance.sigma2)


def metric_gradient(instance: DetectionInstance, x: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """Gradient of the relaxed metric: (2 / (tau sigma^2)) H^T (y - Hx)."""
    x = np.asarray(x)
    c = 2.0 / (temperature * instance.sigma2)
    if x.ndim == 1:
        r = instance.y - np.einsum("mn,n->m", instance.h, x)
        return c * np.einsum("mn,m->n", instance.h, r)
    r = instance.y - np.einsum("mn,bn->bm", instance.h, x)
    return c * np.einsum("mn,bm->bn", instance.h, r)


def compute_preconditioner(h: np.ndarray, damping: float) -> np.ndarray:
    """(H^T H + damping I)^-1, symmetrized. Requires the damped Gram matrix to be invertible."""
    if damping < 0:
        raise ValueError("damping must be nonnegative")
    n = h.shape[1]
    gram = h.T @ h + damping * np.eye(n)
    inv = np.linalg.inv(gram)
    return 0.5 * (inv + inv.T)


@dataclass(frozen=True)
class ProposalTable:
    """Per-coordinate categorical proposals over the alphabet.

    log_probs and probs have shape (..., N, Q); rows are normalized. The same
    container serves a single chain (N, Q) and a lockstep batch (B, N, Q).
    """

    log_probs: np.ndarray
    probs: np.ndarray
    alphabet: np.ndarray


def build_proposal(
    x: np.ndarray,
    drift: np.ndarray,
    step: float,
    alphabet: np.ndarray,
) -> ProposalTable:
    """Softmax the local quadratic score of each candidate amplitude.

    score(a) = drift_n (a - x_n) / 2 - (a - x_n)^2 / (2 step), per coordinate.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    delta = alphabet - np.asarray(x)[..., None]
    scores = 0.5 * drift[..., None] * delta - delta * delta / (2.0 * step)
    peak = scores.max(axis=-1, keepdims=True)
    shifted = scores - peak
    log_norm = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    log_probs = shifted - log_norm
    return ProposalTable(log_probs=log_probs, probs=np.exp(log_probs), alphabet=alphabet)


def _nearest_idx(alphabet: np.ndarray, values: np.ndarray) -> np.ndarray:
    mids = 0.5 * (alphabet[1:] + alphabet[:-1])
    return np.searchsorted(mids, values, side="left")


def _categorical_indices(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    # Inverse CDF per row; the clip guards u landing beyond a cumsum that
    # rounds below 1.
    cdf = np.cumsum(probs, axis=-1)
    idx = (u[..., None] >= cdf).sum(axis=-1)
    return np.minimum(idx, probs.shape[-1] - 1)


def _gather_log_prob(log_probs: np.ndarray, idx: np.ndarray) -> np.ndarray:
    picked = np.take_along_axis(log_probs, idx[..., None], axis=-1)[..., 0]
    return picked.sum(axis=-1)


def sample_proposal(table: ProposalTable, rng: np.random.Generator):
    """Draw each coordinate from its categorical row.

    Returns (x_proposed, log_q_forward) where log_q_forward is the summed log
    probability of the drawn point under the same table.
    """
    n = table.probs.shape[-2]
    u = rng.random(n)
    idx = _categorical_indices(table.probs, u)
    x_new = table.alphabet[idx]
    return x_new, _gather_log_prob(table.log_probs, idx)


def proposal_log_prob(table: ProposalTable, x: np.ndarray) -> np.ndarray:
    """log q(x | base point of table), summed over coordinates."""
    idx = _nearest_idx(table.alphabet, np.asarray(x))
    return _gather_log_prob(table.log_probs, idx)


def acceptance_probability(f_x, f_prime, log_q_forward, log_q_reverse):
    """min{1, exp(f' - f) q(x|x') / q(x'|x)}, evaluated in the log domain.

    Accepts scalars or broadcastable arrays.
    """
    log_ratio = (f_prime - f_x) + (log_q_reverse - log_q_forward)
    safe = np.minimum(log_ratio, 0.0)
    return np.where(log_ratio >= 0.0, 1.0, np.exp(safe))


def _effective_drift(grad: np.ndarray, config: SamplerConfig, precond: np.ndarray | None):
    if config.mode == "naive":
        return grad, config.step_size
    if grad.ndim == 1:
        drift = np.einsum("ij,j->i", precond, grad) / config.precond_scale
    else:
        drift = np.einsum("ij,bj->bi", precond, grad) / config.precond_scale
    return drift, config.step_size * config.precond_scale


@dataclass
class ChainState:
    """Current point with its cached metric, gradient, and forward proposal."""

    x: np.ndarray
    f_x: float
    grad: np.ndarray
    table: ProposalTable
    n_accepted: int = 0


def _ls_soft_point(instance: DetectionInstance) -> np.ndarray:
    """Ridge-regularized least-squares estimate, before lattice snapping."""
    h, y = instance.h, instance.y
    gram = h.T @ h + instance.sigma2 * np.eye(h.shape[1])
    return np.linalg.solve(gram, h.T @ y)


def _mmse_point(instance: DetectionInstance) -> np.ndarray:
    alphabet = instance.constellation.amplitudes
    return alphabet[_nearest_idx(alphabet, _ls_soft_point(instance))]


def _spread_start_indices(instance: DetectionInstance, n_chains: int) -> np.ndarray:
    """Deterministic start grid fanned around the regularized LS point.

    Chains are placed on an m x m grid of displacements (m = ceil sqrt B)
    along the two weakest right singular directions of the channel, out to
    three lattice gaps each way. The observation constrains those directions
    least, so competing near-optimal lattice hypotheses separate along them
    and start diversity is spent where it matters instead of isotropically.
    Returns alphabet indices, shape (n_chains, N).
    """
    soft = _ls_soft_point(instance)
    vt = np.linalg.svd(instance.h)[2]
    gap = 2.0 * instance.constellation.d_min
    m = int(np.ceil(np.sqrt(n_chains)))
    levels = np.linspace(-3.0, 3.0, m) * gap if m > 1 else np.array([0.0])
    aa, bb = np.meshgrid(levels, levels, indexing="ij")
    pairs = np.stack([aa.ravel(), bb.ravel()], axis=1)[:n_chains]
    points = soft + pairs[:, :1] * vt[-1] + pairs[:, 1:] * vt[-2]
    return _nearest_idx(instance.constellation.amplitudes, points)


def init_state(
    instance: DetectionInstance,
    config: SamplerConfig,
    rng: np.random.Generator,
    precond: np.ndarray | None = None,
    chain_index: int = 0,
) -> ChainState:
    """Initialize one chain per config.init.

    chain_index selects the row of the deterministic grid when init is
    "spread" (the grid is sized by config.n_chains); the other modes ignore
    it. Only "uniform" consumes random draws.
    """
    alphabet = instance.constellation.amplitudes
    n = instance.n_dims
    if config.init == "uniform":
        x = alphabet[rng.integers(0, alphabet.size, size=n)]
    elif config.init == "spread":
        total = max(config.n_chains, chain_index + 1)
        x = alphabet[_spread_start_indices(instance, total)[chain_index]]
    else:
        x = _mmse_point(instance)
    if config.mode == "preconditioned" and precond is None:
        precond = compute_preconditioner(instance.h, config.damping)
    f_x = metric(instance, x, config.temperature)
    grad = metric_gradient(instance, x, config.temperature)
    drift, step = _effective_drift(grad, config, precond)
    table = build_proposal(x, drift, step, alphabet)
    return ChainState(x=x, f_x=float(f_x), grad=grad, table=table)


def dmala_step(
    state: ChainState,
    instance: DetectionInstance,
    config: SamplerConfig,
    rng: np.random.Generator,
    precond: np.ndarray | None = None,
):
    """One proposal/accept step. Returns (state, accepted).

    On acceptance the reverse-side proposal table is reused as the new forward
    table; on rejection every cached quantity survives, so the metric and
    gradient are evaluated once per step either way.
    """
    if config.mode == "preconditioned" and precond is None:
        precond = compute_preconditioner(instance.h, config.damping)
    x_prime, log_q_fwd = sample_proposal(state.table, rng)
    f_prime = float(metric(instance, x_prime, config.temperature))
    grad_prime = metric_gradient(instance, x_prime, config.temperature)
    drift, step = _effective_drift(grad_prime, config, precond)
    table_prime = build_proposal(x_prime, drift, step, state.table.alphabet)
    log_q_rev = proposal_log_prob(table_prime, state.x)
    a = acceptance_probability(state.f_x, f_prime, log_q_fwd, log_q_rev)
    if rng.random() < a:
        return (
            ChainState(
                x=x_prime,
                f_x=f_prime,
                grad=grad_prime,
                table=table_prime,
                n_accepted=state.n_accepted + 1,
            ),
            True,
        )
    return state, False


@dataclass
class ChainResult:
    """Output of one chain. Trajectory fields are filled only when recorded."""

    final_x: np.ndarray
    final_f: float
    n_accepted: int
    n_iters: int
    states: np.ndarray | None = None
    f_values: np.ndarray | None = None
    accepts: np.ndarray | None = None


class _Batch:
    """Lockstep engine advancing B chains with vectorized per-step work.

    Every chain consumes its own RNG stream in the same pattern as the scalar
    path (N alphabet indices at init, then N + 1 uniforms per step), so batch
    composition never changes any chain's draw sequence, and the einsum-based
    updates reproduce the scalar arithmetic bit for bit.
    """

    # Uniforms are drawn in blocks of roughly this many doubles per chunk.
    _CHUNK_BUDGET = 8_000_000

    def __init__(
        self,
        instance: DetectionInstance,
        config: SamplerConfig,
        gens: list,
        chain_offset: int = 0,
    ):
        self.instance = instance
        self.config = config
        self.gens = gens
        self.alphabet = instance.constellation.amplitudes
        self.n = instance.n_dims
        self.q = self.alphabet.size
        self.precond = (
            compute_preconditioner(instance.h, config.damping)
            if config.mode == "preconditioned"
            else None
        )
        b = len(gens)
        if config.init == "uniform":
            idx = np.empty((b, self.n), dtype=np.int64)
            for i, g in enumerate(gens):
                idx[i] = g.integers(0, self.q, size=self.n)
        elif config.init == "spread":
            # batch rows are chains chain_offset..chain_offset+b-1 of the grid
            total = max(config.n_chains, chain_offset + b)
            idx = _spread_start_indices(instance, total)[chain_offset : chain_offset + b]
        else:
            point = _mmse_point(instance)
            idx = np.broadcast_to(_nearest_idx(self.alphabet, point), (b, self.n)).copy()
        self.x_idx = idx
        self.x = self.alphabet[idx]
        self.f = metric(instance, self.x, config.temperature)
        self.best_x = self.x.copy()
        self.best_f = self.f.copy()
        grad = metric_gradient(instance, self.x, config.temperature)
        drift, step = _effective_drift(grad, config, self.precond)
        self.step = step
        table = build_proposal(self.x, drift, step, self.alphabet)
        self.log_probs = table.log_probs
        self.probs = table.probs
        self.n_accepted = np.zeros(b, dtype=np.int64)

    def _uniform_chunks(self, n_steps: int):
        b = len(self.gens)
        per_step = self.n + 1
        chunk = max(1, min(n_steps, self._CHUNK_BUDGET // max(1, b * per_step)))
        done = 0
        while done < n_steps:
            size = min(chunk, n_steps - done)
            buf = np.empty((b, size, per_step))
            for i, g in enumerate(self.gens):
                buf[i] = g.random(size * per_step).reshape(size, per_step)
            for s in range(size):
                yield buf[:, s, :]
            done += size

    def step_once(self, u: np.ndarray):
        """Advance all chains one step given their (B, N+1) uniforms."""
        inst, cfg = self.instance, self.config
        u_prop, u_acc = u[:, : self.n], u[:, self.n]
        idx_new = _categorical_indices(self.probs, u_prop)
        x_new = self.alphabet[idx_new]
        log_q_fwd = _gather_log_prob(self.log_probs, idx_new)
        f_new = metric(inst, x_new, cfg.temperature)
        grad_new = metric_gradient(inst, x_new, cfg.temperature)
        drift_new, _ = _effective_drift(grad_new, cfg, self.precond)
        table_new = build_proposal(x_new, drift_new, self.step, self.alphabet)
        log_q_rev = _gather_log_prob(table_new.log_probs, self.x_idx)
        a = acceptance_probability(self.f, f_new, log_q_fwd, log_q_rev)
        acc = u_acc < a
        keep = acc[:, None]
        self.x_idx = np.where(keep, idx_new, self.x_idx)
        self.x = np.where(keep, x_new, self.x)
        self.f = np.where(acc, f_new, self.f)
        keep3 = acc[:, None, None]
        self.log_probs = np.where(keep3, table_new.log_probs, self.log_probs)
        self.probs = np.where(keep3, table_new.probs, self.probs)
        self.n_accepted += acc
        better = self.f > self.best_f
        self.best_x = np.where(better[:, None], self.x, self.best_x)
        self.best_f = np.where(better, self.f, self.best_f)
        return acc

    def flat_state_index(self) -> np.ndarray:
        radix = self.q ** np.arange(self.n - 1, -1, -1)
        return self.x_idx @ radix


def _resolve_gens(config: SamplerConfig, n_chains: int):
    return [chain_rng(config.seed, i) for i in range(n_chains)]


def run_chain(
    instance: DetectionInstance,
    config: SamplerConfig,
    rng: np.random.Generator | None = None,
    chain_index: int = 0,
    record: str = "final",
) -> ChainResult:
    """Run one chain for n_iters samples (the initial point counts as sample 1).

    record="trajectory" keeps every state, its tempered metric, and the accept
    flag of each transition; "final" keeps only the last sample.
    """
    if record not in ("final", "trajectory"):
        raise ValueError("record must be 'final' or 'trajectory'")
    gen = rng if rng is not None else chain_rng(config.seed, chain_index)
    batch = _Batch(instance, config, [gen], chain_offset=chain_index)
    t = config.n_iters
    if record == "trajectory":
        states = np.empty((t, instance.n_dims))
        f_values = np.empty(t)
        accepts = np.zeros(max(t - 1, 0), dtype=bool)
        states[0] = batch.x[0]
        f_values[0] = batch.f[0]
        for step, u in enumerate(batch._uniform_chunks(t - 1)):
            acc = batch.step_once(u)
            states[step + 1] = batch.x[0]
            f_values[step + 1] = batch.f[0]
            accepts[step] = acc[0]
        return ChainResult(
            final_x=batch.x[0].copy(),
            final_f=float(batch.f[0]),
            n_accepted=int(batch.n_accepted[0]),
            n_iters=t,
            states=states,
            f_values=f_values,
            accepts=accepts,
        )
    for u in batch._uniform_chunks(t - 1):
        batch.step_once(u)
    return ChainResult(
        final_x=batch.x[0].copy(),
        final_f=float(batch.f[0]),
        n_accepted=int(batch.n_accepted[0]),
        n_iters=t,
    )


def run_parallel_chains(
    instance: DetectionInstance, config: SamplerConfig, record: str = "final"
) -> SampleList:
    """One sample per chain from n_chains independent chains, as a SampleList.

    record="final" keeps each chain's last state; record="best" keeps the
    highest-metric state each chain visited, which is what hard detection
    wants. Chain i draws from the stream hashed from (config.seed, i); the
    result is a pure function of (instance, config) whatever the execution
    layout. The cached f values are converted back to the untempered metric.
    """
    if record not in ("final", "best"):
        raise ValueError("record must be 'final' or 'best'")
    batch = _Batch(instance, config, _resolve_gens(config, config.n_chains))
    for u in batch._uniform_chunks(config.n_iters - 1):
        batch.step_once(u)
    x, f = (batch.best_x, batch.best_f) if record == "best" else (batch.x, batch.f)
    return SampleList(
        samples=x.copy(),
        f_values=config.temperature * f,
        source_tau=config.temperature,
    )


def chain_occupancy(instance: DetectionInstance, config: SamplerConfig, n_chains: int) -> np.ndarray:
    """State-occupancy counts of n_chains chains at every sample index.

    Returns shape (n_iters, Q^N); row t counts the chains at each flattened
    lattice state at sample index t+1 (row 0 is the initialization). States
    flatten big-endian: coordinate 0 is the most significant digit.
    """
    n_states = instance.constellation.q ** instance.n_dims
    batch = _Batch(instance, config, _resolve_gens(config, n_chains))
    counts = np.zeros((config.n_iters, n_states), dtype=np.int64)
    counts[0] = np.bincount(batch.flat_state_index(), minlength=n_states)
    for step, u in enumerate(batch._uniform_chunks(config.n_iters - 1)):
        batch.step_once(u)
        counts[step + 1] = np.bincount(batch.flat_state_index(), minlength=n_states)
    return counts


def one_step_frequencies(
    instance: DetectionInstance,
    config: SamplerConfig,
    x0: np.ndarray,
    n_draws: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Monte Carlo one-step transition counts out of a fixed state.

    Draws n_draws independent proposals from the forward table at x0, applies
    the acceptance rule to each, and histograms the landing states over the
    flattened lattice. Exercises the same proposal/acceptance helpers as the
    chain engine.
    """
    alphabet = instance.constellation.amplitudes
    n, q = instance.n_dims, alphabet.size
    precond = (
        compute_preconditioner(instance.h, config.damping)
        if config.mode == "preconditioned"
        else None
    )
    f0 = float(metric(instance, x0, config.temperature))
    g0 = metric_gradient(instance, x0, config.temperature)
    drift0, step = _effective_drift(g0, config, precond)
    table0 = build_proposal(x0, drift0, step, alphabet)
    u = rng.random((n_draws, n))
    idx_new = _categorical_indices(np.broadcast_to(table0.probs, (n_draws, n, q)), u)
    x_new = alphabet[idx_new]
    log_q_fwd = _gather_log_prob(np.broadcast_to(table0.log_probs, (n_draws, n, q)), idx_new)
    f_new = metric(instance, x_new, config.temperature)
    grad_new = metric_gradient(instance, x_new, config.temperature)
    drift_new, _ = _effective_drift(grad_new, config, precond)
    table_new = build_proposal(x_new, drift_new, step, alphabet)
    idx0 = np.broadcast_to(_nearest_idx(alphabet, x0), (n_draws, n))
    log_q_rev = _gather_log_prob(table_new.log_probs, idx0)
    a = acceptance_probability(f0, f_new, log_q_fwd, log_q_rev)
    acc = rng.random(n_draws) < a
    radix = q ** np.arange(n - 1, -1, -1)
    idx0_flat = int(_nearest_idx(alphabet, x0) @ radix)
    landing = np.where(acc, idx_new @ radix, idx0_flat)
    return np.bincount(landing, minlength=q ** n)
