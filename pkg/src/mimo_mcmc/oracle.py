"""Exhaustive small-instance references: posteriors, LLRs, kernels, spectra.

Everything here enumerates the full product lattice, so it is only usable up
to STATE_CAP states, but within that budget it is exact and serves as the
ground truth the samplers are checked against. The transition matrix reuses
the sampler's own proposal and acceptance code paths.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .llr import LlrVector, logsumexp_stream
from .model import DetectionInstance
from .sampler import (
    SamplerConfig,
    acceptance_probability,
    build_proposal,
    chain_occupancy,
    compute_preconditioner,
    metric,
    metric_gradient,
    _effective_drift,
)

__all__ = [
    "STATE_CAP",
    "OracleCapError",
    "StateSpace",
    "PosteriorTable",
    "TransitionMatrix",
    "enumerate_states",
    "exact_posterior",
    "exact_map",
    "map_detect",
    "exact_llr",
    "build_transition_matrix",
    "unadjusted_transition_matrix",
    "detailed_balance_check",
    "stationary_distribution",
    "convergence_rate",
    "tv_distance",
    "tv_decay_curve",
    "evolve_distribution",
    "empirical_distribution",
    "tv_binomial_sigma",
]

# Dense enumeration beyond this is out of desk scale.
STATE_CAP = 65536


class OracleCapError(Exception):
    """The product lattice exceeds the exhaustive-enumeration cap."""


@dataclass(frozen=True)
class StateSpace:
    """All Q^N lattice points in big-endian digit order.

    states[i] are amplitudes, digits[i] the alphabet indices; coordinate 0 is
    the most significant digit of the flat index, matching the chain engine's
    occupancy layout.
    """

    states: np.ndarray
    digits: np.ndarray
    q: int
    n: int

    @property
    def size(self) -> int:
        return self.states.shape[0]

    def index_of(self, x: np.ndarray) -> int:
        mids = 0.5 * (np.unique(self.states[:, 0])[1:] + np.unique(self.states[:, 0])[:-1])
        dig = np.searchsorted(mids, np.asarray(x), side="left")
        radix = self.q ** np.arange(self.n - 1, -1, -1)
        return int(dig @ radix)


def enumerate_states(instance: DetectionInstance) -> StateSpace:
    q = instance.constellation.q
    n = instance.n_dims
    size = q ** n
    if size > STATE_CAP:
        raise OracleCapError(f"{q}^{n} = {size} states exceeds the cap of {STATE_CAP}")
    shifts = q ** np.arange(n - 1, -1, -1)
    digits = (np.arange(size)[:, None] // shifts) % q
    return StateSpace(
        states=instance.constellation.amplitudes[digits],
        digits=digits,
        q=q,
        n=n,
    )


@dataclass(frozen=True)
class PosteriorTable:
    """Exact tempered posterior over the enumerated lattice."""

    pi: np.ndarray
    log_weights: np.ndarray
    space: StateSpace
    temperature: float


def exact_posterior(instance: DetectionInstance, temperature: float = 1.0) -> PosteriorTable:
    """pi(x) proportional to exp(f(x)/tau), normalized by direct summation."""
    space = enumerate_states(instance)
    log_w = metric(instance, space.states, temperature)
    shifted = log_w - log_w.max()
    w = np.exp(shifted)
    return PosteriorTable(pi=w / w.sum(), log_weights=log_w, space=space, temperature=temperature)


def exact_map(instance: DetectionInstance) -> np.ndarray:
    """Exhaustive maximum-likelihood point: argmin ||y - Hx|| over the lattice."""
    space = enumerate_states(instance)
    f = metric(instance, space.states)
    return space.states[int(np.argmax(f))].copy()


_HALF_CACHE: dict = {}


def _half_lattices(amplitudes: np.ndarray, n: int):
    key = (amplitudes.tobytes(), n)
    if key not in _HALF_CACHE:
        q = amplitudes.size
        n_a = n // 2
        def block(k):
            shifts = q ** np.arange(k - 1, -1, -1)
            return amplitudes[(np.arange(q ** k)[:, None] // shifts) % q]
        _HALF_CACHE[key] = (block(n_a), block(n - n_a))
    return _HALF_CACHE[key]


def map_detect(instance: DetectionInstance) -> np.ndarray:
    """exact_map by meet-in-the-middle enumeration.

    Splitting x into halves turns the q^N residual scan into two q^(N/2)
    tables plus one distance matrix, which keeps exhaustive MAP usable inside
    large sweeps. Same cap and same argmin as exact_map; first-index
    tie-break matches the big-endian state order.
    """
    q = instance.constellation.q
    n = instance.n_dims
    if q ** n > STATE_CAP:
        raise OracleCapError(f"{q}^{n} = {q ** n} states exceeds the cap of {STATE_CAP}")
    xa, xb = _half_lattices(instance.constellation.amplitudes, n)
    n_a = xa.shape[1]
    ta = xa @ instance.h[:, :n_a].T
    tb = xb @ instance.h[:, n_a:].T
    ra = instance.y - ta
    d2 = (
        (ra * ra).sum(axis=1)[:, None]
        + (tb * tb).sum(axis=1)[None, :]
        - 2.0 * (ra @ tb.T)
    )
    i, j = np.unravel_index(int(np.argmin(d2)), d2.shape)
    return np.concatenate([xa[i], xb[j]])


def exact_llr(instance: DetectionInstance, clip: float = 30.0) -> LlrVector:
    """Per-bit LLRs by summation over the full lattice, log-domain."""
    space = enumerate_states(instance)
    f = metric(instance, space.states)
    cons = instance.constellation
    m = cons.bits_per_symbol
    codes = cons.gray_codes[space.digits]
    shifts = np.arange(m - 1, -1, -1)
    bits = ((codes[..., None] >> shifts) & 1).reshape(space.size, -1)
    n_bits = bits.shape[1]
    llrs = np.empty(n_bits)
    for k in range(n_bits):
        pos = bits[:, k] == 1
        llrs[k] = logsumexp_stream(f[pos]) - logsumexp_stream(f[~pos])
    return LlrVector(llrs=np.clip(llrs, -clip, clip), clip=clip)


def _proposal_log_matrix(instance: DetectionInstance, config: SamplerConfig, space: StateSpace) -> np.ndarray:
    """log q(x_j | x_i) for every ordered state pair, shape (S, S)."""
    precond = (
        compute_preconditioner(instance.h, config.damping)
        if config.mode == "preconditioned"
        else None
    )
    grad = metric_gradient(instance, space.states, config.temperature)
    drift, step = _effective_drift(grad, config, precond)
    table = build_proposal(space.states, drift, step, instance.constellation.amplitudes)
    log_q = np.zeros((space.size, space.size))
    for n in range(space.n):
        log_q += table.log_probs[:, n, :][:, space.digits[:, n]]
    return log_q


@dataclass(frozen=True)
class TransitionMatrix:
    """Dense one-step kernel with its target distribution."""

    p: np.ndarray
    pi: np.ndarray
    space: StateSpace
    config: SamplerConfig


def build_transition_matrix(instance: DetectionInstance, config: SamplerConfig) -> TransitionMatrix:
    """Exact Metropolis-adjusted kernel: P(x'|x) = q(x'|x) A(x'|x) off-diagonal.

    The diagonal absorbs all rejected mass so rows sum to one. Proposal and
    acceptance come from the same functions the chains execute.
    """
    post = exact_posterior(instance, config.temperature)
    space = post.space
    log_q = _proposal_log_matrix(instance, config, space)
    f = post.log_weights
    a = acceptance_probability(f[:, None], f[None, :], log_q, log_q.T)
    p = np.exp(log_q) * a
    np.fill_diagonal(p, 0.0)
    diag = 1.0 - p.sum(axis=1)
    np.fill_diagonal(p, np.maximum(diag, 0.0))
    return TransitionMatrix(p=p, pi=post.pi, space=space, config=config)


def unadjusted_transition_matrix(instance: DetectionInstance, config: SamplerConfig) -> TransitionMatrix:
    """The raw proposal kernel, no accept step: the biased negative control."""
    post = exact_posterior(instance, config.temperature)
    space = post.space
    p = np.exp(_proposal_log_matrix(instance, config, space))
    return TransitionMatrix(p=p, pi=post.pi, space=space, config=config)


def detailed_balance_check(p: np.ndarray, pi: np.ndarray) -> float:
    """max_ij |pi_i P_ij - pi_j P_ji|; zero for a reversible kernel."""
    flow = pi[:, None] * p
    return float(np.abs(flow - flow.T).max())


def stationary_distribution(p: np.ndarray) -> np.ndarray:
    """Leading left eigenvector, normalized to a distribution."""
    w, v = np.linalg.eig(p.T)
    lead = int(np.argmin(np.abs(w - 1.0)))
    vec = np.real(v[:, lead])
    if np.abs(np.imag(v[:, lead])).max() > 1e-9:
        raise ValueError("leading eigenvector is not real; kernel is malformed")
    vec = vec * np.sign(vec.sum())
    if vec.min() < -1e-9:
        raise ValueError("leading eigenvector changes sign; kernel is malformed")
    vec = np.maximum(vec, 0.0)
    return vec / vec.sum()


def convergence_rate(p: np.ndarray, pi: np.ndarray | None = None):
    """Second-largest eigenvalue modulus of a reversible kernel.

    Reversibility w.r.t. pi makes D^{1/2} P D^{-1/2} symmetric (D = diag pi),
    so the spectrum is real and a symmetric eigensolver applies. Returns
    (r, eigenvalues) with eigenvalues sorted descending. A leading eigenvalue
    off 1 by more than 1e-8 signals a broken kernel and raises.
    """
    if pi is None:
        pi = stationary_distribution(p)
    d = np.sqrt(pi)
    sym = (d[:, None] * p) / d[None, :]
    sym = 0.5 * (sym + sym.T)
    eigs = np.linalg.eigvalsh(sym)[::-1]
    if abs(eigs[0] - 1.0) > 1e-8:
        raise ValueError(f"leading eigenvalue {eigs[0]!r} is not 1; kernel is broken")
    r = float(np.abs(eigs[1:]).max()) if eigs.size > 1 else 0.0
    return r, eigs


def tv_distance(p1: np.ndarray, p2: np.ndarray) -> float:
    return float(0.5 * np.abs(np.asarray(p1) - np.asarray(p2)).sum())


def _as_start(dist_or_index, size: int) -> np.ndarray:
    if np.isscalar(dist_or_index) or np.asarray(dist_or_index).ndim == 0:
        i = int(dist_or_index)
        if not 0 <= i < size:
            raise ValueError(f"start index {i} outside [0, {size})")
        start = np.zeros(size)
        start[i] = 1.0
        return start
    start = np.asarray(dist_or_index, dtype=np.float64)
    if start.shape != (size,) or start.min() < 0 or abs(start.sum() - 1.0) > 1e-9:
        raise ValueError("start must be a state index or a distribution over states")
    return start


def tv_decay_curve(p: np.ndarray, pi: np.ndarray, start, t_max: int) -> np.ndarray:
    """TV(start P^t, pi) for t = 1..t_max by iterated row-vector products.

    start is a state index (point mass) or a full initial distribution.
    """
    v = _as_start(start, p.shape[0])
    out = np.empty(t_max)
    for t in range(t_max):
        v = v @ p
        out[t] = tv_distance(v, pi)
    return out


def evolve_distribution(p: np.ndarray, start, t_max: int) -> np.ndarray:
    """Rows start P^t for t = 0..t_max-1; row 0 is the start itself.

    Row indexing matches chain_occupancy: row t is sample index t+1.
    """
    v = _as_start(start, p.shape[0])
    out = np.empty((t_max, p.shape[0]))
    out[0] = v
    for t in range(1, t_max):
        v = v @ p
        out[t] = v
    return out


def empirical_distribution(
    instance: DetectionInstance, config: SamplerConfig, n_chains: int, t: int
) -> np.ndarray:
    """Occupancy of n_chains independent chains at sample index t.

    t = 1 is the initialization itself. Uses the lockstep chain engine, so
    the bins follow the big-endian state layout of StateSpace.
    """
    if t < 1:
        raise ValueError("sample index starts at 1")
    counts = chain_occupancy(instance, replace(config, n_iters=t), n_chains)
    return counts[t - 1] / n_chains


def tv_binomial_sigma(dist: np.ndarray, n_chains: int) -> float:
    """Sampling-noise scale of an empirical TV estimate against `dist`.

    Bounds the per-state binomial standard deviations summed into the TV's
    half-L1 form; the realized fluctuation is below this scale.
    """
    dist = np.asarray(dist)
    return float(0.5 * np.sqrt(dist * (1.0 - dist) / n_chains).sum())
