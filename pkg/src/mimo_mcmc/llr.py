"""Soft bit decisions from posterior samples.

Two estimators share the same sample pool. The importance-sampling form
reweights every drawn sample (duplicates count once per occurrence) to
correct for the tempered sampling distribution; the list form collapses the
pool to distinct candidates and scores the two bit hypotheses by direct
summation. Both work purely in the log domain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DetectionInstance

__all__ = [
    "SampleList",
    "LlrVector",
    "softplus",
    "logsumexp_stream",
    "llr_importance",
    "llr_list",
    "hard_decision",
]

# softplus lookup: knots on [-8, 0] spaced 1/16, zero below the range,
# reflection F(a) = a + F(-a) above it.
_TABLE_STEP = 1.0 / 16.0
_TABLE_LO = -8.0
_TABLE_KNOTS = np.arange(_TABLE_LO, 0.0 + _TABLE_STEP / 2, _TABLE_STEP)
_TABLE_VALS = np.log1p(np.exp(_TABLE_KNOTS))


@dataclass
class SampleList:
    """Posterior samples with their cached untempered metric values.

    f_values[s] = -||y - H samples[s]||^2 / sigma^2. source_tau records the
    temperature of the distribution the samples were drawn from; estimators
    that depend on it must be given the same value.
    """

    samples: np.ndarray
    f_values: np.ndarray
    source_tau: float = 1.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        self.f_values = np.asarray(self.f_values, dtype=np.float64)
        if self.samples.ndim != 2:
            raise ValueError("samples must have shape (S, N)")
        if self.f_values.shape != (self.samples.shape[0],):
            raise ValueError("f_values length must match the number of samples")
        if self.source_tau <= 0:
            raise ValueError("source_tau must be positive")

    def __len__(self) -> int:
        return self.samples.shape[0]


@dataclass
class LlrVector:
    """Per-bit log-likelihood ratios, symmetric-clipped to [-clip, clip]."""

    llrs: np.ndarray
    clip: float = 30.0

    def __post_init__(self):
        self.llrs = np.asarray(self.llrs, dtype=np.float64)
        if self.clip <= 0:
            raise ValueError("clip must be positive")
        if not np.all(np.isfinite(self.llrs)):
            raise ValueError("llrs must be finite")
        if np.any(np.abs(self.llrs) > self.clip + 1e-12):
            raise ValueError("llrs exceed the clip bound")

    def to_dict(self) -> dict:
        return {"llrs": self.llrs.tolist(), "clip": self.clip}

    @classmethod
    def from_dict(cls, data: dict) -> "LlrVector":
        return cls(llrs=np.asarray(data["llrs"], dtype=np.float64), clip=float(data["clip"]))


def softplus(a: np.ndarray, mode: str = "exact") -> np.ndarray:
    """log(1 + exp(a)), overflow-safe; "lookup" interpolates a fixed table.

    The lookup table covers [-8, 0] at step 1/16; values below -8 truncate to
    zero and positive arguments use the reflection F(a) = a + F(-a). Worst
    case lookup error is a few 1e-4, dominated by the truncation.
    """
    a = np.asarray(a, dtype=np.float64)
    pos_part = np.maximum(a, 0.0)
    if mode == "exact":
        return pos_part + np.log1p(np.exp(-np.abs(a)))
    if mode == "lookup":
        return pos_part + np.interp(-np.abs(a), _TABLE_KNOTS, _TABLE_VALS, left=0.0)
    raise ValueError(f"unknown softplus mode {mode!r}")


def logsumexp_stream(values: np.ndarray, mode: str = "exact") -> np.ndarray:
    """log sum exp along the last axis by the running two-term recursion.

    v <- max(v, a) + F(-|v - a|) with v starting at -inf, one term at a time,
    so the reduction never materializes shifted exponentials. An empty axis
    yields -inf.
    """
    values = np.asarray(values, dtype=np.float64)
    v = np.full(values.shape[:-1], -np.inf)
    for s in range(values.shape[-1]):
        a = values[..., s]
        gap = np.abs(v - a)
        # F(-inf) = 0 covers the first term and any -inf running value.
        bump = np.where(np.isinf(gap), 0.0, softplus(-gap, mode=mode))
        v = np.maximum(v, a) + bump
    return v


def _bit_codes(samples: np.ndarray, instance: DetectionInstance) -> np.ndarray:
    """Gray codes of each sample's coordinates, shape (S, N)."""
    cons = instance.constellation
    return cons.gray_codes[cons.nearest_indices(samples)]


def _bit_signs(codes: np.ndarray, bits_per_symbol: int) -> np.ndarray:
    shifts = np.arange(bits_per_symbol - 1, -1, -1)
    bit01 = (codes[..., None] >> shifts) & 1
    return 2.0 * bit01.reshape(*codes.shape[:-1], -1) - 1.0


def _flip_metrics(sample_list: SampleList, instance: DetectionInstance):
    """Untempered f of every sample with each bit forced to +1 and to -1.

    Forcing bit k changes one coordinate only, so f moves by a rank-one
    residual update using a single channel column: ||r - h_n d||^2 =
    ||r||^2 - 2 d h_n.r + d^2 ||h_n||^2.

    Returns (f_plus, f_minus), each shape (S, n_bits).
    """
    cons = instance.constellation
    h, y, s2 = instance.h, instance.y, instance.sigma2
    x = sample_list.samples
    m = cons.bits_per_symbol
    n = instance.n_dims

    codes = _bit_codes(x, instance)
    r = y - np.einsum("mn,sn->sm", h, x)
    rnorm2 = (r * r).sum(axis=-1)
    col_dot = np.einsum("mn,sm->sn", h, r)
    col_norm2 = (h * h).sum(axis=0)

    decode = np.empty(cons.q, dtype=np.int64)
    decode[cons.gray_codes] = np.arange(cons.q)

    out = []
    for target in (1, 0):
        forced = np.empty((x.shape[0], n * m))
        for j in range(m):
            bit = 1 << (m - 1 - j)
            forced_codes = (codes | bit) if target else (codes & ~bit)
            forced[:, j::m] = cons.amplitudes[decode[forced_codes]]
        delta = forced - np.repeat(x, m, axis=-1)
        dot = np.repeat(col_dot, m, axis=-1)
        cn = np.repeat(col_norm2, m)
        flipped_norm2 = rnorm2[:, None] - 2.0 * delta * dot + delta * delta * cn
        out.append(-flipped_norm2 / s2)
    return out[0], out[1]


def llr_importance(
    sample_list: SampleList,
    instance: DetectionInstance,
    temperature: float,
    clip: float = 30.0,
    softplus_mode: str = "exact",
) -> LlrVector:
    """Importance-sampling LLRs from tempered posterior samples.

    Every sample contributes a bit-flipped pair: gamma = (f(x_+1) - f(x_-1))
    / tau localizes the bit decision, sigmoid factors convert it to the two
    hypothesis weights, and exp(((tau-1)/tau) f) undoes the tempering. The
    whole estimate runs in the log domain via the streaming reduction, so
    only metric differences matter. Needs tau > 1 and a nonempty pool drawn
    at that same temperature.
    """
    if len(sample_list) == 0:
        raise ValueError("sample pool is empty")
    if temperature <= 1.0:
        raise ValueError("importance weighting needs temperature > 1")
    if abs(temperature - sample_list.source_tau) > 1e-12:
        raise ValueError(
            f"samples drawn at tau={sample_list.source_tau}, requested {temperature}"
        )
    f_plus, f_minus = _flip_metrics(sample_list, instance)
    gamma = (f_plus - f_minus) / temperature
    w = (temperature - 1.0) / temperature
    num_terms = w * f_plus - softplus(-gamma, mode=softplus_mode)
    den_terms = w * f_minus - softplus(gamma, mode=softplus_mode)
    num = logsumexp_stream(num_terms.T, mode=softplus_mode)
    den = logsumexp_stream(den_terms.T, mode=softplus_mode)
    return LlrVector(llrs=np.clip(num - den, -clip, clip), clip=clip)


def llr_list(sample_list: SampleList, instance: DetectionInstance, clip: float = 30.0) -> LlrVector:
    """List LLRs over the distinct candidates in the pool.

    Duplicates collapse to one candidate, so occurrence frequencies carry no
    weight; each hypothesis side sums exp(f) over its candidates. A side with
    no candidate saturates at the clip value.
    """
    if len(sample_list) == 0:
        raise ValueError("sample pool is empty")
    distinct, first_idx = np.unique(sample_list.samples, axis=0, return_index=True)
    f = sample_list.f_values[first_idx]
    signs = _bit_signs(_bit_codes(distinct, instance), instance.constellation.bits_per_symbol)
    n_bits = signs.shape[-1]
    llrs = np.empty(n_bits)
    for k in range(n_bits):
        pos = signs[:, k] > 0
        up = logsumexp_stream(f[pos]) if pos.any() else -np.inf
        down = logsumexp_stream(f[~pos]) if (~pos).any() else -np.inf
        if np.isinf(up) and up < 0:
            llrs[k] = -clip
        elif np.isinf(down) and down < 0:
            llrs[k] = clip
        else:
            llrs[k] = up - down
    return LlrVector(llrs=np.clip(llrs, -clip, clip), clip=clip)


def hard_decision(sample_list: SampleList) -> np.ndarray:
    """The sample with the largest metric; ties keep the earliest occurrence."""
    if len(sample_list) == 0:
        raise ValueError("sample pool is empty")
    return sample_list.samples[int(np.argmax(sample_list.f_values))].copy()
