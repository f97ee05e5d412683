"""Real-valued MIMO detection model: constellations, bit maps, channels, instances."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Constellation",
    "ChannelSpec",
    "DetectionInstance",
    "build_constellation",
    "map_bits",
    "demap_bits",
    "complex_to_real_channel",
    "complex_to_real_vector",
    "real_to_complex_vector",
    "generate_channel",
    "snr_to_sigma2",
    "transmit",
    "perturb_csi",
    "random_instance",
    "instance_to_dict",
    "instance_from_dict",
]


@dataclass(frozen=True)
class Constellation:
    """Per-real-dimension PAM alphabet with a Gray bit labeling.

    A square QAM constellation factors into two independent PAM alphabets,
    one per quadrature. `amplitudes` is sorted ascending and scaled so the
    complex constellation has unit average energy, i.e. mean(a^2) == 1/2.

    Attributes:
        q: number of PAM levels (power of two).
        amplitudes: shape (q,), ascending.
        gray_codes: gray_codes[i] is the bit label of amplitudes[i].
        bits_per_symbol: log2(q) bits per real dimension.
        d_min: half the minimum distance between amplitudes.
    """

    q: int
    amplitudes: np.ndarray
    gray_codes: np.ndarray
    bits_per_symbol: int
    d_min: float
    _decode: np.ndarray = field(repr=False, default=None)

    def nearest_indices(self, values: np.ndarray) -> np.ndarray:
        """Snap real values to alphabet indices; ties go to the lower amplitude."""
        mids = 0.5 * (self.amplitudes[1:] + self.amplitudes[:-1])
        return np.searchsorted(mids, values, side="left")


def build_constellation(q: int) -> Constellation:
    """Build the unit-energy PAM alphabet {±1, ±3, ..., ±(q-1)} * c with Gray labels.

    The scale c = sqrt(3 / (2 (q^2 - 1))) makes the complex constellation unit
    average energy. Adjacent amplitudes differ in exactly one Gray bit, and the
    most significant bit is +1 exactly on the positive half.

    Args:
        q: PAM alphabet size per real dimension; power of two, >= 2.
           q=2 is QPSK, q=4 is 16-QAM in complex terms.

    Returns:
        Constellation.
    """
    if q < 2 or (q & (q - 1)) != 0:
        raise ValueError(f"alphabet size must be a power of two >= 2, got {q}")
    levels = np.arange(-(q - 1), q, 2, dtype=np.float64)
    scale = np.sqrt(3.0 / (2.0 * (q * q - 1)))
    amplitudes = levels * scale
    idx = np.arange(q)
    gray = idx ^ (idx >> 1)
    decode = np.empty(q, dtype=np.int64)
    decode[gray] = idx
    return Constellation(
        q=q,
        amplitudes=amplitudes,
        gray_codes=gray.astype(np.int64),
        bits_per_symbol=int(np.log2(q)),
        d_min=float(scale),
        _decode=decode,
    )


def map_bits(bits: np.ndarray, constellation: Constellation) -> np.ndarray:
    """Map ±1 bits to real amplitudes, Gray-labeled, MSB first within each group.

    Args:
        bits: shape (n * bits_per_symbol,), entries in {-1, +1}.
        constellation: target alphabet.

    Returns:
        shape (n,) real amplitudes.
    """
    bits = np.asarray(bits)
    m = constellation.bits_per_symbol
    if bits.ndim != 1 or bits.size % m != 0:
        raise ValueError(f"bit vector length must be a multiple of {m}")
    if not np.all(np.abs(bits) == 1):
        raise ValueError("bits must take values in {-1, +1}")
    groups = (bits.reshape(-1, m) > 0).astype(np.int64)
    weights = 1 << np.arange(m - 1, -1, -1)
    codes = groups @ weights
    return constellation.amplitudes[constellation._decode[codes]]


def demap_bits(x: np.ndarray, constellation: Constellation) -> np.ndarray:
    """Invert map_bits: snap to the nearest amplitude and emit its Gray label.

    Ties at midpoints resolve to the lower amplitude.
    """
    x = np.asarray(x)
    m = constellation.bits_per_symbol
    codes = constellation.gray_codes[constellation.nearest_indices(x)]
    shifts = np.arange(m - 1, -1, -1)
    bit01 = (codes[:, None] >> shifts) & 1
    return (2 * bit01 - 1).reshape(-1).astype(np.float64)


def complex_to_real_channel(h_complex: np.ndarray) -> np.ndarray:
    """Stack a complex channel matrix into its real block form [[Re,-Im],[Im,Re]]."""
    re, im = h_complex.real, h_complex.imag
    return np.block([[re, -im], [im, re]])


def complex_to_real_vector(v_complex: np.ndarray) -> np.ndarray:
    return np.concatenate([v_complex.real, v_complex.imag])


def real_to_complex_vector(v_real: np.ndarray) -> np.ndarray:
    n = v_real.size // 2
    return v_real[:n] + 1j * v_real[n:]


@dataclass(frozen=True)
class ChannelSpec:
    """Channel ensemble: i.i.d. Rayleigh or Kronecker-correlated Rayleigh.

    rho is the exponential correlation coefficient, applied at both ends;
    rho=0 reduces kronecker to rayleigh.
    """

    kind: str = "rayleigh"
    nt: int = 2
    nr: int = 2
    rho: float = 0.0

    def __post_init__(self):
        if self.kind not in ("rayleigh", "kronecker"):
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if not (self.nt >= 1 and self.nr >= 1):
            raise ValueError("antenna counts must be positive")
        if not (0.0 <= self.rho < 1.0):
            raise ValueError("correlation must lie in [0, 1)")


def _exp_correlation_sqrt(n: int, rho: float) -> np.ndarray:
    # R[i, j] = rho^|i-j| is symmetric positive definite for rho in [0, 1).
    r = rho ** np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    w, v = np.linalg.eigh(r)
    return (v * np.sqrt(np.maximum(w, 0.0))) @ v.T


def generate_channel(spec: ChannelSpec, rng: np.random.Generator) -> np.ndarray:
    """Draw one real-valued channel matrix of shape (2*nr, 2*nt).

    Complex entries are CN(0, 1): each real part has variance 1/2. Kronecker
    correlation multiplies an i.i.d. draw by the matrix square roots of
    exponential correlation matrices at receiver and transmitter.
    """
    g = rng.normal(size=(spec.nr, spec.nt)) + 1j * rng.normal(size=(spec.nr, spec.nt))
    g *= np.sqrt(0.5)
    if spec.kind == "kronecker" and spec.rho > 0.0:
        g = _exp_correlation_sqrt(spec.nr, spec.rho) @ g @ _exp_correlation_sqrt(spec.nt, spec.rho)
    return complex_to_real_channel(g)


def snr_to_sigma2(snr_db: float, nt: int) -> float:
    """Noise variance sigma^2 giving the requested per-receive-antenna SNR.

    With unit-energy symbols and CN(0,1) channel entries, E||Hx||^2 = nt per
    complex receive dimension and E||n||^2 = sigma^2, so sigma^2 = nt / snr.
    """
    return nt / (10.0 ** (snr_db / 10.0))


def transmit(h: np.ndarray, x: np.ndarray, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """y = Hx + n with n i.i.d. N(0, sigma^2/2) per real component."""
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    noise = rng.normal(scale=np.sqrt(sigma2 / 2.0), size=h.shape[0])
    return h @ x + noise


def perturb_csi(h: np.ndarray, nmse: float, rng: np.random.Generator) -> np.ndarray:
    """Add estimation error E with E[||E||_F^2] = nmse * E[||H||_F^2].

    The reference energy is the analytic Rayleigh value M*N/2 for the real
    block form, not the realized ||h||_F^2, so the error level is an ensemble
    property.
    """
    if nmse < 0:
        raise ValueError("nmse must be nonnegative")
    if nmse == 0:
        return h.copy()
    m, n = h.shape
    sigma_e = np.sqrt(nmse * 0.5)
    return h + rng.normal(scale=sigma_e, size=(m, n))


@dataclass
class DetectionInstance:
    """One detection problem: observation y = Hx + n in real block form.

    h has shape (M, N) with M = 2*nr, N = 2*nt. The sampler treats sigma2 as
    the total complex noise variance, sigma^2/2 per real component.
    """

    h: np.ndarray
    y: np.ndarray
    sigma2: float
    constellation: Constellation
    true_x: np.ndarray | None = None

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.h.ndim != 2:
            raise ValueError("channel must be a matrix")
        m, n = self.h.shape
        if m % 2 or n % 2:
            raise ValueError("real block form needs even dimensions")
        if self.y.shape != (m,):
            raise ValueError(f"observation length {self.y.shape} does not match channel rows {m}")
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")

    @property
    def n_dims(self) -> int:
        return self.h.shape[1]

    @property
    def n_bits(self) -> int:
        return self.h.shape[1] * self.constellation.bits_per_symbol


def random_instance(
    spec: ChannelSpec,
    q: int,
    snr_db: float,
    rng: np.random.Generator,
    nmse: float = 0.0,
) -> DetectionInstance:
    """Draw a channel, a uniform symbol vector, and a noisy observation.

    When nmse > 0 the instance carries the perturbed channel estimate while y
    was produced by the true channel, modeling imperfect CSI.

    Returns a DetectionInstance with true_x set to the transmitted vector.
    """
    constellation = build_constellation(q)
    sigma2 = snr_to_sigma2(snr_db, spec.nt)
    h = generate_channel(spec, rng)
    n = 2 * spec.nt
    bits = 2.0 * rng.integers(0, 2, size=n * constellation.bits_per_symbol) - 1.0
    x = map_bits(bits, constellation)
    y = transmit(h, x, sigma2, rng)
    h_known = perturb_csi(h, nmse, rng) if nmse > 0 else h
    return DetectionInstance(h=h_known, y=y, sigma2=sigma2, constellation=constellation, true_x=x)


def instance_to_dict(instance: DetectionInstance, seed: int | None = None) -> dict:
    """Serialize an instance to the harness JSON schema (H row-major)."""
    out = {
        "q": instance.constellation.q,
        "alphabet": instance.constellation.amplitudes.tolist(),
        "H": instance.h.tolist(),
        "y": instance.y.tolist(),
        "sigma2": instance.sigma2,
    }
    if seed is not None:
        out["seed"] = seed
    return out


def instance_from_dict(data: dict) -> DetectionInstance:
    constellation = build_constellation(int(data["q"]))
    alphabet = np.asarray(data["alphabet"], dtype=np.float64)
    if not np.allclose(alphabet, constellation.amplitudes, atol=1e-12):
        raise ValueError("alphabet does not match the unit-energy labeling for q")
    return DetectionInstance(
        h=np.asarray(data["H"], dtype=np.float64),
        y=np.asarray(data["y"], dtype=np.float64),
        sigma2=float(data["sigma2"]),
        constellation=constellation,
    )
