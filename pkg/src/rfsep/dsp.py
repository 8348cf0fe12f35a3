"""Complex-baseband synthesis and recovery.

Signals are 1-D complex128 arrays in normalized discrete time (real part I,
imaginary part Q). Everything here is a pure function of its arguments;
randomness always enters through an explicit seed.

Timing and carrier are known by construction: demodulators share the
synthesis parameters, so there is no synchronization stage anywhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SignalError
from .rng import CounterRng

SQRT1_2 = 1.0 / math.sqrt(2.0)

# sub-stream tags for deriving generators from one seed
_TAG_CFO = 11
_TAG_BITS = 12
_TAG_CHIRP = 21
_TAG_BURST_GATE = 22
_TAG_BURST_LEN = 23
_TAG_BURST_AMP = 24


@dataclass(frozen=True)
class QpskParams:
    """Single-carrier QPSK shaping parameters (samples per symbol, RRC shape)."""
    oversampling: int = 16
    rolloff: float = 0.5
    rrc_span: int = 8

    def __post_init__(self):
        if self.oversampling < 2:
            raise SignalError(f"oversampling must be >= 2, got {self.oversampling}")
        if not (0.0 < self.rolloff <= 1.0):
            raise SignalError(f"rolloff must be in (0, 1], got {self.rolloff}")
        if self.rrc_span < 1:
            raise SignalError(f"rrc_span must be positive, got {self.rrc_span}")


@dataclass(frozen=True)
class OfdmParams:
    fft_size: int = 64
    cp_len: int = 16
    active_subcarriers: int = 48

    def __post_init__(self):
        if self.fft_size < 2 or self.fft_size & (self.fft_size - 1):
            raise SignalError(f"fft_size must be a power of two, got {self.fft_size}")
        if not (0 < self.cp_len < self.fft_size):
            raise SignalError(f"cp_len must be in (0, fft_size), got {self.cp_len}")
        if self.active_subcarriers % 2 or not (0 < self.active_subcarriers <= self.fft_size - 2):
            raise SignalError(
                f"active_subcarriers must be even and fit around DC, got {self.active_subcarriers}"
            )

    @property
    def symbol_len(self) -> int:
        return self.fft_size + self.cp_len


def rrc_taps(oversampling: int, rolloff: float, span: int) -> np.ndarray:
    """Unit-energy root-raised-cosine taps over [-span, span] symbols."""
    n = np.arange(-span * oversampling, span * oversampling + 1, dtype=np.float64)
    t = n / oversampling
    beta = rolloff
    h = np.empty_like(t)
    # generic formula, then patch the removable singularities
    with np.errstate(divide="ignore", invalid="ignore"):
        num = np.sin(np.pi * t * (1 - beta)) + 4 * beta * t * np.cos(np.pi * t * (1 + beta))
        den = np.pi * t * (1 - (4 * beta * t) ** 2)
        h = num / den
    h[t == 0] = 1.0 - beta + 4 * beta / np.pi
    s = np.abs(np.abs(t) - 1.0 / (4 * beta)) < 1e-12
    h[s] = (beta / math.sqrt(2.0)) * (
        (1 + 2 / np.pi) * math.sin(np.pi / (4 * beta))
        + (1 - 2 / np.pi) * math.cos(np.pi / (4 * beta))
    )
    return h / math.sqrt(float(np.sum(h * h)))


def qpsk_map(bits: np.ndarray) -> np.ndarray:
    """Gray-mapped QPSK: pair (b0, b1) -> ((1-2*b0) + j(1-2*b1)) / sqrt(2)."""
    bits = np.asarray(bits)
    if bits.size % 2:
        raise SignalError(f"QPSK needs an even bit count, got {bits.size}")
    b = bits.astype(np.float64).reshape(-1, 2)
    return ((1.0 - 2.0 * b[:, 0]) + 1j * (1.0 - 2.0 * b[:, 1])) * SQRT1_2


def bits_from_symbols(symbols: np.ndarray) -> np.ndarray:
    """Sign decisions inverse to qpsk_map; exact zero decides bit 0."""
    bits = np.empty(2 * symbols.size, dtype=np.uint8)
    bits[0::2] = symbols.real < 0
    bits[1::2] = symbols.imag < 0
    return bits


def qpsk_waveform(bits: np.ndarray, p: QpskParams) -> np.ndarray:
    """Upsample symbols and pulse-shape to roughly unit mean power.

    The pulse is the RRC scaled to energy = oversampling, which makes the
    shaped waveform's long-run mean power 1 for unit-power symbols. Filter
    tails are kept: output length is n_symbols*oversampling + 2*rrc_span*oversampling.
    """
    sym = qpsk_map(bits)
    os_ = p.oversampling
    up = np.zeros(sym.size * os_, dtype=np.complex128)
    up[::os_] = sym
    h = rrc_taps(os_, p.rolloff, p.rrc_span) * math.sqrt(os_)
    return np.convolve(up, h)


def qpsk_demodulate(sig: np.ndarray, p: QpskParams, n_bits: int) -> np.ndarray:
    """Matched-filter and slice at the known symbol timing."""
    if n_bits % 2:
        raise SignalError(f"n_bits must be even, got {n_bits}")
    n_sym = n_bits // 2
    os_ = p.oversampling
    if sig.size < (n_sym - 1) * os_ + 1:
        raise SignalError(
            f"signal of {sig.size} samples cannot hold {n_sym} symbols "
            f"at oversampling {os_}"
        )
    g = rrc_taps(os_, p.rolloff, p.rrc_span) / math.sqrt(os_)
    mf = np.convolve(sig, g)
    idx = 2 * p.rrc_span * os_ + np.arange(n_sym) * os_
    return bits_from_symbols(mf[idx])


def ofdm_subcarrier_offsets(p: OfdmParams) -> np.ndarray:
    """Active subcarrier offsets, symmetric around an unused DC bin."""
    half = p.active_subcarriers // 2
    return np.concatenate([np.arange(-half, 0), np.arange(1, half + 1)])


def ofdm_modulate(bits: np.ndarray, p: OfdmParams, n_symbols: int) -> np.ndarray:
    """QPSK on active subcarriers, unitary inverse DFT, cyclic prefix."""
    bits = np.asarray(bits)
    need = n_symbols * p.active_subcarriers * 2
    if bits.size != need:
        raise SignalError(f"expected {need} bits for {n_symbols} OFDM symbols, got {bits.size}")
    offsets = ofdm_subcarrier_offsets(p) % p.fft_size
    scale = math.sqrt(p.fft_size)
    out = np.empty(n_symbols * p.symbol_len, dtype=np.complex128)
    per = p.active_subcarriers * 2
    for i in range(n_symbols):
        spectrum = np.zeros(p.fft_size, dtype=np.complex128)
        spectrum[offsets] = qpsk_map(bits[i * per:(i + 1) * per])
        time = np.fft.ifft(spectrum) * scale
        out[i * p.symbol_len:i * p.symbol_len + p.cp_len] = time[-p.cp_len:]
        out[i * p.symbol_len + p.cp_len:(i + 1) * p.symbol_len] = time
    return out


def ofdm_demodulate(sig: np.ndarray, p: OfdmParams, n_symbols: int,
                    known_delay: int = 0) -> np.ndarray:
    """Strip prefixes, forward unitary DFT, slice active subcarriers.

    ``known_delay`` compensates a known circular delay of fewer than
    cp_len samples by undoing the per-subcarrier phase ramp.
    """
    if sig.size != n_symbols * p.symbol_len:
        raise SignalError(
            f"expected {n_symbols * p.symbol_len} samples for {n_symbols} "
            f"OFDM symbols, got {sig.size}"
        )
    offsets = ofdm_subcarrier_offsets(p)
    bins = offsets % p.fft_size
    scale = math.sqrt(p.fft_size)
    eq = np.exp(2j * np.pi * offsets * known_delay / p.fft_size) if known_delay else 1.0
    bits = np.empty(n_symbols * p.active_subcarriers * 2, dtype=np.uint8)
    per = p.active_subcarriers * 2
    for i in range(n_symbols):
        core = sig[i * p.symbol_len + p.cp_len:(i + 1) * p.symbol_len]
        spectrum = np.fft.fft(core) / scale
        bits[i * per:(i + 1) * per] = bits_from_symbols(spectrum[bins] * eq)
    return bits


def mean_power(sig: np.ndarray) -> float:
    """(1/T) * sum(I^2 + Q^2)."""
    if sig.size == 0:
        raise SignalError("mean_power of an empty signal")
    return float(np.mean(sig.real * sig.real + sig.imag * sig.imag))


def mix_at_sinr(soi: np.ndarray, interference: np.ndarray,
                sinr_db: float) -> tuple[np.ndarray, float]:
    """Scale the interference so the mixture hits ``sinr_db`` exactly.

    Returns (soi + scale*interference, scale) with
    scale = sqrt(P_soi / (P_int * 10^(sinr_db/10))).
    """
    if soi.size != interference.size:
        raise SignalError(
            f"length mismatch: soi {soi.size} vs interference {interference.size}"
        )
    p_soi = mean_power(soi)
    p_int = mean_power(interference)
    if p_soi == 0.0 or p_int == 0.0:
        raise SignalError("mix_at_sinr requires both components to have nonzero power")
    scale = math.sqrt(p_soi / (p_int * 10.0 ** (sinr_db / 10.0)))
    return soi + scale * interference, scale


# ---------------------------------------------------------------------------
# interference surrogates
# ---------------------------------------------------------------------------

COMM_SURROGATE_PARAMS = QpskParams(oversampling=2, rolloff=0.35, rrc_span=6)
COMM_CFO_RANGE = 0.1


@dataclass
class CommSurrogateSpec:
    """Everything needed to synthesize or demodulate one comm surrogate."""
    seed: int
    length: int
    bits: np.ndarray
    cfo: float
    params: QpskParams


def comm_surrogate_spec(seed: int, length: int) -> CommSurrogateSpec:
    """Derive the surrogate's bits and carrier offset from its seed."""
    if length < 1:
        raise SignalError(f"length must be positive, got {length}")
    p = COMM_SURROGATE_PARAMS
    rng = CounterRng(seed)
    cfo = float(rng.derive(_TAG_CFO).uniform(-COMM_CFO_RANGE, COMM_CFO_RANGE, 1)[0])
    n_sym = max(length // p.oversampling, 1)
    bits = rng.derive(_TAG_BITS).bits(2 * n_sym)
    return CommSurrogateSpec(seed=seed, length=length, bits=bits, cfo=cfo, params=p)


def _cyclic_pulse(length: int, taps: np.ndarray) -> np.ndarray:
    """Pulse wrapped onto a ring of ``length`` samples, centered at index 0."""
    span = (taps.size - 1) // 2
    hp = np.zeros(length, dtype=np.float64)
    for i, v in enumerate(taps):
        hp[(i - span) % length] += v
    return hp


def comm_waveform_from_spec(spec: CommSurrogateSpec) -> np.ndarray:
    """Cyclic pulse shaping plus carrier offset, normalized to unit power.

    Circular shaping keeps every symbol fully supported regardless of the
    signal length, which is what makes the surrogate demodulable with zero
    errors (lengths well above the pulse span assumed).
    """
    p = spec.params
    sym = qpsk_map(spec.bits)
    up = np.zeros(spec.length, dtype=np.complex128)
    up[: sym.size * p.oversampling:p.oversampling] = sym
    h = rrc_taps(p.oversampling, p.rolloff, p.rrc_span) * math.sqrt(p.oversampling)
    wave = np.fft.ifft(np.fft.fft(up) * np.fft.fft(_cyclic_pulse(spec.length, h)))
    wave *= np.exp(2j * np.pi * spec.cfo * np.arange(spec.length))
    return wave / math.sqrt(mean_power(wave))


def gen_comm_surrogate(seed: int, length: int) -> np.ndarray:
    """Structured digital interference: seeded QPSK with a carrier offset."""
    return comm_waveform_from_spec(comm_surrogate_spec(seed, length))


def demod_comm_surrogate(sig: np.ndarray, spec: CommSurrogateSpec) -> np.ndarray:
    """Recover the surrogate's bits given its synthesis spec."""
    if sig.size != spec.length:
        raise SignalError(f"expected {spec.length} samples, got {sig.size}")
    p = spec.params
    derot = sig * np.exp(-2j * np.pi * spec.cfo * np.arange(spec.length))
    g = rrc_taps(p.oversampling, p.rolloff, p.rrc_span) / math.sqrt(p.oversampling)
    mf = np.fft.ifft(np.fft.fft(derot) * np.fft.fft(_cyclic_pulse(spec.length, g)))
    n_sym = spec.bits.size // 2
    return bits_from_symbols(mf[: n_sym * p.oversampling:p.oversampling])


EMI_BURST_PROB = 1.0 / 256.0
EMI_BURST_MEAN_LEN = 24.0
EMI_BURST_SIGMA = 6.0
EMI_CHIRP_BAND = 0.4


def gen_emi_surrogate(seed: int, length: int) -> np.ndarray:
    """Impulsive interference: sparse heavy bursts over a swept chirp.

    Burst starts are Bernoulli-gated, burst lengths geometric, burst
    samples circular Gaussian with a large sigma; the background is a
    unit-modulus linear chirp over a seeded band. Output is normalized to
    unit mean power and is a pure function of (seed, length).
    """
    if length < 1:
        raise SignalError(f"length must be positive, got {length}")
    rng = CounterRng(seed)
    f0, f1 = rng.derive(_TAG_CHIRP).uniform(-EMI_CHIRP_BAND, EMI_CHIRP_BAND, 2)
    n = np.arange(length, dtype=np.float64)
    phase = 2.0 * np.pi * (f0 * n + (f1 - f0) * n * n / (2.0 * max(length, 2)))
    chirp = np.exp(1j * phase)

    u_start = rng.derive(_TAG_BURST_GATE).random(length)
    u_len = rng.derive(_TAG_BURST_LEN).random(length)
    amp = rng.derive(_TAG_BURST_AMP).normal_complex(length) * EMI_BURST_SIGMA
    gate = np.zeros(length, dtype=np.float64)
    q = 1.0 - 1.0 / EMI_BURST_MEAN_LEN
    for s in np.flatnonzero(u_start < EMI_BURST_PROB):
        burst_len = 1 + int(math.log(max(u_len[s], 2.0**-53)) / math.log(q))
        gate[s:s + burst_len] = 1.0
    sig = chirp + gate * amp
    return sig / math.sqrt(mean_power(sig))


# ---------------------------------------------------------------------------
# tensor layout bridges
# ---------------------------------------------------------------------------

def signal_to_channels(sig: np.ndarray) -> np.ndarray:
    """Complex signal -> real [2, T] array (I then Q)."""
    return np.stack([sig.real, sig.imag]).astype(np.float64)


def channels_to_signal(arr: np.ndarray) -> np.ndarray:
    """Real [2, T] array -> complex signal."""
    return arr[0] + 1j * arr[1]
