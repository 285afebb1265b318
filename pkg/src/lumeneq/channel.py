"""OOK visible-light link simulation.

Pipeline: correlated bit source -> OOK modulation -> sigmoidal LED
nonlinearity -> detector responsivity -> two-tap multipath -> calibrated
AWGN.  One sample per bit period; the direct path sits at lag 0, so the
received stream is index-aligned to the bit stream by construction.
``alignment_offset`` deliberately misaligns the receiver for experiments
with a shifted decision instant.
"""

import hashlib
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .rng import stream

NOISELESS = math.inf


@dataclass(frozen=True)
class ChannelConfig:
    """Link parameters; defaults give the two-bit-ISI sigmoid-LED channel."""

    snr_db: float = 10.0
    multipath_delay: int = 2
    multipath_gain: float = 0.3
    led_steepness: float = 5.0
    led_midpoint: float = 0.5
    flip_prob: float = 0.2
    responsivity: float = 1.0
    seed: int = 0
    alignment_offset: int = 0

    def __post_init__(self):
        if self.multipath_delay < 0:
            raise ValueError("multipath_delay must be >= 0")
        if not 0.0 <= self.multipath_gain < 1.0:
            raise ValueError("multipath_gain must lie in [0, 1)")
        if self.led_steepness <= 0:
            raise ValueError("led_steepness must be positive")
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValueError("flip_prob must lie in [0, 1]")
        if self.responsivity <= 0:
            raise ValueError("responsivity must be positive")

    def replace(self, **kwargs):
        return replace(self, **kwargs)

    def canonical_text(self):
        """Stable key=value rendering, used for hashing and sidecar files."""
        lines = []
        for name in ("snr_db", "multipath_delay", "multipath_gain",
                     "led_steepness", "led_midpoint", "flip_prob",
                     "responsivity", "seed", "alignment_offset"):
            lines.append(f"channel.{name} = {getattr(self, name)!r}")
        return "\n".join(lines) + "\n"

    def fingerprint(self):
        """Short stable hash of the channel parameters (seed excluded)."""
        text = "\n".join(
            line for line in self.canonical_text().splitlines()
            if not line.startswith("channel.seed")
        )
        return hashlib.blake2b(text.encode(), digest_size=8).hexdigest()


@dataclass
class LinkRealization:
    """One end-to-end simulated transmission."""

    bits: np.ndarray
    clean_signal: np.ndarray
    received: np.ndarray
    noise_sigma: float
    config: ChannelConfig = field(repr=False)

    def __post_init__(self):
        if not (len(self.bits) == len(self.clean_signal) == len(self.received)):
            raise ValueError("bits, clean_signal and received must have equal length")

    def __len__(self):
        return len(self.bits)


def generate_markov_bits(n, flip_prob, seed):
    """First-order Markov bit source: P(b[t] != b[t-1]) = flip_prob.

    The initial bit is uniform, so the marginal distribution is symmetric.
    """
    if n < 1:
        raise ValueError("cannot generate an empty bit sequence (n >= 1 required)")
    if not 0.0 <= flip_prob <= 1.0:
        raise ValueError("flip_prob must lie in [0, 1]")
    rng = stream(seed, "bits")
    first = rng.integers(0, 2)
    flips = rng.random(n - 1) < flip_prob
    bits = np.empty(n, dtype=np.int8)
    bits[0] = first
    if n > 1:
        bits[1:] = (first + np.cumsum(flips)) % 2
    return bits


def ook_modulate(bits):
    """Map bits {0,1} to amplitudes {0.0, 1.0}, one sample per bit."""
    bits = np.asarray(bits)
    if bits.size == 0:
        raise ValueError("cannot modulate an empty bit sequence")
    return bits.astype(np.float64)


def led_response(signal, steepness=5.0, midpoint=0.5):
    """Sigmoidal electro-optical transfer: 1 / (1 + exp(-k*(x - x0)))."""
    signal = np.asarray(signal, dtype=np.float64)
    if not np.all(np.isfinite(signal)):
        raise ValueError("LED input signal must be finite")
    return 1.0 / (1.0 + np.exp(-steepness * (signal - midpoint)))


def apply_multipath(signal, delay, gain):
    """Add a delayed, attenuated copy: m[n] = s[n] + gain * s[n - delay]."""
    signal = np.asarray(signal, dtype=np.float64)
    if delay < 0:
        raise ValueError("multipath delay must be >= 0")
    if not 0.0 <= gain < 1.0:
        raise ValueError("multipath gain must lie in [0, 1)")
    if delay >= len(signal):
        warnings.warn(
            f"multipath delay {delay} >= signal length {len(signal)}; "
            "the echo term is all-zero", stacklevel=2)
    out = signal.copy()
    if gain != 0.0 and delay < len(signal):
        if delay == 0:
            out += gain * signal
        else:
            out[delay:] += gain * signal[:-delay]
    return out


def add_awgn(signal, snr_db, seed):
    """Add white Gaussian noise calibrated to the requested SNR.

    Noise power is signal_power / 10^(snr_db/10) with signal power measured
    as mean(m^2) on the input.  ``snr_db = NOISELESS`` (infinity) returns the
    signal untouched with sigma 0.  Returns ``(noisy, sigma)``.
    """
    signal = np.asarray(signal, dtype=np.float64)
    if signal.size == 0:
        raise ValueError("cannot add noise to an empty signal")
    power = float(np.mean(signal**2))
    if math.isinf(snr_db) and snr_db > 0:
        return signal.copy(), 0.0
    if power == 0.0:
        raise ValueError("signal power is zero; SNR is undefined")
    sigma = math.sqrt(power / 10.0 ** (snr_db / 10.0))
    rng = stream(seed, "noise")
    noisy = signal + rng.normal(0.0, sigma, size=signal.shape)
    return noisy, sigma


def shift_for_alignment(signal, offset):
    """Shift the decision instant by ``offset`` samples (zero-filled edges).

    Positive offset advances the stream: out[n] = x[n + offset].
    """
    signal = np.asarray(signal)
    if offset == 0:
        return signal.copy()
    out = np.zeros_like(signal)
    if offset > 0:
        if offset < len(signal):
            out[:-offset] = signal[offset:]
    else:
        if -offset < len(signal):
            out[-offset:] = signal[:offset]
    return out


def undo_alignment(signal, offset):
    """Inverse of :func:`shift_for_alignment` (up to the zero-filled edge)."""
    return shift_for_alignment(signal, -offset)


def simulate_link(config, n_bits):
    """Run the full pipeline and return a :class:`LinkRealization`.

    Deterministic given ``config`` (which includes the seed).  The clean
    signal is the post-LED, post-multipath waveform the noise is added to;
    both it and the received stream carry the configured alignment offset.
    """
    if n_bits < 1:
        raise ValueError("n_bits must be >= 1")
    bits = generate_markov_bits(n_bits, config.flip_prob, config.seed)
    modulated = ook_modulate(bits)
    emitted = led_response(modulated, config.led_steepness, config.led_midpoint)
    detected = config.responsivity * emitted
    clean = apply_multipath(detected, config.multipath_delay, config.multipath_gain)
    received, sigma = add_awgn(clean, config.snr_db, config.seed)
    if config.alignment_offset != 0:
        clean = shift_for_alignment(clean, config.alignment_offset)
        received = shift_for_alignment(received, config.alignment_offset)
    return LinkRealization(bits=bits, clean_signal=clean, received=received,
                           noise_sigma=sigma, config=config)


def hard_decision(signal, threshold=0.5):
    """Threshold detector; samples equal to the threshold decide 1."""
    signal = np.asarray(signal)
    if not np.all(np.isfinite(signal)):
        raise ValueError("cannot threshold a non-finite signal")
    return (signal >= threshold).astype(np.int8)


def measured_snr_db(realization):
    """Empirical SNR of a realization, in dB."""
    clean = realization.clean_signal
    noise = realization.received - clean
    noise_power = float(np.mean(noise**2))
    if noise_power == 0.0:
        return math.inf
    return 10.0 * math.log10(float(np.mean(clean**2)) / noise_power)


def export_link_csv(realization, path):
    """Write ``index,bit,clean,received`` rows, 9 significant digits."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("index,bit,clean,received\n")
        for i, (b, c, r) in enumerate(zip(realization.bits,
                                          realization.clean_signal,
                                          realization.received)):
            fh.write(f"{i},{int(b)},{c:.9g},{r:.9g}\n")
