"""MAP sequence detection for the simulated link.

The channel is a finite-state machine over the last (delay + 1) bits, so
the exact maximum-a-posteriori bit sequence is computed by a Viterbi
dynamic program whose branch metric combines the Gaussian log-likelihood
of each received sample with the Markov log-prior of the bit transition.
A brute-force enumerator over all 2^n sequences validates the recursion
on short instances.
"""

import math

import numpy as np

from .channel import led_response, undo_alignment

SIGMA_FLOOR = 1e-12
MAX_STATE_BITS = 22     # refuse trellises beyond 2^22 states


def _log_or_neginf(p):
    return math.log(p) if p > 0.0 else -math.inf


def _level_pair(config):
    """Detector amplitudes of an isolated 0 and 1 bit."""
    levels = led_response(np.array([0.0, 1.0]),
                          config.led_steepness, config.led_midpoint)
    return config.responsivity * levels


def map_sequence_detector(received, config, noise_sigma):
    """Exact MAP estimate of the transmitted bits given one realization.

    State at time n is the bit tuple (b[n-delay], ..., b[n]), encoded as an
    integer with the oldest bit as the most significant; score ties prefer
    the smaller encoding.  ``noise_sigma`` comes from the realization.
    """
    y = np.asarray(received, dtype=np.float64)
    n = len(y)
    if n == 0:
        raise ValueError("cannot decode an empty signal")
    delay = config.multipath_delay
    if delay + 1 > MAX_STATE_BITS:
        raise ValueError(
            f"multipath delay {delay} needs 2^{delay + 1} trellis states; refusing")
    y = undo_alignment(y, config.alignment_offset)
    gain = config.multipath_gain
    levels = _level_pair(config)
    sigma = max(float(noise_sigma), SIGMA_FLOOR)
    inv2sig = 1.0 / (2.0 * sigma * sigma)
    log_flip = _log_or_neginf(config.flip_prob)
    log_stay = _log_or_neginf(1.0 - config.flip_prob)

    width = min(delay + 1, n)
    full = 2 ** width
    expand_steps = min(delay + 1, n)

    # Expansion phase: states are whole prefixes until full trellis width.
    scores = np.array([0.0])
    for t in range(expand_steps):
        size = 2 ** (t + 1)
        codes = np.arange(size)
        new_bits = codes & 1
        if t == 0:
            prior = np.full(size, math.log(0.5))
        else:
            prev_bits = (codes >> 1) & 1
            prior = np.where(new_bits != prev_bits, log_flip, log_stay)
        clean = levels[new_bits].copy()
        if t >= delay:
            tap_bits = (codes >> delay) & 1
            clean += gain * levels[tap_bits]
        scores = scores[codes >> 1] + prior - (y[t] - clean) ** 2 * inv2sig

    if n <= delay + 1:
        best = int(np.argmax(scores))
        return np.array(
            [(best >> (width - 1 - j)) & 1 for j in range(width)], dtype=np.int8)

    # Steady recursion with path merging.  The transition prior sits inside
    # the max because for delay 0 the predecessors disagree on b[t-1].
    half = full >> 1
    codes = np.arange(full)
    new_bits = codes & 1
    clean = levels[new_bits] + gain * levels[(codes >> delay) & 1]
    pred0 = codes >> 1
    pred1 = pred0 + half
    prior0 = np.where(new_bits != (pred0 & 1), log_flip, log_stay)
    prior1 = np.where(new_bits != (pred1 & 1), log_flip, log_stay)
    backptr = np.zeros((n, full), dtype=np.uint8)
    for t in range(delay + 1, n):
        s0 = scores[pred0] + prior0
        s1 = scores[pred1] + prior1
        take1 = s1 > s0            # ties keep the smaller predecessor encoding
        backptr[t] = take1
        scores = np.where(take1, s1, s0) - (y[t] - clean) ** 2 * inv2sig

    bits = np.empty(n, dtype=np.int8)
    state = int(np.argmax(scores))  # first max: smallest encoding on ties
    for t in range(n - 1, delay, -1):
        bits[t] = state & 1
        state = (state >> 1) + (int(backptr[t][state]) << delay)
    for j in range(delay + 1):
        bits[delay - j] = (state >> j) & 1
    return bits


def exhaustive_map_oracle(received, config, noise_sigma, max_bits=14):
    """Brute-force MAP over all 2^n sequences; validates the Viterbi path.

    Same scoring and tie-break convention (smaller binary encoding with
    b[0] as the most significant bit) as :func:`map_sequence_detector`.
    """
    y = np.asarray(received, dtype=np.float64)
    n = len(y)
    if n == 0:
        raise ValueError("cannot decode an empty signal")
    if n > max_bits:
        raise ValueError(f"refusing to enumerate 2^{n} sequences (limit 2^{max_bits})")
    y = undo_alignment(y, config.alignment_offset)
    delay = config.multipath_delay
    gain = config.multipath_gain
    levels = _level_pair(config)
    sigma = max(float(noise_sigma), SIGMA_FLOOR)
    inv2sig = 1.0 / (2.0 * sigma * sigma)
    log_flip = _log_or_neginf(config.flip_prob)
    log_stay = _log_or_neginf(1.0 - config.flip_prob)

    codes = np.arange(2 ** n)
    shifts = np.arange(n - 1, -1, -1)                 # b[0] is the MSB
    bits = (codes[:, None] >> shifts[None, :]) & 1
    amplitudes = levels[bits]
    clean = amplitudes.copy()
    if 0 < delay < n:
        clean[:, delay:] += gain * amplitudes[:, :-delay]
    elif delay == 0:
        clean += gain * amplitudes
    flips = bits[:, 1:] != bits[:, :-1]
    log_prior = math.log(0.5) + np.where(flips, log_flip, log_stay).sum(axis=1)
    log_lik = -((y[None, :] - clean) ** 2 * inv2sig).sum(axis=1)
    best = int(np.argmax(log_prior + log_lik))       # first max: smallest encoding
    return bits[best].astype(np.int8)
