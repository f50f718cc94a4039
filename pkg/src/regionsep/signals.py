"""Deterministic synthetic source signals for desk-scale experiments.

Speech-like in the properties the separator relies on:

* W-disjoint orthogonality. Below the aliasing frequency each source
  occupies its own narrow band (disjoint between the two "groups", with
  guard gaps wider than the analysis window's mainlobe), so the per-bin
  delay estimates feeding the mixture model are never cross-contaminated.
  Above it both groups share the same bands but are gated onto alternating
  time slots, like conversational turns: any time-frequency bin there is
  dominated by whichever source holds the current slot.
* Fluctuating short-time energy. The slot gates plus a slow random
  envelope guarantee frames where one source dominates, which the
  level-difference assignment of aliased bins depends on.

The spectrum inside each band is continuous noise rather than discrete
tones; leakage into a neighboring analysis bin then carries a frequency
close to that bin's own center, and the per-bin phase-derived delay stays
unbiased. Low bands start well above DC because that delay's error scales
as 1/bin.
"""

from __future__ import annotations

from typing import Optional, Sequence, Tuple

import numpy as np

from .audio import Waveform

# band positions are expressed in 1024-point / 16 kHz analysis bins
ANALYSIS_BINS = 1024

# One low band per group with a 4-bin guard gap between them. The top
# band stays well under the typical aliasing bin (36): near that bin the
# interaural phase of a hard-panned source approaches +-pi and per-bin
# noise would wrap it, flipping the delay estimate's sign.
LOW_GROUP_BANDS = ((14, 20), (24, 30))

# shared by all sources; time slots, not bands, keep them disjoint here
HIGH_BANDS = ((40, 46), (70, 76), (120, 126), (200, 206), (320, 326), (420, 426))

SLOT_SECONDS = 0.5
RAMP_SECONDS = 0.08
OFF_LEVEL = 0.01


def _slot_gate(
    t: np.ndarray, parity: int, slot_seconds: float, ramp_seconds: float
) -> np.ndarray:
    """Smooth gate, high on slots of the given parity, OFF_LEVEL between."""
    p = np.mod(t - (parity % 2) * slot_seconds, 2.0 * slot_seconds)
    up = np.clip(p / ramp_seconds, 0.0, 1.0)
    down = np.clip((slot_seconds + ramp_seconds - p) / ramp_seconds, 0.0, 1.0)
    # raised-cosine edges: a corner in the gate would splatter the loud
    # bands' phase across the whole spectrum in the transition frames
    gate = 0.5 - 0.5 * np.cos(np.pi * np.minimum(up, down))
    return OFF_LEVEL + (1.0 - OFF_LEVEL) * gate


def band_noise_source(
    rng: np.random.Generator,
    duration: float,
    sample_rate: int,
    bands: Optional[Sequence[Tuple[int, int]]] = None,
    band_group: Optional[int] = None,
    envelope_hz: float = 3.0,
    amplitude: float = 0.25,
) -> Waveform:
    """Random noise confined to sparse frequency bands, gated and modulated.

    ``bands`` are half-open ``(start, stop)`` intervals in analysis-bin
    units (sample_rate/1024 Hz each); when omitted they are the group's
    low band plus the shared high bands. ``band_group`` (0 or 1, random
    when None) also selects the parity of the active time slots.
    """
    n = int(round(duration * sample_rate))
    if band_group is None:
        band_group = int(rng.integers(2))
    if bands is None:
        bands = (LOW_GROUP_BANDS[band_group % 2],) + HIGH_BANDS

    # shape white noise in the frequency domain of the full signal
    scale = n / ANALYSIS_BINS
    spectrum = np.zeros(n // 2 + 1, dtype=complex)
    for start, stop in bands:
        lo = int(round(start * scale))
        hi = min(int(round(stop * scale)), spectrum.size)
        width = hi - lo
        spectrum[lo:hi] = rng.standard_normal(width) + 1j * rng.standard_normal(width)
    out = np.fft.irfft(spectrum, n=n)

    # slow positive envelope so short-time energy fluctuates even in-slot
    n_knots = max(4, int(duration * envelope_hz) + 1)
    knots = rng.uniform(0.3, 1.0, size=n_knots)
    t = np.arange(n) / sample_rate
    out *= np.interp(t, np.linspace(0.0, duration, n_knots), knots)
    out *= _slot_gate(t, band_group, SLOT_SECONDS, RAMP_SECONDS)

    # fade both ends: a hard truncation edge splatters the bands' phase
    # across the whole spectrum of the frames containing it
    n_fade = min(int(round(RAMP_SECONDS * sample_rate)), n // 2)
    if n_fade:
        fade = 0.5 - 0.5 * np.cos(np.pi * np.arange(n_fade) / n_fade)
        out[:n_fade] *= fade
        out[-n_fade:] *= fade[::-1]

    peak = np.max(np.abs(out))
    if peak > 0:
        out *= amplitude / peak
    return Waveform(out, sample_rate)


def make_source_pool(
    seed: int,
    count: int,
    duration: float,
    sample_rate: int,
    **kwargs,
) -> dict:
    """Seeded dictionary of band-noise sources keyed src000, src001, ...

    Sources alternate between the two groups, so any pair drawn from
    opposite parities is W-disjoint by construction (disjoint low bands,
    complementary time slots in the shared high bands).
    """
    rng = np.random.default_rng(seed)
    return {
        f"src{i:03d}": band_noise_source(
            rng, duration, sample_rate, band_group=i % 2, **kwargs
        )
        for i in range(count)
    }
