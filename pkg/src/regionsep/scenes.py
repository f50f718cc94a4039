"""Binaural scene construction: region geometry, HRIR rendering, mixtures.

Azimuth convention: 0 degrees is straight ahead and angles grow clockwise,
so 90 degrees is the listener's right. A source on the left reaches the
left ear first and therefore produces a positive ITD (left leads); under
the spherical-head model the ITD of a source at azimuth ``a`` is
``-delta_tau_max * sin(a)``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from .audio import BinauralSignal, Waveform
from .hrir import HrirBank

AZIMUTH_SNAP_TOLERANCE_DEG = 10.0


@dataclass(frozen=True)
class RegionLayout:
    """Azimuth intervals per region; the union must partition [0, 360).

    ``regions[i]`` is a tuple of half-open ``(lo, hi)`` intervals in
    degrees belonging to region ``i + 1`` (region ids are 1-based).
    """

    regions: Tuple[Tuple[Tuple[float, float], ...], ...]

    def __post_init__(self):
        if len(self.regions) < 2:
            raise ValueError("need at least 2 regions")
        spans = []
        for intervals in self.regions:
            for lo, hi in intervals:
                if not (0.0 <= lo < hi <= 360.0):
                    raise ValueError(f"bad interval ({lo}, {hi})")
                spans.append((lo, hi))
        spans.sort()
        cursor = 0.0
        for lo, hi in spans:
            if lo != cursor:
                raise ValueError(
                    f"intervals do not partition [0, 360): gap/overlap at {lo}"
                )
            cursor = hi
        if cursor != 360.0:
            raise ValueError("intervals do not cover up to 360")

    @property
    def num_regions(self) -> int:
        return len(self.regions)


def default_layout_r3() -> RegionLayout:
    """Three regions: merged front+back cone, left quarter, right quarter."""
    return RegionLayout(
        regions=(
            ((315.0, 360.0), (0.0, 45.0), (135.0, 225.0)),  # front + back
            ((225.0, 315.0),),                              # left
            ((45.0, 135.0),),                               # right
        )
    )


def region_of_azimuth(layout: RegionLayout, azimuth: float) -> int:
    """1-based region id of an azimuth in [0, 360); intervals are half-open."""
    if not 0.0 <= azimuth < 360.0:
        raise ValueError(f"azimuth {azimuth} outside [0, 360)")
    for i, intervals in enumerate(layout.regions):
        for lo, hi in intervals:
            if lo <= azimuth < hi:
                return i + 1
    raise AssertionError("partition invariant violated")  # pragma: no cover


def spherical_itd(azimuth: float, delta_tau_max: float) -> float:
    """ITD (seconds) of a source at an azimuth under the spherical model."""
    return -delta_tau_max * math.sin(math.radians(azimuth))


def region_of_itd(itd: float, delta_tau_max: float) -> int:
    """Map an ITD label to the default 3-region layout.

    Magnitudes below delta_tau_max*sin(45 deg) fall in the merged
    front/back cone (region 1); larger positive ITDs (left leads) map to
    the left region 2, negative to the right region 3.
    """
    if abs(itd) > delta_tau_max:
        warnings.warn(
            f"ITD {itd} exceeds delta_tau_max {delta_tau_max}; clamping",
            stacklevel=2,
        )
        itd = math.copysign(delta_tau_max, itd)
    if abs(itd) < delta_tau_max * math.sin(math.radians(45.0)):
        return 1
    return 2 if itd > 0 else 3


def synth_spherical_hrir(
    azimuth: float,
    delta_tau_max: float,
    sample_rate: int,
    taps: int = 256,
) -> Tuple[Waveform, Waveform]:
    """Synthesize a binaural impulse-response pair for one azimuth.

    The interaural delay is split antisymmetrically around the filter
    center as an exact linear-phase fractional delay, and the far ear gets
    an azimuth-dependent head-shadow roll-off so the ILD varies with
    frequency. Frequency-sampled design, inverted with irfft.
    """
    if taps < 64:
        raise ValueError(f"need at least 64 taps, got {taps}")
    itd = spherical_itd(azimuth, delta_tau_max)
    delay_samples = itd * sample_rate
    center = taps / 2.0
    d_left = center - delay_samples / 2.0
    d_right = center + delay_samples / 2.0

    s = math.sin(math.radians(azimuth))
    shadow_left = max(0.0, s)    # source on the right shadows the left ear
    shadow_right = max(0.0, -s)

    k = np.arange(taps // 2 + 1)
    freqs = k * sample_rate / taps

    def ear_response(delay: float, shadow: float) -> np.ndarray:
        gain = (1.0 - 0.35 * shadow) / np.sqrt(
            1.0 + (freqs * shadow / 4000.0) ** 2
        )
        phase = np.exp(-2j * np.pi * k * delay / taps)
        return gain * phase

    left = np.fft.irfft(ear_response(d_left, shadow_left), n=taps)
    right = np.fft.irfft(ear_response(d_right, shadow_right), n=taps)
    return Waveform(left, sample_rate), Waveform(right, sample_rate)


def make_spherical_bank(
    azimuths: Sequence[float],
    delta_tau_max: float,
    sample_rate: int,
    taps: int = 256,
) -> HrirBank:
    entries = {
        float(az): synth_spherical_hrir(az, delta_tau_max, sample_rate, taps)
        for az in azimuths
    }
    return HrirBank(entries=entries, sample_rate=sample_rate)


@dataclass(frozen=True)
class SceneSource:
    source_id: str
    azimuth: float
    gain: float = 1.0

    def __post_init__(self):
        if self.gain <= 0:
            raise ValueError(f"gain must be positive, got {self.gain}")


@dataclass(frozen=True)
class SceneSpec:
    sources: Tuple[SceneSource, ...]
    duration: float  # seconds
    seed: int = 0
    hrir_bank_id: str = ""

    def to_json(self) -> str:
        return json.dumps(
            {
                "duration": self.duration,
                "seed": self.seed,
                "hrir_bank_id": self.hrir_bank_id,
                "sources": [
                    {"source_id": s.source_id, "azimuth": s.azimuth, "gain": s.gain}
                    for s in self.sources
                ],
            },
            indent=2,
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str) -> "SceneSpec":
        obj = json.loads(text)
        return SceneSpec(
            sources=tuple(
                SceneSource(s["source_id"], s["azimuth"], s.get("gain", 1.0))
                for s in obj["sources"]
            ),
            duration=obj["duration"],
            seed=obj.get("seed", 0),
            hrir_bank_id=obj.get("hrir_bank_id", ""),
        )


@dataclass(frozen=True)
class RegionMixtureSet:
    """Ground-truth per-region binaural mixtures and their sum."""

    region_signals: Tuple[BinauralSignal, ...]
    mixture: BinauralSignal
    active: Tuple[bool, ...]

    @property
    def num_regions(self) -> int:
        return len(self.region_signals)


def _render_source(
    wave: Waveform, bank: HrirBank, azimuth: float, gain: float, n_out: int
) -> Tuple[np.ndarray, np.ndarray, float]:
    """Convolve a source with its snapped-azimuth HRIR pair."""
    snapped = bank.nearest_azimuth(azimuth, AZIMUTH_SNAP_TOLERANCE_DEG)
    h_left, h_right = bank.entries[snapped]

    def conv(h: Waveform) -> np.ndarray:
        y = gain * np.convolve(wave.samples, h.samples)
        out = np.zeros(n_out)
        m = min(n_out, y.size)
        out[:m] = y[:m]
        return out

    return conv(h_left), conv(h_right), snapped


def synth_scene(
    spec: SceneSpec,
    bank: HrirBank,
    layout: RegionLayout,
    pool: Mapping[str, Waveform],
) -> RegionMixtureSet:
    """Render every source through its HRIR and sum per region and in total."""
    sr = bank.sample_rate
    n_out = int(round(spec.duration * sr))
    r = layout.num_regions
    region_l = [np.zeros(n_out) for _ in range(r)]
    region_r = [np.zeros(n_out) for _ in range(r)]
    active = [False] * r

    for src in spec.sources:
        wave = pool[src.source_id]
        if wave.sample_rate != sr:
            raise ValueError(
                f"source {src.source_id} rate {wave.sample_rate} != bank rate {sr}"
            )
        y_l, y_r, snapped = _render_source(wave, bank, src.azimuth, src.gain, n_out)
        region = region_of_azimuth(layout, snapped) - 1
        region_l[region] += y_l
        region_r[region] += y_r
        active[region] = True

    region_signals = tuple(
        BinauralSignal(Waveform(region_l[i], sr), Waveform(region_r[i], sr))
        for i in range(r)
    )
    # the mixture is the exact elementwise sum of the region signals
    mix_l = np.zeros(n_out)
    mix_r = np.zeros(n_out)
    for sig in region_signals:
        mix_l += sig.left.samples
        mix_r += sig.right.samples
    mixture = BinauralSignal(Waveform(mix_l, sr), Waveform(mix_r, sr))
    return RegionMixtureSet(
        region_signals=region_signals, mixture=mixture, active=tuple(active)
    )


def render_binaural_source(
    wave: Waveform, bank: HrirBank, azimuth: float, duration: float, gain: float = 1.0
) -> BinauralSignal:
    """Single-source convenience wrapper around the scene renderer."""
    n_out = int(round(duration * bank.sample_rate))
    y_l, y_r, _ = _render_source(wave, bank, azimuth, gain, n_out)
    sr = bank.sample_rate
    return BinauralSignal(Waveform(y_l, sr), Waveform(y_r, sr))


def random_scene(
    k_range: Tuple[int, int],
    layout: RegionLayout,
    bank: HrirBank,
    pool_ids: Sequence[str],
    seed: int,
    duration: float,
    hrir_bank_id: str = "",
) -> SceneSpec:
    """Draw K sources region-first: uniform region, then a uniform bank angle."""
    if not pool_ids:
        raise ValueError("source pool is empty")
    k_lo, k_hi = k_range
    if not 1 <= k_lo <= k_hi:
        raise ValueError(f"bad k_range {k_range}")
    rng = np.random.default_rng(seed)
    k = int(rng.integers(k_lo, k_hi + 1))

    by_region: Dict[int, List[float]] = {}
    for az in bank.azimuths:
        by_region.setdefault(region_of_azimuth(layout, float(az)), []).append(float(az))
    region_ids = sorted(r for r in by_region if by_region[r])

    sources = []
    for _ in range(k):
        region = region_ids[int(rng.integers(len(region_ids)))]
        azimuth = by_region[region][int(rng.integers(len(by_region[region])))]
        source_id = pool_ids[int(rng.integers(len(pool_ids)))]
        sources.append(SceneSource(source_id=source_id, azimuth=azimuth))
    return SceneSpec(
        sources=tuple(sources), duration=duration, seed=seed, hrir_bank_id=hrir_bank_id
    )
