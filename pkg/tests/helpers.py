"""Shared fixtures-in-spirit: scene builders and tree checksums for tests."""

from __future__ import annotations

import hashlib
from functools import lru_cache
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from regionsep import (
    BinauralSignal,
    SeparationConfig,
    Waveform,
    compute_features,
    make_spherical_bank,
    render_binaural_source,
    spherical_itd,
    stft,
)
from regionsep.signals import band_noise_source

SR = 16000
DTM = 8.9e-4  # seconds, the delta_tau_max behind f_aliasing = 562 Hz


@lru_cache(maxsize=2)
def spherical_bank(step: float = 5.0):
    return make_spherical_bank(np.arange(0.0, 360.0, step), DTM, SR)


def single_source_scene(
    azimuth: float,
    seed: int,
    duration: float = 4.0,
    group: Optional[int] = None,
) -> Tuple[BinauralSignal, float]:
    """Band-noise source rendered at one azimuth; returns (signal, true ITD)."""
    rng = np.random.default_rng(seed)
    src = band_noise_source(rng, duration, SR, band_group=group)
    bank = spherical_bank()
    rendered = render_binaural_source(src, bank, azimuth, duration)
    return rendered, spherical_itd(bank.nearest_azimuth(azimuth), DTM)


def two_source_scene(
    az1: float, az2: float, seed: int, duration: float = 4.0
) -> Tuple[BinauralSignal, BinauralSignal, BinauralSignal, float, float]:
    """Opposite-group pair; returns (mixture, s1, s2, itd1, itd2)."""
    rng = np.random.default_rng(seed)
    src1 = band_noise_source(rng, duration, SR, band_group=0)
    src2 = band_noise_source(rng, duration, SR, band_group=1)
    bank = spherical_bank()
    s1 = render_binaural_source(src1, bank, az1, duration)
    s2 = render_binaural_source(src2, bank, az2, duration)
    mixture = BinauralSignal(
        Waveform(s1.left.samples + s2.left.samples, SR),
        Waveform(s1.right.samples + s2.right.samples, SR),
    )
    return mixture, s1, s2, spherical_itd(az1, DTM), spherical_itd(az2, DTM)


def check_mask_algebra(
    mixture: BinauralSignal, cfg: SeparationConfig, masks
) -> None:
    """Disjointness, coverage of non-excluded bins, exact energy split."""
    mask1, mask2 = masks
    grid = compute_features(
        stft(mixture.left, cfg.stft),
        stft(mixture.right, cfg.stft),
        cfg.f_aliasing,
        cfg.energy_floor_db,
    )
    assert not np.any(mask1 & mask2), "masks overlap"
    assert np.array_equal(mask1 | mask2, ~grid.excluded), (
        "masks do not cover exactly the non-excluded bins"
    )
    split = grid.energy * mask1 + grid.energy * mask2
    kept = grid.energy * ~grid.excluded
    assert np.array_equal(split, kept), "masked energies do not sum exactly"


def tree_digest(root) -> str:
    """SHA-256 over (relative path, file bytes) of every file under root."""
    h = hashlib.sha256()
    root = Path(root)
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        h.update(str(path.relative_to(root)).encode())
        h.update(b"\x00")
        h.update(path.read_bytes())
    return h.hexdigest()
