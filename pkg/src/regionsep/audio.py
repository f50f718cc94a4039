"""WAV file I/O and the core audio value types.

All audio in this package flows through two immutable containers:
``Waveform`` (mono) and ``BinauralSignal`` (left/right pair). WAV support
covers RIFF PCM 16-bit (read/write) and IEEE float 32-bit (read only),
1 or 2 channels.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

PCM16_SCALE = 32768.0

# canonical project rate; mismatched rates are rejected, never resampled
DEFAULT_SAMPLE_RATE = 16000


class AudioFormatError(ValueError):
    """Raised for malformed or unsupported WAV / bank files."""


@dataclass(frozen=True)
class Waveform:
    """A mono sample sequence at a fixed sample rate.

    Samples are float64, nominally in [-1, 1], and must be finite.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1:
            raise ValueError(f"samples must be 1-D, got shape {samples.shape}")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if samples.size and not np.all(np.isfinite(samples)):
            raise ValueError("samples contain NaN or Inf")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class BinauralSignal:
    """Synchronized left/right waveforms of equal length and rate."""

    left: Waveform
    right: Waveform

    def __post_init__(self):
        if len(self.left) != len(self.right):
            raise ValueError(
                f"channel length mismatch: {len(self.left)} vs {len(self.right)}"
            )
        if self.left.sample_rate != self.right.sample_rate:
            raise ValueError(
                f"channel sample-rate mismatch: {self.left.sample_rate} "
                f"vs {self.right.sample_rate}"
            )

    def __len__(self) -> int:
        return len(self.left)

    @property
    def sample_rate(self) -> int:
        return self.left.sample_rate

    def swapped(self) -> "BinauralSignal":
        return BinauralSignal(left=self.right, right=self.left)


AnySignal = Union[Waveform, BinauralSignal]


def _parse_riff_chunks(data: bytes):
    if len(data) < 12 or data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise AudioFormatError("not a RIFF/WAVE file")
    pos = 12
    chunks = {}
    while pos + 8 <= len(data):
        cid = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8 : pos + 8 + size]
        if cid not in chunks:
            chunks[cid] = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned
    return chunks


def read_wav(path) -> AnySignal:
    """Read a PCM-16 or float-32 WAV file.

    Mono files yield a Waveform; stereo files yield a BinauralSignal with
    channel 0 as the left ear. PCM samples are normalized by 32768.
    """
    data = Path(path).read_bytes()
    chunks = _parse_riff_chunks(data)
    if b"fmt " not in chunks or b"data" not in chunks:
        raise AudioFormatError("missing fmt or data chunk")
    fmt = chunks[b"fmt "]
    if len(fmt) < 16:
        raise AudioFormatError("fmt chunk too short")
    audio_format, channels, sample_rate, _, _, bits = struct.unpack_from(
        "<HHIIHH", fmt, 0
    )
    if audio_format == 0xFFFE and len(fmt) >= 40:
        # WAVE_FORMAT_EXTENSIBLE: sub-format GUID starts with the real tag
        (audio_format,) = struct.unpack_from("<H", fmt, 24)
    if channels not in (1, 2):
        raise AudioFormatError(f"unsupported channel count: {channels}")

    raw = chunks[b"data"]
    if audio_format == 1 and bits == 16:
        ints = np.frombuffer(raw[: len(raw) - len(raw) % 2], dtype="<i2")
        samples = ints.astype(np.float64) / PCM16_SCALE
    elif audio_format == 3 and bits == 32:
        floats = np.frombuffer(raw[: len(raw) - len(raw) % 4], dtype="<f4")
        samples = floats.astype(np.float64)
    else:
        raise AudioFormatError(
            f"unsupported encoding: format tag {audio_format}, {bits}-bit"
        )

    if channels == 1:
        return Waveform(samples, sample_rate)
    samples = samples[: samples.size - samples.size % 2].reshape(-1, 2)
    return BinauralSignal(
        left=Waveform(samples[:, 0].copy(), sample_rate),
        right=Waveform(samples[:, 1].copy(), sample_rate),
    )


def write_wav(signal: AnySignal, path) -> int:
    """Write a 16-bit PCM WAV file.

    Samples outside [-1, 1] are clipped; returns the number of clipped
    samples. Round trip with read_wav is within one quantization step.
    """
    if isinstance(signal, BinauralSignal):
        frames = np.stack([signal.left.samples, signal.right.samples], axis=1)
        sample_rate = signal.sample_rate
        channels = 2
    else:
        frames = signal.samples[:, None]
        sample_rate = signal.sample_rate
        channels = 1

    clipped = int(np.count_nonzero((frames > 1.0) | (frames < -1.0)))
    ints = np.clip(np.round(frames * PCM16_SCALE), -32768, 32767).astype("<i2")
    payload = ints.tobytes()

    byte_rate = sample_rate * channels * 2
    header = b"".join(
        [
            b"RIFF",
            struct.pack("<I", 36 + len(payload)),
            b"WAVE",
            b"fmt ",
            struct.pack("<IHHIIHH", 16, 1, channels, sample_rate, byte_rate, channels * 2, 16),
            b"data",
            struct.pack("<I", len(payload)),
        ]
    )
    Path(path).write_bytes(header + payload)
    return clipped
