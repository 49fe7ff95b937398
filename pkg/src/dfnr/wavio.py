"""Minimal mono WAV reader/writer: RIFF with PCM16 (format 1) or float32
(format 3).  No resampling, no channel mixing; anything else is rejected."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

PCM16 = "pcm16"
FLOAT32 = "float32"


class WavFormatError(ValueError):
    """The file parses as RIFF/WAVE but violates a supported-format rule."""


@dataclass
class WavData:
    samples: np.ndarray  # float32 in [-1, 1]
    sample_rate_hz: int
    sample_format: str  # PCM16 | FLOAT32


def read_wav(path: str | Path) -> WavData:
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise ValueError(f"{path}: not a RIFF/WAVE file")
    pos = 12
    fmt = None
    data = None
    while pos + 8 <= len(raw):
        cid, size = struct.unpack_from("<4sI", raw, pos)
        body = raw[pos + 8 : pos + 8 + size]
        if cid == b"fmt ":
            fmt = body
        elif cid == b"data":
            data = body
        pos += 8 + size + (size & 1)
    if fmt is None or data is None:
        raise ValueError(f"{path}: missing fmt or data chunk")
    if len(fmt) < 16:
        raise ValueError(f"{path}: truncated fmt chunk")
    tag, channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", fmt, 0)
    if channels != 1:
        raise WavFormatError(f"{path}: expected mono, got {channels} channels")
    if tag == 1 and bits == 16:
        samples = np.frombuffer(data, dtype="<i2").astype(np.float32) / 32768.0
        kind = PCM16
    elif tag == 3 and bits == 32:
        samples = np.frombuffer(data, dtype="<f4").astype(np.float32)
        kind = FLOAT32
    else:
        raise WavFormatError(
            f"{path}: unsupported format tag {tag} / {bits} bits (need PCM16 or float32)"
        )
    return WavData(samples=samples, sample_rate_hz=rate, sample_format=kind)


def write_wav(path: str | Path, samples: np.ndarray, sample_rate_hz: int, sample_format: str) -> None:
    x = np.asarray(samples, dtype=np.float32)
    if sample_format == PCM16:
        # symmetric with the reader's /32768; only exactly +1.0 clips by 1 LSB
        payload = np.clip(np.rint(x * 32768.0), -32768, 32767).astype("<i2").tobytes()
        tag, bits = 1, 16
    elif sample_format == FLOAT32:
        payload = x.astype("<f4").tobytes()
        tag, bits = 3, 32
    else:
        raise ValueError(f"unknown sample format {sample_format!r}")
    block = bits // 8
    fmt = struct.pack("<HHIIHH", tag, 1, sample_rate_hz, sample_rate_hz * block, block, bits)
    chunks = b"".join(
        (
            b"fmt ",
            struct.pack("<I", len(fmt)),
            fmt,
            b"data",
            struct.pack("<I", len(payload)),
            payload,
        )
    )
    header = b"RIFF" + struct.pack("<I", 4 + len(chunks)) + b"WAVE"
    Path(path).write_bytes(header + chunks)
