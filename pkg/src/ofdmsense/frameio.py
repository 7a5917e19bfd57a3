"""Binary frame files: recorded (or simulated) tx/rx subcarrier pairs.

Layout (little-endian):

    offset  size  field
    0       8     magic  b"OFDMFRAM"
    8       4     u32 format version (currently 1)
    12      4     u32 N   subcarriers per symbol
    16      4     u32 L   symbol records in the payload
    20      8     f64 subcarrier spacing in Hz
    28      8     f64 carrier frequency in Hz
    36      -     payload: L records, each N complex128 tx symbols followed
                  by N complex128 rx samples (interleaved re/im float64)

The payload must be exactly L * N * 2 * 2 * 8 bytes; anything shorter or
longer is rejected before any record is parsed.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ofdmsense.channel import SymbolFrame
from ofdmsense.constellation import SymbolBlock

__all__ = [
    "BadMagicError",
    "FrameFileHeader",
    "FrameFormatError",
    "NumerologyMismatchError",
    "TruncatedPayloadError",
    "read_frames",
    "write_frames",
]

MAGIC = b"OFDMFRAM"
VERSION = 1
_HEADER = struct.Struct("<8sIIIdd")


class FrameFormatError(Exception):
    """Base class for frame file format errors."""


class BadMagicError(FrameFormatError):
    """File does not start with the frame magic or has an unknown version."""


class TruncatedPayloadError(FrameFormatError):
    """Payload length does not match the header's N and L."""


class NumerologyMismatchError(FrameFormatError):
    """Frame header is incompatible with the requested processing parameters."""


@dataclass(frozen=True)
class FrameFileHeader:
    version: int
    n_subcarriers: int
    n_records: int
    subcarrier_spacing: float
    carrier_freq: float

    @property
    def payload_bytes(self) -> int:
        return self.n_records * self.n_subcarriers * 2 * 2 * 8


def write_frames(path, frames, subcarrier_spacing: float, carrier_freq: float = 0.0) -> None:
    """Serialize symbol frames to a frame file."""
    frames = list(frames)
    if not frames:
        raise ValueError("need at least one frame")
    n = frames[0].rx.size
    if any(f.rx.size != n for f in frames):
        raise ValueError("all frames must share one subcarrier count")
    header = _HEADER.pack(MAGIC, VERSION, n, len(frames),
                          float(subcarrier_spacing), float(carrier_freq))
    with open(path, "wb") as fh:
        fh.write(header)
        for f in frames:
            fh.write(np.ascontiguousarray(f.tx.symbols, dtype="<c16").tobytes())
            fh.write(np.ascontiguousarray(f.rx, dtype="<c16").tobytes())


def read_frames(path):
    """Read a frame file; returns (header, list of SymbolFrame).

    Raises BadMagicError for a foreign or unversioned file and
    TruncatedPayloadError when the payload byte count is off; no partial
    frames are ever returned.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise BadMagicError(f"file too short for a frame header ({len(raw)} bytes)")
    magic, version, n, l, spacing, carrier = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if version != VERSION:
        raise BadMagicError(f"unsupported frame format version {version}")
    header = FrameFileHeader(
        version=version,
        n_subcarriers=n,
        n_records=l,
        subcarrier_spacing=spacing,
        carrier_freq=carrier,
    )
    payload = raw[_HEADER.size :]
    if len(payload) != header.payload_bytes:
        raise TruncatedPayloadError(
            f"payload is {len(payload)} bytes, header implies {header.payload_bytes}"
        )
    record = np.frombuffer(payload, dtype="<c16").reshape(l, 2, n)
    frames = []
    for i in range(l):
        tx = SymbolBlock(symbols=record[i, 0].astype(np.complex128),
                         block_normalized=False)
        frames.append(SymbolFrame(tx=tx, rx=record[i, 1].astype(np.complex128)))
    return header, frames
