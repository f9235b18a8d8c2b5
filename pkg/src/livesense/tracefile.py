"""Binary CSI trace codec: fixed-layout little-endian records.

Layout (all little-endian):

    magic "CSI1" | u16 version=1 | u32 N | f64 carrier_freq_hz
    | f64 bandwidth_hz | f64 nominal_frame_interval_s
    then per frame:
    f64 timestamp | u32 seq | u8 flags | N x (f32 re, f32 im)

CSI samples are stored at float32 precision; decoding a file and
re-encoding it reproduces the bytes exactly. The same per-frame record
(without the header) is the UDP datagram payload format.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from .config import SensingConfig
from .frames import CsiFrame

MAGIC = b"CSI1"
VERSION = 1
_HEADER = struct.Struct("<4sHIddd")
_FRAME_META = struct.Struct("<dIB")


class TraceDecodeError(ValueError):
    """Malformed trace data; carries the byte offset of the problem."""

    def __init__(self, message: str, byte_offset: int):
        super().__init__(f"{message} (at byte {byte_offset})")
        self.byte_offset = byte_offset


@dataclass(frozen=True)
class TraceHeader:
    n_subcarriers: int
    carrier_freq_hz: float
    bandwidth_hz: float
    frame_interval_s: float

    @property
    def frame_record_size(self) -> int:
        return _FRAME_META.size + 8 * self.n_subcarriers

    def matches(self, config: SensingConfig) -> bool:
        return (
            self.n_subcarriers == config.n_subcarriers
            and self.carrier_freq_hz == config.carrier_freq_hz
            and self.bandwidth_hz == config.bandwidth_hz
            and self.frame_interval_s == config.frame_interval_s
        )


def encode_header(config: SensingConfig) -> bytes:
    return _HEADER.pack(
        MAGIC,
        VERSION,
        config.n_subcarriers,
        config.carrier_freq_hz,
        config.bandwidth_hz,
        config.frame_interval_s,
    )


def encode_frame(frame: CsiFrame) -> bytes:
    meta = _FRAME_META.pack(frame.timestamp, frame.seq, frame.flags & 0xFF)
    return meta + frame.csi.astype("<c8").tobytes()


def encode_trace(frames: Sequence[CsiFrame], config: SensingConfig) -> bytes:
    parts = [encode_header(config)]
    for frame in frames:
        if frame.n_subcarriers != config.n_subcarriers:
            raise ValueError(
                f"frame seq {frame.seq} has {frame.n_subcarriers} subcarriers, "
                f"config says {config.n_subcarriers}"
            )
        parts.append(encode_frame(frame))
    return b"".join(parts)


def decode_frame_payload(payload: bytes, n_subcarriers: int, offset_hint: int = 0) -> CsiFrame:
    """Decode one frame record (the UDP datagram format)."""
    expected = _FRAME_META.size + 8 * n_subcarriers
    if len(payload) != expected:
        raise TraceDecodeError(
            f"frame record is {len(payload)} bytes, expected {expected}", offset_hint
        )
    timestamp, seq, flags = _FRAME_META.unpack_from(payload)
    csi = np.frombuffer(payload, dtype="<c8", count=n_subcarriers, offset=_FRAME_META.size)
    return CsiFrame(timestamp=timestamp, seq=seq, csi=csi, flags=flags)


def decode_header(data: bytes) -> TraceHeader:
    if len(data) < _HEADER.size:
        raise TraceDecodeError("truncated header", len(data))
    magic, version, n, f_c, bw, interval = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise TraceDecodeError(f"bad magic {magic!r}", 0)
    if version != VERSION:
        raise TraceDecodeError(f"unsupported version {version}", 4)
    if n == 0 or n > 1 << 20:
        raise TraceDecodeError(f"implausible subcarrier count {n}", 6)
    return TraceHeader(
        n_subcarriers=n,
        carrier_freq_hz=f_c,
        bandwidth_hz=bw,
        frame_interval_s=interval,
    )


def decode_trace(data: bytes) -> tuple[TraceHeader, list[CsiFrame]]:
    """Decode a full trace; raises TraceDecodeError naming the offending
    frame index and byte offset on truncation."""
    header = decode_header(data)
    record = header.frame_record_size
    frames: list[CsiFrame] = []
    offset = _HEADER.size
    index = 0
    while offset < len(data):
        chunk = data[offset : offset + record]
        if len(chunk) < record:
            raise TraceDecodeError(f"trace truncated mid-frame {index}", offset)
        frames.append(decode_frame_payload(chunk, header.n_subcarriers, offset))
        offset += record
        index += 1
    return header, frames


class TraceWriter:
    """Incremental trace writer for live recording (--record)."""

    def __init__(self, fh: BinaryIO, config: SensingConfig):
        self._fh = fh
        self._n = config.n_subcarriers
        fh.write(encode_header(config))

    def write(self, frame: CsiFrame) -> None:
        if frame.n_subcarriers != self._n:
            raise ValueError("frame subcarrier count changed mid-trace")
        self._fh.write(encode_frame(frame))


def write_trace(path, frames: Iterable[CsiFrame], config: SensingConfig) -> None:
    with open(path, "wb") as fh:
        writer = TraceWriter(fh, config)
        for frame in frames:
            writer.write(frame)


def read_trace(path) -> tuple[TraceHeader, list[CsiFrame]]:
    with open(path, "rb") as fh:
        return decode_trace(fh.read())
