"""Binary message envelope for the protocol transport.

Layout (all little-endian):

==============  =====  ========================================
field           bytes  meaning
==============  =====  ========================================
version         u16    protocol version (currently 1)
iteration       u32    round index
phase           u8     Phase enum value
sender          u32    agent id (0 = coordinator)
receiver        u32    agent id (0 = coordinator)
count           u32    number of f64 payload entries (rows*cols)
rows, cols      u32x2  payload dimensions (vectors are (n, 1))
payload         8*n    row-major f64 data
==============  =====  ========================================
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

__all__ = ["PROTOCOL_VERSION", "Phase", "Message", "encode_message", "decode_message"]

PROTOCOL_VERSION = 1

_HEADER = struct.Struct("<HIBII")
_PAYLOAD_HEADER = struct.Struct("<III")


class Phase(IntEnum):
    SAP_S = 0
    SAP_LOAD = 1
    ALPHA_BROADCAST = 2
    TE_UPLOAD = 3
    XI_BAR_BROADCAST = 4
    XI_RETURN = 5


@dataclass
class Message:
    iteration: int
    phase: Phase
    sender: int
    receiver: int
    payload: np.ndarray
    version: int = PROTOCOL_VERSION

    def __post_init__(self):
        p = np.asarray(self.payload, dtype=float)
        if p.ndim == 0:
            p = p.reshape(1, 1)
        elif p.ndim == 1:
            p = p.reshape(-1, 1)
        elif p.ndim != 2:
            raise ValueError("payload must be at most 2-dimensional")
        self.payload = p


def encode_message(msg: Message) -> bytes:
    rows, cols = msg.payload.shape
    head = _HEADER.pack(msg.version, msg.iteration, int(msg.phase), msg.sender, msg.receiver)
    phead = _PAYLOAD_HEADER.pack(rows * cols, rows, cols)
    body = np.ascontiguousarray(msg.payload, dtype="<f8").tobytes()
    return head + phead + body


def decode_message(data: bytes) -> Message:
    if len(data) < _HEADER.size + _PAYLOAD_HEADER.size:
        raise ValueError(f"message truncated: {len(data)} bytes")
    version, iteration, phase, sender, receiver = _HEADER.unpack_from(data, 0)
    if version != PROTOCOL_VERSION:
        raise ValueError(f"unsupported protocol version {version}")
    count, rows, cols = _PAYLOAD_HEADER.unpack_from(data, _HEADER.size)
    if count != rows * cols:
        raise ValueError(f"payload length {count} does not match dims {rows}x{cols}")
    offset = _HEADER.size + _PAYLOAD_HEADER.size
    expected = offset + 8 * count
    if len(data) != expected:
        raise ValueError(f"message has {len(data)} bytes, expected {expected}")
    payload = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(rows, cols)
    return Message(
        iteration=iteration,
        phase=Phase(phase),
        sender=sender,
        receiver=receiver,
        payload=payload.astype(float),
        version=version,
    )
