"""Wire protocol: 16-byte framed messages and payload codecs.

Frame layout (little-endian):

    offset size field
    0      2    magic 0x46 0x53 ("FS")
    2      1    version (currently 1)
    3      1    session id
    4      2    epoch
    6      4    batch
    10     1    phase tag
    11     1    payload kind
    12     4    payload byte length

followed by exactly `length` payload bytes.  Ring tensors are serialized
as: ndim u8, elem_bytes u8, ndim x u32 dims, then row-major elements of
elem_bytes little-endian bytes each.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import FrameCorrupt

MAGIC = b"FS"
VERSION = 1
HEADER = struct.Struct("<2sBBHIBBI")
HEADER_BYTES = HEADER.size
assert HEADER_BYTES == 16


class Phase(IntEnum):
    SYNC = 0
    PREPROCESSING = 1
    TRAIN_FORWARD = 2
    TRAIN_BACKWARD = 3
    TEST = 4


PHASE_NAMES = {
    Phase.SYNC: "sync",
    Phase.PREPROCESSING: "preprocessing",
    Phase.TRAIN_FORWARD: "train-forward",
    Phase.TRAIN_BACKWARD: "train-backward",
    Phase.TEST: "test",
}


class Kind(IntEnum):
    HELLO = 0
    SYNC_REQ = 1
    SYNC_ACK = 2
    WEIGHT_SHARE = 3
    MASK = 4
    MASK_SHARE = 5
    KEYS = 6
    TRIPLES = 7
    CREDIT = 8
    X_PUB = 9
    CUT_ACT = 10
    GRAD_SHARE = 11
    CUT_GRAD = 12
    OPENING = 13
    LABELS = 14
    PREDICTION = 15
    DONE = 16


@dataclass
class ProtocolMessage:
    session: int
    epoch: int
    batch: int
    phase: int
    kind: int
    payload: bytes

    def pack(self) -> bytes:
        return (
            HEADER.pack(
                MAGIC, VERSION, self.session, self.epoch, self.batch,
                self.phase, self.kind, len(self.payload),
            )
            + self.payload
        )


def parse_header(raw: bytes) -> tuple[int, int, int, int, int, int]:
    """Validate and unpack a 16-byte header.

    Returns (session, epoch, batch, phase, kind, payload_length).
    """
    if len(raw) != HEADER_BYTES:
        raise FrameCorrupt(f"short header: {len(raw)} bytes")
    magic, version, session, epoch, batch, phase, kind, length = HEADER.unpack(raw)
    if magic != MAGIC:
        raise FrameCorrupt(f"bad magic {magic!r}")
    if version != VERSION:
        raise FrameCorrupt(f"unsupported version {version}")
    return session, epoch, batch, phase, kind, length


def encode_tensor(arr: np.ndarray, elem_bytes: int) -> bytes:
    arr = np.ascontiguousarray(arr, dtype=np.uint64)
    head = struct.pack("<BB", arr.ndim, elem_bytes)
    head += struct.pack(f"<{arr.ndim}I", *arr.shape)
    data = arr.reshape(-1).astype("<u8").view(np.uint8).reshape(-1, 8)[:, :elem_bytes]
    return head + np.ascontiguousarray(data).tobytes()


def decode_tensor(buf: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    """Decode one tensor; returns (uint64 array, next offset)."""
    ndim, elem_bytes = struct.unpack_from("<BB", buf, offset)
    offset += 2
    shape = struct.unpack_from(f"<{ndim}I", buf, offset)
    offset += 4 * ndim
    count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
    nbytes = count * elem_bytes
    raw = np.frombuffer(buf, dtype=np.uint8, count=nbytes, offset=offset)
    offset += nbytes
    padded = np.zeros((count, 8), dtype=np.uint8)
    padded[:, :elem_bytes] = raw.reshape(count, elem_bytes)
    arr = padded.view("<u8").reshape(shape).astype(np.uint64)
    return arr, offset


def tensor_wire_bytes(shape, elem_bytes: int) -> int:
    """Payload bytes encode_tensor will produce for this shape."""
    count = 1
    for d in shape:
        count *= d
    return 2 + 4 * len(shape) + count * elem_bytes
