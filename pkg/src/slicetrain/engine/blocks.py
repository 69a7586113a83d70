"""Write-once in-memory block store.

Gradient and weight slices travel between jobs as immutable byte blobs
keyed by structured ids.  Blobs are little-endian float64 arrays with an
8-byte length header, which keeps cross-checks in tests bit-exact.  A
re-put of identical bytes is an idempotent no-op so that re-executed
tasks can safely repeat their writes; a re-put of different bytes means a
task was not deterministic and aborts the run.
"""

from __future__ import annotations

import enum
import struct
import threading
from dataclasses import dataclass

import numpy as np


class BlockKind(enum.Enum):
    GRADIENT_SLICE = "gradient"
    WEIGHT_SLICE = "weight"


@dataclass(frozen=True)
class BlockId:
    """Globally unique key of one stored blob.

    ``source_task`` identifies the producing task for gradient slices; a
    weight slice is produced by the sync task that owns the slice, so its
    source_task always equals slice_index.
    """

    kind: BlockKind
    iteration: int
    source_task: int
    slice_index: int

    def __post_init__(self) -> None:
        if self.iteration < 0:
            raise ValueError("iteration must be non-negative")
        if self.kind is BlockKind.WEIGHT_SLICE and self.source_task != self.slice_index:
            raise ValueError("weight slice blocks are owned by their sync task")

    @classmethod
    def gradient_slice(cls, iteration: int, source_task: int, slice_index: int) -> "BlockId":
        return cls(BlockKind.GRADIENT_SLICE, iteration, source_task, slice_index)

    @classmethod
    def weight_slice(cls, iteration: int, slice_index: int) -> "BlockId":
        return cls(BlockKind.WEIGHT_SLICE, iteration, slice_index, slice_index)

    @property
    def phase(self) -> str:
        """Transfer phase this block belongs to in network accounting."""
        return "shuffle" if self.kind is BlockKind.GRADIENT_SLICE else "broadcast"

    def label(self) -> str:
        return f"{self.kind.value}:{self.iteration}:{self.source_task}:{self.slice_index}"


_HEADER = struct.Struct("<Q")

#: bytes of storage metadata per blob; never counted as transfer volume
HEADER_BYTES = _HEADER.size


def payload_size(blob: bytes) -> int:
    """Data bytes a transfer of this blob moves (header excluded)."""
    if len(blob) < HEADER_BYTES:
        raise ValueError("blob shorter than its length header")
    return len(blob) - HEADER_BYTES


def encode_f64(values: np.ndarray) -> bytes:
    """Serialize a 1-D float64 vector as header + little-endian payload."""
    arr = np.ascontiguousarray(values, dtype="<f8")
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {arr.shape}")
    return _HEADER.pack(arr.size) + arr.tobytes()


def decode_f64(blob: bytes) -> np.ndarray:
    if len(blob) < _HEADER.size:
        raise ValueError("blob shorter than its length header")
    (count,) = _HEADER.unpack_from(blob)
    if len(blob) != _HEADER.size + 8 * count:
        raise ValueError(f"blob length {len(blob)} does not match header count {count}")
    return np.frombuffer(blob, dtype="<f8", offset=_HEADER.size).copy()


class DeterminismError(RuntimeError):
    """A re-put supplied different bytes for an existing block id."""


class MissingBlockError(KeyError):
    """A block expected to exist after a job barrier is absent."""


class BlockStore:
    """Shared map from BlockId to immutable bytes with write-once semantics.

    Reads by a node other than the producer are accounted as transfers in
    the attached NetworkStats.  The write-once check is atomic per id;
    distinct ids may be written concurrently.
    """

    def __init__(self, network=None):
        self._entries: dict[BlockId, bytes] = {}
        self._residency: dict[BlockId, int] = {}
        self._lock = threading.Lock()
        self._network = network

    def put(self, block_id: BlockId, blob: bytes, producer_node: int) -> None:
        blob = bytes(blob)
        with self._lock:
            existing = self._entries.get(block_id)
            if existing is not None:
                if existing != blob:
                    raise DeterminismError(
                        f"conflicting re-put of block {block_id.label()}: "
                        "a re-executed task produced different bytes"
                    )
                return
            self._entries[block_id] = blob
            self._residency[block_id] = producer_node

    def get(self, block_id: BlockId, consumer_node: int) -> bytes:
        """Fetch a blob for a task on ``consumer_node``, recording the transfer.

        Remote reads record the blob's payload bytes producer -> consumer;
        reading a locally resident block records nothing.
        """
        blob, producer = self._lookup(block_id)
        if producer != consumer_node and self._network is not None:
            self._network.record_transfer(
                producer, consumer_node, payload_size(blob), block_id.phase, block_id.iteration
            )
        return blob

    def peek(self, block_id: BlockId) -> bytes:
        """Driver/test read without transfer accounting."""
        blob, _ = self._lookup(block_id)
        return blob

    def _lookup(self, block_id: BlockId) -> tuple[bytes, int]:
        with self._lock:
            blob = self._entries.get(block_id)
            if blob is None:
                raise MissingBlockError(
                    f"block {block_id.label()} absent after barrier: driver sequencing bug"
                )
            return blob, self._residency[block_id]

    def producer_of(self, block_id: BlockId) -> int:
        with self._lock:
            return self._residency[block_id]

    def __contains__(self, block_id: BlockId) -> bool:
        with self._lock:
            return block_id in self._entries

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def evict_before(self, min_iteration: int) -> int:
        """Drop blocks of iterations older than ``min_iteration``.

        The driver calls this with i-1 after iteration i completes, keeping
        exactly the last two iterations' blocks alive.
        """
        with self._lock:
            stale = [bid for bid in self._entries if bid.iteration < min_iteration]
            for bid in stale:
                del self._entries[bid]
                del self._residency[bid]
            return len(stale)

    def snapshot(self) -> dict[BlockId, bytes]:
        """Copy of the current contents, for bitwise run comparisons."""
        with self._lock:
            return dict(self._entries)
