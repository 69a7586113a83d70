from .blocks import (
    BlockId,
    BlockKind,
    BlockStore,
    DeterminismError,
    MissingBlockError,
    decode_f64,
    encode_f64,
)
from .dataset import (
    DatasetEngine,
    DistributedDataset,
    PartitionId,
    ensure_transform,
    fingerprint,
    register_transform,
)

__all__ = [
    "BlockId",
    "BlockKind",
    "BlockStore",
    "DatasetEngine",
    "DeterminismError",
    "DistributedDataset",
    "MissingBlockError",
    "PartitionId",
    "decode_f64",
    "encode_f64",
    "ensure_transform",
    "fingerprint",
    "register_transform",
]
