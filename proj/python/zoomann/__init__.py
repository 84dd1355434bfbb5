"""Two-stage vector search: compact in-memory preview, on-disk exact rerank."""

from ._core import (
    ArgumentError,
    FormatError,
    Index,
    StorageError,
    exact_topk,
    generate_synthetic,
    load_dataset,
    memory_cost,
    oracle,
    recall,
    save_dataset,
    vq,
)

__version__ = "0.1.0"

__all__ = [
    "ArgumentError",
    "FormatError",
    "Index",
    "StorageError",
    "exact_topk",
    "generate_synthetic",
    "load_dataset",
    "memory_cost",
    "oracle",
    "recall",
    "save_dataset",
    "vq",
]
