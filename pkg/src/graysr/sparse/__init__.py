from graysr.sparse.coder import kkt_residual, sparse_code, sparse_code_batch
from graysr.sparse.dictionary import (
    DictionaryPair,
    PatchDataset,
    SparseParams,
    load_dictionary,
    sample_patch_pairs,
    save_dictionary,
    train_dictionaries,
)
from graysr.sparse.resolve import backproject, super_resolve_sparse

__all__ = [
    "DictionaryPair",
    "PatchDataset",
    "SparseParams",
    "backproject",
    "kkt_residual",
    "load_dictionary",
    "sample_patch_pairs",
    "save_dictionary",
    "sparse_code",
    "sparse_code_batch",
    "super_resolve_sparse",
    "train_dictionaries",
]
