from .core import (
    ABSENT,
    INDEXED_CLEAN,
    INDEXED_CORRUPTED,
    CorruptionProfile,
    IndexedDocument,
    MockIndex,
    TruthEntry,
    build_index,
    ledger_predicts_retrieval,
    read_ledger,
    render_evaluate,
    search_index,
    write_ledger,
)

__all__ = [
    "ABSENT",
    "INDEXED_CLEAN",
    "INDEXED_CORRUPTED",
    "CorruptionProfile",
    "IndexedDocument",
    "MockIndex",
    "TruthEntry",
    "build_index",
    "ledger_predicts_retrieval",
    "read_ledger",
    "render_evaluate",
    "search_index",
    "write_ledger",
]
