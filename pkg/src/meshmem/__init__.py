"""Mesh memory protocol library: seven-field cognitive memory blocks, a
per-field cosine-drift admission gate, an inter-agent lineage DAG with echo
detection, a write-time-filtered remix store, a peer daemon, and a
deterministic multi-node simulator."""

from .cat7 import (
    CMB,
    Cat7Header,
    FieldName,
    FieldValue,
    Lineage,
    canonical_bytes,
    derive_key,
    embed_text,
    make_observation,
)
from .entry import Lifecycle, StoredEntry, Tier
from .lineage import LineageIndex
from .peer import MeshPeer, PeerConfig
from .store import MeshMem, ReceiveOutcome
from .svaf import (
    AnchorCandidate,
    Decision,
    RoleProfile,
    SvafResult,
    Thresholds,
    classify,
    evaluate,
    field_drift,
    fuse_anchor,
)
from .wire import WireFrame, decode_entry, decode_frame, encode_entry, encode_frame

__all__ = [
    "CMB",
    "Cat7Header",
    "FieldName",
    "FieldValue",
    "Lineage",
    "canonical_bytes",
    "derive_key",
    "embed_text",
    "make_observation",
    "Lifecycle",
    "StoredEntry",
    "Tier",
    "LineageIndex",
    "MeshPeer",
    "PeerConfig",
    "MeshMem",
    "ReceiveOutcome",
    "AnchorCandidate",
    "Decision",
    "RoleProfile",
    "SvafResult",
    "Thresholds",
    "classify",
    "evaluate",
    "field_drift",
    "fuse_anchor",
    "WireFrame",
    "decode_entry",
    "decode_frame",
    "encode_entry",
    "encode_frame",
]

__version__ = "0.1.0"
