"""Causal-temporal event graphs.

Tooling for fully resolved recursive execution traces: an immutable graph
model with validation and composition, step semantics with a bounded
fixed-point oracle, compositional session builders, append-only persistence
with a canonical trace format, and Merkle-tree receipts.
"""

from .commitment import DOMAIN_TAG, Digest, merkle_root, node_digest, verify_commitment
from .core import (
    ActionId,
    CompatibilityError,
    Cteg,
    CtegError,
    Diagnostics,
    DisjointnessError,
    EventType,
    Timestamp,
    TypedTemporalGraph,
    UnknownNodeError,
    ValidationFailedError,
    Violation,
    causal_path,
    graft,
    graft_cteg,
    height,
    temporal_projection,
    validate_causal_graph,
    validate_cteg,
)
from .dynamics import (
    AttachPointError,
    BudgetExceededError,
    Emission,
    EmptyEmissionError,
    ExecutionSequence,
    Invocation,
    StepLabel,
    UniverseBounds,
    apply_emission,
    apply_invocation,
    canonical_listing,
    e0_normalize,
    hierarchy,
    is_emission_step,
    is_invocation_step,
    is_member_e_infinity,
    phi,
    replicate_as_e0_invocation,
)
from .persistence import (
    DEFAULT_PAYLOAD_CAP,
    CorruptStoreError,
    FileStore,
    MemoryStore,
    NodeRecord,
    Store,
    StoreError,
    TraceFormatError,
    append_trace,
    export_trace,
    graph_text,
    import_trace,
    parse_trace,
)
from .session import (
    ConsumedHandleError,
    FailurePolicy,
    InactiveSessionError,
    Session,
    SessionId,
    SessionMismatchError,
    SessionStatus,
    SubagentHandle,
    begin_session,
)

__all__ = [
    # core
    "ActionId",
    "Timestamp",
    "EventType",
    "TypedTemporalGraph",
    "Cteg",
    "Violation",
    "Diagnostics",
    "CtegError",
    "UnknownNodeError",
    "DisjointnessError",
    "CompatibilityError",
    "ValidationFailedError",
    "validate_causal_graph",
    "validate_cteg",
    "causal_path",
    "graft",
    "graft_cteg",
    "temporal_projection",
    "height",
    # dynamics
    "Emission",
    "Invocation",
    "StepLabel",
    "ExecutionSequence",
    "UniverseBounds",
    "EmptyEmissionError",
    "AttachPointError",
    "BudgetExceededError",
    "apply_emission",
    "apply_invocation",
    "is_emission_step",
    "is_invocation_step",
    "e0_normalize",
    "replicate_as_e0_invocation",
    "is_member_e_infinity",
    "phi",
    "hierarchy",
    "canonical_listing",
    # session
    "Session",
    "SessionId",
    "SessionStatus",
    "SubagentHandle",
    "FailurePolicy",
    "begin_session",
    "InactiveSessionError",
    "ConsumedHandleError",
    "SessionMismatchError",
    # persistence
    "NodeRecord",
    "Store",
    "MemoryStore",
    "FileStore",
    "StoreError",
    "CorruptStoreError",
    "TraceFormatError",
    "DEFAULT_PAYLOAD_CAP",
    "append_trace",
    "export_trace",
    "import_trace",
    "parse_trace",
    "graph_text",
    # commitment
    "Digest",
    "DOMAIN_TAG",
    "node_digest",
    "merkle_root",
    "verify_commitment",
]
