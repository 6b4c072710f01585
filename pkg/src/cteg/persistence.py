"""Append-only relational persistence and the canonical trace text format.

A trace persists as rows of a node table: node id, session id, optional
parent pointer, timestamp, event type and an opaque payload. The store
interface is append-only by design; rows are validated on the way in
(registered session, parent already present, strictly increasing timestamp,
single root) so that every per-session reconstruction is a valid CTEG at
all times, including after a crash that truncated the log.

Two stores implement the interface: an in-memory one and a single-file
append log. The file layout is a `CTEGSTORE1` magic header followed by
length-prefixed little-endian binary records; a torn trailing record is
ignored on open, while any complete but inconsistent record is reported as
corruption.

The text format serializes one trace bit-exactly: a `cteg/1 <session>`
header line, then one tab-separated row per node in temporal projection
order, with base64 payloads. Export is canonical, so byte equality of two
exports coincides with equality of the traces they encode (given equal
session ids).
"""

from __future__ import annotations

import base64
import struct
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from threading import RLock

from .core import (
    ActionId,
    Cteg,
    CtegError,
    EventType,
    Timestamp,
    TypedTemporalGraph,
    temporal_projection,
)
from .session import SessionId

__all__ = [
    "StoreError",
    "UnknownSessionError",
    "DuplicateSessionError",
    "UnknownParentError",
    "DuplicateNodeError",
    "DuplicateRootError",
    "TimestampOrderError",
    "PayloadTooLargeError",
    "EmptySessionError",
    "CorruptStoreError",
    "TraceFormatError",
    "DEFAULT_PAYLOAD_CAP",
    "NodeRecord",
    "Store",
    "MemoryStore",
    "FileStore",
    "append_trace",
    "export_trace",
    "parse_trace",
    "import_trace",
    "graph_text",
]


class StoreError(CtegError):
    """Base class for store-level failures."""


class UnknownSessionError(StoreError):
    """The session id is not registered in the store."""


class DuplicateSessionError(StoreError):
    """The session id is already registered."""


class UnknownParentError(StoreError):
    """The row's parent has not been appended for this session yet."""


class DuplicateNodeError(StoreError):
    """The (session, node) pair already exists in the store."""


class DuplicateRootError(StoreError):
    """A second parentless row was appended for the same session."""


class TimestampOrderError(StoreError):
    """A row's timestamp does not strictly exceed its parent's."""


class PayloadTooLargeError(StoreError):
    """The row's payload exceeds the store's configured cap."""


class EmptySessionError(StoreError):
    """The session is registered but has no rows to reconstruct from."""


class CorruptStoreError(StoreError):
    """The store's backing file is structurally or semantically inconsistent."""


class TraceFormatError(CtegError):
    """The trace text cannot be parsed into a node table."""


DEFAULT_PAYLOAD_CAP = 1 << 20  # one MiB per payload


@dataclass(frozen=True)
class NodeRecord:
    """One row of the append-only node table."""

    node_id: ActionId
    session_id: SessionId
    parent_id: ActionId | None
    timestamp: Timestamp
    event_type: EventType
    payload: bytes = b""


class _SessionRows:
    """Per-session append state used for validation and reconstruction."""

    __slots__ = ("records", "by_node", "root")

    def __init__(self) -> None:
        self.records: list[NodeRecord] = []
        self.by_node: dict[ActionId, NodeRecord] = {}
        self.root: ActionId | None = None


class Store(ABC):
    """Append-only session and node storage.

    The interface deliberately offers no update or delete: the only ways to
    change a store are registering a session and appending a node row.
    """

    @abstractmethod
    def register_session(self, session_id: SessionId | None = None) -> SessionId:
        """Record a session id (minting a fresh one when none is given)."""

    @abstractmethod
    def append_node(self, rec: NodeRecord) -> None:
        """Validate and durably append one node row."""

    @abstractmethod
    def load_session(self, session_id: SessionId) -> Cteg:
        """Reconstruct the session's trace by pointer resolution."""

    @abstractmethod
    def session_ids(self) -> tuple[SessionId, ...]:
        """All registered session ids, in registration order."""


class MemoryStore(Store):
    """In-memory store; the validation reference for the file-backed one."""

    def __init__(self, payload_cap: int = DEFAULT_PAYLOAD_CAP) -> None:
        self._payload_cap = payload_cap
        self._sessions: dict[SessionId, _SessionRows] = {}
        self._order: list[SessionId] = []
        self._lock = RLock()

    def register_session(self, session_id: SessionId | None = None) -> SessionId:
        with self._lock:
            sid = session_id if session_id is not None else SessionId.fresh()
            if sid in self._sessions:
                raise DuplicateSessionError(f"session {sid.hex} is already registered")
            self._sessions[sid] = _SessionRows()
            self._order.append(sid)
            return sid

    def append_node(self, rec: NodeRecord) -> None:
        with self._lock:
            self._validate(rec)
            self._admit(rec)

    def _validate(self, rec: NodeRecord) -> None:
        rows = self._sessions.get(rec.session_id)
        if rows is None:
            raise UnknownSessionError(f"session {rec.session_id.hex} is not registered")
        if len(rec.payload) > self._payload_cap:
            raise PayloadTooLargeError(
                f"payload of {len(rec.payload)} bytes exceeds cap of {self._payload_cap}"
            )
        if rec.node_id in rows.by_node:
            raise DuplicateNodeError(f"node {rec.node_id.hex} already appended for this session")
        if rec.parent_id is None:
            if rows.root is not None:
                raise DuplicateRootError("session already has a parentless root row")
        else:
            parent = rows.by_node.get(rec.parent_id)
            if parent is None:
                raise UnknownParentError(
                    f"parent {rec.parent_id.hex} has not been appended for this session"
                )
            if not parent.timestamp < rec.timestamp:
                raise TimestampOrderError(
                    f"node {rec.node_id.hex} t={rec.timestamp.micros} does not strictly exceed "
                    f"parent t={parent.timestamp.micros}"
                )

    def _admit(self, rec: NodeRecord) -> None:
        rows = self._sessions[rec.session_id]
        rows.records.append(rec)
        rows.by_node[rec.node_id] = rec
        if rec.parent_id is None:
            rows.root = rec.node_id

    def load_session(self, session_id: SessionId) -> Cteg:
        with self._lock:
            rows = self._sessions.get(session_id)
            if rows is None:
                raise UnknownSessionError(f"session {session_id.hex} is not registered")
            if not rows.records:
                raise EmptySessionError(f"session {session_id.hex} has no rows")
            return _assemble(rows.records)

    def session_ids(self) -> tuple[SessionId, ...]:
        with self._lock:
            return tuple(self._order)


def _assemble(records: list[NodeRecord]) -> Cteg:
    nodes = {r.node_id for r in records}
    edges = {(r.parent_id, r.node_id) for r in records if r.parent_id is not None}
    roots = [r.node_id for r in records if r.parent_id is None]
    try:
        graph = TypedTemporalGraph(
            nodes=frozenset(nodes),
            edges=frozenset(edges),
            t={r.node_id: r.timestamp for r in records},
            tau={r.node_id: r.event_type for r in records},
            type_set=frozenset(r.event_type for r in records),
            payloads={r.node_id: r.payload for r in records},
        )
        return Cteg(graph, roots[0])
    except (ValueError, CtegError) as exc:
        raise CorruptStoreError(f"session rows do not reconstruct a valid trace: {exc}") from exc


# ---------------------------------------------------------------------------
# File-backed store


_MAGIC = b"CTEGSTORE1"
_KIND_SESSION = 1
_KIND_NODE = 2


def _encode_session_record(sid: SessionId) -> bytes:
    body = bytes([_KIND_SESSION]) + sid.value
    return struct.pack("<I", len(body)) + body


def _encode_node_record(rec: NodeRecord) -> bytes:
    type_bytes = rec.event_type.name.encode("utf-8")
    parts = [
        bytes([_KIND_NODE]),
        rec.node_id.value,
        rec.session_id.value,
        b"\x01" + rec.parent_id.value if rec.parent_id is not None else b"\x00",
        struct.pack("<q", rec.timestamp.micros),
        struct.pack("<H", len(type_bytes)),
        type_bytes,
        struct.pack("<I", len(rec.payload)),
        rec.payload,
    ]
    body = b"".join(parts)
    return struct.pack("<I", len(body)) + body


def _decode_record(body: bytes) -> SessionId | NodeRecord:
    if not body:
        raise CorruptStoreError("empty record body")
    kind = body[0]
    view = memoryview(body)[1:]
    if kind == _KIND_SESSION:
        if len(view) != 16:
            raise CorruptStoreError("session record has the wrong length")
        return SessionId(bytes(view))
    if kind != _KIND_NODE:
        raise CorruptStoreError(f"unknown record kind {kind}")
    try:
        node_id = ActionId(bytes(view[:16]))
        session_id = SessionId(bytes(view[16:32]))
        offset = 32
        flag = view[offset]
        offset += 1
        parent: ActionId | None = None
        if flag == 1:
            parent = ActionId(bytes(view[offset : offset + 16]))
            offset += 16
        elif flag != 0:
            raise CorruptStoreError(f"bad parent flag {flag}")
        (micros,) = struct.unpack_from("<q", view, offset)
        offset += 8
        (type_len,) = struct.unpack_from("<H", view, offset)
        offset += 2
        type_name = bytes(view[offset : offset + type_len]).decode("utf-8")
        if len(type_name.encode("utf-8")) != type_len:
            raise CorruptStoreError("truncated event type")
        offset += type_len
        (payload_len,) = struct.unpack_from("<I", view, offset)
        offset += 4
        payload = bytes(view[offset : offset + payload_len])
        if len(payload) != payload_len or offset + payload_len != len(view):
            raise CorruptStoreError("node record length mismatch")
        return NodeRecord(
            node_id=node_id,
            session_id=session_id,
            parent_id=parent,
            timestamp=Timestamp(micros),
            event_type=EventType(type_name),
            payload=payload,
        )
    except CorruptStoreError:
        raise
    except (ValueError, struct.error) as exc:
        raise CorruptStoreError(f"malformed node record: {exc}") from exc


def _iter_complete_records(data: bytes):
    """Yield decoded records; silently stop at a torn trailing record."""
    offset = 0
    total = len(data)
    while True:
        if offset + 4 > total:
            return
        (length,) = struct.unpack_from("<I", data, offset)
        if offset + 4 + length > total:
            return
        yield _decode_record(data[offset + 4 : offset + 4 + length])
        offset += 4 + length


class FileStore(Store):
    """Single-file append log behind the store interface.

    Opening an existing file replays and re-validates every complete record;
    semantic violations (which cannot be produced through this interface)
    therefore surface as corruption. Appends are flushed before returning.
    """

    def __init__(self, path: str | Path, payload_cap: int = DEFAULT_PAYLOAD_CAP) -> None:
        self._path = Path(path)
        self._mem = MemoryStore(payload_cap)
        self._lock = RLock()
        if self._path.exists():
            self._replay(self._path.read_bytes())
        else:
            self._path.write_bytes(_MAGIC)

    def _replay(self, data: bytes) -> None:
        if data[: len(_MAGIC)] != _MAGIC:
            raise CorruptStoreError("missing store magic header")
        try:
            for record in _iter_complete_records(data[len(_MAGIC) :]):
                if isinstance(record, SessionId):
                    self._mem.register_session(record)
                else:
                    self._mem.append_node(record)
        except StoreError as exc:
            raise CorruptStoreError(f"replay failed: {exc}") from exc

    def _append_bytes(self, blob: bytes) -> None:
        with open(self._path, "ab") as fh:
            fh.write(blob)
            fh.flush()

    def register_session(self, session_id: SessionId | None = None) -> SessionId:
        with self._lock:
            sid = self._mem.register_session(session_id)
            self._append_bytes(_encode_session_record(sid))
            return sid

    def append_node(self, rec: NodeRecord) -> None:
        with self._lock:
            self._mem.append_node(rec)
            self._append_bytes(_encode_node_record(rec))

    def load_session(self, session_id: SessionId) -> Cteg:
        with self._lock:
            return self._mem.load_session(session_id)

    def session_ids(self) -> tuple[SessionId, ...]:
        with self._lock:
            return self._mem.session_ids()


def append_trace(store: Store, session_id: SessionId, c: Cteg) -> None:
    """Write a whole trace as rows, parents before children.

    Temporal projection order guarantees every parent row precedes its
    children, so the rows pass the store's incremental checks. The session
    must already be registered.
    """
    parents = c.parent_map()
    for n in temporal_projection(c):
        store.append_node(
            NodeRecord(
                node_id=n,
                session_id=session_id,
                parent_id=parents.get(n),
                timestamp=c.graph.t[n],
                event_type=c.graph.tau[n],
                payload=c.graph.payloads[n],
            )
        )


# ---------------------------------------------------------------------------
# Canonical trace text format


_HEADER_PREFIX = "cteg/1 "


def export_trace(c: Cteg, session: SessionId) -> bytes:
    """Canonical line-delimited text for one trace.

    Header `cteg/1 <session-hex>`, then one row per node in temporal
    projection order: node id, parent id (or `-`), timestamp in
    microseconds, event type, base64 payload, tab-separated. Exporting
    equal traces yields identical bytes.
    """
    parents = c.parent_map()
    lines = [_HEADER_PREFIX + session.hex]
    for n in temporal_projection(c):
        parent = parents.get(n)
        lines.append(
            "\t".join(
                (
                    n.hex,
                    parent.hex if parent is not None else "-",
                    str(c.graph.t[n].micros),
                    c.graph.tau[n].name,
                    base64.b64encode(c.graph.payloads[n]).decode("ascii"),
                )
            )
        )
    return ("\n".join(lines) + "\n").encode("utf-8")


def _parse_id(field: str, what: str) -> ActionId:
    try:
        if len(field) != 32:
            raise ValueError("expected 32 hex characters")
        return ActionId.from_hex(field)
    except ValueError as exc:
        raise TraceFormatError(f"bad {what} {field!r}: {exc}") from exc


def parse_trace(data: bytes) -> tuple[TypedTemporalGraph, ActionId, SessionId]:
    """Parse trace text into an unvalidated graph, root candidate and session id.

    Parsing covers everything needed to *represent* the rows as a typed
    temporal graph; whether that graph is a well-formed CTEG is the
    validators' concern. The root candidate is the first parentless row.
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise TraceFormatError(f"trace is not valid UTF-8: {exc}") from exc
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise TraceFormatError("empty trace file")
    header = lines[0]
    if not header.startswith(_HEADER_PREFIX):
        raise TraceFormatError(f"bad header line {header!r}")
    try:
        session = SessionId.from_hex(header[len(_HEADER_PREFIX) :])
    except ValueError as exc:
        raise TraceFormatError(f"bad session id in header: {exc}") from exc

    t: dict[ActionId, Timestamp] = {}
    tau: dict[ActionId, EventType] = {}
    payloads: dict[ActionId, bytes] = {}
    parent_of: dict[ActionId, ActionId | None] = {}
    order: list[ActionId] = []
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split("\t")
        if len(fields) != 5:
            raise TraceFormatError(f"line {lineno}: expected 5 tab-separated fields, got {len(fields)}")
        node_field, parent_field, ts_field, type_field, payload_field = fields
        node = _parse_id(node_field, f"node id on line {lineno}")
        if node in parent_of:
            raise TraceFormatError(f"line {lineno}: duplicate node id {node.hex}")
        parent = None if parent_field == "-" else _parse_id(parent_field, f"parent id on line {lineno}")
        try:
            ts = Timestamp(int(ts_field))
        except ValueError as exc:
            raise TraceFormatError(f"line {lineno}: bad timestamp: {exc}") from exc
        try:
            event_type = EventType(type_field)
        except ValueError as exc:
            raise TraceFormatError(f"line {lineno}: bad event type: {exc}") from exc
        try:
            payload = base64.b64decode(payload_field.encode("ascii"), validate=True)
        except (ValueError, UnicodeEncodeError) as exc:
            raise TraceFormatError(f"line {lineno}: bad base64 payload: {exc}") from exc
        parent_of[node] = parent
        t[node] = ts
        tau[node] = event_type
        payloads[node] = payload
        order.append(node)

    if not order:
        raise TraceFormatError("trace has a header but no node rows")
    roots = [n for n in order if parent_of[n] is None]
    if not roots:
        raise TraceFormatError("trace has no parentless root row")
    for n, p in parent_of.items():
        if p is not None and p not in parent_of:
            raise TraceFormatError(f"node {n.hex} references unknown parent {p.hex}")
    try:
        graph = TypedTemporalGraph(
            nodes=frozenset(order),
            edges=frozenset((p, n) for n, p in parent_of.items() if p is not None),
            t=t,
            tau=tau,
            type_set=frozenset(tau.values()),
            payloads=payloads,
        )
    except ValueError as exc:
        raise TraceFormatError(f"rows do not form a representable graph: {exc}") from exc
    return graph, roots[0], session


def import_trace(data: bytes) -> tuple[Cteg, SessionId]:
    """Parse and validate trace text; the exact inverse of `export_trace`.

    Raises TraceFormatError on malformed text and ValidationFailedError when
    the rows parse but do not form a valid CTEG.
    """
    graph, root, session = parse_trace(data)
    return Cteg(graph, root), session


def graph_text(g: TypedTemporalGraph) -> str:
    """Compact canonical one-line rendering of a typed temporal graph.

    Node entries are sorted by id as `id@micros:type` (with `=base64` only
    for non-empty payloads); edges are sorted pairs. Two graphs are equal
    exactly when their renderings are, making this suitable for golden
    listings.
    """
    node_parts = []
    for n in sorted(g.nodes):
        part = f"{n.hex}@{g.t[n].micros}:{g.tau[n].name}"
        if g.payloads[n]:
            part += "=" + base64.b64encode(g.payloads[n]).decode("ascii")
        node_parts.append(part)
    edge_parts = [f"{a.hex}>{b.hex}" for a, b in sorted(g.edges)]
    types_part = ",".join(ty.name for ty in sorted(g.type_set))
    return f"types{{{types_part}}};nodes{{{','.join(node_parts)}}};edges{{{','.join(edge_parts)}}}"
