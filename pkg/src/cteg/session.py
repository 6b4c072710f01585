"""Compositional trace builders: local emission and opaque subagent delegation.

A session owns one growing trace. It emits typed events under nodes it
already knows, and it delegates work by spawning child sessions whose
finished (or failed) traces are grafted back atomically at the invocation
node. A child is born with a timestamp lower bound equal to its invocation
node's time, so the strict-increase rule of the grafting edge holds by
construction rather than by late failure; the check still runs defensively
at graft time.

Issued timestamps follow max(wall clock, last issued + 1, lower bound + 1),
additionally clamped strictly above the parent node's time when emitting.
This keeps every causal edge strictly increasing under frozen or colliding
clocks while still allowing sibling nodes of different sessions to share a
timestamp.

Each session is single-writer: all public operations serialize on an
internal lock, grafts are atomic with respect to snapshots, and distinct
sessions may progress concurrently. Nothing is ever removed or rewritten;
the trace and its recorded history are append-only.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from threading import RLock
from typing import Callable, Sequence

from .core import (
    ActionId,
    Cteg,
    CtegError,
    EventType,
    Timestamp,
    TypedTemporalGraph,
    UnknownNodeError,
    _OpaqueId,
    graft_cteg,
)
from .dynamics import (
    Emission,
    EmptyEmissionError,
    ExecutionSequence,
    Invocation,
    StepLabel,
    apply_emission,
    e0_normalize,
)

__all__ = [
    "InactiveSessionError",
    "ConsumedHandleError",
    "SessionMismatchError",
    "SessionId",
    "SessionStatus",
    "FailurePolicy",
    "SubagentHandle",
    "Session",
    "begin_session",
]


class InactiveSessionError(CtegError):
    """The session is completed or failed and accepts no further mutation."""


class ConsumedHandleError(CtegError):
    """A subagent handle admits exactly one completion or failure."""


class SessionMismatchError(CtegError):
    """Handle, parent session and child session do not belong together."""


class SessionId(_OpaqueId):
    """Globally unique session identity."""


class SessionStatus(Enum):
    ACTIVE = "active"
    COMPLETED = "completed"
    FAILED = "failed"


class FailurePolicy(Enum):
    """What a parent does with the partial trace of a failed child."""

    DISCARD = "discard"
    GRAFT_PARTIAL = "graft_partial"


@dataclass
class SubagentHandle:
    """Single-use ticket tying an invocation node to a child session."""

    parent_session: SessionId
    parent_node: ActionId
    child_session: SessionId
    _consumed: bool = field(default=False, repr=False)

    @property
    def consumed(self) -> bool:
        return self._consumed


def _wall_clock_micros() -> int:
    return time.time_ns() // 1000


class _MonotoneClock:
    """Issues strictly increasing timestamps above an optional lower bound."""

    __slots__ = ("_wall", "_lower_bound", "_last")

    def __init__(self, wall: Callable[[], int], lower_bound: Timestamp | None) -> None:
        self._wall = wall
        self._lower_bound = lower_bound
        self._last: int | None = None

    def issue(self, floor: Timestamp | None = None) -> Timestamp:
        candidate = self._wall()
        if self._last is not None:
            candidate = max(candidate, self._last + 1)
        if self._lower_bound is not None:
            candidate = max(candidate, self._lower_bound.micros + 1)
        if floor is not None:
            candidate = max(candidate, floor.micros + 1)
        self._last = candidate
        return Timestamp(candidate)


class Session:
    """A single agent's execution trace under construction.

    Create sessions through `begin_session` (or `invoke_subagent` for
    children). The current trace is always a valid CTEG; `snapshot` returns
    it as an immutable value and `history` returns the full labelled chain
    of states reached so far.
    """

    def __init__(
        self,
        root_type: EventType,
        payload: bytes = b"",
        lower_bound: Timestamp | None = None,
        *,
        wall_clock: Callable[[], int] | None = None,
        id_factory: Callable[[], bytes] | None = None,
    ) -> None:
        self._wall = wall_clock if wall_clock is not None else _wall_clock_micros
        self._id_factory = id_factory
        self._clock = _MonotoneClock(self._wall, lower_bound)
        self._lock = RLock()
        self._id = SessionId.fresh(id_factory)
        self._status = SessionStatus.ACTIVE

        root = ActionId.fresh(id_factory)
        root_ts = self._clock.issue()
        g = TypedTemporalGraph.trivial(root, root_ts, root_type, payload=payload)
        self._trace = Cteg(g, root)
        self._graphs: list[TypedTemporalGraph] = [g]
        self._steps: list[StepLabel] = []

    @property
    def id(self) -> SessionId:
        return self._id

    @property
    def status(self) -> SessionStatus:
        return self._status

    @property
    def root(self) -> ActionId:
        return self._trace.root

    def snapshot(self) -> Cteg:
        """The current trace as an immutable, always-valid value."""
        with self._lock:
            return self._trace

    def history(self) -> ExecutionSequence:
        """Every state the trace has passed through, with step labels."""
        with self._lock:
            return ExecutionSequence(tuple(self._graphs), tuple(self._steps))

    def emit(self, parent: ActionId, events: Sequence[tuple[EventType, bytes]]) -> list[ActionId]:
        """Add one batch of typed events as children of `parent`.

        Timestamps are issued by the session clock and strictly exceed the
        parent node's time. Returns the new node ids in argument order.
        """
        with self._lock:
            self._require_active()
            if parent not in self._trace.graph.nodes:
                raise UnknownNodeError(f"emission parent {parent.hex} is not in the trace")
            if not events:
                raise EmptyEmissionError("emit requires at least one event")
            parent_ts = self._trace.graph.t[parent]
            ids: list[ActionId] = []
            new: dict[ActionId, tuple[Timestamp, EventType]] = {}
            payloads: dict[ActionId, bytes] = {}
            for event_type, payload in events:
                node = ActionId.fresh(self._id_factory)
                new[node] = (self._clock.issue(floor=parent_ts), event_type)
                payloads[node] = payload
                ids.append(node)
            g2 = apply_emission(self._trace.graph, parent, new, payloads=payloads)
            self._advance(Cteg(g2, self._trace.root), Emission(parent, frozenset(ids)))
            return ids

    def invoke_subagent(
        self,
        parent: ActionId,
        root_type: EventType,
        payload: bytes = b"",
    ) -> tuple[SubagentHandle, "Session"]:
        """Spawn a child session to be grafted later at `parent`.

        The child's timestamp lower bound is the invocation node's time, so
        the composition criterion at graft time holds by construction. The
        parent trace is untouched until completion or failure.
        """
        with self._lock:
            self._require_active()
            if parent not in self._trace.graph.nodes:
                raise UnknownNodeError(f"invocation parent {parent.hex} is not in the trace")
            child = Session(
                root_type,
                payload=payload,
                lower_bound=self._trace.graph.t[parent],
                wall_clock=self._wall,
                id_factory=self._id_factory,
            )
            handle = SubagentHandle(self._id, parent, child.id)
            return handle, child

    def complete_subagent(self, handle: SubagentHandle, child: "Session") -> None:
        """Graft the child's finished trace atomically at the handle's node."""
        self._finish_subagent(handle, child, graft_trace=True, final_status=SessionStatus.COMPLETED)

    def fail_subagent(self, handle: SubagentHandle, child: "Session", policy: FailurePolicy) -> None:
        """Settle a failed child: discard its trace or graft the valid partial one."""
        self._finish_subagent(
            handle,
            child,
            graft_trace=(policy is FailurePolicy.GRAFT_PARTIAL),
            final_status=SessionStatus.FAILED,
        )

    def _finish_subagent(
        self,
        handle: SubagentHandle,
        child: "Session",
        *,
        graft_trace: bool,
        final_status: SessionStatus,
    ) -> None:
        with self._lock:
            self._require_active()
            if handle.parent_session != self._id:
                raise SessionMismatchError("handle was issued by a different session")
            if handle.consumed:
                raise ConsumedHandleError("handle has already been completed or failed")
            if handle.child_session != child.id:
                raise SessionMismatchError("child session does not match the handle")
            with child._lock:
                if child._status is not SessionStatus.ACTIVE:
                    raise InactiveSessionError(f"child session is already {child._status.value}")
                child_trace = child._trace
                if graft_trace:
                    merged = graft_cteg(self._trace, handle.parent_node, child_trace)
                    label = Invocation(
                        root=handle.parent_node,
                        subtrace=e0_normalize(child_trace),
                        attach=child_trace.root,
                    )
                    self._advance(merged, label)
                child._status = final_status
            handle._consumed = True

    def _advance(self, trace: Cteg, label: StepLabel) -> None:
        self._trace = trace
        self._graphs.append(trace.graph)
        self._steps.append(label)

    def _require_active(self) -> None:
        if self._status is not SessionStatus.ACTIVE:
            raise InactiveSessionError(f"session is {self._status.value}")

    def __repr__(self) -> str:
        return f"Session(id={self._id.hex[:8]}, status={self._status.value}, nodes={len(self._trace.graph.nodes)})"


def begin_session(
    root_type: EventType,
    payload: bytes = b"",
    lower_bound: Timestamp | None = None,
    *,
    wall_clock: Callable[[], int] | None = None,
    id_factory: Callable[[], bytes] | None = None,
) -> Session:
    """Start a fresh session whose trace is a single typed root node.

    The root timestamp strictly exceeds `lower_bound` when one is given.
    `wall_clock` (microseconds) and `id_factory` (16-byte draws) exist for
    deterministic construction in simulations and tests.
    """
    return Session(
        root_type,
        payload=payload,
        lower_bound=lower_bound,
        wall_clock=wall_clock,
        id_factory=id_factory,
    )
