"""Causal-temporal event graphs: immutable model and static operations.

A causal graph is a rooted arborescence: every non-root node has exactly one
incoming edge and is reachable from the distinguished root. A causal-temporal
event graph (CTEG) refines this with per-node timestamps that strictly
increase along every edge, a type drawn from a declared finite type set, and
an opaque byte payload per node.

This module holds the value types plus the static operations on them:
diagnostic validation, the unique root-to-node path, grafting and the
strict-timestamp compatibility rule for composing two CTEGs, temporal
projection, and longest-path height. Every value is immutable after
construction and all operations are pure, so everything here is safe to
share between threads without synchronization.
"""

from __future__ import annotations

import secrets
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

__all__ = [
    "CtegError",
    "UnknownNodeError",
    "DisjointnessError",
    "CompatibilityError",
    "ValidationFailedError",
    "ActionId",
    "Timestamp",
    "EventType",
    "Violation",
    "Diagnostics",
    "TypedTemporalGraph",
    "Cteg",
    "validate_causal_graph",
    "validate_cteg",
    "causal_path",
    "graft",
    "graft_cteg",
    "temporal_projection",
    "height",
]


class CtegError(Exception):
    """Base class for all errors raised by this package."""


class UnknownNodeError(CtegError):
    """A referenced node is not present in the graph it should belong to."""


class DisjointnessError(CtegError):
    """Two node sets required to be disjoint overlap."""


class CompatibilityError(CtegError):
    """A strict timestamp increase required along an edge does not hold."""


class ValidationFailedError(CtegError):
    """A graph that must be a valid CTEG is not; carries the diagnostics."""

    def __init__(self, diagnostics: "Diagnostics", context: str = "") -> None:
        self.diagnostics = diagnostics
        head = context or "graph is not a valid CTEG"
        details = "; ".join(str(v) for v in diagnostics.violations)
        super().__init__(f"{head}: {details}" if details else head)


@dataclass(frozen=True, order=True)
class _OpaqueId:
    """128-bit opaque identifier, totally ordered by its big-endian bytes."""

    value: bytes

    def __post_init__(self) -> None:
        if not isinstance(self.value, bytes) or len(self.value) != 16:
            raise ValueError(f"{type(self).__name__} requires exactly 16 bytes")

    @classmethod
    def fresh(cls, source: Callable[[], bytes] | None = None):
        """Draw a new random identifier, optionally from a custom byte source."""
        return cls(source() if source is not None else secrets.token_bytes(16))

    @classmethod
    def from_int(cls, n: int):
        return cls(n.to_bytes(16, "big"))

    @classmethod
    def from_hex(cls, s: str):
        return cls(bytes.fromhex(s))

    @property
    def hex(self) -> str:
        return self.value.hex()

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.value.hex()})"


class ActionId(_OpaqueId):
    """Globally unique node identity within and across graphs."""


_TS_MIN = -(2**63)
_TS_MAX = 2**63 - 1


@dataclass(frozen=True, order=True)
class Timestamp:
    """Microseconds since epoch as a signed 64-bit integer.

    Integer microseconds stand in for real-valued time so that the strict
    ordering required along causal edges is decidable by exact comparison.
    """

    micros: int

    def __post_init__(self) -> None:
        if not isinstance(self.micros, int) or isinstance(self.micros, bool):
            raise ValueError("Timestamp.micros must be an int")
        if not _TS_MIN <= self.micros <= _TS_MAX:
            raise ValueError("Timestamp.micros outside the signed 64-bit range")

    def __repr__(self) -> str:
        return f"Timestamp({self.micros})"


@dataclass(frozen=True, order=True)
class EventType:
    """Named event type drawn from a graph's declared finite type set.

    Names must be non-empty, at most 1024 characters, and free of control
    characters, so both serialization formats can always round-trip them.
    """

    name: str

    def __post_init__(self) -> None:
        if not isinstance(self.name, str) or not self.name:
            raise ValueError("EventType.name must be a non-empty string")
        if len(self.name) > 1024:
            raise ValueError("EventType.name must not exceed 1024 characters")
        if any(ord(ch) < 0x20 or ord(ch) == 0x7F for ch in self.name):
            raise ValueError("EventType.name must not contain control characters")

    def __repr__(self) -> str:
        return f"EventType({self.name!r})"


@dataclass(frozen=True)
class Violation:
    """One named defect found by a validator."""

    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


@dataclass(frozen=True)
class Diagnostics:
    """Outcome of a validation pass; ok exactly when no violations were found."""

    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def codes(self) -> tuple[str, ...]:
        return tuple(v.code for v in self.violations)


def _as_edge(e) -> tuple[ActionId, ActionId]:
    a, b = e
    return (a, b)


@dataclass(frozen=True, eq=False, repr=False)
class TypedTemporalGraph:
    """Directed graph whose nodes carry timestamps, types and payloads.

    Nothing is assumed about rootedness or the interplay of edges and
    timestamps; those properties are what the validators diagnose. The
    timestamp and type maps must be total on the node set; payloads default
    to empty bytes for nodes they do not mention. Equality and hashing are
    structural over all fields.
    """

    nodes: frozenset[ActionId]
    edges: frozenset[tuple[ActionId, ActionId]]
    t: Mapping[ActionId, Timestamp]
    tau: Mapping[ActionId, EventType]
    type_set: frozenset[EventType]
    payloads: Mapping[ActionId, bytes] | None = None

    def __post_init__(self) -> None:
        nodes = frozenset(self.nodes)
        edges = frozenset(_as_edge(e) for e in self.edges)
        t = dict(self.t)
        tau = dict(self.tau)
        type_set = frozenset(self.type_set)
        raw_payloads = {} if self.payloads is None else dict(self.payloads)

        if not nodes:
            raise ValueError("graph must have at least one node")
        for a, b in edges:
            if a not in nodes or b not in nodes:
                raise ValueError(f"edge ({a.hex}, {b.hex}) has an endpoint outside the node set")
            if a == b:
                raise ValueError(f"self-loop on node {a.hex}")
        if set(t) != nodes:
            raise ValueError("timestamp map must be total on the node set")
        if set(tau) != nodes:
            raise ValueError("type map must be total on the node set")
        for n, ty in tau.items():
            if ty not in type_set:
                raise ValueError(f"node {n.hex} has type {ty.name!r} outside the declared type set")
        if not set(raw_payloads) <= nodes:
            raise ValueError("payload map mentions unknown nodes")
        payloads = {n: raw_payloads.get(n, b"") for n in nodes}

        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "type_set", type_set)
        object.__setattr__(self, "payloads", payloads)

        key = (
            tuple(sorted(nodes)),
            tuple(sorted(edges)),
            tuple(sorted(t.items())),
            tuple(sorted(tau.items())),
            tuple(sorted(type_set)),
            tuple(sorted(payloads.items())),
        )
        object.__setattr__(self, "_key", key)
        object.__setattr__(self, "_hash", hash(key))
        object.__setattr__(self, "_children", None)
        object.__setattr__(self, "_indeg", None)

    @classmethod
    def trivial(
        cls,
        node: ActionId,
        ts: Timestamp,
        event_type: EventType,
        payload: bytes = b"",
        type_set: Iterable[EventType] | None = None,
    ) -> "TypedTemporalGraph":
        """Single-node graph with no edges."""
        return cls(
            nodes=frozenset({node}),
            edges=frozenset(),
            t={node: ts},
            tau={node: event_type},
            type_set=frozenset({event_type}) if type_set is None else frozenset(type_set),
            payloads={node: payload},
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TypedTemporalGraph):
            return NotImplemented
        return self._key == other._key  # type: ignore[attr-defined]

    def __hash__(self) -> int:
        return self._hash  # type: ignore[attr-defined]

    def __repr__(self) -> str:
        return f"TypedTemporalGraph(nodes={len(self.nodes)}, edges={len(self.edges)})"

    def children_map(self) -> dict[ActionId, tuple[ActionId, ...]]:
        """Successors of every node, sorted for deterministic iteration."""
        cached = self._children  # type: ignore[attr-defined]
        if cached is None:
            out: dict[ActionId, list[ActionId]] = {n: [] for n in self.nodes}
            for a, b in self.edges:
                out[a].append(b)
            cached = {n: tuple(sorted(cs)) for n, cs in out.items()}
            object.__setattr__(self, "_children", cached)
        return cached

    def in_degrees(self) -> dict[ActionId, int]:
        cached = self._indeg  # type: ignore[attr-defined]
        if cached is None:
            cached = {n: 0 for n in self.nodes}
            for _, b in self.edges:
                cached[b] += 1
            object.__setattr__(self, "_indeg", cached)
        return cached

    def in_degree(self, n: ActionId) -> int:
        return self.in_degrees()[n]

    def is_subgraph_of(self, other: "TypedTemporalGraph") -> bool:
        """True when `other` extends this graph and restricts back to it exactly.

        Extension preserves every node, edge, timestamp, type and payload of
        the smaller graph; only new material may appear in the larger one.
        """
        if not (self.nodes <= other.nodes and self.edges <= other.edges):
            return False
        return all(
            other.t[n] == self.t[n]
            and other.tau[n] == self.tau[n]
            and other.payloads[n] == self.payloads[n]
            for n in self.nodes
        )


@dataclass(frozen=True, eq=False, repr=False)
class Cteg:
    """A validated causal-temporal event graph together with its causal root.

    Construction runs full validation and raises ValidationFailedError on any
    defect, so holding a Cteg is proof of well-formedness.
    """

    graph: TypedTemporalGraph
    root: ActionId

    def __post_init__(self) -> None:
        diag = validate_cteg(self.graph, self.root)
        if not diag.ok:
            raise ValidationFailedError(diag)
        object.__setattr__(self, "_parents", None)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Cteg):
            return NotImplemented
        return self.root == other.root and self.graph == other.graph

    def __hash__(self) -> int:
        return hash((self.graph, self.root))

    def __repr__(self) -> str:
        return f"Cteg(root={self.root.hex[:8]}, nodes={len(self.graph.nodes)})"

    def parent_map(self) -> dict[ActionId, ActionId]:
        """Unique parent of every non-root node."""
        cached = self._parents  # type: ignore[attr-defined]
        if cached is None:
            cached = {b: a for a, b in self.graph.edges}
            object.__setattr__(self, "_parents", cached)
        return cached


def validate_causal_graph(g: TypedTemporalGraph, r: ActionId) -> Diagnostics:
    """Diagnose whether `g` is an arborescence rooted at `r`.

    Never raises: any graph is accepted for inspection and every violated
    condition is reported with the offending node or edge.
    """
    violations: list[Violation] = []
    if r not in g.nodes:
        return Diagnostics((Violation("unknown-root", f"root {r.hex} is not a node of the graph"),))

    indeg = g.in_degrees()
    for a, b in sorted(g.edges):
        if b == r:
            violations.append(Violation("edge-into-root", f"edge ({a.hex}, {b.hex}) points into the root"))
    for n in sorted(g.nodes):
        if n != r and indeg[n] != 1:
            violations.append(
                Violation("in-degree", f"node {n.hex} has in-degree {indeg[n]}, expected exactly 1")
            )

    children = g.children_map()
    reachable = {r}
    queue = deque([r])
    while queue:
        for c in children[queue.popleft()]:
            if c not in reachable:
                reachable.add(c)
                queue.append(c)
    for n in sorted(g.nodes - reachable):
        violations.append(Violation("unreachable", f"node {n.hex} is not reachable from the root"))

    # Kahn peel; whatever cannot be peeled sits on or behind a cycle.
    remaining = dict(indeg)
    queue = deque(n for n in g.nodes if remaining[n] == 0)
    seen = 0
    while queue:
        seen += 1
        for c in children[queue.popleft()]:
            remaining[c] -= 1
            if remaining[c] == 0:
                queue.append(c)
    if seen != len(g.nodes):
        stuck = sorted(n for n in g.nodes if remaining[n] > 0)
        names = ", ".join(n.hex for n in stuck)
        violations.append(Violation("cycle", f"cycle detected involving nodes {names}"))

    return Diagnostics(tuple(violations))


def validate_cteg(g: TypedTemporalGraph, r: ActionId) -> Diagnostics:
    """Diagnose `g` as a CTEG rooted at `r`.

    On top of the arborescence conditions, timestamps must strictly increase
    along every edge; checking edge-wise suffices by transitivity.
    """
    base = validate_causal_graph(g, r)
    violations = list(base.violations)
    if r in g.nodes:
        for a, b in sorted(g.edges):
            if not g.t[a] < g.t[b]:
                violations.append(
                    Violation(
                        "edge-timestamp",
                        f"edge ({a.hex}, {b.hex}) has t={g.t[a].micros} not strictly below t={g.t[b].micros}",
                    )
                )
    return Diagnostics(tuple(violations))


def causal_path(c: Cteg, n: ActionId) -> tuple[ActionId, ...]:
    """The unique directed path from the root to `n`, inclusive on both ends."""
    if n not in c.graph.nodes:
        raise UnknownNodeError(f"node {n.hex} is not in the graph")
    parents = c.parent_map()
    path = [n]
    while path[-1] != c.root:
        path.append(parents[path[-1]])
    path.reverse()
    return tuple(path)


def graft(
    g1: TypedTemporalGraph,
    p: ActionId,
    g2: TypedTemporalGraph,
    r2: ActionId,
) -> TypedTemporalGraph:
    """Union of two node-disjoint graphs plus the single new edge (p, r2).

    Timestamp, type and payload maps are merged; the declared type sets are
    merged by union. No temporal compatibility is checked here.
    """
    if p not in g1.nodes:
        raise UnknownNodeError(f"attach point {p.hex} is not in the host graph")
    if r2 not in g2.nodes:
        raise UnknownNodeError(f"graft root {r2.hex} is not in the grafted graph")
    overlap = g1.nodes & g2.nodes
    if overlap:
        sample = ", ".join(n.hex for n in sorted(overlap)[:3])
        raise DisjointnessError(f"node sets overlap ({len(overlap)} shared, e.g. {sample})")
    return TypedTemporalGraph(
        nodes=g1.nodes | g2.nodes,
        edges=g1.edges | g2.edges | {(p, r2)},
        t={**g1.t, **g2.t},
        tau={**g1.tau, **g2.tau},
        type_set=g1.type_set | g2.type_set,
        payloads={**g1.payloads, **g2.payloads},
    )


def graft_cteg(c1: Cteg, p: ActionId, c2: Cteg) -> Cteg:
    """Compose two CTEGs by grafting `c2` under node `p` of `c1`.

    Succeeds exactly when t(p) < t(root of c2); the grafted edge is the only
    place where well-formedness could break, so this check is necessary and
    sufficient.
    """
    g = graft(c1.graph, p, c2.graph, c2.root)
    if not c1.graph.t[p] < c2.graph.t[c2.root]:
        raise CompatibilityError(
            f"attach point t={c1.graph.t[p].micros} is not strictly below grafted root "
            f"t={c2.graph.t[c2.root].micros}"
        )
    return Cteg(g, c1.root)


def temporal_projection(c: Cteg) -> tuple[ActionId, ...]:
    """Enumerate all nodes in nondecreasing timestamp order.

    Ties are broken by ascending node id so the projection is a deterministic
    function of the graph.
    """
    return tuple(sorted(c.graph.nodes, key=lambda n: (c.graph.t[n], n)))


def height(c: Cteg) -> int:
    """Edge count of the longest root-to-leaf path."""
    children = c.graph.children_map()
    best = 0
    stack = [(c.root, 0)]
    while stack:
        n, d = stack.pop()
        best = max(best, d)
        for ch in children[n]:
            stack.append((ch, d + 1))
    return best
