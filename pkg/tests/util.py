"""Shared builders and independent oracles for the test suite.

The enumerators and checkers here are deliberately written from scratch
(walk-up acyclicity checks, direct dict surgery, struct-level file walking)
so they can serve as independent references for the production code paths
they are used to test.
"""

from __future__ import annotations

import random
import struct
from itertools import product

from hypothesis import strategies as st

from cteg import (
    ActionId,
    Cteg,
    EventType,
    ExecutionSequence,
    Timestamp,
    TypedTemporalGraph,
)


def aid(i: int) -> ActionId:
    return ActionId.from_int(i)


def ts(m: int) -> Timestamp:
    return Timestamp(m)


def ty(name: str) -> EventType:
    return EventType(name)


def hexid(i: int) -> str:
    return f"{i:032x}"


def graph(
    nodes: dict[int, int],
    edges: set[tuple[int, int]],
    types: dict[int, str] | None = None,
    payloads: dict[int, bytes] | None = None,
    type_set: set[str] | None = None,
) -> TypedTemporalGraph:
    """Small-graph builder keyed by ints: nodes maps id -> timestamp micros."""
    types = types or {}
    payloads = payloads or {}
    tau = {aid(n): ty(types.get(n, "evt")) for n in nodes}
    declared = {t.name for t in tau.values()} | (type_set or set())
    return TypedTemporalGraph(
        nodes=frozenset(aid(n) for n in nodes),
        edges=frozenset((aid(a), aid(b)) for a, b in edges),
        t={aid(n): ts(m) for n, m in nodes.items()},
        tau=tau,
        type_set=frozenset(ty(name) for name in declared),
        payloads={aid(n): p for n, p in payloads.items()},
    )


def cteg(
    nodes: dict[int, int],
    edges: set[tuple[int, int]],
    root: int,
    **kwargs,
) -> Cteg:
    return Cteg(graph(nodes, edges, **kwargs), aid(root))


_TYPE_POOL = ("task", "tool", "result", "note")


def random_cteg(
    rng: random.Random,
    n_nodes: int,
    root_ts: int | None = None,
    with_payloads: bool = True,
) -> Cteg:
    """Random tree built directly: each node hangs under an earlier one."""
    ids = [ActionId(rng.randbytes(16)) for _ in range(n_nodes)]
    root = ids[0]
    t = {root: ts(root_ts if root_ts is not None else rng.randint(0, 500))}
    edges: set[tuple[ActionId, ActionId]] = set()
    for i in range(1, n_nodes):
        parent = ids[rng.randrange(i)]
        edges.add((parent, ids[i]))
        t[ids[i]] = ts(t[parent].micros + rng.randint(1, 40))
    tau = {n: ty(rng.choice(_TYPE_POOL)) for n in ids}
    payloads = {n: rng.randbytes(rng.randint(0, 8)) for n in ids} if with_payloads else {}
    g = TypedTemporalGraph(
        nodes=frozenset(ids),
        edges=frozenset(edges),
        t=t,
        tau=tau,
        type_set=frozenset(tau.values()),
        payloads=payloads,
    )
    return Cteg(g, root)


@st.composite
def ctegs(draw, max_nodes: int = 12) -> Cteg:
    seed = draw(st.integers(min_value=0, max_value=2**32 - 1))
    n = draw(st.integers(min_value=1, max_value=max_nodes))
    return random_cteg(random.Random(seed), n)


def all_simple_paths(g: TypedTemporalGraph, src: ActionId, dst: ActionId) -> list[tuple[ActionId, ...]]:
    """Brute-force every simple directed path src..dst by DFS over edges."""
    adjacency: dict[ActionId, list[ActionId]] = {n: [] for n in g.nodes}
    for a, b in g.edges:
        adjacency[a].append(b)
    found: list[tuple[ActionId, ...]] = []

    def walk(path: list[ActionId]) -> None:
        if path[-1] == dst:
            found.append(tuple(path))
            return
        for nxt in adjacency[path[-1]]:
            if nxt not in path:
                walk(path + [nxt])

    walk([src])
    return found


def brute_force_in_degrees(g: TypedTemporalGraph) -> dict[ActionId, int]:
    """Count incoming edges by direct scan, independent of the cached map."""
    return {n: sum(1 for _, b in g.edges if b == n) for n in g.nodes}


# ---------------------------------------------------------------------------
# Independent bounded-universe enumeration (reference for phi / hierarchy).
#
# Sequences are represented as bare tuples of TypedTemporalGraph so that
# nothing here depends on ExecutionSequence semantics.


def _reaches_root(parent: dict[ActionId, ActionId], root: ActionId, n: ActionId, limit: int) -> bool:
    for _ in range(limit + 1):
        if n == root:
            return True
        if n not in parent:
            return False
        n = parent[n]
    return False


def enumerate_trees(ids: tuple, stamps: tuple, types: tuple) -> list[tuple[TypedTemporalGraph, ActionId]]:
    """Every CTEG (as graph plus root) on any non-empty subset of `ids`.

    Trees come from raw parent assignments checked by walking up to the
    root; timestamps are filtered edge-wise.
    """
    out: list[tuple[TypedTemporalGraph, ActionId]] = []
    pool = list(ids)
    for mask in range(1, 1 << len(pool)):
        chosen = [pool[i] for i in range(len(pool)) if mask >> i & 1]
        for root in chosen:
            rest = [n for n in chosen if n != root]
            for parents in product(chosen, repeat=len(rest)):
                parent = dict(zip(rest, parents))
                if not all(_reaches_root(parent, root, n, len(chosen)) for n in rest):
                    continue
                for stamps_choice in product(stamps, repeat=len(chosen)):
                    t = dict(zip([root] + rest, stamps_choice))
                    if any(not t[parent[n]] < t[n] for n in rest):
                        continue
                    for types_choice in product(types, repeat=len(chosen)):
                        tau = dict(zip([root] + rest, types_choice))
                        g = TypedTemporalGraph(
                            nodes=frozenset(chosen),
                            edges=frozenset((parent[n], n) for n in rest),
                            t=t,
                            tau=tau,
                            type_set=frozenset(types),
                        )
                        out.append((g, root))
    return out


def _extend_by_union(
    g: TypedTemporalGraph,
    extra: TypedTemporalGraph,
    new_edges: set,
) -> TypedTemporalGraph:
    return TypedTemporalGraph(
        nodes=g.nodes | extra.nodes,
        edges=g.edges | extra.edges | new_edges,
        t={**g.t, **extra.t},
        tau={**g.tau, **extra.tau},
        type_set=g.type_set | extra.type_set,
        payloads={**g.payloads, **extra.payloads},
    )


def enumerate_closure(ids: tuple, stamps: tuple, types: tuple, max_len: int) -> set[tuple]:
    """All bounded graph chains built by emissions or whole-CTEG grafts.

    This is the recursive-closure universe written from the definitions:
    each step either emits a non-empty batch under one node or grafts an
    arbitrary valid in-bounds CTEG on unused ids with a strictly later root.
    """
    trees = enumerate_trees(ids, stamps, types)
    starts = [
        TypedTemporalGraph.trivial(a, s, t, type_set=frozenset(types))
        for a in ids
        for s in stamps
        for t in types
    ]
    result: set[tuple] = {(g,) for g in starts}
    frontier: list[tuple] = [(g,) for g in starts]
    for _ in range(max_len - 1):
        nxt: list[tuple] = []
        for chain in frontier:
            g = chain[-1]
            free = [a for a in ids if a not in g.nodes]
            successors: list[TypedTemporalGraph] = []
            # emissions: every non-empty assignment of free ids to (ts, ty)
            for p in g.nodes:
                later = [s for s in stamps if g.t[p] < s]
                slots = [
                    [None] + [(s, t) for s in later for t in types]
                    for _ in free
                ]
                for assignment in product(*slots):
                    picked = {a: v for a, v in zip(free, assignment) if v is not None}
                    if not picked:
                        continue
                    extra = TypedTemporalGraph(
                        nodes=frozenset(picked),
                        edges=frozenset(),
                        t={a: s for a, (s, _t) in picked.items()},
                        tau={a: t for a, (_s, t) in picked.items()},
                        type_set=g.type_set,
                    )
                    successors.append(_extend_by_union(g, extra, {(p, a) for a in picked}))
            # grafts: any enumerated tree on ids unused by g, attached below p
            for tree, root in trees:
                if tree.nodes & g.nodes:
                    continue
                for p in g.nodes:
                    if g.t[p] < tree.t[root]:
                        successors.append(_extend_by_union(g, tree, {(p, root)}))
            for g2 in successors:
                chain2 = chain + (g2,)
                if chain2 not in result:
                    result.add(chain2)
                    nxt.append(chain2)
        frontier = nxt
    return result


def chains_of(seqs) -> set[tuple]:
    return {tuple(s.graphs) for s in seqs}


def junk_sequence(ids: tuple, stamps: tuple, types: tuple) -> ExecutionSequence:
    """A legal chain that is not a member: its lone graph is not a single root."""
    a, b = ids[0], ids[1]
    g = TypedTemporalGraph(
        nodes=frozenset({a, b}),
        edges=frozenset({(a, b), (b, a)}),
        t={a: stamps[0], b: stamps[0]},
        tau={a: types[0], b: types[0]},
        type_set=frozenset(types),
    )
    return ExecutionSequence((g,), ())


# ---------------------------------------------------------------------------
# Store file walking (independent of the persistence decoder).


def record_boundaries(data: bytes, magic_len: int) -> list[int]:
    """Offsets of every record boundary in a store file, including the header."""
    offsets = [magic_len]
    pos = magic_len
    while pos + 4 <= len(data):
        (length,) = struct.unpack_from("<I", data, pos)
        if pos + 4 + length > len(data):
            break
        pos += 4 + length
        offsets.append(pos)
    return offsets


# ---------------------------------------------------------------------------
# Validity-preserving single mutations (reference corpus for tamper tests).


def mutate_cteg(rng: random.Random, c: Cteg) -> tuple[Cteg, str]:
    """Apply one random structural or content mutation, keeping validity."""
    g = c.graph
    kind = rng.choice(("ts", "type", "payload", "leaf_add", "leaf_remove", "reparent"))
    nodes = sorted(g.nodes)
    children = g.children_map()
    leaves = [n for n in nodes if not children[n]]

    if kind == "ts":
        n = rng.choice(leaves)
        t2 = {**g.t, n: ts(g.t[n].micros + 1)}
        return Cteg(
            TypedTemporalGraph(g.nodes, g.edges, t2, g.tau, g.type_set, g.payloads), c.root
        ), f"ts+1 on {n.hex[:8]}"

    if kind == "type":
        n = rng.choice(nodes)
        new_type = ty("mutated")
        tau2 = {**g.tau, n: new_type}
        return Cteg(
            TypedTemporalGraph(g.nodes, g.edges, g.t, tau2, g.type_set | {new_type}, g.payloads),
            c.root,
        ), f"type change on {n.hex[:8]}"

    if kind == "payload":
        n = rng.choice(nodes)
        old = g.payloads[n]
        new = bytes([old[0] ^ 1]) + old[1:] if old else b"\x01"
        return Cteg(
            TypedTemporalGraph(g.nodes, g.edges, g.t, g.tau, g.type_set, {**g.payloads, n: new}),
            c.root,
        ), f"payload flip on {n.hex[:8]}"

    if kind == "leaf_add":
        parent = rng.choice(nodes)
        fresh = ActionId(rng.randbytes(16))
        return Cteg(
            TypedTemporalGraph(
                g.nodes | {fresh},
                g.edges | {(parent, fresh)},
                {**g.t, fresh: ts(g.t[parent].micros + 1)},
                {**g.tau, fresh: g.tau[parent]},
                g.type_set,
                {**g.payloads, fresh: b""},
            ),
            c.root,
        ), f"leaf added under {parent.hex[:8]}"

    if kind == "leaf_remove" and len(nodes) > 1:
        n = rng.choice([x for x in leaves if x != c.root])
        keep = g.nodes - {n}
        return Cteg(
            TypedTemporalGraph(
                keep,
                frozenset(e for e in g.edges if n not in e),
                {k: v for k, v in g.t.items() if k != n},
                {k: v for k, v in g.tau.items() if k != n},
                g.type_set,
                {k: v for k, v in g.payloads.items() if k != n},
            ),
            c.root,
        ), f"leaf {n.hex[:8]} removed"

    if kind == "reparent" and len(nodes) > 2:
        parents = c.parent_map()
        candidates = [
            (n, p2)
            for n in leaves
            if n != c.root
            for p2 in nodes
            if p2 not in (n, parents[n]) and g.t[p2] < g.t[n]
        ]
        if candidates:
            n, p2 = rng.choice(candidates)
            edges2 = (g.edges - {(parents[n], n)}) | {(p2, n)}
            return Cteg(
                TypedTemporalGraph(g.nodes, edges2, g.t, g.tau, g.type_set, g.payloads), c.root
            ), f"{n.hex[:8]} reparented under {p2.hex[:8]}"

    return mutate_cteg(rng, c)  # fall through to another kind
