"""Finite membership graphs with an anchor tuple, and their enumeration.

A structure is a finite DAG whose edge (u, v) means "v is an element of u",
together with a tuple of anchor nodes.  A structure is valid at parameters
(k, m) when it is acyclic with out-degree at most k, every node is reachable
from some tuple entry in at most m steps, and it is extensional with respect
to the determined node set U = {reachable in fewer than m steps} union
{out-degree exactly k}: distinct nodes of U have distinct child sets.

Valid structures at (k, m) are exactly the graphs that occur as the depth-m
membership closure of a tuple inside a model of the hereditarily-k-bounded
set theory, which is what makes them the state space of the decision
algorithms in :mod:`hksets.decide`.
"""

from __future__ import annotations

from itertools import combinations
from typing import Iterator, Sequence

from .bounds import geom_sum
from .runtime import Caps, CapExceeded, DEFAULT_CAPS, MalformedStructure, Stats

__all__ = [
    "TclStructure", "validate", "restrict", "canonicalize", "canonical_key",
    "isomorphic", "embeds", "compatible", "extensions", "enumerate_structures",
]


class TclStructure:
    """Immutable membership graph with anchor tuple.

    nodes: frozenset of node ids (strings); edges: frozenset of (u, v) pairs
    with v an element of u; tup: the anchor tuple (entries may repeat).
    """

    __slots__ = ("nodes", "edges", "tup", "_hash", "_key")

    def __init__(self, nodes, edges, tup):
        object.__setattr__(self, "nodes", frozenset(nodes))
        object.__setattr__(self, "edges", frozenset((u, v) for u, v in edges))
        object.__setattr__(self, "tup", tuple(tup))
        object.__setattr__(self, "_hash", None)
        object.__setattr__(self, "_key", None)

    def __setattr__(self, name, value):
        raise AttributeError("TclStructure is immutable")

    def __eq__(self, other):
        if not isinstance(other, TclStructure):
            return NotImplemented
        return (self.nodes == other.nodes and self.edges == other.edges
                and self.tup == other.tup)

    def __hash__(self):
        h = self._hash
        if h is None:
            h = hash((self.nodes, self.edges, self.tup))
            object.__setattr__(self, "_hash", h)
        return h

    def __repr__(self):
        return (f"TclStructure(nodes={sorted(self.nodes)!r}, "
                f"edges={sorted(self.edges)!r}, tup={self.tup!r})")

    def children(self, u: str) -> frozenset[str]:
        return frozenset(v for (a, v) in self.edges if a == u)

    def check_wellformed(self) -> None:
        for u, v in self.edges:
            if u not in self.nodes or v not in self.nodes:
                raise MalformedStructure(f"edge ({u!r}, {v!r}) leaves the node set")
        for t in self.tup:
            if t not in self.nodes:
                raise MalformedStructure(f"tuple entry {t!r} is not a node")

    def to_json_dict(self) -> dict:
        return {
            "nodes": sorted(self.nodes),
            "edges": sorted([u, v] for (u, v) in self.edges),
            "tuple": list(self.tup),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "TclStructure":
        try:
            nodes = data["nodes"]
            edges = data["edges"]
            tup = data["tuple"]
        except (KeyError, TypeError) as exc:
            raise MalformedStructure(f"bad structure object: {exc}") from exc
        s = cls(nodes, [(u, v) for u, v in edges], tup)
        s.check_wellformed()
        return s


EMPTY = TclStructure((), (), ())


# ---------------------------------------------------------------------------
# Indexed form used by every algorithm below

class _Graph:
    """Bitmask adjacency view of a structure: node i's children in kids[i]."""

    __slots__ = ("names", "index", "kids", "tup", "n")

    def __init__(self, names: list[str], kids: list[int], tup: tuple[int, ...]):
        self.names = names
        self.index = {name: i for i, name in enumerate(names)}
        self.kids = kids
        self.tup = tup
        self.n = len(names)

    @classmethod
    def from_structure(cls, s: TclStructure) -> "_Graph":
        names = sorted(s.nodes)
        index = {name: i for i, name in enumerate(names)}
        kids = [0] * len(names)
        for u, v in s.edges:
            kids[index[u]] |= 1 << index[v]
        return cls(names, kids, tuple(index[t] for t in s.tup))

    def reach(self, start: int, steps: int) -> tuple[int, int]:
        """(nodes within <= steps, nodes within < steps) from the start mask."""
        reach = start
        below = start if steps > 0 else 0
        cur = start
        for step in range(steps):
            nxt = 0
            c = cur
            while c:
                b = c & -c
                nxt |= self.kids[b.bit_length() - 1]
                c ^= b
            nxt &= ~reach
            if not nxt:
                break
            reach |= nxt
            if step < steps - 1:
                below |= nxt
            cur = nxt
        return reach, below

    def acyclic(self) -> bool:
        indeg = [0] * self.n
        for ks in self.kids:
            c = ks
            while c:
                b = c & -c
                indeg[b.bit_length() - 1] += 1
                c ^= b
        stack = [i for i in range(self.n) if indeg[i] == 0]
        seen = 0
        while stack:
            u = stack.pop()
            seen += 1
            c = self.kids[u]
            while c:
                b = c & -c
                v = b.bit_length() - 1
                c ^= b
                indeg[v] -= 1
                if indeg[v] == 0:
                    stack.append(v)
        return seen == self.n


def _tuple_mask(g: _Graph) -> int:
    mask = 0
    for t in g.tup:
        mask |= 1 << t
    return mask


def _popcount(x: int) -> int:
    return x.bit_count()


def _valid_graph(g: _Graph, k: int, m: int) -> bool:
    if g.n == 0:
        return True
    if any(_popcount(ks) > k for ks in g.kids):
        return False
    reach, below = g.reach(_tuple_mask(g), m)
    if reach != (1 << g.n) - 1:
        return False
    if not g.acyclic():
        return False
    seen = set()
    for i in range(g.n):
        if (below >> i & 1) or _popcount(g.kids[i]) == k:
            if g.kids[i] in seen:
                return False
            seen.add(g.kids[i])
    return True


def validate(s: TclStructure, k: int, m: int) -> bool:
    """True iff s is a valid structure at (k, m); malformed input raises."""
    if k < 0 or m < 0:
        raise ValueError("validate needs k, m >= 0")
    s.check_wellformed()
    return _valid_graph(_Graph.from_structure(s), k, m)


def restrict(s: TclStructure, m_sub: int, indices: Sequence[int] | None = None) -> TclStructure:
    """Induced substructure on nodes within m_sub steps of selected tuple entries.

    indices selects tuple positions (default: all); the result's tuple is the
    selected subsequence.
    """
    if indices is None:
        indices = range(len(s.tup))
    sel = [s.tup[i] for i in indices]
    g = _Graph.from_structure(s)
    start = 0
    for t in sel:
        start |= 1 << g.index[t]
    reach, _ = g.reach(start, m_sub) if sel else (0, 0)
    keep = {g.names[i] for i in range(g.n) if reach >> i & 1}
    edges = [(u, v) for (u, v) in s.edges if u in keep and v in keep]
    return TclStructure(keep, edges, sel)


# ---------------------------------------------------------------------------
# Canonical labeling: partition refinement plus branching on ties

def _refine(n: int, kids: list[int], parents: list[int], colors: list[int]) -> list[int]:
    while True:
        sigs = []
        for i in range(n):
            ck = []
            c = kids[i]
            while c:
                b = c & -c
                ck.append(colors[b.bit_length() - 1])
                c ^= b
            ck.sort()
            cp = []
            c = parents[i]
            while c:
                b = c & -c
                cp.append(colors[b.bit_length() - 1])
                c ^= b
            cp.sort()
            sigs.append((colors[i], tuple(ck), tuple(cp)))
        order = sorted(set(sigs))
        if len(order) == len(set(colors)):
            return colors
        remap = {sig: j for j, sig in enumerate(order)}
        colors = [remap[sig] for sig in sigs]


def _encode(n: int, kids: list[int], tup: tuple[int, ...],
            pins: list | None, colors: list[int]):
    # colors discrete: node order by color
    pos = [0] * n
    for i in range(n):
        pos[colors[i]] = i
    edges = []
    for i in range(n):
        c = kids[i]
        while c:
            b = c & -c
            edges.append((colors[i], colors[b.bit_length() - 1]))
            c ^= b
    edges.sort()
    enc = (n, tuple(colors[t] for t in tup), tuple(edges))
    if pins is not None:
        enc = enc + (tuple(sorted((colors[i], pins[i]) for i in range(n)
                                  if pins[i] is not None)),)
    return enc, pos


def _canonical_search(n: int, kids: list[int], tup: tuple[int, ...],
                      pins: list | None):
    """Minimal encoding over all isomorphism-respecting orderings."""
    if n == 0:
        return (0, tuple(), tuple()) + (((),) if pins is not None else ()), []

    parents = [0] * n
    for i in range(n):
        c = kids[i]
        while c:
            b = c & -c
            parents[b.bit_length() - 1] |= 1 << i
            c ^= b

    tup_pos: list[tuple[int, ...]] = [()] * n
    by_node: dict[int, list[int]] = {}
    for p, t in enumerate(tup):
        by_node.setdefault(t, []).append(p)
    for t, ps in by_node.items():
        tup_pos[t] = tuple(ps)

    base = [(pins[i] if pins else None, tup_pos[i],
             _popcount(kids[i]), _popcount(parents[i])) for i in range(n)]
    order = sorted(set(base), key=repr)
    remap = {v: j for j, v in enumerate(order)}
    colors = [remap[v] for v in base]

    best: list = [None, None]

    def descend(colors: list[int]) -> None:
        if len(set(colors)) < n:
            colors = _refine(n, kids, parents, colors)
        counts: dict[int, int] = {}
        for c in colors:
            counts[c] = counts.get(c, 0) + 1
        target = None
        for c in sorted(counts):
            if counts[c] > 1:
                target = c
                break
        if target is None:
            enc, pos = _encode(n, kids, tup, pins, colors)
            if best[0] is None or enc < best[0]:
                best[0], best[1] = enc, pos
            return
        # individualize each member of the first non-singleton cell
        for i in range(n):
            if colors[i] == target:
                nxt = [c + 1 if c > target else c for c in colors]
                nxt[i] = target + 1
                descend(nxt)

    descend(colors)
    return best[0], best[1]


def _key_bytes(enc) -> bytes:
    # compact byte packing: node indices fit one byte (node cap is 64)
    n, tup, edges = enc[0], enc[1], enc[2]
    parts = [bytes([n]), bytes(tup), b"|"]
    flat = bytearray()
    for u, v in edges:
        flat.append(u)
        flat.append(v)
    parts.append(bytes(flat))
    if len(enc) > 3:
        parts.append(b"!" + repr(enc[3]).encode())
    return b"".join(parts)


def canonical_key(s: TclStructure, pinned: dict[str, str] | None = None) -> bytes:
    """Byte key identifying s up to isomorphism (tuple positions fixed).

    With `pinned`, isomorphisms must additionally fix the pinned nodes'
    labels, so keys distinguish how a structure attaches to shared nodes.
    """
    if not pinned:
        key = s._key
        if key is not None:
            return key
    g = _Graph.from_structure(s)
    pins = [pinned.get(name) for name in g.names] if pinned else None
    enc, _ = _canonical_search(g.n, g.kids, g.tup, pins)
    key = _key_bytes(enc)
    if not pinned:
        object.__setattr__(s, "_key", key)
    return key


def _decode_key(key: bytes):
    n = key[0]
    bar = key.index(b"|")
    tup = tuple(key[1:bar])
    flat = key[bar + 1:]
    edges = tuple((flat[i], flat[i + 1]) for i in range(0, len(flat), 2))
    return n, tup, edges


def canonicalize(s: TclStructure) -> tuple[TclStructure, bytes]:
    """Deterministically relabeled representative plus its canonical key."""
    key = canonical_key(s)
    n, tup, edges = _decode_key(key)
    out = TclStructure(
        (f"n{i}" for i in range(n)),
        ((f"n{u}", f"n{v}") for (u, v) in edges),
        (f"n{t}" for t in tup),
    )
    object.__setattr__(out, "_key", key)
    return out, key


def isomorphic(s1: TclStructure, s2: TclStructure) -> bool:
    """True iff an edge-preserving bijection maps tuple to tuple positionwise."""
    if (len(s1.nodes) != len(s2.nodes) or len(s1.edges) != len(s2.edges)
            or len(s1.tup) != len(s2.tup)):
        return False
    return canonical_key(s1) == canonical_key(s2)


def embeds(s1: TclStructure, s2: TclStructure) -> bool:
    """True iff an injective map s1 -> s2 preserves and reflects edges and
    sends tuple to tuple positionwise."""
    if len(s1.tup) != len(s2.tup):
        raise ValueError("embeds requires equal tuple lengths")
    if len(s1.nodes) > len(s2.nodes) or len(s1.edges) > len(s2.edges):
        return False
    g1 = _Graph.from_structure(s1)
    g2 = _Graph.from_structure(s2)
    par1 = [0] * g1.n
    for i in range(g1.n):
        c = g1.kids[i]
        while c:
            b = c & -c
            par1[b.bit_length() - 1] |= 1 << i
            c ^= b
    par2 = [0] * g2.n
    for i in range(g2.n):
        c = g2.kids[i]
        while c:
            b = c & -c
            par2[b.bit_length() - 1] |= 1 << i
            c ^= b

    assign: dict[int, int] = {}
    used = set()

    def consistent(u: int, t: int) -> bool:
        if _popcount(g1.kids[u]) > _popcount(g2.kids[t]):
            return False
        if _popcount(par1[u]) > _popcount(par2[t]):
            return False
        for v, w in assign.items():
            if (g1.kids[u] >> v & 1) != (g2.kids[t] >> w & 1):
                return False
            if (g1.kids[v] >> u & 1) != (g2.kids[w] >> t & 1):
                return False
        return True

    # forced tuple assignment
    for p in range(len(s1.tup)):
        u = g1.index[s1.tup[p]]
        t = g2.index[s2.tup[p]]
        if u in assign:
            if assign[u] != t:
                return False
            continue
        if t in used or not consistent(u, t):
            return False
        assign[u] = t
        used.add(t)

    rest = [u for u in range(g1.n) if u not in assign]
    targets = list(range(g2.n))

    def search(i: int) -> bool:
        if i == len(rest):
            return True
        u = rest[i]
        for t in targets:
            if t in used or not consistent(u, t):
                continue
            assign[u] = t
            used.add(t)
            if search(i + 1):
                return True
            del assign[u]
            used.discard(t)
        return False

    return search(0)


# ---------------------------------------------------------------------------
# Compatibility of two structures sharing node identifiers

def _restrict_names(children: dict[str, set[str]], tup: Sequence[str], m: int):
    """(node set, induced edge set) of the <=m reach of tup in a named graph."""
    reach = set(tup)
    cur = set(tup)
    for _ in range(m):
        nxt = set()
        for u in cur:
            nxt |= children.get(u, set())
        nxt -= reach
        if not nxt:
            break
        reach |= nxt
        cur = nxt
    edges = {(u, v) for u in reach for v in children.get(u, ()) if v in reach}
    return reach, edges


def compatible(s1: TclStructure, k: int, m: int, s2: TclStructure, m2: int) -> bool:
    """True iff s1 at level m and s2 at level m2 jointly occur in one model.

    Forms the union structure W (shared identifiers merge) and checks:
    W is acyclic with out-degree <= k; every W node is within m steps of an
    s1 tuple entry or within m2 steps of an s2 tuple entry; W is extensional
    with respect to U = {< m from s1 tuple} | {< m2 from s2 tuple} |
    {out-degree exactly k}; and the level-m / level-m2 restrictions of W to
    the respective tuples literally equal s1 and s2.
    """
    nodes = sorted(s1.nodes | s2.nodes)
    index = {x: i for i, x in enumerate(nodes)}
    n = len(nodes)
    kids = [0] * n
    kids1 = [0] * n
    kids2 = [0] * n
    for u, v in s1.edges:
        kids1[index[u]] |= 1 << index[v]
    for u, v in s2.edges:
        kids2[index[u]] |= 1 << index[v]
    for i in range(n):
        kids[i] = kids1[i] | kids2[i]
    g = _Graph(nodes, kids, ())

    if any(ks.bit_count() > k for ks in kids):
        return False
    if not g.acyclic():
        return False

    m1_start = 0
    for t in s1.tup:
        m1_start |= 1 << index[t]
    m2_start = 0
    for t in s2.tup:
        m2_start |= 1 << index[t]
    reach1, below1 = g.reach(m1_start, m) if s1.tup else (0, 0)
    reach2, below2 = g.reach(m2_start, m2) if s2.tup else (0, 0)
    if (reach1 | reach2) != (1 << n) - 1 and n > 0:
        return False

    seen = set()
    for i in range(n):
        if (below1 >> i & 1) or (below2 >> i & 1) or kids[i].bit_count() == k:
            if kids[i] in seen:
                return False
            seen.add(kids[i])

    # literal restriction equality: same node sets, same induced edges
    mask1 = 0
    for x in s1.nodes:
        mask1 |= 1 << index[x]
    if reach1 != mask1:
        return False
    mask2 = 0
    for x in s2.nodes:
        mask2 |= 1 << index[x]
    if reach2 != mask2:
        return False
    for i in range(n):
        ks = kids[i]
        if reach1 >> i & 1 and ks & reach1 != kids1[i]:
            return False
        if reach2 >> i & 1 and ks & reach2 != kids2[i]:
            return False
    return True


# ---------------------------------------------------------------------------
# Enumeration of compatible extensions

def _fresh_start(names) -> int:
    start = 0
    for name in names:
        if name.startswith("_f") and name[2:].isdigit():
            start = max(start, int(name[2:]) + 1)
    return start


def extensions(s: TclStructure, k: int, m: int, p: int, m2: int, *,
               caps: Caps = DEFAULT_CAPS, stats: Stats | None = None,
               ) -> Iterator[TclStructure]:
    """Enumerate level-m2 structures extending s's tuple by p new entries.

    Yields one representative per isomorphism class fixing s's nodes
    pointwise, of valid structures S' whose tuple is s.tup extended by p
    entries (existing nodes or fresh ones) such that s at level m and S' at
    level m2 are compatible.  Lazy and deterministic; every yielded structure
    passes the literal `compatible` predicate.

    The search grows S' breadth-first from its tuple.  Fresh nodes and
    not-yet-included nodes of s enter at their true distance; nodes of s
    inside the open level-m reach of s's own tuple never gain out-edges
    (any new child would enlarge s's restriction); edges between nodes of s
    are exactly those of s.  These prunes are necessary conditions of the
    compatibility predicate, which is still applied in full to every
    candidate before it is yielded.
    """
    if p < 0 or m2 < 0:
        raise ValueError("extensions needs p, m2 >= 0")
    node_bound = (len(s.tup) + p) * geom_sum(k, m2)
    if node_bound > caps.max_nodes:
        raise CapExceeded(
            f"extension node bound {node_bound} exceeds cap {caps.max_nodes}")

    snames = sorted(s.nodes)
    schildren: dict[str, set[str]] = {u: set() for u in snames}
    for u, v in s.edges:
        schildren[u].add(v)
    souts = {u: len(schildren[u]) for u in snames}

    sdepth: dict[str, int] = {}
    cur = []
    for t in s.tup:
        if t not in sdepth:
            sdepth[t] = 0
            cur.append(t)
    d = 0
    while cur:
        d += 1
        nxt = []
        for u in cur:
            for v in schildren[u]:
                if v not in sdepth:
                    sdepth[v] = d
                    nxt.append(v)
        cur = nxt
    frozen = {u for u in snames if sdepth.get(u, m) < m}

    fresh_base = _fresh_start(s.nodes)
    seen_keys: set[bytes] = set()
    counter = [0]

    # mutable search state, maintained by the recursive generators below
    depth: dict[str, int] = {}
    new_kids: dict[str, list[str]] = {}
    queue: list[str] = []

    def discover(x: str, dx: int) -> bool:
        if x in depth:
            return False
        depth[x] = dx
        queue.append(x)
        return True

    def undo(marks: list[str]) -> None:
        for x in marks:
            del depth[x]
        if marks:
            del queue[-len(marks):]

    def reaches(src: str, dst: str) -> bool:
        # path src -> dst over all of s's edges plus the chosen new edges
        stack = [src]
        seen = {src}
        while stack:
            u = stack.pop()
            if u == dst:
                return True
            for v in schildren.get(u, ()):
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
            for v in new_kids.get(u, ()):
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return False

    def finalize(entries: tuple[str, ...]):
        nodes = set(depth)
        edges = []
        for u in nodes:
            if u in schildren:
                for v in schildren[u]:
                    if v in nodes:
                        edges.append((u, v))
            for v in new_kids.get(u, ()):
                edges.append((u, v))
        cand = TclStructure(nodes, edges, s.tup + entries)
        if not compatible(s, k, m, cand, m2):
            return
        pins = {x: x for x in cand.nodes if x in s.nodes}
        key = canonical_key(cand, pinned=pins)
        if key in seen_keys:
            return
        seen_keys.add(key)
        counter[0] += 1
        if counter[0] > caps.max_classes:
            raise CapExceeded(f"extension scan exceeded {caps.max_classes} classes")
        yield cand

    def choose_children(u: str, dx: int, budget: int, existing: list[str],
                        may_pull_snodes: bool, qi: int,
                        entries: tuple[str, ...], fresh_next: int):
        can_create = dx < m2
        pullable = ([x for x in snames if x not in depth]
                    if (may_pull_snodes and can_create) else [])
        pool = existing + pullable
        max_new = budget if can_create else 0
        for n_new in range(max_new + 1):
            room = budget - n_new
            for chosen in _subsets_upto(pool, room):
                if any(v == u or reaches(v, u) for v in chosen):
                    continue
                news = [f"_f{fresh_next + i}" for i in range(n_new)]
                new_kids[u] = list(chosen) + news
                marks = []
                for x in chosen:
                    if discover(x, dx + 1):
                        marks.append(x)
                for x in news:
                    discover(x, dx + 1)
                    marks.append(x)
                yield from process(qi + 1, entries, fresh_next + n_new)
                undo(marks)
                del new_kids[u]

    def process(qi: int, entries: tuple[str, ...], fresh_next: int):
        if stats is not None:
            stats.check_deadline()
        if len(depth) > node_bound:
            return
        if qi == len(queue):
            yield from finalize(entries)
            return
        u = queue[qi]
        dx = depth[u]
        if u in schildren:
            marks = []
            if dx < m2:
                for v in sorted(schildren[u]):
                    if discover(v, dx + 1):
                        marks.append(v)
            if u in frozen or souts[u] >= k:
                yield from process(qi + 1, entries, fresh_next)
            else:
                fresh_here = sorted(x for x in depth if x not in schildren)
                yield from choose_children(u, dx, k - souts[u], fresh_here,
                                           False, qi, entries, fresh_next)
            undo(marks)
        else:
            existing = sorted(depth)
            yield from choose_children(u, dx, k, existing, True, qi,
                                       entries, fresh_next)

    def patterns(i: int, entries: tuple[str, ...], fresh_next: int):
        if i == p:
            marks = []
            for t in s.tup:
                if discover(t, 0):
                    marks.append(t)
            for e in entries:
                if discover(e, 0):
                    marks.append(e)
            yield from process(0, entries, fresh_next)
            undo(marks)
            return
        for cand in snames:
            yield from patterns(i + 1, entries + (cand,), fresh_next)
        seen_fresh: list[str] = []
        for e in entries:
            if e not in s.nodes and e not in seen_fresh:
                seen_fresh.append(e)
        for e in seen_fresh:
            yield from patterns(i + 1, entries + (e,), fresh_next)
        yield from patterns(i + 1, entries + (f"_f{fresh_next}",), fresh_next + 1)

    return patterns(0, (), fresh_base)


def _subsets_upto(items: list[str], r: int):
    yield ()
    for size in range(1, min(r, len(items)) + 1):
        yield from combinations(items, size)


def enumerate_structures(k: int, m: int, l: int, *, caps: Caps = DEFAULT_CAPS,
                         stats: Stats | None = None) -> Iterator[TclStructure]:
    """One canonical representative per isomorphism class of valid (k, m)
    structures with tuple length l, in a deterministic order."""
    for cand in extensions(EMPTY, k, 0, l, m, caps=caps, stats=stats):
        yield canonicalize(cand)[0]
